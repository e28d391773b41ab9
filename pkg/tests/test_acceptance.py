"""Acceptance criteria AC-1 .. AC-9.

Each check prints one ``AC-n PASS|FAIL: detail`` line. Run with
``pytest tests/test_acceptance.py`` (the lines are repeated in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import math
import os
import shlex
import statistics
import subprocess
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from goodturing.estimator import good_turing_totals
from goodturing.harness import (
    ExperimentConfig,
    brute_force_expectations,
    exact_expectations,
    run_experiment,
    run_trial,
)
from goodturing.limits import binomial_kernel, poisson_mixture
from goodturing.sampling import SampleString, count_frequencies, sample_string, true_total_probabilities
from goodturing.shadow import explicit_family, make_distribution, uniform, uniform_family

ROOT = Path(__file__).resolve().parent.parent
RESULTS: list[str] = []


def record(name: str, ok: bool, detail: str) -> None:
    line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# -- AC-1 / AC-2: closed-form means vs enumeration ------------------------------------

ORACLE_DISTS = {
    "uniform-2": uniform(2),
    "uniform-3": uniform(3),
    "uniform-4": uniform(4),
    "quarter-quarter-half": make_distribution([(0.25, 2), (0.5, 1)]),
    "0.7/0.3": make_distribution([(0.7, 1), (0.3, 1)]),
}
_oracle_cache: dict = {}


def _oracle_grid():
    if not _oracle_cache:
        start = time.perf_counter()
        worst_xi = worst_zeta = 0.0
        for dist in ORACLE_DISTS.values():
            for n in range(2, 8):
                if dist.alphabet_size**n > 10**7:
                    continue
                bf_xi, bf_zeta = brute_force_expectations(dist, n)
                ex_xi, ex_zeta = exact_expectations(dist, n)
                worst_xi = max(worst_xi, max(abs(a - b) for a, b in zip(bf_xi, ex_xi)))
                worst_zeta = max(worst_zeta, max(abs(a - b) for a, b in zip(bf_zeta[:n], ex_zeta[:n])))
        _oracle_cache.update(xi=worst_xi, zeta=worst_zeta, seconds=time.perf_counter() - start)
    return _oracle_cache


def test_ac1_mean_of_xi():
    r = _oracle_grid()
    ok = r["xi"] < 1e-12 and r["seconds"] < 10
    record("AC-1", ok, f"max |enumerated E[xi_k] - expected_xi| = {r['xi']:.3g} (< 1e-12), grid time {r['seconds']:.2f}s (< 10s)")


def test_ac2_mean_of_zeta():
    r = _oracle_grid()
    ok = r["zeta"] < 1e-12
    record("AC-2", ok, f"max |enumerated E[zeta_k] - expected_zeta| = {r['zeta']:.3g} (< 1e-12)")


# -- AC-3 / AC-4: uniform family convergence ------------------------------------------

_uniform_cache: dict = {}


def _uniform_runs():
    if not _uniform_cache:
        cfg = ExperimentConfig.from_json(json.loads((ROOT / "configs" / "uniform.json").read_text()))
        start = time.perf_counter()
        rep = run_experiment(cfg)
        _uniform_cache.update(report=rep, seconds=time.perf_counter() - start)
    return _uniform_cache


def _strictly_decreasing(xs):
    return all(b < a for a, b in zip(xs, xs[1:]))


def test_ac3_xi_to_lambda():
    r = _uniform_runs()
    rep = r["report"]
    medians = [row["l1_xi_lambda"]["median"] for row in rep.summary]
    worst = max(t.l1_xi_lambda for t in rep.rows_for(10**5))
    ok = _strictly_decreasing(medians) and worst < 0.05 and r["seconds"] < 60
    record(
        "AC-3",
        ok,
        f"median L1(xi, lambda) over n=1e3,1e4,1e5: {', '.join(f'{m:.4g}' for m in medians)}; "
        f"max at 1e5 = {worst:.4g} (< 0.05); runtime {r['seconds']:.1f}s (< 60s)",
    )


def test_ac4_zeta_to_xi():
    rep = _uniform_runs()["report"]
    medians = [row["l1_zeta_xi"]["median"] for row in rep.summary]
    worst = max(t.l1_zeta_xi for t in rep.rows_for(10**5))
    ok = _strictly_decreasing(medians) and worst < 0.05
    record(
        "AC-4",
        ok,
        f"median L1(zeta, xi): {', '.join(f'{m:.4g}' for m in medians)}; max at 1e5 = {worst:.4g} (< 0.05)",
    )


# -- AC-5: quantized triangular density -----------------------------------------------


def test_ac5_quantized_density():
    cfg = ExperimentConfig.from_json(
        {
            "family": {"kind": "quantized_density", "density": {"grid": [0.0, 1.0], "values": [0.0, 2.0]}},
            "n_grid": [10**5],
            "trials": 20,
            "kmax": 30,
            "seed": 7,
        }
    )
    lam = poisson_mixture(cfg.family.limit_Q, cfg.kmax)
    err0 = abs(lam.lam[0] - (1 - 3 * math.exp(-2)) / 2)
    rep = run_experiment(cfg)
    worst = max(t.l1_xi_lambda for t in rep.results)
    ok = err0 < 1e-9 and worst < 0.1
    record("AC-5", ok, f"|lambda_0 - (1-3e^-2)/2| = {err0:.2g} (< 1e-9); max L1(xi, lambda) at 1e5 = {worst:.4g} (< 0.1)")


# -- AC-6: concentration bounds -------------------------------------------------------


def test_ac6_concentration():
    cfg = ExperimentConfig(
        family=uniform_family(), n_grid=(10**4,), trials=200, kmax=2, seed=2006, epsilon_grid=(0.05, 0.1)
    )
    rep = run_experiment(cfg)
    cells = [row for row in rep.deviations if row["k"] <= 2]
    bad = [row for row in cells if not (row["xi_within_bound"] and row["zeta_within_bound"])]
    worst = max(
        max(row["frac_xi"] - row["bound_xi"], row["frac_zeta"] - row["bound_zeta"]) for row in cells
    )
    ok = len(cells) == 6 and not bad
    record(
        "AC-6",
        ok,
        f"{len(cells)} cells (k=0..2, eps=0.05,0.1) at n=1e4, 200 trials; {len(bad)} exceed bound + 3 sd; "
        f"largest frac - bound = {worst:.3g}",
    )


# -- AC-7: invariants over random cases -----------------------------------------------


def _random_dist(rng):
    k = int(rng.integers(1, 7))
    weights = rng.uniform(0.01, 1.0, size=k)
    mults = np.unique(np.round(np.exp(rng.uniform(0, math.log(10**5), size=k))).astype(int))
    weights = weights[: len(mults)]
    cont = float(rng.choice([0.0, 0.0, 0.1, 0.5]))
    weights = (1 - cont) * weights / weights.sum()
    return make_distribution([(w / m, int(m)) for w, m in zip(weights, mults)], cont)


def _relabel(sample: SampleString, rng, dist) -> SampleString:
    """Same string up to a bijective renaming of the symbols."""
    order = rng.permutation(len(sample.atom_index))
    mults = np.array([m for _, m in dist.atoms], dtype=np.int64)
    slot = sample.slot[order]
    slot = mults[sample.atom_index[order]] - 1 - slot
    return SampleString(
        n=sample.n,
        atom_index=sample.atom_index[order],
        slot=slot,
        symbol_counts=sample.symbol_counts[order],
        continuous_draws=sample.continuous_draws,
    )


def test_ac7_invariants():
    rng = np.random.default_rng(7)
    lam = poisson_mixture(uniform_family().limit_Q, 30)
    failures: dict[str, int] = {"sum_xi": 0, "sum_zeta": 0, "mass": 0, "triangle": 0, "permutation": 0}
    for _ in range(1000):
        dist = _random_dist(rng)
        n = int(rng.integers(1, 10**4 + 1))
        seed = int(rng.integers(0, 2**63))
        family = explicit_family(uniform_family().limit_Q, default=dist)
        trial = run_trial(family, n, seed, 0, lam, dist=dist)
        sample = sample_string(dist, n, seed, stream=(n, 0))
        freq = count_frequencies(sample)

        failures["sum_xi"] += abs(trial.xi.total() - 1) > 1e-12
        failures["sum_zeta"] += trial.zeta.exact_total() != Fraction(1)
        failures["mass"] += sum(k * v for k, v in freq.phi.items()) != n
        failures["triangle"] += trial.l1_zeta_xi > trial.l1_xi_lambda + trial.l1_zeta_lambda + 1e-12

        other = _relabel(sample, rng, dist)
        f2 = count_frequencies(other)
        same = (
            f2.phi == freq.phi
            and true_total_probabilities(dist, other).xi == true_total_probabilities(dist, sample).xi
            and good_turing_totals(f2) == good_turing_totals(freq)
        )
        failures["permutation"] += not same
    ok = not any(failures.values())
    record("AC-7", ok, "1000 random cases; violations " + ", ".join(f"{k}={v}" for k, v in failures.items()))


# -- AC-8: binomial normalization ---------------------------------------------------


def test_ac8_binomial_normalization():
    rng = np.random.default_rng(8)
    worst, large = 0.0, 0
    for _ in range(1000):
        n = int(round(math.exp(rng.uniform(0, math.log(10**6)))))
        y = float(rng.uniform(0, n))
        large += n > 30
        total = math.fsum(binomial_kernel(n, np.arange(n + 1), y).tolist())
        worst = max(worst, abs(total - 1))
    ok = worst < 1e-10 and large > 0
    record("AC-8", ok, f"1000 (n, y) pairs, {large} with n > 30; max |sum_k g - 1| = {worst:.3g} (< 1e-10)")


# -- AC-9: CLI contract ---------------------------------------------------------------


def _sh(cmd: str, env=None) -> subprocess.CompletedProcess:
    full_env = {k: v for k, v in os.environ.items() if k != "GT_SEED"}
    full_env.update(env or {})
    return subprocess.run(cmd, shell=True, capture_output=True, env=full_env)


def test_ac9_cli_contract():
    gt = f"{shlex.quote(sys.executable)} -m goodturing"
    checks: dict[str, bool] = {}
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        tokens = d / "tokens.txt"
        words = np.random.default_rng(9).zipf(1.6, size=20000) % 5000
        tokens.write_text(" ".join(f"w{w}" for w in words) + "\n", encoding="utf-8")

        piped = _sh(f"{gt} count {tokens} | {gt} estimate")
        direct = _sh(f"{gt} estimate {tokens}")
        checks["pipe identity"] = piped.returncode == 0 and piped.stdout == direct.stdout and direct.stdout.count(b"\n") > 1

        cfg = d / "cfg.json"
        cfg.write_text(
            json.dumps({"family": {"kind": "uniform"}, "n_grid": [1000, 10000], "trials": 8, "kmax": 20, "seed": 3})
        )
        outs = []
        for t in (1, 4):
            p = _sh(f"{gt} simulate {cfg} --out-dir {d / f't{t}'} --threads {t}")
            outs.append((p.returncode, p.stdout, (d / f"t{t}" / "report.json").read_bytes(), (d / f"t{t}" / "report.csv").read_bytes()))
        checks["simulate deterministic"] = outs[0][0] == 0 and outs[0] == outs[1]

        (d / "bad.txt").write_bytes(b"fine \xc3\x28 token")
        (d / "badcounts.csv").write_text("k,phi_k\n# n=5\n1,2\n2,1\n")
        (d / "zero.json").write_text(json.dumps({"family": {"kind": "uniform"}, "n_grid": [10], "trials": 0}))
        (d / "wide.json").write_text(json.dumps({"atoms": [], "density": {"grid": [0.0, 1e20], "values": [1e-20, 1e-20]}}))
        expected = {
            2: f"{gt} count {d / 'missing.txt'}",
            3: f"{gt} count {d / 'bad.txt'}",
            4: f"{gt} estimate {d / 'badcounts.csv'}",
            5: f"{gt} simulate {d / 'zero.json'} --out-dir {d}",
            6: f"{gt} limit {d / 'wide.json'}",
        }
        for code, cmd in expected.items():
            p = _sh(cmd)
            checks[f"exit {code}"] = p.returncode == code and p.stdout == b"" and p.stderr != b""
    ok = all(checks.values())
    record("AC-9", ok, "; ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
