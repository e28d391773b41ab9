"""Monte Carlo experiments, L1 diagnostics, and the brute-force enumeration oracle."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainError, SchemaError, TooLarge
from .estimator import GoodTuringVector, good_turing_totals
from .limits import (
    PoissonMixtureVector,
    azuma_bound_xi,
    azuma_bound_zeta,
    expected_xi,
    expected_zeta,
    poisson_mixture,
)
from .sampling import (
    RNG_DERIVATION,
    RNG_NAME,
    TotalProbabilityVector,
    count_frequencies,
    sample_string,
    true_total_probabilities,
)
from .shadow import DistributionSpec, Family, family_from_json, family_to_json

ENUMERATION_CAP = 10**7
L1_METRICS = ("l1_xi_lambda", "l1_zeta_lambda", "l1_zeta_xi")


# -- L1 distance --------------------------------------------------------------------


def _as_dist(d) -> tuple[dict[int, float], int | None, float]:
    """Normalize to (entries, truncation point, mass beyond it)."""
    if isinstance(d, PoissonMixtureVector):
        return d.as_dict(), d.kmax, d.tail_mass
    if isinstance(d, TotalProbabilityVector):
        return dict(d.xi), None, 0.0
    if isinstance(d, GoodTuringVector):
        return {k: float(v) for k, v in d.zeta.items()}, None, 0.0
    if isinstance(d, Mapping):
        return {int(k): float(v) for k, v in d.items()}, None, 0.0
    return {k: float(v) for k, v in enumerate(d)}, None, 0.0


def l1_distance(a, b) -> float:
    """Sum over k of |a_k - b_k|, with compensated summation.

    Inputs are mappings ``k -> mass``, sequences indexed by k, or package
    vector types. A :class:`PoissonMixtureVector` is known only up to its
    ``kmax``; beyond it the comparison is between its ``tail_mass`` and the
    other side's total mass above ``kmax``.
    """
    da, ka, ta = _as_dist(a)
    db, kb, tb = _as_dist(b)
    cuts = [k for k in (ka, kb) if k is not None]
    if not cuts:
        keys = set(da) | set(db)
        return math.fsum(abs(da.get(k, 0.0) - db.get(k, 0.0)) for k in keys)
    cut = min(cuts)
    keys = {k for k in set(da) | set(db) if k <= cut}
    head = [abs(da.get(k, 0.0) - db.get(k, 0.0)) for k in keys]
    above_a = math.fsum([v for k, v in da.items() if k > cut] + [ta])
    above_b = math.fsum([v for k, v in db.items() if k > cut] + [tb])
    return math.fsum(head + [abs(above_a - above_b)])


# -- trials ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialResult:
    n: int
    trial_index: int
    xi: TotalProbabilityVector
    zeta: GoodTuringVector
    l1_xi_lambda: float
    l1_zeta_lambda: float
    l1_zeta_xi: float

    def metrics(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in L1_METRICS}


def run_trial(
    family: Family,
    n: int,
    seed: int,
    trial_index: int,
    lam: PoissonMixtureVector,
    *,
    dist: DistributionSpec | None = None,
) -> TrialResult:
    """Draw one string and score xi, zeta and lambda against each other.

    If the observed frequencies reach past ``lam.kmax``, lambda is
    recomputed out to the largest observed k so that the three distances
    are taken over the same support (and obey the triangle inequality).
    """
    dist = family.dist_at(n) if dist is None else dist
    sample = sample_string(dist, n, seed, stream=(n, trial_index))
    freq = count_frequencies(sample)
    xi = true_total_probabilities(dist, sample)
    zeta = good_turing_totals(freq)
    top = max(max(xi.xi), max(zeta.zeta, default=0))
    if top > lam.kmax:
        lam = poisson_mixture(family.limit_Q, top)
    return TrialResult(
        n=n,
        trial_index=trial_index,
        xi=xi,
        zeta=zeta,
        l1_xi_lambda=l1_distance(xi, lam),
        l1_zeta_lambda=l1_distance(zeta, lam),
        l1_zeta_xi=l1_distance(zeta, xi),
    )


# -- experiments ----------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    family: Family
    n_grid: tuple[int, ...]
    trials: int
    kmax: int = 50
    seed: int = 0
    epsilon_grid: tuple[float, ...] = (0.05, 0.1)

    def __post_init__(self):
        if self.trials < 1:
            raise SchemaError("trials: must be >= 1")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise SchemaError("n_grid: must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise SchemaError("n_grid: must be strictly ascending")
        if self.kmax < 0:
            raise SchemaError("kmax: must be >= 0")
        if any(not e > 0 for e in self.epsilon_grid):
            raise SchemaError("epsilon_grid: entries must be positive")

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> ExperimentConfig:
        if not isinstance(obj, Mapping):
            raise SchemaError("config must be a JSON object")
        fields = {"family", "n_grid", "trials", "kmax", "seed", "epsilon_grid"}
        unknown = set(obj) - fields
        if unknown:
            raise SchemaError(f"unknown fields {sorted(unknown)}")
        for required in ("family", "n_grid", "trials"):
            if required not in obj:
                raise SchemaError(f"{required}: required field missing")

        def integer(name, value):
            if not isinstance(value, int) or isinstance(value, bool):
                raise SchemaError(f"{name}: expected an integer, got {value!r}")
            return value

        n_grid = obj["n_grid"]
        if not isinstance(n_grid, list):
            raise SchemaError("n_grid: expected a list of integers")
        eps = obj.get("epsilon_grid", [0.05, 0.1])
        if not isinstance(eps, list) or not all(
            isinstance(e, (int, float)) and not isinstance(e, bool) for e in eps
        ):
            raise SchemaError("epsilon_grid: expected a list of numbers")
        return cls(
            family=family_from_json(obj["family"]),
            n_grid=tuple(integer("n_grid", n) for n in n_grid),
            trials=integer("trials", obj["trials"]),
            kmax=integer("kmax", obj.get("kmax", 50)),
            seed=integer("seed", obj.get("seed", 0)),
            epsilon_grid=tuple(float(e) for e in eps),
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "family": family_to_json(self.family),
            "n_grid": list(self.n_grid),
            "trials": self.trials,
            "kmax": self.kmax,
            "seed": self.seed,
            "epsilon_grid": list(self.epsilon_grid),
        }


@dataclass
class ExperimentReport:
    """Per-n summaries of the L1 metrics plus the concentration table.

    ``trials`` keeps the per-trial metrics; ``results`` keeps the full
    :class:`TrialResult` objects and is not serialized.
    """

    config: ExperimentConfig
    summary: list[dict[str, Any]]
    deviations: list[dict[str, Any]]
    trials: list[dict[str, Any]]
    metadata: dict[str, Any]
    results: list[TrialResult] = field(default_factory=list, repr=False)

    def rows_for(self, n: int) -> list[TrialResult]:
        return [r for r in self.results if r.n == n]

    def to_json(self) -> dict[str, Any]:
        return {
            "config": self.config.to_json(),
            "metadata": self.metadata,
            "summary": self.summary,
            "deviations": self.deviations,
            "trials": self.trials,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        cols = ["n", "trials"] + [f"{m}_{s}" for m in L1_METRICS for s in ("mean", "median", "max")]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in self.summary:
            writer.writerow([row["n"], row["trials"]] + [repr(row[m][s]) for m in L1_METRICS for s in ("mean", "median", "max")])
        return buf.getvalue()


def binomial_slack(bound: float, trials: int) -> float:
    """Three standard deviations of an empirical frequency with success rate ``bound``."""
    return 3 * math.sqrt(bound * (1 - bound) / trials)


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """Run every (n, trial) pair of ``config``.

    Output does not depend on ``threads``: each trial draws from its own
    stream and results are collected in (n, trial_index) order.
    """
    threads = threads or os.cpu_count() or 1
    lam = poisson_mixture(config.family.limit_Q, config.kmax)
    summary, deviations, trial_rows, results = [], [], [], []
    for n in config.n_grid:
        dist = config.family.dist_at(n)

        def one(t, n=n, dist=dist):
            return run_trial(config.family, n, config.seed, t, lam, dist=dist)

        if threads > 1 and config.trials > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                batch = list(pool.map(one, range(config.trials)))
        else:
            batch = [one(t) for t in range(config.trials)]
        results.extend(batch)

        row: dict[str, Any] = {"n": n, "trials": config.trials}
        for m in L1_METRICS:
            vals = [getattr(r, m) for r in batch]
            row[m] = {
                "mean": math.fsum(vals) / len(vals),
                "median": statistics.median(vals),
                "max": max(vals),
            }
        summary.append(row)
        trial_rows.extend({"n": n, "trial_index": r.trial_index, **r.metrics()} for r in batch)
        deviations.extend(_deviation_rows(config, n, dist, batch))

    metadata = {
        "rng": {"bit_generator": RNG_NAME, "stream_derivation": RNG_DERIVATION, "numpy": np.__version__},
        "lambda": {"kmax": lam.kmax, "values": list(lam.lam), "tail_mass": lam.tail_mass},
    }
    return ExperimentReport(
        config=config,
        summary=summary,
        deviations=deviations,
        trials=trial_rows,
        metadata=metadata,
        results=results,
    )


def _deviation_rows(config, n, dist, batch):
    rows = []
    trials = len(batch)
    for k in range(min(config.kmax, n - 1) + 1):
        e_xi = expected_xi(dist, n, k)
        e_zeta = expected_zeta(dist, n, k)
        dev_xi = [abs(r.xi[k] - e_xi) for r in batch]
        dev_zeta = [abs(float(r.zeta[k]) - e_zeta) for r in batch]
        for eps in config.epsilon_grid:
            b_xi = azuma_bound_xi(n, eps)
            b_zeta = azuma_bound_zeta(n, k, eps)
            f_xi = sum(d > eps for d in dev_xi) / trials
            f_zeta = sum(d > eps for d in dev_zeta) / trials
            rows.append(
                {
                    "n": n,
                    "trials": trials,
                    "k": k,
                    "epsilon": eps,
                    "expected_xi": e_xi,
                    "expected_zeta": e_zeta,
                    "frac_xi": f_xi,
                    "frac_zeta": f_zeta,
                    "bound_xi": b_xi,
                    "bound_zeta": b_zeta,
                    "xi_within_bound": f_xi <= b_xi + binomial_slack(b_xi, trials),
                    "zeta_within_bound": f_zeta <= b_zeta + binomial_slack(b_zeta, trials),
                }
            )
    return rows


# -- brute-force oracle ---------------------------------------------------------------


def brute_force_expectations(
    dist: DistributionSpec, n: int, *, workers: int = 1, block: int = 1 << 15
) -> tuple[list[float], list[float]]:
    """E[xi_k] and E[zeta_k], k = 0..n, by enumerating every length-n string.

    Each string is weighted by its exact probability; sums are compensated.
    With ``workers > 1`` the strings are split by their first symbol and the
    partial sums are combined in symbol order.
    """
    if dist.continuous_mass > 0:
        raise DomainError("enumeration needs a purely atomic distribution")
    if n < 1:
        raise DomainError("n must be >= 1")
    p = dist.symbol_probs()
    size = len(p)
    if size**n > ENUMERATION_CAP:
        raise TooLarge(f"{size}^{n} strings exceeds the cap of {ENUMERATION_CAP}")

    per_first = size ** (n - 1)
    ranges = [(s * per_first, (s + 1) * per_first) for s in range(size)]

    def partial(bounds):
        lo, hi = bounds
        xi_parts = [[] for _ in range(n + 1)]
        phi_parts = [[] for _ in range(n + 1)]
        for start in range(lo, hi, block):
            idx = np.arange(start, min(start + block, hi), dtype=np.int64)
            _enumerate_block(idx, p, n, xi_parts, phi_parts)
        return [math.fsum(v) for v in xi_parts], [math.fsum(v) for v in phi_parts]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(partial, ranges))
    else:
        parts = [partial(r) for r in ranges]

    e_xi = [math.fsum(part[0][k] for part in parts) for k in range(n + 1)]
    # zeta_{j-1} = j * phi_j / n; zeta_n = 0.
    e_phi = [math.fsum(part[1][j] for part in parts) for j in range(n + 1)]
    e_zeta = [(k + 1) * e_phi[k + 1] / n for k in range(n)] + [0.0]
    return e_xi, e_zeta


def _enumerate_block(idx, p, n, xi_parts, phi_parts):
    size = len(p)
    digits = np.empty((idx.size, n), dtype=np.int64)
    rest = idx.copy()
    for j in range(n - 1, -1, -1):
        digits[:, j] = rest % size
        rest //= size
    prob = np.prod(p[digits], axis=1)
    counts = np.zeros((idx.size, size), dtype=np.int64)
    for j in range(n):
        np.add.at(counts, (np.arange(idx.size), digits[:, j]), 1)

    # xi_k(s) = sum of p_a over symbols a seen k times in s.
    weights = (prob[:, None] * p[None, :]).ravel()
    flat = counts.ravel()
    for k in range(n + 1):
        xi_parts[k].append(math.fsum(weights[flat == k].tolist()))
    for j in range(1, n + 1):
        phi_j = (counts == j).sum(axis=1)
        phi_parts[j].append(math.fsum((prob * phi_j).tolist()))


def exact_expectations(dist: DistributionSpec, n: int) -> tuple[list[float], list[float]]:
    """Closed-form counterpart of :func:`brute_force_expectations`."""
    e_xi = [expected_xi(dist, n, k) for k in range(n + 1)]
    e_zeta = [expected_zeta(dist, n, k) for k in range(n)] + [0.0]
    return e_xi, e_zeta

