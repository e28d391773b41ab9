"""The Good-Turing total-probability estimator and the count-table CSV formats."""

from __future__ import annotations

import io
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction

from .errors import ConsistencyError, EmptyFrequencyClass, SchemaError, Unsupported
from .sampling import FrequencyTable

COUNTS_HEADER = "k,phi_k"
ZETA_HEADER = "k,zeta_k"
PER_SYMBOL_HEADER = "k,per_symbol_prob"


@dataclass(frozen=True)
class GoodTuringVector:
    """Estimated total probability of each frequency class, held as exact rationals.

    Only nonzero entries are stored. The class of symbols seen n times is
    always assigned zero.
    """

    n: int
    zeta: Mapping[int, Fraction]

    def __getitem__(self, k: int) -> Fraction:
        return self.zeta.get(k, Fraction(0))

    def exact_total(self) -> Fraction:
        return sum(self.zeta.values(), Fraction(0))

    def as_floats(self) -> dict[int, float]:
        return {k: float(v) for k, v in self.zeta.items()}


def good_turing_totals(freq: FrequencyTable) -> GoodTuringVector:
    """zeta_k = (k+1) phi_{k+1} / n for k < n, and zeta_n = 0."""
    n = freq.n
    if n < 1:
        raise ConsistencyError("Good-Turing estimate needs n >= 1")
    zeta = {
        j - 1: Fraction(j * phi_j, n)
        for j, phi_j in sorted(freq.phi.items())
        if phi_j > 0 and j - 1 < n
    }
    return GoodTuringVector(n=n, zeta=zeta)


def good_turing_per_symbol(freq: FrequencyTable, k: int) -> float:
    """Probability assigned to each individual symbol seen ``k`` times.

    For k = 0 this is the total mass of the unseen symbols, since their
    number is unknown.
    """
    n = freq.n
    if k == n:
        raise Unsupported("the class of symbols seen n times has no Good-Turing estimate")
    if not 0 <= k < n:
        raise Unsupported(f"k={k} outside 0..{n - 1}")
    if k == 0:
        return float(Fraction(freq[1], n))
    if freq[k] == 0:
        raise EmptyFrequencyClass(f"no symbol appears exactly {k} times")
    return float(Fraction((k + 1) * freq[k + 1], n * freq[k]))


def missing_mass(freq: FrequencyTable) -> float:
    """Estimated probability of the unseen symbols, phi_1 / n."""
    if freq.n < 1:
        raise ConsistencyError("missing mass needs n >= 1")
    return float(Fraction(freq[1], freq.n))


# -- CSV ----------------------------------------------------------------------


def fmt(x) -> str:
    """Locale-independent float with 12 significant digits."""
    return f"{float(x):.12g}"


def write_counts_csv(freq: FrequencyTable) -> str:
    lines = [COUNTS_HEADER, f"# n={freq.n}"]
    lines += [f"{k},{v}" for k, v in sorted(freq.phi.items())]
    return "\n".join(lines) + "\n"


def read_counts_csv(text: str | Iterable[str]) -> FrequencyTable:
    """Parse the ``k,phi_k`` table written by :func:`write_counts_csv`.

    A ``# n=<n>`` row, if present, must agree with sum(k * phi_k); a
    mismatch raises :class:`ConsistencyError`.
    """
    lines = io.StringIO(text) if isinstance(text, str) else text
    declared_n = None
    header_seen = False
    phi: dict[int, int] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("n="):
                try:
                    declared_n = int(body[2:])
                except ValueError:
                    raise SchemaError(f"line {lineno}: bad metadata {line!r}") from None
            continue
        if not header_seen:
            if line != COUNTS_HEADER:
                raise SchemaError(f"line {lineno}: expected header {COUNTS_HEADER!r}")
            header_seen = True
            continue
        try:
            k_str, v_str = line.split(",")
            k, v = int(k_str), int(v_str)
        except ValueError:
            raise SchemaError(f"line {lineno}: expected 'k,phi_k' integers, got {line!r}") from None
        if k < 1 or v < 0:
            raise SchemaError(f"line {lineno}: need k >= 1 and phi_k >= 0")
        if k in phi:
            raise SchemaError(f"line {lineno}: duplicate k={k}")
        phi[k] = v
    if not header_seen:
        raise SchemaError(f"missing header {COUNTS_HEADER!r}")
    implied = sum(k * v for k, v in phi.items())
    if declared_n is not None and declared_n != implied:
        raise ConsistencyError(f"metadata says n={declared_n} but sum of k*phi_k is {implied}")
    return FrequencyTable(n=implied, phi=phi)


def write_zeta_csv(gt: GoodTuringVector) -> str:
    lines = [ZETA_HEADER] + [f"{k},{fmt(v)}" for k, v in sorted(gt.zeta.items())]
    return "\n".join(lines) + "\n"


def write_per_symbol_csv(freq: FrequencyTable) -> str:
    lines = [PER_SYMBOL_HEADER]
    for k in sorted(freq.phi):
        if k < freq.n:
            lines.append(f"{k},{fmt(good_turing_per_symbol(freq, k))}")
    return "\n".join(lines) + "\n"
