"""Drawing i.i.d. strings, counting frequencies, and the true total probabilities.

Symbols are never materialized as an alphabet. A symbol of atom class ``a``
(probability ``p_a``, multiplicity ``m_a``) is the pair ``(a, slot)`` with
``0 <= slot < m_a``; draws from the atomless component get fresh ids
``(-1, j)`` and by construction never repeat.

Random streams: ``rng_for(seed, *key)`` is PCG64 seeded by
``numpy.random.SeedSequence(seed mod 2**64, spawn_key=key)``. A string of
length n consumes ``n`` uniforms for the class choice, then one bounded
integer per atom-class draw for the slot, in position order.
"""

from __future__ import annotations

import codecs
import functools
import math
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from .errors import ConsistencyError, DomainError
from .shadow import DistributionSpec

CONTINUOUS = -1
RNG_NAME = "numpy.random.PCG64"
RNG_DERIVATION = "SeedSequence(entropy=seed mod 2**64, spawn_key=(n, trial_index))"


def rng_for(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class SampleString:
    """Counts of one observed string; the string itself is not kept.

    ``atom_index``, ``slot`` and ``symbol_counts`` are parallel arrays over
    the distinct atom symbols that occurred.
    """

    n: int
    atom_index: np.ndarray
    slot: np.ndarray
    symbol_counts: np.ndarray
    continuous_draws: int = 0

    def __post_init__(self):
        total = int(self.symbol_counts.sum()) + self.continuous_draws
        if total != self.n:
            raise ConsistencyError(f"counts sum to {total}, expected n={self.n}")
        if np.any(self.symbol_counts < 1):
            raise ConsistencyError("symbol counts must be positive")

    @classmethod
    def from_counts(
        cls, counts: Mapping[tuple[int, int], int], continuous_draws: int = 0
    ) -> SampleString:
        """Build from ``{(atom_index, slot): count}``."""
        keys = list(counts)
        return cls(
            n=sum(counts.values()) + continuous_draws,
            atom_index=np.array([a for a, _ in keys], dtype=np.int64),
            slot=np.array([s for _, s in keys], dtype=np.int64),
            symbol_counts=np.array([counts[k] for k in keys], dtype=np.int64),
            continuous_draws=continuous_draws,
        )

    @property
    def counts(self) -> dict[tuple[int, int], int]:
        out = {
            (int(a), int(s)): int(c)
            for a, s, c in zip(self.atom_index, self.slot, self.symbol_counts)
        }
        for j in range(self.continuous_draws):
            out[(CONTINUOUS, j)] = 1
        return out

    def __eq__(self, other):
        if not isinstance(other, SampleString):
            return NotImplemented
        return self.n == other.n and self.continuous_draws == other.continuous_draws and self.counts == other.counts


@dataclass(frozen=True)
class FrequencyTable:
    """Count-of-counts ``phi[k]`` (only nonzero entries) for a string of length n."""

    n: int
    phi: Mapping[int, int]
    _hit_index: np.ndarray = field(default=None, repr=False, compare=False)
    _hit_counts: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        phi = {int(k): int(v) for k, v in sorted(self.phi.items()) if v != 0}
        if any(k < 1 or v < 0 for k, v in phi.items()):
            raise ConsistencyError("phi must map k >= 1 to nonnegative counts")
        total = sum(k * v for k, v in phi.items())
        if total != self.n:
            raise ConsistencyError(f"sum of k*phi_k is {total}, but n={self.n}")
        object.__setattr__(self, "phi", phi)

    def __getitem__(self, k: int) -> int:
        return self.phi.get(k, 0)

    @functools.cached_property
    def atom_hits(self) -> dict[int, list[int]]:
        """Observed per-symbol counts grouped by atom index."""
        if self._hit_index is None:
            return {}
        out: dict[int, list[int]] = {}
        for a, c in zip(self._hit_index.tolist(), self._hit_counts.tolist()):
            out.setdefault(a, []).append(c)
        return out


@dataclass(frozen=True)
class TotalProbabilityVector:
    """True total probabilities ``xi[k]``; zero entries other than k=0 are omitted."""

    n: int
    xi: Mapping[int, float]

    def __getitem__(self, k: int) -> float:
        return self.xi.get(k, 0.0)

    def total(self) -> float:
        return math.fsum(self.xi.values())


def sample_string(dist: DistributionSpec, n: int, seed: int, *, stream: tuple[int, ...] = ()) -> SampleString:
    """Draw a length-``n`` i.i.d. string from ``dist``.

    ``stream`` selects an independent substream of ``seed``; the harness uses
    ``(n, trial_index)``.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    rng = rng_for(seed, *stream)
    probs = dist.probs
    mult = dist.multiplicities
    n_classes = len(probs)

    class_mass = np.append(probs * mult, dist.continuous_mass)
    cum = np.cumsum(class_mass)
    cum /= cum[-1]
    u = rng.random(n)
    cls = np.minimum(np.searchsorted(cum, u, side="right"), n_classes)

    is_atom = cls < n_classes
    atom_cls = cls[is_atom]
    slots = rng.integers(0, mult[atom_cls]) if atom_cls.size else atom_cls
    # Flatten (class, slot) onto a single int64 key.
    offsets = np.concatenate(([0], np.cumsum(mult)[:-1])).astype(np.int64)
    keys, counts = np.unique(offsets[atom_cls] + slots, return_counts=True)
    idx = np.searchsorted(offsets, keys, side="right") - 1
    return SampleString(
        n=int(n),
        atom_index=idx.astype(np.int64),
        slot=(keys - offsets[idx]).astype(np.int64),
        symbol_counts=counts.astype(np.int64),
        continuous_draws=int(n - atom_cls.size),
    )


def count_frequencies(sample: SampleString) -> FrequencyTable:
    ks, phis = np.unique(sample.symbol_counts, return_counts=True)
    phi = Counter(dict(zip(ks.tolist(), phis.tolist())))
    if sample.continuous_draws:
        phi[1] += sample.continuous_draws
    return FrequencyTable(
        n=sample.n,
        phi=dict(phi),
        _hit_index=sample.atom_index,
        _hit_counts=sample.symbol_counts,
    )


def true_total_probabilities(dist: DistributionSpec, sample: SampleString) -> TotalProbabilityVector:
    """Mass of the symbols seen exactly k times, for each k.

    Draws from the atomless component have probability zero, so they add to
    ``phi_1`` but never to ``xi_1``.
    """
    probs = dist.probs
    mult = dist.multiplicities
    n_classes = len(probs)
    idx = sample.atom_index
    if idx.size and (idx.min() < 0 or idx.max() >= n_classes):
        raise ConsistencyError("sample references atoms absent from the distribution")
    if idx.size and np.any((sample.slot < 0) | (sample.slot >= mult[idx])):
        raise ConsistencyError("sample references symbol slots beyond an atom's multiplicity")

    xi: dict[int, float] = {}
    observed = np.bincount(idx, minlength=n_classes) if n_classes else np.zeros(0, dtype=np.int64)
    unseen = [p * int(m - o) for p, m, o in zip(probs.tolist(), mult.tolist(), observed.tolist()) if m > o]
    xi[0] = math.fsum(unseen + [dist.continuous_mass])

    if idx.size:
        # Group symbols by (count, class): xi_k = sum over classes of p * (#symbols).
        combined = sample.symbol_counts * n_classes + idx
        keys, num = np.unique(combined, return_counts=True)
        k_of = keys // n_classes
        terms = probs[keys % n_classes] * num
        bounds = np.flatnonzero(np.diff(k_of)) + 1
        for ks, chunk in zip(np.split(k_of, bounds), np.split(terms, bounds)):
            xi[int(ks[0])] = math.fsum(chunk.tolist())
    return TotalProbabilityVector(n=sample.n, xi=xi)


# -- token streams ----------------------------------------------------------------


class TokenDecodeError(ValueError):
    """Input is not valid UTF-8; ``position`` is the offending byte offset."""

    def __init__(self, position: int, reason: str):
        super().__init__(f"malformed UTF-8 at byte {position}: {reason}")
        self.position = position


def iter_tokens(stream: BinaryIO, delimiter: str | None = None, chunk_size: int = 1 << 16) -> Iterable[str]:
    """Yield tokens from a UTF-8 byte stream in one pass.

    With ``delimiter=None`` tokens are separated by runs of whitespace;
    otherwise by the given single character. Empty tokens are dropped.
    """
    if delimiter is not None and len(delimiter) != 1:
        raise DomainError("delimiter must be a single character")
    decoder = codecs.getincrementaldecoder("utf-8")("strict")
    offset = 0
    carry = ""
    while True:
        raw = stream.read(chunk_size)
        final = not raw
        pending = len(decoder.getstate()[0])
        try:
            text = decoder.decode(raw, final=final)
        except UnicodeDecodeError as exc:
            raise TokenDecodeError(offset - pending + exc.start, exc.reason) from None
        offset += len(raw)
        buf = carry + text
        parts = buf.split(delimiter)
        if delimiter is None:
            partial = bool(buf) and not buf[-1].isspace()
        else:
            partial = not buf.endswith(delimiter)
        carry = parts.pop() if partial and not final and parts else ""
        yield from (t for t in parts if t)
        if final:
            return


def count_tokens(stream: BinaryIO, delimiter: str | None = None) -> Counter:
    counts: Counter = Counter()
    counts.update(iter_tokens(stream, delimiter))
    return counts


def frequencies_from_counts(counts: Mapping[object, int]) -> FrequencyTable:
    """Count-of-counts for arbitrary labelled per-symbol counts."""
    phi = Counter(c for c in counts.values() if c > 0)
    return FrequencyTable(n=sum(k * v for k, v in phi.items()), phi=dict(phi))
