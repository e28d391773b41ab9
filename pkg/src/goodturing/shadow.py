"""Label-free distributions, their shadows, and families indexed by block length.

A distribution is stored only as ``(probability, multiplicity)`` pairs plus
the mass of an atomless component: the quantities studied here never depend
on how symbols are named.
"""

from __future__ import annotations

import functools
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DomainError, NormalizationError, SchemaError, UnsupportedN

#: Drift from 1 that make_distribution corrects silently.
NORMALIZATION_SLACK = 1e-6

FAMILY_KINDS = ("uniform", "quantized_density", "explicit_sequence")


@dataclass(frozen=True)
class DistributionSpec:
    """An underlying distribution P_n, up to relabeling of symbols.

    ``atoms`` holds ``(prob, multiplicity)`` pairs sorted by ``prob``, with
    distinct probabilities. ``continuous_mass`` is the total probability of
    the atomless part. ``correction`` records the raw total that was divided
    out by :func:`make_distribution` (1.0 when no correction was needed).
    """

    atoms: tuple[tuple[float, int], ...]
    continuous_mass: float = 0.0
    correction: float = 1.0

    def __post_init__(self):
        for p, m in self.atoms:
            if not (0.0 < p <= 1.0):
                raise DomainError(f"atom probability {p!r} not in (0, 1]")
            if int(m) != m or m < 1:
                raise DomainError(f"atom multiplicity {m!r} must be a positive integer")
        if not (0.0 <= self.continuous_mass <= 1.0):
            raise DomainError(f"continuous mass {self.continuous_mass!r} not in [0, 1]")
        total = math.fsum([p * m for p, m in self.atoms] + [self.continuous_mass])
        if abs(total - 1.0) > 1e-12:
            raise NormalizationError(f"total mass {total!r} differs from 1")

    @property
    def alphabet_size(self) -> int:
        """Number of symbols with positive probability."""
        return sum(m for _, m in self.atoms)

    @functools.cached_property
    def probs(self) -> np.ndarray:
        out = np.array([p for p, _ in self.atoms], dtype=float)
        out.flags.writeable = False
        return out

    @functools.cached_property
    def multiplicities(self) -> np.ndarray:
        out = np.array([m for _, m in self.atoms], dtype=np.int64)
        out.flags.writeable = False
        return out

    def symbol_probs(self) -> np.ndarray:
        """Per-symbol probabilities with atoms expanded, in atom order."""
        return np.repeat(self.probs, self.multiplicities)


@dataclass(frozen=True)
class Shadow:
    """Law of P(X) for X drawn from the distribution: ``(value, weight)`` points."""

    points: tuple[tuple[float, float], ...]

    @property
    def total_weight(self) -> float:
        return math.fsum(w for _, w in self.points)


@dataclass(frozen=True)
class MixingDistribution:
    """A law Q on [0, inf): weighted atoms plus an optional piecewise-linear density.

    The density is given on ``grid`` (non-decreasing; a repeated grid point
    encodes a jump) and is zero outside ``[grid[0], grid[-1]]``.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    density: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        for y, w in self.atoms:
            if y < 0 or not math.isfinite(y):
                raise DomainError(f"atom location {y!r} must be a nonnegative real")
            if not (0.0 <= w <= 1.0):
                raise DomainError(f"atom weight {w!r} not in [0, 1]")
        if self.density is not None:
            grid, values = self.density
            if len(grid) != len(values) or len(grid) < 2:
                raise DomainError("density needs matching grid and values of length >= 2")
            if grid[0] < 0:
                raise DomainError("density grid must be nonnegative")
            if any(b < a for a, b in zip(grid, grid[1:])):
                raise DomainError("density grid must be ascending")
            if any(v < 0 for v in values):
                raise DomainError("density values must be nonnegative")
        total = self.atom_weight + self.density_mass
        if abs(total - 1.0) > 1e-9:
            raise NormalizationError(f"mixing distribution has total mass {total!r}")

    @property
    def atom_weight(self) -> float:
        return math.fsum(w for _, w in self.atoms)

    @property
    def density_mass(self) -> float:
        if self.density is None:
            return 0.0
        grid, values = self.density
        return math.fsum(
            (b - a) * (fa + fb) / 2
            for a, b, fa, fb in zip(grid, grid[1:], values, values[1:])
        )

    def segments(self) -> list[tuple[float, float, float, float]]:
        """Density pieces ``(a, b, f(a), f(b))`` of positive width."""
        if self.density is None:
            return []
        grid, values = self.density
        return [
            (a, b, fa, fb)
            for a, b, fa, fb in zip(grid, grid[1:], values, values[1:])
            if b > a
        ]

    def cdf(self, y) -> np.ndarray:
        """P(Y <= y), evaluated elementwise."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.zeros_like(y)
        for loc, w in self.atoms:
            out += w * (y >= loc)
        for a, b, fa, fb in self.segments():
            t = np.clip(y, a, b) - a
            slope = (fb - fa) / (b - a)
            out += fa * t + 0.5 * slope * t * t
        return out


def make_distribution(
    atoms: Iterable[tuple[float, int]], continuous_mass: float = 0.0
) -> DistributionSpec:
    """Build a canonical :class:`DistributionSpec`.

    Atoms sharing a probability are merged. A total within
    ``NORMALIZATION_SLACK`` of one is rescaled to exactly one; anything
    further off raises :class:`NormalizationError`.
    """
    pairs = []
    for p, m in atoms:
        p = float(p)
        if not p > 0 or not math.isfinite(p):
            raise DomainError(f"atom probability {p!r} must be positive")
        if int(m) != m or m < 1:
            raise DomainError(f"atom multiplicity {m!r} must be a positive integer")
        pairs.append((p, int(m)))
    c = float(continuous_mass)
    if not (0.0 <= c <= 1.0):
        raise DomainError(f"continuous mass {c!r} not in [0, 1]")

    total = math.fsum([p * m for p, m in pairs] + [c])
    if abs(total - 1.0) > NORMALIZATION_SLACK:
        raise NormalizationError(f"total mass {total!r} is not 1")
    if total != 1.0:
        pairs = [(p / total, m) for p, m in pairs]
        c /= total

    merged: dict[float, int] = {}
    for p, m in pairs:
        merged[p] = merged.get(p, 0) + m
    return DistributionSpec(
        atoms=tuple(sorted(merged.items())),
        continuous_mass=c,
        correction=total,
    )


def uniform(m: int) -> DistributionSpec:
    """Uniform distribution over ``m`` symbols."""
    return make_distribution([(1.0 / m, m)])


def shadow_of(dist: DistributionSpec) -> Shadow:
    points = [(p, p * m) for p, m in dist.atoms]
    if dist.continuous_mass > 0:
        points.insert(0, (0.0, dist.continuous_mass))
    return Shadow(points=tuple(points))


def scaled_shadow(dist: DistributionSpec, n: int) -> MixingDistribution:
    """Law of ``n * P(X)``; the atomless part sits at zero."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    atoms = [(n * p, p * m) for p, m in dist.atoms]
    if dist.continuous_mass > 0:
        atoms.insert(0, (0.0, dist.continuous_mass))
    return MixingDistribution(atoms=tuple(atoms))


# -- families -----------------------------------------------------------------


@dataclass(frozen=True)
class Family:
    """A sequence of distributions indexed by block length, with its declared limit.

    ``limit_Q`` is the asserted limit of the scaled shadows; it is not checked.
    """

    kind: str
    limit_Q: MixingDistribution
    density: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    sequence: Mapping[int, DistributionSpec] = field(default_factory=dict)
    default: DistributionSpec | None = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}")

    def dist_at(self, n: int) -> DistributionSpec:
        return family_dist_at(self, n)


def uniform_family() -> Family:
    return Family(kind="uniform", limit_Q=MixingDistribution(atoms=((1.0, 1.0),)))


def quantized_density_family(grid: Sequence[float], values: Sequence[float]) -> Family:
    """Family obtained by integrating a density on [0, 1] over n equal bins.

    The density is piecewise linear on ``grid`` (strictly ascending, inside
    [0, 1]) and must integrate to one. The declared limit is the law of
    ``f(X)`` with ``X ~ f``.
    """
    grid = tuple(float(g) for g in grid)
    values = tuple(float(v) for v in values)
    if len(grid) != len(values) or len(grid) < 2:
        raise DomainError("density needs matching grid and values of length >= 2")
    if grid[0] < 0 or grid[-1] > 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("density grid must be strictly ascending within [0, 1]")
    if any(v < 0 for v in values):
        raise DomainError("density values must be nonnegative")
    mass = math.fsum((b - a) * (fa + fb) / 2 for a, b, fa, fb in zip(grid, grid[1:], values, values[1:]))
    if abs(mass - 1.0) > 1e-9:
        raise NormalizationError(f"density integrates to {mass!r}")
    return Family(
        kind="quantized_density",
        limit_Q=_pushforward_limit(grid, values),
        density=(grid, values),
    )


def explicit_family(
    limit_Q: MixingDistribution,
    sequence: Mapping[int, DistributionSpec] | None = None,
    default: DistributionSpec | None = None,
) -> Family:
    """Family given by stored distributions.

    ``sequence`` maps block lengths to distributions; ``default`` (if given)
    is used for every other block length.
    """
    if not sequence and default is None:
        raise DomainError("explicit family needs a sequence or a default distribution")
    return Family(
        kind="explicit_sequence",
        limit_Q=limit_Q,
        sequence=dict(sequence or {}),
        default=default,
    )


def family_dist_at(family: Family, n: int) -> DistributionSpec:
    if int(n) != n or n < 1:
        raise UnsupportedN(f"block length {n!r} must be a positive integer")
    n = int(n)
    if family.kind == "uniform":
        return uniform(n)
    if family.kind == "quantized_density":
        grid, values = family.density
        return _quantize(grid, values, n)
    if n in family.sequence:
        return family.sequence[n]
    if family.default is not None:
        return family.default
    raise UnsupportedN(f"explicit family has no distribution for n={n}")


@functools.lru_cache(maxsize=32)
def _quantize(grid: tuple[float, ...], values: tuple[float, ...], n: int) -> DistributionSpec:
    xp = np.asarray(grid)
    fp = np.asarray(values)

    def f(x):
        return np.interp(x, xp, fp, left=0.0, right=0.0)

    edges = np.arange(n + 1) / n
    fe = f(edges)
    # Bins with no grid point strictly inside see a single linear piece.
    masses = (fe[:-1] + fe[1:]) / 2 / n
    for g in grid:
        i = int(np.searchsorted(edges, g, side="right")) - 1
        if 0 <= i < n and edges[i] < g < edges[i + 1]:
            inner = xp[(xp > edges[i]) & (xp < edges[i + 1])]
            xs = np.concatenate(([edges[i]], inner, [edges[i + 1]]))
            fs = f(xs)
            masses[i] = math.fsum((xs[1:] - xs[:-1]) * (fs[1:] + fs[:-1]) / 2)
    positive = masses[masses > 0]
    return make_distribution((p, 1) for p in positive.tolist())


def _pushforward_limit(grid, values) -> MixingDistribution:
    """Law of f(X) for X with piecewise-linear density f.

    On a piece with slope s != 0 the image density is y / |s|, which is again
    linear; flat pieces at height c become atoms of weight c * width.
    """
    atoms: dict[float, float] = {}
    ramps = []
    for a, b, fa, fb in zip(grid, grid[1:], values, values[1:]):
        if fa == fb:
            if fa > 0:
                atoms[fa] = atoms.get(fa, 0.0) + fa * (b - a)
        else:
            ramps.append((min(fa, fb), max(fa, fb), (b - a) / abs(fb - fa)))

    density = None
    if ramps:
        cuts = sorted({lo for lo, _, _ in ramps} | {hi for _, hi, _ in ramps})
        xs: list[float] = []
        fs: list[float] = []
        for u, v in zip(cuts, cuts[1:]):
            c = math.fsum(w for lo, hi, w in ramps if lo <= u and hi >= v)
            for x, fx in ((u, u * c), (v, v * c)):
                if xs and xs[-1] == x and fs[-1] == fx:
                    continue
                xs.append(x)
                fs.append(fx)
        density = (tuple(xs), tuple(fs))
    return MixingDistribution(atoms=tuple(sorted(atoms.items())), density=density)


# -- JSON ---------------------------------------------------------------------


def mixing_from_json(obj: Mapping[str, Any]) -> MixingDistribution:
    """Parse ``{"atoms": [[y, w], ...], "density": {"grid": [...], "values": [...]}}``."""
    if not isinstance(obj, Mapping):
        raise SchemaError("mixing distribution must be a JSON object")
    unknown = set(obj) - {"atoms", "density"}
    if unknown:
        raise SchemaError(f"mixing distribution: unknown fields {sorted(unknown)}")
    atoms = _pairs(obj.get("atoms", []), "atoms")
    density = _density(obj["density"]) if obj.get("density") is not None else None
    try:
        return MixingDistribution(atoms=tuple((float(y), float(w)) for y, w in atoms), density=density)
    except (DomainError, NormalizationError) as exc:
        raise SchemaError(f"mixing distribution: {exc}") from exc


def family_from_json(obj: Mapping[str, Any]) -> Family:
    """Parse a family document.

    Layout: ``{"kind": ..., "density": {"grid": [...], "values": [...]},
    "atoms": [[p, m], ...], "continuous_mass": c}``. Explicit sequences also
    take ``"limit_Q"`` (a mixing distribution, required) and an optional
    ``"sequence"`` mapping block lengths to ``{"atoms", "continuous_mass"}``.
    """
    if not isinstance(obj, Mapping):
        raise SchemaError("family must be a JSON object")
    unknown = set(obj) - {"kind", "density", "atoms", "continuous_mass", "limit_Q", "sequence"}
    if unknown:
        raise SchemaError(f"family: unknown fields {sorted(unknown)}")
    kind = obj.get("kind")
    if kind not in FAMILY_KINDS:
        raise SchemaError(f"family.kind must be one of {FAMILY_KINDS}, got {kind!r}")
    try:
        if kind == "uniform":
            return uniform_family()
        if kind == "quantized_density":
            if "density" not in obj:
                raise SchemaError("family.density is required for quantized_density")
            grid, values = _density(obj["density"])
            return quantized_density_family(grid, values)
        if "limit_Q" not in obj:
            raise SchemaError("family.limit_Q is required for explicit_sequence")
        limit = mixing_from_json(obj["limit_Q"])
        default = None
        if "atoms" in obj or "continuous_mass" in obj:
            default = _dist_from_json(obj, "family")
        sequence = {}
        for key, spec in dict(obj.get("sequence", {})).items():
            try:
                n = int(key)
            except ValueError:
                raise SchemaError(f"family.sequence key {key!r} is not an integer") from None
            sequence[n] = _dist_from_json(spec, f"family.sequence[{key}]")
        return explicit_family(limit, sequence=sequence, default=default)
    except (DomainError, NormalizationError) as exc:
        raise SchemaError(f"family: {exc}") from exc


def family_to_json(family: Family) -> dict[str, Any]:
    out: dict[str, Any] = {"kind": family.kind}
    if family.kind == "quantized_density":
        grid, values = family.density
        out["density"] = {"grid": list(grid), "values": list(values)}
    elif family.kind == "explicit_sequence":
        if family.default is not None:
            out["atoms"] = [[p, m] for p, m in family.default.atoms]
            out["continuous_mass"] = family.default.continuous_mass
        if family.sequence:
            out["sequence"] = {
                str(n): {"atoms": [[p, m] for p, m in d.atoms], "continuous_mass": d.continuous_mass}
                for n, d in sorted(family.sequence.items())
            }
        out["limit_Q"] = mixing_to_json(family.limit_Q)
    return out


def mixing_to_json(q: MixingDistribution) -> dict[str, Any]:
    out: dict[str, Any] = {"atoms": [[y, w] for y, w in q.atoms]}
    if q.density is not None:
        out["density"] = {"grid": list(q.density[0]), "values": list(q.density[1])}
    return out


def load_family(path: str | Path) -> Family:
    return family_from_json(_read_json(path))


def load_mixing(path: str | Path) -> MixingDistribution:
    return mixing_from_json(_read_json(path))


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


def _pairs(raw, name):
    if not isinstance(raw, list) or not all(isinstance(r, list) and len(r) == 2 for r in raw):
        raise SchemaError(f"{name} must be a list of [x, y] pairs")
    for r in raw:
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in r):
            raise SchemaError(f"{name} entries must be numbers")
    return raw


def _density(raw):
    if not isinstance(raw, Mapping) or set(raw) != {"grid", "values"}:
        raise SchemaError('density must be {"grid": [...], "values": [...]}')
    grid, values = raw["grid"], raw["values"]
    for name, seq in (("grid", grid), ("values", values)):
        if not isinstance(seq, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in seq
        ):
            raise SchemaError(f"density.{name} must be a list of numbers")
    return tuple(float(g) for g in grid), tuple(float(v) for v in values)


def _dist_from_json(obj, where) -> DistributionSpec:
    if not isinstance(obj, Mapping):
        raise SchemaError(f"{where} must be a JSON object")
    atoms = _pairs(obj.get("atoms", []), f"{where}.atoms")
    c = obj.get("continuous_mass", 0.0)
    if not isinstance(c, (int, float)) or isinstance(c, bool):
        raise SchemaError(f"{where}.continuous_mass must be a number")
    for _, m in atoms:
        if int(m) != m:
            raise SchemaError(f"{where}.atoms multiplicities must be integers")
    return make_distribution([(p, int(m)) for p, m in atoms], c)
