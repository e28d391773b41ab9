"""Binomial and Poisson kernels, Poisson-mixture limits, exact finite-n means, and tail bounds.

For large arguments the binomial and Poisson probabilities are evaluated in
log space in the saddle-point form

    pmf = exp(-stirlerr terms - bd0 terms) / sqrt(2 pi x (1 - x/n))

where ``stirlerr(n) = log n! - log(sqrt(2 pi n) (n/e)^n)`` and
``bd0(x, M) = x log(x/M) + M - x``. Taking differences of ``lgamma`` instead
costs roughly ``eps * n log n`` of absolute accuracy in the exponent, which at
n = 10**6 is already ~1e-9.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, QuadratureError, RegimeWarning
from .shadow import DistributionSpec, MixingDistribution

DIRECT_MAX_N = 30
DEFAULT_KMAX = 50
QUAD_TOL = 1e-10
QUAD_MAX_DEPTH = 40

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
_STIRLERR_SMALL = np.array(
    [0.0] + [math.lgamma(i + 1) - (i + 0.5) * math.log(i) + i - _LOG_SQRT_2PI for i in range(1, 16)]
)


def _stirlerr(n):
    """log(n!) - log(sqrt(2 pi n) (n/e)^n) for integer n >= 0, elementwise."""
    n = np.asarray(n, dtype=float)
    small = n <= 15
    safe = np.where(small, 16.0, n)
    nn = safe * safe
    big = (1 / 12 - (1 / 360 - (1 / 1260 - (1 / 1680 - 1 / (1188 * nn)) / nn) / nn) / nn) / safe
    table = _STIRLERR_SMALL[np.clip(n, 0, 15).astype(int)]
    return np.where(small, table, big)


def _bd0(x, m):
    """x log(x/m) + m - x, without cancellation when x is close to m."""
    x = np.asarray(x, dtype=float)
    m = np.asarray(m, dtype=float)
    x, m = np.broadcast_arrays(x, m)
    near = np.abs(x - m) < 0.1 * (x + m)
    out = np.empty(x.shape, dtype=float)
    xf, mf = x[~near], m[~near]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~near] = np.where(xf > 0, xf * np.log(np.where(xf > 0, xf, 1.0) / mf), 0.0) + mf - xf
    xn, mn = x[near], m[near]
    v = (xn - mn) / (xn + mn)
    s = (xn - mn) * v
    ej = 2 * xn * v
    v2 = v * v
    for j in range(1, 14):
        ej = ej * v2
        s = s + ej / (2 * j + 1)
    out[near] = s
    return out


def binomial_kernel(n: int, k, y) -> np.ndarray:
    """C(n, k) (y/n)^k (1 - y/n)^(n-k), broadcast over ``k`` and ``y``.

    No domain checks; ``n >= 0``, integer ``0 <= k <= n`` and ``0 <= y <= n``
    are assumed.
    """
    k = np.asarray(k)
    y = np.asarray(y, dtype=float)
    k, y = np.broadcast_arrays(k, y)
    kf = k.astype(float)
    if n == 0:
        return np.where(k == 0, 1.0, 0.0)
    if n <= DIRECT_MAX_N:
        combs = np.array([math.comb(n, j) for j in range(n + 1)], dtype=float)
        p = y / n
        q = (n - y) / n
        return combs[k.astype(int)] * p**kf * q ** (n - kf)

    p = y / n
    q = (n - y) / n
    out = np.zeros(k.shape, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # k = 0 and k = n: one-sided forms.
        lc0 = np.where(p < 0.1, -_bd0(n, n - y) - y, n * np.log1p(-p))
        lcn = np.where(q < 0.1, -_bd0(n, y) - (n - y), n * np.log(p))
        mid = (k > 0) & (k < n)
        km = np.where(mid, kf, 1.0)
        lc = (
            _stirlerr(n)
            - _stirlerr(km)
            - _stirlerr(n - km)
            - _bd0(km, y)
            - _bd0(n - km, n - y)
        )
        lf = 2 * _LOG_SQRT_2PI + np.log(km) + np.log1p(-km / n)
        out = np.where(mid, np.exp(lc - 0.5 * lf), out)
        out = np.where(k == 0, np.exp(lc0), out)
        out = np.where(k == n, np.exp(lcn), out)
    # Degenerate endpoints p = 0 and p = 1.
    out = np.where(y == 0, np.where(k == 0, 1.0, 0.0), out)
    out = np.where(y == n, np.where(k == n, 1.0, 0.0), out)
    return out


def poisson_kernel(k, y) -> np.ndarray:
    """y^k exp(-y) / k!, broadcast over ``k`` and ``y``; no domain checks."""
    k = np.asarray(k)
    y = np.asarray(y, dtype=float)
    k, y = np.broadcast_arrays(k, y)
    kf = k.astype(float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        km = np.where(k > 0, kf, 1.0)
        pos = np.exp(-_stirlerr(km) - _bd0(km, y)) / np.sqrt(2 * math.pi * km)
    out = np.where(k == 0, np.exp(-y), pos)
    return np.where(y == 0, np.where(k == 0, 1.0, 0.0), out)


def g_binomial(n: int, k: int, y: float) -> float:
    """Binomial(n, y/n) probability of k."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if int(k) != k or not 0 <= k <= n:
        raise DomainError(f"k must be an integer in 0..{n}, got {k!r}")
    if not 0 <= y <= n:
        raise DomainError(f"y must lie in [0, {n}], got {y!r}")
    return float(binomial_kernel(int(n), int(k), y))


def g_poisson(k: int, y: float) -> float:
    """Poisson(y) probability of k."""
    if int(k) != k or k < 0:
        raise DomainError(f"k must be a nonnegative integer, got {k!r}")
    if not y >= 0 or not math.isfinite(y):
        raise DomainError(f"y must be a finite nonnegative real, got {y!r}")
    return float(poisson_kernel(int(k), y))


# -- Poisson mixtures -----------------------------------------------------------


@dataclass(frozen=True)
class PoissonMixtureVector:
    """lambda_0..lambda_kmax of a Poisson mixture and the mass beyond kmax."""

    kmax: int
    lam: tuple[float, ...]
    tail_mass: float

    def __getitem__(self, k: int) -> float:
        return self.lam[k] if 0 <= k <= self.kmax else 0.0

    def as_dict(self) -> dict[int, float]:
        return dict(enumerate(self.lam))


def _adaptive_simpson(f, a, b, tol, max_depth=QUAD_MAX_DEPTH):
    """Vector-valued adaptive Simpson; every component meets ``tol``."""
    fa, fm, fb = f(a), f((a + b) / 2), f(b)
    whole = (b - a) / 6 * (fa + 4 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        delta = left + right - whole
        if np.max(np.abs(delta)) <= 15 * tol:
            return left + right + delta / 15
        if depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson did not reach tolerance {tol:g} on [{a}, {b}] within depth {max_depth}"
            )
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth + 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2, depth + 1
        )

    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def poisson_mixture(Q: MixingDistribution, kmax: int = DEFAULT_KMAX, tol: float = QUAD_TOL) -> PoissonMixtureVector:
    """lambda_k = integral of y^k exp(-y)/k! dQ(y) for k = 0..kmax.

    Atoms are summed exactly; each linear piece of the density is integrated
    by adaptive Simpson with the absolute tolerance shared between pieces.
    """
    if int(kmax) != kmax or kmax < 0:
        raise DomainError(f"kmax must be a nonnegative integer, got {kmax!r}")
    ks = np.arange(int(kmax) + 1)
    parts = [w * poisson_kernel(ks, y) for y, w in Q.atoms if w > 0]
    segs = Q.segments()
    for a, b, fa, fb in segs:
        slope = (fb - fa) / (b - a)

        def integrand(y, a=a, fa=fa, slope=slope):
            return (fa + slope * (y - a)) * poisson_kernel(ks, y)

        parts.append(_adaptive_simpson(integrand, a, b, tol / len(segs)))
    if parts:
        stacked = np.vstack(parts)
        lam = tuple(math.fsum(stacked[:, j].tolist()) for j in range(len(ks)))
    else:
        lam = tuple(0.0 for _ in ks)
    return PoissonMixtureVector(kmax=int(kmax), lam=lam, tail_mass=1.0 - math.fsum(lam))


def write_lambda_csv(vec: PoissonMixtureVector) -> str:
    from .estimator import fmt

    lines = ["k,lambda_k"] + [f"{k},{fmt(v)}" for k, v in enumerate(vec.lam)]
    lines.append(f"tail,{fmt(vec.tail_mass)}")
    return "\n".join(lines) + "\n"


# -- exact finite-n means ---------------------------------------------------------


def expected_xi(dist: DistributionSpec, n: int, k: int) -> float:
    """E[xi_k] for a length-n string: E[g_k^n(n P(X))]."""
    if not 0 <= k <= n:
        raise DomainError(f"k must lie in 0..{n}")
    return _mean_kernel(dist, n, k)


def expected_zeta(dist: DistributionSpec, n: int, k: int) -> float:
    """E[zeta_k] for a length-n string: E[g_k^(n-1)((n-1) P(X))]."""
    if n < 1 or not 0 <= k <= n - 1:
        raise DomainError(f"k must lie in 0..{n - 1}")
    return _mean_kernel(dist, n - 1, k)


def _mean_kernel(dist: DistributionSpec, n: int, k: int) -> float:
    probs = dist.probs
    g = binomial_kernel(n, k, np.minimum(n * probs, n))
    # Pairwise summation: error grows like log(#atoms), ample for 1e-12 checks.
    total = float(np.sum(dist.multiplicities * probs * g))
    return total + dist.continuous_mass if k == 0 else total


# -- bounds -------------------------------------------------------------------------


def azuma_bound_xi(n: int, epsilon: float) -> float:
    """min(1, 2 exp(-eps^2 sqrt(n) / 8)): one symbol moves xi_k minus its heavy part by <= 2/n^(3/4)."""
    if n < 1 or not epsilon > 0:
        raise DomainError("need n >= 1 and epsilon > 0")
    return min(1.0, 2 * math.exp(-(epsilon**2) * math.sqrt(n) / 8))


def azuma_bound_zeta(n: int, k: int, epsilon: float) -> float:
    """min(1, 2 exp(-eps^2 n / (8 (k+1)^2))): one symbol moves zeta_k by <= 2(k+1)/n."""
    if n < 1 or k < 0 or not epsilon > 0:
        raise DomainError("need n >= 1, k >= 0 and epsilon > 0")
    return min(1.0, 2 * math.exp(-(epsilon**2) * n / (8 * (k + 1) ** 2)))


class TruncationBound(NamedTuple):
    value: float
    in_regime: bool


def truncation_bound(n: int, k: int) -> TruncationBound:
    """Upper bound on the mean mass, at frequency k, of symbols with P >= n^(-3/4).

    Returns ``n^((k+3)/4) / k! * (1 - n^(-3/4))^(n-k)`` evaluated in log
    space. The bound needs k/n < n^(-3/4); outside that range the value is
    still returned but ``in_regime`` is False and a :class:`RegimeWarning`
    is issued.
    """
    if not n > k >= 0:
        raise DomainError("need n > k >= 0")
    thresh = n ** -0.75
    in_regime = k / n < thresh
    if not in_regime:
        warnings.warn(
            f"k/n = {k / n:g} >= n^(-3/4) = {thresh:g}; truncation bound not valid here",
            RegimeWarning,
            stacklevel=2,
        )
    log_value = (k + 3) / 4 * math.log(n) - math.lgamma(k + 1) + (n - k) * math.log1p(-thresh)
    return TruncationBound(math.exp(log_value), in_regime)
