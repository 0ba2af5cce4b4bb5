"""Bounded difficulty update functions and their drift-free calibration.

An update function maps the trailing block-time sum to a signed fractional
difficulty adjustment (positive values lower difficulty).  A controller built
from it holds the expected block time at a target only if the adjustment has
zero mean under the stationary law of its input:

    integral over (0, inf) of f(t) * g(t) dt = 0

where g is the stationary density of the block-time sum (exponential when one
block time is used, Erlang for a sum of N).  This module evaluates that
residual by adaptive quadrature, solves the shifted-and-scaled arctan family

    f(t) = scale * (atan(slope * (t - center)) + shift)

for the vertical shift (the residual is affine in it, so the root is exact up
to quadrature error) or for the center (by bracketed root finding), and finds
the equilibrium block-time mean of an arbitrary rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate, optimize, special

from .errors import ConfigurationError, NumericalError

# Truncating the integration domain where the distribution tail mass drops
# below this leaves an error well under the quadrature tolerance for any
# bounded update function.
TAIL_MASS = 1e-13
QUAD_ABS_TOL = 1e-10


@dataclass(frozen=True)
class ArctanUpdate:
    """Shifted and scaled arctan update rule.

    scale sets the volatility ceiling, slope the responsiveness around the
    center, center the neutral block-time sum, and shift trims the residual
    drift.  The ceiling scale * (pi/2 + |shift|) must stay below 1 so the
    multiplicative difficulty step can never reach zero.
    """

    scale: float
    slope: float
    center: float
    shift: float = 0.0

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ConfigurationError("arctan scale must be > 0")
        if self.slope <= 0.0:
            raise ConfigurationError("arctan slope must be > 0")
        if self.amplitude() >= 1.0:
            raise ConfigurationError(
                f"arctan amplitude {self.amplitude():.6g} must be < 1 "
                "(difficulty step would cross zero)"
            )

    def __call__(self, t: float) -> float:
        return self.scale * (math.atan(self.slope * (t - self.center)) + self.shift)

    def amplitude(self) -> float:
        """Worst-case |f| over the whole domain."""
        return self.scale * (math.pi / 2.0 + abs(self.shift))

    def supremum(self) -> float:
        """Least upper bound of f on (0, inf); the t -> inf limit."""
        return self.scale * (math.pi / 2.0 + self.shift)


@dataclass(frozen=True)
class BlockTimeSumDistribution:
    """Stationary law assumed for the update function's input.

    kind "exponential" models a single block time with mean block_mean;
    kind "erlang" models a sum of `shape` independent block times, each with
    mean block_mean (density evaluated in log space so shape = 2016 does not
    overflow).
    """

    kind: str
    block_mean: float
    shape: int = 1

    def __post_init__(self):
        if self.kind not in ("exponential", "erlang"):
            raise ConfigurationError(f"unknown distribution kind {self.kind!r}")
        if self.block_mean <= 0.0:
            raise ConfigurationError("block_mean must be > 0")
        if self.shape < 1:
            raise ConfigurationError("shape must be >= 1")
        if self.kind == "exponential" and self.shape != 1:
            raise ConfigurationError("exponential distribution has shape 1")

    def density(self, t: float) -> float:
        if t < 0.0:
            raise ConfigurationError(f"density domain is t >= 0, got {t}")
        if self.kind == "exponential":
            return math.exp(-t / self.block_mean) / self.block_mean
        n, b = self.shape, self.block_mean
        if t == 0.0:
            return 1.0 / b if n == 1 else 0.0
        logp = (n - 1) * math.log(t) - t / b - n * math.log(b) - special.gammaln(n)
        return math.exp(logp)

    def total_mean(self) -> float:
        return self.shape * self.block_mean

    def tail_cutoff(self, mass: float = TAIL_MASS) -> float:
        """Upper integration bound leaving at most `mass` probability beyond it."""
        if self.kind == "exponential":
            return -self.block_mean * math.log(mass)
        return self.block_mean * float(special.gammainccinv(self.shape, mass))

    def quad_points(self) -> list[float]:
        """Interior points the quadrature should visit (Erlang peak region)."""
        if self.kind == "erlang" and self.shape > 1:
            return [(self.shape - 1) * self.block_mean, self.shape * self.block_mean]
        return []


def exponential_distribution(block_mean: float) -> BlockTimeSumDistribution:
    return BlockTimeSumDistribution("exponential", block_mean)


def erlang_distribution(shape: int, block_mean: float) -> BlockTimeSumDistribution:
    return BlockTimeSumDistribution("erlang", block_mean, shape)


def eval_arctan(fn: ArctanUpdate, t: float) -> float:
    return fn(t)


def density(dist: BlockTimeSumDistribution, t: float) -> float:
    return dist.density(t)


def _quad(integrand, lo, hi, points=None):
    res = integrate.quad(
        integrand, lo, hi,
        points=points or None,
        epsabs=QUAD_ABS_TOL * 1e-2, epsrel=1e-11,
        limit=300, full_output=1,
    )
    value, abserr = res[0], res[1]
    if len(res) > 3:
        raise NumericalError(f"quadrature did not converge on [{lo}, {hi}]: {res[-1]}")
    return value, abserr


def _integrate_weighted(fn, dist: BlockTimeSumDistribution):
    """Integral of fn(t) * g(t) over [0, tail cutoff], with error estimate.

    Piecewise rules may expose `breakpoints` (sorted discontinuity abscissae);
    the domain is then split there so the adaptive rule never straddles a jump.
    """
    t_max = dist.tail_cutoff()
    integrand = lambda t: fn(t) * dist.density(t)
    breaks = sorted(b for b in getattr(fn, "breakpoints", ()) if 0.0 < b < t_max)
    if not breaks:
        pts = [p for p in dist.quad_points() if 0.0 < p < t_max]
        return _quad(integrand, 0.0, t_max, points=pts)
    total = err = 0.0
    edges = [0.0, *breaks, t_max]
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = _quad(integrand, lo, hi)
        total += v
        err += e
    return total, err


def condition1_residual(fn, dist: BlockTimeSumDistribution) -> float:
    """Mean adjustment E[f] under the stationary law; zero means no drift."""
    value, abserr = _integrate_weighted(fn, dist)
    if abserr > QUAD_ABS_TOL:
        raise NumericalError(
            f"quadrature error {abserr:.3e} exceeds tolerance {QUAD_ABS_TOL:.0e}"
        )
    return value


def condition1_report(fn, dist: BlockTimeSumDistribution) -> dict:
    """Residual plus quadrature diagnostics for machine-readable reports."""
    value, abserr = _integrate_weighted(fn, dist)
    return {
        "residual": value,
        "quadrature_error": abserr,
        "tail_cutoff": dist.tail_cutoff(),
        "truncated_tail_mass": TAIL_MASS,
    }


def solve_shift(scale: float, slope: float, center: float,
                dist: BlockTimeSumDistribution) -> float:
    """Vertical shift making the arctan rule drift-free under `dist`.

    residual(shift) = scale * (E[atan] + shift * mass), affine in the shift,
    so the unique root is recovered from two quadratures without iteration.
    """
    if scale <= 0.0 or slope <= 0.0:
        raise ConfigurationError("scale and slope must be > 0")
    atan_mean, _ = _integrate_weighted(lambda t: math.atan(slope * (t - center)), dist)
    mass, _ = _integrate_weighted(lambda t: 1.0, dist)
    return -atan_mean / mass


def solve_center(scale: float, slope: float, shift: float,
                 dist: BlockTimeSumDistribution) -> float:
    """Center making the arctan rule drift-free; solved by bracketed root find.

    The residual is strictly decreasing in the center, so any sign-changing
    bracket pins the unique root.  Requires |shift| < pi/2 for solvability.
    """
    if abs(shift) >= math.pi / 2.0:
        raise ConfigurationError("no drift-free center exists for |shift| >= pi/2")

    def residual_at(center):
        fn = ArctanUpdate(scale, slope, center, shift)
        value, _ = _integrate_weighted(fn, dist)
        return value

    mean = dist.total_mean()
    lo, hi = mean * 1e-3, mean
    r_lo, r_hi = residual_at(lo), residual_at(hi)
    for _ in range(120):
        if r_lo >= 0.0 >= r_hi:
            break
        # residual is decreasing in the center: negative at lo means the
        # bracket must move left, positive at hi means it must move right
        if r_lo < 0.0:
            lo *= 0.5
            r_lo = residual_at(lo)
        if r_hi > 0.0:
            hi *= 2.0
            r_hi = residual_at(hi)
    else:
        raise NumericalError("could not bracket the drift-free center")
    return float(optimize.brentq(residual_at, lo, hi, xtol=1e-12, rtol=8.9e-16))


def equilibrium_mean(fn, *, shape: int = 1, lo: float, hi: float) -> float:
    """Block-time mean at which `fn` has zero drift.

    Solves residual(mean) = 0 over exponential (shape 1) or Erlang block-time
    laws on the bracket [lo, hi].  The residual must change sign there.
    """
    kind = "exponential" if shape == 1 else "erlang"

    def residual_at(mean):
        return condition1_residual(fn, BlockTimeSumDistribution(kind, mean, shape))

    r_lo, r_hi = residual_at(lo), residual_at(hi)
    if r_lo == 0.0:
        return lo
    if r_hi == 0.0:
        return hi
    if (r_lo > 0.0) == (r_hi > 0.0):
        raise NumericalError(
            f"no sign change on [{lo}, {hi}]: residuals {r_lo:.3e}, {r_hi:.3e}"
        )
    return float(optimize.brentq(residual_at, lo, hi, xtol=1e-12, rtol=8.9e-16))


def amplitude_ratio(f_old, f_new) -> float:
    """Ratio of the rules' worst-case downward adjustments, sup f_old / sup f_new.

    Both rules must expose `supremum()` (their least upper bound on (0, inf)).
    This is the factor by which the old rule would cut difficulty faster than
    the new one during a stretch of pathologically long block times.
    """
    sup_old = f_old.supremum()
    sup_new = f_new.supremum()
    if sup_new <= 0.0:
        raise ConfigurationError(
            f"replacement rule has non-positive supremum {sup_new:.3g}"
        )
    return sup_old / sup_new
