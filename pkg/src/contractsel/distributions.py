"""Price laws and the offline optimum.

Every law exposes the quantile-space interface the policies and bounds are
written against: cdf, inv_cdf, the quantile density r (derivative of inv_cdf,
so inv_cdf(u) = inv_cdf(0) + integral of r over [0, u]), and inverse-transform
sampling from a caller-owned generator.  Laws are immutable after construction
and safe to share across threads.

The supported kinds (unit uniform, uniform interval, exponential, piecewise
linear inverse CDF) all have strictly increasing quantile functions; discrete
laws exist only as an escape hatch for the non-identically-distributed
impossibility instance and are rejected by validate().
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .series import PowerSums, uniform_opt


class TailError(ValueError):
    """Raised when the offline-optimum integrand is not integrable."""


class Distribution:
    """Base class for validated price laws."""

    kind: str = "abstract"

    def cdf(self, x):
        raise NotImplementedError

    def inv_cdf(self, u):
        raise NotImplementedError

    def r(self, v):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        return self.inv_cdf(u)

    def inv_cdf_integral(self, a: float, b: float) -> float:
        """Exact integral of inv_cdf over the quantile interval [a, b]."""
        raise NotImplementedError

    def mean(self) -> float:
        return self.inv_cdf_integral(0.0, 1.0)

    def expected_min_with(self, c: float) -> float:
        """E[min(X, c)] via the quantile-space split at F(c)."""
        if c <= 0.0:
            return float(c)
        u = float(self.cdf(c))
        return self.inv_cdf_integral(0.0, u) + (1.0 - u) * c

    def quad_points(self) -> list[float]:
        """Interior quantiles worth handing to adaptive quadrature."""
        return []

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformUnit(Distribution):
    kind = "uniform_unit"

    def cdf(self, x):
        return np.clip(x, 0.0, 1.0)

    def inv_cdf(self, u):
        return np.asarray(u, dtype=float) if np.ndim(u) else float(u)

    def r(self, v):
        return np.ones_like(v, dtype=float) if np.ndim(v) else 1.0

    def inv_cdf_integral(self, a, b):
        return 0.5 * (b * b - a * a)

    def to_json(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class UniformInterval(Distribution):
    lo: float
    hi: float
    kind = "uniform_interval"

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi):
            raise ValueError("uniform interval requires 0 <= lo < hi")

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def inv_cdf(self, u):
        return self.lo + (self.hi - self.lo) * np.asarray(u, dtype=float)

    def r(self, v):
        w = self.hi - self.lo
        return np.full_like(np.asarray(v, dtype=float), w) if np.ndim(v) else w

    def inv_cdf_integral(self, a, b):
        return self.lo * (b - a) + 0.5 * (self.hi - self.lo) * (b * b - a * a)

    def to_json(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float
    kind = "exponential"

    def __post_init__(self):
        if self.rate <= 0.0:
            raise ValueError("exponential rate must be positive")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = -np.expm1(-self.rate * np.maximum(x, 0.0))
        return out if out.ndim else float(out)

    def inv_cdf(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):  # inv_cdf(1) = +inf is the honest value
            out = -np.log1p(-u) / self.rate
        return out if out.ndim else float(out)

    def r(self, v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            out = 1.0 / (self.rate * (1.0 - v))
        return out if out.ndim else float(out)

    def inv_cdf_integral(self, a, b):
        # antiderivative of -log(1-u)/rate is ((1-u) log(1-u) + u) / rate
        def anti(u):
            if u >= 1.0:
                return 1.0 / self.rate
            return ((1.0 - u) * math.log1p(-u) + u) / self.rate

        return anti(b) - anti(a)

    def to_json(self):
        return {"kind": self.kind, "rate": self.rate}


class PiecewiseInverseCdf(Distribution):
    """Continuous piecewise-linear quantile function plus a global slope.

    Breakpoints are polyline corners (quantile, value); between corners the
    quantile function interpolates linearly, outside the given range it
    extends with the end values.  Steep ramps stand in for jumps, which keeps
    r integrable and the law inside the strictly-increasing contract whenever
    slope > 0.
    """

    kind = "piecewise_inverse_cdf"

    def __init__(self, breakpoints: Sequence[tuple[float, float]], slope: float = 0.0):
        if slope < 0.0:
            raise ValueError("slope must be nonnegative")
        pts = [(float(u), float(v)) for u, v in breakpoints]
        if not pts:
            raise ValueError("at least one breakpoint required")
        us = [u for u, _ in pts]
        if any(not (0.0 <= u <= 1.0) for u in us):
            raise ValueError("breakpoint quantiles must lie in [0, 1]")
        if any(u2 <= u1 for u1, u2 in zip(us, us[1:])):
            raise ValueError("breakpoint quantiles must be strictly increasing")
        if pts[0][0] > 0.0:
            pts.insert(0, (0.0, pts[0][1]))
        if pts[-1][0] < 1.0:
            pts.append((1.0, pts[-1][1]))
        self.breakpoints = tuple(pts)
        self.slope = float(slope)
        self._us = np.array([u for u, _ in pts])
        self._vs = np.array([v for _, v in pts])
        self._seg = np.diff(self._vs) / np.diff(self._us)
        # total quantile-function values at the corners, for cdf inversion
        self._gs = self._vs + self.slope * self._us

    def inv_cdf(self, u):
        u = np.asarray(u, dtype=float)
        out = np.interp(u, self._us, self._vs) + self.slope * u
        return out if out.ndim else float(out)

    def r(self, v):
        v = np.asarray(v, dtype=float)
        idx = np.clip(np.searchsorted(self._us, v, side="right") - 1, 0, len(self._seg) - 1)
        out = self._seg[idx] + self.slope
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._gs, x, side="right") - 1, 0, len(self._seg) - 1)
        den = self._seg[idx] + self.slope
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self._us[idx] + (x - self._gs[idx]) / den
        # flat pieces: right-continuous CDF jumps to the segment's upper end
        u = np.where(den > 0.0, u, self._us[idx + 1])
        u = np.clip(u, 0.0, 1.0)
        u = np.where(x < self._gs[0], 0.0, u)
        u = np.where(x >= self._gs[-1], 1.0, u)
        return u if u.ndim else float(u)

    def inv_cdf_integral(self, a, b):
        if b < a:
            return -self.inv_cdf_integral(b, a)
        us, vs = self._us, self._vs
        grid = [a] + [float(u) for u in us if a < u < b] + [b]
        vals = np.interp(grid, us, vs)
        acc = 0.0
        for (u1, u2, v1, v2) in zip(grid, grid[1:], vals, vals[1:]):
            acc += 0.5 * (v1 + v2) * (u2 - u1)
        return acc + 0.5 * self.slope * (b * b - a * a)

    def quad_points(self):
        return [float(u) for u in self._us if 0.0 < u < 1.0]

    def to_json(self):
        return {
            "kind": self.kind,
            "breakpoints": [[u, v] for u, v in self.breakpoints],
            "slope": self.slope,
        }


class DiscreteLaw:
    """Finite-support law; escape hatch for the non-i.i.d. DP only.

    Violates the strictly-increasing quantile contract on purpose, so it is
    not a Distribution and never reaches build_dp or validate().
    """

    def __init__(self, values: Sequence[float], probs: Sequence[float]):
        v = np.asarray(values, dtype=float)
        p = np.asarray(probs, dtype=float)
        if v.shape != p.shape or v.ndim != 1 or len(v) == 0:
            raise ValueError("values and probs must be matching 1-d sequences")
        if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        order = np.argsort(v)
        self.values = v[order]
        self.probs = p[order]
        self._cum = np.cumsum(self.probs)

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def expected_min_with(self, c: float) -> float:
        return float(np.dot(np.minimum(self.values, c), self.probs))

    def survival(self, x: float) -> float:
        """P[X > x]."""
        return float(self.probs[self.values > x].sum())

    def support_points(self) -> np.ndarray:
        return self.values

    def sample(self, rng: np.random.Generator, size=None):
        idx = np.searchsorted(self._cum, rng.random(size), side="right")
        idx = np.minimum(idx, len(self.values) - 1)
        return self.values[idx]


@dataclass(frozen=True)
class NonIidInstance:
    """Independent but possibly non-identical price laws, one per time step."""

    laws: tuple

    def __post_init__(self):
        if len(self.laws) == 0:
            raise ValueError("instance needs at least one law")

    @property
    def n(self) -> int:
        return len(self.laws)


# ---------------------------------------------------------------------------
# validation


_GRID_POINTS = 10_000
_CHECKPOINTS = 128


def validate(dist: Distribution) -> list[str]:
    """Check the quantile-interface invariants on a grid; violations are data.

    Empty list means: inv_cdf nondecreasing and nonnegative, the cdf/inv_cdf
    round trip holds to 1e-9 wherever the quantile function strictly
    increases, r >= 0, and the cumulative integral of r reproduces
    inv_cdf(u) - inv_cdf(0) to 1e-8.
    """
    out: list[str] = []
    grid = np.linspace(1.0 / _GRID_POINTS, 1.0 - 1.0 / _GRID_POINTS, _GRID_POINTS)
    vals = np.asarray(dist.inv_cdf(grid), dtype=float)

    if not np.all(np.isfinite(vals)):
        out.append("inv_cdf not finite on (0, 1)")
        return out
    if np.any(vals < -1e-12):
        out.append("support contains negative values")
    gaps = np.diff(vals)
    bad = int(np.sum(gaps < -1e-12))
    if bad:
        out.append(f"inv_cdf decreasing on {bad} grid interval(s)")

    rv = np.asarray(dist.r(grid), dtype=float)
    if np.any(rv < -1e-12):
        out.append("r takes negative values")

    strict = rv > 1e-12
    if np.any(strict):
        u2 = np.asarray(dist.cdf(vals[strict]), dtype=float)
        err = float(np.max(np.abs(u2 - grid[strict])))
        if err > 1e-9:
            out.append(f"round trip |cdf(inv_cdf(u)) - u| = {err:.3e} > 1e-9")

    # cumulative-integral consistency; adaptive quadrature per checkpoint
    # interval with the law's own breakpoints as hints, since a uniform grid
    # cannot see steep ramps
    pts = sorted(dist.quad_points())
    checks = np.linspace(0.0, 1.0 - 1.0 / _GRID_POINTS, _CHECKPOINTS + 1)
    base = float(dist.inv_cdf(0.0))
    acc = 0.0
    worst = 0.0
    ok = True
    for a, b in zip(checks, checks[1:]):
        inner = [p for p in pts if a < p < b]
        try:
            piece, _ = quad(dist.r, a, b, points=inner or None, limit=200,
                            epsabs=1e-12, epsrel=1e-12)
        except Exception:
            ok = False
            break
        acc += piece
        target = float(dist.inv_cdf(b)) - base
        worst = max(worst, abs(acc - target))
    if not ok:
        out.append("quadrature of r failed")
    elif worst > 1e-8:
        out.append(f"integral of r deviates from inv_cdf by {worst:.3e} > 1e-8")
    return out


# ---------------------------------------------------------------------------
# offline optimum


def opt_expected(dist: Distribution, n: int) -> float:
    """Expected offline cost: integral of inv_cdf(u) * sum_i i(1-u)^(i-1) du.

    Closed form for the unit uniform; adaptive quadrature otherwise.
    """
    if n < 1:
        raise ValueError("horizon must be >= 1")
    if isinstance(dist, UniformUnit):
        return uniform_opt(n)
    ps = PowerSums(n)

    def integrand(u: float) -> float:
        return float(dist.inv_cdf(u)) * ps.opt_weight(u)

    pts = dist.quad_points()
    val, err = quad(integrand, 0.0, 1.0, points=pts or None, limit=400,
                    epsabs=1e-10, epsrel=1e-10)
    if not math.isfinite(val):
        raise TailError("distribution has non-integrable tail at u->1")
    return val


def opt_trajectory(prices: Sequence[float]) -> float:
    """Offline cost of one realization: sum of running minima."""
    it = iter(prices)
    try:
        first = float(next(it))
    except StopIteration:
        raise ValueError("price sequence must be nonempty") from None
    if first < 0.0:
        raise ValueError("prices must be nonnegative")
    best = first
    total = first
    for p in it:
        p = float(p)
        if p < 0.0:
            raise ValueError("prices must be nonnegative")
        if p < best:
            best = p
        total += best
    return total


def opt_trajectories(prices: np.ndarray) -> np.ndarray:
    """Vectorized opt_trajectory over rows of a (trials, n) price matrix."""
    return np.minimum.accumulate(prices, axis=1).sum(axis=1)


# ---------------------------------------------------------------------------
# serialization / CLI literals


def distribution_from_json(obj: dict) -> Distribution:
    kind = obj.get("kind")
    if kind == "uniform_unit":
        return UniformUnit()
    if kind == "uniform_interval":
        return UniformInterval(lo=float(obj["lo"]), hi=float(obj["hi"]))
    if kind == "exponential":
        return Exponential(rate=float(obj["rate"]))
    if kind == "piecewise_inverse_cdf":
        bps = [(float(u), float(v)) for u, v in obj["breakpoints"]]
        return PiecewiseInverseCdf(bps, slope=float(obj.get("slope", 0.0)))
    raise ValueError(f"unknown distribution kind: {kind!r}")


def parse_dist_spec(spec: str) -> Distribution:
    """Parse a --dist argument: inline literal or path to a JSON document."""
    s = spec.strip()
    if s == "uniform":
        return UniformUnit()
    if s.startswith("uniform:"):
        lo, hi = (float(t) for t in s.split(":", 1)[1].split(","))
        return UniformInterval(lo, hi)
    if s.startswith("exp:"):
        return Exponential(rate=float(s.split(":", 1)[1]))
    with open(s, "r", encoding="utf-8") as fh:
        return distribution_from_json(json.load(fh))
