"""Exact competitive ratio of the deferred model, with matching certificates.

The ratio zeta_n for horizon n is pinned down by a chain of quantile
breakpoints 1 = eps_1 > ... > eps_n > 0: each step inverts the strictly
decreasing map g(e) = (1-e) Pp(1-e) - P(1-e) at a target built from the
previous breakpoint, and an outer bisection drives the fixed-point residual
zeta - n / (eps_n Pp(1-eps_n) + P(1-eps_n)) to zero.  From the chain we build
the primal certificate (the d-ladder, the step function h, and the smoothed
worst-case law) and freeze every identity it must satisfy as a residual.

The n -> infinity limit is the boundary-value problem solved by
solve_zeta_star: a shooting method in the log variable lam = -ln(y), which
avoids the singularity of y at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import PiecewiseInverseCdf
from .series import PowerSums

EPS_BISECT_TOL = 1e-13
ZETA_BISECT_TOL = 1e-11


class ChainBroken(Exception):
    """Breakpoint chain left [0, eps_j); sign tells the outer bisection which way."""

    def __init__(self, sign: int, j: int):
        super().__init__(f"chain broken at step {j} (sign {sign:+d})")
        self.sign = sign
        self.j = j


@dataclass(frozen=True)
class RatioCertificate:
    n: int
    zeta_n: float
    eps: tuple
    d: tuple
    delta2: float
    h_steps: tuple
    residuals: dict
    small_n: bool = False


@dataclass(frozen=True)
class OdeSolution:
    zeta_star: float
    grid: tuple
    terminal_gap: float


def chain_map(ps: PowerSums, eps: float) -> float:
    """g(e) = (1-e) Pp(1-e) - P(1-e), strictly decreasing, g(1) = 0.

    Computed jointly through shared expm1/log1p terms; this runs a few million
    times inside the nested bisections.
    """
    if eps <= 0.0:
        n = ps.n
        return 0.5 * n * (n - 1)
    if eps >= 1.0:
        return 0.0
    n = ps.n
    if n * eps < 3e-4:
        # Taylor branch, mirroring PowerSums.deriv's cancellation guard
        g1 = n * (n + 1) * (n - 1) / 3.0
        g2 = 3.0 * math.comb(n + 1, 4) + math.comb(n + 1, 3)
        g3 = 4.0 * math.comb(n + 1, 5) + 2.0 * math.comb(n + 1, 4)
        return 0.5 * n * (n - 1) - eps * (g1 - eps * (g2 - eps * g3))
    t = 1.0 - eps
    ln_t = math.log1p(-eps)
    # t * Pp(t) = t * (-expm1(n ln t + log1p(n eps))) / eps^2
    # P(t)      = t * (-expm1(n ln t)) / eps
    m = n * ln_t + math.log1p(n * eps)
    return (t / eps) * (math.expm1(n * ln_t) - math.expm1(m) / eps)


def _chain_map_slope(ps: PowerSums, eps: float) -> float:
    # g'(e) = -(1-e) Ppp(1-e)
    t = 1.0 - eps
    return -t * ps.deriv2(t)


def step_eps(ps: PowerSums, eps_j: float, j: int, zeta: float) -> float:
    """Next breakpoint: the unique root of g(e) = Pp(1-eps_j) - j/zeta in [0, eps_j).

    Bisection to 1e-13 plus two Newton polish steps; the polish keeps the
    certificate residuals near machine level at large n.
    """
    target = ps.deriv(1.0 - eps_j) - j / zeta
    if target > chain_map(ps, 0.0):
        raise ChainBroken(+1, j)  # root would be negative: zeta too large
    if target <= chain_map(ps, eps_j):
        raise ChainBroken(-1, j)  # breakpoints would stop decreasing: zeta too small
    lo, hi = 0.0, eps_j
    while hi - lo > EPS_BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if chain_map(ps, mid) >= target:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(2):
        slope = _chain_map_slope(ps, x)
        if slope == 0.0:
            break
        x -= (chain_map(ps, x) - target) / slope
        if not (lo - EPS_BISECT_TOL <= x <= hi + EPS_BISECT_TOL):
            x = 0.5 * (lo + hi)
            break
    return x


def eps_chain(ps: PowerSums, zeta: float) -> list[float]:
    """Full breakpoint chain from eps_1 = 1; raises ChainBroken when invalid."""
    eps = [1.0]
    for j in range(1, ps.n):
        eps.append(step_eps(ps, eps[-1], j, zeta))
    return eps


def _ratio_at_tail(ps: PowerSums, eps_n: float) -> float:
    t = 1.0 - eps_n
    return ps.n / (eps_n * ps.deriv(t) + ps.value(t))


def solve_zeta(n: int) -> RatioCertificate:
    """Exact horizon-n ratio with the full primal certificate.

    Outer bisection on zeta in (1, 4]: a broken chain classifies the sign
    directly, a complete chain contributes the fixed-point residual
    zeta - n/(eps_n Pp(1-eps_n) + P(1-eps_n)), which is increasing in zeta.
    """
    if n < 1:
        raise ValueError("horizon must be >= 1")
    if n == 1:
        residuals = {k: 0.0 for k in (
            "recurrence", "fixed_point", "sum_d", "tail_identity",
            "normalization", "orthogonality", "dual_equalities")}
        return RatioCertificate(n=1, zeta_n=1.0, eps=(1.0,), d=(1.0,), delta2=1.0,
                                h_steps=(), residuals=residuals, small_n=True)

    ps = PowerSums(n)

    def classify(zeta: float) -> int:
        try:
            eps = eps_chain(ps, zeta)
        except ChainBroken as cb:
            return cb.sign
        return 1 if zeta >= _ratio_at_tail(ps, eps[-1]) else -1

    lo, hi = 1.0 + 1e-9, 4.0
    s_lo, s_hi = classify(lo), classify(hi)
    if not (s_lo < 0 < s_hi):
        raise RuntimeError(
            f"bisection bracket failure: sign({lo}) = {s_lo:+d}, sign({hi}) = {s_hi:+d}")
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if classify(mid) > 0:
            hi = mid
        else:
            lo = mid

    # the chain is valid throughout the remaining bracket, so the fixed-point
    # residual is smooth there and Brent finishes in a handful of evaluations
    def fixed_point_residual(zeta: float) -> float:
        try:
            eps = eps_chain(ps, zeta)
        except ChainBroken as cb:
            return cb.sign * 1e6
        return zeta - _ratio_at_tail(ps, eps[-1])

    from scipy.optimize import brentq

    zeta = float(brentq(fixed_point_residual, lo, hi,
                        xtol=ZETA_BISECT_TOL, rtol=8.9e-16))
    eps = eps_chain(ps, zeta)
    return _build_certificate(ps, zeta, eps)


def _build_certificate(ps: PowerSums, zeta: float, eps: list[float]) -> RatioCertificate:
    n = ps.n
    eps_n = eps[-1]

    # S1 = sum_{i=2..n-1} P(1-eps_i) prod_{k=2..i-1}(1-eps_k); S2 = full product
    s1 = 0.0
    prod = 1.0
    for i in range(2, n):
        s1 += ps.value(1.0 - eps[i - 1]) * prod
        prod *= 1.0 - eps[i - 1]
    s2 = prod

    p_tail = ps.value(1.0 - eps_n)
    d_nm1 = 1.0 / (eps_n * (1.0 + s1) / s2 + p_tail)
    delta2 = eps_n * d_nm1 / s2

    # d_1 = d_{n-1} + Delta_2 sum_{i=1..n-2} prod_{k=2..i}(1-eps_k)
    acc = 0.0
    prod = 1.0
    for i in range(1, n - 1):
        acc += prod
        prod *= 1.0 - eps[i]
    d1 = d_nm1 + delta2 * acc

    d = [d1]
    prod = 1.0
    for i in range(1, n):
        d.append(d[-1] - delta2 * prod)
        prod *= 1.0 - eps[i]

    residuals = _certificate_residuals(ps, zeta, eps, d, delta2, s1, s2)
    h_steps = tuple(((eps[i], eps[i - 1]), d[i - 1]) for i in range(1, n))
    return RatioCertificate(
        n=n, zeta_n=zeta, eps=tuple(eps), d=tuple(d), delta2=delta2,
        h_steps=h_steps, residuals=residuals, small_n=(n <= 2))


def _certificate_residuals(ps, zeta, eps, d, delta2, s1, s2) -> dict:
    n = ps.n
    eps_n = eps[-1]
    rec = 0.0
    for j in range(1, n):
        target = ps.deriv(1.0 - eps[j - 1]) - j / zeta
        rec = max(rec, abs(chain_map(ps, eps[j]) - target))
    fixed = abs(zeta - _ratio_at_tail(ps, eps_n)) / zeta
    sum_d = abs(sum(d) - zeta) / zeta
    tail = abs(d[-1] - (1.0 - eps_n) * d[-2]) if n >= 2 else 0.0
    normalization = abs((1.0 + s1) * delta2 + ps.value(1.0 - eps_n) * d[-2] - 1.0)
    orthogonality = abs(s2 * delta2 - eps_n * d[-2])

    # aggregated dual constraints, closed form; all must hold with equality
    dual = abs(zeta - zeta * chain_map(ps, eps[1]) - 1.0)
    for i in range(2, n):
        lhs = zeta * (ps.deriv(1.0 - eps[i - 1]) - ps.deriv(1.0 - eps[i - 2]))
        rhs = zeta * (chain_map(ps, eps[i]) - chain_map(ps, eps[i - 1])) + 1.0
        dual = max(dual, abs(lhs - rhs))
    dual = max(dual, abs(zeta * (ps.deriv(1.0 - eps[-1]) - ps.deriv(1.0 - eps[-2])) - 1.0))

    return {
        "recurrence": rec,
        "fixed_point": fixed,
        "sum_d": sum_d,
        "tail_identity": tail,
        "normalization": normalization,
        "orthogonality": orthogonality,
        "dual_equalities": dual,
    }


def worst_case_distribution(cert: RatioCertificate, xi1: float = 1e-4,
                            xi2: float = 1e-4) -> PiecewiseInverseCdf:
    """Smoothed realization of the certificate's step function h.

    Value d_i on [eps_{i+1}, eps_i); the top mass delta2 becomes a ramp of
    quantile width xi2 below u = 1; interior jumps become ramps capped at a
    quarter of the step below them; global slope xi1 keeps the quantile
    function strictly increasing.
    """
    if not (0.0 < xi1 < 1.0 and 0.0 < xi2 < 1.0):
        raise ValueError("smoothing widths must lie in (0, 1)")
    n = cert.n
    if n == 1:
        top = 2.0 * cert.delta2 / xi2
        return PiecewiseInverseCdf([(0.0, 0.0), (1.0 - xi2, 0.0), (1.0, top)], slope=xi1)
    eps = cert.eps
    d = cert.d
    if xi2 >= eps[0] - eps[1]:
        raise ValueError("xi2 must be smaller than the top step width eps_1 - eps_2")

    pts: list[tuple[float, float]] = [(0.0, 0.0)]

    def add_ramp(u_jump: float, lower: float, upper: float, room: float):
        w = min(xi2, 0.25 * room)
        if w <= 0.0:
            return
        pts.append((u_jump - w, lower))
        pts.append((u_jump, upper))

    # bottom jump at eps_n: 0 -> d_{n-1}
    add_ramp(eps[-1], 0.0, d[-2], eps[-1])
    # interior jumps at eps_i (i = n-1 .. 2): d_i -> d_{i-1}
    for i in range(n - 1, 1, -1):
        add_ramp(eps[i - 1], d[i - 1], d[i - 2], eps[i - 1] - eps[i])
    # top ramp carrying mass delta2 over (1 - xi2, 1]
    pts.append((1.0 - xi2, d[0]))
    pts.append((1.0, d[0] + 2.0 * cert.delta2 / xi2))
    return PiecewiseInverseCdf(pts, slope=xi1)


# ---------------------------------------------------------------------------
# asymptotic ratio: shooting on the boundary-value problem


def _lam_coeff(lam: float) -> float:
    """Coefficient of lam'(x); series below 1e-3 to dodge the 0/0 at lam = 0."""
    if lam < 1e-3:
        return -1.0 / 3.0 + lam / 4.0 - lam * lam / 10.0
    e = math.exp(-lam)
    return e / lam + 2.0 * e / (lam * lam) - 2.0 * (1.0 - e) / lam**3


def _lam_drive(lam: float, x: float, zeta: float) -> float:
    if abs(lam) < 1e-6:
        ratio = 1.0 - lam / 2.0 + lam * lam / 6.0
    else:
        ratio = -math.expm1(-lam) / lam
    return 2.0 * ratio - math.exp(-lam) - x / zeta


def _shoot(zeta: float, lam0: float = 40.0, x0: float = 1e-6):
    """Integrate lam(x) from lam(x0) = lam0; returns (hit_zero, x_end, trajectory)."""
    from scipy.integrate import solve_ivp

    def rhs(x, y):
        return (_lam_drive(y[0], x, zeta) / _lam_coeff(y[0]),)

    def crossing(x, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1.0

    last_exc = None
    for max_step in (0.02, 0.005, 0.001):
        try:
            sol = solve_ivp(rhs, (x0, 1.0), (lam0,), method="RK45",
                            rtol=1e-10, atol=1e-12, max_step=max_step,
                            events=crossing, dense_output=True)
        except (ValueError, FloatingPointError) as exc:  # pragma: no cover
            last_exc = exc
            continue
        if sol.success:
            hit = len(sol.t_events[0]) > 0
            x_end = float(sol.t_events[0][0]) if hit else float(sol.t[-1])
            return hit, x_end, sol
    raise RuntimeError(f"integration failed inside the bracket: {last_exc}")


def solve_zeta_star(tol: float = 1e-3) -> OdeSolution:
    """Asymptotic ratio via bisection on the shooting terminal condition.

    lam hitting 0 before x = 1 means y reached 1 early (zeta too large);
    lam(1) > 0 means y fell short (zeta too small).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    lo, hi = 1.5, 4.0
    hit_lo, _, _ = _shoot(lo)
    hit_hi, _, _ = _shoot(hi)
    if hit_lo or not hit_hi:
        raise RuntimeError("shooting bracket failed: expected lam(1) > 0 at 1.5 "
                           "and an early crossing at 4.0")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        hit, _, _ = _shoot(mid)
        if hit:
            hi = mid
        else:
            lo = mid
    zeta = 0.5 * (lo + hi)
    hit, x_end, sol = _shoot(zeta)
    xs = np.linspace(1e-6, x_end, 512)
    lam = sol.sol(xs)[0]
    ys = np.exp(-np.maximum(lam, 0.0))
    gap = abs(1.0 - float(ys[-1]))
    grid = tuple((float(x), float(y)) for x, y in zip(xs, ys))
    return OdeSolution(zeta_star=zeta, grid=grid, terminal_gap=gap)
