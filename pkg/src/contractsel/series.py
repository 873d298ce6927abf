"""Stable evaluation of the geometric power sums that drive every quantile formula.

P(t)  = sum_{i=1..n} t^i
Pp(t) = sum_{i=1..n} i t^(i-1)
Ppp(t) = sum_{i=1..n} i (i-1) t^(i-2)

Closed forms cancel catastrophically near t = 1, so they are rewritten with
expm1/log1p (P, Pp) or replaced by the raw Horner sum close to the boundary
(Ppp).
"""

from __future__ import annotations

import math


class PowerSums:
    """Evaluator for P_n, its first and second derivatives on [0, 1]."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("horizon must be a positive integer")
        self.n = n

    def value(self, t: float) -> float:
        """P(t) = t (1 - t^n) / (1 - t), with P(1) = n."""
        n = self.n
        if t <= 0.0:
            return 0.0
        if t >= 1.0:
            return float(n)
        eps = 1.0 - t
        # 1 - t^n = -expm1(n log(t)); log via log1p(-eps) keeps accuracy near t=1
        return t * (-math.expm1(n * math.log1p(-eps))) / eps

    def deriv(self, t: float) -> float:
        """Pp(t) = (1 - t^n (1 + n(1-t))) / (1-t)^2, with Pp(1) = n(n+1)/2."""
        n = self.n
        if t <= 0.0:
            return 1.0
        if t >= 1.0:
            return 0.5 * n * (n + 1)
        eps = 1.0 - t
        if n * eps < 3e-4:
            # Taylor in eps; the expm1 route cancels to O((n eps)^2) and loses
            # relative accuracy exactly where this expansion is sharp
            a1 = n * (n + 1) * (n - 1) / 3.0
            a2 = 3.0 * math.comb(n + 1, 4)
            a3 = 4.0 * math.comb(n + 1, 5)
            return 0.5 * n * (n + 1) - eps * (a1 - eps * (a2 - eps * a3))
        # numerator = 1 - exp(n log t + log1p(n eps)) = -expm1(m); the combined
        # exponent m avoids forming t^n and (1 + n eps) separately
        m = n * math.log1p(-eps) + math.log1p(n * eps)
        return -math.expm1(m) / (eps * eps)

    def deriv2(self, t: float) -> float:
        """Ppp(t); raw sum inside the cancellation guard near t = 1."""
        n = self.n
        if t >= 1.0:
            return n * (n + 1) * (n - 1) / 3.0
        eps = 1.0 - t
        if eps < max(1e-6, 2.0 / n):
            return self._deriv2_raw(t)
        tn = math.exp(n * math.log1p(-eps))
        num = 2.0 - 2.0 * tn - 2.0 * n * tn * eps - n * (n + 1) * (tn / t) * eps * eps
        return num / (eps * eps * eps)

    def _deriv2_raw(self, t: float) -> float:
        acc = 0.0
        for i in range(self.n, 1, -1):
            acc = acc * t + i * (i - 1)
        return acc

    def opt_weight(self, u: float) -> float:
        """Weight Pp(1-u) of the offline-optimum integral, guarded near u = 0."""
        if u < 1e-6:
            return self._deriv_raw(1.0 - u)
        return self.deriv(1.0 - u)

    def _deriv_raw(self, t: float) -> float:
        acc = 0.0
        for i in range(self.n, 0, -1):
            acc = acc * t + i
        return acc


def harmonic(m: int) -> float:
    """H_m, exact summation up to 10^7 terms, asymptotic expansion beyond."""
    if m <= 0:
        return 0.0
    if m <= 10_000_000:
        import numpy as np

        total = 0.0
        lo = 1
        while lo <= m:
            hi = min(m, lo + 5_000_000 - 1)
            total += float(np.sum(1.0 / np.arange(lo, hi + 1, dtype=np.float64)))
            lo = hi + 1
        return total
    x = float(m)
    return (
        math.log(x)
        + EULER_GAMMA
        + 1.0 / (2.0 * x)
        - 1.0 / (12.0 * x * x)
        + 1.0 / (120.0 * x**4)
    )


EULER_GAMMA = 0.5772156649015328606


def uniform_opt(n: int) -> float:
    """Offline optimum for unit-uniform prices: sum_{i=1..n} 1/(i+1) = H_{n+1} - 1."""
    return harmonic(n + 1) - 1.0
