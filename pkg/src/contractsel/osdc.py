"""Deferred-contract model: single-selection DP and the optimal online policy.

The optimal algorithm decomposes into n cost-minimization single-selection
problems.  d_i is the optimal expected cost of selecting one value out of i
observations; the minimizing quantile of the DP step doubles as the policy's
acceptance benchmark.  The non-identical variant keeps one DP row per time
step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import DiscreteLaw, Distribution, NonIidInstance, validate


@dataclass(frozen=True)
class DpTable:
    """State costs d_1..d_n and benchmark quantiles q_1..q_n (q_1 = 1)."""

    n: int
    d: tuple
    q: tuple


def build_dp(dist: Distribution, n: int) -> DpTable:
    """Solve d_1 = E[X], d_i = min_q { int_0^q inv_cdf + (1-q) d_{i-1} }.

    The inner minimum sits where inv_cdf(q) = d_{i-1}, i.e. q_i = cdf(d_{i-1});
    with that q the step value is exactly E[min(X, d_{i-1})].
    """
    if n < 1:
        raise ValueError("horizon must be >= 1")
    problems = validate(dist)
    if problems:
        raise ValueError("distribution failed validation: " + "; ".join(problems))
    d = [dist.mean()]
    q = [1.0]
    for _ in range(2, n + 1):
        c = d[-1]
        qi = float(dist.cdf(c))
        d.append(dist.inv_cdf_integral(0.0, qi) + (1.0 - qi) * c)
        q.append(qi)
    return DpTable(n=n, d=tuple(d), q=tuple(q))


def optimal_alg_cost(dp: DpTable) -> float:
    """Expected cost of the optimal deferred policy: sum of the d_i."""
    return float(sum(dp.d))


def act(dp: DpTable, i: int, ell: int, x: float, dist: Distribution) -> int:
    """Contract length at time i given coverage through ell and price x.

    Picks the largest j in [ell+1, n] whose single-selection problem still
    accepts x, i.e. F(x) <= q_{j-i+1}; returns j - ell, or 0 when none accepts.
    Boundary ties accept.  q_1 = 1 guarantees a contract whenever ell = i-1.
    """
    n = dp.n
    if ell < i - 1:
        raise RuntimeError("coverage violated upstream: ell < i-1")
    if ell >= n:
        return 0
    u = float(dist.cdf(x))
    # q is strictly decreasing after index 1; admissible problem sizes are
    # m = j - i + 1 with q_m >= u
    m_max = 0
    for m in range(n - i + 1, 0, -1):
        if u <= dp.q[m - 1]:
            m_max = m
            break
    j_star = i - 1 + m_max
    if j_star <= ell:
        return 0
    return j_star - ell


def run_trajectory(dp: DpTable, dist: Distribution, prices) -> tuple[float, list]:
    """Play the optimal policy on one price sequence; returns (cost, contracts)."""
    n = dp.n
    if len(prices) != n:
        raise ValueError("price sequence length must equal the horizon")
    ell = 0
    cost = 0.0
    log = []
    for i in range(1, n + 1):
        if ell >= n:
            break
        t = act(dp, i, ell, float(prices[i - 1]), dist)
        if t > 0:
            log.append((i, t, float(prices[i - 1])))
            cost += t * float(prices[i - 1])
            ell += t
        if ell < i:
            raise RuntimeError("coverage violated at time %d" % i)
    return cost, log


# ---------------------------------------------------------------------------
# non-identical laws


@dataclass(frozen=True)
class NonIidDpTable:
    """Lower-triangular D[i][j]: optimal cost of the i-th problem with j draws left."""

    n: int
    D: tuple

    def value(self, i: int, j: int) -> float:
        return self.D[i - 1][j - 1]


def build_noniid_dp(inst: NonIidInstance) -> NonIidDpTable:
    """D_{i,1} = E[X_i]; D_{i,j} = E[min(X_{i-j+1}, D_{i,j-1})].

    Laws need only expose mean() and expected_min_with(); discrete laws get
    exact values, continuous ones go through the quantile-space integral.
    """
    n = inst.n
    rows = []
    for i in range(1, n + 1):
        law_i = inst.laws[i - 1]
        row = [float(law_i.mean())]
        if not np.isfinite(row[0]):
            raise ValueError(f"law {i} has non-finite mean")
        for j in range(2, i + 1):
            law = inst.laws[i - j]  # X_{i-j+1}
            row.append(float(law.expected_min_with(row[-1])))
        rows.append(tuple(row))
    return NonIidDpTable(n=n, D=tuple(rows))


def noniid_alg_cost(table: NonIidDpTable) -> float:
    """Optimal deferred-model cost on the instance: sum of the diagonal."""
    return float(sum(row[-1] for row in table.D))


def noniid_opt_exact(inst: NonIidInstance) -> float:
    """Exact offline optimum for instances of finite-support laws.

    E[min(X_1..X_i)] = integral of the survival product, a step function of x
    when every law is discrete; summed over prefixes.
    """
    if not all(isinstance(law, DiscreteLaw) for law in inst.laws):
        raise ValueError("exact offline optimum needs finite-support laws")
    total = 0.0
    pts: set[float] = {0.0}
    for i, law in enumerate(inst.laws, start=1):
        pts.update(float(v) for v in law.support_points())
        grid = sorted(pts)
        acc = 0.0
        for a, b in zip(grid, grid[1:]):
            surv = 1.0
            for prior in inst.laws[:i]:
                surv *= prior.survival(a)
                if surv == 0.0:
                    break
            acc += surv * (b - a)
        total += acc
    return total
