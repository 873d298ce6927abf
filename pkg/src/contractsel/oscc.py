"""Concurrent-contract model: the quantile meta-policy and its parameter families.

The policy walks a ladder of quantile benchmarks q_0 > ... > q_j.  In state k
it watches for a price whose quantile is at or below q_k for up to s_k steps;
a hit buys a contract of the level's duration and moves to the level above the
hit, a timeout relaxes the benchmark one level down.  Coverage is guaranteed
by the input condition sum_{l<=k+1} s_l <= t_k and s_0 = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .distributions import Distribution

TERMINAL = -1  # search counter sentinel once the top contract is bought


@dataclass(frozen=True)
class OsccPolicyParams:
    q: tuple
    s: tuple
    t: tuple
    n: int

    def __post_init__(self):
        j = len(self.q) - 1
        if not (len(self.s) == len(self.t) == j + 1):
            raise ValueError("q, s, t must have equal length j+1")
        if self.n < 1:
            raise ValueError("horizon must be >= 1")
        if any(not (0.0 < qk <= 1.0) for qk in self.q):
            raise ValueError("quantiles must lie in (0, 1]")
        if any(q2 >= q1 for q1, q2 in zip(self.q, self.q[1:])):
            raise ValueError("quantiles must be strictly decreasing")
        if self.s[0] != 1:
            raise ValueError("s_0 must be 1 so time 1 is always covered")
        if any(sk < 1 or sk != int(sk) for sk in self.s):
            raise ValueError("search durations must be positive integers")
        if any(tk < 1 or tk != int(tk) for tk in self.t):
            raise ValueError("contract durations must be positive integers")
        if any(s2 < s1 for s1, s2 in zip(self.s, self.s[1:])):
            raise ValueError("search durations must be nondecreasing")
        if any(t2 < t1 for t1, t2 in zip(self.t, self.t[1:])):
            raise ValueError("contract durations must be nondecreasing")
        if self.t[j] < self.n:
            raise ValueError(f"t_j = {self.t[j]} must cover the horizon n = {self.n}")
        for k in range(j):
            run = sum(self.s[: k + 2])
            # exact for any realistic magnitudes; the relative slack only
            # absorbs float rounding once t_k outgrows 2^53
            if run > self.t[k] and run - self.t[k] > 1e-12 * self.t[k]:
                raise ValueError(
                    f"coverage condition fails at k={k}: sum s_0..s_{k+1} = {run} > t_k = {self.t[k]}")

    @property
    def j(self) -> int:
        return len(self.q) - 1


@dataclass(frozen=True)
class ContractRecord:
    start: int
    length: int
    price: float
    state: int


@dataclass
class OsccRunState:
    """Mutable machine state: level, remaining search steps, coverage, cost."""

    k: int
    c: int
    covered_until: int
    total_cost: float


def family_params(a: float, beta: float, qgrow: float, n: int) -> OsccPolicyParams:
    """Geometric family: q_k = beta/q^k, t_k = floor(a q^k + k + 2 - a/q),
    s_0 = 1, s_k = ceil(b q^k) with b = a(q-1)/q^2, j = ceil(log_q(n/a)).

    beta must exceed (q^2/(a(q-1))) ln((2q-1)/q), which keeps the dual-side
    quantity E = (2q-1) p~ - (q-1) positive.
    """
    if qgrow <= 1.0:
        raise ValueError("qgrow must exceed 1")
    if a <= 0.0:
        raise ValueError("a must be positive")
    q = qgrow
    beta_lo = q * q / (a * (q - 1.0)) * math.log((2.0 * q - 1.0) / q)
    if not (beta_lo < beta <= 1.0):
        raise ValueError(f"beta must lie in ({beta_lo:.6f}, 1]")
    j = max(0, math.ceil(math.log(n / a, q))) if n > a else 0
    b = a * (q - 1.0) / (q * q)
    qs = tuple(beta / q**k for k in range(j + 1))
    ts = tuple(int(math.floor(a * q**k + k + (2.0 - a / q))) for k in range(j + 1))
    ss = (1,) + tuple(int(math.ceil(b * q**k)) for k in range(1, j + 1))
    return OsccPolicyParams(q=qs, s=ss, t=ts, n=n)


def disser_params(n: int) -> OsccPolicyParams:
    """Doubling family q_k = 1/2^k, s_k = 2^k, t_k = 4 * 2^k, j = ceil(log2(n/4))."""
    if n < 1:
        raise ValueError("horizon must be >= 1")
    j = max(0, math.ceil(math.log2(n / 4.0))) if n > 4 else 0
    qs = tuple(1.0 / 2**k for k in range(j + 1))
    ss = tuple(2**k for k in range(j + 1))
    ts = tuple(4 * 2**k for k in range(j + 1))
    return OsccPolicyParams(q=qs, s=ss, t=ts, n=n)


def run(params: OsccPolicyParams, dist: Distribution, prices) -> tuple[float, list[ContractRecord]]:
    """Execute the state machine on one price sequence.

    Returns total cost and the contract log; raises if any time step ends up
    uncovered (valid parameters make that impossible).
    """
    n = params.n
    if len(prices) != n:
        raise ValueError("price sequence length must equal the horizon")
    j = params.j
    st = OsccRunState(k=0, c=params.s[0], covered_until=0, total_cost=0.0)
    log: list[ContractRecord] = []
    for i in range(1, n + 1):
        if st.c == TERMINAL:
            continue  # top contract already covers through n
        st.c -= 1
        x = float(prices[i - 1])
        u = float(dist.cdf(x))
        if u <= params.q[st.k]:
            l = st.k
            while l < j and u <= params.q[l + 1]:
                l += 1
            length = min(params.t[l], n - i + 1)
            st.total_cost += length * x
            log.append(ContractRecord(start=i, length=length, price=x, state=l))
            st.covered_until = max(st.covered_until, i + length - 1)
            if l == j:
                st.c = TERMINAL
                st.k = j + 1
            else:
                st.k = l + 1
                st.c = params.s[st.k]
        elif st.c == 0:
            if st.k == 0:
                st.total_cost += x
                log.append(ContractRecord(start=i, length=1, price=x, state=0))
                st.covered_until = max(st.covered_until, i)
                st.c = params.s[0]
            else:
                st.k -= 1
                st.c = params.s[st.k]
        if st.covered_until < i:
            raise RuntimeError(f"coverage violated at time {i} (state {st.k})")
    return st.total_cost, log


def queue_contracts(log: list[ContractRecord], n: int) -> tuple[float, int]:
    """Deferred-model replay of a concurrent contract log.

    Scheduling the same contracts back-to-back keeps the cost identical and
    covers at least the original horizon, so the replay is feasible for the
    deferred model whenever the original run covered 1..n.
    """
    total_len = sum(rec.length for rec in log)
    total_cost = sum(rec.length * rec.price for rec in log)
    if total_len < n:
        raise RuntimeError("queued schedule shorter than the horizon")
    return total_cost, total_len
