"""Monte Carlo engine, instance generators, and statistical reports.

Trajectory batches are vectorized across trials and chunked; each chunk draws
from a generator spawned off the root seed, so identical (seed, config) pairs
produce bit-identical reports regardless of chunk size.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .distributions import DiscreteLaw, Distribution, NonIidInstance
from .osdc import DpTable, build_dp, build_noniid_dp, noniid_alg_cost, noniid_opt_exact
from .oscc import OsccPolicyParams

CHUNK = 200_000


@dataclass(frozen=True)
class SimulationReport:
    trials: int
    n: int
    mean_alg_cost: float
    stderr_alg: float
    mean_opt_cost: float
    stderr_opt: float
    ratio_of_means: float
    seed: int | None
    policy: str
    violations: int
    exact: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


class _Accumulator:
    """Associative sum / sum-of-squares aggregation across chunks."""

    def __init__(self):
        self.n = 0
        self.s = 0.0
        self.s2 = 0.0

    def add(self, values: np.ndarray):
        self.n += values.size
        self.s += float(values.sum())
        self.s2 += float(np.square(values).sum())

    def mean(self) -> float:
        return self.s / self.n

    def stderr(self) -> float:
        if self.n < 2:
            return 0.0
        var = max(self.s2 / self.n - self.mean() ** 2, 0.0) * self.n / (self.n - 1)
        return (var / self.n) ** 0.5


def osdc_batch(dp: DpTable, dist: Distribution, trials: int,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, int]:
    """Optimal deferred policy on `trials` trajectories; returns (alg, opt, violations)."""
    n = dp.n
    negq = -np.asarray(dp.q)
    ell = np.zeros(trials, dtype=np.int64)
    alg = np.zeros(trials)
    run_min = np.full(trials, np.inf)
    opt = np.zeros(trials)
    violations = 0
    for i in range(1, n + 1):
        u = rng.random(trials)
        x = np.asarray(dist.inv_cdf(u))
        run_min = np.minimum(run_min, x)
        opt += run_min
        m_max = np.searchsorted(negq, -u, side="right")
        m_max = np.minimum(m_max, n - i + 1)
        j_star = i - 1 + m_max
        T = np.where((ell < n) & (j_star > ell), j_star - ell, 0)
        alg += T * x
        ell += T
        violations += int(np.count_nonzero(ell < i))
    return alg, opt, violations


def oscc_batch(params: OsccPolicyParams, dist: Distribution, trials: int,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, int]:
    """Meta-policy on `trials` trajectories; returns (alg, opt, violations)."""
    n = params.n
    j = params.j
    q = np.asarray(params.q)
    s = np.asarray(params.s, dtype=np.int64)
    t = np.asarray(params.t, dtype=np.int64)
    negq = -q
    k = np.zeros(trials, dtype=np.int64)
    c = np.full(trials, s[0], dtype=np.int64)
    cover = np.zeros(trials, dtype=np.int64)
    alg = np.zeros(trials)
    run_min = np.full(trials, np.inf)
    opt = np.zeros(trials)
    violations = 0
    for i in range(1, n + 1):
        u = rng.random(trials)
        x = np.asarray(dist.inv_cdf(u))
        run_min = np.minimum(run_min, x)
        opt += run_min
        live = k <= j
        c = np.where(live, c - 1, c)
        hit = live & (u <= q[np.minimum(k, j)])
        lvl = np.searchsorted(negq, -u, side="right") - 1
        lvl = np.where(hit, lvl, 0)
        length = np.minimum(t[lvl], n - i + 1)
        alg += np.where(hit, length * x, 0.0)
        cover = np.where(hit, np.maximum(cover, i + length - 1), cover)
        new_k = np.where(hit, lvl + 1, k)
        new_c = np.where(hit, np.where(lvl < j, s[np.minimum(lvl + 1, j)], -1), c)
        timeout = live & ~hit & (c == 0)
        fail0 = timeout & (k == 0)
        alg += np.where(fail0, x, 0.0)
        cover = np.where(fail0, np.maximum(cover, i), cover)
        new_c = np.where(fail0, s[0], new_c)
        back = timeout & (k > 0)
        new_k = np.where(back, k - 1, new_k)
        new_c = np.where(back, s[np.maximum(k - 1, 0)], new_c)
        k, c = new_k, new_c
        violations += int(np.count_nonzero(cover < i))
    return alg, opt, violations


def make_noniid_impossibility(n: int) -> NonIidInstance:
    """Point mass at 1, then scaled coin flips 2^i * Bernoulli(1/2).

    Discrete laws enter only through the non-i.i.d. DP's exact E[min(X, c)].
    """
    if n < 1:
        raise ValueError("horizon must be >= 1")
    laws = [DiscreteLaw([1.0], [1.0])]
    for i in range(2, n + 1):
        laws.append(DiscreteLaw([0.0, float(2**i)], [0.5, 0.5]))
    return NonIidInstance(laws=tuple(laws))


def simulate(policy, instance, trials: int = 100_000, seed: int | None = 0,
             exact: bool = False) -> SimulationReport:
    """Estimate (or exactly evaluate) the cost ratio of a policy on an instance.

    policy: ("osdc-optimal",) or ("oscc-meta", OsccPolicyParams).
    instance: ("iid", dist, n) or ("noniid", NonIidInstance).
    The ratio reported is the ratio of mean costs, not the mean of ratios.
    """
    kind = policy[0]
    inst_kind = instance[0]
    if inst_kind == "noniid":
        if kind != "osdc-optimal":
            raise ValueError("non-i.i.d. instances only support the osdc-optimal policy")
        if not exact:
            raise ValueError("non-i.i.d. instances run in exact-expectation mode only")
        inst: NonIidInstance = instance[1]
        table = build_noniid_dp(inst)
        alg = noniid_alg_cost(table)
        opt = noniid_opt_exact(inst)
        return SimulationReport(
            trials=0, n=inst.n, mean_alg_cost=alg, stderr_alg=0.0,
            mean_opt_cost=opt, stderr_opt=0.0, ratio_of_means=alg / opt,
            seed=seed, policy="osdc-optimal", violations=0, exact=True)

    if inst_kind != "iid":
        raise ValueError(f"unknown instance kind: {inst_kind!r}")
    dist: Distribution = instance[1]
    n: int = instance[2]
    if trials < 1:
        raise ValueError("trials must be >= 1")

    if kind == "osdc-optimal":
        dp = build_dp(dist, n)
        runner = lambda m, rng: osdc_batch(dp, dist, m, rng)
        label = "osdc-optimal"
    elif kind == "oscc-meta":
        params: OsccPolicyParams = policy[1]
        if params.n != n:
            raise ValueError("policy horizon does not match the instance")
        runner = lambda m, rng: oscc_batch(params, dist, m, rng)
        label = f"oscc-meta(j={params.j})"
    else:
        raise ValueError(f"unknown policy kind: {kind!r}")

    acc_alg, acc_opt = _Accumulator(), _Accumulator()
    violations = 0
    seeds = np.random.SeedSequence(seed)
    children = seeds.spawn((trials + CHUNK - 1) // CHUNK)
    left = trials
    for child in children:
        m = min(CHUNK, left)
        rng = np.random.default_rng(child)
        alg, opt, viol = runner(m, rng)
        acc_alg.add(alg)
        acc_opt.add(opt)
        violations += viol
        left -= m
    return SimulationReport(
        trials=trials, n=n, mean_alg_cost=acc_alg.mean(), stderr_alg=acc_alg.stderr(),
        mean_opt_cost=acc_opt.mean(), stderr_opt=acc_opt.stderr(),
        ratio_of_means=acc_alg.mean() / acc_opt.mean(), seed=seed,
        policy=label, violations=violations)
