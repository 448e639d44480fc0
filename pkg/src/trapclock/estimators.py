"""Monte Carlo and exact small-graph estimators for the block-clock conditions.

Everything here watches the chain at block marks: with blocking window
theta_n, the chain is sampled at steps floor(k * theta_n), k = 1..k_n(t)-1,
and the block variable Z_1 started from a site x is the rescaled clock
increment accumulated over one window.

The condition functionals estimated:

* Q_u(x)        P_x(Z_1 > u), the per-site block tail;
* pi_t          the empirical measure of the chain at block marks;
* nu_t(u)       k_n(t) * sum_x pi(x) Q_u(x), estimated without plug-in bias
                by pairing each visited mark with one fresh block run;
* sigma_t(u)    like nu but with Q^2: two independent block runs per mark
                (squaring one estimate would bias upward);
* m_eps         k_n(t) * sum_x pi(x) E_x[Z_1; Z_1 <= eps];
* return sums   sum_k P_x(J(floor(k theta_n)) = x), reported per k.

Modes: "quenched" fixes one environment and varies trajectories; "annealed"
redraws the environment for every trajectory from the seed fan-out.  All
randomness is a pure function of (seed, trajectory index), so estimates are
reproducible for any worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .chains import (ChainKind, LatticeModel, TableModel, TrajectoryConfig,
                     as_model, run_discrete, run_vsrw)
from .clock import ScaleSet, build_clock
from .env import EnvConfig, tau_array
from .errors import (ContractViolationError, DegenerateScaleError)
from .parallel import index_chunks, run_tasks
from .rng import ENV_FANOUT, TRAJ_FANOUT, hash_words

MODES = ("quenched", "annealed")


class ConditionName(str, Enum):
    Q_U = "Q_u"
    PI_T = "Pi_t"
    NU_T = "Nu_t"
    SIGMA_T = "Sigma_t"
    M_EPS = "M_eps"
    A0_TAIL = "A0_tail"
    A1_RETURN_SUM = "A1_return_sum"
    HEAT_KERNEL = "heat_kernel"
    RANGE = "range"
    EXIT_TIME = "exit_time"


@dataclass
class ConditionEstimate:
    """One scalar estimate with its standard error and provenance."""

    name: ConditionName
    value: float
    std_error: float
    n_samples: int
    params: dict = field(default_factory=dict)
    series: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.std_error < 0:
            raise ContractViolationError("std_error must be >= 0")
        if self.n_samples < 1:
            raise ContractViolationError("n_samples must be >= 1")


@dataclass
class TrapSetSample:
    """Deep-trap sites found inside a scanned box."""

    sites: list
    eps_n: float
    box_radius: float


@dataclass
class PiEstimate:
    """Sparse block-mark occupation estimate: per-site (value, SE) inside the
    box plus the mass that landed outside it."""

    in_box: Dict[object, Tuple[float, float]]
    remainder: Tuple[float, float]
    k_count: int
    n_samples: int
    box_radius: float
    params: dict = field(default_factory=dict)

    @property
    def total_mass(self) -> float:
        return sum(v for v, _ in self.in_box.values()) + self.remainder[0]


# ---------------------------------------------------------------------------
# sampling plumbing


def _base_seed(env_or_model, seed: Optional[int]) -> int:
    if seed is not None:
        return int(seed)
    if isinstance(env_or_model, EnvConfig):
        return env_or_model.env_seed
    raise ContractViolationError(
        "table models carry no seed; pass seed= explicitly")


def _check_mode(env_or_model, mode: str):
    if mode not in MODES:
        raise ContractViolationError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "annealed" and not isinstance(env_or_model, EnvConfig):
        raise ContractViolationError("annealed mode needs an EnvConfig template")


class _Sampler:
    """Resolves (model, trajectory seed) per absolute trajectory index."""

    def __init__(self, env_or_model, mode: str, base_seed: int):
        _check_mode(env_or_model, mode)
        self.mode = mode
        self.base_seed = base_seed
        self.template = env_or_model if isinstance(env_or_model, EnvConfig) else None
        self.shared = as_model(env_or_model) if mode == "quenched" else None

    def at(self, i: int):
        if self.mode == "quenched":
            return self.shared, hash_words(self.base_seed, TRAJ_FANOUT, i)
        cfg = replace(self.template,
                      env_seed=hash_words(self.base_seed, ENV_FANOUT, i))
        return LatticeModel(cfg), hash_words(cfg.env_seed, TRAJ_FANOUT, 0)


def _sub_seed(traj_seed: int, k: int, replica: int) -> int:
    return hash_words(traj_seed, TRAJ_FANOUT, k, replica)


def _block_z(model, scales: ScaleSet, kind: ChainKind, start, seed: int) -> float:
    """One fresh block variable Z_1 from ``start``: the rescaled clock
    increment over a single window of length theta_n."""
    tcfg = TrajectoryConfig(seed, kind, start=start, horizon=scales.theta_n)
    if kind is ChainKind.DISCRETE_J:
        _, jumps = run_discrete(model, tcfg, want_ledger=False)
    else:
        _, jumps = run_vsrw(model, tcfg, want_ledger=False)
    path = build_clock(model, jumps)
    return (path.value_at(scales.theta_n) - path.value_at(0.0)) / scales.c_n


def _mark_steps(scales: ScaleSet, K: int) -> np.ndarray:
    """Step indices floor(k * theta_n) for k = 1..K-1."""
    return np.floor(scales.theta_n * np.arange(1, K)).astype(np.int64)


def _mark_rows(model, scales: ScaleSet, kind: ChainKind, start, seed: int,
               K: int) -> np.ndarray:
    """Sites (as array rows) occupied at the K-1 interior block marks."""
    if kind is ChainKind.DISCRETE_J:
        steps = _mark_steps(scales, K)
        tcfg = TrajectoryConfig(seed, kind, start=start, horizon=float(steps[-1]))
        _, jumps = run_discrete(model, tcfg, want_ledger=False)
        return jumps.sites[steps]
    horizon = scales.theta_n * (K - 1)
    tcfg = TrajectoryConfig(seed, kind, start=start, horizon=horizon)
    _, jumps = run_vsrw(model, tcfg, want_ledger=False)
    marks = scales.theta_n * np.arange(1, K, dtype=np.float64)
    return jumps.sites[jumps.site_indices_at(marks)]


def _row_key(model, row) -> object:
    if isinstance(model, TableModel):
        return int(row[0])
    return tuple(int(c) for c in row)


def _start_site(model, x):
    return model.start_default if x is None else model.as_site(x)


def _binomial_estimate(name, hits, n, params) -> ConditionEstimate:
    p = hits / n
    se = math.sqrt(p * (1.0 - p) / n)
    return ConditionEstimate(name, p, se, n, params)


def _moment_estimate(name, count, total, total_sq, params,
                     series=None) -> ConditionEstimate:
    mean = total / count
    var = max((total_sq - count * mean * mean) / (count - 1), 0.0) \
        if count > 1 else 0.0
    return ConditionEstimate(name, mean, math.sqrt(var / count), count, params,
                             series=series)


def _params(scales: Optional[ScaleSet], kind, mode, **extra) -> dict:
    out = {"n": scales.n if scales else None,
           "kind": getattr(kind, "value", kind), "mode": mode}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# Q_u


def _qu_chunk(args):
    (env_or_model, scales, x, u, kind, mode, base, lo, hi) = args
    sampler = _Sampler(env_or_model, mode, base)
    hits = 0
    for i in range(lo, hi):
        model, tseed = sampler.at(i)
        z = _block_z(model, scales, kind, _start_site(model, x), tseed)
        if z > u:
            hits += 1
    return hits


def estimate_Q_u(env_or_model, scales: ScaleSet, x, u: float, n_traj: int,
                 kind: ChainKind = ChainKind.DISCRETE_J, mode: str = "quenched",
                 seed: Optional[int] = None, workers: int = 1) -> ConditionEstimate:
    """P_x(Z_1 > u): the tail of one block variable started at x."""
    if u < 0:
        raise ContractViolationError(f"threshold u must be >= 0, got {u}")
    if n_traj < 1:
        raise ContractViolationError(f"need n_traj >= 1, got {n_traj}")
    base = _base_seed(env_or_model, seed)
    _check_mode(env_or_model, mode)
    kind = ChainKind(kind)
    tasks = [(env_or_model, scales, x, u, kind, mode, base, lo, hi)
             for lo, hi in index_chunks(n_traj)]
    hits = sum(run_tasks(_qu_chunk, tasks, workers))
    return _binomial_estimate(
        ConditionName.Q_U, hits, n_traj,
        _params(scales, kind, mode, u=u, x=x, theta_n=scales.theta_n))


# ---------------------------------------------------------------------------
# pi_t


def _pi_chunk(args):
    (env_or_model, scales, t, K, box, kind, mode, base, start, lo, hi) = args
    sampler = _Sampler(env_or_model, mode, base)
    per_site: Dict[object, List[float]] = {}
    rem_sum = rem_sq = 0.0
    for i in range(lo, hi):
        model, tseed = sampler.at(i)
        x0 = _start_site(model, start)
        rows = _mark_rows(model, scales, kind, x0, tseed, K)
        counts: Dict[object, int] = {}
        origin = np.asarray(x0 if not isinstance(model, TableModel) else [x0])
        inside = np.abs(rows - origin).max(axis=1) <= box
        rem = 0
        for row, ok in zip(rows, inside):
            if ok:
                key = _row_key(model, row)
                counts[key] = counts.get(key, 0) + 1
            else:
                rem += 1
        for key, c in counts.items():
            v = c / K
            cell = per_site.get(key)
            if cell is None:
                per_site[key] = [v, v * v]
            else:
                cell[0] += v
                cell[1] += v * v
        rv = rem / K
        rem_sum += rv
        rem_sq += rv * rv
    return per_site, rem_sum, rem_sq


def estimate_pi_t(env_or_model, scales: ScaleSet, t: float, n_traj: int,
                  box: Optional[float] = None,
                  kind: ChainKind = ChainKind.DISCRETE_J,
                  mode: str = "quenched", seed: Optional[int] = None,
                  start=None, workers: int = 1) -> PiEstimate:
    """Block-mark occupation: mean over trajectories of
    k_n(t)^(-1) sum_{k=1}^{k_n(t)-1} 1{chain at mark k == x}, per site.

    Sites beyond L-inf distance ``box`` from the start are pooled into the
    remainder (default box: the displacement radius at t); total in-box plus
    remainder mass is (k_n(t)-1)/k_n(t) exactly per trajectory.
    """
    if t <= 0:
        raise ContractViolationError(f"need t > 0, got {t}")
    if n_traj < 1:
        raise ContractViolationError(f"need n_traj >= 1, got {n_traj}")
    K = scales.k_of(t)
    if K < 2:
        raise DegenerateScaleError(
            f"k_n(t) = {K} < 2: no interior block marks at t = {t}")
    if box is None:
        box = scales.displacement_radius(t)
    base = _base_seed(env_or_model, seed)
    _check_mode(env_or_model, mode)
    kind = ChainKind(kind)
    tasks = [(env_or_model, scales, t, K, box, kind, mode, base, start, lo, hi)
             for lo, hi in index_chunks(n_traj)]
    per_site: Dict[object, List[float]] = {}
    rem_sum = rem_sq = 0.0
    for chunk_sites, rs, rq in run_tasks(_pi_chunk, tasks, workers):
        for key, (s1, s2) in chunk_sites.items():
            cell = per_site.get(key)
            if cell is None:
                per_site[key] = [s1, s2]
            else:
                cell[0] += s1
                cell[1] += s2
        rem_sum += rs
        rem_sq += rq

    def _cell(s1, s2):
        mean = s1 / n_traj
        var = max((s2 - n_traj * mean * mean) / (n_traj - 1), 0.0) \
            if n_traj > 1 else 0.0
        return mean, math.sqrt(var / n_traj)

    in_box = {key: _cell(s1, s2) for key, (s1, s2) in sorted(per_site.items())}
    return PiEstimate(in_box=in_box, remainder=_cell(rem_sum, rem_sq),
                      k_count=K, n_samples=n_traj, box_radius=float(box),
                      params=_params(scales, kind, mode, t=t))


# ---------------------------------------------------------------------------
# nu_t / sigma_t / m_eps (paired block runs at the marks)


def _paired_chunk(args):
    (env_or_model, scales, t, K, us, eps, want_sigma, kind, mode, base,
     start, lo, hi) = args
    sampler = _Sampler(env_or_model, mode, base)
    n_u = len(us)
    nu_s = np.zeros(n_u)
    nu_sq = np.zeros(n_u)
    sig_s = np.zeros(n_u)
    sig_sq = np.zeros(n_u)
    m_s = m_sq = 0.0
    for i in range(lo, hi):
        model, tseed = sampler.at(i)
        x0 = _start_site(model, start)
        rows = _mark_rows(model, scales, kind, x0, tseed, K)
        nu_i = np.zeros(n_u)
        sig_i = np.zeros(n_u)
        m_i = 0.0
        for k in range(1, K):
            site = _row_key(model, rows[k - 1])
            z = _block_z(model, scales, kind, site, _sub_seed(tseed, k, 0))
            for j, u in enumerate(us):
                if z > u:
                    nu_i[j] += 1.0
            if eps is not None and z <= eps:
                m_i += z
            if want_sigma:
                z2 = _block_z(model, scales, kind, site, _sub_seed(tseed, k, 1))
                for j, u in enumerate(us):
                    if z > u and z2 > u:
                        sig_i[j] += 1.0
        nu_s += nu_i
        nu_sq += nu_i * nu_i
        sig_s += sig_i
        sig_sq += sig_i * sig_i
        m_s += m_i
        m_sq += m_i * m_i
    return nu_s, nu_sq, sig_s, sig_sq, m_s, m_sq


def _run_paired(env_or_model, scales, t, us, eps, want_sigma, kind, mode,
                seed, start, n_traj, workers):
    if t <= 0:
        raise ContractViolationError(f"need t > 0, got {t}")
    if n_traj < 1:
        raise ContractViolationError(f"need n_traj >= 1, got {n_traj}")
    K = scales.k_of(t)
    if K < 2:
        raise DegenerateScaleError(
            f"k_n(t) = {K} < 2: no interior block marks at t = {t}")
    base = _base_seed(env_or_model, seed)
    _check_mode(env_or_model, mode)
    kind = ChainKind(kind)
    tasks = [(env_or_model, scales, t, K, tuple(us), eps, want_sigma, kind,
              mode, base, start, lo, hi) for lo, hi in index_chunks(n_traj)]
    parts = run_tasks(_paired_chunk, tasks, workers)
    totals = [sum(p[j] for p in parts) for j in range(6)]
    return K, kind, totals


def estimate_nu_t(env_or_model, scales: ScaleSet, t: float, u, n_traj: int,
                  kind: ChainKind = ChainKind.DISCRETE_J, mode: str = "quenched",
                  seed: Optional[int] = None, start=None, workers: int = 1
                  ) -> Union[ConditionEstimate, List[ConditionEstimate]]:
    """nu_t(u, inf) = k_n(t) sum_x pi(x) Q_u(x), estimated unbiasedly as the
    per-trajectory count of marks whose fresh block run exceeds u.

    A sequence of thresholds shares the same trajectories and block runs and
    returns one estimate per threshold.
    """
    us = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if np.any(us < 0):
        raise ContractViolationError("thresholds must be >= 0")
    _, kind, (nu_s, nu_sq, _, _, _, _) = _run_paired(
        env_or_model, scales, t, us, None, False, kind, mode, seed, start,
        n_traj, workers)
    out = [_moment_estimate(ConditionName.NU_T, n_traj, nu_s[j], nu_sq[j],
                            _params(scales, kind, mode, t=t, u=float(us[j])))
           for j in range(len(us))]
    return out[0] if np.isscalar(u) or np.ndim(u) == 0 else out


def estimate_sigma_t(env_or_model, scales: ScaleSet, t: float, u, n_traj: int,
                     kind: ChainKind = ChainKind.DISCRETE_J,
                     mode: str = "quenched", seed: Optional[int] = None,
                     start=None, workers: int = 1
                     ) -> Union[ConditionEstimate, List[ConditionEstimate]]:
    """sigma_t(u, inf) = k_n(t) sum_x pi(x) Q_u(x)^2: per mark, both of two
    independent block runs must exceed u (an unbiased product estimator —
    squaring a single run's indicator would bias upward)."""
    us = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if np.any(us < 0):
        raise ContractViolationError("thresholds must be >= 0")
    _, kind, (_, _, sig_s, sig_sq, _, _) = _run_paired(
        env_or_model, scales, t, us, None, True, kind, mode, seed, start,
        n_traj, workers)
    out = [_moment_estimate(ConditionName.SIGMA_T, n_traj, sig_s[j], sig_sq[j],
                            _params(scales, kind, mode, t=t, u=float(us[j])))
           for j in range(len(us))]
    return out[0] if np.isscalar(u) or np.ndim(u) == 0 else out


def estimate_m_eps(env_or_model, scales: ScaleSet, t: float, eps: float,
                   n_traj: int, kind: ChainKind = ChainKind.DISCRETE_J,
                   mode: str = "quenched", seed: Optional[int] = None,
                   start=None, workers: int = 1) -> ConditionEstimate:
    """m_t(eps) = k_n(t) sum_x pi(x) E_x[Z_1; Z_1 <= eps]: per-trajectory sum
    of the truncated fresh block values at the marks.  eps = inf is the
    no-truncation sentinel."""
    if eps < 0:
        raise ContractViolationError(f"need eps >= 0, got {eps}")
    _, kind, (_, _, _, _, m_s, m_sq) = _run_paired(
        env_or_model, scales, t, (), float(eps), False, kind, mode, seed,
        start, n_traj, workers)
    return _moment_estimate(ConditionName.M_EPS, n_traj, m_s, m_sq,
                            _params(scales, kind, mode, t=t, eps=float(eps)))


# ---------------------------------------------------------------------------
# return sums


def _return_chunk(args):
    (env_or_model, scales, x, t, K, kind, mode, base, lo, hi) = args
    sampler = _Sampler(env_or_model, mode, base)
    per_k = np.zeros(K - 1)
    tot_s = tot_sq = 0.0
    for i in range(lo, hi):
        model, tseed = sampler.at(i)
        x0 = _start_site(model, x)
        rows = _mark_rows(model, scales, kind, x0, tseed, K)
        ref = np.asarray(x0 if not isinstance(model, TableModel) else [x0])
        hits = np.all(rows == ref, axis=1).astype(np.float64)
        per_k += hits
        tot = float(hits.sum())
        tot_s += tot
        tot_sq += tot * tot
    return per_k, tot_s, tot_sq


def return_sum(env_or_model, scales: ScaleSet, x, t: float, n_traj: int,
               kind: ChainKind = ChainKind.DISCRETE_J, mode: str = "quenched",
               seed: Optional[int] = None, workers: int = 1) -> ConditionEstimate:
    """Partial sums sum_{k=1}^{K-1} P_x(chain at mark k == x).

    ``series`` carries the per-k partial sums so growth (bounded vs linear)
    can be inspected; ``value`` is the final sum with its SE taken across
    per-trajectory totals.
    """
    if t <= 0:
        raise ContractViolationError(f"need t > 0, got {t}")
    if n_traj < 1:
        raise ContractViolationError(f"need n_traj >= 1, got {n_traj}")
    K = scales.k_of(t)
    if K < 2:
        raise DegenerateScaleError(
            f"k_n(t) = {K} < 2: no interior block marks at t = {t}")
    base = _base_seed(env_or_model, seed)
    _check_mode(env_or_model, mode)
    kind = ChainKind(kind)
    tasks = [(env_or_model, scales, x, t, K, kind, mode, base, lo, hi)
             for lo, hi in index_chunks(n_traj)]
    per_k = np.zeros(K - 1)
    tot_s = tot_sq = 0.0
    for pk, ts_, tq in run_tasks(_return_chunk, tasks, workers):
        per_k += pk
        tot_s += ts_
        tot_sq += tq
    series = np.cumsum(per_k / n_traj)
    return _moment_estimate(ConditionName.A1_RETURN_SUM, n_traj, tot_s, tot_sq,
                            _params(scales, kind, mode, t=t, x=x,
                                    theta_n=scales.theta_n),
                            series=series)


# ---------------------------------------------------------------------------
# trap set


_MAX_BOX_SITES = 4_000_000


def trap_set(env: EnvConfig, scales: ScaleSet, box_radius: float) -> TrapSetSample:
    """Exhaustive scan of the centered L-inf box for deep-trap sites:
    tau(x) > eps_n * c_n with every neighbor tau at most eps_n^(-2/alpha)."""
    if not isinstance(env, EnvConfig):
        raise ContractViolationError("trap scans need a lattice environment")
    r = int(box_radius)
    if r < 1:
        raise ContractViolationError(f"box radius must be >= 1, got {box_radius}")
    if (2 * r + 1) ** env.d > _MAX_BOX_SITES:
        raise ContractViolationError(
            f"box with radius {r} in d = {env.d} exceeds the scan limit")
    axes = [np.arange(-r, r + 1, dtype=np.int64)] * env.d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, env.d)
    taus = tau_array(env, grid)
    max_nbr = np.zeros(len(grid))
    for a in range(env.d):
        for s in (1, -1):
            shifted = grid.copy()
            shifted[:, a] += s
            np.maximum(max_nbr, tau_array(env, shifted), out=max_nbr)
    mask = (taus > scales.trap_tau_floor) & (max_nbr <= scales.trap_neighbor_cap)
    sites = [tuple(int(c) for c in row) for row in grid[mask]]
    return TrapSetSample(sites=sites, eps_n=scales.eps_n,
                         box_radius=float(box_radius))


# ---------------------------------------------------------------------------
# lattice diagnostics


def _heat_chunk(args):
    (env_or_model, x, y, t, mode, base, lo, hi) = args
    sampler = _Sampler(env_or_model, mode, base)
    hits = 0
    for i in range(lo, hi):
        model, tseed = sampler.at(i)
        x0 = _start_site(model, x)
        target = model.as_site(y)
        tcfg = TrajectoryConfig(tseed, ChainKind.CONTINUOUS_J_VSRW, start=x0,
                                horizon=t)
        _, jumps = run_vsrw(model, tcfg, want_ledger=False)
        if _row_key(model, jumps.sites[-1]) == target:
            hits += 1
    return hits


def heat_kernel_mc(env_or_model, x, y, t: float, n_traj: int,
                   mode: str = "quenched", seed: Optional[int] = None,
                   workers: int = 1) -> ConditionEstimate:
    """P_x(walk at internal time t == y) for the variable-speed walk, whose
    reversing measure is uniform, so this is its heat kernel."""
    if t < 0:
        raise ContractViolationError(f"need t >= 0, got {t}")
    if n_traj < 1:
        raise ContractViolationError(f"need n_traj >= 1, got {n_traj}")
    base = _base_seed(env_or_model, seed)
    _check_mode(env_or_model, mode)
    tasks = [(env_or_model, x, y, t, mode, base, lo, hi)
             for lo, hi in index_chunks(n_traj)]
    hits = sum(run_tasks(_heat_chunk, tasks, workers))
    return _binomial_estimate(ConditionName.HEAT_KERNEL, hits, n_traj,
                              _params(None, ChainKind.CONTINUOUS_J_VSRW, mode,
                                      t=t, x=x, y=y))


def _range_chunk(args):
    (env_or_model, m, mode, base, lo, hi) = args
    sampler = _Sampler(env_or_model, mode, base)
    s = sq = 0.0
    for i in range(lo, hi):
        model, tseed = sampler.at(i)
        tcfg = TrajectoryConfig(tseed, ChainKind.DISCRETE_J,
                                start=model.start_default, horizon=float(m))
        _, jumps = run_discrete(model, tcfg, want_ledger=False)
        r = len(np.unique(jumps.sites, axis=0))
        s += r
        sq += r * r
    return s, sq


def range_stat(env_or_model, m: int, n_traj: int, mode: str = "quenched",
               seed: Optional[int] = None, workers: int = 1) -> ConditionEstimate:
    """Mean number of distinct sites the chain visits in m steps (range);
    the second moment rides along in params["second_moment"]."""
    if m < 0:
        raise ContractViolationError(f"need m >= 0, got {m}")
    if n_traj < 1:
        raise ContractViolationError(f"need n_traj >= 1, got {n_traj}")
    base = _base_seed(env_or_model, seed)
    _check_mode(env_or_model, mode)
    tasks = [(env_or_model, m, mode, base, lo, hi)
             for lo, hi in index_chunks(n_traj)]
    s = sq = 0.0
    for cs, csq in run_tasks(_range_chunk, tasks, workers):
        s += cs
        sq += csq
    est = _moment_estimate(ConditionName.RANGE, n_traj, s, sq,
                           _params(None, ChainKind.DISCRETE_J, mode, m=m))
    est.params["second_moment"] = sq / n_traj
    return est


def _exit_chunk(args):
    (env_or_model, r, m, mode, base, lo, hi) = args
    sampler = _Sampler(env_or_model, mode, base)
    r2 = float(r) * float(r)
    hits = 0
    for i in range(lo, hi):
        model, tseed = sampler.at(i)
        tcfg = TrajectoryConfig(tseed, ChainKind.DISCRETE_J,
                                start=model.start_default, horizon=float(m))
        _, jumps = run_discrete(model, tcfg, want_ledger=False)
        disp = jumps.sites[1:] - jumps.sites[0]
        if disp.size and np.any((disp.astype(np.float64) ** 2).sum(axis=1) > r2):
            hits += 1
    return hits


def exit_time_cdf(env_or_model, r: float, m: int, n_traj: int,
                  mode: str = "quenched", seed: Optional[int] = None,
                  workers: int = 1) -> ConditionEstimate:
    """P(the chain leaves the Euclidean ball of radius r around its start
    within m steps)."""
    if r < 0:
        raise ContractViolationError(f"need r >= 0, got {r}")
    if m < 0:
        raise ContractViolationError(f"need m >= 0, got {m}")
    if n_traj < 1:
        raise ContractViolationError(f"need n_traj >= 1, got {n_traj}")
    base = _base_seed(env_or_model, seed)
    _check_mode(env_or_model, mode)
    tasks = [(env_or_model, r, m, mode, base, lo, hi)
             for lo, hi in index_chunks(n_traj)]
    hits = sum(run_tasks(_exit_chunk, tasks, workers))
    return _binomial_estimate(ConditionName.EXIT_TIME, hits, n_traj,
                              _params(None, ChainKind.DISCRETE_J, mode,
                                      r=r, m=m))
