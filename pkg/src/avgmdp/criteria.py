"""Evaluation of the eight long-run average cost criteria.

Four expected criteria (limsup/liminf of n-stage averages, with and
without extrema over window offsets) and four pathwise criteria (the
same limits taken along sample paths before the expectation).  On a
finite MDP under a stationary policy all eight coincide and are
computed exactly from the limit matrix P*; non-stationary Markov
policies are handled exactly when they are eventually stationary and by
controlled estimation otherwise.
"""

import csv
import io
import os

import numpy as np

from ._rng import trajectory_rng
from .chains import cesaro_matrix, decompose, gth_stationary, induced_chain, solve_checked
from .errors import HorizonOverflow, PolicySupportError
from .model import CountableMdp, FiniteMdp, Policy

#: hard cap on n + j in n-stage cost evaluation
HORIZON_CAP = 10**7

EXPECTED_KEYS = ("J1", "J2", "J3", "J4")
PATHWISE_KEYS = ("Jt1", "Jt2", "Jt3", "Jt4")
ALL_KEYS = EXPECTED_KEYS + PATHWISE_KEYS

EXACT = "Exact"
ESTIMATED = "Estimated"


class CriteriaReport:
    """Per-state values of the eight criteria with error provenance.

    ``values[key]`` and ``est_error[key]`` are per-state arrays for the
    keys J1..J4 (expected criteria) and Jt1..Jt4 (pathwise criteria);
    entries are NaN when a value is not computed by the producing
    operation.  ``method`` is ``"Exact"`` or ``"Estimated"``.
    """

    def __init__(self, values, method, est_error=None, notes=None):
        self.n_states = len(next(iter(values.values())))
        self.values = {}
        self.est_error = {}
        for key in ALL_KEYS:
            v = values.get(key)
            self.values[key] = (np.full(self.n_states, np.nan) if v is None
                                else np.asarray(v, dtype=float))
            e = None if est_error is None else est_error.get(key)
            self.est_error[key] = (np.zeros(self.n_states) if e is None
                                   else np.asarray(e, dtype=float))
        self.method = method
        self.notes = notes or {}

    def check_chain(self) -> bool:
        """Verify J4 <= J2 <= J1 <= J3 (and the pathwise analogue)
        within summed est_error, ignoring NaN entries."""
        ok = True
        for keys in (EXPECTED_KEYS, PATHWISE_KEYS):
            k1, k2, k3, k4 = keys
            for lo, hi in ((k4, k2), (k2, k1), (k1, k3)):
                a, b = self.values[lo], self.values[hi]
                mask = ~(np.isnan(a) | np.isnan(b))
                slack = self.est_error[lo] + self.est_error[hi] + 1e-12
                ok &= bool(np.all(a[mask] <= b[mask] + slack[mask]))
        return ok

    def to_csv(self, path_or_file) -> None:
        """One row per state: J1..J4, Jt1..Jt4, method, est_error."""
        own = isinstance(path_or_file, (str, bytes, os.PathLike))
        f = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["state", *ALL_KEYS, "method", "est_error"])
            for x in range(self.n_states):
                err = max(float(self.est_error[k][x]) for k in ALL_KEYS)
                w.writerow([x] + [repr(float(self.values[k][x])) for k in ALL_KEYS]
                           + [self.method, repr(err)])
        finally:
            if own:
                f.close()

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


# -- stage-cost propagation ---------------------------------------------------


def _policy_stage_matrices(mdp: FiniteMdp, kernel):
    """Induced transition matrix and state cost vector of one stage kernel."""
    n = mdp.n_states
    p = np.empty((n, n))
    c = np.empty(n)
    for x in range(n):
        row = np.asarray(kernel[x], dtype=float)
        p[x] = row @ mdp.q_block(x)
        c[x] = float(row @ mdp.cost_block(x))
    return p, c


def _markov_view(mdp: FiniteMdp, policy: Policy, x: int) -> Policy:
    """Re-express a semi-Markov/semi-stationary policy started at x as Markov."""
    if policy.kind == Policy.SEMI_STATIONARY:
        first = [policy.table[y][y] for y in range(mdp.n_states)]
        rest = [policy.table[x][y] for y in range(mdp.n_states)]
        return Policy.markov([first], tail=rest)
    if policy.kind == Policy.SEMI_MARKOV:
        stages = [[table[x][y] for y in range(mdp.n_states)]
                  for table in policy.stages]
        tail = [policy.tail[x][y] for y in range(mdp.n_states)]
        return Policy.markov(stages, tail=tail)
    return policy


def stage_expected_costs(mdp: FiniteMdp, policy: Policy, x: int, n_stages: int) -> np.ndarray:
    """Exact E[c(x_m, a_m)] for m < n_stages, starting from state x."""
    if policy.kind == Policy.HISTORY:
        from .strategic import strategic_measure
        p0 = np.zeros(mdp.n_states)
        p0[x] = 1.0
        table = strategic_measure(mdp, policy, p0, n_stages - 1)
        return np.asarray(table.stage_costs(mdp))
    policy = _markov_view(mdp, policy, x)

    d = np.zeros(mdp.n_states)
    d[x] = 1.0
    out = np.empty(n_stages)
    cache: dict[int, tuple] = {}
    for m in range(n_stages):
        kernel = policy.markov_kernel(m)
        key = id(kernel)
        if key not in cache:
            cache[key] = _policy_stage_matrices(mdp, kernel)
        p, c = cache[key]
        out[m] = float(d @ c)
        d = d @ p
    return out


def n_stage_cost(mdp: FiniteMdp, policy: Policy, x: int, n: int, j: int = 0) -> float:
    """Expected cost accumulated over stages j .. j+n-1 from state x.

    With j = 0 this is the standard n-stage cost; a positive offset j
    measures the same window started after j warm-up stages.
    """
    if n < 1 or j < 0:
        raise ValueError("need n >= 1 and j >= 0")
    if n + j > HORIZON_CAP:
        raise HorizonOverflow(f"n + j = {n + j} exceeds cap {HORIZON_CAP}")
    e = stage_expected_costs(mdp, policy, x, n + j)
    return float(np.sum(e[j:j + n]))


# -- exact evaluation ---------------------------------------------------------


def _policy_cost_vector(mdp: FiniteMdp, mu: Policy) -> np.ndarray:
    return np.array([float(np.asarray(mu.table[x], dtype=float) @ mdp.cost_block(x))
                     for x in range(mdp.n_states)])


def avg_cost_stationary(mdp: FiniteMdp, mu: Policy) -> CriteriaReport:
    """All eight criteria of a stationary policy, exactly.

    Under a stationary policy on a finite MDP the eight values coincide
    per state and equal (P* c_mu)(x).
    """
    if not mu.is_stationary:
        raise PolicySupportError("avg_cost_stationary needs a stationary policy")
    chain = induced_chain(mdp, mu)
    limit = cesaro_matrix(chain, decompose(chain))
    g = limit.p_star @ _policy_cost_vector(mdp, mu)
    return CriteriaReport({k: g.copy() for k in ALL_KEYS}, EXACT)


def pathwise_exact(mdp: FiniteMdp, mu: Policy) -> CriteriaReport:
    """Pathwise criteria of a stationary policy on a finite MDP.

    Along almost every path the average settles on the gain of the
    recurrent class the path is absorbed in, so
    Jt(x) = sum_R Pr_x(absorb in R) g_R with g_R = pi_R . c_mu|_R.
    """
    if not mu.is_stationary:
        raise PolicySupportError("pathwise_exact needs a stationary policy")
    chain = induced_chain(mdp, mu)
    decomp = decompose(chain)
    c_mu = _policy_cost_vector(mdp, mu)

    n = mdp.n_states
    values = np.zeros(n)
    class_gain = []
    for members in decomp.recurrent_classes:
        idx = np.asarray(members)
        pi = gth_stationary(chain.p[np.ix_(idx, idx)])
        gain = float(pi @ c_mu[idx])
        class_gain.append(gain)
        values[idx] = gain

    t_idx = np.asarray(decomp.transient, dtype=int)
    if t_idx.size:
        a = np.eye(t_idx.size) - chain.p[np.ix_(t_idx, t_idx)]
        acc = np.zeros(t_idx.size)
        for k, members in enumerate(decomp.recurrent_classes):
            b = chain.p[np.ix_(t_idx, np.asarray(members))].sum(axis=1)
            acc += solve_checked(a, b) * class_gain[k]
        values[t_idx] = acc
    return CriteriaReport({k: values.copy() for k in PATHWISE_KEYS}, EXACT)


# -- Markov policies ----------------------------------------------------------


def _window_schedule(horizon: int) -> list:
    """Doubling window lengths 2^10, 2^11, ... capped by the horizon."""
    ns = [w for w in (1 << k for k in range(10, horizon.bit_length() + 1))
          if w < horizon]
    ns.append(horizon)
    return ns


def avg_cost_markov(mdp: FiniteMdp, pi: Policy, horizon: int = 10**4,
                    tol: float = 1e-9) -> CriteriaReport:
    """Evaluate the expected criteria of a Markov policy.

    Eventually-stationary policies (the stage kernels settle on a tail
    kernel) are evaluated exactly: the limit values equal the tail
    policy's exact gain propagated through the initial stages.  For a
    genuinely non-stationary policy (cycling kernels) the report is
    estimated from horizon-long exact marginals: J1/J2 from running
    extrema of J_n/n over n in [horizon/2, horizon], J3/J4 from window
    extrema over offsets j <= horizon on a doubling window schedule,
    with est_error taken from the last two windows (the pathwise
    entries are not estimated and stay NaN).  States whose oscillation
    exceeds ``tol`` are listed in ``notes["nonconvergence"]``.
    """
    if pi.kind not in (Policy.STATIONARY, Policy.MARKOV):
        raise PolicySupportError("avg_cost_markov needs a (stationary or) Markov policy")
    if horizon < 10**3:
        raise ValueError("horizon must be at least 10^3")
    n = mdp.n_states

    if pi.eventually_stationary:
        tail = Policy.stationary(pi.markov_kernel(10**9))
        tail_values = avg_cost_stationary(mdp, tail).values["J1"]
        tail_path = pathwise_exact(mdp, tail).values["Jt1"]
        d = np.eye(n)
        n_prefix = len(pi.stages) if pi.kind == Policy.MARKOV else 0
        for m in range(n_prefix):
            p, _ = _policy_stage_matrices(mdp, pi.markov_kernel(m))
            d = d @ p
        values = {}
        for k in EXPECTED_KEYS:
            values[k] = d @ tail_values
        for k in PATHWISE_KEYS:
            values[k] = d @ tail_path
        return CriteriaReport(values, EXACT)

    # exact stage costs from every start state at once
    n_stages = 2 * horizon
    d = np.eye(n)
    e = np.empty((n_stages, n))
    cache: dict[int, tuple] = {}
    for m in range(n_stages):
        kernel = pi.markov_kernel(m)
        key = id(kernel)
        if key not in cache:
            cache[key] = _policy_stage_matrices(mdp, kernel)
        p, c = cache[key]
        e[m] = d @ c
        d = d @ p
    s = np.vstack([np.zeros(n), np.cumsum(e, axis=0)])  # s[m] = sum_{k<m} e_k

    ns = np.arange(horizon // 2, horizon + 1)
    ratios = s[ns] / ns[:, None]
    j1 = ratios.max(axis=0)
    j2 = ratios.min(axis=0)
    # oscillation over the last factor-of-10 range of horizons
    decade = np.arange(max(1, horizon // 10), horizon + 1)
    osc = np.ptp(s[decade] / decade[:, None], axis=0)

    values = {"J1": j1, "J2": j2}
    est = {"J1": osc, "J2": osc}
    prev_sup = prev_inf = None
    for w in _window_schedule(horizon):
        offsets = np.arange(0, horizon + 1)
        win = (s[offsets + w] - s[offsets]) / w
        sup, inf = win.max(axis=0), win.min(axis=0)
        if prev_sup is not None:
            est["J3"] = np.abs(sup - prev_sup)
            est["J4"] = np.abs(inf - prev_inf)
        prev_sup, prev_inf = sup, inf
    values["J3"], values["J4"] = prev_sup, prev_inf
    est.setdefault("J3", np.zeros(n))
    est.setdefault("J4", np.zeros(n))

    notes = {}
    bad = np.flatnonzero(osc > tol)
    if bad.size:
        notes["nonconvergence"] = bad.tolist()
    return CriteriaReport(values, ESTIMATED, est, notes)


# -- simulation ---------------------------------------------------------------


class SimulationResult:
    """Monte Carlo estimates of the pathwise criteria.

    ``mean[key]`` / ``stderr[key]`` for keys Jt1, Jt2, Jt3, Jt4; Jt1 and
    Jt2 are both estimated by the full-horizon trajectory average, Jt3
    and Jt4 by the windowed supremum/infimum over offsets.  The window
    diagnostics record the doubling schedule and the gap between the
    last two windows, averaged over trajectories.
    """

    def __init__(self, per_traj, windows, window_gap):
        self.n_traj = len(next(iter(per_traj.values())))
        self.per_trajectory = per_traj
        self.mean = {}
        self.stderr = {}
        for key, vals in per_traj.items():
            vals = np.asarray(vals)
            self.mean[key] = float(vals.mean())
            if self.n_traj > 1:
                self.stderr[key] = float(vals.std(ddof=1) / np.sqrt(self.n_traj))
            else:
                self.stderr[key] = 0.0
        self.windows = windows
        self.window_gap = window_gap


def _traj_summaries(costs: np.ndarray):
    """Average plus window sup/inf of one trajectory's cost stream."""
    horizon = costs.shape[0]
    s = np.concatenate([[0.0], np.cumsum(costs)])
    avg = s[-1] / horizon
    windows = _window_schedule(horizon)
    prev = None
    gap = 0.0
    for w in windows:
        offsets = np.arange(0, horizon - w + 1)
        win = (s[offsets + w] - s[offsets]) / w
        cur = (float(win.max()), float(win.min()))
        if prev is not None:
            gap = max(abs(cur[0] - prev[0]), abs(cur[1] - prev[1]))
        prev = cur
    return avg, prev[0], prev[1], windows, gap


def _simulate_finite(mdp, policy, x, n_traj, horizon, seed):
    """Lockstep simulation of all trajectories on a finite MDP."""
    n = mdp.n_states
    kernel_cum_cache: dict[int, np.ndarray] = {}
    q_cum = [np.cumsum(mdp.q_block(xx), axis=1) for xx in range(n)]
    max_a = max(mdp.n_actions(xx) for xx in range(n))
    cost_pad = np.zeros((n, max_a))
    q_cum_pad = np.ones((n, max_a, n))
    for xx in range(n):
        cost_pad[xx, :mdp.n_actions(xx)] = mdp.cost_block(xx)
        q_cum_pad[xx, :mdp.n_actions(xx)] = q_cum[xx]

    def kernel_cum(stage):
        kernel = policy.markov_kernel(stage)
        key = id(kernel)
        if key not in kernel_cum_cache:
            pad = np.ones((n, max_a))
            for xx in range(n):
                pad[xx, :mdp.n_actions(xx)] = np.cumsum(
                    np.asarray(kernel[xx], dtype=float))
            kernel_cum_cache[key] = pad
        return kernel_cum_cache[key]

    rngs = [trajectory_rng(seed, i) for i in range(n_traj)]
    states = np.full(n_traj, x, dtype=int)
    costs = np.empty((n_traj, horizon))
    chunk = 4096
    t = 0
    while t < horizon:
        width = min(chunk, horizon - t)
        u_a = np.stack([r.random(width) for r in rngs])
        u_s = np.stack([r.random(width) for r in rngs])
        for dt in range(width):
            kc = kernel_cum(t + dt)
            acts = (kc[states] < u_a[:, dt, None]).sum(axis=1)
            costs[:, t + dt] = cost_pad[states, acts]
            rows = q_cum_pad[states, acts]
            states = (rows < u_s[:, dt, None]).sum(axis=1)
        t += width
    return costs


def _simulate_countable(cmdp, policy, x, n_traj, horizon, seed):
    """Per-trajectory simulation of a countable model, with an
    early-out once an absorbing state is reached."""
    costs = np.empty((n_traj, horizon))
    for i in range(n_traj):
        rng = trajectory_rng(seed, i)
        k = x
        t = 0
        while t < horizon:
            acts = cmdp.action_set(k)
            if len(acts) == 1:
                a = acts[0]
            else:
                w = np.asarray(policy.action_dist((k,)), dtype=float)
                a = acts[int(np.searchsorted(np.cumsum(w), rng.random()))]
            row = cmdp.kernel(k, a)
            cost = float(cmdp.cost(k, a))
            if len(row) == 1 and row[0][0] == k:
                costs[i, t:] = cost
                break
            costs[i, t] = cost
            u = rng.random()
            acc = 0.0
            nxt = row[-1][0]
            for j, pr in row:
                acc += pr
                if u < acc:
                    nxt = j
                    break
            k = nxt
            t += 1
    return costs


def simulate_pathwise(model, policy: Policy, x: int, n_traj: int, horizon: int,
                      seed: int) -> SimulationResult:
    """Estimate the pathwise criteria by trajectory simulation.

    Reproducible: trajectory i draws from a Philox stream keyed
    ``seed XOR i``, so results are independent of evaluation order and
    identical across runs with the same (seed, n_traj, horizon).
    """
    if n_traj < 1 or horizon < 1:
        raise ValueError("need n_traj >= 1 and horizon >= 1")
    if isinstance(model, FiniteMdp):
        costs = _simulate_finite(model, policy, x, n_traj, horizon, seed)
    elif isinstance(model, CountableMdp):
        costs = _simulate_countable(model, policy, x, n_traj, horizon, seed)
    else:
        raise TypeError(f"cannot simulate {type(model).__name__}")

    per_traj = {k: [] for k in PATHWISE_KEYS}
    windows = None
    gaps = []
    for i in range(n_traj):
        avg, wsup, winf, windows, gap = _traj_summaries(costs[i])
        per_traj["Jt1"].append(avg)
        per_traj["Jt2"].append(avg)
        per_traj["Jt3"].append(wsup)
        per_traj["Jt4"].append(winf)
        gaps.append(gap)
    return SimulationResult(per_traj, windows, float(np.mean(gaps)))
