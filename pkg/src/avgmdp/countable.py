"""Executable countable-state example models with closed-form oracles.

Three families:

- an absorbing birth chain on {0, 1, 2, ...} (state 0 absorbing, state
  k jumps to 0 with probability beta_k and otherwise climbs to k+1),
  whose survival products, per-stage expected costs, and hitting-time
  partial sums all have closed forms;
- an inventory random walk on the real line driven by i.i.d. demands,
  probed for interval recurrence by simulation;
- geometrically discounted occupation measures of finite models.
"""

from fractions import Fraction

import numpy as np

from ._rng import trajectory_rng
from .chains import MarkovChain, expected_hitting_time, induced_chain
from .criteria import CriteriaReport, avg_cost_stationary
from .errors import DimensionMismatch
from .model import CountableMdp, FiniteMdp, Policy, truncate, uniform_stationary


class AbsorbingChain:
    """Uncontrolled absorbing birth chain.

    ``beta(k)`` is the absorption probability from state k >= 1 (may
    return Fractions for exact truncations) and ``cost(k)`` the state
    cost.  State 0 is absorbing.
    """

    def __init__(self, beta, cost):
        self.beta = beta
        self.cost = cost

    def to_countable(self) -> CountableMdp:
        def kernel(k, a):
            if k == 0:
                return [(0, 1)]
            b = self.beta(k)
            return [(0, b), (k + 1, 1 - b)]

        return CountableMdp(kernel=kernel,
                            cost=lambda k, a: self.cost(k),
                            action_set=lambda k: [0])

    def truncated(self, K: int) -> FiniteMdp:
        return truncate(self.to_countable(), K)

    def survival(self, k: int, n: int):
        """P_k(tau_0 > n) = prod_{j=k}^{k+n-1} (1 - beta_j), by the loop."""
        s = 1
        for j in range(k, k + n):
            s = s * (1 - self.beta(j))
        return s


def paper_chain(cost=None) -> AbsorbingChain:
    """The beta_k = 1/(k+1) instance; default cost c(k) = k."""
    if cost is None:
        cost = lambda k: k
    return AbsorbingChain(beta=lambda k: Fraction(1, k + 1), cost=cost)


def survival_closed_form(k: int, n: int) -> Fraction:
    """Closed form of the survival product for beta_j = 1/(j+1).

    prod_{j=k}^{k+n-1} (1 - 1/(j+1)) telescopes to k/(k+n); exact
    rational arithmetic.
    """
    if k < 1 or n < 0:
        raise DimensionMismatch("need k >= 1 and n >= 0")
    return Fraction(k, k + n)


def hitting_partial_sum(k: int, N: int) -> float:
    """sum_{n<N} k/(k+n), the N-term partial sum of E_k[tau_0].

    The summands are the survival probabilities of the beta_j = 1/(j+1)
    chain; the partial sums grow like k log N, exhibiting the infinite
    expected hitting time that a single truncation cannot certify.
    """
    return float(k * np.sum(1.0 / (k + np.arange(N, dtype=float))))


class Example32Report:
    """Truncation analysis of an absorbing chain with exact cross-checks.

    Eagerly computes the per-state gain criteria on the level-K
    truncation and the expected hitting times of {0} on a ladder of
    truncation levels up to K (monotone growth across levels is the
    truncation-side signature of an infinite expectation).  Exact
    per-stage expected costs are exposed as methods: on this chain
    x_n is either absorbed at 0 or sits at k+n, so

        E_k[c(x_n)] = (1 - s) c(0) + s c(k+n),   s = survival(k, n),

    which is exact rational arithmetic whenever beta returns Fractions.
    """

    def __init__(self, chain: AbsorbingChain, K_trunc: int, horizon: int):
        if K_trunc < 2:
            raise DimensionMismatch("need K_trunc >= 2")
        self.chain = chain
        self.K_trunc = K_trunc
        self.horizon = horizon

        self.mdp = chain.truncated(K_trunc)
        self.criteria: CriteriaReport = avg_cost_stationary(
            self.mdp, uniform_stationary(self.mdp))
        self.gain = self.criteria.values["J1"]

        self.hitting_levels = []
        self.hitting_times = []
        level = K_trunc
        levels = []
        while level >= 2:
            levels.append(level)
            level //= 2
        for lv in sorted(levels):
            m = chain.truncated(lv)
            c = induced_chain(m, uniform_stationary(m))
            self.hitting_levels.append(lv)
            self.hitting_times.append(float(expected_hitting_time(c, [0])[min(5, lv)]))
        self.hitting_monotone = all(
            a < b for a, b in zip(self.hitting_times, self.hitting_times[1:]))

    def expected_state_cost(self, k: int, n: int):
        """Exact E_k[c(x_n)] on the infinite chain."""
        if k == 0:
            return self.chain.cost(0)
        s = self.chain.survival(k, n)
        return (1 - s) * self.chain.cost(0) + s * self.chain.cost(k + n)

    def expected_state_cost_row(self, k: int, n_max: int) -> list:
        """E_k[c(x_n)] for n = 0..n_max, with incremental survival products."""
        if k == 0:
            return [self.chain.cost(0)] * (n_max + 1)
        c0 = self.chain.cost(0)
        out = []
        s = 1
        for n in range(n_max + 1):
            out.append((1 - s) * c0 + s * self.chain.cost(k + n))
            s = s * (1 - self.chain.beta(k + n))
        return out

    def survival(self, k: int, n: int):
        return self.chain.survival(k, n)


def example32_report(chain: AbsorbingChain, K_trunc: int,
                     horizon: int = 100) -> Example32Report:
    """Assemble truncation gains, hitting-time growth, and exact
    per-stage cost oracles for an absorbing chain."""
    return Example32Report(chain, K_trunc, horizon)


# -- inventory random walk ----------------------------------------------------


class InventoryWalk:
    """Stock-level walk x_{n+1} = x_n + a_n - xi_n on the real line.

    ``demand(rng, size)`` draws i.i.d. nonnegative demands with mean
    ``mean_demand``; ``action(rng, size)`` draws order quantities from
    the stationary randomized rule.  Orders within mean_demand +/- eps
    keep the increment mean at ``action_mean - mean_demand``.
    """

    def __init__(self, demand, action, mean_demand: float, action_mean: float):
        self.demand = demand
        self.action = action
        self.mean_demand = float(mean_demand)
        self.action_mean = float(action_mean)

    @property
    def drift(self) -> float:
        return self.action_mean - self.mean_demand

    @classmethod
    def two_point(cls, eps: float = 1.0, action_drift: float = 0.0):
        """Two-point demand {0, 2} (not spread-out); orders drawn
        uniformly from (1 - eps, 1 + eps) shifted by the drift, so the
        increment law is nonsingular."""
        def demand(rng, size):
            return 2.0 * (rng.random(size) < 0.5)

        lo, hi = 1.0 - eps + action_drift, 1.0 + eps + action_drift
        def action(rng, size):
            return rng.uniform(lo, hi, size)

        return cls(demand, action, 1.0, 1.0 + action_drift)

    @classmethod
    def spread_out(cls, action_drift: float = 0.0):
        """Mixture demand (atom at 0 plus a uniform interval), which is
        spread-out; the order quantity is the constant mean demand."""
        def demand(rng, size):
            u = rng.random(size)
            return np.where(rng.random(size) < 0.5, 0.0, 4.0 * u)

        a = 1.0 + action_drift
        def action(rng, size):
            return np.full(size, a)

        return cls(demand, action, 1.0, a)


class ProbeResult:
    """Interval-hitting estimate from seeded trajectories.

    ``estimate`` is the fraction of trajectories entering the interval
    within the horizon, ``stderr`` its binomial standard error; per
    trajectory the first hitting time (or -1) is kept for diagnostics.
    This is an estimate only: simulation never certifies recurrence.
    """

    def __init__(self, hit_times, n_traj):
        self.hit_times = hit_times
        self.n_traj = n_traj
        hits = sum(1 for t in hit_times if t >= 0)
        self.hits = hits
        self.estimate = hits / n_traj
        p = self.estimate
        self.stderr = float(np.sqrt(p * (1.0 - p) / n_traj))


def walk_recurrence_probe(walk: InventoryWalk, interval, start: float,
                          n_traj: int, horizon: int, seed: int,
                          chunk: int = 1 << 15) -> ProbeResult:
    """Estimate P(tau_interval <= horizon) from the given start level.

    Each trajectory draws from its own Philox stream (actions then
    demands, in fixed chunks), so the probe is reproducible by seed.
    """
    lo, hi = interval
    if not lo < hi:
        raise DimensionMismatch("need lo < hi")
    hit_times = []
    for i in range(n_traj):
        rng = trajectory_rng(seed, i)
        hit = -1
        if lo <= start <= hi:
            hit_times.append(0)
            continue
        x = start
        done = 0
        while done < horizon:
            width = min(chunk, horizon - done)
            a = walk.action(rng, width)
            xi = walk.demand(rng, width)
            pos = x + np.cumsum(a - xi)
            inside = np.flatnonzero((pos >= lo) & (pos <= hi))
            if inside.size:
                hit = done + int(inside[0]) + 1
                break
            x = float(pos[-1])
            done += width
        hit_times.append(hit)
    return ProbeResult(hit_times, n_traj)


# -- discounted occupation measures -------------------------------------------


class OccupationMeasure:
    """Geometric mixture sum_{n<N} 2^-(n+1) P(x_n in .) with residual 2^-N.

    In exact (rational) mode total mass plus residual is exactly 1.
    """

    def __init__(self, weights, residual, exact=False):
        self.weights = weights
        self.residual = residual
        self.exact = exact

    def total_mass(self):
        return sum(self.weights)

    def as_floats(self) -> np.ndarray:
        return np.asarray([float(w) for w in self.weights])


def occupation_measure(model, policy, p0, horizon: int,
                       exact: bool = False) -> OccupationMeasure:
    """Truncated discounted occupation measure by marginal propagation.

    ``model`` is a FiniteMdp with a Markov-kind policy, or a
    MarkovChain with ``policy=None``.
    """
    if horizon < 1:
        raise DimensionMismatch("need horizon >= 1")

    if isinstance(model, MarkovChain):
        n = model.n_states
        def push(d, stage):
            return [sum(d[x] * model.p[x, y] for x in range(n)) for y in range(n)]
    elif isinstance(model, FiniteMdp):
        n = model.n_states
        def push(d, stage):
            kernel = policy.markov_kernel(stage)
            out = [Fraction(0) if exact else 0.0] * n
            for x in range(n):
                if d[x] == 0:
                    continue
                for i in range(model.n_actions(x)):
                    w = d[x] * kernel[x][i]
                    if w == 0:
                        continue
                    row = model.q_row_exact(x, i) if exact else model.q_row(x, i)
                    for y in range(n):
                        out[y] += w * row[y]
            return out
    else:
        raise TypeError(f"cannot propagate {type(model).__name__}")

    d = list(p0)
    weights = [Fraction(0) if exact else 0.0] * n
    half = Fraction(1, 2) if exact else 0.5
    w = half
    for stage in range(horizon):
        for y in range(n):
            weights[y] += w * d[y]
        if stage < horizon - 1:
            d = push(d, stage)
            w = w * half
    residual = Fraction(1, 2 ** horizon) if exact else 2.0 ** -horizon
    return OccupationMeasure(weights, residual, exact)
