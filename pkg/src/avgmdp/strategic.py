"""Finite-horizon strategic measures on finite spaces.

A strategic measure is the exact joint distribution of
(x0, a0, ..., xN, aN) induced by a policy and an initial distribution.
This module builds such tables, characterizes which tables arise from
policies (admissibility mass 1 at every stage plus one-step kernel
consistency), extracts the policy back out of a table (conditional
kernels, with a fixed default on uncharged states), and reconstructs a
stationary kernel from a geometric mixture of stage marginals.

All operations run in whatever arithmetic the inputs carry: floats, or
``fractions.Fraction`` end to end when the MDP and the kernels are
rational (``exact=True``), in which case every identity here is exact.
"""

from fractions import Fraction

import numpy as np

from .errors import InconsistentMarginals, PolicySupportError, TableTooLarge
from .model import FiniteMdp, Policy

#: default cap on the number of trajectory atoms in a table
TABLE_CAP = 2**26


def _q_row(mdp: FiniteMdp, x: int, i: int, exact: bool):
    return mdp.q_row_exact(x, i) if exact else mdp.q_row(x, i)


def _uniform_row(mdp: FiniteMdp, x: int, exact: bool):
    m = mdp.n_actions(x)
    return [Fraction(1, m)] * m if exact else [1.0 / m] * m


def _zero(exact: bool):
    return Fraction(0) if exact else 0.0


class StrategicMeasure:
    """Sparse exact table of trajectory probabilities.

    ``table`` maps flat trajectory tuples (x0, a0, ..., xN, aN) to
    probabilities; actions are stored by their index in A(x).
    """

    def __init__(self, horizon, table, p0, exact=False):
        self.horizon = horizon
        self.table = table
        self.p0 = p0
        self.exact = exact

    def total_mass(self):
        return sum(self.table.values())

    def stage_marginal(self, n: int) -> dict:
        """Joint distribution of (x_n, a_n) as a dict (x, i) -> mass."""
        out = {}
        for traj, mass in self.table.items():
            key = (traj[2 * n], traj[2 * n + 1])
            out[key] = out.get(key, _zero(self.exact)) + mass
        return out

    def stage_costs(self, mdp: FiniteMdp) -> list:
        """Expected one-stage cost at each stage (floats)."""
        out = []
        for n in range(self.horizon + 1):
            total = 0.0
            for (x, i), mass in self.stage_marginal(n).items():
                total += float(mass) * mdp.cost(x, i)
            out.append(total)
        return out

    def __len__(self):
        return len(self.table)


def strategic_measure(mdp: FiniteMdp, policy: Policy, p0, horizon: int,
                      exact: bool = False, max_entries: int = TABLE_CAP) -> StrategicMeasure:
    """Exact joint distribution of (x0, a0, ..., xN, aN) by forward recursion.

    Raises
    ------
    TableTooLarge
        when the table would exceed ``max_entries`` atoms.
    """
    zero = _zero(exact)
    table = {}
    for x in range(mdp.n_states):
        if p0[x] > zero:
            dist = policy.action_dist((x,))
            for i in range(mdp.n_actions(x)):
                if dist[i] > zero:
                    table[(x, i)] = p0[x] * dist[i]

    for n in range(horizon):
        nxt = {}
        for traj, mass in table.items():
            x, i = traj[-2], traj[-1]
            row = _q_row(mdp, x, i, exact)
            for y in range(mdp.n_states):
                if row[y] <= zero:
                    continue
                dist = policy.action_dist(traj + (y,))
                for j in range(mdp.n_actions(y)):
                    if dist[j] > zero:
                        nxt[traj + (y, j)] = mass * row[y] * dist[j]
            if len(nxt) > max_entries:
                raise TableTooLarge(f"table exceeds {max_entries} atoms at stage {n + 1}")
        table = nxt
    return StrategicMeasure(horizon, table, p0, exact)


def check_characterization(p: StrategicMeasure, mdp: FiniteMdp,
                           tol: float = 1e-12) -> bool:
    """Is the table the strategic measure of some policy?

    True iff (a) the total mass is 1 and every stage charges only
    admissible pairs, and (b) at every stage and every positive-mass
    history atom, the conditional distribution of the next state equals
    the transition kernel.  In exact mode the comparisons are exact.
    """
    zero = _zero(p.exact)
    mass = p.total_mass()
    if p.exact:
        if mass != 1:
            return False
    elif abs(float(mass) - 1.0) > tol:
        return False

    for traj in p.table:
        if len(traj) != 2 * (p.horizon + 1):
            return False
        for n in range(p.horizon + 1):
            x, i = traj[2 * n], traj[2 * n + 1]
            if not (0 <= x < mdp.n_states and 0 <= i < mdp.n_actions(x)):
                return False

    for n in range(p.horizon):
        groups = {}
        for traj, mass in p.table.items():
            if mass <= zero:
                continue
            prefix = traj[:2 * (n + 1)]
            y = traj[2 * (n + 1)]
            bucket = groups.setdefault(prefix, {})
            bucket[y] = bucket.get(y, _zero(p.exact)) + mass
        for prefix, bucket in groups.items():
            x, i = prefix[-2], prefix[-1]
            row = _q_row(mdp, x, i, p.exact)
            total = sum(bucket.values())
            for y in range(mdp.n_states):
                cond = bucket.get(y, _zero(p.exact)) / total
                if p.exact:
                    if cond != row[y]:
                        return False
                elif abs(float(cond) - float(row[y])) > tol:
                    return False
    return True


def extract_policy(p: StrategicMeasure, mdp: FiniteMdp) -> Policy:
    """History policy whose strategic measure reproduces an accepted table.

    The stage-n kernel is the conditional of a_n given the history,
    read off the table; histories the table never charges fall back to
    the uniform default kernel.
    """
    exact = p.exact
    zero = _zero(exact)
    cond: dict = {}
    for traj, mass in p.table.items():
        if mass <= zero:
            continue
        for n in range(p.horizon + 1):
            hist = traj[:2 * n + 1]
            row = cond.setdefault(hist, [_zero(exact)] * mdp.n_actions(traj[2 * n]))
            row[traj[2 * n + 1]] += mass

    tables = {}
    for hist, row in cond.items():
        total = sum(row)
        tables[hist] = [v / total for v in row]

    def fn(history):
        if history in tables:
            return tables[history]
        return _uniform_row(mdp, history[-1], exact)

    return Policy.history(fn, p.horizon)


# -- kernel decomposition -----------------------------------------------------


class KernelDecomposition:
    """State marginal rho1 and conditional action kernel rho2 of a joint.

    ``rho2(a|x) * rho1(x)`` reproduces the joint exactly on states with
    positive marginal; uncharged states carry the fixed default kernel
    (uniform over A(x)) so the kernel is total.
    """

    def __init__(self, rho1, rho2):
        self.rho1 = rho1
        self.rho2 = rho2

    def recompose(self):
        return [[self.rho2[x][i] * self.rho1[x] for i in range(len(self.rho2[x]))]
                for x in range(len(self.rho1))]


def decompose_joint(gamma, mdp: FiniteMdp, exact: bool = False) -> KernelDecomposition:
    """Split a joint over (state, action) into marginal and conditional.

    ``gamma`` is a per-state list of per-action masses.
    """
    rho1 = []
    rho2 = []
    for x in range(mdp.n_states):
        row = list(gamma[x])
        if len(row) != mdp.n_actions(x):
            raise PolicySupportError(f"state {x}: joint row does not match A(x)")
        s = sum(row)
        rho1.append(s)
        if s > _zero(exact):
            rho2.append([v / s for v in row])
        else:
            rho2.append(_uniform_row(mdp, x, exact))
    return KernelDecomposition(rho1, rho2)


# -- marginal sequences and markovization -------------------------------------


class MarginalSequence:
    """Stage-indexed joints over (state, action) with the initial law.

    ``stages[n][x][i]`` is the probability of being at x and taking the
    i-th admissible action at stage n.
    """

    def __init__(self, p0, stages, exact=False):
        self.p0 = p0
        self.stages = stages
        self.exact = exact

    def __len__(self):
        return len(self.stages)

    def state_marginal(self, n: int):
        return [sum(self.stages[n][x]) for x in range(len(self.stages[n]))]

    def check_consistency(self, mdp: FiniteMdp, tol: float = 1e-12) -> None:
        """Verify gamma_0 projects to p0 and each stage propagates the
        previous one through the transition kernel."""
        def close(u, v):
            if self.exact:
                return u == v
            return abs(float(u) - float(v)) <= tol

        for x in range(mdp.n_states):
            if not close(sum(self.stages[0][x]), self.p0[x]):
                raise InconsistentMarginals(f"stage 0 marginal differs from p0 at {x}")
        for n in range(1, len(self.stages)):
            expect = _push_state(mdp, self.stages[n - 1], self.exact)
            for y in range(mdp.n_states):
                if not close(sum(self.stages[n][y]), expect[y]):
                    raise InconsistentMarginals(
                        f"stage {n} marginal at state {y} breaks consistency")


def _push_state(mdp: FiniteMdp, joint, exact: bool):
    """Next-stage state marginal of a joint over (state, action)."""
    out = [_zero(exact)] * mdp.n_states
    for x in range(mdp.n_states):
        for i in range(mdp.n_actions(x)):
            mass = joint[x][i]
            if mass > _zero(exact):
                row = _q_row(mdp, x, i, exact)
                for y in range(mdp.n_states):
                    out[y] += mass * row[y]
    return out


def propagate_marginals(mdp: FiniteMdp, policy: Policy, p0, length: int,
                        exact: bool = False) -> MarginalSequence:
    """Stage joints gamma_0..gamma_{length-1} of a Markov-kind policy."""
    stages = []
    state = list(p0)
    for n in range(length):
        kernel = policy.markov_kernel(n)
        joint = [[state[x] * kernel[x][i] for i in range(mdp.n_actions(x))]
                 for x in range(mdp.n_states)]
        stages.append(joint)
        state = _push_state(mdp, joint, exact)
    return MarginalSequence(list(p0), stages, exact)


def markovize(mdp: FiniteMdp, policy: Policy, p0, horizon: int,
              exact: bool = False, max_entries: int = TABLE_CAP) -> Policy:
    """Markov policy with the same stage marginals as the input policy.

    The stage-n kernel is the conditional of a_n given x_n under the
    input policy (uniform default on uncharged states); the induced
    (x_n, a_n) marginal then equals the input's at every stage up to
    the horizon -- exactly, in exact mode.
    """
    p = strategic_measure(mdp, policy, p0, horizon, exact, max_entries)
    stage_tables = []
    for n in range(horizon + 1):
        marg = p.stage_marginal(n)
        joint = [[marg.get((x, i), _zero(exact)) for i in range(mdp.n_actions(x))]
                 for x in range(mdp.n_states)]
        stage_tables.append(decompose_joint(joint, mdp, exact).rho2)
    uniform = [_uniform_row(mdp, x, exact) for x in range(mdp.n_states)]
    return Policy.markov(stage_tables, tail=uniform)


# -- semi-stationary reconstruction -------------------------------------------


class ReconstructionResult:
    """Stationary kernel recovered from a marginal sequence.

    ``kernel`` is the conditional of the renormalized geometric mixture
    of the stage joints; ``mismatch`` the largest absolute gap between
    the input stage joints and those the kernel induces (0 for inputs
    generated by a stationary policy; positive mismatch certifies the
    sequence is not stationary-inducible).
    """

    def __init__(self, kernel, gamma_tilde, mismatch):
        self.kernel = kernel
        self.gamma_tilde = gamma_tilde
        self.mismatch = mismatch


def semi_stationary_reconstruct(mdp: FiniteMdp, gammas: MarginalSequence,
                                tol: float = 1e-12) -> ReconstructionResult:
    """Recover a stationary kernel from a finite marginal prefix.

    The stage joints are mixed with geometric weights 2^-(k+1),
    renormalized over the available prefix, and the mixture's
    conditional action kernel is returned.  When the input sequence was
    induced by a stationary policy, propagating the reconstruction
    reproduces every input stage joint (exactly in exact mode).

    Raises
    ------
    InconsistentMarginals
        when the input stages fail the forward consistency check.
    """
    gammas.check_consistency(mdp, tol)
    exact = gammas.exact
    length = len(gammas)

    if exact:
        weights = [Fraction(1, 2 ** (k + 1)) for k in range(length)]
    else:
        weights = [2.0 ** -(k + 1) for k in range(length)]
    total = sum(weights)
    weights = [w / total for w in weights]

    tilde = [[_zero(exact)] * mdp.n_actions(x) for x in range(mdp.n_states)]
    for k in range(length):
        for x in range(mdp.n_states):
            for i in range(mdp.n_actions(x)):
                tilde[x][i] += weights[k] * gammas.stages[k][x][i]

    kernel = decompose_joint(tilde, mdp, exact).rho2
    induced = propagate_marginals(mdp, Policy.stationary(kernel), gammas.p0,
                                  length, exact)
    mismatch = 0.0
    for k in range(length):
        for x in range(mdp.n_states):
            for i in range(mdp.n_actions(x)):
                gap = abs(float(induced.stages[k][x][i] - gammas.stages[k][x][i]))
                mismatch = max(mismatch, gap)
    return ReconstructionResult(kernel, tilde, mismatch)
