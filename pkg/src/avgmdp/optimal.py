"""Optimal average-cost computation and structural verification.

Two independent routes to the optimal gain of a finite MDP: exhaustive
enumeration of deterministic stationary policies (the ground truth at
tiny scale) and multichain policy iteration with gain- and
bias-improvement stages.  The rest of the module verifies structure:
the one-step gain inequality, its submartingale trace along a policy,
maximal reachability probabilities, and the constancy of the optimal
gain over communicating structures.
"""

from itertools import product

import numpy as np

from .chains import MarkovChain, cesaro_matrix, decompose, induced_chain, solve_checked, _tarjan_scc
from .errors import (
    CyclingDetected,
    DimensionMismatch,
    EmptyTargetSet,
    EnumerationTooLarge,
    NonConstantOnSupport,
    PolicySupportError,
)
from .model import FiniteMdp, Policy

#: tolerance on gain/bias agreement used throughout the module
GAIN_TOL = 1e-9
#: strict-improvement threshold inside policy iteration
_IMPROVE_TOL = 1e-10

ENUMERATION = "Enumeration"
POLICY_ITERATION = "PolicyIteration"


class GainBiasSolution:
    """Optimal gain g, bias h, and an attaining deterministic policy."""

    def __init__(self, g, h, policy, method):
        self.g = np.asarray(g, dtype=float)
        self.h = np.asarray(h, dtype=float)
        self.policy = policy
        self.method = method

    def __repr__(self):
        return f"GainBiasSolution(method={self.method!r}, g={self.g!r})"


def _deterministic_chain(mdp: FiniteMdp, action_indices):
    p = np.empty((mdp.n_states, mdp.n_states))
    c = np.empty(mdp.n_states)
    for x, i in enumerate(action_indices):
        p[x] = mdp.q_row(x, i)
        c[x] = mdp.cost(x, i)
    return p, c


def _evaluate(p: np.ndarray, c: np.ndarray):
    """Gain and (normalized) bias of a chain: g = P*c, h with
    (I-P)h = c - g and P*h = 0."""
    chain = MarkovChain(p)
    limit = cesaro_matrix(chain, decompose(chain))
    g = limit.p_star @ c
    z = solve_checked(np.eye(p.shape[0]) - p + limit.p_star, c)
    return g, z - g


def optimal_gain_enum(mdp: FiniteMdp) -> GainBiasSolution:
    """Optimal gain by enumerating all deterministic stationary policies.

    The pointwise minimum of (P* c) over all deterministic stationary
    policies; classical finite-MDP theory guarantees a single policy
    attains it at every state.  Serves as the oracle for the other
    gain computations.

    Raises
    ------
    EnumerationTooLarge
        when the policy space exceeds 10^6.
    """
    n_policies = 1
    for x in range(mdp.n_states):
        n_policies *= mdp.n_actions(x)
        if n_policies > 10**6:
            raise EnumerationTooLarge(f"more than 10^6 deterministic policies")

    ranges = [range(mdp.n_actions(x)) for x in range(mdp.n_states)]
    assignments = []
    gains = []
    g_best = np.full(mdp.n_states, np.inf)
    for assignment in product(*ranges):
        p, c = _deterministic_chain(mdp, assignment)
        chain = MarkovChain(p)
        g = cesaro_matrix(chain, decompose(chain)).p_star @ c
        assignments.append(assignment)
        gains.append(g)
        np.minimum(g_best, g, out=g_best)

    # a single policy attains the pointwise minimum (classical); pick the
    # first within solve noise, falling back to the smallest excess
    best_policy = assignments[0]
    best_excess = np.inf
    for assignment, g in zip(assignments, gains):
        excess = float(np.max(g - g_best))
        if excess < best_excess - 1e-15:
            best_excess = excess
            best_policy = assignment
        if excess <= 1e-12:
            break

    p, c = _deterministic_chain(mdp, best_policy)
    _, h = _evaluate(p, c)
    return GainBiasSolution(g_best, h, Policy.deterministic(best_policy, mdp),
                            ENUMERATION)


def optimal_gain_pi(mdp: FiniteMdp) -> GainBiasSolution:
    """Optimal gain by multichain policy iteration.

    Alternates policy evaluation with a two-stage improvement: first
    decrease the expected next-stage gain, then, over the
    gain-attaining actions only, decrease cost-plus-bias.  The current
    action is retained whenever it attains the minimum, and ties among
    improving actions break to the lowest action index, which rules
    out cycling; a repeated policy therefore raises CyclingDetected.
    """
    n = mdp.n_states
    policy = tuple(0 for _ in range(n))
    seen = {policy}
    while True:
        p, c = _deterministic_chain(mdp, policy)
        g, h = _evaluate(p, c)

        new_policy = list(policy)
        for x in range(n):
            qg = mdp.q_block(x) @ g
            cur = policy[x]
            best = float(np.min(qg))
            if qg[cur] > best + _IMPROVE_TOL:
                new_policy[x] = int(np.argmin(qg))
                continue
            attaining = np.flatnonzero(qg <= best + _IMPROVE_TOL)
            vals = mdp.cost_block(x)[attaining] + mdp.q_block(x)[attaining] @ h
            cur_val = mdp.cost(x, cur) + float(mdp.q_row(x, cur) @ h)
            k = int(np.argmin(vals))
            if vals[k] < cur_val - _IMPROVE_TOL:
                new_policy[x] = int(attaining[k])

        new_policy = tuple(new_policy)
        if new_policy == policy:
            return GainBiasSolution(g, h, Policy.deterministic(policy, mdp),
                                    POLICY_ITERATION)
        if new_policy in seen:
            raise CyclingDetected(f"policy {new_policy} repeated")
        seen.add(new_policy)
        policy = new_policy


# -- the gain inequality and its submartingale form --------------------------


class GainInequalityReport:
    """Per-pair slacks of sum_y q(y|x,a) g(y) - g(x).

    ``slacks[x]`` is the per-action slack array at state x;
    ``min_slack[x]`` its minimum.  ``verdict`` is True iff every
    admissible action has slack >= -1e-9, which is simultaneously the
    one-step inequality for the gain and its per-action submartingale
    form.
    """

    def __init__(self, slacks):
        self.slacks = slacks
        self.min_slack = np.array([float(np.min(s)) for s in slacks])
        self.verdict = bool(np.all(self.min_slack >= -GAIN_TOL))


def verify_gain_inequality(mdp: FiniteMdp, g) -> GainInequalityReport:
    """Check g(x) <= sum_y q(y|x,a) g(y) for every admissible pair."""
    g = np.asarray(g, dtype=float)
    if g.shape != (mdp.n_states,):
        raise DimensionMismatch("g must have one value per state")
    slacks = [mdp.q_block(x) @ g - g[x] for x in range(mdp.n_states)]
    return GainInequalityReport(slacks)


class SubmartingaleTrace:
    """Stagewise minimum of E[g(next)|x,a] - g(x) along reachable pairs."""

    def __init__(self, per_stage, saturated_at):
        self.per_stage = list(per_stage)
        self.min_slack = min(per_stage) if per_stage else 0.0
        self.verdict = self.min_slack >= -GAIN_TOL
        self.saturated_at = saturated_at


def submartingale_check(mdp: FiniteMdp, policy: Policy, g, x0: int,
                        horizon: int) -> SubmartingaleTrace:
    """Trace the submartingale property of g along a policy's support.

    Propagates the exact reachable support from x0 and validates the
    per-action slack at every (state, action) the policy can occupy at
    each stage up to the horizon.  The scan stops early once the
    support and stage kernel repeat (every later stage is a copy).
    """
    if horizon > 10**5:
        raise ValueError("horizon capped at 10^5")
    if policy.kind not in (Policy.STATIONARY, Policy.MARKOV):
        raise PolicySupportError("submartingale_check needs a state-kernel policy")
    g = np.asarray(g, dtype=float)
    slack = [mdp.q_block(x) @ g - g[x] for x in range(mdp.n_states)]

    support = frozenset([x0])
    per_stage = []
    saturated_at = None
    prev = None
    for stage in range(horizon):
        kernel = policy.markov_kernel(stage)
        state = (support, id(kernel))
        if state == prev:
            saturated_at = stage
            break
        prev = state
        stage_min = np.inf
        nxt = set()
        for x in support:
            acts = np.flatnonzero(np.asarray(kernel[x], dtype=float) > 0.0)
            stage_min = min(stage_min, float(np.min(slack[x][acts])))
            for i in acts:
                nxt.update(np.flatnonzero(mdp.q_row(x, i) > 0.0).tolist())
        per_stage.append(stage_min)
        support = frozenset(nxt)
    return SubmartingaleTrace(per_stage, saturated_at)


# -- maximal reachability -----------------------------------------------------


def _positive_succ(mdp: FiniteMdp, x: int, i: int):
    return np.flatnonzero(mdp.q_row(x, i) > 0.0)


def _prob1_set(mdp: FiniteMdp, targets: set):
    """States from which some policy reaches the target set almost
    surely, with a witness action per state (attractor strategy)."""
    n = mdp.n_states
    y = set(range(n))
    while True:
        x_set = set(targets)
        witness = {}
        grew = True
        while grew:
            grew = False
            for s in y - x_set:
                for i in range(mdp.n_actions(s)):
                    succ = _positive_succ(mdp, s, i)
                    if all(t in y for t in succ) and any(t in x_set for t in succ):
                        x_set.add(s)
                        witness[s] = i
                        grew = True
                        break
        if x_set == y:
            return y, witness
        y = x_set


def max_reachability(mdp: FiniteMdp, targets) -> np.ndarray:
    """sup over policies of the probability of ever entering the target set.

    The least fixed point of v(x) = max_a sum_y q(y|x,a) v(y) off the
    target set with v = 1 on it: value iteration from zero, stopped at
    sup-norm step < 1e-12, with graph pre-analysis pinning the exact-1
    states (almost-sure reachability under some policy) and exact-0
    states (no action path into the target set).
    """
    targets = sorted(set(int(t) for t in targets))
    if not targets:
        raise EmptyTargetSet("target set is empty")
    n = mdp.n_states
    if any(t < 0 or t >= n for t in targets):
        raise DimensionMismatch("target state out of range")

    # exact-0: no path in the some-action graph
    reach = set(targets)
    frontier = list(targets)
    preds = [[] for _ in range(n)]
    for x in range(n):
        for i in range(mdp.n_actions(x)):
            for t in _positive_succ(mdp, x, i):
                preds[t].append(x)
    while frontier:
        t = frontier.pop()
        for x in preds[t]:
            if x not in reach:
                reach.add(x)
                frontier.append(x)

    one_set, _ = _prob1_set(mdp, set(targets))
    v = np.zeros(n)
    v[list(one_set)] = 1.0

    free = [x for x in range(n)
            if x in reach and x not in one_set and x not in targets]
    for _ in range(200000):
        step = 0.0
        for x in free:
            new = float(np.max(mdp.q_block(x) @ v))
            step = max(step, abs(new - v[x]))
            v[x] = new
        if step < 1e-12:
            break
    v[list(one_set)] = 1.0
    return v


class ReachabilityCondition:
    """Outcome of the singleton reachability check.

    ``holds`` is True iff every state of ``region`` reaches every
    singleton of ``support`` with probability one under some policy;
    ``witnesses[y]`` is a deterministic stationary policy attaining
    probability 1 for target y, and ``failures[y]`` lists the region
    states that cannot.
    """

    def __init__(self, holds, witnesses, failures):
        self.holds = holds
        self.witnesses = witnesses
        self.failures = failures

    def __bool__(self):
        return self.holds


def check_reachability_condition(mdp: FiniteMdp, lambda_support,
                                 region) -> ReachabilityCondition:
    """Almost-sure reachability of each support singleton from the region.

    Checking singletons suffices: reaching {y} with probability one
    implies reaching any superset with probability one, and the
    support is finite.
    """
    support = sorted(set(int(y) for y in lambda_support))
    region = sorted(set(int(x) for x in region))
    if not support:
        raise EmptyTargetSet("lambda support is empty")
    if not set(support) <= set(region):
        raise DimensionMismatch("lambda support must lie inside the region")

    holds = True
    witnesses = {}
    failures = {}
    for y in support:
        one_set, actions = _prob1_set(mdp, {y})
        bad = [x for x in region if x not in one_set]
        if bad:
            holds = False
            failures[y] = bad
        assignment = [actions.get(x, 0) for x in range(mdp.n_states)]
        witnesses[y] = Policy.deterministic(assignment, mdp)
    return ReachabilityCondition(holds, witnesses, failures)


class ConstancyReport:
    """Constancy of a gain function over a measure support.

    ``ell`` is the common gain value on the support; ``support`` the
    states of the region where the gain equals ell within tolerance;
    ``upper_violations`` the region states with gain above ell.  On a
    finite MDP the bounding hypotheses hold automatically, so a
    nonempty ``upper_violations`` means the supplied gain came from a
    model (e.g. an infinite one) where the uniform-integrability
    hypothesis fails; ``hypothesis_failure`` flags that.
    """

    def __init__(self, ell, support, upper_violations, lambda_support):
        self.ell = ell
        self.support = support
        self.upper_violations = upper_violations
        self.lambda_support = lambda_support
        self.hypothesis_failure = bool(upper_violations)


def constancy_report(mdp: FiniteMdp, g, lambda_support, region,
                     tol: float = GAIN_TOL) -> ConstancyReport:
    """Check that g is constant on the support and bounded by it on the region.

    Precondition: check_reachability_condition(mdp, lambda_support,
    region) holds.

    Raises
    ------
    NonConstantOnSupport
        when g varies on the support by more than the tolerance.
    """
    g = np.asarray(g, dtype=float)
    support = sorted(set(int(y) for y in lambda_support))
    region = sorted(set(int(x) for x in region))
    vals = g[support]
    if float(vals.max() - vals.min()) > tol:
        raise NonConstantOnSupport(
            f"gain spans [{vals.min()}, {vals.max()}] on the support")
    ell = float(vals[0])
    level = [x for x in region if abs(g[x] - ell) <= tol]
    violations = [x for x in region if g[x] > ell + tol]
    return ConstancyReport(ell, level, violations, support)


# -- connected classes --------------------------------------------------------


def _max_end_components(mdp: FiniteMdp):
    """Maximal sub-MDPs that are closed under their retained actions
    and strongly connected (the sets a policy can make recurrent)."""
    active = set(range(mdp.n_states))
    allowed = {x: set(range(mdp.n_actions(x))) for x in active}
    while True:
        nodes = sorted(active)
        pos = {x: k for k, x in enumerate(nodes)}
        succ = [sorted({int(t) for i in allowed[x] for t in _positive_succ(mdp, x, i)
                        if t in active})
                for x in nodes]
        succ_idx = [[pos[t] for t in s] for s in succ]
        comp_of = {}
        comps = _tarjan_scc(succ_idx, len(nodes))
        for cid, comp in enumerate(comps):
            for k in comp:
                comp_of[nodes[k]] = cid

        changed = False
        for x in nodes:
            for i in list(allowed[x]):
                succs = _positive_succ(mdp, x, i)
                if any(t not in active or comp_of[t] != comp_of[x] for t in succs):
                    allowed[x].discard(i)
                    changed = True
            if not allowed[x]:
                active.discard(x)
                changed = True
        if not changed:
            return [sorted(nodes[k] for k in comp) for comp in comps
                    if any(allowed[nodes[k]] for k in comp)]


WEAKLY_COMMUNICATING = "weakly_communicating"
MULTICHAIN = "multichain"


class ConnectedClassesResult:
    """Connected classes and the resulting structure classification."""

    def __init__(self, classification, classes, mecs):
        self.classification = classification
        self.classes = classes
        self.mecs = mecs

    def __repr__(self):
        return (f"ConnectedClassesResult({self.classification!r}, "
                f"classes={self.classes})")


def connected_classes(mdp: FiniteMdp) -> ConnectedClassesResult:
    """Connected classes (mutual reachability under some policy, no
    escape) and the weakly-communicating / multichain classification.

    A connected class is a closed strongly connected component of the
    some-action transition graph.  The MDP is weakly communicating iff
    there is exactly one set of states a policy can make recurrent
    (one maximal end component); every state outside it is then
    transient under all policies, which forces a constant optimal gain.
    """
    n = mdp.n_states
    succ = [sorted({int(t) for i in range(mdp.n_actions(x))
                    for t in _positive_succ(mdp, x, i)}) for x in range(n)]
    sccs = _tarjan_scc(succ, n)
    classes = []
    for comp in sccs:
        comp_set = set(comp)
        if all(t in comp_set for v in comp for t in succ[v]):
            classes.append(sorted(comp))
    classes.sort(key=min)

    mecs = _max_end_components(mdp)
    label = WEAKLY_COMMUNICATING if len(mecs) == 1 else MULTICHAIN
    return ConnectedClassesResult(label, classes, mecs)
