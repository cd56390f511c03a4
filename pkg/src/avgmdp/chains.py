"""Structure of the Markov chain induced by a stationary policy.

Recurrent classes are found combinatorially (strongly connected
components plus a closedness test), stationary distributions per class
with the Grassmann-Taksar-Heyman elimination, and the limit matrix
``P*`` from absorption probabilities.  ``P*`` encodes, row by row, the
long-run fraction of time spent in each state, which is what every
exact average-cost evaluation in this library reduces to.
"""

from math import gcd

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyTargetSet,
    PolicySupportError,
    RowSumError,
    SingularSolve,
)
from .model import PROB_TOL, FiniteMdp, Policy

#: condition-number ceiling for linear solves
COND_CAP = 1e8


class MarkovChain:
    """A row-stochastic transition matrix with optional provenance tag."""

    def __init__(self, p, provenance=None):
        p = np.asarray(p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise DimensionMismatch(f"transition matrix must be square, got {p.shape}")
        if np.any(p < 0):
            raise RowSumError("transition matrix has negative entries")
        sums = p.sum(axis=1)
        bad = np.where(np.abs(sums - 1.0) > PROB_TOL)[0]
        if bad.size:
            raise RowSumError(f"rows {bad.tolist()} do not sum to 1")
        self.p = p
        self.p.setflags(write=False)
        self.n_states = p.shape[0]
        self.provenance = provenance

    def __repr__(self):
        return f"MarkovChain(n_states={self.n_states})"


def induced_chain(mdp: FiniteMdp, mu: Policy) -> MarkovChain:
    """Markov chain P(y|x) = sum_a q(y|x,a) mu(a|x) of a stationary policy."""
    if not mu.is_stationary:
        raise PolicySupportError("induced_chain needs a stationary policy")
    if len(mu.table) != mdp.n_states:
        raise PolicySupportError("policy scope does not match the MDP")
    p = np.empty((mdp.n_states, mdp.n_states))
    for x in range(mdp.n_states):
        row = np.asarray(mu.table[x], dtype=float)
        if row.shape != (mdp.n_actions(x),):
            raise PolicySupportError(f"state {x}: kernel row does not match A(x)")
        p[x] = row @ mdp.q_block(x)
    return MarkovChain(p, provenance=(id(mdp), id(mu)))


# -- class decomposition -----------------------------------------------------


def _tarjan_scc(succ, n):
    """Iterative Tarjan; returns list of components (each a list of states)."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    sccs = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            for i in range(pi, len(succ[v])):
                w = succ[v][i]
                if index[w] == -1:
                    work[-1] = (v, i + 1)
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def _class_period(succ, members):
    """gcd of cycle lengths within one strongly connected component."""
    members_set = set(members)
    root = members[0]
    level = {root: 0}
    queue = [root]
    g = 0
    while queue:
        nxt = []
        for u in queue:
            for w in succ[u]:
                if w not in members_set:
                    continue
                if w in level:
                    g = gcd(g, level[u] + 1 - level[w])
                else:
                    level[w] = level[u] + 1
                    nxt.append(w)
        queue = nxt
    return abs(g) if g else 1


class ClassDecomposition:
    """Recurrent classes, transient states, and per-class periods.

    The recurrent classes are the closed strongly connected components
    of the positive-transition graph; together they form the
    conservative part of the state space, while the transient states
    form the dissipative part.
    """

    def __init__(self, recurrent_classes, transient, periods):
        self.recurrent_classes = [sorted(c) for c in recurrent_classes]
        self.transient = sorted(transient)
        self.periods = list(periods)

    def __repr__(self):
        return (f"ClassDecomposition(classes={self.recurrent_classes}, "
                f"transient={self.transient}, periods={self.periods})")


def decompose(chain: MarkovChain) -> ClassDecomposition:
    """Split the state space into recurrent classes and transient states."""
    p = chain.p
    n = chain.n_states
    succ = [np.flatnonzero(p[x] > 0.0).tolist() for x in range(n)]
    sccs = _tarjan_scc(succ, n)

    recurrent = []
    periods = []
    transient = []
    for comp in sccs:
        comp_set = set(comp)
        closed = all(w in comp_set for v in comp for w in succ[v])
        if closed:
            recurrent.append(comp)
            periods.append(_class_period(succ, comp))
        else:
            transient.extend(comp)
    order = np.argsort([min(c) for c in recurrent])
    recurrent = [recurrent[i] for i in order]
    periods = [periods[i] for i in order]
    return ClassDecomposition(recurrent, transient, periods)


# -- linear algebra helpers --------------------------------------------------


def solve_checked(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ x = b, raising SingularSolve when cond_1(a) > 1e8."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 0:
        return np.zeros_like(b)
    if a.shape == (1, 1):
        pivot = a[0, 0]
        if pivot == 0.0 or not np.isfinite(pivot):
            raise SingularSolve("singular 1x1 system")
        return b / pivot
    try:
        x = np.linalg.solve(a, b)
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError as e:
        raise SingularSolve(str(e)) from e
    cond = float(np.abs(a).sum(axis=0).max() * np.abs(inv).sum(axis=0).max())
    if not np.isfinite(cond) or cond > COND_CAP:
        raise SingularSolve(f"condition estimate {cond:.3g} exceeds {COND_CAP:.0e}")
    return x


def gth_stationary(p_class: np.ndarray) -> np.ndarray:
    """Stationary distribution of an irreducible row-stochastic matrix.

    Grassmann-Taksar-Heyman elimination: no subtractions, hence stable
    without pivoting even for nearly-degenerate chains.
    """
    m = p_class.shape[0]
    if m == 1:
        return np.ones(1)
    t = p_class.T.copy()
    for k in range(m - 1, 0, -1):
        s = float(np.sum(t[:k, k]))
        if s <= 0.0:
            raise SingularSolve("GTH elimination hit a zero column sum; "
                                "class is not irreducible")
        t[k, :k] /= s
        t[:k, :k] += np.outer(t[:k, k], t[k, :k])
    pi = np.zeros(m)
    pi[0] = 1.0
    for k in range(1, m):
        pi[k] = t[k, 0] + float(np.dot(pi[1:k], t[k, 1:k]))
    return pi / np.sum(pi)


# -- Cesaro limit matrix -----------------------------------------------------


class CesaroLimit:
    """Limit of averaged powers of P: absorption probabilities times
    class stationary distributions."""

    def __init__(self, p_star, per_class_stationary):
        self.p_star = p_star
        self.per_class_stationary = per_class_stationary


def cesaro_matrix(chain: MarkovChain, decomp: ClassDecomposition) -> CesaroLimit:
    """Compute P* with P*(x,.) = sum_R Pr_x(absorb in R) pi_R.

    Parameters
    ----------
    chain : MarkovChain
    decomp : ClassDecomposition
        Must describe the same chain.

    Returns
    -------
    CesaroLimit
        Satisfies P* P = P P* = P* P* = P* within 1e-10 entrywise.
    """
    p = chain.p
    n = chain.n_states
    p_star = np.zeros((n, n))
    pis = []
    for members in decomp.recurrent_classes:
        idx = np.asarray(members)
        pi = gth_stationary(p[idx[:, None], idx])
        pis.append(pi)
        p_star[idx[:, None], idx] = pi

    t_idx = np.asarray(decomp.transient, dtype=int)
    if t_idx.size:
        a = np.eye(t_idx.size) - p[t_idx[:, None], t_idx]
        # one solve per class: absorption probabilities from transients
        rhs = np.empty((t_idx.size, len(decomp.recurrent_classes)))
        for k, members in enumerate(decomp.recurrent_classes):
            rhs[:, k] = p[t_idx[:, None], np.asarray(members)].sum(axis=1)
        absorb = solve_checked(a, rhs)
        for k, members in enumerate(decomp.recurrent_classes):
            idx = np.asarray(members)
            p_star[t_idx[:, None], idx] = np.outer(absorb[:, k], pis[k])
    return CesaroLimit(p_star, pis)


# -- hitting probabilities and times ----------------------------------------


def _can_reach(p: np.ndarray, targets) -> np.ndarray:
    """Boolean mask of states with a positive-probability path into targets."""
    n = p.shape[0]
    reach = np.zeros(n, dtype=bool)
    reach[list(targets)] = True
    frontier = list(targets)
    pred = [np.flatnonzero(p[:, y] > 0.0) for y in range(n)]
    while frontier:
        nxt = []
        for y in frontier:
            for x in pred[y]:
                if not reach[x]:
                    reach[x] = True
                    nxt.append(int(x))
        frontier = nxt
    return reach


def hitting_probability(chain: MarkovChain, targets) -> np.ndarray:
    """Probability of ever entering the target set, per start state.

    Returns the minimal nonnegative solution of ``h = 1`` on the target
    set and ``h(x) = sum_y P(y|x) h(y)`` elsewhere; states with no path
    into the target set get exactly 0.
    """
    targets = sorted(set(int(t) for t in targets))
    if not targets:
        raise EmptyTargetSet("target set is empty")
    p = chain.p
    n = chain.n_states
    if any(t < 0 or t >= n for t in targets):
        raise DimensionMismatch("target state out of range")

    h = np.zeros(n)
    h[targets] = 1.0
    reach = _can_reach(p, targets)
    unknown = np.flatnonzero(reach & ~np.isin(np.arange(n), targets))
    if unknown.size:
        a = np.eye(unknown.size) - p[np.ix_(unknown, unknown)]
        b = p[np.ix_(unknown, np.asarray(targets))].sum(axis=1)
        h[unknown] = solve_checked(a, b)
    return np.clip(h, 0.0, 1.0)


def expected_hitting_time(chain: MarkovChain, targets) -> np.ndarray:
    """Expected steps to enter the target set; +inf where unreachable.

    A state receives the +inf sentinel when its hitting probability
    falls below 1 - 1e-10.  On a finite chain certain hitting implies a
    finite expectation, so the remaining states solve
    ``(I - P_UU) m = 1``.
    """
    targets = sorted(set(int(t) for t in targets))
    if not targets:
        raise EmptyTargetSet("target set is empty")
    h = hitting_probability(chain, targets)
    n = chain.n_states
    m = np.zeros(n)
    certain = h >= 1.0 - 1e-10
    m[~certain] = np.inf
    unknown = np.flatnonzero(certain & ~np.isin(np.arange(n), targets))
    if unknown.size:
        a = np.eye(unknown.size) - chain.p[np.ix_(unknown, unknown)]
        m[unknown] = solve_checked(a, np.ones(unknown.size))
    return m
