"""Finite and countable MDP models, policies, and cost-model checks.

A :class:`FiniteMdp` stores, per state, the admissible action list, the
transition rows and the one-stage costs.  Inputs given as ints or
strings (``"1/3"``, ``"0.25"``) are kept as exact rationals alongside the
float working copy, so that rational-mode computations and round-trip
serialization are bit-exact.

All objects are immutable after construction and safe to share across
threads; every operation in this module is a pure function.
"""

from fractions import Fraction

import numpy as np

from .errors import (
    BothSignsUnbounded,
    DimensionMismatch,
    EmptyActionSet,
    NonFiniteCost,
    PolicySupportError,
    RowSumError,
)

#: validation tolerance for probability rows (fixed, documented)
PROB_TOL = 1e-12

_SCHEMA_KEYS = {"n_states", "actions", "q", "c"}


def _parse_number(v):
    """Return (float_value, exact_value_or_None) for a document entry."""
    if isinstance(v, bool):
        raise TypeError(f"boolean is not a number: {v!r}")
    if isinstance(v, (int, np.integer)):
        return float(v), Fraction(int(v))
    if isinstance(v, str):
        f = Fraction(v)
        return float(f), f
    if isinstance(v, float):
        return float(v), None
    if isinstance(v, Fraction):
        return float(v), v
    raise TypeError(f"unsupported numeric entry: {v!r}")


class FiniteMdp:
    """A finite-state, finite-action MDP with real one-stage costs.

    Parameters
    ----------
    actions : list of lists
        ``actions[x]`` is the nonempty list of action identifiers at
        state ``x``.
    q : list of 2d arrays / nested lists
        ``q[x][i]`` is the transition row of action ``actions[x][i]``;
        entries may be floats, ints, strings or Fractions.
    c : list of 1d arrays / nested lists
        ``c[x][i]`` is the one-stage cost of ``actions[x][i]``.
    """

    def __init__(self, actions, q, c):
        n = len(actions)
        if n == 0:
            raise EmptyActionSet("MDP must have at least one state")
        if len(q) != n or len(c) != n:
            raise DimensionMismatch("actions, q, c must have one entry per state")

        self.n_states = n
        self.actions = [list(a) for a in actions]
        self._q = []
        self._c = []
        q_exact: list | None = []
        c_exact: list | None = []

        for x in range(n):
            acts = self.actions[x]
            if len(acts) == 0:
                raise EmptyActionSet(f"state {x} has no admissible action")
            if len(q[x]) != len(acts) or len(c[x]) != len(acts):
                raise DimensionMismatch(f"state {x}: q/c rows do not match action count")

            rows = np.empty((len(acts), n))
            costs = np.empty(len(acts))
            for i in range(len(acts)):
                row = list(q[x][i])
                if len(row) != n:
                    raise DimensionMismatch(f"state {x}, action {acts[i]}: row length {len(row)}")
                parsed = [_parse_number(v) for v in row]
                rows[i] = [p[0] for p in parsed]
                exact_row = [p[1] for p in parsed]
                if q_exact is not None and all(e is not None for e in exact_row):
                    q_exact.append(exact_row)
                else:
                    q_exact = None

                if np.any(rows[i] < 0.0):
                    raise RowSumError(f"state {x}, action {acts[i]}: negative probability")
                s = float(np.sum(rows[i]))
                if abs(s - 1.0) > PROB_TOL:
                    raise RowSumError(f"state {x}, action {acts[i]}: row sums to {s!r}")

                cv, ce = _parse_number(c[x][i])
                if not np.isfinite(cv):
                    raise NonFiniteCost(f"state {x}, action {acts[i]}: cost {cv!r}")
                costs[i] = cv
                if c_exact is not None and ce is not None:
                    c_exact.append(ce)
                else:
                    c_exact = None

            rows.setflags(write=False)
            costs.setflags(write=False)
            self._q.append(rows)
            self._c.append(costs)

        self._q_exact = q_exact
        self._c_exact = c_exact
        self._offsets = np.cumsum([0] + [len(a) for a in self.actions])

    # -- basic accessors -------------------------------------------------

    @property
    def exact(self) -> bool:
        """True when all probabilities and costs carry exact rationals."""
        return self._q_exact is not None and self._c_exact is not None

    def n_actions(self, x: int) -> int:
        return len(self.actions[x])

    @property
    def total_pairs(self) -> int:
        """Number of admissible state-action pairs."""
        return int(self._offsets[-1])

    def pair_index(self, x: int, i: int) -> int:
        """Flat index of the pair (state x, i-th action)."""
        return int(self._offsets[x]) + i

    def q_row(self, x: int, i: int) -> np.ndarray:
        """Transition row (float) of the i-th action at state x."""
        return self._q[x][i]

    def q_row_exact(self, x: int, i: int) -> list:
        """Transition row as exact Fractions (requires rational inputs)."""
        if self._q_exact is None:
            raise ValueError("MDP was built from floats; no exact rows available")
        return self._q_exact[self.pair_index(x, i)]

    def q_block(self, x: int) -> np.ndarray:
        """All transition rows at state x, shape (n_actions, n_states)."""
        return self._q[x]

    def cost(self, x: int, i: int) -> float:
        return float(self._c[x][i])

    def cost_exact(self, x: int, i: int) -> Fraction:
        if self._c_exact is None:
            raise ValueError("MDP was built from floats; no exact costs available")
        return self._c_exact[self.pair_index(x, i)]

    def cost_block(self, x: int) -> np.ndarray:
        return self._c[x]

    def __eq__(self, other):
        if not isinstance(other, FiniteMdp):
            return NotImplemented
        if self.n_states != other.n_states or self.actions != other.actions:
            return False
        for x in range(self.n_states):
            if not np.array_equal(self._q[x], other._q[x]):
                return False
            if not np.array_equal(self._c[x], other._c[x]):
                return False
        return self._q_exact == other._q_exact and self._c_exact == other._c_exact

    def __repr__(self):
        return f"FiniteMdp(n_states={self.n_states}, pairs={self.total_pairs})"

    # -- serialization ---------------------------------------------------

    def to_document(self) -> dict:
        """Dump to the JSON document schema accepted by validate_mdp."""

        def fmt(value, exact):
            if exact is None:
                return float(value)
            if exact.denominator == 1:
                return int(exact)
            return str(exact)

        q = {}
        c = {}
        for x in range(self.n_states):
            for i, a in enumerate(self.actions[x]):
                key = f"{x},{a}"
                if self.exact:
                    row = self.q_row_exact(x, i)
                    q[key] = [fmt(None, e) for e in row]
                    c[key] = fmt(None, self.cost_exact(x, i))
                else:
                    q[key] = [float(v) for v in self._q[x][i]]
                    c[key] = float(self._c[x][i])
        return {
            "n_states": self.n_states,
            "actions": [list(a) for a in self.actions],
            "q": q,
            "c": c,
        }


def validate_mdp(doc: dict) -> FiniteMdp:
    """Build a validated FiniteMdp from a parsed JSON document.

    The document must carry exactly the keys ``n_states``, ``actions``
    (array of per-state action-identifier arrays), ``q`` (map
    ``"x,a" -> row``) and ``c`` (map ``"x,a" -> number``); unknown keys
    are rejected.

    Raises
    ------
    RowSumError, EmptyActionSet, NonFiniteCost, DimensionMismatch
    """
    if not isinstance(doc, dict):
        raise DimensionMismatch("document must be a JSON object")
    unknown = set(doc) - _SCHEMA_KEYS
    if unknown:
        raise DimensionMismatch(f"unknown document keys: {sorted(unknown)}")
    missing = _SCHEMA_KEYS - set(doc)
    if missing:
        raise DimensionMismatch(f"missing document keys: {sorted(missing)}")

    n = doc["n_states"]
    actions = doc["actions"]
    if not isinstance(n, int) or n <= 0:
        raise DimensionMismatch("n_states must be a positive integer")
    if len(actions) != n:
        raise DimensionMismatch("actions must list one action set per state")

    q = []
    c = []
    seen = set()
    for x in range(n):
        if not actions[x]:
            raise EmptyActionSet(f"state {x} has no admissible action")
        q_rows = []
        c_vals = []
        for a in actions[x]:
            key = f"{x},{a}"
            seen.add(key)
            if key not in doc["q"]:
                raise DimensionMismatch(f"missing transition row for '{key}'")
            if key not in doc["c"]:
                raise DimensionMismatch(f"missing cost for '{key}'")
            q_rows.append(doc["q"][key])
            c_vals.append(doc["c"][key])
        q.append(q_rows)
        c.append(c_vals)

    stray = (set(doc["q"]) | set(doc["c"])) - seen
    if stray:
        raise DimensionMismatch(f"entries for unknown state-action pairs: {sorted(stray)}")
    return FiniteMdp(actions, q, c)


def uncontrolled_mdp(p, costs) -> FiniteMdp:
    """Wrap a transition matrix and per-state costs as a 1-action MDP."""
    n = len(p)
    return FiniteMdp(
        actions=[[0]] * n,
        q=[[list(p[x])] for x in range(n)],
        c=[[costs[x]] for x in range(n)],
    )


# -- countable models ------------------------------------------------------


class CountableMdp:
    """Countable-state MDP given by lazy callbacks on state indices.

    ``kernel(k, a)`` returns a finite-support distribution as a list of
    ``(state_index, probability)`` pairs; ``cost(k, a)`` the one-stage
    cost; ``action_set(k)`` the admissible action list.
    """

    def __init__(self, kernel, cost, action_set):
        self.kernel = kernel
        self.cost = cost
        self.action_set = action_set

    def check_row(self, k, a) -> None:
        """Validate one kernel row (nonnegative, sums to 1 within 1e-12)."""
        row = self.kernel(k, a)
        total = 0.0
        for j, p in row:
            if j < 0:
                raise DimensionMismatch(f"kernel({k},{a!r}) targets negative state {j}")
            if p < 0:
                raise RowSumError(f"kernel({k},{a!r}) has negative mass at {j}")
            total += float(p)
        if abs(total - 1.0) > PROB_TOL:
            raise RowSumError(f"kernel({k},{a!r}) sums to {total!r}")


def truncate(cmdp: CountableMdp, K: int) -> FiniteMdp:
    """Truncate a countable MDP to states {0..K}.

    States above K are merged into state K: any outgoing mass to a
    state above K is redirected to K itself, and the costs at K are
    taken from the original model.
    """
    if K < 0:
        raise DimensionMismatch("K must be nonnegative")
    n = K + 1
    actions = []
    q = []
    c = []
    for k in range(n):
        acts = list(cmdp.action_set(k))
        if not acts:
            raise EmptyActionSet(f"state {k} has no admissible action")
        rows = []
        costs = []
        for a in acts:
            cmdp.check_row(k, a)
            row = [0] * n  # int zeros keep Fraction masses exact
            for j, p in cmdp.kernel(k, a):
                row[min(j, K)] += p
            rows.append(row)
            costs.append(cmdp.cost(k, a))
        actions.append(acts)
        q.append(rows)
        c.append(costs)
    return FiniteMdp(actions, q, c)


# -- policies --------------------------------------------------------------


def _check_kernel_table(mdp: FiniteMdp, table, what: str):
    """Validate one per-state action-distribution table; returns arrays."""
    if len(table) != mdp.n_states:
        raise PolicySupportError(f"{what}: expected {mdp.n_states} rows")
    out = []
    for x in range(mdp.n_states):
        row = np.asarray([float(v) for v in table[x]])
        if row.shape != (mdp.n_actions(x),):
            raise PolicySupportError(
                f"{what}: state {x} row has length {row.shape}, "
                f"needs {mdp.n_actions(x)} (one weight per admissible action)"
            )
        if np.any(row < -PROB_TOL) or abs(float(row.sum()) - 1.0) > 1e-9:
            raise PolicySupportError(f"{what}: state {x} row is not a distribution")
        out.append(np.clip(row, 0.0, None))
    return out


class Policy:
    """A randomized policy of one of the five supported kinds.

    Action distributions are always indexed by the position of the
    action in ``mdp.actions[x]``, so admissibility (control-constraint
    mass 1) is structural.  Use the class methods to construct:

    - ``Policy.stationary(table)``: one kernel row per state.
    - ``Policy.markov(stages, tail=..., cycle=...)``: stage-indexed
      kernels; after the listed stages the policy follows ``tail``
      (default: the last stage), or cycles through ``cycle``.
    - ``Policy.semi_stationary(table)``: ``table[x0][x]`` row, applied
      from stage 1 on, with stage 0 using ``table[x0][x0]``.
    - ``Policy.semi_markov(stages, tail=...)``: stage-indexed
      ``table[x0][x]`` kernels.
    - ``Policy.history(fn, horizon)``: ``fn(history) -> row over
      A(x_n)`` for histories ``(x0, a0, ..., xn)``, defined for
      ``n <= horizon``.
    """

    STATIONARY = "stationary"
    SEMI_STATIONARY = "semi_stationary"
    MARKOV = "markov"
    SEMI_MARKOV = "semi_markov"
    HISTORY = "history"

    def __init__(self, kind, **data):
        self.kind = kind
        self.__dict__.update(data)

    @classmethod
    def stationary(cls, table, mdp: FiniteMdp | None = None, exact=None):
        if mdp is not None:
            table = _check_kernel_table(mdp, table, "stationary kernel")
        return cls(cls.STATIONARY, table=table, exact_table=exact)

    @classmethod
    def deterministic(cls, action_indices, mdp: FiniteMdp):
        """Stationary policy taking the given action index at each state."""
        table = []
        for x, i in enumerate(action_indices):
            row = np.zeros(mdp.n_actions(x))
            row[i] = 1.0
            table.append(row)
        return cls(cls.STATIONARY, table=table, exact_table=None,
                   action_indices=tuple(int(i) for i in action_indices))

    @classmethod
    def markov(cls, stages, tail=None, cycle=None, mdp: FiniteMdp | None = None):
        if mdp is not None:
            stages = [_check_kernel_table(mdp, s, f"stage {n} kernel")
                      for n, s in enumerate(stages)]
            if tail is not None:
                tail = _check_kernel_table(mdp, tail, "tail kernel")
            if cycle is not None:
                cycle = [_check_kernel_table(mdp, s, "cycle kernel") for s in cycle]
        if tail is not None and cycle is not None:
            raise ValueError("give either tail or cycle, not both")
        if tail is None and cycle is None:
            if not stages:
                raise ValueError("markov policy needs at least one stage kernel")
            tail = stages[-1]
        return cls(cls.MARKOV, stages=list(stages), tail=tail, cycle=cycle)

    @classmethod
    def semi_stationary(cls, table):
        return cls(cls.SEMI_STATIONARY, table=table)

    @classmethod
    def semi_markov(cls, stages, tail=None):
        if tail is None:
            tail = stages[-1]
        return cls(cls.SEMI_MARKOV, stages=list(stages), tail=tail)

    @classmethod
    def history(cls, fn, horizon: int):
        return cls(cls.HISTORY, fn=fn, horizon=horizon)

    # -- structure queries ----------------------------------------------

    @property
    def is_stationary(self) -> bool:
        return self.kind == self.STATIONARY

    @property
    def eventually_stationary(self) -> bool:
        """True when the stage kernels become constant after finitely many stages."""
        if self.kind == self.STATIONARY:
            return True
        if self.kind == self.MARKOV:
            return self.tail is not None
        return False

    def markov_kernel(self, stage: int):
        """Per-state action kernel at the given stage (Markov kinds only)."""
        if self.kind == self.STATIONARY:
            return self.table
        if self.kind == self.MARKOV:
            if stage < len(self.stages):
                return self.stages[stage]
            if self.tail is not None:
                return self.tail
            return self.cycle[(stage - len(self.stages)) % len(self.cycle)]
        raise ValueError(f"{self.kind} policy has no per-stage state kernel")

    def action_dist(self, history: tuple):
        """Action distribution after observing ``history = (x0,a0,...,xn)``."""
        stage = (len(history) - 1) // 2
        x = history[-1]
        if self.kind in (self.STATIONARY, self.MARKOV):
            return self.markov_kernel(stage)[x]
        if self.kind == self.SEMI_STATIONARY:
            x0 = history[0] if stage >= 1 else x
            return self.table[x0][x]
        if self.kind == self.SEMI_MARKOV:
            x0 = history[0]
            table = self.stages[stage] if stage < len(self.stages) else self.tail
            return table[x0][x]
        if self.kind == self.HISTORY:
            if stage > self.horizon:
                raise ValueError(f"history policy defined up to stage {self.horizon}")
            return self.fn(history)
        raise ValueError(f"unknown policy kind {self.kind!r}")

    def __repr__(self):
        return f"Policy(kind={self.kind!r})"


def uniform_stationary(mdp: FiniteMdp) -> Policy:
    """The fixed default kernel: uniform over A(x) at every state."""
    table = [np.full(mdp.n_actions(x), 1.0 / mdp.n_actions(x))
             for x in range(mdp.n_states)]
    return Policy.stationary(table)


# -- drift condition -------------------------------------------------------


class DriftCertificate:
    """Candidate witness (w, beta, b) for the geometric drift inequality."""

    def __init__(self, w, beta: float, b: float):
        self.w = np.asarray(w, dtype=float)
        self.beta = float(beta)
        self.b = float(b)
        if np.any(self.w < 0):
            raise DimensionMismatch("weights w must be nonnegative")
        if not 0.0 <= self.beta < 1.0:
            raise DimensionMismatch("beta must lie in [0, 1)")
        if self.b < 0:
            raise DimensionMismatch("b must be nonnegative")


class DriftReport:
    """Per-state slacks of the two drift inequalities and the implied bound.

    ``drift_slack[x] = beta*w(x) + b - max_a E[w(next)]`` and
    ``cost_slack[x] = w(x) - max_a c^+(x,a)``; the certificate holds iff
    both are >= -1e-12 everywhere, in which case ``bound = b/(1-beta)``
    is a certified upper bound on the optimal gain at every state.
    """

    def __init__(self, drift_slack, cost_slack, bound):
        self.drift_slack = drift_slack
        self.cost_slack = cost_slack
        self.verdict = bool(
            np.all(drift_slack >= -PROB_TOL) and np.all(cost_slack >= -PROB_TOL)
        )
        self.bound = bound if self.verdict else None


def check_drift(mdp: FiniteMdp, cert: DriftCertificate) -> DriftReport:
    """Evaluate the drift certificate on every state of the MDP."""
    if cert.w.shape != (mdp.n_states,):
        raise DimensionMismatch(
            f"certificate has {cert.w.shape} weights for {mdp.n_states} states"
        )
    drift_slack = np.empty(mdp.n_states)
    cost_slack = np.empty(mdp.n_states)
    for x in range(mdp.n_states):
        expected_w = mdp.q_block(x) @ cert.w
        drift_slack[x] = cert.beta * cert.w[x] + cert.b - float(np.max(expected_w))
        cost_slack[x] = cert.w[x] - float(np.max(np.maximum(mdp.cost_block(x), 0.0)))
    bound = cert.b / (1.0 - cert.beta)
    return DriftReport(drift_slack, cost_slack, bound)


# -- cost-model classification ----------------------------------------------

AC_PLUS = "ACplus"
AC_MINUS = "ACminus"
AC_BOTH = "Both"


def classify_cost_model(mdp: FiniteMdp, costs=None) -> str:
    """Classify by the sign pattern of unbounded-cost sentinels.

    Finite MDPs with finite costs always classify as ``Both``.  For
    truncations whose original model carries +/-inf sentinel costs,
    pass the sentinel table via ``costs`` (a list of per-state arrays):
    only +inf present means the negative part is bounded (``ACplus``),
    only -inf means ``ACminus``.

    Raises
    ------
    BothSignsUnbounded
        when both +inf and -inf sentinels occur.
    """
    if costs is None:
        return AC_BOTH
    has_pos = any(np.any(np.isposinf(np.asarray(cx, dtype=float))) for cx in costs)
    has_neg = any(np.any(np.isneginf(np.asarray(cx, dtype=float))) for cx in costs)
    if has_pos and has_neg:
        raise BothSignsUnbounded("cost table carries both +inf and -inf sentinels")
    if has_pos:
        return AC_PLUS
    if has_neg:
        return AC_MINUS
    return AC_BOTH
