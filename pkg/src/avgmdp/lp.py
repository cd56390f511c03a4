"""Occupation-measure linear programs for average-cost chains.

For a chain with transition probabilities p_jk and positive weights b_k
summing to 1, the program has variables (gamma, nu) >= 0 and equality
constraints

    gamma(k) - sum_j p_jk gamma(j)         = 0      for all k,
    gamma(k) + nu(k) - sum_j p_jk nu(j)    = b_k    for all k.

Any feasible gamma is an invariant probability measure of the chain;
on truncations of the absorbing chain with beta_j = 1/(j+1) the nu mass
grows without bound as the truncation level rises, which is the
finite-scale signature of the infeasibility of the infinite program.

The solver is a dense two-phase simplex with Bland's rule, a Farkas
certificate on infeasibility, and an exact-rational mode for small
instances.
"""

import csv
import io
import os
from fractions import Fraction

import numpy as np

from .chains import MarkovChain, induced_chain
from .errors import NumericalStall, WeightError
from .model import CountableMdp, truncate, uniform_stationary

FLOAT_MODE = "float"
EXACT_MODE = "exact"

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"

#: simplex pivot cap
PIVOT_CAP = 10**6


class LpProgram:
    """Equality-constrained LP in the stacked variables (gamma, nu) >= 0."""

    def __init__(self, a, rhs, n_states):
        self.a = np.asarray(a, dtype=float)
        self.rhs = np.asarray(rhs, dtype=float)
        self.n_states = n_states

    @property
    def n_vars(self):
        return self.a.shape[1]


def build_lp(chain: MarkovChain, b) -> LpProgram:
    """Constraint rows of the occupation-measure program for a chain."""
    b = np.asarray(b, dtype=float)
    n = chain.n_states
    if b.shape != (n,):
        raise WeightError(f"need one weight per state, got shape {b.shape}")
    if np.any(b <= 0.0):
        raise WeightError("weights must be strictly positive")
    if abs(float(b.sum()) - 1.0) > 1e-12:
        raise WeightError(f"weights sum to {b.sum()!r}, need 1")

    eye = np.eye(n)
    flow = eye - chain.p.T
    a = np.zeros((2 * n, 2 * n))
    a[:n, :n] = flow
    a[n:, :n] = eye
    a[n:, n:] = flow
    rhs = np.concatenate([np.zeros(n), b])
    return LpProgram(a, rhs, n)


class LpOutcome:
    """Solver verdict: a feasible (gamma, nu) with objective value, or a
    Farkas vector y with y'A <= 0 on all variable columns and y'rhs > 0."""

    def __init__(self, status, gamma=None, nu=None, objective=None,
                 certificate=None, pivots=0, mode=FLOAT_MODE):
        self.status = status
        self.gamma = gamma
        self.nu = nu
        self.objective = objective
        self.certificate = certificate
        self.pivots = pivots
        self.mode = mode

    @property
    def feasible(self):
        return self.status == FEASIBLE


class _FloatTableau:
    """Dense numpy tableau (rows x [vars | artificials | rhs])."""

    tol = 1e-9

    def __init__(self, a, rhs):
        a = np.asarray(a, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        self.m, self.n = a.shape
        self.row_sign = np.where(rhs < 0.0, -1.0, 1.0)
        a = a * self.row_sign[:, None]
        rhs = rhs * self.row_sign
        self.t = np.hstack([a, np.eye(self.m), rhs[:, None]])
        self.basis = list(range(self.n, self.n + self.m))

    def pivot(self, r, col):
        t = self.t
        t[r] /= t[r, col]
        factors = t[:, col].copy()
        factors[r] = 0.0
        t -= np.outer(factors, t[r])
        self.basis[r] = col

    def reduced(self, cost):
        cb = cost[np.asarray(self.basis)]
        z = cb @ self.t
        return cost - z[:-1], float(z[-1])

    def column(self, j):
        return self.t[:, j]

    def rhs_col(self):
        return self.t[:, -1]

    def make_cost(self, var_part, art_value):
        return np.concatenate([np.asarray(var_part, dtype=float),
                               np.full(self.m, float(art_value))])


class _ExactTableau:
    """The same tableau over exact Fractions (lists of lists)."""

    tol = Fraction(0)

    def __init__(self, a, rhs):
        conv = lambda v: v if isinstance(v, Fraction) else Fraction(float(v))
        rows = [[conv(v) for v in row] for row in np.asarray(a)]
        b = [conv(v) for v in np.asarray(rhs)]
        self.m, self.n = len(rows), len(rows[0])
        self.row_sign = []
        for i in range(self.m):
            if b[i] < 0:
                rows[i] = [-v for v in rows[i]]
                b[i] = -b[i]
                self.row_sign.append(-1)
            else:
                self.row_sign.append(1)
        self.t = []
        for i in range(self.m):
            art = [Fraction(0)] * self.m
            art[i] = Fraction(1)
            self.t.append(rows[i] + art + [b[i]])
        self.basis = list(range(self.n, self.n + self.m))

    def pivot(self, r, col):
        t = self.t
        inv = 1 / t[r][col]
        t[r] = [v * inv for v in t[r]]
        prow = t[r]
        for i in range(self.m):
            if i == r:
                continue
            f = t[i][col]
            if f != 0:
                t[i] = [u - f * v for u, v in zip(t[i], prow)]
        self.basis[r] = col

    def reduced(self, cost):
        width = self.n + self.m
        z = [Fraction(0)] * (width + 1)
        for i in range(self.m):
            cb = cost[self.basis[i]]
            if cb != 0:
                row = self.t[i]
                for j in range(width + 1):
                    z[j] += cb * row[j]
        return [cost[j] - z[j] for j in range(width)], z[width]

    def column(self, j):
        return [row[j] for row in self.t]

    def rhs_col(self):
        return [row[-1] for row in self.t]

    def make_cost(self, var_part, art_value):
        return ([v if isinstance(v, Fraction) else Fraction(float(v))
                 for v in var_part] + [Fraction(art_value)] * self.m)


class _Simplex:
    """Two-phase simplex with Bland's rule over either tableau."""

    def __init__(self, a, rhs, exact: bool, pivot_cap: int):
        self.tab = _ExactTableau(a, rhs) if exact else _FloatTableau(a, rhs)
        self.pivot_cap = pivot_cap
        self.pivots = 0

    def _run(self, cost, n_allowed):
        """Bland iterations; only the first n_allowed columns may enter."""
        tab = self.tab
        while True:
            reduced, obj = tab.reduced(cost)
            enter = -1
            for j in range(n_allowed):
                if reduced[j] < -tab.tol:
                    enter = j
                    break
            if enter < 0:
                return obj
            col = tab.column(enter)
            rhs = tab.rhs_col()
            leave = -1
            best = None
            for i in range(tab.m):
                if col[i] > tab.tol:
                    ratio = rhs[i] / col[i]
                    if (best is None or ratio < best
                            or (ratio == best and tab.basis[i] < tab.basis[leave])):
                        best = ratio
                        leave = i
            if leave < 0:
                raise NumericalStall("unbounded direction in simplex phase")
            tab.pivot(leave, enter)
            self.pivots += 1
            if self.pivots > self.pivot_cap:
                raise NumericalStall(f"simplex exceeded {self.pivot_cap} pivots")

    def solve(self, objective):
        """Returns (status, x, objective_value, certificate)."""
        tab = self.tab
        width = tab.n + tab.m
        cost1 = tab.make_cost([0] * tab.n, 1)
        obj1 = self._run(cost1, width)
        if obj1 > tab.tol:
            reduced, _ = tab.reduced(cost1)
            # phase-1 duals off the artificial columns: y_i = 1 - r(art_i),
            # mapped back through the row-normalization signs
            y = [tab.row_sign[i] * (1 - reduced[tab.n + i]) for i in range(tab.m)]
            return INFEASIBLE, None, None, y

        # drive basic artificials out; rows that cannot pivot are redundant
        for i in range(tab.m):
            if tab.basis[i] >= tab.n:
                row = tab.t[i]
                for j in range(tab.n):
                    if abs(row[j]) > tab.tol:
                        tab.pivot(i, j)
                        self.pivots += 1
                        break

        cost2 = tab.make_cost(objective, 0)
        obj2 = self._run(cost2, tab.n)
        x = [0.0] * tab.n
        rhs = tab.rhs_col()
        for i in range(tab.m):
            if tab.basis[i] < tab.n:
                x[tab.basis[i]] = rhs[i]
        return FEASIBLE, x, obj2, None


def solve_lp(lp: LpProgram, objective=None, mode: str = FLOAT_MODE,
             pivot_cap: int = PIVOT_CAP) -> LpOutcome:
    """Decide feasibility and optimize; default objective is min sum(nu).

    Raises
    ------
    NumericalStall
        when the pivot cap is exceeded or the solution fails the
        feasibility tolerances (equalities within 1e-8, variables
        >= -1e-10).
    """
    n = lp.n_states
    if objective is None:
        objective = [0.0] * n + [1.0] * n
    exact = mode == EXACT_MODE
    sx = _Simplex(lp.a, lp.rhs, exact, pivot_cap)
    status, x, obj, cert = sx.solve(objective)

    if status == INFEASIBLE:
        return LpOutcome(INFEASIBLE, certificate=np.asarray([float(v) for v in cert]),
                         pivots=sx.pivots, mode=mode)

    xf = np.asarray([float(v) for v in x])
    residual = lp.a @ xf - lp.rhs
    if np.max(np.abs(residual)) > 1e-8 or np.min(xf) < -1e-10:
        raise NumericalStall("solution violates feasibility tolerances")
    return LpOutcome(FEASIBLE, gamma=xf[:n], nu=xf[n:], objective=float(obj),
                     pivots=sx.pivots, mode=mode)


# -- truncation sweep ---------------------------------------------------------


def weight_scheme(name: str, n: int) -> np.ndarray:
    """Positive weights over n states: 'geometric' (2^-k-1, renormalized)
    or 'uniform'."""
    if name == "geometric":
        w = 0.5 ** np.arange(1, n + 1)
    elif name == "uniform":
        w = np.ones(n)
    else:
        raise WeightError(f"unknown weight scheme {name!r}")
    return w / w.sum()


class TruncationStudy:
    """Growth table of the minimal nu mass across truncation levels.

    ``rows`` holds one dict per truncation level with keys K, status,
    min_mass, pivots, mode.  ``chain_bound_ok`` confirms that every
    feasible solution obeyed nu(k) >= prod_j p_{j,j+1} * nu(1) - 1e-8
    (the chained lower bound read off the chain itself);
    ``doubling_gaps`` lists min_mass(2K) - min_mass(K) for consecutive
    doubled levels, and ``diverges`` is set only when at least four
    doublings keep those gaps positive.
    """

    def __init__(self, rows, chain_bound_ok, doubling_gaps):
        self.rows = rows
        self.chain_bound_ok = chain_bound_ok
        self.doubling_gaps = doubling_gaps
        self.diverges = (len(doubling_gaps) >= 4
                         and all(g > 1e-10 for g in doubling_gaps))

    def min_masses(self):
        return [r["min_mass"] for r in self.rows]

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, bytes, os.PathLike))
        f = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["K", "status", "min_mass", "pivots", "mode"])
            for r in self.rows:
                mm = "" if r["min_mass"] is None else repr(r["min_mass"])
                w.writerow([r["K"], r["status"], mm, r["pivots"], r["mode"]])
        finally:
            if own:
                f.close()

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def truncation_study(countable: CountableMdp, Ks, b_scheme: str = "geometric",
                     mode: str = FLOAT_MODE) -> TruncationStudy:
    """Solve the min-sum(nu) program on a sweep of truncation levels.

    ``Ks`` must be increasing.  For each level the countable model is
    truncated, its (single-policy) chain assembled, and the program
    solved; the study then checks the chained per-state lower bound on
    nu and flags log-growth-consistent divergence of the total mass.
    """
    Ks = list(Ks)
    if any(k2 <= k1 for k1, k2 in zip(Ks, Ks[1:])):
        raise WeightError("truncation levels must be increasing")

    rows = []
    bound_ok = True
    masses = {}
    for K in Ks:
        mdp = truncate(countable, K)
        chain = induced_chain(mdp, uniform_stationary(mdp))
        lp = build_lp(chain, weight_scheme(b_scheme, K + 1))
        out = solve_lp(lp, mode=mode)
        if out.feasible:
            masses[K] = out.objective
            prod = 1.0
            for k in range(2, K + 1):
                prod *= chain.p[k - 1, k]
                if out.nu[k] < prod * out.nu[1] - 1e-8:
                    bound_ok = False
        rows.append({
            "K": K,
            "status": out.status,
            "min_mass": out.objective if out.feasible else None,
            "pivots": out.pivots,
            "mode": mode,
        })

    gaps = [masses[k2] - masses[k1] for k1, k2 in zip(Ks, Ks[1:])
            if k2 == 2 * k1 and k1 in masses and k2 in masses]
    return TruncationStudy(rows, bound_ok, gaps)
