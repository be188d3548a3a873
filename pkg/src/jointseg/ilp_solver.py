"""Exact 0-1 integer linear programming for the assignment problem.

    min c.a   s.t.   sum_k coef_k a_{idx_k}  (<= | =)  rhs   for every row,
                     a in {0, 1}^m

The LP relaxation is solved with a bounded-variable revised dual simplex
(sparse LU of the basis with product-form updates); integrality is enforced by best-first
branch-and-bound on the most fractional variable. Independent blocks of the
variable/row incidence graph are solved separately. Among all optimal
assignments the lexicographically smallest one is returned.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from numba import njit
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
INT_TOL = 1e-6
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERATE_RUN = 8  # consecutive degenerate pivots before Bland's rule takes over
BRUTE_FORCE_LIMIT = 25


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class Row:
    indices: np.ndarray
    coefs: np.ndarray
    relation: str  # "le" or "eq"
    rhs: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        coef = np.asarray(self.coefs, dtype=np.float64)
        if idx.shape != coef.shape or idx.ndim != 1:
            raise ValueError("row indices and coefficients must be matching 1-d arrays")
        if self.relation not in ("le", "eq"):
            raise ValueError(f"unknown relation {self.relation!r}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "coefs", coef)
        object.__setattr__(self, "rhs", float(self.rhs))

    def activity(self, a: np.ndarray) -> float:
        return float(self.coefs @ a[self.indices]) if self.indices.size else 0.0

    def satisfied(self, a: np.ndarray, tol: float = FEAS_TOL) -> bool:
        v = self.activity(a)
        if self.relation == "le":
            return v <= self.rhs + tol
        return abs(v - self.rhs) <= tol


@dataclass
class IlpProblem:
    c: np.ndarray
    rows: list[Row] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64).ravel()
        for r in self.rows:
            if r.indices.size and (r.indices.min() < 0 or r.indices.max() >= self.m):
                raise ValueError("row references a variable index outside [0, m)")

    @property
    def m(self) -> int:
        return self.c.size

    def feasible(self, a: np.ndarray, tol: float = FEAS_TOL) -> bool:
        a = np.asarray(a, dtype=np.float64)
        return all(r.satisfied(a, tol) for r in self.rows)

    def objective(self, a: np.ndarray) -> float:
        a = np.asarray(a)
        return math.fsum(self.c[np.flatnonzero(a > 0.5)])

    def matrix(self):
        """Rows as a CSR matrix plus a boolean equality mask and the right-hand sides."""
        data, ind, ptr = [], [], [0]
        for r in self.rows:
            data.append(r.coefs)
            ind.append(r.indices)
            ptr.append(ptr[-1] + r.indices.size)
        a = sparse.csr_matrix((np.concatenate(data) if data else np.zeros(0),
                               np.concatenate(ind) if ind else np.zeros(0, np.int64), ptr),
                              shape=(len(self.rows), self.m))
        a.sum_duplicates()
        eq = np.array([r.relation == "eq" for r in self.rows], dtype=bool)
        b = np.array([r.rhs for r in self.rows], dtype=np.float64)
        return a, eq, b


@dataclass
class IlpSolution:
    assignment: np.ndarray
    objective: float
    node_count: int
    status: str  # "optimal" or "infeasible"


# ---------------------------------------------------------------------------
# LP relaxation


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    reduced_costs: np.ndarray
    basic: np.ndarray  # bool mask over structural variables
    iterations: int


class BoundedSimplex:
    """Revised dual simplex for  min c.x,  A x (<=|=) b,  lo <= x <= hi  (x boxed).

    One logical column per row: a slack in [0, inf) for an inequality, a
    column fixed at 0 for an equality. Starting from the logical basis with
    every structural at the bound its cost favours is dual feasible, so no
    phase one is needed; pivots then remove primal infeasibilities. The
    leaving row is the most infeasible one, the entering column the tightest
    dual ratio (largest pivot among ties); after a run of degenerate pivots
    Bland's rule (smallest indices) takes over until progress resumes.
    """

    def __init__(self, a: sparse.csr_matrix, eq: np.ndarray, b: np.ndarray, c: np.ndarray):
        self.nrow, self.n = a.shape
        self.b = b.astype(np.float64)
        self.c = c.astype(np.float64)
        self.A = sparse.hstack([a, sparse.identity(self.nrow, format="csr")], format="csc")
        self.A.sort_indices()
        self.N = self.A.shape[1]
        self.logical_hi = np.where(eq, 0.0, np.inf)

    def solve(self, lower: np.ndarray, upper: np.ndarray) -> LpResult:
        n = self.n
        lo = np.zeros(self.N)
        hi = np.concatenate([np.asarray(upper, dtype=np.float64), self.logical_hi])
        lo[:n] = lower
        if (lo[:n] > hi[:n] + FEAS_TOL).any():
            raise InfeasibleError("empty variable box")
        cost = np.zeros(self.N)
        cost[:n] = self.c
        at_upper = np.zeros(self.N, dtype=bool)
        at_upper[:n] = (self.c < 0) & (hi[:n] > lo[:n])
        x = np.where(at_upper, hi, lo)
        basis = np.arange(n, self.N, dtype=np.int64)
        state = _SimplexState(self.A, self.b, cost, lo, hi, x, basis, at_upper)
        iters = state.run()
        xs = np.clip(state.x[:n], lower, upper)
        return LpResult(xs, float(self.c @ xs), state.d[:n].copy(), state.is_basic[:n].copy(), iters)


@njit(cache=True)
def _eta_forward(w, k, piv, start, idx, val):
    for i in range(k):
        wp = w[piv[i]]
        if wp != 0.0:
            for t in range(start[i], start[i + 1]):
                w[idx[t]] += val[t] * wp


@njit(cache=True)
def _eta_backward(v, k, piv, start, idx, val):
    for i in range(k - 1, -1, -1):
        s = 0.0
        for t in range(start[i], start[i + 1]):
            s += v[idx[t]] * val[t]
        v[piv[i]] += s


@njit(cache=True)
def _leaving_row(x, lo, hi, basis, bland, tol):
    """Most infeasible basic row (smallest basis index under Bland), -1 if primal feasible."""
    r, worst = -1, tol
    for i in range(basis.size):
        v = basis[i]
        inf = max(lo[v] - x[v], x[v] - hi[v])
        if inf > tol:
            if bland:
                if r < 0 or v < basis[r]:
                    r = i
            elif inf > worst:
                r, worst = i, inf
    return r


@njit(cache=True)
def _pivot_row(indptr, indices, data, rho, is_basic, movable, out):
    """out_j = rho . A_j for nonbasic movable columns, 0 elsewhere."""
    for j in range(out.size):
        out[j] = 0.0
        if is_basic[j] or not movable[j]:
            continue
        s = 0.0
        for t in range(indptr[j], indptr[j + 1]):
            s += data[t] * rho[indices[t]]
        out[j] = s


@njit(cache=True)
def _entering_column(alpha, d, at_upper, is_basic, movable, to_upper, bland, pivot_tol, tol):
    """Dual ratio test on the pivot row; -1 when no column can enter (primal infeasible)."""
    best = np.inf
    for j in range(alpha.size):
        if is_basic[j] or not movable[j]:
            continue
        a = alpha[j] if to_upper else -alpha[j]
        if (not at_upper[j] and a > pivot_tol) or (at_upper[j] and a < -pivot_tol):
            t = max(abs(d[j]), 0.0) / abs(a)
            if t < best:
                best = t
    if not np.isfinite(best):
        return -1
    q = -1
    for j in range(alpha.size):
        if is_basic[j] or not movable[j]:
            continue
        a = alpha[j] if to_upper else -alpha[j]
        if (not at_upper[j] and a > pivot_tol) or (at_upper[j] and a < -pivot_tol):
            if abs(d[j]) / abs(a) <= best + tol:
                if q < 0:
                    q = j
                    if bland:
                        return q
                elif abs(alpha[j]) > abs(alpha[q]):
                    q = j
    return q


@njit(cache=True)
def _diag_positions(indptr, indices):
    n = indptr.size - 1
    out = np.empty(n, np.int64)
    for j in range(n):
        out[j] = -1
        for t in range(indptr[j], indptr[j + 1]):
            if indices[t] == j:
                out[j] = t
    return out


@njit(cache=True)
def _lu_solve(lp, li, lx, ld, up, ui, ux, ud, perm_r, perm_c, b, trans):
    """Solve with Pr A Pc = L U given as CSC factors (A x = b, or A^T x = b if trans)."""
    n = b.size
    w = np.empty(n)
    if not trans:
        for i in range(n):
            w[perm_r[i]] = b[i]
        for j in range(n):  # L w = w
            v = w[j] / lx[ld[j]]
            w[j] = v
            if v != 0.0:
                for t in range(lp[j], lp[j + 1]):
                    if li[t] > j:
                        w[li[t]] -= lx[t] * v
        for j in range(n - 1, -1, -1):  # U w = w
            v = w[j] / ux[ud[j]]
            w[j] = v
            if v != 0.0:
                for t in range(up[j], up[j + 1]):
                    if ui[t] < j:
                        w[ui[t]] -= ux[t] * v
        out = np.empty(n)
        for i in range(n):
            out[i] = w[perm_c[i]]
        return out
    for i in range(n):
        w[perm_c[i]] = b[i]
    for j in range(n):  # U^T w = w
        s = w[j]
        for t in range(up[j], up[j + 1]):
            if ui[t] < j:
                s -= ux[t] * w[ui[t]]
        w[j] = s / ux[ud[j]]
    for j in range(n - 1, -1, -1):  # L^T w = w
        s = w[j]
        for t in range(lp[j], lp[j + 1]):
            if li[t] > j:
                s -= lx[t] * w[li[t]]
        w[j] = s / lx[ld[j]]
    out = np.empty(n)
    for i in range(n):
        out[i] = w[perm_r[i]]
    return out


@njit(cache=True)
def _bound_flipping_ratio_test(alpha, d, at_upper, is_basic, movable, lo, hi, to_upper, infeasibility,
                               pivot_tol):
    """Long-step dual ratio test.

    Breakpoints are passed in ratio order while the dual objective still
    improves; every passed column flips to its opposite bound and the column
    at the stopping breakpoint enters. Returns (entering column or -1, flips).
    """
    n = alpha.size
    cand = np.empty(n, np.int64)
    ratio = np.empty(n)
    k = 0
    for j in range(n):
        if is_basic[j] or not movable[j]:
            continue
        a = alpha[j] if to_upper else -alpha[j]
        if (not at_upper[j] and a > pivot_tol) or (at_upper[j] and a < -pivot_tol):
            cand[k] = j
            ratio[k] = abs(d[j]) / abs(a)
            k += 1
    flips = np.empty(0, np.int64)
    if k == 0:
        return -1, flips
    order = np.argsort(ratio[:k], kind="mergesort")
    slope = infeasibility
    for t in range(k):
        j = cand[order[t]]
        width = hi[j] - lo[j]
        drop = abs(alpha[j]) * width
        if np.isfinite(width) and slope - drop > 0.0 and t + 1 < k:
            slope -= drop
            continue
        flips = cand[order[:t]].copy()
        return j, flips
    return -1, flips


class _BasisFactor:
    """Sparse LU of the basis at the last refactorization plus product-form updates.

    After k pivots B^-1 = E_k ... E_1 B0^-1, where E_i = I + eta_i e_p^T only
    changes component p; the eta vectors are kept sparse in flat arrays.
    """

    def __init__(self, B: sparse.csc_matrix, capacity: int):
        self.nrow = B.shape[0]
        lu = splu(B, permc_spec="COLAMD")
        L, U = lu.L.tocsc(), lu.U.tocsc()
        self.factors = (L.indptr, L.indices, L.data, _diag_positions(L.indptr, L.indices),
                        U.indptr, U.indices, U.data, _diag_positions(U.indptr, U.indices),
                        lu.perm_r, lu.perm_c)
        self.k = 0
        self.piv = np.zeros(capacity, np.int64)
        self.start = np.zeros(capacity + 1, np.int64)
        self.idx = np.zeros(16, np.int64)
        self.val = np.zeros(16)

    def ftran(self, rhs: np.ndarray) -> np.ndarray:
        w = _lu_solve(*self.factors, rhs, False)
        _eta_forward(w, self.k, self.piv, self.start, self.idx, self.val)
        return w

    def btran(self, rhs: np.ndarray) -> np.ndarray:
        v = rhs.astype(np.float64, copy=True)
        _eta_backward(v, self.k, self.piv, self.start, self.idx, self.val)
        return _lu_solve(*self.factors, v, True)

    def update(self, p: int, alpha: np.ndarray):
        eta = -alpha / alpha[p]
        eta[p] = 1.0 / alpha[p] - 1.0
        nz = np.flatnonzero(eta)
        lo = self.start[self.k]
        hi = lo + nz.size
        if hi > self.idx.size:
            grow = max(hi, 2 * self.idx.size)
            self.idx = np.resize(self.idx, grow)
            self.val = np.resize(self.val, grow)
        self.idx[lo:hi] = nz
        self.val[lo:hi] = eta[nz]
        self.piv[self.k] = p
        self.k += 1
        self.start[self.k] = hi


class _SimplexState:
    def __init__(self, A, b, cost, lo, hi, x, basis, at_upper):
        self.A, self.b, self.cost = A, b, cost
        self.lo, self.hi, self.x = lo, hi, x
        self.basis = basis
        self.nrow = basis.size
        self.at_upper = at_upper
        self.is_basic = np.zeros(A.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.movable = hi - lo > FEAS_TOL
        self.refactor()

    def refactor(self):
        """Fresh factorization; basic values and reduced costs recomputed from scratch."""
        nb = ~self.is_basic
        self.x[nb] = np.where(self.at_upper[nb], self.hi[nb], self.lo[nb])
        if self.nrow == 0:
            self.d = self.cost.copy()
            return
        self.factor = _BasisFactor(self.A[:, self.basis].tocsc(), REFACTOR_EVERY + 1)
        xn = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = self.factor.ftran(self.b - self.A @ xn)
        y = self.factor.btran(self.cost[self.basis])
        self.d = self.cost - self.A.T @ y
        self.d[self.is_basic] = 0.0

    def _restore_dual_feasibility(self) -> bool:
        """Move boxed nonbasics whose reduced cost drifted to the wrong sign; True if any moved."""
        nb = ~self.is_basic & self.movable
        wrong = nb & (((~self.at_upper) & (self.d < -OPT_TOL)) | (self.at_upper & (self.d > OPT_TOL)))
        if not wrong.any():
            return False
        if not np.isfinite(self.hi[wrong]).all():
            raise RuntimeError("lost dual feasibility on an unbounded column")
        self.at_upper[wrong] = ~self.at_upper[wrong]
        self.refactor()
        return True

    def run(self) -> int:
        lo, hi, x = self.lo, self.hi, self.x
        alpha_row = np.zeros(self.A.shape[1])
        bland = False
        degenerate_run = 0
        it = 0
        limit = 50 * (self.nrow + x.size) + 1000
        while True:
            it += 1
            if it > limit:
                raise RuntimeError("simplex iteration limit exceeded")
            if self.nrow and self.factor.k >= REFACTOR_EVERY:
                self.refactor()
            r = _leaving_row(x, lo, hi, self.basis, bland, FEAS_TOL) if self.nrow else -1
            if r < 0:
                # confirm on a fresh factorization before declaring optimality
                if self.nrow and self.factor.k:
                    self.refactor()
                    if self._restore_dual_feasibility() or _leaving_row(x, lo, hi, self.basis, bland,
                                                                          FEAS_TOL) >= 0:
                        continue
                elif self._restore_dual_feasibility():
                    continue
                return it
            leave = self.basis[r]
            to_upper = x[leave] > hi[leave]
            e = np.zeros(self.nrow)
            e[r] = 1.0
            rho = self.factor.btran(e)
            _pivot_row(self.A.indptr, self.A.indices, self.A.data, rho, self.is_basic, self.movable, alpha_row)
            infeasibility = x[leave] - hi[leave] if to_upper else lo[leave] - x[leave]
            if bland:
                q = int(_entering_column(alpha_row, self.d, self.at_upper, self.is_basic, self.movable,
                                         to_upper, bland, PIVOT_TOL, OPT_TOL))
                flips = None
            else:
                q, flips = _bound_flipping_ratio_test(alpha_row, self.d, self.at_upper, self.is_basic,
                                                      self.movable, lo, hi, to_upper, infeasibility, PIVOT_TOL)
                q = int(q)
            if q < 0:
                raise InfeasibleError("LP relaxation is infeasible")
            if flips is not None and flips.size:
                new = np.where(self.at_upper[flips], lo[flips], hi[flips])
                delta = self.A[:, flips] @ (new - x[flips])
                x[flips] = new
                self.at_upper[flips] = ~self.at_upper[flips]
                x[self.basis] -= self.factor.ftran(delta)
            col = np.zeros(self.nrow)
            col[self.A.indices[self.A.indptr[q]:self.A.indptr[q + 1]]] = \
                self.A.data[self.A.indptr[q]:self.A.indptr[q + 1]]
            alpha_q = self.factor.ftran(col)
            target = hi[leave] if to_upper else lo[leave]
            step = (x[leave] - target) / alpha_q[r]
            theta_d = self.d[q] / alpha_row[q]
            # primal update
            x[self.basis] -= step * alpha_q
            x[q] += step
            x[leave] = target
            # dual update
            self.d -= theta_d * alpha_row
            self.d[q] = 0.0
            self.d[leave] = -theta_d
            self.is_basic[leave] = False
            self.at_upper[leave] = to_upper
            self.is_basic[q] = True
            self.at_upper[q] = False
            self.basis[r] = q
            self.factor.update(r, alpha_q)
            if abs(theta_d) <= OPT_TOL:
                degenerate_run += 1
                if degenerate_run > DEGENERATE_RUN:
                    bland = True
            else:
                degenerate_run = 0
                bland = False


def lp_relax(p: IlpProblem, lower=None, upper=None) -> tuple[np.ndarray, float]:
    """Optimal point and value of the LP relaxation with 0 <= a <= 1."""
    res = _lp_result(p, lower, upper)
    return res.x, res.objective


def _lp_result(p: IlpProblem, lower=None, upper=None) -> LpResult:
    lower = np.zeros(p.m) if lower is None else np.asarray(lower, dtype=np.float64)
    upper = np.ones(p.m) if upper is None else np.asarray(upper, dtype=np.float64)
    a, eq, b = p.matrix()
    return BoundedSimplex(a, eq, b, p.c).solve(lower, upper)


# ---------------------------------------------------------------------------
# branch and bound


class _Search:
    def __init__(self, p: IlpProblem, node_budget: int):
        self.p = p
        a, eq, b = p.matrix()
        self.simplex = BoundedSimplex(a, eq, b, p.c)
        self.node_budget = node_budget
        self.nodes = 0

    def lp(self, lower, upper) -> LpResult | None:
        try:
            return self.simplex.solve(lower, upper)
        except InfeasibleError:
            return None

    def integral(self, res: LpResult) -> np.ndarray | None:
        r = np.rint(res.x)
        if np.abs(res.x - r).max(initial=0.0) > INT_TOL:
            return None
        r = r.astype(np.int8)
        return r if self.p.feasible(r) else None

    def run(self, lower, upper, cutoff=math.inf, first_only=False, root=None):
        """Best 0/1 point with objective < ``cutoff`` inside the box, or None.

        Nodes whose bound cannot beat the incumbent by more than OPT_TOL are
        pruned. Best-first order; once the open list outgrows the node budget
        the search continues depth-first, which still proves optimality.
        """
        best, best_obj = None, cutoff
        res = root if root is not None else self.lp(lower, upper)
        if res is None or res.objective >= best_obj - OPT_TOL:
            return None, best_obj
        counter = itertools.count()
        heap = [(res.objective, next(counter), lower, upper, res)]
        stack: list = []
        while heap or stack:
            if stack:
                bound, _, lo, hi, res = stack.pop()
            else:
                bound, _, lo, hi, res = heapq.heappop(heap)
            if bound >= best_obj - OPT_TOL:
                continue
            sol = self.integral(res)
            if sol is not None:
                obj = self.p.objective(sol)
                if obj < best_obj - OPT_TOL:
                    best, best_obj = sol, obj
                    if first_only:
                        break
                continue
            frac = np.abs(res.x - 0.5)
            free = hi - lo > 0.5
            frac[~free] = np.inf
            j = int(np.argmin(frac))
            if not np.isfinite(frac[j]):
                continue
            children = []
            for val in (0.0, 1.0):
                clo, chi = lo.copy(), hi.copy()
                clo[j] = chi[j] = val
                self.nodes += 1
                cres = self.lp(clo, chi)
                if cres is not None and cres.objective < best_obj - OPT_TOL:
                    children.append((cres.objective, next(counter), clo, chi, cres))
            if stack or len(heap) > self.node_budget:
                # depth-first: explore the better child first
                stack.extend(sorted(children, key=lambda n: (-n[0], -n[1])))
            else:
                for ch in children:
                    heapq.heappush(heap, ch)
        return best, best_obj


def _solve_block(p: IlpProblem, node_budget: int) -> tuple[np.ndarray | None, int]:
    m = p.m
    search = _Search(p, node_budget)
    lower, upper = np.zeros(m), np.ones(m)
    root = search.lp(lower, upper)
    if root is None:
        return None, 0
    best, z = search.run(lower, upper, root=root)
    if best is None:
        return None, search.nodes
    # Lexicographic tie-break: walk the variables in order and keep a_j = 0
    # whenever some optimal solution agrees with the prefix fixed so far.
    unique = search.integral(root) is not None and _dual_nondegenerate(root, lower, upper)
    if not unique:
        lo, hi = lower.copy(), upper.copy()
        for j in range(m):
            if best[j] == 0:
                hi[j] = 0.0
                continue
            if (not root.basic[j]) and root.objective - root.reduced_costs[j] > z + OPT_TOL:
                lo[j] = 1.0
                continue
            tlo, thi = lo.copy(), hi.copy()
            thi[j] = 0.0
            alt, _ = search.run(tlo, thi, cutoff=z + 2 * OPT_TOL, first_only=True)
            if alt is not None:
                best = alt
                hi[j] = 0.0
            else:
                lo[j] = 1.0
    return best, search.nodes


def _dual_nondegenerate(res: LpResult, lower, upper) -> bool:
    """Unique LP optimum: every movable nonbasic variable has a nonzero reduced cost."""
    nb = ~res.basic & (upper - lower > 0.5)
    return bool((np.abs(res.reduced_costs[nb]) > OPT_TOL).all())


def blocks(p: IlpProblem) -> list[np.ndarray]:
    """Variable index sets of the connected components of the variable/row incidence graph."""
    m, r = p.m, len(p.rows)
    if m == 0:
        return []
    ri = np.concatenate([np.full(row.indices.size, m + k) for k, row in enumerate(p.rows)] or [np.zeros(0, int)])
    ci = np.concatenate([row.indices for row in p.rows] or [np.zeros(0, int)])
    g = sparse.coo_matrix((np.ones(ri.size), (ri, ci)), shape=(m + r, m + r))
    _, lab = connected_components(g, directed=False)
    var_lab = lab[:m]
    order = np.argsort(var_lab, kind="stable")
    cuts = np.flatnonzero(np.diff(var_lab[order])) + 1
    return sorted(np.split(order, cuts), key=lambda idx: int(idx[0]))


def subproblem(p: IlpProblem, idx: np.ndarray) -> IlpProblem:
    """Restriction to the variables ``idx``; rows touching none of them are dropped."""
    local = np.full(p.m, -1, np.int64)
    local[idx] = np.arange(idx.size)
    rows = []
    for r in p.rows:
        li = local[r.indices]
        keep = li >= 0
        if keep.any():
            rows.append(Row(li[keep], r.coefs[keep], r.relation, r.rhs))
    return IlpProblem(p.c[idx], rows)


def solve_ilp(p: IlpProblem, node_budget: int = 10000) -> IlpSolution:
    m = p.m
    out = np.zeros(m, np.int8)
    nodes = 0
    # rows without variables still have to hold for the all-free vector
    for r in p.rows:
        if r.indices.size == 0 and not r.satisfied(np.zeros(0)):
            return IlpSolution(out, math.inf, 0, "infeasible")
    for idx in blocks(p):
        sub = subproblem(p, idx)
        if not sub.rows:
            out[idx] = (sub.c < -OPT_TOL).astype(np.int8)
            continue
        sol, k = _solve_block(sub, node_budget)
        nodes += k
        if sol is None:
            return IlpSolution(np.zeros(m, np.int8), math.inf, nodes, "infeasible")
        out[idx] = sol
    return IlpSolution(out, p.objective(out), nodes, "optimal")


def brute_force_ilp(p: IlpProblem) -> IlpSolution:
    """Exhaustive scan of all 2^m assignments in lexicographic order."""
    m = p.m
    if m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to m <= {BRUTE_FORCE_LIMIT}, got {m}")
    a, eq, b = p.matrix()
    dense = a.toarray()
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    best_val, best_k = math.inf, -1
    chunk = 1 << 16
    total = 1 << m
    vals = []
    for start in range(0, total, chunk):
        k = np.arange(start, min(total, start + chunk), dtype=np.int64)
        bits = ((k[:, None] >> shifts[None, :]) & 1).astype(np.float64)
        act = bits @ dense.T
        ok = np.ones(k.size, dtype=bool)
        if len(p.rows):
            ok &= np.where(eq[None, :], np.abs(act - b) <= FEAS_TOL, act <= b + FEAS_TOL).all(axis=1)
        obj = bits @ p.c
        obj[~ok] = np.inf
        vals.append(obj)
    obj = np.concatenate(vals) if vals else np.zeros(1)
    if m == 0:
        return IlpSolution(np.zeros(0, np.int8), 0.0, 0, "optimal")
    best_val = obj.min()
    if not np.isfinite(best_val):
        return IlpSolution(np.zeros(m, np.int8), math.inf, 0, "infeasible")
    # exact objectives of the near-optimal candidates, then the first (lexicographically smallest)
    near = np.flatnonzero(obj <= best_val + 1e-6)
    exact = [p.objective((int(k) >> shifts) & 1) for k in near]
    z = min(exact)
    best_k = next(int(k) for k, v in zip(near, exact) if v <= z + OPT_TOL)
    x = ((best_k >> shifts) & 1).astype(np.int8)
    return IlpSolution(x, p.objective(x), 0, "optimal")
