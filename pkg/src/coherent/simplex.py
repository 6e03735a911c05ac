"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Pricing is most-negative reduced cost while the objective improves; any
degenerate pivot hands control to Bland's smallest-index rule until the
objective moves again, which rules out cycling.

General LPs (any mix of <=, =, >= rows, finite or infinite variable bounds,
min or max) are reduced to ``min c'x, Ax = b, x >= 0, b >= 0`` internally.
Row multipliers are recovered from the final basis and reported for the
original problem, so that at an optimum ``value = b . duals`` plus the
contribution of finite variable bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

RELATIONS = ("<=", "=", ">=")


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    relations: tuple
    lower: np.ndarray
    upper: np.ndarray
    sense: str = "min"
    labels: tuple = ()
    row_labels: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.asarray(self.A, dtype=float).reshape(-1, c.size)
        b = np.asarray(self.b, dtype=float)
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        m, n = A.shape
        if b.shape != (m,) or len(self.relations) != m:
            raise ValueError("row count mismatch between A, b and relations")
        if lower.shape != (n,) or upper.shape != (n,):
            raise ValueError("bounds must have one entry per column")
        if any(r not in RELATIONS for r in self.relations):
            raise ValueError(f"relations must be among {RELATIONS}")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        labels = tuple(self.labels) or tuple(f"x{j}" for j in range(n))
        row_labels = tuple(self.row_labels) or tuple(f"r{i}" for i in range(m))
        if len(labels) != n or len(set(labels)) != n:
            raise ValueError("column labels must be unique, one per column")
        if len(row_labels) != m:
            raise ValueError("one row label per row")
        for name, val in (("c", c), ("A", A), ("b", b), ("lower", lower),
                          ("upper", upper), ("labels", labels), ("row_labels", row_labels),
                          ("relations", tuple(self.relations))):
            object.__setattr__(self, name, val)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    @classmethod
    def build(cls, c, A, b, relations, lower=None, upper=None, sense="min",
              labels=(), row_labels=()) -> "LinearProgram":
        """Convenience constructor: bounds default to ``0 <= x < inf``."""
        n = len(c)
        lower = np.zeros(n) if lower is None else lower
        upper = np.full(n, np.inf) if upper is None else upper
        if isinstance(relations, str):
            relations = (relations,) * len(b)
        return cls(c, A, b, tuple(relations), lower, upper, sense, tuple(labels), tuple(row_labels))


@dataclass(frozen=True)
class LpSolution:
    status: str  # optimal / infeasible / unbounded
    value: float
    x: np.ndarray
    duals: np.ndarray
    iterations: int
    basis: tuple = ()
    primal_residual: float = float("nan")
    slackness_residual: float = float("nan")
    labels: tuple = field(default=(), repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def by_label(self) -> dict:
        return dict(zip(self.labels, self.x))


@dataclass(frozen=True)
class SolverOptions:
    pivot_tol: float = 1e-11
    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-11
    max_iterations: int = 200_000
    refactor_every: int = 50


class _Tableau:
    """Tableau rows ``B^-1 [A | b]`` plus reduced costs for a given cost vector."""

    def __init__(self, M: np.ndarray, rhs: np.ndarray, basis: list[int], opts: SolverOptions):
        self.A = M.copy()  # original rows, kept for refactorization
        self.b = rhs.copy()
        self.M = M
        self.rhs = rhs
        self.basis = basis
        self.opts = opts
        self.iterations = 0

    def restrict(self, rows: np.ndarray, ncols: int) -> None:
        self.A = self.A[rows][:, :ncols].copy()
        self.b = self.b[rows].copy()
        self.M = self.M[rows][:, :ncols].copy()
        self.rhs = self.rhs[rows].copy()
        self.basis = [self.basis[r] for r in rows]

    def refactor(self) -> None:
        """Rebuild B^-1 A and B^-1 b from the original rows to shed round-off."""
        B = self.A[:, self.basis]
        try:
            self.M = np.linalg.solve(B, self.A)
            self.rhs = np.linalg.solve(B, self.b)
        except np.linalg.LinAlgError:
            return
        self.M[np.abs(self.M) < 1e-14] = 0.0
        self.rhs[np.abs(self.rhs) < self.opts.feasibility_tol * 1e-3] = 0.0
        self.set_costs(self.cost)

    def set_costs(self, cost: np.ndarray) -> None:
        self.cost = cost
        cb = cost[self.basis]
        self.d = cost - cb @ self.M
        self.z = float(cb @ self.rhs)

    def pivot(self, r: int, j: int) -> None:
        M = self.M
        piv = M[r, j]
        M[r] /= piv
        self.rhs[r] /= piv
        col = M[:, j].copy()
        col[r] = 0.0
        M -= np.outer(col, M[r])
        self.rhs -= col * self.rhs[r]
        M[:, j] = 0.0
        M[r, j] = 1.0
        dj = self.d[j]
        self.d -= dj * M[r]
        self.d[j] = 0.0
        self.z += dj * self.rhs[r]
        self.basis[r] = j
        self.iterations += 1
        np.maximum(self.rhs, 0.0, out=self.rhs)
        if self.iterations % self.opts.refactor_every == 0:
            self.refactor()

    def ratio_row(self, j: int) -> int | None:
        """Two-pass (Harris) ratio test.

        The first pass finds the largest step that keeps every basic variable
        above -feasibility_tol; the second picks, among rows blocking within
        that step, the largest pivot element (lowest basic index on ties).
        """
        col = self.M[:, j]
        rows = np.nonzero(col > self.opts.pivot_tol)[0]
        if rows.size == 0:
            return None
        rhs = np.maximum(self.rhs[rows], 0.0)
        piv = col[rows]
        limit = ((rhs + self.opts.feasibility_tol) / piv).min()
        blocking = rhs / piv <= limit
        cand = rows[blocking]
        size = piv[blocking]
        top = size.max()
        cand = cand[size >= top * (1 - 1e-9)]
        return int(min(cand, key=lambda i: self.basis[i]))

    def run(self, allowed: np.ndarray, callback=None) -> str:
        """Price with the most negative reduced cost; after a degenerate pivot
        switch to Bland's smallest-index rule until the objective moves again,
        so that no basis can repeat."""
        tol = self.opts.optimality_tol
        bland = False
        while True:
            candidates = np.nonzero((self.d < -tol) & allowed)[0]
            if candidates.size == 0:
                return "optimal"
            if bland:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmin(self.d[candidates])])
            r = self.ratio_row(j)
            if r is None:
                return "unbounded"
            before = self.z
            self.pivot(r, j)
            bland = self.z >= before - 1e-14 * max(1.0, abs(before))
            if callback is not None:
                callback(self)
            if self.iterations > self.opts.max_iterations:
                raise SolverError("iteration limit reached")


def _standard_form(lp: LinearProgram):
    """Map ``lp`` to min c's x', A' x' = b' >= 0, x' >= 0 (slacks included)."""
    m, n = lp.shape
    cols = []  # (original index, sign)
    shift = np.zeros(n)
    bound_rows = []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    T = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        T[j, k] = s
    sign = -1.0 if lp.sense == "max" else 1.0
    cost = sign * (lp.c @ T)
    const = sign * float(lp.c @ shift)

    A = lp.A @ T
    b = lp.b - lp.A @ shift
    rels = list(lp.relations)
    if bound_rows:
        extra = np.zeros((len(bound_rows), len(cols)))
        for r, (k, width) in enumerate(bound_rows):
            extra[r, k] = 1.0
        A = np.vstack([A, extra])
        b = np.concatenate([b, [w for _, w in bound_rows]])
        rels += ["<="] * len(bound_rows)

    row_sign = np.where(b < 0, -1.0, 1.0)
    A = A * row_sign[:, None]
    b = b * row_sign
    flip = {"<=": ">=", ">=": "<=", "=": "="}
    rels = [flip[r] if s < 0 else r for r, s in zip(rels, row_sign)]

    n_struct = len(cols)
    n_slack = sum(r != "=" for r in rels)
    S = np.zeros((len(rels), n_slack))
    k = 0
    for i, r in enumerate(rels):
        if r != "=":
            S[i, k] = 1.0 if r == "<=" else -1.0
            k += 1
    A = np.hstack([A, S])
    cost = np.concatenate([cost, np.zeros(n_slack)])
    return A, b, rels, cost, const, T, shift, row_sign, n_struct, sign


def solve(lp: LinearProgram, options: SolverOptions | None = None,
          start_columns: Sequence[int] = (), callback: Callable | None = None) -> LpSolution:
    """Two-phase simplex.

    ``start_columns`` are original columns pivoted into the starting basis
    before phase one (useful when a feasible vertex is known to use them).
    ``callback(iteration, value)`` is called after every phase-two pivot with
    the objective value of the current vertex in the original sense.
    """
    opts = options or SolverOptions()
    m_orig, n_orig = lp.shape
    A, b, rels, cost, const, T, shift, row_sign, n_struct, sign = _standard_form(lp)
    m, N = A.shape

    # starting basis: slack of a <= row, otherwise an artificial
    basis = []
    art_rows = []
    slack_col = {}
    k = 0
    for i, r in enumerate(rels):
        if r != "=":
            slack_col[i] = n_struct + k
            k += 1
    for i, r in enumerate(rels):
        if r == "<=":
            basis.append(slack_col[i])
        else:
            basis.append(N + len(art_rows))
            art_rows.append(i)
    n_art = len(art_rows)
    M = np.hstack([A, np.zeros((m, n_art))])
    for k, i in enumerate(art_rows):
        M[i, N + k] = 1.0
    tab = _Tableau(M, b.astype(float).copy(), basis, opts)

    phase1_cost = np.concatenate([np.zeros(N), np.ones(n_art)])
    tab.set_costs(phase1_cost)
    allowed = np.ones(N + n_art, dtype=bool)
    for j in start_columns:
        std = [k for k in range(n_struct) if T[j, k] != 0]
        for col in std[:1]:
            r = tab.ratio_row(col)
            if r is not None and tab.basis[r] >= N:
                tab.pivot(r, col)
    status = tab.run(allowed)
    if tab.z > opts.feasibility_tol * max(1.0, float(np.abs(b).max(initial=0.0))):
        return LpSolution("infeasible", float("nan"), np.full(n_orig, np.nan),
                          np.full(m_orig, np.nan), tab.iterations, labels=lp.labels)

    # drive artificials out of the basis; drop rows that turn out redundant
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if tab.basis[r] >= N:
            row = np.abs(tab.M[r, :N])
            j = int(np.argmax(row))
            if row[j] > opts.pivot_tol:
                tab.pivot(r, j)
            else:
                keep[r] = False
    rows = np.nonzero(keep)[0]
    tab.restrict(rows, N)
    tab.set_costs(cost)

    def report(t: _Tableau):
        if callback is not None:
            callback(t.iterations, sign * (t.z + const))

    status = tab.run(np.ones(N, dtype=bool), report)
    if status == "unbounded":
        return LpSolution("unbounded", sign * -np.inf, np.full(n_orig, np.nan),
                          np.full(m_orig, np.nan), tab.iterations, labels=lp.labels)

    # recompute the vertex and the multipliers from the basis matrix itself
    B = A[rows][:, tab.basis]
    x_std = np.zeros(N)
    x_std[tab.basis] = np.linalg.solve(B, b[rows])
    x_std[np.abs(x_std) < 1e-15] = 0.0
    y_rows = np.linalg.solve(B.T, cost[tab.basis])
    y_std = np.zeros(m)
    y_std[rows] = y_rows
    x = T @ x_std[:n_struct] + shift
    duals = sign * (y_std[:m_orig] * row_sign[:m_orig])
    value = float(lp.c @ x)

    primal_res, slack_res = _residuals(lp, x, duals)
    return LpSolution("optimal", value, x, duals, tab.iterations, tuple(tab.basis),
                      primal_res, slack_res, lp.labels)


def _residuals(lp: LinearProgram, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    Ax = lp.A @ x
    res = 0.0
    for i, r in enumerate(lp.relations):
        gap = Ax[i] - lp.b[i]
        if r == "=":
            res = max(res, abs(gap))
        elif r == "<=":
            res = max(res, gap)
        else:
            res = max(res, -gap)
    res = max(res, float(np.max(lp.lower - x, initial=0.0)), float(np.max(x - lp.upper, initial=0.0)))
    reduced = lp.c - lp.A.T @ y
    cs = 0.0
    for j in range(x.size):
        dist = min(abs(x[j] - lp.lower[j]), abs(lp.upper[j] - x[j]))
        if np.isfinite(dist):
            cs = max(cs, dist * abs(reduced[j]))
        else:
            cs = max(cs, abs(reduced[j]))
    rows_cs = np.abs(y * (Ax - lp.b))
    cs = max(cs, float(rows_cs.max(initial=0.0)))
    return float(res), float(cs)


def format_lp(lp: LinearProgram) -> str:
    """Plain-text dump: header, column labels, one line per row, bounds."""
    m, n = lp.shape
    out = [f"sense {lp.sense}", "columns " + " ".join(lp.labels),
           "objective " + " ".join(repr(float(v)) for v in lp.c)]
    for i in range(m):
        coeffs = " ".join(repr(float(v)) for v in lp.A[i])
        out.append(f"row {lp.row_labels[i]} {lp.relations[i]} {repr(float(lp.b[i]))} : {coeffs}")
    for j in range(n):
        out.append(f"bound {lp.labels[j]} {float(lp.lower[j])!r} {float(lp.upper[j])!r}")
    return "\n".join(out) + "\n"
