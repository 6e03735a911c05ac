"""Coherence LPs on a finite atom grid.

Primal: the conditional weight matrices alpha (given X = 1) and beta (given
X = 0) on grid x grid, subject to the Bayes rows and the two normalizations,
maximizing E f. Dual: one multiplier per Bayes row (mu_i for X1, nu_j for X2)
plus gamma, delta for the normalizations.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .distribution import JointAtomTable, ObjectiveFn, StructureError
from .simplex import LinearProgram, LpSolution, SolverError, SolverOptions, solve

__all__ = [
    "build_primal",
    "build_dual",
    "solve_primal",
    "solution_table",
    "duality_gap",
    "refine",
    "uniform_grid",
    "witness_atoms",
    "PrimalResult",
    "RefineResult",
]


def _grid(grid: Iterable) -> np.ndarray:
    g = sorted({float(v) for v in grid})
    if not g:
        raise StructureError("atom grid is empty")
    if g[0] < 0 or g[-1] > 1:
        raise StructureError("grid atoms must lie in [0, 1]")
    return np.array(g)


def _values(f: ObjectiveFn | Callable, grid: np.ndarray) -> np.ndarray:
    x, y = np.meshgrid(grid, grid, indexing="ij")
    try:
        vals = np.asarray(f(x, y), dtype=float)
        if vals.shape == x.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([[float(f(u, v)) for v in grid] for u in grid])


def _bayes_rows(p: float, grid: np.ndarray) -> np.ndarray:
    """2n x 2n^2 matrix; column (i, j) of alpha then of beta, row-major."""
    n = grid.size
    rows = np.zeros((2 * n, 2 * n * n))
    for i in range(n):
        for j in range(n):
            k = i * n + j
            for r, a in ((i, grid[i]), (n + j, grid[j])):
                rows[r, k] += (1 - a) * p
                rows[r, n * n + k] -= a * (1 - p)
    return rows


def build_primal(p, f: ObjectiveFn | Callable, grid: Iterable) -> LinearProgram:
    """max sum f(a_i, a_j)(p alpha_ij + (1-p) beta_ij) over the coherence polytope."""
    p = float(p)
    g = _grid(grid)
    n = g.size
    F = _values(f, g).ravel()
    A = np.vstack([_bayes_rows(p, g), np.zeros((2, 2 * n * n))])
    A[2 * n, : n * n] = 1.0
    A[2 * n + 1, n * n :] = 1.0
    b = np.zeros(2 * n + 2)
    b[-2:] = 1.0
    labels = [f"alpha[{i},{j}]" for i in range(n) for j in range(n)]
    labels += [f"beta[{i},{j}]" for i in range(n) for j in range(n)]
    row_labels = [f"bayes_x1[{i}]" for i in range(n)] + [f"bayes_x2[{j}]" for j in range(n)]
    row_labels += ["norm_alpha", "norm_beta"]
    c = np.concatenate([p * F, (1 - p) * F])
    return LinearProgram.build(c, A, b, "=", sense="max", labels=labels, row_labels=row_labels)


def build_dual(p, f: ObjectiveFn | Callable, grid: Iterable) -> LinearProgram:
    """min gamma + delta over free (mu, nu, gamma, delta), one row per primal column."""
    p = float(p)
    g = _grid(grid)
    n = g.size
    F = _values(f, g).ravel()
    A = np.zeros((2 * n * n, 2 * n + 2))
    A[:, : 2 * n] = _bayes_rows(p, g).T
    A[: n * n, 2 * n] = 1.0
    A[n * n :, 2 * n + 1] = 1.0
    c = np.zeros(2 * n + 2)
    c[-2:] = 1.0
    labels = [f"mu[{i}]" for i in range(n)] + [f"nu[{j}]" for j in range(n)] + ["gamma", "delta"]
    row_labels = [f"alpha[{i},{j}]" for i in range(n) for j in range(n)]
    row_labels += [f"beta[{i},{j}]" for i in range(n) for j in range(n)]
    b = np.concatenate([p * F, (1 - p) * F])
    free = np.full(2 * n + 2, np.inf)
    return LinearProgram.build(c, A, b, ">=", lower=-free, upper=free, sense="min",
                               labels=labels, row_labels=row_labels)


def _constant_expert_columns(p: float, grid: np.ndarray) -> list[int]:
    hits = np.nonzero(np.isclose(grid, p, rtol=0, atol=1e-15))[0]
    if hits.size == 0:
        return []
    n = grid.size
    k = int(hits[0]) * n + int(hits[0])
    return [k, n * n + k]


@dataclass(frozen=True)
class PrimalResult:
    value: float
    table: JointAtomTable
    solution: LpSolution
    grid: tuple

    @property
    def multipliers(self) -> dict:
        """Row multipliers keyed by dual name (mu[i], nu[j], gamma, delta)."""
        n = len(self.grid)
        names = [f"mu[{i}]" for i in range(n)] + [f"nu[{j}]" for j in range(n)] + ["gamma", "delta"]
        return dict(zip(names, self.solution.duals))


def solution_table(p, grid: Iterable, x: np.ndarray) -> JointAtomTable:
    """Reassemble a primal vector into a float JointAtomTable."""
    g = _grid(grid)
    n = g.size
    x = np.where(np.abs(x) < 1e-14, 0.0, np.asarray(x, dtype=float))
    alpha = x[: n * n].reshape(n, n)
    beta = x[n * n :].reshape(n, n)
    return JointAtomTable(float(p), tuple(g.tolist()), alpha.tolist(), beta.tolist())


def solve_primal(p, f: ObjectiveFn | Callable, grid: Iterable,
                 options: SolverOptions | None = None, callback: Callable | None = None) -> PrimalResult:
    g = _grid(grid)
    lp = build_primal(p, f, g)
    sol = solve(lp, options, start_columns=_constant_expert_columns(float(p), g), callback=callback)
    if not sol.optimal:
        # the constant expert is always feasible and the polytope is bounded
        raise SolverError(f"coherence LP reported {sol.status}")
    return PrimalResult(sol.value, solution_table(p, g, sol.x), sol, tuple(g.tolist()))


def duality_gap(p, f: ObjectiveFn | Callable, grid: Iterable,
                options: SolverOptions | None = None) -> float:
    """|primal optimum - dual optimum|, each solved as its own LP."""
    primal = solve_primal(p, f, grid, options)
    dual = solve(build_dual(p, f, grid), options)
    if not dual.optimal:
        raise SolverError(f"dual LP reported {dual.status}")
    return abs(primal.value - dual.value)


def uniform_grid(n: int, extra: Iterable = ()) -> list[float]:
    """{k/n : 0 <= k <= n} together with ``extra``."""
    if n < 1:
        raise ValueError("grid size must be at least 1")
    pts = {k / n for k in range(n + 1)} | {float(v) for v in extra}
    return sorted(pts)


def witness_atoms(p, f: ObjectiveFn) -> list[float]:
    """Atoms of the closed-form witness for ``f`` at prior p, when one is known.

    Covers neg_cov (any p), abspow (p = 1/2) and tight quadratic objectives;
    returns an empty list otherwise.
    """
    from . import bounds

    try:
        if f.kind == "neg_cov":
            table = bounds.cov_witness(p)
        elif f.kind == "abspow" and float(p) == 0.5:
            table = bounds.abspow_witness(f.params[0])
        elif f.kind == "quadratic":
            alpha, beta, prior = f.params
            res = bounds.quad_bound(p, bounds.QuadraticForm(alpha, beta))
            table = res.witness_table() if res.tight else None
        else:
            table = None
    except (ValueError, TypeError):
        table = None
    if table is None:
        return []
    return sorted({float(a) for a in table.atoms})


@dataclass(frozen=True)
class RefineResult:
    sizes: tuple
    values: tuple
    best: PrimalResult

    @property
    def nondecreasing(self) -> bool:
        return all(b >= a - 1e-9 for a, b in zip(self.values, self.values[1:]))

    def rows(self) -> list[tuple[int, float]]:
        return list(zip(self.sizes, self.values))


def refine(p, f: ObjectiveFn | Callable, grid_sizes: Sequence[int], extra_atoms: Iterable = (),
           options: SolverOptions | None = None) -> RefineResult:
    """Solve the primal on {k/n} (plus ``extra_atoms``) for each n in ``grid_sizes``.

    Values are nondecreasing when consecutive grids are nested (for instance
    n doubling). Choosing the extra atoms is a heuristic: nothing guarantees
    the sup over all finite grids is reached.
    """
    sizes = tuple(int(n) for n in grid_sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("grid sizes must be increasing")
    extra = [float(v) for v in extra_atoms]
    values = []
    best = None
    for n in sizes:
        res = solve_primal(p, f, uniform_grid(n, extra), options)
        values.append(res.value)
        if best is None or res.value > best.value:
            best = res
    return RefineResult(sizes, tuple(values), best)


def exact_value(value: float, max_denominator: int = 10**6) -> Fraction:
    """Nearest simple fraction; useful when printing LP optima."""
    return Fraction(value).limit_denominator(max_denominator)
