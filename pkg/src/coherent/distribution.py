"""Finite coherent distributions of (X, X1, X2).

A :class:`JointAtomTable` stores the two conditional laws of (X1, X2) given
X = 1 (``alpha``) and X = 0 (``beta``) on a shared grid of atoms. Entries are
either all exact (``int``/``Fraction``) or plain floats; every function here
works with both and stays exact when the table is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from ._numbers import format_number, is_exact, parse_number

DEFAULT_TOL = 1e-9

FAMILIES = (
    "atoms",
    "alpha_nonnegative",
    "beta_nonnegative",
    "alpha_normalization",
    "beta_normalization",
    "bayes_x1",
    "bayes_x2",
)


class StructureError(ValueError):
    """Malformed table: wrong matrix shape, empty grid, coordinates outside [0, 1]."""


# --------------------------------------------------------------------------
# objective functions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveFn:
    """A function f(x1, x2) on [0, 1]^2.

    ``func`` must accept scalars (Fraction or float) and numpy arrays. Use the
    constructors rather than building instances by hand.
    """

    kind: str
    func: Callable = field(repr=False, compare=False)
    params: tuple = ()
    symmetric: bool = False

    def __call__(self, x, y):
        return self.func(x, y)

    @classmethod
    def quadratic(cls, alpha, beta, prior) -> "ObjectiveFn":
        """alpha*(x - y)^2 + beta*(x + y - 2p)^2."""

        def f(x, y):
            return alpha * (x - y) ** 2 + beta * (x + y - 2 * prior) ** 2

        return cls("quadratic", f, (alpha, beta, prior), symmetric=True)

    @classmethod
    def neg_cov(cls, prior) -> "ObjectiveFn":
        """-(x - p)(y - p); maximizing it minimizes cov(X1, X2)."""

        def f(x, y):
            return -(x - prior) * (y - prior)

        return cls("neg_cov", f, (prior,), symmetric=True)

    @classmethod
    def abspow(cls, exponent) -> "ObjectiveFn":
        """|x - y|^exponent; integer exponents keep Fraction inputs exact."""
        e = exponent
        if isinstance(e, Fraction) and e.denominator == 1:
            e = int(e)
        elif isinstance(e, float) and e.is_integer():
            e = int(e)

        def f(x, y):
            return abs(x - y) ** e

        return cls("abspow", f, (e,), symmetric=True)

    @classmethod
    def custom(cls, func: Callable, symmetric: bool = False, name: str = "custom") -> "ObjectiveFn":
        return cls(name, func, (), symmetric=symmetric)

    @classmethod
    def tabulated(cls, xs: Sequence[float], ys: Sequence[float], values) -> "ObjectiveFn":
        """Bilinear interpolation of ``values[i][j] = f(xs[i], ys[j])``.

        ``xs`` and ``ys`` must both start at 0 and end at 1 so the result is
        defined on the whole square.
        """
        gx = np.asarray(xs, dtype=float)
        gy = np.asarray(ys, dtype=float)
        table = np.asarray(values, dtype=float)
        if table.shape != (gx.size, gy.size):
            raise StructureError("tabulated values must have shape (len(xs), len(ys))")
        if gx[0] != 0 or gx[-1] != 1 or gy[0] != 0 or gy[-1] != 1:
            raise StructureError("tabulation grid must span [0, 1] in both coordinates")
        if np.any(np.diff(gx) <= 0) or np.any(np.diff(gy) <= 0):
            raise StructureError("tabulation grid must be strictly increasing")

        def f(x, y):
            xa = np.asarray(x, dtype=float)
            ya = np.asarray(y, dtype=float)
            i = np.clip(np.searchsorted(gx, xa, side="right") - 1, 0, gx.size - 2)
            j = np.clip(np.searchsorted(gy, ya, side="right") - 1, 0, gy.size - 2)
            tx = (xa - gx[i]) / (gx[i + 1] - gx[i])
            ty = (ya - gy[j]) / (gy[j + 1] - gy[j])
            out = (
                table[i, j] * (1 - tx) * (1 - ty)
                + table[i + 1, j] * tx * (1 - ty)
                + table[i, j + 1] * (1 - tx) * ty
                + table[i + 1, j + 1] * tx * ty
            )
            return float(out) if out.ndim == 0 else out

        sym = gx.shape == gy.shape and np.array_equal(gx, gy) and np.allclose(table, table.T)
        return cls("tabulated", f, (), symmetric=bool(sym))


# --------------------------------------------------------------------------
# the table
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class JointAtomTable:
    """Joint law of (X, X1, X2) on the atom grid ``atoms``.

    ``alpha[i][j] = P(X1 = a_i, X2 = a_j | X = 1)`` and
    ``beta[i][j] = P(X1 = a_i, X2 = a_j | X = 0)``.
    """

    prior: object
    atoms: tuple
    alpha: tuple
    beta: tuple

    def __post_init__(self):
        n = len(self.atoms)
        if n == 0:
            raise StructureError("table has no atoms")
        for name in ("alpha", "beta"):
            m = getattr(self, name)
            if len(m) != n or any(len(row) != n for row in m):
                raise StructureError(f"{name} must be {n}x{n} to match the atom grid")
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "alpha", tuple(tuple(r) for r in self.alpha))
        object.__setattr__(self, "beta", tuple(tuple(r) for r in self.beta))

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def exact(self) -> bool:
        vals = [self.prior, *self.atoms]
        vals += [v for row in self.alpha for v in row]
        vals += [v for row in self.beta for v in row]
        return all(is_exact(v) for v in vals)

    def joint(self, i: int, j: int):
        """P(X1 = a_i, X2 = a_j)."""
        p = self.prior
        return p * self.alpha[i][j] + (1 - p) * self.beta[i][j]

    def marginal_x1(self) -> list:
        return [sum(self.joint(i, j) for j in range(self.n)) for i in range(self.n)]

    def marginal_x2(self) -> list:
        return [sum(self.joint(i, j) for i in range(self.n)) for j in range(self.n)]

    def mean_x1(self):
        return sum(a * m for a, m in zip(self.atoms, self.marginal_x1()))

    def mean_x2(self):
        return sum(a * m for a, m in zip(self.atoms, self.marginal_x2()))

    def support(self) -> list[tuple]:
        """Nonzero atoms as ``(x1, x2, conditional_weight, x_value)``."""
        out = []
        for xval, mat in ((1, self.alpha), (0, self.beta)):
            for i, row in enumerate(mat):
                for j, w in enumerate(row):
                    if w != 0:
                        out.append((self.atoms[i], self.atoms[j], w, xval))
        return out

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Float copies of (atoms, alpha, beta)."""
        return (
            np.array([float(a) for a in self.atoms]),
            np.array([[float(v) for v in r] for r in self.alpha]),
            np.array([[float(v) for v in r] for r in self.beta]),
        )

    def to_float(self) -> "JointAtomTable":
        return JointAtomTable(
            float(self.prior),
            tuple(float(a) for a in self.atoms),
            tuple(tuple(float(v) for v in r) for r in self.alpha),
            tuple(tuple(float(v) for v in r) for r in self.beta),
        )


@dataclass(frozen=True)
class Violation:
    family: str
    index: int | None
    magnitude: float


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    worst: dict
    violations: tuple

    def __bool__(self) -> bool:
        return self.passed


def validate_coherence(table: JointAtomTable, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check the Bayes-consistency and simplex constraints of ``table``.

    The Bayes constraints are checked in their linear form
    ``(1 - a_i) p sum_j alpha_ij - a_i (1 - p) sum_j beta_ij = 0`` so atoms at
    0 or 1 and atoms carrying no mass need no special treatment. With
    ``tol == 0`` on an exact table every comparison is exact.
    """
    p = table.prior
    n = table.n
    a = table.atoms
    violations: list[Violation] = []
    worst = {name: 0.0 for name in FAMILIES}

    def record(family, index, residual):
        mag = abs(residual)
        worst[family] = max(worst[family], float(mag))
        if mag > tol:
            violations.append(Violation(family, index, float(mag)))

    if not (0 < p < 1):
        violations.append(Violation("atoms", None, float("inf")))
        worst["atoms"] = float("inf")
    for i, ai in enumerate(a):
        if ai < 0:
            record("atoms", i, ai)
        elif ai > 1:
            record("atoms", i, ai - 1)
        if i and a[i - 1] >= ai:
            violations.append(Violation("atoms", i, float(a[i - 1] - ai)))

    for name, mat in (("alpha", table.alpha), ("beta", table.beta)):
        for i in range(n):
            for j in range(n):
                if mat[i][j] < 0:
                    record(f"{name}_nonnegative", i * n + j, mat[i][j])
        record(f"{name}_normalization", None, sum(sum(r) for r in mat) - 1)

    for i in range(n):
        row_a = sum(table.alpha[i])
        row_b = sum(table.beta[i])
        record("bayes_x1", i, (1 - a[i]) * p * row_a - a[i] * (1 - p) * row_b)
        col_a = sum(table.alpha[k][i] for k in range(n))
        col_b = sum(table.beta[k][i] for k in range(n))
        record("bayes_x2", i, (1 - a[i]) * p * col_a - a[i] * (1 - p) * col_b)

    return ValidationReport(not violations, worst, tuple(violations))


def expectation(table: JointAtomTable, f: ObjectiveFn | Callable):
    """E f(X1, X2) = sum_ij f(a_i, a_j) (p alpha_ij + (1 - p) beta_ij)."""
    total = 0
    for i, ai in enumerate(table.atoms):
        for j, aj in enumerate(table.atoms):
            w = table.joint(i, j)
            if w != 0:
                total += f(ai, aj) * w
    return total


def covariance(table: JointAtomTable):
    """cov(X1, X2) = E[(X1 - p)(X2 - p)] (the sign is not flipped)."""
    p = table.prior
    return expectation(table, lambda x, y: (x - p) * (y - p))


def from_conditionals(prior, atoms: Iterable[tuple]) -> JointAtomTable:
    """Build a table from ``(x1, x2, weight, x_value)`` tuples.

    ``weight`` is the conditional weight given X = x_value; nothing is
    normalized. Coordinates are merged into one sorted grid and repeated
    (x1, x2, x_value) entries add up. The result is not validated.
    """
    entries = list(atoms)
    if not entries:
        raise StructureError("no atoms given")
    coords = set()
    for x1, x2, w, xv in entries:
        for c in (x1, x2):
            if not (0 <= c <= 1):
                raise StructureError(f"coordinate {c} outside [0, 1]")
        if w < 0:
            raise StructureError(f"negative weight {w}")
        if xv not in (0, 1):
            raise StructureError(f"x_value must be 0 or 1, got {xv!r}")
        coords.update((x1, x2))
    grid = sorted(coords)
    # a float and an equal Fraction collapse into one atom
    dedup: list = []
    for c in grid:
        if not dedup or dedup[-1] != c:
            dedup.append(c)
    index = {c: k for k, c in enumerate(dedup)}
    n = len(dedup)
    zero = 0 if all(is_exact(e[2]) for e in entries) else 0.0
    alpha = [[zero] * n for _ in range(n)]
    beta = [[zero] * n for _ in range(n)]
    for x1, x2, w, xv in entries:
        mat = alpha if xv == 1 else beta
        mat[index[x1]][index[x2]] += w
    return JointAtomTable(prior, tuple(dedup), alpha, beta)


def swap_experts(table: JointAtomTable) -> JointAtomTable:
    """Exchange the roles of X1 and X2 (transpose both weight matrices)."""
    t = lambda m: tuple(zip(*m))  # noqa: E731
    return JointAtomTable(table.prior, table.atoms, t(table.alpha), t(table.beta))


def complement(table: JointAtomTable) -> JointAtomTable:
    """The table of (1 - X, 1 - X1, 1 - X2); its prior is 1 - p."""
    rev = lambda m: tuple(tuple(reversed(r)) for r in reversed(m))  # noqa: E731
    atoms = tuple(1 - a for a in reversed(table.atoms))
    return JointAtomTable(1 - table.prior, atoms, rev(table.beta), rev(table.alpha))


def mix(first: JointAtomTable, second: JointAtomTable, weight) -> JointAtomTable:
    """``weight * first + (1 - weight) * second`` on the union grid."""
    if first.prior != second.prior:
        raise StructureError("cannot mix tables with different priors")
    rows = [(x1, x2, weight * w, xv) for x1, x2, w, xv in first.support()]
    rows += [(x1, x2, (1 - weight) * w, xv) for x1, x2, w, xv in second.support()]
    return from_conditionals(first.prior, [r for r in rows if r[2] != 0])


# --------------------------------------------------------------------------
# text format
# --------------------------------------------------------------------------


def dumps(table: JointAtomTable) -> str:
    """``p=<prior>`` then one ``x1 x2 weight x_value`` line per nonzero atom."""
    lines = [f"p={format_number(table.prior)}"]
    for x1, x2, w, xv in table.support():
        lines.append(f"{format_number(x1)} {format_number(x2)} {format_number(w)} {xv}")
    return "\n".join(lines) + "\n"


def loads(text: str, exact: bool = False) -> JointAtomTable:
    """Parse :func:`dumps` output.

    ``num/den`` and integer tokens become Fractions; decimals become floats
    unless ``exact`` is set. Blank lines and ``#`` comments are skipped.
    """
    prior = None
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("p="):
            prior = parse_number(line[2:], exact)
            continue
        parts = line.split()
        if len(parts) != 4:
            raise StructureError(f"expected 'x1 x2 weight x_value', got {raw!r}")
        x1, x2, w = (parse_number(t, exact) for t in parts[:3])
        rows.append((x1, x2, w, int(parts[3])))
    if prior is None:
        raise StructureError("missing 'p=' header")
    return from_conditionals(prior, rows)


def constant_expert(prior) -> JointAtomTable:
    """X1 = X2 = p."""
    return from_conditionals(prior, [(prior, prior, 1, 1), (prior, prior, 1, 0)])


def fully_informed(prior) -> JointAtomTable:
    """X1 = X2 = X."""
    one = 1 if is_exact(prior) else 1.0
    return from_conditionals(prior, [(one, one, 1, 1), (0 * one, 0 * one, 1, 0)])


def one_informed(prior) -> JointAtomTable:
    """X1 = X, X2 = p."""
    one = 1 if is_exact(prior) else 1.0
    return from_conditionals(prior, [(one, prior, 1, 1), (0 * one, prior, 1, 0)])
