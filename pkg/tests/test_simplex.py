import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from coherent.simplex import LinearProgram, SolverOptions, format_lp, solve


def highs(lp):
    """Reference optimum from scipy's HiGHS backend."""
    sgn = -1 if lp.sense == "max" else 1
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row, rel, rhs in zip(lp.A, lp.relations, lp.b):
        if rel == "=":
            A_eq.append(row), b_eq.append(rhs)
        elif rel == "<=":
            A_ub.append(row), b_ub.append(rhs)
        else:
            A_ub.append(-row), b_ub.append(-rhs)
    bounds = [(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
              for lo, hi in zip(lp.lower, lp.upper)]
    res = linprog(sgn * lp.c, A_ub=A_ub or None, b_ub=b_ub or None, A_eq=A_eq or None,
                  b_eq=b_eq or None, bounds=bounds, method="highs")
    return res.status, sgn * res.fun if res.status == 0 else None


class TestSmall:
    def test_single_bound(self):
        sol = solve(LinearProgram.build([1.0], [[1.0]], [3.0], ">="))
        assert sol.optimal and sol.value == pytest.approx(3.0)
        assert sol.duals[0] == pytest.approx(1.0)

    def test_max_sense(self):
        lp = LinearProgram.build([3, 2], [[1, 1], [1, 3]], [4, 6], "<=", sense="max")
        sol = solve(lp)
        assert sol.value == pytest.approx(12.0)
        assert sol.by_label() == {"x0": pytest.approx(4.0), "x1": pytest.approx(0.0)}

    def test_negating_sense_negates_value(self):
        c = np.array([1.0, -2.0, 0.5])
        A = np.array([[1, 1, 1], [1, -1, 0]])
        lo = solve(LinearProgram.build(c, A, [1, 0], ["=", "<="], upper=np.ones(3)))
        hi = solve(LinearProgram.build(-c, A, [1, 0], ["=", "<="], upper=np.ones(3), sense="max"))
        assert lo.value == pytest.approx(-hi.value)

    def test_free_and_boxed_variables(self):
        # min x - y with x free, -1 <= y <= 2, x + y >= 0.5
        lp = LinearProgram.build([1, -1], [[1, 1]], [0.5], ">=", lower=[-np.inf, -1], upper=[np.inf, 2])
        sol = solve(lp)
        assert sol.value == pytest.approx(-3.5)
        assert sol.x == pytest.approx([-1.5, 2.0])

    def test_infeasible(self):
        lp = LinearProgram.build([1, 1], [[1, 1], [1, 1]], [1, 2], ["<=", ">="], upper=[0.4, 0.4])
        assert solve(lp).status == "infeasible"

    def test_unbounded(self):
        sol = solve(LinearProgram.build([1, 1], [[1, -1]], [0], "<=", sense="max"))
        assert sol.status == "unbounded" and sol.value == np.inf

    def test_redundant_equalities(self):
        lp = LinearProgram.build([1, 2], [[1, 1], [2, 2]], [1, 2], "=")
        sol = solve(lp)
        assert sol.optimal and sol.value == pytest.approx(1.0)

    def test_degenerate_cycling_example(self):
        # Beale's example cycles under naive Dantzig pricing
        c = [-0.75, 150, -0.02, 6]
        A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
        sol = solve(LinearProgram.build(c, A, [0, 0, 1], "<="))
        assert sol.optimal and sol.value == pytest.approx(-0.05)

    def test_callback_sees_monotone_values(self):
        seen = []
        lp = LinearProgram.build([3, 2, 4], [[1, 1, 2], [2, 0, 3], [2, 1, 3]], [4, 5, 7], "<=", sense="max")
        sol = solve(lp, callback=lambda it, v: seen.append(v))
        assert seen and all(b >= a - 1e-12 for a, b in zip(seen, seen[1:]))
        assert seen[-1] == pytest.approx(sol.value)

    def test_validation(self):
        with pytest.raises(ValueError):
            LinearProgram.build([1], [[1]], [1, 2], "<=")
        with pytest.raises(ValueError):
            LinearProgram.build([1], [[1]], [1], "<")
        with pytest.raises(ValueError):
            LinearProgram.build([1, 1], [[1, 1]], [1], "<=", labels=("a", "a"))

    def test_iteration_limit(self):
        lp = LinearProgram.build([3, 2], [[1, 1], [1, 3]], [4, 6], "<=", sense="max")
        from coherent.simplex import SolverError
        with pytest.raises(SolverError):
            solve(lp, SolverOptions(max_iterations=0))


class TestFormat:
    def test_lines(self):
        lp = LinearProgram.build([1, 2], [[1, 1]], [1], "=", labels=("a", "b"), row_labels=("norm",))
        text = format_lp(lp)
        lines = text.splitlines()
        assert lines[0] == "sense min"
        assert lines[1] == "columns a b"
        assert lines[3] == "row norm = 1.0 : 1.0 1.0"
        assert lines[4] == "bound a 0.0 inf"
        assert format_lp(lp) == text


def random_lp(seed, m, n):
    rng = np.random.default_rng(seed)
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    x0 = rng.uniform(0, 2, size=n)
    rels = rng.choice(["<=", ">=", "="], size=m)
    b = A @ x0
    b = np.where(rels == "<=", b + rng.uniform(0, 1, m), np.where(rels == ">=", b - rng.uniform(0, 1, m), b))
    c = rng.integers(-5, 6, size=n).astype(float)
    return LinearProgram.build(c, A, b, tuple(rels), upper=np.full(n, 3.0), sense=rng.choice(["min", "max"]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 10), n=st.integers(1, 10))
def test_matches_reference_solver(seed, m, n):
    lp = random_lp(seed, m, n)
    sol = solve(lp)
    status, ref = highs(lp)
    assert status == 0 and sol.optimal
    assert sol.value == pytest.approx(ref, abs=1e-7)
    assert sol.primal_residual < 1e-8
    assert sol.slackness_residual < 1e-7


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 10), n=st.integers(1, 10))
def test_strong_duality(seed, m, n):
    # max c.x, A x <= b, x >= 0  against  min b.y, A^T y >= c, y >= 0
    rng = np.random.default_rng(seed)
    A = rng.uniform(0, 1, size=(m, n))
    b = rng.uniform(1, 2, size=m)
    c = rng.uniform(-1, 1, size=n)
    primal = solve(LinearProgram.build(c, A, b, "<=", sense="max"))
    dual = solve(LinearProgram.build(b, A.T, c, ">="))
    assert primal.value == pytest.approx(dual.value, abs=1e-9)
    assert primal.duals @ b == pytest.approx(primal.value, abs=1e-9)
    assert np.all(primal.duals >= -1e-12)
