"""Ladder distributions attaining the Hilbert-space bound for quadratic objectives.

For a step ``a`` the bound is attained exactly by coherent pairs with
``(X1 - p) + (X2 - p) = a (X - p)``, i.e. X = 1 atoms on the line
``x + y = a + (2 - a) p`` and X = 0 atoms on ``x + y = (2 - a) p``. Bayes
consistency on every horizontal and vertical line then forces a staircase
("ladder") support whose masses are fixed up to one scale factor.

Everything here runs in exact rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from ._numbers import as_fraction
from .distribution import JointAtomTable, from_conditionals, mix


class Geometry(str, Enum):
    BOTH_ABOVE = "BothAbove"
    BOTH_BELOW = "BothBelow"
    STRADDLE = "Straddle"


class Subcase(str, Enum):
    FIRST_SERIES_ENDS_ON_X1_EQ_1 = "FirstSeriesEndsOnX1eq1"
    SECOND_SERIES_ENDS_ON_X2_EQ_0 = "SecondSeriesEndsOnX2eq0"
    TWO_LADDERS = "TwoLadders"


class LadderConstructionError(ValueError):
    """The support chain reached an atom where the Bayes ratio rule is undefined."""


@dataclass(frozen=True)
class LadderSpec:
    """Outcome of :func:`classify` for a tight (p, a).

    ``condition`` is the attainment condition (1: ``1/a`` integral, 2: the
    chain from the top edge ends on ``x1 = 1``, 3: the chain from the left
    edge ends on ``x2 = 0``) that produced ``steps``; ``conditions`` lists
    every condition that holds.
    """

    prior: Fraction
    step: Fraction
    case: Geometry
    subcase: Subcase | None
    steps: int
    condition: int
    conditions: frozenset

    @property
    def low_line(self) -> Fraction:
        """x + y on X = 0 atoms."""
        return (2 - self.step) * self.prior

    @property
    def high_line(self) -> Fraction:
        """x + y on X = 1 atoms."""
        return self.step + self.low_line


@dataclass(frozen=True)
class NotTight:
    prior: Fraction
    step: Fraction
    quotients: dict

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class LadderPoint:
    x: Fraction
    y: Fraction
    x_value: int
    mass: Fraction  # P(X1 = x, X2 = y, X = x_value)


@dataclass(frozen=True)
class LadderDistribution:
    prior: Fraction
    step: Fraction
    points: tuple

    def __len__(self) -> int:
        return len(self.points)

    @property
    def coordinates(self) -> list[tuple]:
        return [(pt.x, pt.y) for pt in self.points]

    def mass(self, x_value: int) -> Fraction:
        return sum((pt.mass for pt in self.points if pt.x_value == x_value), Fraction(0))

    def atoms(self) -> list:
        return sorted({c for pt in self.points for c in (pt.x, pt.y)})


def _checked(p, a) -> tuple[Fraction, Fraction]:
    p = as_fraction(p)
    a = as_fraction(a)
    if not 0 < p < 1:
        raise ValueError(f"prior must lie in (0, 1), got {p}")
    if not 0 < a <= 2:
        raise ValueError(f"step must lie in (0, 2], got {a}")
    return p, a


def _is_natural(q: Fraction) -> bool:
    return q.denominator == 1 and q >= 1


def classify(p, a) -> LadderSpec | NotTight:
    """Decide whether the quadratic bound with step ``a`` is attained in C_p.

    Exact rational test of the three integrality conditions. Returns a
    :class:`NotTight` (falsy) when none holds.
    """
    p, a = _checked(p, a)
    lo = (2 - a) * p
    hi = a + lo
    quotients = {1: 1 / a, 2: (2 - lo) / a, 3: 1 + lo / a}
    holds = set()
    if _is_natural(quotients[1]) and hi >= 1 >= lo:
        holds.add(1)
    if _is_natural(quotients[2]) and hi > 1:
        holds.add(2)
    if _is_natural(quotients[3]) and lo < 1:
        holds.add(3)
    if not holds:
        return NotTight(p, a, quotients)

    if lo > 1:
        case, subcase, condition = Geometry.BOTH_ABOVE, None, 2
    elif hi < 1:
        case, subcase, condition = Geometry.BOTH_BELOW, None, 3
    else:
        # boundary lines (lo == 1 or hi == 1) fall here with one empty series
        case = Geometry.STRADDLE
        first = hi > 1 and bool(holds & {1, 2})
        second = lo < 1 and bool(holds & {1, 3})
        if first and second:
            subcase = Subcase.TWO_LADDERS
            condition = 1 if 1 in holds else 2
        elif first:
            subcase, condition = Subcase.FIRST_SERIES_ENDS_ON_X1_EQ_1, 2
        else:
            subcase, condition = Subcase.SECOND_SERIES_ENDS_ON_X2_EQ_0, 3
    assert condition in holds, (p, a, holds, condition)
    return LadderSpec(p, a, case, subcase, int(quotients[condition]), condition, frozenset(holds))


def _walk(start: LadderPoint, vertical_first: bool, lo: Fraction, hi: Fraction) -> list[LadderPoint]:
    """Follow the support chain from ``start`` with unnormalized masses.

    On a vertical line x the X = 1 and X = 0 masses stand in ratio
    x : (1 - x); likewise on horizontal lines. A line through a point needs
    no partner exactly when the point's coordinate on it is 1 (X = 1 atom)
    or 0 (X = 0 atom); the chain ends there.
    """
    points = [start]
    vertical = vertical_first
    limit = 4 * int(4 / (hi - lo)) + 8
    while True:
        cur = points[-1]
        for coord in (cur.x, cur.y):
            if not 0 <= coord <= 1:
                raise LadderConstructionError(f"atom ({cur.x}, {cur.y}) leaves the unit square")
            if (cur.x_value == 1 and coord == 0) or (cur.x_value == 0 and coord == 1):
                raise LadderConstructionError(
                    f"ratio rule undefined at X={cur.x_value} atom ({cur.x}, {cur.y})"
                )
        t = cur.x if vertical else cur.y
        if (cur.x_value == 1 and t == 1) or (cur.x_value == 0 and t == 0):
            return points
        if cur.x_value == 1:
            partner_value, line, mass = 0, lo, cur.mass * (1 - t) / t
        else:
            partner_value, line, mass = 1, hi, cur.mass * t / (1 - t)
        if vertical:
            nxt = LadderPoint(cur.x, line - cur.x, partner_value, mass)
        else:
            nxt = LadderPoint(line - cur.y, cur.y, partner_value, mass)
        points.append(nxt)
        vertical = not vertical
        if len(points) > limit:
            raise LadderConstructionError("support chain does not terminate")


def _normalize(points: list[LadderPoint], p: Fraction, a: Fraction) -> LadderDistribution:
    m1 = sum(pt.mass for pt in points if pt.x_value == 1)
    m0 = sum(pt.mass for pt in points if pt.x_value == 0)
    scale = p / m1
    if m0 * scale != 1 - p:
        raise LadderConstructionError(
            f"X=0 mass {m0 * scale} disagrees with 1 - p = {1 - p} after fixing X=1 mass"
        )
    pts = tuple(LadderPoint(pt.x, pt.y, pt.x_value, pt.mass * scale) for pt in points)
    return LadderDistribution(p, a, pts)


def build_ladder(spec: LadderSpec) -> LadderDistribution | tuple[LadderDistribution, LadderDistribution]:
    """Construct the extremal ladder(s) for a tight ``spec``.

    Returns one ladder, or a pair when both support series are nonempty
    (any convex combination of the pair is then optimal). Points are
    ordered from the largest x2 downwards with x1 nondecreasing.
    """
    if isinstance(spec, NotTight):
        raise ValueError("no ladder exists for a non-tight (p, a)")
    p, a = spec.prior, spec.step

    if spec.case is Geometry.BOTH_BELOW:
        mirrored = classify(1 - p, a)
        assert isinstance(mirrored, LadderSpec) and mirrored.case is Geometry.BOTH_ABOVE
        inner = build_ladder(mirrored)
        pts = tuple(
            LadderPoint(1 - pt.x, 1 - pt.y, 1 - pt.x_value, pt.mass) for pt in reversed(inner.points)
        )
        ladder = LadderDistribution(p, a, pts)
        _check_count(ladder, 2 * spec.steps - 1)
        return ladder

    if a == 2:
        # X1 = X2 = X: the two one-point series only normalize jointly
        pts = (LadderPoint(Fraction(1), Fraction(1), 1, p), LadderPoint(Fraction(0), Fraction(0), 0, 1 - p))
        return LadderDistribution(p, a, pts)

    lo, hi = spec.low_line, spec.high_line
    first = lambda: _walk(LadderPoint(hi - 1, Fraction(1), 1, Fraction(1)), True, lo, hi)  # noqa: E731
    second = lambda: _walk(LadderPoint(Fraction(0), lo, 0, Fraction(1)), False, lo, hi)  # noqa: E731

    if spec.case is Geometry.BOTH_ABOVE or spec.subcase is Subcase.FIRST_SERIES_ENDS_ON_X1_EQ_1:
        ladder = _normalize(first(), p, a)
        _check_count(ladder, 2 * spec.steps - 1)
        return ladder
    if spec.subcase is Subcase.SECOND_SERIES_ENDS_ON_X2_EQ_0:
        ladder = _normalize(second(), p, a)
        _check_count(ladder, 2 * spec.steps - 1)
        return ladder

    pair = (_normalize(first(), p, a), _normalize(second(), p, a))
    # with 1/a = N each series has 2N points; the 2+3 double case has 2N - 1
    expected = 2 * spec.steps if spec.condition == 1 else 2 * spec.steps - 1
    for ladder in pair:
        _check_count(ladder, expected)
    return pair


def _check_count(ladder: LadderDistribution, expected: int) -> None:
    if len(ladder) != expected:
        raise LadderConstructionError(f"built {len(ladder)} points, expected {expected}")


def to_table(ladder: LadderDistribution) -> JointAtomTable:
    """Conditional-weight table of a ladder (exact)."""
    p = ladder.prior
    rows = [
        (pt.x, pt.y, pt.mass / p if pt.x_value == 1 else pt.mass / (1 - p), pt.x_value)
        for pt in ladder.points
    ]
    return from_conditionals(p, rows)


def mixture(pair, weight) -> JointAtomTable:
    """``weight * pair[0] + (1 - weight) * pair[1]`` as a table."""
    weight = as_fraction(weight)
    if not 0 <= weight <= 1:
        raise ValueError("mixture weight must lie in [0, 1]")
    first, second = pair
    return mix(to_table(first), to_table(second), weight)


def witness_table(built, weight=Fraction(1, 2)) -> JointAtomTable:
    """Table for :func:`build_ladder` output; pairs are mixed with ``weight``."""
    if isinstance(built, tuple):
        return mixture(built, weight)
    return to_table(built)


def ladder_violations(ladder: LadderDistribution) -> list[str]:
    """Ways in which ``ladder`` breaks the ladder definition (empty when valid)."""
    problems = []
    pts = ladder.points
    lo = (2 - ladder.step) * ladder.prior
    hi = ladder.step + lo
    coords = [(pt.x, pt.y) for pt in pts]
    if len(set(coords)) != len(coords):
        problems.append("points not distinct")
    xs = [c[0] for c in coords]
    ys = [c[1] for c in coords]
    for seq, name in ((xs, "x"), (ys, "y")):
        inc = all(u <= v for u, v in zip(seq, seq[1:]))
        dec = all(u >= v for u, v in zip(seq, seq[1:]))
        if not (inc or dec):
            problems.append(f"{name} sequence not monotone")
    # a = 2 degenerates to the two isolated atoms (1, 1) and (0, 0)
    chained = ladder.step != 2
    for (x0, y0), (x1, y1) in zip(coords, coords[1:]):
        if chained and x0 != x1 and y0 != y1:
            problems.append(f"consecutive points ({x0}, {y0}), ({x1}, {y1}) share no coordinate")
    for seq, name in ((xs, "vertical"), (ys, "horizontal")):
        for v in set(seq):
            if seq.count(v) > 2:
                problems.append(f"more than two points on {name} line {v}")
    for pt in pts:
        line = hi if pt.x_value == 1 else lo
        if pt.x + pt.y != line:
            problems.append(f"X={pt.x_value} point ({pt.x}, {pt.y}) off its line")
        if pt.mass <= 0:
            problems.append(f"nonpositive mass at ({pt.x}, {pt.y})")
    if ladder.mass(1) != ladder.prior:
        problems.append("X=1 mass differs from p")
    if ladder.mass(0) != 1 - ladder.prior:
        problems.append("X=0 mass differs from 1 - p")
    return problems
