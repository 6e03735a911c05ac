"""Closed-form tight bounds and the distributions attaining them.

* quadratic objectives alpha*(x1 - x2)^2 + beta*(x1 + x2 - 2p)^2 (any p),
* minimum covariance (any p),
* E|X1 - X2|^k at p = 1/2 (any k > 0),

plus the sphere maximization behind the quadratic bound and a brute-force
oracle for it.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize

from ._numbers import as_fraction
from .distribution import (
    JointAtomTable,
    complement,
    constant_expert,
    from_conditionals,
    fully_informed,
    one_informed,
)
from . import ladder as _ladder


@dataclass(frozen=True)
class QuadraticForm:
    alpha: object
    beta: object

    @property
    def step(self):
        """a = alpha / (alpha - beta)."""
        return self.alpha / (self.alpha - self.beta)


@dataclass(frozen=True)
class SphereInstance:
    alpha: float
    beta: float
    diameter_norm_sq: float = 1.0

    def __post_init__(self):
        if self.diameter_norm_sq < 0:
            raise ValueError("diameter_norm_sq must be nonnegative")


# --------------------------------------------------------------------------
# maximum over a sphere
# --------------------------------------------------------------------------


def sphere_max(inst: SphereInstance):
    """max of alpha|x1 - x2|^2 + beta|x1 + x2|^2 over x1, x2 on the sphere with diameter w."""
    a, b, w2 = inst.alpha, inst.beta, inst.diameter_norm_sq
    if a >= max(0, 2 * b):
        if a == b:  # only a == b == 0 reaches here
            return 0 * w2
        return w2 * a * a / (a - b)
    return w2 * max(0, 4 * b, a + b)


def sphere_max_numeric(inst: SphereInstance, resolution: int = 200, refine: int = 8) -> float:
    """Grid search over pairs of points on the sphere, then local polishing.

    The sphere has diameter vector w = (0, 0, d). Rotating about w leaves the
    objective unchanged, so x1 is kept in the xz-plane and the grid runs over
    (theta1, theta2, phi2) with ``resolution`` points per angle. The
    ``refine`` best grid points are polished with Nelder-Mead. Every value
    returned is attained by actual sphere points.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    a, b = float(inst.alpha), float(inst.beta)
    r = math.sqrt(float(inst.diameter_norm_sq)) / 2

    def points(theta, phi):
        return (
            r * np.sin(theta) * np.cos(phi),
            r * np.sin(theta) * np.sin(phi),
            r + r * np.cos(theta),
        )

    def value(t1, t2, f2):
        x1 = points(t1, 0.0)
        x2 = points(t2, f2)
        diff = sum((u - v) ** 2 for u, v in zip(x1, x2))
        tot = sum((u + v) ** 2 for u, v in zip(x1, x2))
        return a * diff + b * tot

    theta = np.linspace(0.0, math.pi, resolution)
    phi = np.linspace(0.0, math.pi, resolution)  # phi2 in [pi, 2pi] mirrors [0, pi]
    t2, f2 = np.meshgrid(theta, phi, indexing="ij")
    best: list[tuple[float, tuple]] = []
    for t1 in theta:
        vals = value(t1, t2, f2)
        k = int(np.argmax(vals))
        i, j = np.unravel_index(k, vals.shape)
        best.append((float(vals[i, j]), (float(t1), float(theta[i]), float(phi[j]))))
    best.sort(key=lambda item: -item[0])
    top = best[0][0]
    for _, start in best[:refine]:
        res = minimize(lambda v: -value(*v), np.array(start), method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        top = max(top, float(-res.fun))
    return top


# --------------------------------------------------------------------------
# quadratic objectives
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadBound:
    value: Fraction
    tight: bool
    spec: object = None  # LadderSpec / NotTight on the closed-form branch
    witness: object = None  # LadderDistribution, pair of them, or JointAtomTable
    attained_by: str = ""

    def witness_table(self, weight=Fraction(1, 2)) -> JointAtomTable | None:
        if self.witness is None:
            return None
        if isinstance(self.witness, JointAtomTable):
            return self.witness
        return _ladder.witness_table(self.witness, weight)


def _checked_prior(p) -> Fraction:
    p = as_fraction(p)
    if not 0 < p < 1:
        raise ValueError(f"prior must lie in (0, 1), got {p}")
    return p


def quad_bound(p, q: QuadraticForm) -> QuadBound:
    """Maximum of E[alpha(X1-X2)^2 + beta(X1+X2-2p)^2] over C_p, with tightness.

    Exact arithmetic: inputs are converted to Fractions.
    """
    p = _checked_prior(p)
    a, b = as_fraction(q.alpha), as_fraction(q.beta)
    var = p * (1 - p)
    if a >= max(0, 2 * b) and a != 0:
        value = var * a * a / (a - b)
        if a == 2 * b:
            # both formulas meet here: alpha^2/(alpha - beta) = 4 beta
            assert value == var * max(0, 4 * b, a + b)
        spec = _ladder.classify(p, a / (a - b))
        if not spec:
            return QuadBound(value, False, spec)
        return QuadBound(value, True, spec, _ladder.build_ladder(spec), "ladder")
    # remaining cases: alpha < 0, 2 beta > alpha, or alpha = 0 >= 2 beta
    options = [
        (Fraction(0), constant_expert(p), "X1 = X2 = p"),
        (4 * b, fully_informed(p), "X1 = X2 = X"),
        (a + b, one_informed(p), "X1 = X, X2 = p"),
    ]
    coef, table, label = max(options, key=lambda o: o[0])
    return QuadBound(var * coef, True, None, table, label)


# --------------------------------------------------------------------------
# covariance
# --------------------------------------------------------------------------


def cov_bound(p) -> Fraction:
    """min cov(X1, X2) over C_p (exact)."""
    p = _checked_prior(p)
    if p < Fraction(1, 3):
        return -(p * (1 - p) / (1 + p)) ** 2
    if p <= Fraction(2, 3):
        return -p * (1 - p) / 8
    return -(p * (1 - p) / (2 - p)) ** 2


def cov_witness(p, weight=Fraction(1, 2)) -> JointAtomTable:
    """Exact coherent table whose covariance equals :func:`cov_bound`.

    Small p: X = 1 puts both forecasts at 2p/(p+1); X = 0 splits evenly between
    (0, 2p/(p+1)) and (2p/(p+1), 0). Large p: complement of the 1 - p table.
    Middle: the step-1/2 ladder(s), mixed with ``weight`` when there are two.
    """
    p = _checked_prior(p)
    if p < Fraction(1, 3):
        t = 2 * p / (p + 1)
        half = Fraction(1, 2)
        return from_conditionals(p, [(t, t, 1, 1), (0, t, half, 0), (t, 0, half, 0)])
    if p > Fraction(2, 3):
        return complement(cov_witness(1 - p))
    built = _ladder.build_ladder(_ladder.classify(p, Fraction(1, 2)))
    return _ladder.witness_table(built, as_fraction(weight))


# --------------------------------------------------------------------------
# E|X1 - X2|^k at p = 1/2
# --------------------------------------------------------------------------


def _root(k: float) -> float:
    return math.sqrt(k * k + 6 * k + 1)


def abspow_step(k: float) -> float:
    """The maximizing a of 2a(1 - a)^k / (1 + a): (sqrt(k^2+6k+1) - (k+1)) / (2k).

    Written as 2 / (sqrt(k^2+6k+1) + k + 1) to avoid cancellation.
    """
    k = float(k)
    return 2.0 / (_root(k) + k + 1.0)


def six_point_value(k: float, a: float | None = None) -> float:
    """E|X1 - X2|^k of the six-point family, 2a(1 - a)^k / (1 + a).

    With ``a`` omitted this is the optimized closed form, evaluated in log
    space so that large k does not underflow prematurely.
    """
    k = float(k)
    if a is None:
        a = abspow_step(k)
    if a == 0 or a == 1:
        return 0.0
    return 2.0 * a / (1.0 + a) * math.exp(k * math.log1p(-a))


_alpha0_lock = threading.Lock()
_alpha0_value: float | None = None


def alpha0() -> float:
    """Crossover exponent where the six-point value overtakes 2^-k (bisection on [2, 3])."""
    global _alpha0_value
    with _alpha0_lock:
        if _alpha0_value is None:
            g = lambda k: six_point_value(k) - 2.0 ** -k  # noqa: E731
            lo, hi = 2.0, 3.0
            assert g(lo) < 0 < g(hi), "bracket [2, 3] does not straddle the crossover"
            while hi - lo > 1e-13:
                mid = 0.5 * (lo + hi)
                if g(mid) < 0:
                    lo = mid
                else:
                    hi = mid
            _alpha0_value = 0.5 * (lo + hi)
        return _alpha0_value


def abspow_bound(k) -> float:
    """max E|X1 - X2|^k over C_{1/2}."""
    k = float(k)
    if k <= 0:
        raise ValueError("exponent must be positive")
    if k <= alpha0():
        return 2.0 ** -k
    return six_point_value(k)


def abspow_witness(k, a: float | None = None) -> JointAtomTable:
    """Float table attaining :func:`abspow_bound` at p = 1/2.

    Below the crossover: X1 = X, X2 = 1/2. Above it: the six-point family at
    the optimal a. Passing ``a`` forces the six-point family at that a.
    """
    k = float(k)
    if k <= 0:
        raise ValueError("exponent must be positive")
    if a is None:
        if k <= alpha0():
            return from_conditionals(0.5, [(1.0, 0.5, 1.0, 1), (0.0, 0.5, 1.0, 0)])
        a = abspow_step(k)
    a = float(a)
    if not 0 <= a <= 1:
        raise ValueError("six-point parameter must lie in [0, 1]")
    side = a / (1 + a)
    diag = (1 - a) / (1 + a)
    rows = [
        (a, 1.0, side, 1), (1.0, a, side, 1), (1 - a, 1 - a, diag, 1),
        (0.0, 1 - a, side, 0), (1 - a, 0.0, side, 0), (a, a, diag, 0),
    ]
    return from_conditionals(0.5, [r for r in rows if r[2] != 0])


def asymptotic_check(k) -> float:
    """k * max E|X1 - X2|^k; tends to 2/e."""
    k = float(k)
    if k < alpha0():
        raise ValueError("asymptotic check needs exponent >= alpha0")
    return k * abspow_bound(k)
