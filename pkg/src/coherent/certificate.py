"""Piecewise dual certificates and numeric verification of their inequalities.

For a pair (g, h) and prior p the dual objective is

    p * sup_{x,y} [f(x,y) - g(x)(1-x) - h(y)(1-y)]
        + (1-p) * sup_{x,y} [f(x,y) + g(x) x + h(y) y],

an upper bound on E f over every coherent distribution with prior p. The
suprema are found by a dense sweep over a sample grid (which includes every
breakpoint, once per adjacent piece, so that one-sided limits are seen) and
a zoom refinement around the best local maxima of the sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .bounds import abspow_bound, abspow_step, cov_bound
from .distribution import ObjectiveFn

__all__ = [
    "Piece",
    "PiecewiseCertificate",
    "CovCertParams",
    "AbsPowCertParams",
    "SearchConfig",
    "SupResult",
    "VerificationReport",
    "cov_certificate",
    "abspow_certificate",
    "dual_value",
    "verify_certificate",
    "symmetrize",
    "antisymmetrize",
    "constant_certificate",
    "certify_cov",
    "certify_abspow",
]

KINDS = ("rational", "power", "linear", "zero", "constant", "composite", "envelope")


@dataclass(frozen=True)
class Piece:
    """One formula on [lo, hi]; ``closed_lo``/``closed_hi`` say which endpoints it owns.

    ``fn`` must accept numpy arrays and is also used for one-sided limits at
    endpoints it does not own. A piece with lo == hi is a single point.
    """

    lo: float
    hi: float
    kind: str
    fn: Callable = field(repr=False, compare=False)
    params: tuple = ()
    closed_lo: bool = True
    closed_hi: bool = True

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi <= 1:
            raise ValueError(f"piece domain [{self.lo}, {self.hi}] must lie inside [0, 1]")
        if self.kind not in KINDS:
            raise ValueError(f"unknown piece kind {self.kind!r}")

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.fn(x), dtype=float), x.shape).copy()

    def owns(self, x: np.ndarray) -> np.ndarray:
        lo_ok = (x >= self.lo) if self.closed_lo else (x > self.lo)
        hi_ok = (x <= self.hi) if self.closed_hi else (x < self.hi)
        return lo_ok & hi_ok


@dataclass(frozen=True)
class PiecewiseCertificate:
    pieces: tuple
    role: str = "g"  # g, h or s

    def __post_init__(self):
        pieces = tuple(sorted(self.pieces, key=lambda pc: (pc.lo, pc.hi)))
        object.__setattr__(self, "pieces", pieces)
        if self.role not in ("g", "h", "s"):
            raise ValueError("role must be 'g', 'h' or 's'")
        if not pieces:
            raise ValueError("certificate needs at least one piece")
        intervals = [pc for pc in pieces if not pc.is_point]
        if pieces[0].lo != 0 or max(pc.hi for pc in pieces) != 1:
            raise ValueError("pieces must cover [0, 1]")
        for a, b in zip(intervals, intervals[1:]):
            if b.lo < a.hi:
                raise ValueError("piece interiors overlap")
            if b.lo > a.hi:
                raise ValueError(f"gap between {a.hi} and {b.lo}")
        # every point of [0, 1] must be owned by some piece
        probe = np.array(self.breakpoints())
        if not np.all(self._owner(probe) >= 0):
            raise ValueError("some breakpoint is not owned by any piece")

    def breakpoints(self) -> list[float]:
        return sorted({pc.lo for pc in self.pieces} | {pc.hi for pc in self.pieces})

    def _owner(self, x: np.ndarray) -> np.ndarray:
        """Index of the piece evaluated at each x (first owner wins)."""
        idx = np.full(x.shape, -1, dtype=int)
        for k, pc in enumerate(self.pieces):
            hit = (idx < 0) & pc.owns(x)
            idx[hit] = k
        return idx

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        owner = self._owner(x)
        if np.any(owner < 0):
            raise ValueError("argument outside [0, 1]")
        out = np.empty(x.shape)
        for k, pc in enumerate(self.pieces):
            sel = owner == k
            if np.any(sel):
                out[sel] = pc(x[sel])
        return float(out[0]) if scalar else out

    def limits(self, x: float) -> list[float]:
        """Values of every piece whose closed interval contains x."""
        return [float(pc(np.array(x))) for pc in self.pieces if pc.lo <= x <= pc.hi]

    def scaled(self, factor: float) -> "PiecewiseCertificate":
        pieces = tuple(
            replace(pc, fn=(lambda x, fn=pc.fn: factor * fn(x)), kind=pc.kind if pc.kind == "zero" else "composite")
            for pc in self.pieces
        )
        return PiecewiseCertificate(pieces, self.role)

    def with_role(self, role: str) -> "PiecewiseCertificate":
        return PiecewiseCertificate(self.pieces, role)

    def describe(self) -> list[dict]:
        return [
            {"lo": pc.lo, "hi": pc.hi, "kind": pc.kind, "closed_lo": pc.closed_lo,
             "closed_hi": pc.closed_hi, "params": [float(v) for v in pc.params]}
            for pc in self.pieces
        ]


def constant_certificate(value: float = 0.0, role: str = "g") -> PiecewiseCertificate:
    kind = "zero" if value == 0 else "constant"
    return PiecewiseCertificate((Piece(0.0, 1.0, kind, lambda x: np.full(np.shape(x), float(value)), (value,)),), role)


# --------------------------------------------------------------------------
# the two explicit certificates
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CovCertParams:
    prior: float
    delta: float
    gamma: float
    x0: float

    @classmethod
    def at(cls, p: float) -> "CovCertParams":
        p = float(p)
        delta = (2 * p / (p + 1)) ** 3 - p * p
        gamma = 2 * delta + p * p + 2 * p - 3 * (delta + p * p) ** (2.0 / 3.0)
        x0 = math.sqrt(2 * (delta + p * p))
        return cls(p, delta, gamma, x0)

    @property
    def dual_value(self) -> float:
        return self.prior * self.gamma + (1 - self.prior) * self.delta


def cov_certificate(p) -> tuple[PiecewiseCertificate, CovCertParams]:
    """g for maximizing -(x-p)(y-p) when 0 < p <= 1/3.

    g(x) = x0 - p - x/2 below x0 and (delta + p^2)/x - p above it; the two
    formulas meet at x0.
    """
    p = float(p)
    if not 0 < p <= 1 / 3 + 1e-15:
        raise ValueError("covariance certificate needs 0 < p <= 1/3")
    prm = CovCertParams.at(p)
    c = prm.delta + p * p
    assert prm.x0 <= 0.5 + 1e-12 and c > 0
    left = Piece(0.0, prm.x0, "linear", lambda x: prm.x0 - p - x / 2, (prm.x0 - p, -0.5))
    right = Piece(prm.x0, 1.0, "rational", lambda x: c / x - p, (c, -p), closed_lo=False)
    assert abs(float(left(prm.x0)) - float(right(prm.x0))) <= 1e-12
    return PiecewiseCertificate((left, right), "g"), prm


@dataclass(frozen=True)
class AbsPowCertParams:
    exponent: float
    opt: float
    y0: float


def _abspow_y0(k: float, opt: float) -> float:
    if k <= 1:
        # -k y^(k-1) + 1 - opt <= 0 holds for every y in (0, 1] once k <= 1
        assert opt < 1
        return 0.5
    base = (1 - opt) / k
    y = math.exp(math.log(base) / (k - 1))
    return min(max(y, 0.5), 1.0)


def _left_envelope(k: float, opt: float, hi: float, starts: int = 3, grid: int = 513, steps: int = 48):
    """M(y) = max over x in [0, hi] of (y - x)^k + ((1-x)^k - opt) x / (1-x), for y >= hi.

    Vectorized over y: grid search in x, then a zoom from the best few local
    maxima of each row.
    """

    def phi(y, x):
        return (y - x) ** k + x * ((1 - x) ** k - opt) / (1 - x)

    xs = np.linspace(0.0, hi, grid)
    h0 = xs[1] - xs[0] if grid > 1 else 0.0

    def envelope(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        vals = phi(y[:, None], xs[None, :])
        padded = np.pad(vals, ((0, 0), (1, 1)), constant_values=-np.inf)
        peak = (vals >= padded[:, :-2]) & (vals >= padded[:, 2:])
        ranked = np.where(peak, vals, -np.inf)
        take = min(starts, grid)
        idx = np.argsort(-ranked, axis=1, kind="stable")[:, :take]
        best = vals.max(axis=1)
        offsets = np.linspace(-1.0, 1.0, 5)
        for c in range(take):
            x = xs[idx[:, c]]
            val = phi(y, x)
            h = h0
            for _ in range(steps):
                cand = np.clip(x[:, None] + h * offsets[None, :], 0.0, hi)
                cv = phi(y[:, None], cand)
                j = np.argmax(cv, axis=1)
                rows = np.arange(y.size)
                better = cv[rows, j] > val
                x = np.where(better, cand[rows, j], x)
                val = np.maximum(val, cv[rows, j])
                h /= 2
            best = np.maximum(best, val)
        return best

    return envelope


def abspow_certificate(k, scale: float = 1.0, middle: str = "envelope") -> tuple[PiecewiseCertificate, AbsPowCertParams]:
    """Antisymmetric s for |x - y|^k at p = 1/2.

    s(x) = ((1-x)^k - opt)/(1-x) on [0, 1-y0] and (opt - x^k)/x on [y0, 1].
    With ``middle="zero"`` s vanishes on (1-y0, y0). That choice breaks down
    once y0^k > opt (around k = 5.5): the point (0, y) just below y0 then
    scores y^k > opt. The default ``middle="envelope"`` instead uses

        s(y) = min(0, (opt - M(y)) / y)   on [1/2, y0),

    where M(y) is the largest value of (y - x)^k + x s(x) over the left
    piece, and mirrors it antisymmetrically onto (1-y0, 1/2). Whenever the
    zero band is already valid M(y) <= opt there, so both choices coincide.
    ``scale`` multiplies s (used to build deliberately broken certificates).
    """
    k = float(k)
    if k <= 0:
        raise ValueError("exponent must be positive")
    if middle not in ("envelope", "zero"):
        raise ValueError("middle must be 'envelope' or 'zero'")
    opt = abspow_bound(k)
    y0 = _abspow_y0(k, opt)
    lo_end = 1 - y0

    def left(x):
        return scale * ((1 - x) ** k - opt) / (1 - x)

    def right(x):
        return scale * (opt - x**k) / x

    zero = lambda x: np.zeros(np.shape(x))  # noqa: E731
    if y0 > 0.5:
        if middle == "zero":
            band = (Piece(lo_end, y0, "zero", zero, (), closed_lo=False, closed_hi=False),)
        else:
            env = _left_envelope(k, opt, lo_end)

            def upper(y):
                y = np.asarray(y, dtype=float)
                return scale * np.minimum(0.0, (opt - env(y.ravel())) / y.ravel()).reshape(y.shape)

            def lower(x):
                return -upper(1 - np.asarray(x, dtype=float))

            band = (
                Piece(lo_end, 0.5, "envelope", lower, (k, opt), closed_lo=False, closed_hi=False),
                Piece(0.5, 0.5, "zero", zero),
                Piece(0.5, y0, "envelope", upper, (k, opt), closed_lo=False, closed_hi=False),
            )
        pieces = (Piece(0.0, lo_end, "power", left, (k, opt)), *band,
                  Piece(y0, 1.0, "power", right, (k, opt)))
    else:
        # s(1/2) = 0 is forced by s(x) + s(1-x) = 0
        pieces = (
            Piece(0.0, 0.5, "power", left, (k, opt), closed_hi=False),
            Piece(0.5, 0.5, "zero", zero),
            Piece(0.5, 1.0, "power", right, (k, opt), closed_lo=False),
        )
    return PiecewiseCertificate(pieces, "s"), AbsPowCertParams(k, opt, y0)


# --------------------------------------------------------------------------
# combining certificates
# --------------------------------------------------------------------------


def _covering(cert: PiecewiseCertificate, u: float, v: float) -> Piece:
    for pc in cert.pieces:
        if not pc.is_point and pc.lo <= u and v <= pc.hi:
            return pc
    raise ValueError(f"no piece covers ({u}, {v})")


def _combine(breaks: Sequence[float], interval_fn, point_value, role: str) -> PiecewiseCertificate:
    """Open pieces between consecutive breaks plus a point piece at each break."""
    breaks = sorted(set(float(b) for b in breaks) | {0.0, 1.0})
    pieces = []
    for b in breaks:
        val = float(point_value(b))
        pieces.append(Piece(b, b, "constant", lambda x, val=val: np.full(np.shape(x), val), (val,)))
    for u, v in zip(breaks, breaks[1:]):
        pieces.append(Piece(u, v, "composite", interval_fn(u, v), closed_lo=False, closed_hi=False))
    return PiecewiseCertificate(tuple(pieces), role)


def symmetrize(g: PiecewiseCertificate, h: PiecewiseCertificate) -> PiecewiseCertificate:
    """(g + h)/2 on the merged breakpoints."""
    if g is h or g.pieces == h.pieces:
        return g

    def interval_fn(u, v):
        pg, ph = _covering(g, u, v), _covering(h, u, v)
        return lambda x: 0.5 * (pg(x) + ph(x))

    return _combine(g.breakpoints() + h.breakpoints(), interval_fn,
                    lambda b: 0.5 * (g(b) + h(b)), "g")


def antisymmetrize(h: PiecewiseCertificate) -> PiecewiseCertificate:
    """s(x) = (h(x) - h(1-x))/2; satisfies s(x) + s(1-x) = 0."""
    bps = h.breakpoints()
    breaks = bps + [1 - b for b in bps]

    def interval_fn(u, v):
        direct = _covering(h, u, v)
        mirror = _covering(h, 1 - v, 1 - u)
        return lambda x: 0.5 * (direct(x) - mirror(1 - x))

    s = _combine(breaks, interval_fn, lambda b: 0.5 * (h(b) - h(1 - b)), "s")
    probe = np.linspace(0, 1, 101)
    assert np.allclose(s(probe) + s(1 - probe), 0, atol=1e-12)
    return s


# --------------------------------------------------------------------------
# supremum search
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    grid: int = 2001
    steps: int = 40
    cells: int = 16
    witness_tol: float = 1e-7
    spread: float = 0.02


@dataclass(frozen=True)
class SupResult:
    value: float
    argmax: tuple
    maximizers: tuple  # refined local maxima within witness_tol of the sup


def _samples(cert: PiecewiseCertificate, n: int):
    """Sample abscissae with the piece used at each; breakpoints repeat once per piece."""
    xs = np.linspace(0.0, 1.0, n)
    owner = cert._owner(xs)
    xs_l, pc_l = [xs], [owner]
    for b in cert.breakpoints():
        for k, pc in enumerate(cert.pieces):
            if pc.lo <= b <= pc.hi:
                xs_l.append(np.array([b]))
                pc_l.append(np.array([k]))
    x = np.concatenate(xs_l)
    k = np.concatenate(pc_l)
    order = np.lexsort((k, x))
    x, k = x[order], k[order]
    vals = np.empty(x.shape)
    for idx, pc in enumerate(cert.pieces):
        sel = k == idx
        if np.any(sel):
            vals[sel] = pc(x[sel])
    return x, k, vals


def _fvals(f, x, y):
    out = np.asarray(f(x, y), dtype=float)
    if out.shape != np.broadcast(x, y).shape:
        out = np.broadcast_to(out, np.broadcast(x, y).shape)
    return out


def _sup(f, cert_x, cert_y, weight_x, weight_y, search: SearchConfig) -> SupResult:
    """sup of f(x,y) + weight_x(x) cert_x(x) + weight_y(y) cert_y(y)."""
    xs, kx, gx = _samples(cert_x, search.grid)
    ys, ky, gy = _samples(cert_y, search.grid)
    ux = weight_x(xs) * gx
    uy = weight_y(ys) * gy
    F = _fvals(f, xs[:, None], ys[None, :]) + ux[:, None] + uy[None, :]
    F = np.where(np.isnan(F), -np.inf, F)
    top = float(F.max())

    # ulp-level slack so that a ridge of equal values forms one component
    slack = 1e-12 * max(1.0, abs(top))
    peak = F >= ndimage.maximum_filter(F, size=3, mode="nearest") - slack
    labels, count = ndimage.label(peak, structure=np.ones((3, 3)))
    starts = []
    if count:
        idx = np.arange(1, count + 1)
        best = ndimage.maximum(F, labels, idx)
        where = ndimage.maximum_position(F, labels, idx)
        order = np.argsort(-np.asarray(best), kind="stable")
        # one start per neighbourhood, so a long ridge cannot use up every slot
        for o in order:
            i, j = where[o]
            if all(abs(xs[i] - xs[a]) > search.spread or abs(ys[j] - ys[b]) > search.spread
                   for a, b in starts):
                starts.append((i, j))
                if len(starts) == search.cells:
                    break
    gi, gj = np.unravel_index(int(np.argmax(F)), F.shape)
    if (gi, gj) not in starts:
        starts.insert(0, (gi, gj))

    h0 = 1.0 / (search.grid - 1)
    found = []
    for i, j in starts:
        px, py = cert_x.pieces[kx[i]], cert_y.pieces[ky[j]]
        x, y = xs[i], ys[j]
        val = float(F[i, j])
        h = h0
        for _ in range(search.steps):
            cx = np.clip(x + h * np.linspace(-1, 1, 5), px.lo, px.hi)
            cy = np.clip(y + h * np.linspace(-1, 1, 5), py.lo, py.hi)
            loc = (_fvals(f, cx[:, None], cy[None, :])
                   + (weight_x(cx) * px(cx))[:, None] + (weight_y(cy) * py(cy))[None, :])
            loc = np.where(np.isnan(loc), -np.inf, loc)
            a, b = np.unravel_index(int(np.argmax(loc)), loc.shape)
            if loc[a, b] > val:
                val, x, y = float(loc[a, b]), float(cx[a]), float(cy[b])
            h /= 2
        found.append((val, float(x), float(y)))
        top = max(top, val)

    found.sort(key=lambda t: (-t[0], t[1], t[2]))
    best_pt = (found[0][1], found[0][2]) if found else (float(xs[gi]), float(ys[gj]))
    near = []
    for val, x, y in found:
        if val >= top - search.witness_tol:
            pt = (round(x, 9), round(y, 9))
            if pt not in near:
                near.append(pt)
    return SupResult(top, best_pt, tuple(near))


def _as_pair(cert) -> tuple[PiecewiseCertificate, PiecewiseCertificate]:
    if isinstance(cert, PiecewiseCertificate):
        return cert, cert
    g, h = cert
    return g, h


def _both_sups(cert, f, search: SearchConfig) -> tuple[SupResult, SupResult]:
    g, h = _as_pair(cert)
    first = _sup(f, g, h, lambda x: -(1 - x), lambda y: -(1 - y), search)
    second = _sup(f, g, h, lambda x: x, lambda y: y, search)
    return first, second


def dual_value(cert, f: ObjectiveFn | Callable, p, search: SearchConfig | None = None) -> float:
    """Dual objective of the pair (g, h); a single certificate c means the pair (c, c)."""
    search = search or SearchConfig()
    p = float(p)
    first, second = _both_sups(cert, f, search)
    return p * first.value + (1 - p) * second.value


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    max_violation_1: float
    max_violation_2: float
    sup_1: SupResult
    sup_2: SupResult
    targets: tuple
    dual_value: float
    tol: float

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "max_violation_1": self.max_violation_1,
            "max_violation_2": self.max_violation_2,
            "sup_1": self.sup_1.value,
            "sup_2": self.sup_2.value,
            "argmax_1": list(self.sup_1.argmax),
            "argmax_2": list(self.sup_2.argmax),
            "maximizers_1": [list(pt) for pt in self.sup_1.maximizers],
            "maximizers_2": [list(pt) for pt in self.sup_2.maximizers],
            "targets": list(self.targets),
            "dual_value": self.dual_value,
            "tol": self.tol,
        }


def verify_certificate(cert, f: ObjectiveFn | Callable, p, target,
                       search: SearchConfig | None = None, tol: float = 1e-9) -> VerificationReport:
    """Check sup_1 <= t1 and sup_2 <= t2, where ``target`` is (t1, t2) or one value for both.

    For the covariance certificate the targets are (gamma, delta); for the
    antisymmetric certificate both are opt.
    """
    search = search or SearchConfig()
    p = float(p)
    if np.ndim(target) == 0:
        t1 = t2 = float(target)
    else:
        t1, t2 = (float(t) for t in target)
    first, second = _both_sups(cert, f, search)
    v1, v2 = first.value - t1, second.value - t2
    value = p * first.value + (1 - p) * second.value
    return VerificationReport(bool(v1 <= tol and v2 <= tol), v1, v2, first, second,
                              (t1, t2), value, tol)


def certify_cov(p, search: SearchConfig | None = None, tol: float = 1e-9):
    cert, prm = cov_certificate(p)
    f = ObjectiveFn.neg_cov(float(p))
    report = verify_certificate(cert, f, p, (prm.gamma, prm.delta), search, tol)
    return cert, prm, report, -float(cov_bound(p))


def certify_abspow(k, scale: float = 1.0, search: SearchConfig | None = None, tol: float = 1e-9,
                   middle: str = "envelope"):
    cert, prm = abspow_certificate(k, scale, middle)
    f = ObjectiveFn.abspow(float(k))
    report = verify_certificate(cert, f, 0.5, prm.opt, search, tol)
    return cert, prm, report, abspow_bound(k)


def witness_step(k) -> float:
    """The six-point atom a at which the antisymmetric certificate is tight."""
    return abspow_step(k)
