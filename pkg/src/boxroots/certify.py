"""Existence and uniqueness certificates for roots inside boxes.

A certificate is produced by running a verification operator on a box and
checking its fixed-point condition:

* ``krawczyk_test``         unique root if the Krawczyk image lands strictly
                            inside the box
* ``hansen_sengupta_test``  unique root if the Hansen-Sengupta image lands
                            strictly inside and every preconditioned diagonal
                            division was single-piece
* ``miranda_test``          existence only, from opposite constant signs on
                            opposite faces (optionally preconditioned)

``inflate_and_certify`` retries Hansen-Sengupta on slightly grown boxes so
that roots sitting on a cell boundary are not lost to the tolerance cutoff,
and ``dedup_solutions`` merges certified enclosures of the same root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contractors import _point_inverse, hansen_sengupta_step, krawczyk_step
from .expression import System, tape_of
from .interval import Box, _down, _k_add, _k_mul, _up

UNIQUE = "unique"
EXISTS = "exists"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class CertificationResult:
    """Outcome of a verification operator on a query box.

    ``status`` is one of ``unique`` (exactly one root, enclosed by ``box``),
    ``exists`` (at least one root in ``box``), or ``unknown``.  A returned
    box is always a subset of the query box after any internal widening of
    degenerate components.
    """

    status: str
    box: Box | None = None

    @property
    def unique(self) -> bool:
        return self.status == UNIQUE

    @property
    def exists(self) -> bool:
        return self.status in (UNIQUE, EXISTS)


_UNKNOWN = CertificationResult(UNKNOWN)


def _widen_degenerate(b: Box) -> Box:
    """Grow near-degenerate components so that strict interiority is
    attainable.  The operator image carries a few ulps of outward slop from
    evaluating f and J, so components narrower than a small multiple of
    their magnitude can never contain their own image strictly; those are
    padded out to that scale before the test runs."""
    lo = list(b.lo)
    hi = list(b.hi)
    changed = False
    for i in range(len(lo)):
        pad = max(abs(lo[i]), abs(hi[i])) * 1e-13 or 5e-300
        if hi[i] - lo[i] < pad:
            lo[i] = min(_down(lo[i]), lo[i] - pad)
            hi[i] = max(_up(hi[i]), hi[i] + pad)
            changed = True
    return Box._raw(lo, hi) if changed else b


def krawczyk_test(system: System, b: Box) -> CertificationResult:
    """Unique-root certificate from one Krawczyk step landing strictly
    inside the box; anything else is unknown."""
    if system.nonsquare or not b.is_bounded():
        return _UNKNOWN
    b = _widen_degenerate(b)
    r = krawczyk_step(system, b)
    if r.empty or r.interior_by != "k":
        return _UNKNOWN
    return CertificationResult(UNIQUE, r.box)


def hansen_sengupta_test(system: System, b: Box) -> CertificationResult:
    """Unique-root certificate from one Hansen-Sengupta step: strict
    interiority plus single-piece diagonal divisions."""
    if system.nonsquare or not b.is_bounded():
        return _UNKNOWN
    b = _widen_degenerate(b)
    r = hansen_sengupta_step(system, b)
    if r.empty or r.interior_by != "hs":
        return _UNKNOWN
    return CertificationResult(UNIQUE, r.box)


def _face_value(tape, lo, hi, i: int, at: float):
    save_l, save_h = lo[i], hi[i]
    lo[i] = hi[i] = at
    out = tape.eval_interval(lo, hi)
    lo[i], hi[i] = save_l, save_h
    return out


def miranda_test(system: System, b: Box, precondition: bool = True) -> CertificationResult:
    """Existence certificate from sign changes on opposite faces: for every
    i the i-th (optionally preconditioned) function must keep one constant
    sign on the face x_i = lo_i and the opposite sign on x_i = hi_i.  Never
    claims uniqueness."""
    if system.nonsquare or not b.is_bounded():
        return _UNKNOWN
    b = _widen_degenerate(b)
    n = len(b)
    tapes = [tape_of(e) for e in system.equations]
    C = None
    if precondition:
        C = _point_inverse(system.jacobian_evaluator().interval(b))
    lo = list(b.lo)
    hi = list(b.hi)
    for i in range(n):
        faces = []
        for at in (b.lo[i], b.hi[i]):
            if C is None:
                out = _face_value(tapes[i], lo, hi, i, at)
                if out is None:
                    return _UNKNOWN
                faces.append(out)
            else:
                acc_lo = acc_hi = 0.0
                for j in range(n):
                    c = C[i, j]
                    if c == 0.0:
                        continue
                    out = _face_value(tapes[j], lo, hi, i, at)
                    if out is None:
                        return _UNKNOWN
                    tl, th = _k_mul(c, c, out[0], out[1])
                    acc_lo, acc_hi = _k_add(acc_lo, acc_hi, tl, th)
                faces.append((acc_lo, acc_hi))
        (fl_lo, fl_hi), (fh_lo, fh_hi) = faces
        if not ((fl_hi <= 0.0 <= fh_lo) or (fh_hi <= 0.0 <= fl_lo)):
            return _UNKNOWN
    return CertificationResult(EXISTS, b)


def inflate_and_certify(
    system: System, b: Box, factor: float = 1.1, max_rounds: int = 5
) -> CertificationResult:
    """Grow the box about its midpoint by ``factor`` per round, attempting a
    Hansen-Sengupta certificate each time; first success wins.

    Growth is multiplicative plus an escalating absolute pad of a few ulps
    at the box's magnitude scale.  Multiplication alone cannot rescue a box
    that contraction collapsed to near machine width: the operator image
    carries an absolute rounding slop set by the magnitudes flowing through
    f and J, and a candidate must be wider than that slop to contain its
    own image strictly."""
    if factor <= 1.0:
        raise ValueError("inflation factor must be > 1")
    scale = max((max(abs(l), abs(h)) for l, h in zip(b.lo, b.hi)), default=0.0)
    if not scale or not math.isfinite(scale):
        scale = 1.0
    pad = scale * 4e-16
    cur = b
    for _ in range(max_rounds):
        cur = cur.inflate(factor)
        cur = Box._raw([l - pad for l in cur.lo], [h + pad for h in cur.hi])
        r = hansen_sengupta_test(system, cur)
        if r.unique:
            return r
        pad *= 8.0
    return _UNKNOWN


def newton_polish(
    system: System,
    x0,
    max_iter: int = 50,
    tol: float = 1e-12,
) -> np.ndarray | None:
    """Damped Newton refinement of an approximate root; None when the
    iteration stalls, hits a singular Jacobian, or leaves the float range."""
    jev = system.jacobian_evaluator()
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(system.residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        return None
    rn = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if rn <= tol:
            return x
        J = jev.point(x)
        if not np.all(np.isfinite(J)):
            return None
        try:
            d = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(30):
            xn = x + lam * d
            rnew = np.asarray(system.residual(xn), dtype=float)
            if np.all(np.isfinite(rnew)):
                rn_new = float(np.max(np.abs(rnew)))
                if rn_new < rn:
                    x, r, rn = xn, rnew, rn_new
                    break
            lam *= 0.5
        else:
            return x if rn <= tol else None
    return x if rn <= tol else None


def inequalities_decided(system: System, b: Box) -> bool:
    """True when every side inequality holds with a rigorous interval sign
    over the whole box; an undecided sign disqualifies the box."""
    lo, hi = b.lo, b.hi
    for expr, rel in system.inequalities:
        out = tape_of(expr).eval_interval(lo, hi)
        if out is None:
            return False
        vl, vh = out
        if rel == "<":
            ok = vh < 0.0
        elif rel == "<=":
            ok = vh <= 0.0
        elif rel == ">":
            ok = vl > 0.0
        else:
            ok = vl >= 0.0
        if not ok:
            return False
    return True


def dedup_solutions(
    certified: list[Box], tol: float, system: System | None = None
) -> list[Box]:
    """Merge certified enclosures of the same root: boxes that overlap, or
    whose polished midpoints coincide within ``tol``, are hulled together and
    counted once.  Output is sorted canonically, so the result is independent
    of input order and stable under re-deduplication."""
    boxes = [b.copy() for b in certified]
    if not boxes:
        return []
    points: list[list[float]] = []
    for b in boxes:
        m = b.mid_point()
        if system is not None:
            p = newton_polish(system, m)
            points.append(list(map(float, p)) if p is not None else m)
        else:
            points.append(m)

    changed = True
    while changed:
        changed = False
        out_boxes: list[Box] = []
        out_points: list[list[float]] = []
        for b, p in zip(boxes, points):
            merged = False
            for k in range(len(out_boxes)):
                if out_boxes[k].overlaps(b) or all(
                    abs(a - c) <= tol for a, c in zip(out_points[k], p)
                ):
                    out_boxes[k] = out_boxes[k].hull(b)
                    merged = True
                    changed = True
                    break
            if not merged:
                out_boxes.append(b)
                out_points.append(p)
        boxes, points = out_boxes, out_points
    order = sorted(range(len(boxes)), key=lambda k: tuple(boxes[k].lo))
    return [boxes[k] for k in order]
