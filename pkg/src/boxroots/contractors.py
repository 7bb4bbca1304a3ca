"""Contraction operators that narrow a box without losing any solution.

Every operator maps (system, box) to a sub-box guaranteed to contain all
solutions of the system inside the original box, or reports the box empty.
Some operators also discover gaps: open intervals in one coordinate proven
solution-free, useful later as bisection points.

Available stages, composable into a pipeline string such as
``"hc4,hc4bc3,3b,hs"``:

``hc4``
    Agenda-driven constraint propagation where each constraint is revised by
    a forward evaluation sweep followed by backward projection of the
    relation onto every node of its tree ("hull consistency").
``hc4bc3``
    Same revision, followed by endpoint narrowing with a univariate interval
    Newton for variables occurring more than once in the constraint, which
    limits the loss from the dependency problem at the box faces.
``bc3``
    The endpoint narrowing alone, over all equation/variable pairs.
``3b``
    Slab shaving: slices at each face whose inner hc4 fixpoint proves them
    empty are cut off.
``gs``
    Preconditioned interval Gauss-Seidel on the mean-value linearization.
``hs``
    The Hansen-Sengupta operator: Gauss-Seidel around the midpoint with
    extended division.
``k``
    The Krawczyk operator (no division, so never splits).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .interval import (
    ENTIRE,
    Box,
    Interval,
    IntervalMatrix,
    _down,
    _k_add,
    _k_atanh,
    _k_div,
    _k_exp,
    _k_log,
    _k_mul,
    _k_pow_int,
    _k_root,
    _k_sub,
    _pmul,
    _up,
    extended_divide,
)
from .expression import (
    ABS,
    ADD,
    CONST,
    DIV,
    MUL,
    NEG,
    POWC,
    POWI,
    SIN,
    COS,
    TAN,
    EXP,
    LOG,
    SQRT,
    TANH,
    ATAN,
    SUB,
    VAR,
    Expr,
    System,
    differentiate,
    tape_of,
)

__all__ = [
    "ContractContext",
    "ContractionResult",
    "hc4_revise",
    "propagate",
    "bc3_revise",
    "gauss_seidel",
    "hansen_sengupta_step",
    "krawczyk_step",
    "shave_3b",
    "Pipeline",
    "parse_pipeline",
    "STAGES",
]

_INF = math.inf

# Closure of the admissible residual set for each relation; strictness only
# matters at certification time, pruning may use the closed set.
_REL_TARGET = {
    "=": (0.0, 0.0),
    "<": (-_INF, 0.0),
    "<=": (-_INF, 0.0),
    ">": (0.0, _INF),
    ">=": (0.0, _INF),
}

_PI_LO = math.pi
_PI_HI = math.nextafter(math.pi, math.inf)
_HALF_PI_LO = math.pi / 2
_HALF_PI_HI = math.nextafter(math.pi / 2, math.inf)
_MAX_TRIG_BRANCHES = 64


@dataclass
class ContractContext:
    """Shared state threaded through contraction: a wall-clock deadline
    (absolute time.monotonic value) and counters."""

    deadline: float | None = None
    stats: dict[str, int] = field(default_factory=dict)

    def expired(self) -> bool:
        return self.deadline is not None and time.monotonic() >= self.deadline

    def count(self, key: str, n: int = 1) -> None:
        self.stats[key] = self.stats.get(key, 0) + n


@dataclass
class ContractionResult:
    """Outcome of contracting one box.  ``box`` is None when the box was
    proven to contain no solution.  ``gaps`` lists open solution-free
    intervals (var, lo, hi) with lo < hi, relative to the returned box's
    coordinates.  ``interior_by`` names the operator whose image landed
    strictly inside the input box with its uniqueness side condition
    satisfied, if any."""

    box: Box | None
    gaps: list[tuple[int, float, float]] = field(default_factory=list)
    interior_by: str | None = None

    @property
    def empty(self) -> bool:
        return self.box is None


# ---------------------------------------------------------------------------
# Backward projection helpers (float endpoint pairs; None means infeasible)
# ---------------------------------------------------------------------------


def _isect(al: float, ah: float, bl: float, bh: float) -> tuple[float, float] | None:
    lo = al if al >= bl else bl
    hi = ah if ah <= bh else bh
    if lo > hi:
        return None
    return lo, hi


def _sin_branch_piece(k: int, tl: float, th: float) -> tuple[float, float] | None:
    """Preimage of [tl, th] under sin inside the monotone branch around
    k*pi, as an outward enclosure."""
    if k % 2:
        tl, th = -th, -tl
    if th < -1.0 or tl > 1.0:
        return None
    lo = -_HALF_PI_HI if tl <= -1.0 else _down(_down(math.asin(tl)))
    hi = _HALF_PI_HI if th >= 1.0 else _up(_up(math.asin(th)))
    if k >= 0:
        klo, khi = _pmul(k, _PI_LO), _pmul(k, _PI_HI)
    else:
        klo, khi = _pmul(k, _PI_HI), _pmul(k, _PI_LO)
    return _down(klo + lo), _up(khi + hi)


def _back_sin(tl: float, th: float, al: float, ah: float) -> tuple[float, float] | None:
    """Hull of {x in [al, ah] : sin(x) in [tl, th]}, outward.  Gives up (no
    tightening) on very wide arguments."""
    if th < -1.0 or tl > 1.0:
        return None
    if not (math.isfinite(al) and math.isfinite(ah)):
        return al, ah
    span = ah - al
    if span > _MAX_TRIG_BRANCHES * math.pi:
        return al, ah
    k_first = math.floor(al / math.pi + 0.5) - 1
    k_last = math.floor(ah / math.pi + 0.5) + 1
    new_lo = None
    for k in range(k_first, k_last + 1):
        piece = _sin_branch_piece(k, tl, th)
        if piece is None:
            continue
        got = _isect(piece[0], piece[1], al, ah)
        if got is not None:
            new_lo = got[0]
            break
    if new_lo is None:
        return None
    new_hi = al
    for k in range(k_last, k_first - 1, -1):
        piece = _sin_branch_piece(k, tl, th)
        if piece is None:
            continue
        got = _isect(piece[0], piece[1], al, ah)
        if got is not None:
            new_hi = got[1]
            break
    return new_lo, new_hi


def _back_cos(tl: float, th: float, al: float, ah: float) -> tuple[float, float] | None:
    # cos x = sin(x + pi/2): shift, project, shift back
    if not (math.isfinite(al) and math.isfinite(ah)):
        if th < -1.0 or tl > 1.0:
            return None
        return al, ah
    sl = _down(al + _HALF_PI_LO)
    sh = _up(ah + _HALF_PI_HI)
    got = _back_sin(tl, th, sl, sh)
    if got is None:
        return None
    lo = _down(got[0] - _HALF_PI_HI)
    hi = _up(got[1] - _HALF_PI_LO)
    return _isect(lo, hi, al, ah)


def _back_tan(tl: float, th: float, al: float, ah: float) -> tuple[float, float] | None:
    """Hull of {x in [al, ah] : tan(x) in [tl, th]}, outward."""
    if not (math.isfinite(al) and math.isfinite(ah)):
        return al, ah
    if ah - al > _MAX_TRIG_BRANCHES * math.pi:
        return al, ah
    atl = _down(_down(math.atan(tl))) if math.isfinite(tl) else -_HALF_PI_HI
    ath = _up(_up(math.atan(th))) if math.isfinite(th) else _HALF_PI_HI
    k_first = math.floor(al / math.pi + 0.5) - 1
    k_last = math.floor(ah / math.pi + 0.5) + 1
    new_lo = None
    for k in range(k_first, k_last + 1):
        if k >= 0:
            klo, khi = _pmul(k, _PI_LO), _pmul(k, _PI_HI)
        else:
            klo, khi = _pmul(k, _PI_HI), _pmul(k, _PI_LO)
        got = _isect(_down(klo + atl), _up(khi + ath), al, ah)
        if got is not None:
            new_lo = got[0]
            break
    if new_lo is None:
        return None
    new_hi = al
    for k in range(k_last, k_first - 1, -1):
        if k >= 0:
            klo, khi = _pmul(k, _PI_LO), _pmul(k, _PI_HI)
        else:
            klo, khi = _pmul(k, _PI_HI), _pmul(k, _PI_LO)
        got = _isect(_down(klo + atl), _up(khi + ath), al, ah)
        if got is not None:
            new_hi = got[1]
            break
    return new_lo, new_hi


def _back_log_base(base: float, tl: float, th: float) -> tuple[float, float] | None:
    """x with base**x in [tl, th]: base-logarithm of the positive part,
    outward.  Bases 2, 10 and e take the directly-rounded library log; other
    bases go through an interval quotient of natural logs."""
    if th <= 0.0:
        return None
    tl = max(tl, 0.0)
    logf = {2.0: math.log2, 10.0: math.log10, math.e: math.log}.get(base)
    if logf is not None:
        lo = -_INF if tl == 0.0 else _down(logf(tl))
        hi = _INF if th == _INF else _up(logf(th))
        return lo, hi
    got = _k_log(tl if tl > 0.0 else 5e-324, th)
    if got is None:
        return None
    ll, lh = got
    if tl == 0.0:
        ll = -_INF
    lb = math.log(base)
    out = _k_div(ll, lh, _down(lb), _up(lb))
    if out is None:  # pragma: no cover - ln(base) never straddles zero
        return None
    return out


def _back_atan(tl: float, th: float) -> tuple[float, float] | None:
    """x with atan(x) in [tl, th]: tan on the principal branch."""
    if th < -_HALF_PI_HI or tl > _HALF_PI_HI:
        return None
    if tl < -_HALF_PI_LO:
        lo = -_INF
    else:
        lo = _down(_down(math.tan(min(tl, _HALF_PI_LO))))
    if th > _HALF_PI_LO:
        hi = _INF
    else:
        hi = _up(_up(math.tan(max(th, -_HALF_PI_LO))))
    return lo, hi


# ---------------------------------------------------------------------------
# HC4 revise
# ---------------------------------------------------------------------------


def _tape_scratch(tape) -> tuple[list[float], list[float], list[float], list[float]]:
    if tape.scr is None:
        n = tape.size
        tape.scr = ([0.0] * n, [0.0] * n, [0.0] * n, [0.0] * n)
    return tape.scr


def _revise(
    tape,
    rel_lo: float,
    rel_hi: float,
    var_lo: list[float],
    var_hi: list[float],
    gaps: list[tuple[int, float, float]] | None,
) -> bool:
    """Hull-consistency revision of one constraint against the variable
    domains, narrowing var_lo/var_hi in place.  Returns False when the
    constraint proves the domains infeasible.  At most one discovered gap is
    appended per call."""
    vlo, vhi, tlo, thi = _tape_scratch(tape)
    out = tape.eval_interval(var_lo, var_hi, vlo, vhi)
    if out is None:
        # expression undefined everywhere on the box: nothing satisfies it
        return False
    got = _isect(out[0], out[1], rel_lo, rel_hi)
    if got is None:
        return False
    n = tape.size
    for i in range(n):
        tlo[i] = vlo[i]
        thi[i] = vhi[i]
    tlo[n - 1], thi[n - 1] = got
    if tlo[n - 1] == vlo[n - 1] and thi[n - 1] == vhi[n - 1] and rel_lo != rel_hi:
        # inequality already satisfied everywhere: no tightening possible
        return True

    ops = tape.ops
    ia = tape.ia
    ib = tape.ib
    ka = tape.ka
    xa = tape.xa
    gap_found = gaps is None  # at most one recorded gap per revision

    def narrow(j: int, pl: float, ph: float) -> bool:
        got = _isect(pl, ph, tlo[j], thi[j])
        if got is None:
            return False
        tlo[j], thi[j] = got
        return True

    def narrow_pieces(j: int, pieces) -> bool:
        nonlocal gap_found
        first = None
        second = None
        for pl, ph in pieces:
            got = _isect(pl, ph, tlo[j], thi[j])
            if got is None:
                continue
            if first is None:
                first = got
            else:
                second = got
        if first is None:
            return False
        if second is not None:
            if not gap_found and ops[j] == VAR and first[1] < second[0]:
                gaps.append((ia[j], first[1], second[0]))
                gap_found = True
            first = (first[0], second[1])
        tlo[j], thi[j] = first
        return True

    for i in range(n - 1, -1, -1):
        op = ops[i]
        tl = tlo[i]
        th = thi[i]
        if op == VAR:
            v = ia[i]
            got = _isect(tl, th, var_lo[v], var_hi[v])
            if got is None:
                return False
            var_lo[v], var_hi[v] = got
            continue
        if op == CONST:
            continue
        j = ia[i]
        if op == ADD:
            k2 = ib[i]
            pl, ph = _k_sub(tl, th, vlo[k2], vhi[k2])
            if not narrow(j, pl, ph):
                return False
            pl, ph = _k_sub(tl, th, tlo[j], thi[j])
            if not narrow(k2, pl, ph):
                return False
        elif op == SUB:
            k2 = ib[i]
            pl, ph = _k_add(tl, th, vlo[k2], vhi[k2])
            if not narrow(j, pl, ph):
                return False
            pl, ph = _k_sub(tlo[j], thi[j], tl, th)
            if not narrow(k2, pl, ph):
                return False
        elif op == MUL:
            k2 = ib[i]
            pieces = extended_divide(
                Interval._raw(tl, th), Interval._raw(vlo[k2], vhi[k2])
            )
            if pieces == (ENTIRE,):
                pass
            elif not narrow_pieces(j, ((p.lo, p.hi) for p in pieces)):
                return False
            pieces = extended_divide(
                Interval._raw(tl, th), Interval._raw(tlo[j], thi[j])
            )
            if pieces == (ENTIRE,):
                continue
            if not narrow_pieces(k2, ((p.lo, p.hi) for p in pieces)):
                return False
        elif op == DIV:
            k2 = ib[i]
            pl, ph = _k_mul(tl, th, vlo[k2], vhi[k2])
            if not narrow(j, pl, ph):
                return False
            pieces = extended_divide(
                Interval._raw(tlo[j], thi[j]), Interval._raw(tl, th)
            )
            if pieces == (ENTIRE,):
                continue
            if not narrow_pieces(k2, ((p.lo, p.hi) for p in pieces)):
                return False
        elif op == NEG:
            if not narrow(j, -th, -tl):
                return False
        elif op == POWI:
            k = ka[i]
            if k % 2 == 0:
                got = _k_root(tl, th, k)
                if got is None:
                    return False
                rl, rh = got
                if not narrow_pieces(j, ((-rh, -rl), (rl, rh))):
                    return False
            else:
                got = _k_root(tl, th, k)
                if got is None:
                    return False
                if not narrow(j, *got):
                    return False
        elif op == POWC:
            got = _back_log_base(xa[i], tl, th)
            if got is None:
                return False
            if not narrow(j, *got):
                return False
        elif op == SIN:
            got = _back_sin(tl, th, tlo[j], thi[j])
            if got is None:
                return False
            tlo[j], thi[j] = got
        elif op == COS:
            got = _back_cos(tl, th, tlo[j], thi[j])
            if got is None:
                return False
            tlo[j], thi[j] = got
        elif op == TAN:
            got = _back_tan(tl, th, tlo[j], thi[j])
            if got is None:
                return False
            tlo[j], thi[j] = got
        elif op == EXP:
            if th <= 0.0:
                return False
            got = _k_log(max(tl, 5e-324), th)
            if got is None:
                return False
            ll, lh = got
            if tl <= 0.0:
                ll = -_INF
            if not narrow(j, ll, lh):
                return False
        elif op == LOG:
            if not narrow(j, *_k_exp(tl, th)):
                return False
        elif op == SQRT:
            if th < 0.0:
                return False
            rl = max(tl, 0.0)
            if not narrow(j, *_k_pow_int(rl, th, 2)):
                return False
        elif op == ABS:
            if th < 0.0:
                return False
            rl = max(tl, 0.0)
            if not narrow_pieces(j, ((-th, -rl), (rl, th))):
                return False
        elif op == TANH:
            got = _k_atanh(tl, th)
            if got is None:
                return False
            if not narrow(j, *got):
                return False
        elif op == ATAN:
            got = _back_atan(tl, th)
            if got is None:
                return False
            if not narrow(j, *got):
                return False
        # POWC handled above; SGN carries no useful inverse: skip
    return True


def hc4_revise(
    expr: Expr, rel: str, box: Box
) -> tuple[Box | None, list[tuple[int, float, float]]]:
    """Revise one constraint ``expr rel 0`` against a box."""
    target = _REL_TARGET[rel]
    var_lo = list(box.lo)
    var_hi = list(box.hi)
    gaps: list[tuple[int, float, float]] = []
    ok = _revise(tape_of(expr), target[0], target[1], var_lo, var_hi, gaps)
    if not ok:
        return None, []
    return Box._raw(var_lo, var_hi), gaps


def _constraints_of(system: System) -> list[tuple[Expr, str]]:
    out = [(e, "=") for e in system.equations]
    out.extend(system.inequalities)
    return out


def propagate(
    system: System,
    box: Box,
    tau: float = 0.1,
    ctx: ContractContext | None = None,
    revise_fn=None,
    max_revises: int | None = None,
) -> tuple[Box | None, list[tuple[int, float, float]]]:
    """Agenda fixpoint over per-constraint revision.

    A constraint re-enters the agenda when a variable it mentions lost at
    least the fraction ``tau`` of its width.  ``revise_fn(idx, expr, rel,
    var_lo, var_hi, gaps) -> bool`` defaults to hull-consistency revision.
    """
    constraints = _constraints_of(system)
    m = len(constraints)
    if m == 0:
        return box, []
    tapes = [tape_of(e) for e, _ in constraints]
    targets = [_REL_TARGET[rel] for _, rel in constraints]
    # variable -> constraints mentioning it
    incident: list[list[int]] = [[] for _ in range(system.n_vars)]
    for idx, tape in enumerate(tapes):
        seen = set()
        for _, v in tape.var_slots:
            if v not in seen:
                seen.add(v)
                incident[v].append(idx)

    var_lo = list(box.lo)
    var_hi = list(box.hi)
    gaps: list[tuple[int, float, float]] = []
    queue = list(range(m))
    queued = [True] * m
    revisions = 0
    while queue:
        if ctx is not None and ctx.expired():
            break
        idx = queue.pop()
        queued[idx] = False
        old_lo = list(var_lo)
        old_hi = list(var_hi)
        if revise_fn is None:
            ok = _revise(tapes[idx], targets[idx][0], targets[idx][1], var_lo, var_hi, gaps)
        else:
            ok = revise_fn(idx, constraints[idx][0], constraints[idx][1], var_lo, var_hi, gaps)
        revisions += 1
        if ctx is not None:
            ctx.count("revisions")
        if not ok:
            return None, []
        if max_revises is not None and revisions >= max_revises:
            break
        for v in range(system.n_vars):
            if var_lo[v] == old_lo[v] and var_hi[v] == old_hi[v]:
                continue
            old_w = old_hi[v] - old_lo[v]
            new_w = var_hi[v] - var_lo[v]
            if old_w > 0.0 and (math.isinf(old_w) or (old_w - new_w) / old_w >= tau):
                for cid in incident[v]:
                    if not queued[cid]:
                        queued[cid] = True
                        queue.append(cid)
    return Box._raw(var_lo, var_hi), gaps


# ---------------------------------------------------------------------------
# BC3: box-consistency endpoint narrowing
# ---------------------------------------------------------------------------


def _univariate_newton(
    ftape, dtape, var_lo, var_hi, v: int, xl: float, xh: float
) -> list[tuple[float, float]]:
    """One interval Newton step for the slice function in variable v (other
    variables at full width).  Returns surviving sub-intervals of [xl, xh]."""
    save_l, save_h = var_lo[v], var_hi[v]
    c = 0.5 * xl + 0.5 * xh
    var_lo[v] = var_hi[v] = c
    fc = ftape.eval_interval(var_lo, var_hi)
    var_lo[v], var_hi[v] = xl, xh
    dfc = dtape.eval_interval(var_lo, var_hi)
    var_lo[v], var_hi[v] = save_l, save_h
    if fc is None or dfc is None:
        return [(xl, xh)]
    pieces = extended_divide(Interval._raw(*fc), Interval._raw(*dfc))
    if pieces == (ENTIRE,):
        return [(xl, xh)]
    out = []
    for p in pieces:
        nl, nh = _k_sub(c, c, p.lo, p.hi)
        got = _isect(nl, nh, xl, xh)
        if got is not None:
            out.append(got)
    out.sort()  # c - piece reverses the ascending order of division pieces
    return out


def _slice_has_zero(ftape, var_lo, var_hi, v: int, xl: float, xh: float) -> bool:
    save_l, save_h = var_lo[v], var_hi[v]
    var_lo[v], var_hi[v] = xl, xh
    out = ftape.eval_interval(var_lo, var_hi)
    var_lo[v], var_hi[v] = save_l, save_h
    return out is not None and out[0] <= 0.0 <= out[1]


def _bc3_narrow(
    ftape, dtape, var_lo, var_hi, v: int, from_left: bool, prec: float
) -> float | None:
    """Outermost zero-consistent endpoint of the slice function, or None when
    the whole interval is proven zero-free."""
    stack = [(var_lo[v], var_hi[v])]
    iterations = 0
    while stack and iterations < 200:
        iterations += 1
        xl, xh = stack.pop()
        if not _slice_has_zero(ftape, var_lo, var_hi, v, xl, xh):
            continue
        edge = xl if from_left else xh
        w = xh - xl
        if w <= prec:
            return edge
        if _slice_has_zero(ftape, var_lo, var_hi, v, edge, edge):
            return edge
        pieces = _univariate_newton(ftape, dtape, var_lo, var_hi, v, xl, xh)
        if not pieces:
            continue
        shrunk = len(pieces) == 1 and (pieces[0][1] - pieces[0][0]) < 0.9 * w
        if shrunk or len(pieces) == 2:
            for p in reversed(pieces) if from_left else pieces:
                stack.append(p)
            continue
        xl, xh = pieces[0] if len(pieces) == 1 else (xl, xh)
        mid = 0.5 * xl + 0.5 * xh
        if not (xl < mid < xh):
            return edge
        if from_left:
            stack.append((mid, xh))
            stack.append((xl, mid))
        else:
            stack.append((xl, mid))
            stack.append((mid, xh))
    if iterations >= 200:
        return var_lo[v] if from_left else var_hi[v]
    return None


def bc3_revise(
    expr: Expr, var: int, box: Box, prec: float | None = None
) -> Box | None:
    """Narrow dimension ``var`` of the box to its outermost endpoints that
    remain consistent with ``expr = 0`` when the other variables span their
    full intervals."""
    var_lo = list(box.lo)
    var_hi = list(box.hi)
    got = _bc3_core(expr, var, var_lo, var_hi, prec)
    if got is None:
        return None
    return Box._raw(var_lo, var_hi)


def _bc3_core(
    expr: Expr, var: int, var_lo: list[float], var_hi: list[float], prec: float | None
) -> bool | None:
    ftape = tape_of(expr)
    if expr._cache is None:
        expr._cache = {}
    dkey = ("bc3_d", var)
    if dkey not in expr._cache:
        expr._cache[dkey] = tape_of(differentiate(expr, var))
    dtape = expr._cache[dkey]
    w = var_hi[var] - var_lo[var]
    if not math.isfinite(w) or w <= 0.0:
        return True
    if prec is None:
        prec = max(1e-10, 1e-4 * w)
    left = _bc3_narrow(ftape, dtape, var_lo, var_hi, var, True, prec)
    if left is None:
        return None
    right = _bc3_narrow(ftape, dtape, var_lo, var_hi, var, False, prec)
    if right is None or right < left:
        return None
    var_lo[var], var_hi[var] = left, right
    return True


# ---------------------------------------------------------------------------
# Linear-algebra operators
# ---------------------------------------------------------------------------


def _point_inverse(J: IntervalMatrix) -> np.ndarray | None:
    """Inverse of the midpoint matrix; None when it is singular, not finite,
    or too ill-conditioned to help.  Rows and columns are equilibrated
    before the condition test so that systems mixing equation scales (one
    row in units of 1e6, another of 1) are not rejected for a conditioning
    artifact; the returned matrix is still the plain inverse."""
    try:
        mid = J.mid()
    except ValueError:
        return None
    if not np.all(np.isfinite(mid)):
        return None
    r = np.max(np.abs(mid), axis=1)
    if not np.all(r > 0.0):
        return None
    A = mid / r[:, None]
    c = np.max(np.abs(A), axis=0)
    if not np.all(c > 0.0):
        return None
    A = A / c[None, :]
    try:
        if np.linalg.cond(A) > 1e12:
            return None
        with np.errstate(over="ignore"):
            inv = np.linalg.inv(A) / c[:, None] / r[None, :]
    except np.linalg.LinAlgError:
        return None
    # undoing the equilibration can overflow when a scale factor is tiny
    if not np.all(np.isfinite(inv)):
        return None
    return inv


def _neg_point_matvec(C: np.ndarray, flo: list[float], fhi: list[float]):
    """-C @ f for an interval vector f, outward."""
    n = C.shape[0]
    rlo = [0.0] * n
    rhi = [0.0] * n
    for i in range(n):
        slo = 0.0
        shi = 0.0
        for j in range(C.shape[1]):
            c = -float(C[i, j])
            if c == 0.0:
                continue
            if c > 0.0:
                pl, ph = _pmul(c, flo[j]), _pmul(c, fhi[j])
            else:
                pl, ph = _pmul(c, fhi[j]), _pmul(c, flo[j])
            slo = _down(slo + pl)
            shi = _up(shi + ph)
        rlo[i] = slo
        rhi[i] = shi
    return rlo, rhi


def gauss_seidel(
    A: IntervalMatrix,
    rhs_lo: list[float],
    rhs_hi: list[float],
    x_lo: list[float],
    x_hi: list[float],
) -> tuple[bool, list[tuple[int, float, float]], bool]:
    """One interval Gauss-Seidel sweep on A x = rhs, narrowing x in place.

    Returns (feasible, gaps, diagonal_ok) where diagonal_ok records that
    every diagonal extended division produced a single bounded piece, the
    side condition under which a strictly interior image proves uniqueness.
    """
    n = A.shape[0]
    gaps: list[tuple[int, float, float]] = []
    diag_ok = True
    for i in range(n):
        slo, shi = rhs_lo[i], rhs_hi[i]
        Ai_lo = A.lo[i]
        Ai_hi = A.hi[i]
        for j in range(n):
            if j == i:
                continue
            pl, ph = _k_mul(Ai_lo[j], Ai_hi[j], x_lo[j], x_hi[j])
            slo, shi = _k_sub(slo, shi, pl, ph)
        pieces = extended_divide(
            Interval._raw(slo, shi), Interval._raw(Ai_lo[i], Ai_hi[i])
        )
        if pieces == ():
            return False, [], diag_ok
        if pieces == (ENTIRE,):
            diag_ok = False
            continue
        if len(pieces) == 1 and not pieces[0].is_bounded():
            diag_ok = False
        if len(pieces) == 2:
            diag_ok = False
        first = None
        second = None
        for p in pieces:
            got = _isect(p.lo, p.hi, x_lo[i], x_hi[i])
            if got is None:
                continue
            if first is None:
                first = got
            else:
                second = got
        if first is None:
            return False, [], diag_ok
        if second is not None:
            if not gaps and first[1] < second[0]:
                gaps.append((i, first[1], second[0]))
            first = (first[0], second[1])
        x_lo[i], x_hi[i] = first
    return True, gaps, diag_ok


def _operator_common(system: System, box: Box):
    """Midpoint, residual enclosure there, interval Jacobian, and midpoint
    inverse; None when the operator cannot be applied on this box."""
    if not box.is_bounded():
        return None
    xt = box.mid_point()
    flo = []
    fhi = []
    for e in system.equations:
        out = tape_of(e).eval_interval(xt, xt)
        if out is None:
            return None
        flo.append(out[0])
        fhi.append(out[1])
    J = system.jacobian_evaluator().interval(box)
    C = _point_inverse(J)
    return xt, flo, fhi, J, C


def hansen_sengupta_step(system: System, box: Box, ctx: ContractContext | None = None) -> ContractionResult:
    """Hansen-Sengupta operator: Gauss-Seidel on the preconditioned
    mean-value system about the midpoint, intersected with the box."""
    common = _operator_common(system, box)
    if common is None:
        return ContractionResult(box)
    xt, flo, fhi, J, C = common
    if ctx is not None:
        ctx.count("hs_steps")
    if C is not None:
        A = J.left_mul_point(C)
        rhs_lo, rhs_hi = _neg_point_matvec(C, flo, fhi)
    else:
        A = J
        rhs_lo = [-v for v in fhi]
        rhs_hi = [-v for v in flo]
    n = system.n_vars
    u_lo = [_down(box.lo[i] - xt[i]) for i in range(n)]
    u_hi = [_up(box.hi[i] - xt[i]) for i in range(n)]
    feasible, u_gaps, diag_ok = gauss_seidel(A, rhs_lo, rhs_hi, u_lo, u_hi)
    if not feasible:
        return ContractionResult(None)
    new_lo = list(box.lo)
    new_hi = list(box.hi)
    interior = diag_ok
    for i in range(n):
        lo = _down(xt[i] + u_lo[i])
        hi = _up(xt[i] + u_hi[i])
        if not (box.lo[i] < lo and hi < box.hi[i]):
            interior = False
        got = _isect(lo, hi, box.lo[i], box.hi[i])
        if got is None:
            return ContractionResult(None)
        new_lo[i], new_hi[i] = got
    gaps = []
    for (i, gl, gh) in u_gaps:
        # translate from midpoint-relative coordinates, shrinking inward so
        # the open interval stays solution-free
        lo = _up(xt[i] + gl)
        hi = _down(xt[i] + gh)
        if lo < hi:
            gaps.append((i, lo, hi))
    return ContractionResult(
        Box._raw(new_lo, new_hi), gaps, interior_by="hs" if interior else None
    )


def krawczyk_step(system: System, box: Box, ctx: ContractContext | None = None) -> ContractionResult:
    """Krawczyk operator: x~ - C f(x~) + (I - C J)(x - x~), intersected with
    the box."""
    common = _operator_common(system, box)
    if common is None:
        return ContractionResult(box)
    xt, flo, fhi, J, C = common
    if ctx is not None:
        ctx.count("k_steps")
    n = system.n_vars
    if C is None:
        C = np.eye(n)
    CJ = J.left_mul_point(C)
    # M = I - C J
    m_lo = [[0.0] * n for _ in range(n)]
    m_hi = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            d = 1.0 if i == j else 0.0
            m_lo[i][j] = _down(d - CJ.hi[i][j])
            m_hi[i][j] = _up(d - CJ.lo[i][j])
    M = IntervalMatrix._raw(m_lo, m_hi)
    rhs_lo, rhs_hi = _neg_point_matvec(C, flo, fhi)
    u = [Interval._raw(_down(box.lo[i] - xt[i]), _up(box.hi[i] - xt[i])) for i in range(n)]
    Mu = M.matvec(u)
    new_lo = list(box.lo)
    new_hi = list(box.hi)
    interior = True
    for i in range(n):
        lo = _down(_down(xt[i] + rhs_lo[i]) + Mu[i].lo)
        hi = _up(_up(xt[i] + rhs_hi[i]) + Mu[i].hi)
        if not (box.lo[i] < lo and hi < box.hi[i]):
            interior = False
        got = _isect(lo, hi, box.lo[i], box.hi[i])
        if got is None:
            return ContractionResult(None)
        new_lo[i], new_hi[i] = got
    return ContractionResult(
        Box._raw(new_lo, new_hi), [], interior_by="k" if interior else None
    )


# ---------------------------------------------------------------------------
# 3B slab shaving
# ---------------------------------------------------------------------------


def shave_3b(
    system: System,
    box: Box,
    slices: int = 10,
    tau: float = 0.1,
    ctx: ContractContext | None = None,
) -> ContractionResult:
    """Discard face slabs whose inner propagation fixpoint is empty.

    Each variable's interval is cut into ``slices`` equal slabs; from each
    side, slabs are removed while the system restricted to the slab proves
    empty, stopping at the first undiscardable slab."""
    var_lo = list(box.lo)
    var_hi = list(box.hi)
    n = system.n_vars
    budget = 3 * max(1, len(system.equations))
    for v in range(n):
        w = var_hi[v] - var_lo[v]
        if not math.isfinite(w) or w <= 0.0:
            continue
        step = w / slices
        for side in (0, 1):
            for _ in range(slices - 1):
                if ctx is not None and ctx.expired():
                    return ContractionResult(Box._raw(var_lo, var_hi))
                if side == 0:
                    slab_lo, slab_hi = var_lo[v], min(var_lo[v] + step, var_hi[v])
                else:
                    slab_lo, slab_hi = max(var_hi[v] - step, var_lo[v]), var_hi[v]
                if slab_hi <= slab_lo:
                    break
                trial = Box._raw(
                    var_lo[:v] + [slab_lo] + var_lo[v + 1 :],
                    var_hi[:v] + [slab_hi] + var_hi[v + 1 :],
                )
                got, _ = propagate(system, trial, tau=tau, ctx=ctx, max_revises=budget)
                if got is None:
                    if ctx is not None:
                        ctx.count("slabs_discarded")
                    if side == 0:
                        var_lo[v] = slab_hi
                    else:
                        var_hi[v] = slab_lo
                    if var_lo[v] >= var_hi[v]:
                        return ContractionResult(None)
                else:
                    break
    return ContractionResult(Box._raw(var_lo, var_hi))


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------


class _HC4Stage:
    name = "hc4"

    def __init__(self, tau: float = 0.1):
        self.tau = tau

    def run(self, system: System, box: Box, ctx: ContractContext | None) -> ContractionResult:
        got, gaps = propagate(system, box, tau=self.tau, ctx=ctx)
        return ContractionResult(got, gaps)


class _HC4BC3Stage:
    """Hull revision plus endpoint narrowing for variables whose multiple
    occurrences make plain projection loose."""

    name = "hc4bc3"

    def __init__(self, tau: float = 0.1):
        self.tau = tau

    def run(self, system: System, box: Box, ctx: ContractContext | None) -> ContractionResult:
        occs = system.equation_occurrences()
        n_eqs = len(system.equations)

        def revise(idx, expr, rel, var_lo, var_hi, gaps):
            ok = _revise(
                tape_of(expr), _REL_TARGET[rel][0], _REL_TARGET[rel][1], var_lo, var_hi, gaps
            )
            if not ok:
                return False
            if rel != "=" or idx >= n_eqs:
                return True
            for v, count in occs[idx].items():
                if count < 2:
                    continue
                if ctx is not None and ctx.expired():
                    return True
                got = _bc3_core(expr, v, var_lo, var_hi, None)
                if got is None:
                    return False
            return True

        got, gaps = propagate(system, box, tau=self.tau, ctx=ctx, revise_fn=revise)
        return ContractionResult(got, gaps)


class _BC3Stage:
    name = "bc3"

    def run(self, system: System, box: Box, ctx: ContractContext | None) -> ContractionResult:
        var_lo = list(box.lo)
        var_hi = list(box.hi)
        for expr in system.equations:
            for v in sorted({w for _, w in tape_of(expr).var_slots}):
                if ctx is not None and ctx.expired():
                    break
                got = _bc3_core(expr, v, var_lo, var_hi, None)
                if got is None:
                    return ContractionResult(None)
        return ContractionResult(Box._raw(var_lo, var_hi))


class _ThreeBStage:
    name = "3b"

    def __init__(self, slices: int = 10, tau: float = 0.1):
        self.slices = slices
        self.tau = tau

    def run(self, system: System, box: Box, ctx: ContractContext | None) -> ContractionResult:
        return shave_3b(system, box, slices=self.slices, tau=self.tau, ctx=ctx)


class _HSStage:
    name = "hs"

    def run(self, system: System, box: Box, ctx: ContractContext | None) -> ContractionResult:
        return hansen_sengupta_step(system, box, ctx)


class _KrawczykStage:
    name = "k"

    def run(self, system: System, box: Box, ctx: ContractContext | None) -> ContractionResult:
        return krawczyk_step(system, box, ctx)


class _GaussSeidelStage:
    """Hansen-Sengupta without requiring squareness checks elsewhere; kept
    as an alias since the midpoint linearization already is Gauss-Seidel."""

    name = "gs"

    def run(self, system: System, box: Box, ctx: ContractContext | None) -> ContractionResult:
        return hansen_sengupta_step(system, box, ctx)


STAGES = {
    "hc4": _HC4Stage,
    "hc4bc3": _HC4BC3Stage,
    "bc3": _BC3Stage,
    "3b": _ThreeBStage,
    "hs": _HSStage,
    "k": _KrawczykStage,
    "gs": _GaussSeidelStage,
}


class Pipeline:
    """A fixed sequence of contraction stages applied once per call."""

    def __init__(self, stages, spec: str = ""):
        self.stages = list(stages)
        self.spec = spec or ",".join(s.name for s in self.stages)

    def contract(
        self, system: System, box: Box, ctx: ContractContext | None = None
    ) -> ContractionResult:
        gaps: list[tuple[int, float, float]] = []
        interior_by = None
        for stage in self.stages:
            if ctx is not None and ctx.expired():
                break
            if ctx is not None:
                ctx.count("calls_" + stage.name)
            out = stage.run(system, box, ctx)
            if out.empty:
                return ContractionResult(None)
            box = out.box
            gaps.extend(out.gaps)
            if out.interior_by is not None:
                interior_by = out.interior_by
        return ContractionResult(box, gaps, interior_by)

    def __repr__(self) -> str:
        return f"Pipeline({self.spec!r})"


def parse_pipeline(spec: str, tau: float = 0.1, slices_3b: int = 10) -> Pipeline:
    """Build a pipeline from a comma-separated stage list, e.g. "hc4,hs"."""
    stages = []
    for name in spec.split(","):
        name = name.strip()
        if not name:
            continue
        if name not in STAGES:
            raise ValueError(
                f"unknown contractor {name!r}; available: {', '.join(sorted(STAGES))}"
            )
        cls = STAGES[name]
        if name in ("hc4", "hc4bc3"):
            stages.append(cls(tau=tau))
        elif name == "3b":
            stages.append(cls(slices=slices_3b, tau=tau))
        else:
            stages.append(cls())
    if not stages:
        raise ValueError("empty contractor pipeline")
    return Pipeline(stages, spec)
