"""Validated interval arithmetic over extended reals.

Endpoints are IEEE doubles, with -inf/+inf permitted as lower/upper bounds.
Every operation returns an enclosure of the exact real image: results are
widened outward by one float step (``math.nextafter``) wherever the underlying
float operation may round.  The rounding policy is an implementation detail
hidden behind this module; callers rely only on the enclosure guarantee.

The empty interval is an explicit distinguished value (``EMPTY``), not a NaN
convention.  All operations absorb it: any arithmetic with an empty operand is
empty, intersections may produce it, and partial-domain functions (log, sqrt,
even roots) intersect their argument with the domain first and return ``EMPTY``
only when nothing of the argument remains.

Division by an interval containing zero follows extended (Kahan) semantics.
``extended_divide`` exposes the structured result: zero, one, or two pieces,
with the whole line as the degenerate one-piece case.  The ``/`` operator
returns the hull of the pieces.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Interval",
    "Box",
    "IntervalMatrix",
    "EMPTY",
    "ENTIRE",
    "arith",
    "extended_divide",
    "hull",
    "intersect",
    "pow_int",
    "ELEM_FUNCTIONS",
]

_INF = math.inf


def _down(x: float) -> float:
    """Next float toward -inf (outward rounding for lower bounds)."""
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    """Next float toward +inf (outward rounding for upper bounds)."""
    return math.nextafter(x, _INF)


def _spacing(x: float) -> float:
    """Distance to the next larger float at magnitude ``x``."""
    ax = abs(x)
    if ax == _INF:
        return _INF
    return math.nextafter(ax, _INF) - ax


# ---------------------------------------------------------------------------
# Float-pair kernels.
#
# Each kernel takes endpoint floats of nonempty intervals and returns the
# endpoint pair of the result, already rounded outward.  The expression
# evaluation tape calls these directly; the Interval class wraps them.
# ---------------------------------------------------------------------------


def _k_add(al: float, ah: float, bl: float, bh: float) -> tuple[float, float]:
    # Directed rounding through the two-sum error sign: the result is
    # exactly RD/RU of the real endpoint sum, so exact sums stay exact and
    # the kernel is monotone w.r.t. inclusion (a one-ulp nudge fires only
    # when round-to-nearest went the wrong way).
    zl = al + bl
    if math.isinf(zl):
        if zl > 0.0 and not (math.isinf(al) or math.isinf(bl)):
            zl = math.nextafter(zl, -_INF)  # overflow: largest finite bounds below
    else:
        t = zl - al
        if (al - (zl - t)) + (bl - t) < 0.0:
            zl = math.nextafter(zl, -_INF)
    zh = ah + bh
    if math.isinf(zh):
        if zh < 0.0 and not (math.isinf(ah) or math.isinf(bh)):
            zh = math.nextafter(zh, _INF)
    else:
        t = zh - ah
        if (ah - (zh - t)) + (bh - t) > 0.0:
            zh = math.nextafter(zh, _INF)
    return zl, zh


def _k_sub(al: float, ah: float, bl: float, bh: float) -> tuple[float, float]:
    # negation is exact, so subtraction inherits add's directed rounding
    return _k_add(al, ah, -bh, -bl)


def _pmul(x: float, y: float) -> float:
    # 0 * inf is 0 in interval context: the infinite endpoint is a limit.
    if x == 0.0 or y == 0.0:
        return 0.0
    return x * y


def _k_mul(al: float, ah: float, bl: float, bh: float) -> tuple[float, float]:
    p1 = _pmul(al, bl)
    p2 = _pmul(al, bh)
    p3 = _pmul(ah, bl)
    p4 = _pmul(ah, bh)
    return _down(min(p1, p2, p3, p4)), _up(max(p1, p2, p3, p4))


def _pdiv(x: float, y: float) -> float | None:
    """Quotient candidate for endpoint pairs; None marks an inf/inf combo."""
    if y == _INF or y == -_INF:
        if x == _INF or x == -_INF:
            return None
        return 0.0
    return x / y


def _k_div_pos(al: float, ah: float, bl: float, bh: float) -> tuple[float, float]:
    """Division kernel for 0 not in [bl, bh]."""
    cands = [
        q
        for q in (_pdiv(al, bl), _pdiv(al, bh), _pdiv(ah, bl), _pdiv(ah, bh))
        if q is not None
    ]
    return _down(min(cands)), _up(max(cands))


def _k_div(al: float, ah: float, bl: float, bh: float) -> tuple[float, float] | None:
    """Hull division; None encodes the empty result (b identically zero and
    0 not in a)."""
    if bl > 0.0 or bh < 0.0:
        return _k_div_pos(al, ah, bl, bh)
    if bl == 0.0 and bh == 0.0:
        return (-_INF, _INF) if (al <= 0.0 <= ah) else None
    if al <= 0.0 <= ah:
        return (-_INF, _INF)
    # 0 is in b but not in a: the two extended pieces hull to the whole line
    # unless b touches zero only from one side.
    if bl == 0.0:
        if al > 0.0:
            return _down(al / bh), _INF
        return -_INF, _up(ah / bh)
    if bh == 0.0:
        if al > 0.0:
            return -_INF, _up(al / bl)
        return _down(ah / bl), _INF
    return (-_INF, _INF)


def _guard_pow(x: float, k: int) -> float:
    if x == _INF:
        return _INF
    if x == -_INF:
        return -_INF if k % 2 else _INF
    try:
        return math.pow(x, k)
    except OverflowError:
        return -_INF if (x < 0.0 and k % 2) else _INF


def _k_pow_int(al: float, ah: float, k: int) -> tuple[float, float]:
    if k == 0:
        return 1.0, 1.0
    if k == 1:
        return al, ah
    if k < 0:
        lo, hi = _k_pow_int(al, ah, -k)
        out = _k_div(1.0, 1.0, lo, hi)
        if out is None:  # 1 / [0, 0]
            raise ZeroDivisionError("reciprocal of exact zero interval")
        return out
    if k % 2:
        return _down(_guard_pow(al, k)), _up(_guard_pow(ah, k))
    mag = max(abs(al), abs(ah))
    if al <= 0.0 <= ah:
        mig = 0.0
    else:
        mig = min(abs(al), abs(ah))
    lo = _down(_guard_pow(mig, k))
    return (0.0 if lo < 0.0 else lo), _up(_guard_pow(mag, k))


def _guard_exp(x: float) -> float:
    if x == _INF:
        return _INF
    try:
        return math.exp(x)
    except OverflowError:
        return _INF


def _k_exp(al: float, ah: float) -> tuple[float, float]:
    lo = _down(_guard_exp(al))
    return (0.0 if lo < 0.0 else lo), _up(_guard_exp(ah))


def _k_log(al: float, ah: float) -> tuple[float, float] | None:
    if ah <= 0.0:
        return None
    lo = -_INF if al <= 0.0 else _down(math.log(al))
    hi = _INF if ah == _INF else _up(math.log(ah))
    return lo, hi


def _k_sqrt(al: float, ah: float) -> tuple[float, float] | None:
    if ah < 0.0:
        return None
    lo = 0.0 if al <= 0.0 else max(0.0, _down(math.sqrt(al)))
    hi = _INF if ah == _INF else _up(math.sqrt(ah))
    return lo, hi


def _k_abs(al: float, ah: float) -> tuple[float, float]:
    if al >= 0.0:
        return al, ah
    if ah <= 0.0:
        return -ah, -al
    return 0.0, max(-al, ah)


_TWO_PI = 2.0 * math.pi
_HALF_PI = 0.5 * math.pi


def _hits_mod(al: float, ah: float, c: float, period: float) -> bool:
    """Conservatively test whether c + k*period lies in [al, ah] for some
    integer k.  May report True for near misses (sound: extrema or poles get
    included when uncertain), never False for a true hit."""
    k = math.floor((al - c) / period)
    for kk in (k, k + 1, k + 2):
        p = c + kk * period
        slack = 4.0 * _spacing(max(abs(al), abs(ah), abs(p), 1.0))
        if al - slack <= p <= ah + slack:
            return True
    return False


def _k_sin(al: float, ah: float) -> tuple[float, float]:
    if al == -_INF or ah == _INF or ah - al >= _TWO_PI:
        return -1.0, 1.0
    sl = math.sin(al)
    sh = math.sin(ah)
    if _hits_mod(al, ah, _HALF_PI, _TWO_PI):
        hi = 1.0
    else:
        hi = min(1.0, _up(max(sl, sh)))
    if _hits_mod(al, ah, -_HALF_PI, _TWO_PI):
        lo = -1.0
    else:
        lo = max(-1.0, _down(min(sl, sh)))
    return lo, hi


def _k_cos(al: float, ah: float) -> tuple[float, float]:
    if al == -_INF or ah == _INF or ah - al >= _TWO_PI:
        return -1.0, 1.0
    cl = math.cos(al)
    ch = math.cos(ah)
    if _hits_mod(al, ah, 0.0, _TWO_PI):
        hi = 1.0
    else:
        hi = min(1.0, _up(max(cl, ch)))
    if _hits_mod(al, ah, math.pi, _TWO_PI):
        lo = -1.0
    else:
        lo = max(-1.0, _down(min(cl, ch)))
    return lo, hi


def _k_tan(al: float, ah: float) -> tuple[float, float]:
    if al == -_INF or ah == _INF or ah - al >= math.pi:
        return -_INF, _INF
    if _hits_mod(al, ah, _HALF_PI, math.pi):
        return -_INF, _INF
    return _down(math.tan(al)), _up(math.tan(ah))


def _k_tanh(al: float, ah: float) -> tuple[float, float]:
    lo = max(-1.0, _down(math.tanh(al)))
    hi = min(1.0, _up(math.tanh(ah)))
    return lo, hi


def _k_atan(al: float, ah: float) -> tuple[float, float]:
    return _down(math.atan(al)), _up(math.atan(ah))


def _guard_pow_base(base: float, x: float) -> float:
    if x == _INF:
        return _INF if base > 1.0 else 0.0
    if x == -_INF:
        return 0.0 if base > 1.0 else _INF
    try:
        return math.pow(base, x)
    except OverflowError:
        return _INF


def _k_pow_base(base: float, al: float, ah: float) -> tuple[float, float]:
    """base**x for a positive constant base (base > 0, base != 1)."""
    if base > 1.0:
        lo, hi = _guard_pow_base(base, al), _guard_pow_base(base, ah)
    else:
        lo, hi = _guard_pow_base(base, ah), _guard_pow_base(base, al)
    lo = _down(lo)
    return (0.0 if lo < 0.0 else lo), _up(hi)


# Inverse kernels used by backward constraint projection.  All are widened a
# step further than strictly needed; projections only require soundness.


def _k_asin(al: float, ah: float) -> tuple[float, float] | None:
    if ah < -1.0 or al > 1.0:
        return None
    lo = -_HALF_PI if al <= -1.0 else _down(_down(math.asin(al)))
    hi = _HALF_PI if ah >= 1.0 else _up(_up(math.asin(ah)))
    return _down(lo), _up(hi)


def _k_atanh(al: float, ah: float) -> tuple[float, float] | None:
    if ah < -1.0 or al > 1.0:
        return None
    lo = -_INF if al <= -1.0 else _down(_down(math.atanh(al)))
    hi = _INF if ah >= 1.0 else _up(_up(math.atanh(ah)))
    return lo, hi


def _k_root(al: float, ah: float, k: int) -> tuple[float, float] | None:
    """k-th root, k >= 2.  For even k the argument is clipped to [0, inf)."""
    inv = 1.0 / k
    if k % 2 == 0:
        if ah < 0.0:
            return None
        al = max(al, 0.0)
        lo = 0.0 if al == 0.0 else max(0.0, _down(_down(math.pow(al, inv))))
        hi = _INF if ah == _INF else _up(_up(math.pow(ah, inv)))
        return lo, hi
    lo = -_INF if al == -_INF else _signed_root(al, inv, -1.0)
    hi = _INF if ah == _INF else _signed_root(ah, inv, 1.0)
    return lo, hi


def _signed_root(x: float, inv: float, direction: float) -> float:
    r = math.copysign(math.pow(abs(x), inv), x)
    return _down(_down(r)) if direction < 0.0 else _up(_up(r))


# ---------------------------------------------------------------------------
# Interval
# ---------------------------------------------------------------------------


class Interval:
    """Closed interval [lo, hi] over the extended reals.

    ``lo <= hi`` always holds for nonempty intervals; the module-level
    ``EMPTY`` constant is the only empty instance in normal use and satisfies
    ``lo > hi``.  Instances are immutable by convention.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float):
        lo = float(lo)
        hi = float(hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoint is NaN")
        if lo > hi:
            raise ValueError(f"inverted interval endpoints [{lo}, {hi}]")
        if lo == hi and (lo == _INF or lo == -_INF):
            raise ValueError("degenerate interval at infinity")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    @staticmethod
    def _raw(lo: float, hi: float) -> "Interval":
        iv = object.__new__(Interval)
        object.__setattr__(iv, "lo", lo)
        object.__setattr__(iv, "hi", hi)
        return iv

    @staticmethod
    def point(x: float) -> "Interval":
        return Interval(x, x)

    # -- predicates --------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    def is_bounded(self) -> bool:
        return not self.is_empty and self.lo > -_INF and self.hi < _INF

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    __contains__ = contains

    def is_subset(self, other: "Interval") -> bool:
        if self.is_empty:
            return True
        if other.is_empty:
            return False
        return other.lo <= self.lo and self.hi <= other.hi

    def is_interior_subset(self, other: "Interval") -> bool:
        """Strict containment in both endpoints (empty interior for points)."""
        if self.is_empty:
            return True
        if other.is_empty:
            return False
        return other.lo < self.lo and self.hi < other.hi

    def overlaps(self, other: "Interval") -> bool:
        if self.is_empty or other.is_empty:
            return False
        return self.lo <= other.hi and other.lo <= self.hi

    # -- measures ----------------------------------------------------------

    def wid(self) -> float:
        if self.is_empty:
            raise ValueError("width of empty interval")
        if not self.is_bounded():
            raise ValueError("width of unbounded interval")
        return self.hi - self.lo

    def mid(self) -> float:
        if self.is_empty:
            raise ValueError("midpoint of empty interval")
        if not self.is_bounded():
            raise ValueError("midpoint of unbounded interval")
        m = 0.5 * self.lo + 0.5 * self.hi
        if m < self.lo:
            return self.lo
        if m > self.hi:
            return self.hi
        return m

    def mag(self) -> float:
        """Largest absolute value over the interval."""
        if self.is_empty:
            raise ValueError("magnitude of empty interval")
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        """Smallest absolute value over the interval."""
        if self.is_empty:
            raise ValueError("mignitude of empty interval")
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    # -- set operations ----------------------------------------------------

    def intersect(self, other: "Interval") -> "Interval":
        if self.is_empty or other.is_empty:
            return EMPTY
        lo = self.lo if self.lo >= other.lo else other.lo
        hi = self.hi if self.hi <= other.hi else other.hi
        if lo > hi:
            return EMPTY
        return Interval._raw(lo, hi)

    def hull(self, other: "Interval") -> "Interval":
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        return Interval._raw(min(self.lo, other.lo), max(self.hi, other.hi))

    def bisect(self, point: float | None = None) -> tuple["Interval", "Interval"]:
        """Split into two halves sharing the cut point; midpoint by default."""
        if point is None:
            point = self.mid()
        if not (self.lo < point < self.hi):
            raise ValueError("bisection point must be strictly interior")
        return Interval._raw(self.lo, point), Interval._raw(point, self.hi)

    def inflate(self, factor: float) -> "Interval":
        """Widen symmetrically about the midpoint by ``factor``; zero-width
        intervals grow by one float step each side."""
        if self.is_empty:
            return EMPTY
        if self.lo == self.hi:
            return Interval._raw(_down(self.lo), _up(self.hi))
        m = self.mid()
        r = 0.5 * (self.hi - self.lo) * factor
        return Interval._raw(_down(m - r), _up(m + r))

    # -- arithmetic --------------------------------------------------------

    def __neg__(self) -> "Interval":
        if self.is_empty:
            return EMPTY
        return Interval._raw(-self.hi, -self.lo)

    def __add__(self, other) -> "Interval":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_empty or other.is_empty:
            return EMPTY
        return Interval._raw(*_k_add(self.lo, self.hi, other.lo, other.hi))

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_empty or other.is_empty:
            return EMPTY
        return Interval._raw(*_k_sub(self.lo, self.hi, other.lo, other.hi))

    def __rsub__(self, other) -> "Interval":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other - self

    def __mul__(self, other) -> "Interval":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_empty or other.is_empty:
            return EMPTY
        return Interval._raw(*_k_mul(self.lo, self.hi, other.lo, other.hi))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_empty or other.is_empty:
            return EMPTY
        out = _k_div(self.lo, self.hi, other.lo, other.hi)
        if out is None:
            return EMPTY
        return Interval._raw(*out)

    def __rtruediv__(self, other) -> "Interval":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other / self

    def __pow__(self, k: int) -> "Interval":
        if not isinstance(k, int):
            raise TypeError("interval powers require integer exponents")
        return pow_int(self, k)

    # -- misc --------------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, Interval):
            return NotImplemented
        if self.is_empty and other.is_empty:
            return True
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self) -> int:
        if self.is_empty:
            return hash("empty-interval")
        return hash((self.lo, self.hi))

    def __repr__(self) -> str:
        if self.is_empty:
            return "Interval.EMPTY"
        return f"Interval({self.lo!r}, {self.hi!r})"


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, (int, float)):
        return Interval.point(float(x))
    return NotImplemented


EMPTY: Interval = Interval._raw(_INF, -_INF)
ENTIRE: Interval = Interval._raw(-_INF, _INF)
Interval.EMPTY = EMPTY  # type: ignore[attr-defined]
Interval.ENTIRE = ENTIRE  # type: ignore[attr-defined]


def hull(a: Interval, b: Interval) -> Interval:
    return a.hull(b)


def intersect(a: Interval, b: Interval) -> Interval:
    return a.intersect(b)


def arith(op: str, a: Interval, b: Interval) -> Interval:
    """Dispatch one of the four basic operations by symbol."""
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


def extended_divide(a: Interval, b: Interval) -> tuple[Interval, ...]:
    """Set of x with b'*x in a for some b' in b, as 0, 1 or 2 intervals.

    Returns () when empty, a single interval (possibly the whole line) when
    connected, and two disjoint intervals (left.hi < right.lo) when division
    by an interval straddling zero splits the solution set.
    """
    if a.is_empty or b.is_empty:
        return ()
    al, ah, bl, bh = a.lo, a.hi, b.lo, b.hi
    if bl > 0.0 or bh < 0.0:
        return (Interval._raw(*_k_div_pos(al, ah, bl, bh)),)
    if bl == 0.0 and bh == 0.0:
        return (ENTIRE,) if al <= 0.0 <= ah else ()
    if al <= 0.0 <= ah:
        return (ENTIRE,)
    if ah < 0.0:
        if bl == 0.0:
            return (Interval._raw(-_INF, _up(ah / bh)),)
        if bh == 0.0:
            return (Interval._raw(_down(ah / bl), _INF),)
        left = Interval._raw(-_INF, _up(ah / bh))
        right = Interval._raw(_down(ah / bl), _INF)
    else:  # al > 0
        if bl == 0.0:
            return (Interval._raw(_down(al / bh), _INF),)
        if bh == 0.0:
            return (Interval._raw(-_INF, _up(al / bl)),)
        left = Interval._raw(-_INF, _up(al / bl))
        right = Interval._raw(_down(al / bh), _INF)
    if left.hi >= right.lo:
        return (left.hull(right),)
    return (left, right)


def pow_int(a: Interval, k: int) -> Interval:
    if a.is_empty:
        return EMPTY
    try:
        lo, hi = _k_pow_int(a.lo, a.hi, k)
    except ZeroDivisionError:
        return EMPTY
    return Interval._raw(lo, hi)


def _wrap_total(kernel: Callable) -> Callable[[Interval], Interval]:
    def fn(a: Interval) -> Interval:
        if a.is_empty:
            return EMPTY
        return Interval._raw(*kernel(a.lo, a.hi))

    return fn


def _wrap_partial(kernel: Callable) -> Callable[[Interval], Interval]:
    def fn(a: Interval) -> Interval:
        if a.is_empty:
            return EMPTY
        out = kernel(a.lo, a.hi)
        if out is None:
            return EMPTY
        return Interval._raw(*out)

    return fn


exp = _wrap_total(_k_exp)
sin = _wrap_total(_k_sin)
cos = _wrap_total(_k_cos)
tan = _wrap_total(_k_tan)
tanh = _wrap_total(_k_tanh)
atan = _wrap_total(_k_atan)
abs_ = _wrap_total(_k_abs)
log = _wrap_partial(_k_log)
sqrt = _wrap_partial(_k_sqrt)


def pow_base(base: float, a: Interval) -> Interval:
    """base**a for a positive constant base."""
    if base <= 0.0 or base == 1.0:
        raise ValueError("constant base must be positive and not 1")
    if a.is_empty:
        return EMPTY
    return Interval._raw(*_k_pow_base(base, a.lo, a.hi))


ELEM_FUNCTIONS: dict[str, Callable[[Interval], Interval]] = {
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "abs": abs_,
    "tanh": tanh,
    "atan": atan,
}


# ---------------------------------------------------------------------------
# Box
# ---------------------------------------------------------------------------


class Box:
    """Axis-aligned product of nonempty intervals.

    Stored as parallel endpoint lists for cheap component access in hot
    loops.  Public methods never mutate; contractors that narrow in place work
    on copies of the lists and wrap the result at the end.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Sequence[float], hi: Sequence[float]):
        lo = [float(v) for v in lo]
        hi = [float(v) for v in hi]
        if len(lo) != len(hi):
            raise ValueError("endpoint lists differ in length")
        for l, h in zip(lo, hi):
            if math.isnan(l) or math.isnan(h) or l > h:
                raise ValueError(f"bad box component [{l}, {h}]")
            if l == h and (l == _INF or l == -_INF):
                raise ValueError("degenerate box component at infinity")
        self.lo = lo
        self.hi = hi

    @staticmethod
    def _raw(lo: list[float], hi: list[float]) -> "Box":
        b = object.__new__(Box)
        b.lo = lo
        b.hi = hi
        return b

    @staticmethod
    def from_intervals(ivs: Iterable[Interval]) -> "Box":
        ivs = list(ivs)
        if any(iv.is_empty for iv in ivs):
            raise ValueError("box components must be nonempty")
        return Box._raw([iv.lo for iv in ivs], [iv.hi for iv in ivs])

    def __len__(self) -> int:
        return len(self.lo)

    def __getitem__(self, i: int) -> Interval:
        return Interval._raw(self.lo[i], self.hi[i])

    def intervals(self) -> tuple[Interval, ...]:
        return tuple(self[i] for i in range(len(self.lo)))

    def copy(self) -> "Box":
        return Box._raw(list(self.lo), list(self.hi))

    def replace(self, i: int, iv: Interval) -> "Box":
        if iv.is_empty:
            raise ValueError("box components must be nonempty")
        b = self.copy()
        b.lo[i] = iv.lo
        b.hi[i] = iv.hi
        return b

    def is_bounded(self) -> bool:
        return all(l > -_INF for l in self.lo) and all(h < _INF for h in self.hi)

    def widths(self) -> list[float]:
        return [h - l for l, h in zip(self.lo, self.hi)]

    def max_width(self) -> float:
        if not self.is_bounded():
            raise ValueError("width of unbounded box")
        return max(h - l for l, h in zip(self.lo, self.hi))

    def mid_point(self) -> list[float]:
        return [self[i].mid() for i in range(len(self.lo))]

    def contains_point(self, pt: Sequence[float]) -> bool:
        return all(l <= x <= h for l, x, h in zip(self.lo, pt, self.hi))

    def intersect(self, other: "Box") -> "Box | None":
        lo = [max(a, b) for a, b in zip(self.lo, other.lo)]
        hi = [min(a, b) for a, b in zip(self.hi, other.hi)]
        if any(l > h for l, h in zip(lo, hi)):
            return None
        return Box._raw(lo, hi)

    def hull(self, other: "Box") -> "Box":
        lo = [min(a, b) for a, b in zip(self.lo, other.lo)]
        hi = [max(a, b) for a, b in zip(self.hi, other.hi)]
        return Box._raw(lo, hi)

    def overlaps(self, other: "Box") -> bool:
        return all(
            sl <= oh and ol <= sh
            for sl, sh, ol, oh in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def is_subset(self, other: "Box") -> bool:
        return all(
            ol <= sl and sh <= oh
            for sl, sh, ol, oh in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def is_interior_subset(self, other: "Box") -> bool:
        return all(
            ol < sl and sh < oh
            for sl, sh, ol, oh in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def bisect(self, i: int, point: float | None = None) -> tuple["Box", "Box"]:
        """Split along dimension i at ``point`` (midpoint by default).  The
        two halves share the cut value; the original box is untouched."""
        left_iv, right_iv = self[i].bisect(point)
        left = self.copy()
        right = self.copy()
        left.hi[i] = left_iv.hi
        right.lo[i] = right_iv.lo
        return left, right

    def inflate(self, factor: float) -> "Box":
        return Box.from_intervals(self[i].inflate(factor) for i in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __repr__(self) -> str:
        parts = " x ".join(f"[{l!r}, {h!r}]" for l, h in zip(self.lo, self.hi))
        return f"Box({parts})"


# ---------------------------------------------------------------------------
# IntervalMatrix
# ---------------------------------------------------------------------------


class IntervalMatrix:
    """Dense matrix of intervals stored as parallel endpoint grids."""

    __slots__ = ("lo", "hi", "shape")

    def __init__(self, rows: Sequence[Sequence[Interval]]):
        self.lo = [[iv.lo for iv in row] for row in rows]
        self.hi = [[iv.hi for iv in row] for row in rows]
        n = len(self.lo)
        m = len(self.lo[0]) if n else 0
        if any(len(r) != m for r in self.lo):
            raise ValueError("ragged interval matrix")
        self.shape = (n, m)

    @staticmethod
    def _raw(lo: list[list[float]], hi: list[list[float]]) -> "IntervalMatrix":
        mat = object.__new__(IntervalMatrix)
        mat.lo = lo
        mat.hi = hi
        mat.shape = (len(lo), len(lo[0]) if lo else 0)
        return mat

    def entry(self, i: int, j: int) -> Interval:
        return Interval._raw(self.lo[i][j], self.hi[i][j])

    def mid(self) -> np.ndarray:
        n, m = self.shape
        out = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                out[i, j] = self.entry(i, j).mid()
        return out

    def left_mul_point(self, c: np.ndarray) -> "IntervalMatrix":
        """C @ A for a float matrix C, with outward rounding."""
        n, m = self.shape
        if c.shape[1] != n:
            raise ValueError("shape mismatch")
        rlo = [[0.0] * m for _ in range(c.shape[0])]
        rhi = [[0.0] * m for _ in range(c.shape[0])]
        for i in range(c.shape[0]):
            ci = c[i]
            for j in range(m):
                slo = 0.0
                shi = 0.0
                for k in range(n):
                    f = float(ci[k])
                    if f == 0.0:
                        continue
                    al = self.lo[k][j]
                    ah = self.hi[k][j]
                    if f > 0.0:
                        plo, phi = _pmul(f, al), _pmul(f, ah)
                    else:
                        plo, phi = _pmul(f, ah), _pmul(f, al)
                    slo = _down(slo + plo)
                    shi = _up(shi + phi)
                rlo[i][j] = slo
                rhi[i][j] = shi
        return IntervalMatrix._raw(rlo, rhi)

    def matvec(self, v: Sequence[Interval]) -> list[Interval]:
        """A @ v for an interval vector, with outward rounding."""
        n, m = self.shape
        if len(v) != m:
            raise ValueError("shape mismatch")
        out = []
        for i in range(n):
            slo = 0.0
            shi = 0.0
            for j in range(m):
                iv = v[j]
                if iv.is_empty:
                    return [EMPTY] * n
                plo, phi = _k_mul(self.lo[i][j], self.hi[i][j], iv.lo, iv.hi)
                slo = _down(slo + plo)
                shi = _up(shi + phi)
            out.append(Interval._raw(slo, shi))
        return out

    def __repr__(self) -> str:
        n, m = self.shape
        rows = []
        for i in range(n):
            rows.append(
                "["
                + ", ".join(f"[{self.lo[i][j]}, {self.hi[i][j]}]" for j in range(m))
                + "]"
            )
        return "IntervalMatrix(" + ", ".join(rows) + ")"
