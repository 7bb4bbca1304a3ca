"""Expression trees, parsing, and interval evaluation for constraint systems.

Systems are described in a small line-oriented text format::

    # name: circle-line            (comment; "# key: value" lines become metadata)
    vars x, y
    box x in [-2, 2]
    box y in [-2, 2]
    eq x^2 + y^2 - 1
    eq x - y
    ineq x - 3 < 0

``eq e`` means e = 0.  Operators are + - * / ^ with the usual precedence, ^
is right-associative and requires either an integer exponent or a positive
constant base (2^x is the exponential with base 2).  Functions: sin cos tan
exp log sqrt abs tanh atan.  ``pi`` denotes the mathematical constant (kept as
a one-ulp-wide interval so enclosures stay valid); box bounds admit -inf/inf
and constant expressions of pi.  A ``nonsquare`` line permits a system whose
equation count differs from its variable count; otherwise that is an error.

Each constraint is one expression tree.  Subexpressions are never shared
between constraints or deduplicated within one, so interval evaluation shows
the dependency problem exactly as written.  Trees compile once into a
postorder tape; evaluation walks the tape over scratch endpoint arrays.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .interval import (
    EMPTY,
    Box,
    Interval,
    IntervalMatrix,
    _down,
    _k_abs,
    _k_add,
    _k_atan,
    _k_cos,
    _k_div,
    _k_exp,
    _k_log,
    _k_mul,
    _k_pow_base,
    _k_pow_int,
    _k_sin,
    _k_sqrt,
    _k_sub,
    _k_tan,
    _k_tanh,
    _up,
)

__all__ = [
    "Expr",
    "System",
    "ParseError",
    "parse_system",
    "parse_expression",
    "expr_to_text",
    "system_to_text",
    "eval_natural",
    "eval_point",
    "eval_point_batch",
    "eval_horner",
    "eval_mean_value",
    "differentiate",
    "free_vars",
    "occurrence_counts",
    "jacobian",
    "JacobianEvaluator",
]

# Node kinds.
CONST = 0
VAR = 1
ADD = 2
SUB = 3
MUL = 4
DIV = 5
NEG = 6
POWI = 7  # integer power, exponent >= 2 after normalization
POWC = 8  # constant positive base, arbitrary exponent subtree
SIN = 9
COS = 10
TAN = 11
EXP = 12
LOG = 13
SQRT = 14
ABS = 15
TANH = 16
ATAN = 17
SGN = 18  # sign enclosure; internal, produced by differentiating abs

_FN_KINDS = {
    "sin": SIN,
    "cos": COS,
    "tan": TAN,
    "exp": EXP,
    "log": LOG,
    "sqrt": SQRT,
    "abs": ABS,
    "tanh": TANH,
    "atan": ATAN,
}
_FUN_NAMES = {v: k for k, v in _FN_KINDS.items()}

_UNARY_KINDS = (NEG, SIN, COS, TAN, EXP, LOG, SQRT, ABS, TANH, ATAN, SGN)
_BINARY_KINDS = (ADD, SUB, MUL, DIV)

_PI_LO = math.pi
_PI_HI = math.nextafter(math.pi, math.inf)


def _exact_fold(op: str, a: "Expr", b: "Expr") -> "Expr | None":
    """Fold two degenerate finite constants only when the float result is
    exact (checked in rational arithmetic); otherwise the caller widens
    through the interval kernel so enclosures stay valid."""
    if a.lo != a.hi or b.lo != b.hi:
        return None
    x, y = a.lo, b.lo
    if not (math.isfinite(x) and math.isfinite(y)):
        return None
    try:
        fx, fy = Fraction(x), Fraction(y)
        if op == "+":
            z, fz = x + y, fx + fy
        elif op == "-":
            z, fz = x - y, fx - fy
        elif op == "*":
            z, fz = x * y, fx * fy
        else:
            if y == 0.0:
                return None
            z, fz = x / y, fx / fy
        if math.isfinite(z) and Fraction(z) == fz:
            return Expr.const(z)
    except (OverflowError, ValueError, ZeroDivisionError):
        pass
    return None


class Expr:
    """One node of an expression tree.

    ``kind`` selects the operation; ``a``/``b`` are children, ``k`` the
    integer exponent of POWI, ``lo``/``hi`` the value enclosure of CONST or
    the base of POWC (stored degenerate in ``lo``).  Constants are intervals
    so that inexact folds (the derivative of 2^x carries ln 2) stay sound;
    parsed literals are degenerate.
    """

    __slots__ = ("kind", "a", "b", "k", "lo", "hi", "_tape", "_cache")

    def __init__(self, kind: int, a=None, b=None, k: int = 0, lo: float = 0.0, hi: float = 0.0):
        self.kind = kind
        self.a = a
        self.b = b
        self.k = k
        self.lo = lo
        self.hi = hi
        self._tape = None
        self._cache = None

    # -- constructors with light simplification ---------------------------

    @staticmethod
    def const(value: float) -> "Expr":
        v = float(value)
        return Expr(CONST, lo=v, hi=v)

    @staticmethod
    def const_interval(lo: float, hi: float) -> "Expr":
        return Expr(CONST, lo=lo, hi=hi)

    @staticmethod
    def pi() -> "Expr":
        return Expr(CONST, lo=_PI_LO, hi=_PI_HI)

    @staticmethod
    def var(index: int) -> "Expr":
        return Expr(VAR, k=index)

    def is_const(self, value: float | None = None) -> bool:
        if self.kind != CONST or self.lo != self.hi:
            return False
        return value is None or self.lo == value

    @staticmethod
    def add(a: "Expr", b: "Expr") -> "Expr":
        if a.is_const(0.0):
            return b
        if b.is_const(0.0):
            return a
        if a.kind == CONST and b.kind == CONST:
            exact = _exact_fold("+", a, b)
            return exact if exact is not None else Expr.const_interval(*_k_add(a.lo, a.hi, b.lo, b.hi))
        return Expr(ADD, a, b)

    @staticmethod
    def sub(a: "Expr", b: "Expr") -> "Expr":
        if b.is_const(0.0):
            return a
        if a.kind == CONST and b.kind == CONST:
            exact = _exact_fold("-", a, b)
            return exact if exact is not None else Expr.const_interval(*_k_sub(a.lo, a.hi, b.lo, b.hi))
        if a.is_const(0.0):
            return Expr.neg(b)
        return Expr(SUB, a, b)

    @staticmethod
    def mul(a: "Expr", b: "Expr") -> "Expr":
        if a.is_const(0.0) or b.is_const(0.0):
            return Expr.const(0.0)
        if a.is_const(1.0):
            return b
        if b.is_const(1.0):
            return a
        if a.kind == CONST and b.kind == CONST:
            exact = _exact_fold("*", a, b)
            return exact if exact is not None else Expr.const_interval(*_k_mul(a.lo, a.hi, b.lo, b.hi))
        return Expr(MUL, a, b)

    @staticmethod
    def div(a: "Expr", b: "Expr") -> "Expr":
        if a.is_const(0.0) and not b.is_const(0.0):
            return Expr.const(0.0)
        if b.is_const(1.0):
            return a
        if a.kind == CONST and b.kind == CONST:
            exact = _exact_fold("/", a, b)
            if exact is not None:
                return exact
        return Expr(DIV, a, b)

    @staticmethod
    def neg(a: "Expr") -> "Expr":
        if a.kind == CONST:
            return Expr.const_interval(-a.hi, -a.lo)
        if a.kind == NEG:
            return a.a
        return Expr(NEG, a)

    @staticmethod
    def powi(a: "Expr", k: int) -> "Expr":
        if k == 0:
            return Expr.const(1.0)
        if k == 1:
            return a
        if k < 0:
            return Expr.div(Expr.const(1.0), Expr.powi(a, -k))
        if a.kind == CONST:
            if a.lo == a.hi and math.isfinite(a.lo):
                try:
                    z = a.lo**k
                    if math.isfinite(z) and Fraction(z) == Fraction(a.lo) ** k:
                        return Expr.const(z)
                except (OverflowError, ValueError):
                    pass
            return Expr.const_interval(*_k_pow_int(a.lo, a.hi, k))
        return Expr(POWI, a, k=k)

    @staticmethod
    def pow_base(base: float, a: "Expr") -> "Expr":
        if base <= 0.0 or base == 1.0:
            raise ValueError("constant base must be positive and not 1")
        return Expr(POWC, a, lo=base, hi=base)

    @staticmethod
    def fn(name: str, a: "Expr") -> "Expr":
        return Expr(_FN_KINDS[name], a)

    def children(self) -> Iterator["Expr"]:
        if self.a is not None:
            yield self.a
        if self.b is not None:
            yield self.b

    def __repr__(self) -> str:
        return f"Expr<{expr_to_text(self)}>"


# ---------------------------------------------------------------------------
# Tape compilation and evaluation
# ---------------------------------------------------------------------------


class Tape:
    """Postorder instruction list for one expression tree.

    Parallel lists: ``ops`` holds node kinds, ``ia``/``ib`` child slot
    indices (ia doubles as the variable index for VAR), ``xa``/``xb`` carry
    constant enclosures, POWC bases, and POWI exponents (in ``ka``).
    Slot i of the scratch arrays receives the value of instruction i; the
    last slot is the root.
    """

    __slots__ = ("ops", "ia", "ib", "ka", "xa", "xb", "size", "var_slots", "scr")

    def __init__(self, root: Expr):
        self.ops: list[int] = []
        self.ia: list[int] = []
        self.ib: list[int] = []
        self.ka: list[int] = []
        self.xa: list[float] = []
        self.xb: list[float] = []
        self.var_slots: list[tuple[int, int]] = []  # (slot, var index)
        self._emit(root)
        self.size = len(self.ops)
        self.scr = None  # reusable scratch arrays, managed by the contractors

    def _emit(self, e: Expr) -> int:
        kind = e.kind
        if kind == CONST:
            return self._push(CONST, -1, -1, 0, e.lo, e.hi)
        if kind == VAR:
            slot = self._push(VAR, e.k, -1, 0, 0.0, 0.0)
            self.var_slots.append((slot, e.k))
            return slot
        if kind in _BINARY_KINDS:
            ia = self._emit(e.a)
            ib = self._emit(e.b)
            return self._push(kind, ia, ib, 0, 0.0, 0.0)
        if kind == POWI:
            ia = self._emit(e.a)
            return self._push(POWI, ia, -1, e.k, 0.0, 0.0)
        if kind == POWC:
            ia = self._emit(e.a)
            return self._push(POWC, ia, -1, 0, e.lo, e.hi)
        ia = self._emit(e.a)
        return self._push(kind, ia, -1, 0, 0.0, 0.0)

    def _push(self, op: int, ia: int, ib: int, ka: int, xa: float, xb: float) -> int:
        self.ops.append(op)
        self.ia.append(ia)
        self.ib.append(ib)
        self.ka.append(ka)
        self.xa.append(xa)
        self.xb.append(xb)
        return len(self.ops) - 1

    def eval_interval(
        self,
        blo: Sequence[float],
        bhi: Sequence[float],
        vlo: list[float] | None = None,
        vhi: list[float] | None = None,
    ) -> tuple[float, float] | None:
        """Forward sweep.  Returns the root enclosure, or None when the
        expression is undefined over the whole box (empty).  When scratch
        lists are passed in they receive all node enclosures (for backward
        passes); they must have length >= size."""
        n = self.size
        if vlo is None:
            vlo = [0.0] * n
            vhi = [0.0] * n
        ops = self.ops
        ia = self.ia
        ib = self.ib
        ka = self.ka
        xa = self.xa
        xb = self.xb
        for i in range(n):
            op = ops[i]
            if op == VAR:
                vlo[i] = blo[ia[i]]
                vhi[i] = bhi[ia[i]]
            elif op == CONST:
                vlo[i] = xa[i]
                vhi[i] = xb[i]
            elif op == ADD:
                j = ia[i]
                k2 = ib[i]
                vlo[i], vhi[i] = _k_add(vlo[j], vhi[j], vlo[k2], vhi[k2])
            elif op == SUB:
                j = ia[i]
                k2 = ib[i]
                vlo[i], vhi[i] = _k_sub(vlo[j], vhi[j], vlo[k2], vhi[k2])
            elif op == MUL:
                j = ia[i]
                k2 = ib[i]
                vlo[i], vhi[i] = _k_mul(vlo[j], vhi[j], vlo[k2], vhi[k2])
            elif op == DIV:
                j = ia[i]
                k2 = ib[i]
                out = _k_div(vlo[j], vhi[j], vlo[k2], vhi[k2])
                if out is None:
                    return None
                vlo[i], vhi[i] = out
            elif op == NEG:
                j = ia[i]
                vlo[i], vhi[i] = -vhi[j], -vlo[j]
            elif op == POWI:
                j = ia[i]
                vlo[i], vhi[i] = _k_pow_int(vlo[j], vhi[j], ka[i])
            elif op == POWC:
                j = ia[i]
                vlo[i], vhi[i] = _k_pow_base(xa[i], vlo[j], vhi[j])
            elif op == SIN:
                j = ia[i]
                vlo[i], vhi[i] = _k_sin(vlo[j], vhi[j])
            elif op == COS:
                j = ia[i]
                vlo[i], vhi[i] = _k_cos(vlo[j], vhi[j])
            elif op == TAN:
                j = ia[i]
                vlo[i], vhi[i] = _k_tan(vlo[j], vhi[j])
            elif op == EXP:
                j = ia[i]
                vlo[i], vhi[i] = _k_exp(vlo[j], vhi[j])
            elif op == LOG:
                j = ia[i]
                out = _k_log(vlo[j], vhi[j])
                if out is None:
                    return None
                vlo[i], vhi[i] = out
            elif op == SQRT:
                j = ia[i]
                out = _k_sqrt(vlo[j], vhi[j])
                if out is None:
                    return None
                vlo[i], vhi[i] = out
            elif op == ABS:
                j = ia[i]
                vlo[i], vhi[i] = _k_abs(vlo[j], vhi[j])
            elif op == TANH:
                j = ia[i]
                vlo[i], vhi[i] = _k_tanh(vlo[j], vhi[j])
            elif op == ATAN:
                j = ia[i]
                vlo[i], vhi[i] = _k_atan(vlo[j], vhi[j])
            elif op == SGN:
                j = ia[i]
                l = vlo[j]
                h = vhi[j]
                if l > 0.0:
                    vlo[i] = vhi[i] = 1.0
                elif h < 0.0:
                    vlo[i] = vhi[i] = -1.0
                else:
                    vlo[i], vhi[i] = -1.0, 1.0
            else:  # pragma: no cover
                raise AssertionError(f"bad opcode {op}")
        m = n - 1
        return vlo[m], vhi[m]

    def eval_point(self, x: Sequence[float]) -> float:
        """Float evaluation at a point; returns nan when undefined."""
        n = self.size
        v = [0.0] * n
        ops = self.ops
        ia = self.ia
        ib = self.ib
        ka = self.ka
        xa = self.xa
        xb = self.xb
        try:
            for i in range(n):
                op = ops[i]
                if op == VAR:
                    v[i] = x[ia[i]]
                elif op == CONST:
                    v[i] = 0.5 * (xa[i] + xb[i]) if xa[i] != xb[i] else xa[i]
                elif op == ADD:
                    v[i] = v[ia[i]] + v[ib[i]]
                elif op == SUB:
                    v[i] = v[ia[i]] - v[ib[i]]
                elif op == MUL:
                    v[i] = v[ia[i]] * v[ib[i]]
                elif op == DIV:
                    v[i] = v[ia[i]] / v[ib[i]]
                elif op == NEG:
                    v[i] = -v[ia[i]]
                elif op == POWI:
                    v[i] = math.pow(v[ia[i]], ka[i])
                elif op == POWC:
                    v[i] = math.pow(xa[i], v[ia[i]])
                elif op == SIN:
                    v[i] = math.sin(v[ia[i]])
                elif op == COS:
                    v[i] = math.cos(v[ia[i]])
                elif op == TAN:
                    v[i] = math.tan(v[ia[i]])
                elif op == EXP:
                    v[i] = math.exp(v[ia[i]])
                elif op == LOG:
                    v[i] = math.log(v[ia[i]])
                elif op == SQRT:
                    v[i] = math.sqrt(v[ia[i]])
                elif op == ABS:
                    v[i] = abs(v[ia[i]])
                elif op == TANH:
                    v[i] = math.tanh(v[ia[i]])
                elif op == ATAN:
                    v[i] = math.atan(v[ia[i]])
                else:  # SGN
                    a = v[ia[i]]
                    v[i] = 0.0 if a == 0.0 else math.copysign(1.0, a)
        except (ValueError, OverflowError, ZeroDivisionError):
            return math.nan
        return v[n - 1]

    def eval_point_batch(self, X: np.ndarray) -> np.ndarray:
        """Vectorized float evaluation over rows of X; undefined points give
        nan or inf entries."""
        n = self.size
        v: list[np.ndarray | float] = [0.0] * n
        ops = self.ops
        ia = self.ia
        ib = self.ib
        ka = self.ka
        xa = self.xa
        with np.errstate(all="ignore"):
            for i in range(n):
                op = ops[i]
                if op == VAR:
                    v[i] = X[:, ia[i]]
                elif op == CONST:
                    v[i] = xa[i]
                elif op == ADD:
                    v[i] = v[ia[i]] + v[ib[i]]
                elif op == SUB:
                    v[i] = v[ia[i]] - v[ib[i]]
                elif op == MUL:
                    v[i] = v[ia[i]] * v[ib[i]]
                elif op == DIV:
                    v[i] = v[ia[i]] / v[ib[i]]
                elif op == NEG:
                    v[i] = -v[ia[i]]  # type: ignore[operator]
                elif op == POWI:
                    v[i] = np.power(v[ia[i]], ka[i])
                elif op == POWC:
                    v[i] = np.power(xa[i], v[ia[i]])
                elif op == SIN:
                    v[i] = np.sin(v[ia[i]])
                elif op == COS:
                    v[i] = np.cos(v[ia[i]])
                elif op == TAN:
                    v[i] = np.tan(v[ia[i]])
                elif op == EXP:
                    v[i] = np.exp(v[ia[i]])
                elif op == LOG:
                    v[i] = np.log(v[ia[i]])
                elif op == SQRT:
                    v[i] = np.sqrt(v[ia[i]])
                elif op == ABS:
                    v[i] = np.abs(v[ia[i]])
                elif op == TANH:
                    v[i] = np.tanh(v[ia[i]])
                elif op == ATAN:
                    v[i] = np.arctan(v[ia[i]])
                else:  # SGN
                    v[i] = np.sign(v[ia[i]])
        out = v[n - 1]
        if not isinstance(out, np.ndarray):
            out = np.full(X.shape[0], out)
        return out


def tape_of(e: Expr) -> Tape:
    if e._tape is None:
        e._tape = Tape(e)
    return e._tape


def eval_natural(e: Expr, b: Box) -> Interval:
    """Natural interval extension: evaluate the tree as written."""
    out = tape_of(e).eval_interval(b.lo, b.hi)
    if out is None:
        return EMPTY
    return Interval._raw(*out)


def eval_point(e: Expr, x: Sequence[float]) -> float:
    return tape_of(e).eval_point(x)


def eval_point_batch(e: Expr, X: np.ndarray) -> np.ndarray:
    return tape_of(e).eval_point_batch(X)


# ---------------------------------------------------------------------------
# Structure queries
# ---------------------------------------------------------------------------


def occurrence_counts(e: Expr) -> dict[int, int]:
    """Map variable index -> number of leaf occurrences in the tree."""
    counts: dict[int, int] = {}
    stack = [e]
    while stack:
        node = stack.pop()
        if node.kind == VAR:
            counts[node.k] = counts.get(node.k, 0) + 1
        else:
            stack.extend(node.children())
    return counts


def free_vars(e: Expr) -> frozenset[int]:
    return frozenset(occurrence_counts(e))


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


def differentiate(e: Expr, i: int) -> Expr:
    """Symbolic partial derivative with respect to variable i.

    For abs the result uses a sign-enclosure node covering the subgradient
    at zero, so interval evaluation of the derivative remains an enclosure
    of all slopes."""
    kind = e.kind
    if kind == CONST:
        return Expr.const(0.0)
    if kind == VAR:
        return Expr.const(1.0 if e.k == i else 0.0)
    if kind == ADD:
        return Expr.add(differentiate(e.a, i), differentiate(e.b, i))
    if kind == SUB:
        return Expr.sub(differentiate(e.a, i), differentiate(e.b, i))
    if kind == MUL:
        da = differentiate(e.a, i)
        db = differentiate(e.b, i)
        return Expr.add(Expr.mul(da, e.b), Expr.mul(e.a, db))
    if kind == DIV:
        da = differentiate(e.a, i)
        db = differentiate(e.b, i)
        if db.is_const(0.0):
            return Expr.div(da, e.b)
        num = Expr.sub(Expr.mul(da, e.b), Expr.mul(e.a, db))
        return Expr.div(num, Expr.powi(e.b, 2))
    if kind == NEG:
        return Expr.neg(differentiate(e.a, i))
    if kind == POWI:
        da = differentiate(e.a, i)
        term = Expr.mul(Expr.const(float(e.k)), Expr.powi(e.a, e.k - 1))
        return Expr.mul(term, da)
    if kind == POWC:
        da = differentiate(e.a, i)
        ln_base = _k_log(e.lo, e.lo)
        assert ln_base is not None
        coeff = Expr.const_interval(_down(ln_base[0]), _up(ln_base[1]))
        return Expr.mul(Expr.mul(coeff, Expr(POWC, e.a, lo=e.lo, hi=e.hi)), da)
    da = differentiate(e.a, i)
    if kind == SIN:
        outer = Expr.fn("cos", e.a)
    elif kind == COS:
        outer = Expr.neg(Expr.fn("sin", e.a))
    elif kind == TAN:
        outer = Expr.add(Expr.const(1.0), Expr.powi(Expr.fn("tan", e.a), 2))
    elif kind == EXP:
        outer = Expr.fn("exp", e.a)
    elif kind == LOG:
        return Expr.div(da, e.a)
    elif kind == SQRT:
        return Expr.div(da, Expr.mul(Expr.const(2.0), Expr.fn("sqrt", e.a)))
    elif kind == ABS:
        outer = Expr(SGN, e.a)
    elif kind == TANH:
        outer = Expr.sub(Expr.const(1.0), Expr.powi(Expr.fn("tanh", e.a), 2))
    elif kind == ATAN:
        return Expr.div(da, Expr.add(Expr.const(1.0), Expr.powi(e.a, 2)))
    elif kind == SGN:
        # slope enclosure of the sign step: zero away from 0; the jump is
        # already absorbed by the abs rule, so 0 is the sound constant here
        return Expr.const(0.0)
    else:  # pragma: no cover
        raise AssertionError(f"bad node kind {kind}")
    return Expr.mul(outer, da)


def _partials(e: Expr) -> dict[int, Expr]:
    if e._cache is None:
        e._cache = {}
    if "partials" not in e._cache:
        e._cache["partials"] = {i: differentiate(e, i) for i in sorted(free_vars(e))}
    return e._cache["partials"]


# ---------------------------------------------------------------------------
# Horner form and mean value form
# ---------------------------------------------------------------------------


class NotPolynomial(ValueError):
    pass


def _to_poly(e: Expr) -> dict[tuple[tuple[int, int], ...], tuple[float, float]]:
    """Sparse multivariate polynomial: monomial (sorted (var, exp) pairs)
    -> interval coefficient.  Raises NotPolynomial on any non-polynomial
    operation, naming the operator."""
    kind = e.kind
    if kind == CONST:
        return {(): (e.lo, e.hi)}
    if kind == VAR:
        return {((e.k, 1),): (1.0, 1.0)}
    if kind == ADD or kind == SUB:
        pa = _to_poly(e.a)
        pb = _to_poly(e.b)
        out = dict(pa)
        for mono, (cl, ch) in pb.items():
            if kind == SUB:
                cl, ch = -ch, -cl
            if mono in out:
                out[mono] = _k_add(out[mono][0], out[mono][1], cl, ch)
            else:
                out[mono] = (cl, ch)
        return out
    if kind == NEG:
        return {m: (-ch, -cl) for m, (cl, ch) in _to_poly(e.a).items()}
    if kind == MUL:
        pa = _to_poly(e.a)
        pb = _to_poly(e.b)
        out: dict = {}
        for ma, ca in pa.items():
            for mb, cb in pb.items():
                mono = _mono_mul(ma, mb)
                c = _k_mul(ca[0], ca[1], cb[0], cb[1])
                if mono in out:
                    out[mono] = _k_add(out[mono][0], out[mono][1], c[0], c[1])
                else:
                    out[mono] = c
        return out
    if kind == POWI:
        base = _to_poly(e.a)
        out = {(): (1.0, 1.0)}
        for _ in range(e.k):
            nxt: dict = {}
            for ma, ca in out.items():
                for mb, cb in base.items():
                    mono = _mono_mul(ma, mb)
                    c = _k_mul(ca[0], ca[1], cb[0], cb[1])
                    if mono in nxt:
                        nxt[mono] = _k_add(nxt[mono][0], nxt[mono][1], c[0], c[1])
                    else:
                        nxt[mono] = c
            out = nxt
        return out
    if kind == DIV:
        pb = _to_poly(e.b)
        if set(pb) <= {()}:
            cl, ch = pb.get((), (0.0, 0.0))
            if cl <= 0.0 <= ch:
                raise NotPolynomial("division by a constant containing zero")
            out = {}
            for mono, ca in _to_poly(e.a).items():
                q = _k_div(ca[0], ca[1], cl, ch)
                assert q is not None
                out[mono] = q
            return out
        raise NotPolynomial("operator '/' with a non-constant divisor")
    name = _FUN_NAMES.get(kind, {POWC: "constant-base '^'", SGN: "sgn"}.get(kind, str(kind)))
    raise NotPolynomial(f"operator '{name}' is not polynomial")


def _mono_mul(ma, mb):
    d: dict[int, int] = dict(ma)
    for v, k in mb:
        d[v] = d.get(v, 0) + k
    return tuple(sorted(d.items()))


def _horner_tree(poly: dict) -> Expr:
    """Nested-multiplication tree, recursing on the lowest variable index."""
    if not poly:
        return Expr.const(0.0)
    vs = sorted({v for mono in poly for v, _ in mono})
    if not vs:
        (cl, ch) = poly[()]
        return Expr.const_interval(cl, ch)
    x = vs[0]
    by_exp: dict[int, dict] = {}
    for mono, c in poly.items():
        d = dict(mono)
        k = d.pop(x, 0)
        rest = tuple(sorted(d.items()))
        group = by_exp.setdefault(k, {})
        if rest in group:
            group[rest] = _k_add(group[rest][0], group[rest][1], c[0], c[1])
        else:
            group[rest] = c
    exps = sorted(by_exp, reverse=True)
    acc = _horner_tree(by_exp[exps[0]])
    prev = exps[0]
    for k in exps[1:]:
        acc = Expr.mul(acc, Expr.powi(Expr.var(x), prev - k))
        acc = Expr.add(acc, _horner_tree(by_exp[k]))
        prev = k
    if prev > 0:
        acc = Expr.mul(acc, Expr.powi(Expr.var(x), prev))
    return acc


def eval_horner(e: Expr, b: Box) -> Interval:
    """Evaluate a polynomial expression in nested Horner form.  Raises
    NotPolynomial (a ValueError) when the tree contains a non-polynomial
    operator."""
    if e._cache is None:
        e._cache = {}
    if "horner" not in e._cache:
        e._cache["horner"] = _horner_tree(_to_poly(e))
    return eval_natural(e._cache["horner"], b)


def eval_mean_value(e: Expr, b: Box) -> Interval:
    """Mean value form: f(m) + sum_i f_i'(b) * (b_i - m_i) about the
    midpoint.  Requires a bounded box."""
    if not b.is_bounded():
        raise ValueError("mean value form requires a bounded box")
    m = b.mid_point()
    fm = tape_of(e).eval_interval(m, m)
    if fm is None:
        return EMPTY
    acc = Interval._raw(*fm)
    for i, de in _partials(e).items():
        g = eval_natural(de, b)
        if g.is_empty:
            return EMPTY
        acc = acc + g * (b[i] - Interval.point(m[i]))
        if acc.is_empty:
            return EMPTY
    return acc


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9']*)"
    r"|(?P<op><=|>=|<|>|[-+*/^(),\[\]])"
)


def _tokenize(text: str, line_no: int) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line_no, pos + 1)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _ExprParser:
    """Recursive-descent expression parser over one token list."""

    def __init__(self, tokens, line_no: int, var_index: dict[str, int]):
        self.tokens = tokens
        self.pos = 0
        self.line = line_no
        self.vars = var_index

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def error(self, msg: str, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.line, tok[2])

    def expect_op(self, op: str):
        kind, val, col = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", self.line, col)

    def parse(self) -> Expr:
        e = self.sum()
        return e

    def sum(self) -> Expr:
        e = self.product()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.product()
                e = Expr(ADD if val == "+" else SUB, e, rhs)
            else:
                return e

    def product(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.unary()
                e = Expr(MUL if val == "*" else DIV, e, rhs)
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Expr.neg(self.unary())
        if kind == "op" and val == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, col = self.peek()
        if not (kind == "op" and val == "^"):
            return base
        self.next()
        exponent = self.unary()  # right-associative: x^-2, x^2^3
        if exponent.kind == CONST and exponent.lo == exponent.hi:
            k = exponent.lo
            if k == int(k) and abs(k) <= 1000:
                return Expr.powi(base, int(k))
            raise ParseError(
                "exponent must be an integer (use sqrt for fractional powers)",
                self.line,
                col,
            )
        if base.kind == CONST and base.lo == base.hi and base.lo > 0.0 and base.lo != 1.0:
            return Expr.pow_base(base.lo, exponent)
        raise ParseError(
            "'^' needs an integer exponent or a positive constant base",
            self.line,
            col,
        )

    def atom(self) -> Expr:
        kind, val, col = self.next()
        if kind == "num":
            return Expr.const(float(val))
        if kind == "name":
            if val == "pi":
                return Expr.pi()
            nxt_kind, nxt_val, _ = self.peek()
            if nxt_kind == "op" and nxt_val == "(":
                if val not in _FN_KINDS:
                    raise ParseError(f"unknown function {val!r}", self.line, col)
                self.next()
                arg = self.sum()
                self.expect_op(")")
                return Expr.fn(val, arg)
            if val in self.vars:
                return Expr.var(self.vars[val])
            raise ParseError(f"unknown identifier {val!r}", self.line, col)
        if kind == "op" and val == "(":
            e = self.sum()
            self.expect_op(")")
            return e
        raise ParseError(f"expected an operand, got {val!r}", self.line, col)

    def at_end(self) -> bool:
        return self.peek()[0] == "end"


def parse_expression(text: str, var_names: Sequence[str], line_no: int = 1) -> Expr:
    """Parse a single expression over the given variable names."""
    index = {name: i for i, name in enumerate(var_names)}
    p = _ExprParser(_tokenize(text, line_no), line_no, index)
    e = p.parse()
    if not p.at_end():
        p.error("trailing input after expression")
    return e


def _parse_bound(p: _ExprParser, line_no: int) -> tuple[float, float]:
    """Parse one box bound: a constant expression of numbers and pi, or
    [-]inf.  Returns its interval enclosure as an endpoint pair."""
    kind, val, col = p.peek()
    negate = False
    if kind == "op" and val == "-":
        save = p.pos
        p.next()
        k2, v2, _ = p.peek()
        if k2 == "name" and v2 == "inf":
            p.next()
            return (-math.inf, -math.inf)
        p.pos = save
    if kind == "name" and val == "inf":
        p.next()
        return (math.inf, math.inf)
    e = p.sum()
    out = tape_of(e).eval_interval([], [])
    if out is None:
        raise ParseError("box bound is undefined", line_no, col)
    return out


class System:
    """A parsed constraint system: named variables with a starting box,
    equations (each meaning expr = 0), and optional side inequalities
    (expr rel 0).  Square unless explicitly flagged otherwise."""

    def __init__(
        self,
        var_names: Sequence[str],
        box: Box,
        equations: Sequence[Expr],
        inequalities: Sequence[tuple[Expr, str]] = (),
        name: str = "system",
        metadata: dict | None = None,
        nonsquare: bool = False,
    ):
        self.var_names = tuple(var_names)
        self.box = box
        self.equations = tuple(equations)
        self.inequalities = tuple(inequalities)
        self.name = name
        self.metadata = dict(metadata or {})
        self.nonsquare = nonsquare
        if len(box) != len(self.var_names):
            raise ValueError("box dimension does not match variable count")
        if not nonsquare and len(self.equations) != len(self.var_names):
            raise ValueError(
                f"system is not square ({len(self.equations)} equations, "
                f"{len(self.var_names)} variables); add a 'nonsquare' line to allow"
            )
        self._jac: JacobianEvaluator | None = None
        self._eq_occ: list[dict[int, int]] | None = None

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_eqs(self) -> int:
        return len(self.equations)

    def equation_occurrences(self) -> list[dict[int, int]]:
        if self._eq_occ is None:
            self._eq_occ = [occurrence_counts(e) for e in self.equations]
        return self._eq_occ

    def jacobian_evaluator(self) -> "JacobianEvaluator":
        if self._jac is None:
            self._jac = JacobianEvaluator(self.equations, self.n_vars)
        return self._jac

    def residual(self, x: Sequence[float]) -> list[float]:
        return [eval_point(e, x) for e in self.equations]

    def residual_norm(self, x: Sequence[float]) -> float:
        r = 0.0
        for e in self.equations:
            v = eval_point(e, x)
            if math.isnan(v):
                return math.inf
            r = max(r, abs(v))
        return r

    def __repr__(self) -> str:
        return (
            f"System({self.name!r}, {self.n_vars} vars, {self.n_eqs} eqs, "
            f"{len(self.inequalities)} ineqs)"
        )


class JacobianEvaluator:
    """Partial-derivative trees of a square (or rectangular) equation block,
    evaluated as an interval matrix over a box or a float matrix at a point.
    Identically-zero entries are skipped."""

    def __init__(self, equations: Sequence[Expr], n_vars: int):
        self.n_eqs = len(equations)
        self.n_vars = n_vars
        self.entries: list[list[tuple[int, Tape]]] = []
        for e in equations:
            row = []
            for i, de in _partials(e).items():
                if not de.is_const(0.0):
                    row.append((i, tape_of(de)))
            self.entries.append(row)

    def interval(self, b: Box) -> IntervalMatrix:
        n, m = self.n_eqs, self.n_vars
        lo = [[0.0] * m for _ in range(n)]
        hi = [[0.0] * m for _ in range(n)]
        blo, bhi = b.lo, b.hi
        for j, row in enumerate(self.entries):
            for i, tape in row:
                out = tape.eval_interval(blo, bhi)
                if out is None:
                    lo[j][i], hi[j][i] = -math.inf, math.inf
                else:
                    lo[j][i], hi[j][i] = out
        return IntervalMatrix._raw(lo, hi)

    def point(self, x: Sequence[float]) -> np.ndarray:
        out = np.zeros((self.n_eqs, self.n_vars))
        for j, row in enumerate(self.entries):
            for i, tape in row:
                out[j, i] = tape.eval_point(x)
        return out

    def point_batch(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros((X.shape[0], self.n_eqs, self.n_vars))
        for j, row in enumerate(self.entries):
            for i, tape in row:
                out[:, j, i] = tape.eval_point_batch(X)
        return out


def jacobian(system: System, b: Box) -> IntervalMatrix:
    """Interval Jacobian of the equation block over b."""
    return system.jacobian_evaluator().interval(b)


def parse_system(text: str, name: str = "system") -> System:
    """Parse the line-oriented system format.  Errors carry line and column."""
    var_names: list[str] = []
    var_index: dict[str, int] = {}
    boxes: dict[str, tuple[float, float]] = {}
    equations: list[Expr] = []
    inequalities: list[tuple[Expr, str]] = []
    metadata: dict[str, str] = {}
    nonsquare = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.lstrip()
        if stripped.startswith("#"):
            comment = stripped[1:].strip()
            if ":" in comment:
                key, _, value = comment.partition(":")
                key = key.strip()
                if key and " " not in key:
                    metadata[key] = value.strip()
            continue
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = _tokenize(line, line_no)
        head_kind, head, head_col = tokens[0]
        if head_kind != "name":
            raise ParseError(f"expected a statement keyword, got {head!r}", line_no, head_col)

        if head == "vars":
            p = _ExprParser(tokens[1:], line_no, {})
            while True:
                kind, val, col = p.next()
                if kind != "name":
                    raise ParseError("expected a variable name", line_no, col)
                if val in var_index:
                    raise ParseError(f"duplicate variable {val!r}", line_no, col)
                if val in ("pi", "inf") or val in _FN_KINDS:
                    raise ParseError(f"{val!r} is reserved", line_no, col)
                var_index[val] = len(var_names)
                var_names.append(val)
                kind, val, col = p.next()
                if kind == "end":
                    break
                if not (kind == "op" and val == ","):
                    raise ParseError("expected ',' between variable names", line_no, col)
        elif head == "box":
            if len(tokens) < 3 or tokens[1][0] != "name":
                raise ParseError("expected 'box <name> in [lo, hi]'", line_no, head_col)
            vname = tokens[1][1]
            if vname not in var_index:
                raise ParseError(f"box for undeclared variable {vname!r}", line_no, tokens[1][2])
            if vname in boxes:
                raise ParseError(f"duplicate box for {vname!r}", line_no, tokens[1][2])
            if tokens[2][1] != "in":
                raise ParseError("expected 'in'", line_no, tokens[2][2])
            p = _ExprParser(tokens[3:], line_no, {})
            p.expect_op("[")
            lo_pair = _parse_bound(p, line_no)
            p.expect_op(",")
            hi_pair = _parse_bound(p, line_no)
            p.expect_op("]")
            if not p.at_end():
                p.error("trailing input after box")
            lo, hi = lo_pair[0], hi_pair[1]
            if math.isnan(lo) or math.isnan(hi) or lo > hi:
                raise ParseError(f"empty box [{lo}, {hi}] for {vname!r}", line_no, head_col)
            boxes[vname] = (lo, hi)
        elif head == "eq":
            p = _ExprParser(tokens[1:], line_no, var_index)
            e = p.parse()
            if not p.at_end():
                p.error("trailing input after equation")
            equations.append(e)
        elif head == "ineq":
            p = _ExprParser(tokens[1:], line_no, var_index)
            e = p.parse()
            kind, rel, col = p.next()
            if kind != "op" or rel not in ("<", "<=", ">", ">="):
                raise ParseError("expected a relation (<, <=, >, >=)", line_no, col)
            kind, val, col = p.next()
            if kind != "num" or float(val) != 0.0:
                raise ParseError("inequalities must compare against 0", line_no, col)
            if not p.at_end():
                p.error("trailing input after inequality")
            inequalities.append((e, rel))
        elif head == "nonsquare":
            nonsquare = True
        else:
            raise ParseError(f"unknown statement {head!r}", line_no, head_col)

    if not var_names:
        raise ParseError("system declares no variables", 1, 1)
    missing = [v for v in var_names if v not in boxes]
    if missing:
        raise ParseError(f"missing box for variable {missing[0]!r}", 1, 1)
    box = Box([boxes[v][0] for v in var_names], [boxes[v][1] for v in var_names])
    return System(
        var_names,
        box,
        equations,
        inequalities,
        name=metadata.get("name", name),
        metadata=metadata,
        nonsquare=nonsquare,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_PREC = {ADD: 1, SUB: 1, MUL: 2, DIV: 2, NEG: 2, POWI: 3, POWC: 3}


def _num_text(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    r = repr(v)
    return r[:-2] if r.endswith(".0") else r


def _prec_of(e: Expr) -> int:
    if e.kind == CONST:
        # negative literals render with a leading minus, like a NEG node
        return 2 if (e.lo == e.hi and e.lo < 0.0) else 4
    if e.kind == VAR:
        return 4
    return _PREC.get(e.kind, 4)  # function calls are atomic


def _wrapped(e: Expr, names: Sequence[str], need: bool) -> str:
    s = _fmt_named(e, names)
    return f"({s})" if need else s


def _fmt_named(e: Expr, names: Sequence[str]) -> str:
    kind = e.kind
    if kind == CONST:
        if e.lo == e.hi:
            v = e.lo
            return "-" + _num_text(-v) if v < 0.0 else _num_text(v)
        if e.lo == _PI_LO and e.hi == _PI_HI:
            return "pi"
        raise ValueError("cannot render a widened constant")
    if kind == VAR:
        return names[e.k]
    if kind == NEG:
        return "-" + _wrapped(e.a, names, _prec_of(e.a) < 2)
    if kind in _BINARY_KINDS:
        p = _PREC[kind]
        op = {ADD: " + ", SUB: " - ", MUL: "*", DIV: "/"}[kind]
        left = _wrapped(e.a, names, _prec_of(e.a) < p)
        right = _wrapped(e.b, names, _prec_of(e.b) <= p)
        return left + op + right
    if kind == POWI:
        return _wrapped(e.a, names, _prec_of(e.a) < 4) + f"^{e.k}"
    if kind == POWC:
        return _num_text(e.lo) + "^" + _wrapped(e.a, names, _prec_of(e.a) < 4)
    if kind == SGN:
        raise ValueError("sign-enclosure nodes are internal and not renderable")
    return f"{_FUN_NAMES[kind]}({_fmt_named(e.a, names)})"


def expr_to_text(e: Expr, names: Sequence[str] | None = None) -> str:
    """Render a tree in the input grammar; parsing the result back (with the
    same names) reproduces an identical tree for generator-built
    expressions.  Default variable names are x0, x1, ..."""
    if names is None:
        n = 1 + max(free_vars(e), default=-1)
        names = [f"x{i}" for i in range(n)]
    return _fmt_named(e, names)


def system_to_text(system: System) -> str:
    """Canonical text form of a system; floats use shortest round-trip
    notation so re-parsing reproduces identical values."""
    lines = []
    for key, value in system.metadata.items():
        lines.append(f"# {key}: {value}")
    if system.nonsquare:
        lines.append("nonsquare")
    lines.append("vars " + ", ".join(system.var_names))
    for i, vname in enumerate(system.var_names):
        lo = _num_text(system.box.lo[i])
        hi = _num_text(system.box.hi[i])
        lines.append(f"box {vname} in [{lo}, {hi}]")
    for e in system.equations:
        lines.append("eq " + expr_to_text(e, system.var_names))
    for e, rel in system.inequalities:
        lines.append(f"ineq {expr_to_text(e, system.var_names)} {rel} 0")
    return "\n".join(lines) + "\n"
