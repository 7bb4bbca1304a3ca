"""Shared helpers for the benchmark instance generators.

Every generator builds a system as plain text and runs it through the
parser, so whatever comes out is guaranteed to load the same way from
disk.  Determinism contract: a fixed seed plus fixed parameters must
produce byte-identical text.  All randomness goes through
``numpy.random.default_rng`` (PCG64) and the draw order inside each
generator is part of its interface; reordering draws is a breaking
change.
"""

from __future__ import annotations

import numpy as np

from ..expression import System, parse_system

RNG_KIND = "numpy-pcg64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed))


def num(x) -> str:
    """Format a constant for system text so it reparses to the same float."""
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def vec(values, sep: str = " ") -> str:
    return sep.join(num(v) for v in values)


def build_system(metadata, var_names, boxes, equations, inequalities=()) -> System:
    """Assemble system text and parse it back into a System.

    metadata: iterable of (key, value) pairs, emitted as '# key: value'.
    boxes: one '[lo, hi]' text per variable, aligned with var_names.
    """
    var_names = list(var_names)
    boxes = list(boxes)
    if len(boxes) != len(var_names):
        raise ValueError("one box per variable required")
    lines = [f"# {k}: {v}" for k, v in metadata]
    lines.append("vars " + ", ".join(var_names))
    for name, btxt in zip(var_names, boxes):
        lines.append(f"box {name} in {btxt}")
    for eq in equations:
        lines.append("eq " + eq)
    for iq in inequalities:
        lines.append("ineq " + iq)
    return parse_system("\n".join(lines) + "\n")
