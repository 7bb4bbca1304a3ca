"""Stewart platform direct kinematics instances.

The pose of a rigid platform is encoded by an anchor point n and two
orthonormal frame vectors e1, e2 (the third axis is their cross
product, substituted symbolically).  Rod 1 pins ||n|| = 1; rods 2..6
constrain distances between platform points (offsets in the moving
frame) and base points (fixed coordinates), giving a 9x9 polynomial
system over [-1, 1]^9:

    ||n||^2 = 1,  ||e1||^2 = 1,  ||e2||^2 = 1,  e1.e2 = 0,
    ||n + sum_k b_jk e_k - a_j||^2 = L_j^2   for rods j = 2..6.

Base anchors follow the usual normal form: rod 2 lies on the base x
axis, rod 3 in the base xy plane, rods 4..6 are unrestricted.  Random
instances frequently have no real solution; that is expected.
"""

from __future__ import annotations

from dataclasses import dataclass

from .common import RNG_KIND, build_system, make_rng, num, vec

_VARS = ("n1", "n2", "n3", "e11", "e12", "e13", "e21", "e22", "e23")

# cross product e3 = e1 x e2, written out per component
_E3 = (
    "(e12*e23 - e13*e22)",
    "(e13*e21 - e11*e23)",
    "(e11*e22 - e12*e21)",
)


@dataclass
class StewartParams:
    seed: int = 0
    lengths: tuple | None = None  # L2..L6; L1 is fixed to 1
    a: tuple | None = None  # base anchors ((a21,), (a31, a32), (a41, a42, a43), ...)
    b: tuple | None = None  # platform offsets, same shapes as a

    def __post_init__(self):
        for field, val in (("lengths", self.lengths), ("a", self.a), ("b", self.b)):
            if val is None:
                continue
            shapes = (5,) if field == "lengths" else (1, 2, 3, 3, 3)
            if field == "lengths":
                if len(val) != 5:
                    raise ValueError("need 5 rod lengths (L2..L6)")
            elif tuple(len(v) for v in val) != shapes:
                raise ValueError(f"{field} must have shapes {shapes}")


def gen_stewart(p: StewartParams):
    rng = make_rng(p.seed)
    if p.lengths is not None:
        lengths = [float(v) for v in p.lengths]
    else:
        lengths = [float(v) for v in rng.uniform(0.5, 2.0, size=5)]
    if p.a is not None and p.b is not None:
        a = [list(map(float, row)) for row in p.a]
        b = [list(map(float, row)) for row in p.b]
    elif p.a is None and p.b is None:
        a21, b21 = rng.uniform(0.0, 2.0, size=2)
        rest = rng.uniform(0.0, 1.5, size=22)
        a = [[a21], [rest[0], rest[1]]]
        b = [[b21], [rest[2], rest[3]]]
        k = 4
        for _ in range(3):
            a.append(list(rest[k:k + 3]))
            b.append(list(rest[k + 3:k + 6]))
            k += 6
    else:
        raise ValueError("give both anchor sets or neither")

    frame = (("e11", "e12", "e13"), ("e21", "e22", "e23"), _E3)
    equations = [
        "n1^2 + n2^2 + n3^2 - 1",
        "e11^2 + e12^2 + e13^2 - 1",
        "e21^2 + e22^2 + e23^2 - 1",
        "e11*e21 + e12*e22 + e13*e23",
    ]
    for j in range(5):
        bj, aj, lj = b[j], a[j], lengths[j]
        comps = []
        for d in range(3):
            parts = [f"n{d + 1}"]
            for k in range(len(bj)):
                parts.append(f"{num(bj[k])}*{frame[k][d]}")
            expr = " + ".join(parts)
            if d < len(aj):
                expr += f" - {num(aj[d])}"
            comps.append(f"({expr})")
        equations.append(" + ".join(f"{c}^2" for c in comps) + f" - {num(lj * lj)}")

    metadata = [
        ("family", "stewart"),
        ("rng", RNG_KIND),
        ("seed", p.seed),
        ("lengths", vec(lengths)),
        ("a", " ; ".join(vec(row) for row in a)),
        ("b", " ; ".join(vec(row) for row in b)),
    ]
    boxes = ["[-1, 1]"] * 9
    return build_system(metadata, _VARS, boxes, equations)
