"""Orbit determination from five line-of-sight observations.

Five observers at positions p_i look along unit directions u_i; each
sight line meets the orbital plane at p_i + rho_i u_i.  The orbit is a
conic with its focus at the origin, lying in the plane through the
origin with unit normal w.  An in-plane frame is carried by

    v' = lam * (w x e1) = lam * (0, w3, -w2),      v = v' x w,

with lam normalizing v' to unit length.  Writing (X_i, Y_i) for the
plane coordinates of the i-th intersection point, the system is

    ||w||^2 = 1
    lam^2 * (w2^2 + w3^2) = 1
    w . (p_i + rho_i u_i) = 0                      i = 1..5
    a X_i^2 + b X_i Y_i + c Y_i^2 + d X_i + e Y_i + 1 = 0
    e^2 - d^2 + 4a - 4c = 0,   d e - 2b = 0        (focus at origin)

for 14 unknowns (w1, w2, w3, lam, rho1..rho5, a, b, c, d, e).  The
optional side inequality b^2 - 4ac < 0 restricts roots to ellipses.

gen_orbit samples observers at random; gen_orbit_oracle instead builds
an instance around a known ellipse so the exact root is available in
the metadata (and chooses boxes scaled to that construction).  lam is
truncated above at lambda_max since the solver needs bounded boxes; the
true value 1/sqrt(w2^2 + w3^2) only escapes the default bound when w is
within 1e-6 of the e1 axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .common import RNG_KIND, build_system, make_rng, num, vec

_VARS = ("w1", "w2", "w3", "lam", "rho1", "rho2", "rho3", "rho4", "rho5",
         "a", "b", "c", "d", "e")


@dataclass
class OrbitParams:
    seed: int = 0
    P: tuple | None = None  # five observer positions, one triple each
    U: tuple | None = None  # five unit sight directions, one triple each
    lambda_max: float = 1e6
    rho_box: tuple = (-100.0, 100.0)
    conic_box: tuple = (-100.0, 100.0)
    ellipse_only: bool = True

    def __post_init__(self):
        for name, val in (("P", self.P), ("U", self.U)):
            if val is None:
                continue
            if len(val) != 5 or any(len(row) != 3 for row in val):
                raise ValueError(f"{name} needs five coordinate triples")
        if self.U is not None:
            for row in self.U:
                if abs(math.hypot(*row) - 1.0) > 1e-12:
                    raise ValueError("sight directions must be unit vectors")
        if self.lambda_max <= 1:
            raise ValueError("lambda_max must exceed 1")


def _orbit_system(P, U, boxes, metadata, ellipse_only):
    equations = [
        "w1^2 + w2^2 + w3^2 - 1",
        "lam^2*(w2^2 + w3^2) - 1",
    ]
    for i in range(5):
        r = [f"({num(P[i][k])} + rho{i + 1}*{num(U[i][k])})" for k in range(3)]
        equations.append(f"w1*{r[0]} + w2*{r[1]} + w3*{r[2]}")
    for i in range(5):
        r = [f"({num(P[i][k])} + rho{i + 1}*{num(U[i][k])})" for k in range(3)]
        x = f"(lam*((w2^2 + w3^2)*{r[0]} - w1*w2*{r[1]} - w1*w3*{r[2]}))"
        y = f"(lam*(w3*{r[1]} - w2*{r[2]}))"
        equations.append(
            f"a*{x}^2 + b*{x}*{y} + c*{y}^2 + d*{x} + e*{y} + 1"
        )
    equations.append("e^2 - d^2 + 4*a - 4*c")
    equations.append("d*e - 2*b")
    inequalities = ["b^2 - 4*a*c < 0"] if ellipse_only else []
    return build_system(metadata, _VARS, boxes, equations, inequalities)


def _boxes(lam_hi, rho_box, conic_box):
    boxes = ["[0, 1]", "[-1, 1]", "[-1, 1]", f"[1, {num(lam_hi)}]"]
    boxes += [f"[{num(rho_box[0])}, {num(rho_box[1])}]"] * 5
    boxes += [f"[{num(conic_box[0])}, {num(conic_box[1])}]"] * 5
    return boxes


def gen_orbit(p: OrbitParams):
    rng = make_rng(p.seed)
    if p.P is not None:
        P = [[float(v) for v in row] for row in p.P]
    else:
        P = [[float(v) for v in row] for row in rng.uniform(-10.0, 10.0, size=(5, 3))]
    if p.U is not None:
        U = [[float(v) for v in row] for row in p.U]
    else:
        raw = rng.normal(size=(5, 3))
        U = [[float(v) for v in row / np.linalg.norm(row)] for row in raw]

    metadata = [
        ("family", "orbit"),
        ("rng", RNG_KIND),
        ("seed", p.seed),
        ("P", " ; ".join(vec(row) for row in P)),
        ("U", " ; ".join(vec(row) for row in U)),
    ]
    boxes = _boxes(p.lambda_max, p.rho_box, p.conic_box)
    return _orbit_system(P, U, boxes, metadata, p.ellipse_only)


def gen_orbit_oracle(seed: int = 0, ellipse_only: bool = True,
                     margin: float | None = 0.2):
    """Instance built around a known ellipse; exact root in metadata.

    The plane normal is redrawn until w2^2 + w3^2 >= 0.01, so lam <= 10
    and a [1, 12] box suffices.  Observer distances t_i in [1, 5] give
    rho boxes [0, 8]; conic coefficients of the constructed ellipse stay
    well inside [-2, 2].

    By default each variable's box is the construction value +- margin
    (clipped to those family ranges): a localized verification instance
    whose certified root can be checked against the known construction.
    margin=None keeps the full family box; with fourteen variables and no
    initial contraction grip that is a far harder search.
    """
    rng = make_rng(seed)
    while True:
        w = rng.normal(size=3)
        w /= np.linalg.norm(w)
        if w[0] < 0:
            w = -w
        if w[1] * w[1] + w[2] * w[2] >= 0.01:
            break
    lam = 1.0 / math.sqrt(w[1] * w[1] + w[2] * w[2])
    vp = lam * np.array([0.0, w[2], -w[1]])  # v'
    v = np.cross(vp, w)

    semi = rng.uniform(2.0, 5.0)
    ecc = rng.uniform(0.2, 0.6)
    phi0 = rng.uniform(-math.pi, math.pi)
    ell = semi * (1.0 - ecc * ecc)  # semi-latus rectum
    c0, s0 = math.cos(phi0), math.sin(phi0)
    conic = [
        (ecc * ecc * c0 * c0 - 1.0) / (ell * ell),
        2.0 * ecc * ecc * c0 * s0 / (ell * ell),
        (ecc * ecc * s0 * s0 - 1.0) / (ell * ell),
        -2.0 * ecc * c0 / ell,
        -2.0 * ecc * s0 / ell,
    ]

    # observations spread around the orbit: clustered anomalies make the
    # five conic equations nearly dependent and the root badly conditioned
    base = rng.uniform(-math.pi, math.pi)
    jitter = rng.uniform(-0.3, 0.3, size=5)
    nus = [base + 2.0 * math.pi * i / 5.0 + jitter[i] for i in range(5)]
    ts = rng.uniform(1.0, 5.0, size=5)
    P, U, rhos = [], [], []
    for i in range(5):
        r_pol = ell / (1.0 + ecc * math.cos(nus[i] - phi0))
        point = r_pol * math.cos(nus[i]) * v + r_pol * math.sin(nus[i]) * vp
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        P.append([float(x) for x in point - ts[i] * u])
        U.append([float(x) for x in u])
        rhos.append(float(ts[i]))

    root = [float(w[0]), float(w[1]), float(w[2]), lam] + rhos + conic
    metadata = [
        ("family", "orbit"),
        ("rng", RNG_KIND),
        ("seed", seed),
        ("oracle", "true"),
        ("P", " ; ".join(vec(row) for row in P)),
        ("U", " ; ".join(vec(row) for row in U)),
        ("root", vec(root)),
    ]
    if margin is None:
        boxes = _boxes(12, (0.0, 8.0), (-2.0, 2.0))
    else:
        if margin <= 0:
            raise ValueError("margin must be positive")
        metadata.insert(4, ("margin", num(margin)))
        family_lo = [0.0, -1.0, -1.0, 1.0] + [0.0] * 5 + [-2.0] * 5
        family_hi = [1.0, 1.0, 1.0, 12.0] + [8.0] * 5 + [2.0] * 5
        boxes = [
            f"[{num(max(lo, r - margin))}, {num(min(hi, r + margin))}]"
            for r, lo, hi in zip(root, family_lo, family_hi)
        ]
    return _orbit_system(P, U, boxes, metadata, ellipse_only)
