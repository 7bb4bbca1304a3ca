"""Flash separation unit instances (ethanol-water, 28 equations).

Steady-state model of a flash drum at fixed temperature: vapor-liquid
equilibrium with Wilson-type activity coefficients, component and
energy balances, holdup/volume relations and vessel geometry.  The 28
unknowns are

    K1 K2 x1 x2 xF2 y1 y2 g1 g2 al1 al2 p hF hL hV
    FL FV Q n1 n2 nL nV U VL VV V A r

(g = activity coefficient gamma, al = its temperature parameter alpha).
Operating inputs (pressure drop dp, feed pressure pF, feed composition
xF1, feed flow FF) select the instance; everything else is a fixed
constant.  Default boxes are [-1e9, 1e9] on all variables, overridable
per variable for physically informed runs.

Enthalpy and saturation-pressure correlations are not built in: the
caller must supply coefficients through ``FlashParams.correlations``
(see CORRELATION_TEMPLATE).  Enthalpies are polynomials in temperature,
h_i(T) = sum_k coef[k] * T^k, in J/mol.  Saturation pressure uses the
base-10 Antoine form, p_sat_i(T) = 10^(A - B/(C + T)), in the same
pressure unit as p (bar here since p is converted by 1e5 to Pa in the
volume relations).  Zero-valued enthalpy offsets and excess volumes are
dropped from the emitted text.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .common import build_system, num

# fixed model constants
T = 353.15
T_FEED = 353.15
D_VESSEL = 0.16
H_VESSEL = 0.5
HL_LEVEL = 0.25
Z_VAPOR = 1.0
LAMBDA = (95.68, 506.7)
V_MOLAR = (5.869e-5, 1.807e-5)
R_GAS = 8.314

_VARS = (
    "K1", "K2", "x1", "x2", "xF2", "y1", "y2", "g1", "g2", "al1", "al2",
    "p", "hF", "hL", "hV", "FL", "FV", "Q", "n1", "n2", "nL", "nV",
    "U", "VL", "VV", "V", "A", "r",
)

# required correlation slots; each holds one coefficient list per component
CORRELATION_TEMPLATE = {
    "h_liquid": [None, None],  # [c0, c1, ...] -> h(T) = c0 + c1*T + ...
    "h_vapor": [None, None],
    "h_feed": [None, None],
    "p_sat": [None, None],  # [A, B, C] -> 10^(A - B/(C + T))
}


@dataclass
class FlashParams:
    dp: float  # pressure drop across the feed valve
    p_feed: float
    x_feed1: float  # feed mole fraction of component 1
    flow_feed: float
    correlations: dict | None = None
    box: tuple = (-1e9, 1e9)
    box_override: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.x_feed1 <= 1.0:
            raise ValueError("feed composition must lie in [0, 1]")
        if self.flow_feed <= 0 or self.p_feed <= 0:
            raise ValueError("feed flow and pressure must be positive")


def _poly_at(coeffs, t):
    return sum(c * t ** k for k, c in enumerate(coeffs))


def _correlation_values(config):
    if config is None:
        config = {}
    missing = []
    values = {}
    for slot in CORRELATION_TEMPLATE:
        rows = config.get(slot)
        if rows is None or len(rows) != 2 or any(r is None for r in rows):
            missing.append(slot)
            continue
        values[slot] = rows
    if missing:
        raise ValueError(
            "flash correlation coefficients missing for: " + ", ".join(missing)
        )
    h_liq = [_poly_at(values["h_liquid"][i], T) for i in range(2)]
    h_vap = [_poly_at(values["h_vapor"][i], T) for i in range(2)]
    h_feed = [_poly_at(values["h_feed"][i], T_FEED) for i in range(2)]
    p_sat = []
    for i in range(2):
        a, b, c = values["p_sat"][i]
        p_sat.append(10.0 ** (a - b / (c + T)))
    return h_liq, h_vap, h_feed, p_sat


def gen_flash(p: FlashParams):
    h_liq, h_vap, h_feed, p_sat = _correlation_values(p.correlations)
    xf1 = p.x_feed1
    ff = p.flow_feed

    equations = [
        "K1*x1 - y1",
        "K2*x2 - y2",
        "y1 + y2 - 1",
        "x1 + x2 - 1",
        f"{num(xf1)} + xF2 - 1",
        f"hF - ({num(xf1)}*{num(h_feed[0])} + xF2*{num(h_feed[1])})",
        f"hL - (x1*{num(h_liq[0])} + x2*{num(h_liq[1])})",
        f"hV - (y1*{num(h_vap[0])} + y2*{num(h_vap[1])})",
        f"{num(p.dp)} - ({num(p.p_feed)} - p)",
        f"K1 - g1*{num(p_sat[0])}/p",
        f"K2 - g2*{num(p_sat[1])}/p",
    ]
    # Wilson-type activity coefficients
    for i, j in ((1, 2), (2, 1)):
        den = f"(x{i} + al{i}*(1 - x{i}))"
        other = f"al{j}/(al{j}*x{i} + (1 - x{i}))"
        equations.append(
            f"g{i} - exp((1 - x{i})*(al{i}/{den} - {other}))/{den}"
        )
    for i in range(1, 3):
        v_i = V_MOLAR[i - 1]
        ratio = ((V_MOLAR[0] + V_MOLAR[1]) - v_i) / v_i
        equations.append(
            f"al{i} - {num(ratio)}*exp(-{num(LAMBDA[i - 1])}/{num(T)})"
        )
    # balances
    equations += [
        f"{num(ff)}*hF - FV*hV - FL*hL + Q",
        f"{num(ff)}*{num(xf1)} - FV*y1 - FL*x1",
        f"{num(ff)}*xF2 - FV*y2 - FL*x2",
    ]
    # holdups and volumes
    v1, v2 = num(V_MOLAR[0]), num(V_MOLAR[1])
    rtz = f"{num(R_GAS)}*({num(T)}*{num(Z_VAPOR)})"
    equations += [
        f"U - nL*(hL - p*(100000*(x1*{v1} + x2*{v2}))) - nV*(hV - {rtz})",
        "V - (VL + VV)",
        "n1 - (x1*nL + y1*nV)",
        "n2 - (x2*nL + y2*nV)",
        f"VL - (x1*{v1} + x2*{v2})*nL",
        f"VV - nV*{rtz}/(p*100000)",
    ]
    # vessel geometry (constant D^2 is precomputed: the parser would fold
    # a literal square into an interval constant that cannot be re-emitted)
    d2, h = num(D_VESSEL * D_VESSEL), num(H_VESSEL)
    equations += [
        f"{num(HL_LEVEL)} - 4*VL/(pi*{d2})",
        f"A - pi*{d2}/4",
        f"V - A*{h}",
        f"r - {num(D_VESSEL)}/{h}",
    ]

    lo, hi = p.box
    boxes = []
    for name in _VARS:
        blo, bhi = p.box_override.get(name, (lo, hi))
        boxes.append(f"[{num(blo)}, {num(bhi)}]")
    metadata = [
        ("family", "flash"),
        ("dp", num(p.dp)),
        ("p_feed", num(p.p_feed)),
        ("x_feed1", num(xf1)),
        ("flow_feed", num(ff)),
    ]
    return build_system(metadata, _VARS, boxes, equations)


def flash_grid(steps: int = 10) -> list:
    """Grid of operating inputs: steps^4 FlashParams without correlations.

    Default ranges cover mild vacuum to slight overpressure operation;
    callers attach their correlation config before generating.
    """
    import numpy as np

    dps = np.linspace(0.01, 0.1, steps)
    pfs = np.linspace(0.6, 1.5, steps)
    xfs = np.linspace(0.05, 0.95, steps)
    ffs = np.linspace(0.5, 5.0, steps)
    out = []
    for dp in dps:
        for pf in pfs:
            for xf in xfs:
                for ff in ffs:
                    out.append(FlashParams(float(dp), float(pf), float(xf), float(ff)))
    return out
