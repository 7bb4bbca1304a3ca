"""Seeded generators for the five parametric benchmark families."""

from .common import RNG_KIND
from .flash import CORRELATION_TEMPLATE, FlashParams, flash_grid, gen_flash
from .kuramoto import KuramotoParams, gen_kuramoto
from .orbit import OrbitParams, gen_orbit, gen_orbit_oracle
from .robot import (
    RobotParams,
    check_square_selection,
    gen_planar_robot,
    gen_spatial_robot,
)
from .stewart import StewartParams, gen_stewart

__all__ = [
    "RNG_KIND",
    "CORRELATION_TEMPLATE",
    "FlashParams",
    "KuramotoParams",
    "OrbitParams",
    "RobotParams",
    "StewartParams",
    "check_square_selection",
    "flash_grid",
    "gen_flash",
    "gen_kuramoto",
    "gen_orbit",
    "gen_orbit_oracle",
    "gen_planar_robot",
    "gen_spatial_robot",
    "gen_stewart",
]
