"""Visual acuity model: viewing distance to tolerable boundary point density.

The chain runs in five short steps. A viewer with normal acuity resolves
about one arcminute between adjacent pixels, which at a reference distance
d0 fixes a finest useful pixel pitch (ppi_initial). Moving to distance d_t
scales that resolution inversely (ppi_at), the display hardware caps it
(effective_ppi), the cap translates into the smallest voxel still
distinguishable (distinguishable_voxel), and a density map H finally turns
that voxel size into the boundary PLD eta*: the smallest retained point
fraction a viewer at d_t cannot tell from full density.

Every step uses only ratios of lengths, so any consistent unit works; this
module treats all resolutions as pixels per meter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "AcuityParams",
    "ParametricDensityMap",
    "ppi_initial",
    "ppi_at",
    "effective_ppi",
    "distinguishable_voxel",
    "boundary_pld",
    "eta_star_at_distance",
]


@dataclass(frozen=True)
class AcuityParams:
    """Viewer, content and device constants of the acuity chain.

    Attributes:
        d0: reference viewing distance in meters; at d0 the finest source
            voxel v0 projects to exactly one resolvable pixel.
        v0: voxel size of the source cloud at full density, meters.
        ppi_device: resolution ceiling of the display, pixels per meter.
        theta_arcmin: minimum resolvable visual angle, arcminutes.
    """

    d0: float = 1.0
    v0: float = 0.002
    ppi_device: float = 4000.0
    theta_arcmin: float = 1.0

    def __post_init__(self):
        for name in ("d0", "v0", "ppi_device", "theta_arcmin"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.theta_arcmin > 60.0:
            raise ValueError("theta_arcmin must be at most 60 (one degree)")


def ppi_initial(params: AcuityParams) -> float:
    """Finest resolvable pixel pitch at the reference distance.

    PPI0 = 1 / (2 * d0 * tan(theta / 2)) with theta the minimum visual
    angle; strictly decreasing in d0.
    """
    if params.d0 <= 0.0:
        raise ValueError("d0 must be positive")
    half_angle = 0.5 * params.theta_arcmin * (1.0 / 60.0) * math.pi / 180.0
    return 1.0 / (2.0 * params.d0 * math.tan(half_angle))


def ppi_at(d_t: float, params: AcuityParams, ppi0: float) -> float:
    """Resolvable pixel pitch at distance d_t: (d0 / d_t) * PPI0."""
    if d_t <= 0.0:
        raise ValueError(f"viewing distance must be positive, got {d_t}")
    return params.d0 / d_t * ppi0


def effective_ppi(ppi_t: float, params: AcuityParams) -> float:
    """Device-capped pixel pitch: min(PPI_t, PPI_device)."""
    return min(ppi_t, params.ppi_device)


def distinguishable_voxel(p_t: float, params: AcuityParams, ppi0: float) -> float:
    """Smallest voxel size still distinguishable at effective pitch p_t.

    Defined by v_t * P_t = PPI0 * v0, i.e. the projected voxel covers the
    same pixel count as the finest source voxel does at d0.
    """
    if p_t <= 0.0:
        raise ValueError("effective pixel pitch must be positive")
    return ppi0 * params.v0 / p_t


class ParametricDensityMap:
    """Closed-form density map for clouds without a measured table.

    eta(v) = min(1, (v0 / v) ** alpha). Surface-dominated clouds occupy
    O(v^-2) voxels, so alpha defaults to 2; solid volumetric clouds sit
    nearer alpha = 3.
    """

    def __init__(self, v0: float, alpha: float = 2.0):
        if v0 <= 0.0 or alpha <= 0.0:
            raise ValueError("v0 and alpha must be positive")
        self.v0 = v0
        self.alpha = alpha

    def eta_for_voxel(self, v: float) -> float:
        if v <= 0.0:
            raise ValueError("voxel size must be positive")
        return min(1.0, (self.v0 / v) ** self.alpha)


def boundary_pld(v_t: float, density_map) -> float:
    """Boundary PLD for a distinguishable voxel size, via the density map.

    ``density_map`` is anything exposing eta_for_voxel(v); tabulated maps
    clamp (and warn) outside their measured domain rather than extrapolate.
    """
    eta = density_map.eta_for_voxel(v_t)
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"density map returned eta outside (0, 1]: {eta}")
    return eta


def eta_star_at_distance(d_t: float, params: AcuityParams, density_map,
                         ppi0: float | None = None) -> float:
    """Boundary PLD at viewing distance d_t; the full five-step chain."""
    if ppi0 is None:
        ppi0 = ppi_initial(params)
    p_t = effective_ppi(ppi_at(d_t, params, ppi0), params)
    v_t = distinguishable_voxel(p_t, params, ppi0)
    return boundary_pld(v_t, density_map)
