"""Rectangular room geometry: surfaces, reflection-element meshing, occlusion.

Conventions
-----------
Positions are length-3 float arrays in metres.  Surface normals point into
the room.  Meshing tiles each surface with square elements of the requested
area; when an edge length is not an integer multiple of the pitch, the last
row/column is shrunk so the tiling partitions the surface exactly (no
overhang).  Occlusion predicates use open-set intersection: a segment that
only grazes a blocker boundary is NOT blocked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s

# Relative slack used when deciding whether an edge divides exactly into the
# requested pitch (absorbs float noise like 4.0/0.2 = 19.999...).
_MESH_REL_TOL = 1e-9


def as_vec3(value) -> np.ndarray:
    """Coerce to a finite float64 vector of length 3."""
    v = np.asarray(value, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"vector has non-finite components: {v}")
    return v


def unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


# ---------------------------------------------------------------------------
# Surfaces and reflection elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Surface:
    """A reflecting rectangle: origin plus two orthogonal edge vectors."""

    name: str
    origin: np.ndarray        # corner, m
    edge_u: np.ndarray        # full first edge vector, m
    edge_v: np.ndarray        # full second edge vector, m
    normal: np.ndarray        # inward unit normal
    reflection_coefficient: float
    lambertian_order: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "origin", as_vec3(self.origin))
        object.__setattr__(self, "edge_u", as_vec3(self.edge_u))
        object.__setattr__(self, "edge_v", as_vec3(self.edge_v))
        object.__setattr__(self, "normal", unit(as_vec3(self.normal)))
        if abs(float(np.dot(self.edge_u, self.edge_v))) > 1e-9:
            raise ValueError(f"surface {self.name}: edge vectors not orthogonal")
        if not 0.0 <= self.reflection_coefficient <= 1.0:
            raise ValueError(f"surface {self.name}: reflection coefficient outside [0, 1]")
        if self.lambertian_order <= 0.0:
            raise ValueError(f"surface {self.name}: Lambertian order must be > 0")

    @property
    def area(self) -> float:
        return float(np.linalg.norm(self.edge_u) * np.linalg.norm(self.edge_v))


@dataclass(frozen=True)
class Element:
    """One reflection element: a small secondary Lambertian emitter."""

    centre: np.ndarray
    area: float
    normal: np.ndarray
    reflection_coefficient: float
    lambertian_order: float


class ElementSet:
    """Struct-of-arrays view of meshed elements (fast path for the tracer)."""

    def __init__(self, centres, areas, normals, reflection, orders):
        self.centres = np.asarray(centres, dtype=float).reshape(-1, 3)
        self.areas = np.asarray(areas, dtype=float).ravel()
        self.normals = np.asarray(normals, dtype=float).reshape(-1, 3)
        self.reflection = np.asarray(reflection, dtype=float).ravel()
        self.orders = np.asarray(orders, dtype=float).ravel()
        n = len(self.areas)
        if not (self.centres.shape[0] == self.normals.shape[0]
                == self.reflection.shape[0] == self.orders.shape[0] == n):
            raise ValueError("inconsistent element array lengths")

    def __len__(self) -> int:
        return len(self.areas)

    def element(self, i: int) -> Element:
        return Element(
            centre=self.centres[i].copy(),
            area=float(self.areas[i]),
            normal=self.normals[i].copy(),
            reflection_coefficient=float(self.reflection[i]),
            lambertian_order=float(self.orders[i]),
        )

    def total_area(self) -> float:
        return float(self.areas.sum())

    @staticmethod
    def concatenate(sets: list["ElementSet"]) -> "ElementSet":
        return ElementSet(
            np.concatenate([s.centres for s in sets]) if sets else np.zeros((0, 3)),
            np.concatenate([s.areas for s in sets]) if sets else np.zeros(0),
            np.concatenate([s.normals for s in sets]) if sets else np.zeros((0, 3)),
            np.concatenate([s.reflection for s in sets]) if sets else np.zeros(0),
            np.concatenate([s.orders for s in sets]) if sets else np.zeros(0),
        )


def _edge_cells(length: float, pitch: float) -> tuple[np.ndarray, np.ndarray]:
    """Split an edge into full cells of `pitch` plus one shrunk remainder.

    Returns (offsets_of_cell_centres, cell_widths), both 1-D.
    """
    n_full = int(math.floor(length / pitch + _MESH_REL_TOL))
    remainder = length - n_full * pitch
    widths = [pitch] * n_full
    if remainder > _MESH_REL_TOL * length:
        widths.append(remainder)
    widths = np.asarray(widths, dtype=float)
    starts = np.concatenate(([0.0], np.cumsum(widths)[:-1]))
    return starts + widths / 2.0, widths


def mesh_surface(surface: Surface, element_area: float) -> ElementSet:
    """Tile one surface with square elements of the requested area.

    Element centres lie on the surface; the last row/column is shrunk when
    the edges do not divide exactly, so the element areas always sum to the
    surface area.
    """
    if element_area <= 0.0:
        raise ValueError("element area must be positive")
    pitch = math.sqrt(element_area)
    lu = float(np.linalg.norm(surface.edge_u))
    lv = float(np.linalg.norm(surface.edge_v))
    if pitch > lu + _MESH_REL_TOL or pitch > lv + _MESH_REL_TOL:
        raise ValueError(
            f"element pitch {pitch:.4g} m exceeds an edge of surface {surface.name}")
    du = surface.edge_u / lu
    dv = surface.edge_v / lv
    cu, wu = _edge_cells(lu, pitch)
    cv, wv = _edge_cells(lv, pitch)
    # Row-major: v is the outer index, u the inner, fixing the canonical
    # element order for deterministic reductions downstream.
    uu, vv = np.meshgrid(cu, cv)
    centres = (surface.origin[None, :]
               + uu.reshape(-1, 1) * du[None, :]
               + vv.reshape(-1, 1) * dv[None, :])
    areas = (np.outer(wv, wu)).reshape(-1)
    n = len(areas)
    return ElementSet(
        centres,
        areas,
        np.tile(surface.normal, (n, 1)),
        np.full(n, surface.reflection_coefficient),
        np.full(n, surface.lambertian_order),
    )


def mesh_surfaces(surfaces: list[Surface], element_area: float) -> ElementSet:
    """Mesh every surface at the given element area, in surface order."""
    return ElementSet.concatenate([mesh_surface(s, element_area) for s in surfaces])


def room_surfaces(size, wall_reflectance: float, floor_reflectance: float,
                  ceiling_reflectance: float, lambertian_order: float = 1.0
                  ) -> list[Surface]:
    """Six inward-facing surfaces of an axis-aligned room with corner at 0.

    Canonical order: floor, ceiling, x=0 wall, x=max wall, y=0 wall, y=max wall.
    """
    sx, sy, sz = (float(c) for c in as_vec3(size))
    if min(sx, sy, sz) <= 0:
        raise ValueError("room dimensions must be positive")
    ex = np.array([sx, 0.0, 0.0])
    ey = np.array([0.0, sy, 0.0])
    ez = np.array([0.0, 0.0, sz])
    zero = np.zeros(3)

    def surf(name, origin, eu, ev, normal, rho):
        return Surface(name, origin, eu, ev, normal, rho, lambertian_order)

    return [
        surf("floor", zero, ex, ey, [0, 0, 1], floor_reflectance),
        surf("ceiling", [0, 0, sz], ex, ey, [0, 0, -1], ceiling_reflectance),
        surf("wall_x0", zero, ey, ez, [1, 0, 0], wall_reflectance),
        surf("wall_x1", [sx, 0, 0], ey, ez, [-1, 0, 0], wall_reflectance),
        surf("wall_y0", zero, ex, ez, [0, 1, 0], wall_reflectance),
        surf("wall_y1", [0, sy, 0], ex, ez, [0, -1, 0], wall_reflectance),
    ]


# ---------------------------------------------------------------------------
# Blockers and occlusion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneBlocker:
    """Horizontal rectangle that blocks rays crossing it (e.g. a seat top)."""

    z: float
    x_min: float
    x_max: float
    y_min: float
    y_max: float


@dataclass(frozen=True)
class BoxBlocker:
    """Axis-aligned opaque box (e.g. an equipment rack)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", as_vec3(self.lo))
        object.__setattr__(self, "hi", as_vec3(self.hi))
        if not np.all(self.hi > self.lo):
            raise ValueError("box blocker needs hi > lo on every axis")


Blocker = PlaneBlocker | BoxBlocker


def _plane_blocked(a: np.ndarray, b: np.ndarray, blk: PlaneBlocker) -> np.ndarray:
    """Vectorized open-set segment/plane-rectangle test. a, b: (N, 3)."""
    za = a[:, 2] - blk.z
    zb = b[:, 2] - blk.z
    crossing = za * zb < 0.0  # strictly opposite sides; touching does not block
    hit = np.zeros(len(a), dtype=bool)
    if not crossing.any():
        return hit
    idx = np.nonzero(crossing)[0]
    t = za[idx] / (za[idx] - zb[idx])
    px = a[idx, 0] + t * (b[idx, 0] - a[idx, 0])
    py = a[idx, 1] + t * (b[idx, 1] - a[idx, 1])
    inside = ((px > blk.x_min) & (px < blk.x_max)
              & (py > blk.y_min) & (py < blk.y_max))
    hit[idx] = inside
    return hit


def _box_blocked(a: np.ndarray, b: np.ndarray, blk: BoxBlocker) -> np.ndarray:
    """Vectorized open-set segment/box test via the slab method. a, b: (N, 3)."""
    d = b - a
    t_enter = np.full(len(a), -np.inf)
    t_exit = np.full(len(a), np.inf)
    for ax in range(3):
        lo, hi = blk.lo[ax], blk.hi[ax]
        dax = d[:, ax]
        aax = a[:, ax]
        parallel = dax == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - aax) / dax
            t2 = (hi - aax) / dax
        t_lo = np.minimum(t1, t2)
        t_hi = np.maximum(t1, t2)
        # Parallel rays: inside the open slab they impose no limit, outside
        # (or on the boundary) they can never enter the open interior.
        inside = (aax > lo) & (aax < hi)
        t_lo = np.where(parallel, np.where(inside, -np.inf, np.inf), t_lo)
        t_hi = np.where(parallel, np.where(inside, np.inf, -np.inf), t_hi)
        t_enter = np.maximum(t_enter, t_lo)
        t_exit = np.minimum(t_exit, t_hi)
    lo_t = np.maximum(t_enter, 0.0)
    hi_t = np.minimum(t_exit, 1.0)
    # Positive-length interior overlap within the open segment (0, 1).
    return (lo_t < hi_t) & (t_exit > 0.0) & (t_enter < 1.0)


def occluded_mask(a, b, blockers: list[Blocker]) -> np.ndarray:
    """True where segment a[i]-b[i] passes through any blocker interior."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[0] == 1 and b.shape[0] > 1:
        a = np.broadcast_to(a, b.shape)
    if b.shape[0] == 1 and a.shape[0] > 1:
        b = np.broadcast_to(b, a.shape)
    hit = np.zeros(a.shape[0], dtype=bool)
    for blk in blockers:
        if isinstance(blk, PlaneBlocker):
            hit |= _plane_blocked(a, b, blk)
        elif isinstance(blk, BoxBlocker):
            hit |= _box_blocked(a, b, blk)
        else:
            raise TypeError(f"unknown blocker type: {type(blk)!r}")
    return hit


def occluded(a, b, blockers: list[Blocker]) -> bool:
    """True iff the open segment a-b intersects any blocker volume/plane."""
    a = as_vec3(a)
    b = as_vec3(b)
    if np.array_equal(a, b):
        raise ValueError("occlusion query needs two distinct endpoints")
    return bool(occluded_mask(a[None, :], b[None, :], blockers)[0])
