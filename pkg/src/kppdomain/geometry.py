"""Grid domains with per-face boundary parameters.

A domain is a boolean mask on a uniform cell grid. Every face separating a
masked cell from an unmasked (or out-of-grid) cell is a boundary face and
carries a parameter ``sigma`` in [0, 1] for the boundary operator
``sigma * du/dnu + (1 - sigma) * u``: 0 is Dirichlet, 1 is Neumann.

Faces are indexed by direction: 0=E (+x), 1=W (-x), 2=N (+y), 3=S (-y).
Masks are stored with shape ``(ny, nx)`` so ``mask[j, i]`` is the cell with
center ``origin + ((i + 1/2) h, (j + 1/2) h)``; the linear cell index is
``j * nx + i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

FACE_NAMES = ("E", "W", "N", "S")
FACE_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))  # (di, dj)
FACE_NORMALS = tuple((float(di), float(dj)) for di, dj in FACE_OFFSETS)
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class GridSpec:
    h: float
    origin: tuple[float, float]
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"cell width must be positive, got {self.h}")
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid must be at least 3x3, got {self.nx}x{self.ny}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinate arrays ``(X, Y)``, each of shape ``(ny, nx)``."""
        x = self.origin[0] + (np.arange(self.nx) + 0.5) * self.h
        y = self.origin[1] + (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(x, y)

    def center(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + (i + 0.5) * self.h, self.origin[1] + (j + 0.5) * self.h)

    def locate(self, point: Sequence[float]) -> tuple[int, int] | None:
        """Cell ``(i, j)`` containing ``point``, or None outside the grid."""
        i = math.floor((point[0] - self.origin[0]) / self.h)
        j = math.floor((point[1] - self.origin[1]) / self.h)
        if 0 <= i < self.nx and 0 <= j < self.ny:
            return i, j
        return None


def boundary_face_mask(mask: np.ndarray) -> np.ndarray:
    """Boolean array ``(4, ny, nx)``: face d of cell (j, i) is a boundary face."""
    padded = np.pad(mask, 1, constant_values=False)
    ny, nx = mask.shape
    out = np.empty((4,) + mask.shape, dtype=bool)
    for d, (di, dj) in enumerate(FACE_OFFSETS):
        nb = padded[1 + dj : 1 + dj + ny, 1 + di : 1 + di + nx]
        out[d] = mask & ~nb
    return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DomainModel:
    """Mask plus boundary-face parameters on a :class:`GridSpec`.

    ``face_sigma[d, j, i]`` holds sigma for face ``d`` of cell ``(i, j)`` when
    that face is a boundary face and NaN otherwise. ``tags`` carries
    builder metadata (named sub-regions such as a tail box, window radius).
    """

    grid: GridSpec
    mask: np.ndarray
    face_sigma: np.ndarray
    tags: Mapping = field(default_factory=dict)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise ValueError(f"mask shape {mask.shape} does not match grid {self.grid.shape}")
        sig = np.asarray(self.face_sigma, dtype=np.float64)
        if sig.shape != (4,) + self.grid.shape:
            raise ValueError("face_sigma must have shape (4, ny, nx)")
        bfm = boundary_face_mask(mask)
        if np.any(np.isnan(sig[bfm])):
            raise ValueError("every boundary face needs a sigma value")
        vals = sig[bfm]
        if np.any((vals < 0.0) | (vals > 1.0)):
            raise ValueError("sigma values must lie in [0, 1]")
        sig = np.where(bfm, sig, np.nan)
        object.__setattr__(self, "mask", _readonly(mask))
        object.__setattr__(self, "face_sigma", _readonly(sig))
        object.__setattr__(self, "tags", MappingProxyType(dict(self.tags)))

    # basic queries -------------------------------------------------------

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def n_cells(self) -> int:
        return int(self.mask.sum())

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    def cell_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """``(i, j)`` arrays of masked cells in row-major (unknown) order."""
        j, i = np.nonzero(self.mask)
        return i, j

    def index_map(self) -> np.ndarray:
        """``(ny, nx)`` int array: unknown number of each masked cell, -1 elsewhere."""
        idx = np.full(self.grid.shape, -1, dtype=np.int64)
        idx[self.mask] = np.arange(self.n_cells)
        return idx

    def centers(self) -> np.ndarray:
        """``(n_cells, 2)`` coordinates of masked cell centers in unknown order."""
        X, Y = self.grid.centers()
        return np.column_stack([X[self.mask], Y[self.mask]])

    def boundary_face_mask(self) -> np.ndarray:
        return ~np.isnan(self.face_sigma)

    @property
    def boundary_faces(self) -> list[tuple[int, str, tuple[float, float], float]]:
        """List of ``(cell index, face name, outward normal, sigma)``."""
        out = []
        nx = self.grid.nx
        d, j, i = np.nonzero(self.boundary_face_mask())
        order = np.lexsort((d, j * nx + i))
        for k in order:
            out.append(
                (
                    int(j[k] * nx + i[k]),
                    FACE_NAMES[d[k]],
                    FACE_NORMALS[d[k]],
                    float(self.face_sigma[d[k], j[k], i[k]]),
                )
            )
        return out

    def contains(self, point: Sequence[float]) -> bool:
        cell = self.grid.locate(point)
        return cell is not None and bool(self.mask[cell[1], cell[0]])

    def is_connected(self) -> bool:
        _, n = ndimage.label(self.mask, structure=FOUR_CONNECTED)
        return n == 1

    def with_tags(self, **tags) -> "DomainModel":
        merged = dict(self.tags)
        merged.update(tags)
        return DomainModel(self.grid, self.mask, self.face_sigma, merged)


def from_mask(grid: GridSpec, mask: np.ndarray, sigma=0.0, tags=None) -> DomainModel:
    """Domain with ``sigma`` (scalar or ``(4, ny, nx)`` array) on its boundary faces."""
    mask = np.asarray(mask, dtype=bool)
    bfm = boundary_face_mask(mask)
    sig = np.broadcast_to(np.asarray(sigma, dtype=np.float64), bfm.shape)
    return DomainModel(grid, mask, np.where(bfm, sig, np.nan), tags or {})


def submodel(domain: DomainModel, keep: np.ndarray, tags=None) -> DomainModel:
    """Restrict ``domain`` to ``domain.mask & keep``.

    Faces inherited from the original boundary keep their sigma; faces cut
    out of the interior become Dirichlet (sigma = 0).
    """
    mask = domain.mask & np.asarray(keep, dtype=bool)
    bfm = boundary_face_mask(mask)
    old = domain.boundary_face_mask()
    sig = np.where(bfm & old, domain.face_sigma, np.where(bfm, 0.0, np.nan))
    return DomainModel(domain.grid, mask, sig, domain.tags if tags is None else tags)


def _check_sigma(sigma: float):
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must lie in [0, 1], got {sigma}")


def _cells(length: float, h: float) -> int:
    return int(round(length / h))


# builders ------------------------------------------------------------------


def build_rectangle(width: float, height: float, h: float, sigma: float = 0.0) -> DomainModel:
    """Axis-aligned rectangle ``[0, width] x [0, height]`` with uniform sigma."""
    if width <= 0 or height <= 0 or h <= 0:
        raise ValueError("rectangle dimensions and h must be positive")
    if width < 3 * h * (1 - 1e-12) or height < 3 * h * (1 - 1e-12):
        raise ValueError("rectangle must be at least 3 cells in each direction")
    _check_sigma(sigma)
    grid = GridSpec(h, (0.0, 0.0), _cells(width, h), _cells(height, h))
    return from_mask(grid, np.ones(grid.shape, bool), sigma, {"kind": "rectangle"})


def build_strip(length: float, width_L: float, h: float, side_sigma: float = 0.0) -> DomainModel:
    """Long rectangle standing in for the infinite strip of width ``width_L``.

    The two long sides carry ``side_sigma``; the two short caps are Dirichlet.
    """
    if width_L <= 0 or h <= 0:
        raise ValueError("strip width and h must be positive")
    if length < 10 * width_L:
        raise ValueError("strip length must be at least 10 widths (cap effects)")
    _check_sigma(side_sigma)
    dom = build_rectangle(length, width_L, h, 0.0)
    sig = np.array(dom.face_sigma)
    sig[2:] = np.where(np.isnan(sig[2:]), np.nan, side_sigma)
    nx, ny = dom.grid.nx, dom.grid.ny
    tail = {"i0": 0, "i1": nx, "j0": 0, "j1": ny, "x0": 0.0, "L": ny * h}
    return DomainModel(dom.grid, dom.mask, sig, {"kind": "strip", "tail": tail})


def build_interval(length: float, h: float, end_sigma: float, thickness_cells: int = 3) -> DomainModel:
    """Thin rectangle standing in for the interval ``(0, length)``.

    The two short ends carry ``end_sigma``; the long sides are Neumann so the
    transverse direction adds nothing to the spectrum.
    """
    if length <= 0 or h <= 0:
        raise ValueError("interval length and h must be positive")
    _check_sigma(end_sigma)
    if thickness_cells < 3:
        raise ValueError("need at least 3 cells across")
    dom = build_rectangle(length, thickness_cells * h, h, 1.0)
    sig = np.array(dom.face_sigma)
    sig[:2] = np.where(np.isnan(sig[:2]), np.nan, end_sigma)
    return DomainModel(dom.grid, dom.mask, sig, {"kind": "interval"})


def build_disk(radius: float, h: float, sigma: float = 0.0) -> DomainModel:
    """Staircase disk centered at the origin: cells whose centers lie inside."""
    if h <= 0:
        raise ValueError("h must be positive")
    if radius < 5 * h:
        raise ValueError("disk radius must be at least 5 cells")
    _check_sigma(sigma)
    half = math.ceil(radius / h) + 1
    grid = GridSpec(h, (-half * h, -half * h), 2 * half, 2 * half)
    X, Y = grid.centers()
    mask = X**2 + Y**2 < radius**2
    return from_mask(grid, mask, sigma, {"kind": "disk", "radius": radius})


def build_comb(
    base_width: float,
    base_height: float,
    tooth_widths: Sequence[float],
    tooth_height: float,
    tooth_gap: float,
    h: float,
) -> DomainModel:
    """Dirichlet comb: base rectangle with upward teeth attached flush.

    Teeth are laid out left to right starting at ``x = tooth_gap`` with
    ``tooth_gap`` between consecutive teeth.
    """
    if min(base_width, base_height, h) <= 0:
        raise ValueError("comb dimensions must be positive")
    widths = [float(w) for w in tooth_widths]
    if any(w < 3 * h * (1 - 1e-12) for w in widths):
        raise ValueError("every tooth must be at least 3 cells wide")
    if widths and tooth_gap < h:
        raise ValueError("tooth gap below one cell: teeth would overlap")
    nx = _cells(base_width, h)
    nb = _cells(base_height, h)
    nt = _cells(tooth_height, h) if widths else 0
    grid = GridSpec(h, (0.0, 0.0), nx, max(nb + nt, 3))
    mask = np.zeros(grid.shape, bool)
    mask[:nb, :] = True
    teeth = []
    x = tooth_gap
    for w in widths:
        i0, i1 = _cells(x, h), _cells(x + w, h)
        if i1 > nx:
            raise ValueError("teeth do not fit within the base width")
        if teeth and i0 <= teeth[-1]["i1"]:
            raise ValueError("overlapping teeth")
        mask[nb : nb + nt, i0:i1] = True
        teeth.append({"i0": i0, "i1": i1, "j0": nb, "j1": nb + nt, "width": (i1 - i0) * h})
        x += w + tooth_gap
    return from_mask(grid, mask, 0.0, {"kind": "comb", "teeth": teeth, "base_height": nb * h})


def critical_spacing(tail_width: float, h: float, rate: float) -> float:
    """Cell width making a ``round(tail_width/h)``-cell Dirichlet cross-section
    have discrete principal eigenvalue exactly ``rate``.

    The face-midpoint Dirichlet stencil on n cells has principal eigenvalue
    ``(2/h)^2 sin^2(pi / (2n))``.
    """
    n = _cells(tail_width, h)
    return 2.0 * math.sin(math.pi / (2 * n)) / math.sqrt(rate)


def build_bulb(
    disk_radius: float,
    tail_width: float,
    tail_length: float,
    h: float,
    fprime0: float = 1.0,
    snap_critical: bool = False,
) -> DomainModel:
    """Disk with a straight Dirichlet tail ``{0 <= x <= tail_length, 0 < y < L}``.

    The disk is centered at ``(-sqrt(R^2 - (L/2)^2), L/2)`` so its boundary
    passes through the tail's root corners. With ``snap_critical`` the cell
    width is adjusted (by about 1% at 31 cells) so the discrete tail
    cross-section is exactly critical for growth rate ``fprime0``.

    Rejects configurations whose disk is too small to guarantee
    ``lambda(Omega) < fprime0`` through the inscribed-disk bound.
    """
    from .eigen import LAMBDA_DISK

    if min(disk_radius, tail_width, tail_length, h) <= 0:
        raise ValueError("bulb dimensions must be positive")
    if tail_width >= 2 * disk_radius:
        raise ValueError("tail must be narrower than the disk diameter")
    if tail_length < 10 * tail_width:
        raise ValueError("tail too short for asymptotic fitting (need >= 10 widths)")
    if LAMBDA_DISK / disk_radius**2 >= fprime0:
        raise ValueError(
            f"disk radius {disk_radius} too small: lambda(B_R) = "
            f"{LAMBDA_DISK / disk_radius**2:.4g} >= f'(0) = {fprime0}"
        )
    n_t = _cells(tail_width, h)
    if snap_critical:
        h = critical_spacing(tail_width, h, fprime0)
    if n_t < 3:
        raise ValueError("tail must be at least 3 cells wide")
    L = n_t * h
    R = disk_radius
    xc = -math.sqrt(R * R - (L / 2) ** 2)
    yc = L / 2
    below = math.ceil((R - L / 2) / h) + 1
    left = math.ceil((R - xc) / h) + 1
    n_tail = _cells(tail_length, h)
    grid = GridSpec(h, (-left * h, -below * h), left + n_tail, 2 * below + n_t)
    X, Y = grid.centers()
    mask = (X - xc) ** 2 + (Y - yc) ** 2 < R * R
    mask[below : below + n_t, left:] = True
    tail = {"i0": left, "i1": left + n_tail, "j0": below, "j1": below + n_t, "x0": 0.0, "L": L}
    return from_mask(
        grid,
        mask,
        0.0,
        {"kind": "bulb", "tail": tail, "disk_center": (xc, yc), "disk_radius": R},
    )


# transformations --------------------------------------------------------------


def ball_mask(grid: GridSpec, center: Sequence[float], R: float) -> np.ndarray:
    X, Y = grid.centers()
    return (X - center[0]) ** 2 + (Y - center[1]) ** 2 < R * R


def intersect_ball(domain: DomainModel, center: Sequence[float], R: float) -> DomainModel:
    """Truncate to the open ball; the new artificial boundary is Dirichlet.

    The result may be disconnected or empty (``is_empty``; its eigenvalue is
    +inf by convention).
    """
    if R <= 2 * domain.h:
        raise ValueError("ball radius must exceed two cells")
    return submodel(domain, ball_mask(domain.grid, center, R))


def label_components(domain: DomainModel) -> tuple[np.ndarray, int]:
    """4-connected labels (1..n, 0 outside), numbered by lowest cell index."""
    return ndimage.label(domain.mask, structure=FOUR_CONNECTED)


def components(domain: DomainModel) -> list[DomainModel]:
    labels, n = label_components(domain)
    return [submodel(domain, labels == k) for k in range(1, n + 1)]


def connected_component(domain: DomainModel, seed: Sequence[float]) -> DomainModel:
    """Submodel holding exactly the 4-connected component through ``seed``."""
    cell = domain.grid.locate(seed)
    if cell is None or not domain.mask[cell[1], cell[0]]:
        raise ValueError(f"seed {tuple(seed)} is not in a masked cell")
    labels, _ = label_components(domain)
    return submodel(domain, labels == labels[cell[1], cell[0]])


def crop(domain: DomainModel, pad: int = 1, origin_shift=(0.0, 0.0)) -> DomainModel:
    """Crop the grid to the mask's bounding box plus ``pad`` empty cells.

    ``origin_shift`` is subtracted from the origin (used for recentering).
    """
    if domain.is_empty:
        return domain
    jj, ii = np.nonzero(domain.mask)
    j0, j1 = jj.min(), jj.max() + 1
    i0, i1 = ii.min(), ii.max() + 1
    g = domain.grid
    mask = np.zeros((j1 - j0 + 2 * pad, i1 - i0 + 2 * pad), bool)
    mask[pad:-pad or None, pad:-pad or None] = domain.mask[j0:j1, i0:i1]
    sig = np.full((4,) + mask.shape, np.nan)
    sig[:, pad:-pad or None, pad:-pad or None] = domain.face_sigma[:, j0:j1, i0:i1]
    origin = (
        g.origin[0] + (i0 - pad) * g.h - origin_shift[0],
        g.origin[1] + (j0 - pad) * g.h - origin_shift[1],
    )
    ny, nx = mask.shape
    if nx < 3 or ny < 3:
        raise ValueError("cropped grid smaller than 3x3; use pad >= 1")
    return DomainModel(GridSpec(g.h, origin, nx, ny), mask, sig, domain.tags)


def translate_window(domain: DomainModel, center: Sequence[float], window_radius: float) -> DomainModel:
    """Component through ``center`` of the ball truncation, recentered at the origin.

    A finite stand-in for a connected limit along translates of the domain.
    """
    if window_radius < 5 * domain.h:
        raise ValueError("window radius must be at least 5 cells")
    if not domain.contains(center):
        raise ValueError(f"window center {tuple(center)} is not in a masked cell")
    piece = connected_component(intersect_ball(domain, center, window_radius), center)
    piece = crop(piece, pad=1, origin_shift=center)
    return piece.with_tags(kind="window", window_radius=window_radius)


def dilate(mask: np.ndarray, within: np.ndarray, steps: int = 1) -> np.ndarray:
    """4-neighbor morphological dilation of ``mask`` restricted to ``within``."""
    if steps <= 0 or not mask.any():
        return mask & within
    return ndimage.binary_dilation(mask, FOUR_CONNECTED, iterations=steps) & within


def erode(mask: np.ndarray, steps: int = 1) -> np.ndarray:
    if steps <= 0:
        return mask.copy()
    return ndimage.binary_erosion(mask, FOUR_CONNECTED, iterations=steps, border_value=0)


def inradius(domain: DomainModel) -> float:
    """Largest distance from a cell center to the boundary faces (staircase)."""
    if domain.is_empty:
        return 0.0
    padded = np.pad(domain.mask, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    return float((dist[domain.mask].max() - 0.5) * domain.h)
