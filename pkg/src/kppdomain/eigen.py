"""Principal eigenpairs and the spectral constructions built on them."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.spatial import cKDTree

from . import kernels
from .geometry import (
    DomainModel,
    ball_mask,
    components,
    connected_component,
    dilate,
    intersect_ball,
    label_components,
    submodel,
    translate_window,
)
from .operators import Field, SparseOperator, assemble


class EigenSolverError(RuntimeError):
    """Raised when inverse iteration cannot certify its result."""


class DecompositionError(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@lru_cache(maxsize=None)
def radial_disk_eigenvalue(n: int = 4000) -> float:
    """Principal Dirichlet eigenvalue of the unit disk from the radial ODE.

    Solves ``-(r u')'/r = lam u`` with ``u(1) = 0`` by a cell-centered
    finite-volume scheme on ``n`` cells, symmetrized by the ``r`` weight,
    and applies one Richardson step between ``n`` and ``2n``.
    """

    def solve(m):
        dr = 1.0 / m
        rc = (np.arange(m) + 0.5) * dr
        rf = np.arange(1, m + 1) * dr  # outer face radii
        diag = np.empty(m)
        diag[:] = rf
        diag[1:] += rf[:-1]
        diag[-1] += rf[-1]  # ghost -u at r = 1
        off = -rf[:-1]
        w = 1.0 / np.sqrt(rc)
        d = diag * w * w / dr**2
        e = off * w[:-1] * w[1:] / dr**2
        return eigh_tridiagonal(d, e, select="i", select_range=(0, 0), eigvals_only=True)[0]

    a, b = solve(n), solve(2 * n)
    return float(b + (b - a) / 3.0)


LAMBDA_DISK = radial_disk_eigenvalue()


def thread_count() -> int:
    """Worker threads for sample-parallel scans (``KPPDOMAIN_THREADS``, default 1)."""
    try:
        return max(1, int(os.environ.get("KPPDOMAIN_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class EigenPair:
    lam: float
    phi: Field
    residual: float
    iterations: int
    shift: float = 0.0

    @property
    def lambda_(self) -> float:
        return self.lam


def principal_eigenpair(
    op: SparseOperator,
    tol: float = 1e-10,
    maxiter: int = 500,
    cg_rtol: float = 1e-10,
    residual_tol: float = 1e-8,
) -> EigenPair:
    """Smallest eigenvalue and positive eigenvector by shifted inverse iteration.

    Starts from the all-ones vector with shift ``-1e-8 * scale``. After each
    solve the Collatz-Wielandt quotient ``min_i (A phi)_i / phi_i`` gives a
    rigorous lower bound ``lb`` for the principal eigenvalue (A is a
    Z-matrix), and the shift is raised to ``lb - (theta - lb)``, which stays
    below the principal eigenvalue while accelerating convergence. Each solve
    uses IC(0)-preconditioned CG.

    Raises :class:`EigenSolverError` if the final residual
    ``||A phi - lam phi||_inf`` exceeds ``residual_tol * scale``.
    """
    if op.n == 0:
        raise ValueError("empty operator")
    ip, ix, dat = op.indptr, op.indices, op.data
    scale_s = float(op.stencil_diagonal().max())
    shift = -1e-8 * scale_s
    phi = np.ones(op.n)
    theta = math.inf
    x = np.zeros(op.n)
    factor_shift = None
    lfac = None
    it = 0
    cg_cap = max(1000, 20 * op.n)
    for it in range(1, maxiter + 1):
        if factor_shift != shift:
            try:
                lfac = kernels.ic0_factor(ip, ix, dat, shift)
            except ArithmeticError:
                shift = shift - 0.5 * abs(shift) - 1e-8 * scale_s
                lfac = kernels.ic0_factor(ip, ix, dat, shift)
            factor_shift = shift
        x[:] = 0.0
        kernels.pcg(ip, ix, dat, phi, x, shift, *lfac, cg_rtol, cg_cap)
        top = x.max()
        if not top > 0:
            raise EigenSolverError("inverse iterate lost positivity")
        phi = x / top
        sphi = kernels.csr_matvec(ip, ix, dat, phi, 0.0)
        theta_new = float(phi @ sphi) / float(phi @ phi)
        done = abs(theta_new - theta) <= tol * abs(theta_new) + 1e-15 * scale_s
        theta = theta_new
        if done:
            break
        if phi.min() > 0:
            lb = float(np.min(sphi / phi))
            shift = max(shift, lb - (theta - lb))
    sphi = kernels.csr_matvec(ip, ix, dat, phi, 0.0)
    lam = theta * op.factor
    residual = float(np.abs(sphi - theta * phi).max()) * op.factor
    scale = scale_s * op.factor
    if not residual <= residual_tol * scale:
        raise EigenSolverError(
            f"residual {residual:.3e} above {residual_tol:.0e}*scale after {it} iterations"
        )
    if phi.min() <= 0:
        raise EigenSolverError("eigenvector not strictly positive (disconnected operator?)")
    dom = op.domain
    return EigenPair(lam, Field(phi, dom), residual, it, shift * op.factor)


def domain_eigenpair(domain: DomainModel, **kw) -> EigenPair | None:
    """Principal pair of a possibly disconnected domain.

    The eigenvalue is the minimum over connected components (ties go to the
    component with the lowest cell index); the returned field is that
    component's eigenfunction extended by zero. Empty domains return None.
    """
    if domain.is_empty:
        return None
    parts = components(domain)
    best = None
    best_part = None
    for part in parts:
        pair = principal_eigenpair(assemble(part), **kw)
        if best is None or pair.lam < best.lam:
            best, best_part = pair, part
    if len(parts) == 1:
        return EigenPair(best.lam, Field(best.phi.values, domain), best.residual, best.iterations, best.shift)
    full = np.zeros(domain.grid.shape)
    full[best_part.mask] = best.phi.values
    return EigenPair(
        best.lam, Field(full[domain.mask], domain), best.residual, best.iterations, best.shift
    )


def principal_eigenvalue(domain: DomainModel, **kw) -> float:
    """``lambda`` of the domain, ``+inf`` when empty."""
    pair = domain_eigenpair(domain, **kw)
    return math.inf if pair is None else pair.lam


def exhaustion_curve(domain: DomainModel, center, radii: Sequence[float]) -> list[tuple[float, float]]:
    """Eigenvalues of the ball truncations ``domain | B_R(center)``."""
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    if radii and radii[0] < 5 * domain.h:
        raise ValueError("smallest radius must be at least 5 cells")
    lams = _parallel_map(lambda R: principal_eigenvalue(intersect_ball(domain, center, R)), radii)
    return list(zip(radii, lams))


@dataclass
class LiebScan:
    min_center: tuple[float, float]
    min_lambda: float
    bound: float
    satisfied: bool
    lam_domain: float
    R: float
    samples: np.ndarray = field(repr=False)  # (x, y, lambda) rows

    def summary(self) -> dict:
        return {
            "min_lambda": self.min_lambda,
            "argmin": list(self.min_center),
            "bound": self.bound,
            "satisfied": self.satisfied,
            "lambda_domain": self.lam_domain,
            "R": self.R,
        }


def _lattice(domain: DomainModel, pad: float, stride: float) -> np.ndarray:
    xy = domain.centers()
    lo = xy.min(axis=0) - pad
    hi = xy.max(axis=0) + pad
    xs = lo[0] + stride * np.arange(int(math.floor((hi[0] - lo[0]) / stride)) + 1)
    ys = lo[1] + stride * np.arange(int(math.floor((hi[1] - lo[1]) / stride)) + 1)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def lieb_scan(
    domain: DomainModel,
    R: float,
    stride: float,
    lam_domain: float | None = None,
    slack: float = 0.05,
) -> LiebScan:
    """Minimal truncated eigenvalue over a lattice of ball centers.

    The lattice covers the bounding box inflated by ``R``. Balls missing
    the domain are skipped (their eigenvalue is ``+inf``). The comparison
    bound is ``lambda(domain) + LAMBDA_DISK / R^2`` with relative slack.
    """
    if stride > R / 2:
        raise ValueError("stride must not exceed R/2")
    if lam_domain is None:
        lam_domain = principal_eigenvalue(domain)
    pts = _lattice(domain, R, stride)
    tree = cKDTree(domain.centers())
    hits = np.array([len(v) > 0 for v in tree.query_ball_point(pts, R * (1 - 1e-12))])
    pts = pts[hits]

    def one(p):
        return principal_eigenvalue(intersect_ball(domain, p, R))

    lams = np.array(_parallel_map(one, list(pts)))
    k = int(np.argmin(lams))
    bound = lam_domain + LAMBDA_DISK / R**2
    return LiebScan(
        (float(pts[k, 0]), float(pts[k, 1])),
        float(lams[k]),
        float(bound),
        bool(lams[k] <= bound * (1 + slack)),
        float(lam_domain),
        float(R),
        np.column_stack([pts, lams]),
    )


@dataclass
class LocalEigenvalueMap:
    """Local eigenvalues at sample cells, filled to every cell by nearest sample."""

    samples: np.ndarray  # (x, y, lambda) rows
    values: Field
    R: float
    stride: float

    def as_csv_rows(self):
        return [tuple(map(float, r)) for r in self.samples]


def local_eigenvalue(domain: DomainModel, point, R: float) -> float:
    """``lambda`` of the component through ``point`` of ``domain | B_{2R}(point)``."""
    piece = connected_component(intersect_ball(domain, point, 2 * R), point)
    return principal_eigenvalue(piece)


def sample_cells(domain: DomainModel, stride: float) -> np.ndarray:
    """Masked cells on a stride lattice, plus one cell per component it misses."""
    s = max(1, int(round(stride / domain.h)))
    jj, ii = np.nonzero(domain.mask)
    sel = (ii % s == s // 2) & (jj % s == s // 2)
    labels, n = label_components(domain)
    hit = set(labels[jj[sel], ii[sel]].tolist())
    for k in range(1, n + 1):
        if k not in hit:
            first = np.flatnonzero(labels[jj, ii] == k)[0]
            sel[first] = True
    return np.flatnonzero(sel)


def local_eigenvalue_map(domain: DomainModel, R: float, stride: float) -> LocalEigenvalueMap:
    if stride < domain.h:
        raise ValueError("stride must be at least one cell")
    xy = domain.centers()
    cells = sample_cells(domain, stride)
    pts = xy[cells]
    lams = np.array(_parallel_map(lambda p: local_eigenvalue(domain, p, R), list(pts)))
    _, nearest = cKDTree(pts).query(xy)
    return LocalEigenvalueMap(
        np.column_stack([pts, lams]), Field(lams[nearest], domain), float(R), float(stride)
    )


@dataclass
class DecompositionResult:
    ample_mask: np.ndarray
    narrow_mask: np.ndarray
    mu: float
    delta: float
    R: float
    K: float
    narrow_lambda: float
    local_map: LocalEigenvalueMap = field(repr=False)
    verified: bool = True

    def summary(self) -> dict:
        return {
            "mu": self.mu,
            "delta": self.delta,
            "R": self.R,
            "K": self.K,
            "narrow_lambda": self.narrow_lambda,
            "narrow_cells": int(self.narrow_mask.sum()),
            "ample_cells": int(self.ample_mask.sum()),
            "verified": self.verified,
        }


def ample_narrow_decompose(
    domain: DomainModel,
    mu: float,
    delta: float,
    R: float,
    stride: float | None = None,
    K: float | None = None,
    local_map: LocalEigenvalueMap | None = None,
) -> DecompositionResult:
    """Cover the domain by an ample part and a narrow part.

    Narrow seeds are cells whose local eigenvalue exceeds ``mu + delta``;
    the narrow mask is their one-cell dilation. The ample mask is the
    one-cell dilation of the union of components of ``domain | B_K(x)``
    through the remaining cells ``x``. The narrow submodel (Dirichlet on its
    cut faces) is then checked to satisfy ``lambda > mu``; failure raises
    :class:`DecompositionError` carrying the partial result.
    """
    if mu <= 0 or delta <= 0:
        raise ValueError("mu and delta must be positive")
    if LAMBDA_DISK / R**2 >= delta:
        raise ValueError(f"R = {R} too small: LAMBDA_DISK/R^2 must be below delta = {delta}")
    K = 2.0 * R if K is None else float(K)
    stride = R / 4 if stride is None else stride
    if local_map is None:
        local_map = local_eigenvalue_map(domain, R, stride)
    vals = local_map.values.to_grid(fill=-np.inf)
    seeds = domain.mask & (vals > mu + delta)
    narrow = dilate(seeds, domain.mask)
    rest = domain.mask & ~seeds
    ample = np.zeros_like(domain.mask)
    if rest.any():
        ample = _ball_component_union(domain, rest, K)
        ample = dilate(ample, domain.mask)
    if narrow.any():
        lam_n = principal_eigenvalue(submodel(domain, narrow))
    else:
        lam_n = math.inf
    res = DecompositionResult(ample, narrow, float(mu), float(delta), float(R), K, lam_n, local_map)
    if narrow.any() and not lam_n > mu:
        res.verified = False
        raise DecompositionError(
            f"narrow part has lambda = {lam_n:.6g} <= mu = {mu}; mu too close to the limit spectrum",
            res,
        )
    return res


def _ball_component_union(domain: DomainModel, rest: np.ndarray, K: float) -> np.ndarray:
    """Union over ``x`` in ``rest`` of the component of ``domain | B_K(x)`` through ``x``."""
    from scipy import ndimage

    from .geometry import FOUR_CONNECTED

    h = domain.h
    r = int(math.ceil(K / h))
    off = np.arange(-r, r + 1)
    stencil = (off[None, :] ** 2 + off[:, None] ** 2) * h * h < K * K
    mask = domain.mask
    ny, nx = mask.shape
    out = np.zeros_like(mask)
    for j, i in zip(*np.nonzero(rest)):
        j0, j1 = max(0, j - r), min(ny, j + r + 1)
        i0, i1 = max(0, i - r), min(nx, i + r + 1)
        local = mask[j0:j1, i0:i1] & stencil[j0 - j + r : j1 - j + r, i0 - i + r : i1 - i + r]
        lab, _ = ndimage.label(local, structure=FOUR_CONNECTED)
        out[j0:j1, i0:i1] |= lab == lab[j - j0, i - i0]
    return out


def spectrum_probe(domain: DomainModel, centers, window_radius: float) -> list[tuple[tuple[float, float], float]]:
    """Eigenvalues of recentered windows at each probe center."""
    pts = [tuple(map(float, c)) for c in centers]
    for p in pts:
        if not domain.contains(p):
            raise ValueError(f"probe center {p} outside the domain")
    lams = _parallel_map(lambda p: principal_eigenvalue(translate_window(domain, p, window_radius)), pts)
    return list(zip(pts, lams))
