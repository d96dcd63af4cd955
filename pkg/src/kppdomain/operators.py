"""Discrete negative Laplacian with the mixed boundary operator folded in.

The matrix is stored as ``factor * S`` with ``factor = 1/h^2`` and ``S`` the
dimensionless 5-point stencil. Keeping the scale separate makes the pure
Neumann row sums exactly zero for any ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .geometry import FACE_OFFSETS, DomainModel

SIGMA_MIN = 1e-6


def face_weight(sigma: np.ndarray | float, h: float) -> np.ndarray:
    """Diagonal stencil contribution of one boundary face (units of 1/h^2).

    Eliminating the ghost value ``u (s - (1-s)h/2) / (s + (1-s)h/2)`` from
    the face flux gives ``(1-s) h / (s + (1-s) h/2)``: 2 for Dirichlet, 0 for
    Neumann. Faces with ``s <= SIGMA_MIN`` are exact Dirichlet faces.
    """
    s = np.asarray(sigma, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (1.0 - s) * h / (s + (1.0 - s) * h / 2.0)
    return np.where(s <= SIGMA_MIN, 2.0, w)


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Symmetric CSR matrix ``factor * S`` acting on the masked cells."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    factor: float
    symmetric: bool = True
    domain: DomainModel | None = None

    @property
    def scale(self) -> float:
        """Largest diagonal entry of the scaled matrix."""
        return float(self.factor * self.stencil_diagonal().max())

    def stencil_diagonal(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return self.data[rows == self.indices].copy()

    def diagonal(self) -> np.ndarray:
        return self.factor * self.stencil_diagonal()

    def stencil(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    def to_scipy(self) -> sp.csr_matrix:
        return (self.factor * self.stencil()).tocsr()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"vector of length {x.shape} does not match operator size {self.n}")
        return self.factor * kernels.csr_matvec(self.indptr, self.indices, self.data, x, 0.0)


@dataclass(eq=False)
class Field:
    """One value per masked cell, in row-major unknown order."""

    values: np.ndarray
    domain: DomainModel

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.domain.n_cells,):
            raise ValueError(
                f"field has {self.values.shape} values, domain has {self.domain.n_cells} cells"
            )

    @classmethod
    def constant(cls, domain: DomainModel, value: float) -> "Field":
        return cls(np.full(domain.n_cells, float(value)), domain)

    @classmethod
    def from_function(cls, domain: DomainModel, fn) -> "Field":
        xy = domain.centers()
        return cls(np.asarray(fn(xy[:, 0], xy[:, 1]), dtype=np.float64), domain)

    @classmethod
    def from_grid(cls, domain: DomainModel, grid_values: np.ndarray) -> "Field":
        return cls(np.asarray(grid_values)[domain.mask], domain)

    def to_grid(self, fill: float = np.nan) -> np.ndarray:
        out = np.full(self.domain.grid.shape, fill)
        out[self.domain.mask] = self.values
        return out

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)) * self.domain.h)


def assemble(domain: DomainModel) -> SparseOperator:
    """5-point operator with ghost-cell elimination at boundary face midpoints.

    Rows follow the row-major cell order; within a row the column order is
    S, W, self, E, N, which is ascending.
    """
    if domain.is_empty:
        raise ValueError("cannot assemble an operator on an empty domain")
    h = domain.h
    mask = domain.mask
    ny, nx = mask.shape
    idx = domain.index_map()
    n = domain.n_cells
    padded = np.pad(idx, 1, constant_values=-1)
    jj, ii = np.nonzero(mask)

    # neighbor unknown numbers for each direction (E, W, N, S)
    nb = np.empty((4, n), dtype=np.int64)
    for d, (di, dj) in enumerate(FACE_OFFSETS):
        nb[d] = padded[1 + jj + dj, 1 + ii + di]

    sig = domain.face_sigma[:, jj, ii]
    bweight = np.where(np.isnan(sig), 0.0, face_weight(np.nan_to_num(sig, nan=1.0), h))
    diag = (nb >= 0).sum(axis=0).astype(np.float64) + bweight.sum(axis=0)

    # ascending column order: S(3), W(1), self, E(0), N(2)
    order = (3, 1, None, 0, 2)
    cols = np.empty((5, n), dtype=np.int64)
    vals = np.empty((5, n))
    present = np.empty((5, n), dtype=bool)
    for k, d in enumerate(order):
        if d is None:
            cols[k] = np.arange(n)
            vals[k] = diag
            present[k] = True
        else:
            cols[k] = nb[d]
            vals[k] = -1.0
            present[k] = nb[d] >= 0
    counts = present.sum(axis=0)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    sel = present.T
    indices = np.ascontiguousarray(cols.T[sel])
    data = np.ascontiguousarray(vals.T[sel])
    return SparseOperator(n, indptr, indices, data, 1.0 / (h * h), True, domain)


def apply(op: SparseOperator, phi: Field) -> Field:
    """Matrix-vector product in stored row order."""
    if phi.values.shape != (op.n,):
        raise ValueError("field size does not match operator")
    dom = op.domain if op.domain is not None else phi.domain
    return Field(op.matvec(phi.values), dom)


def quadratic_form(domain: DomainModel, phi: Field | np.ndarray) -> float:
    """Discrete energy ``<A phi, phi> h^2`` computed face by face.

    Interior faces contribute squared differences. A boundary face with
    parameter s contributes the half-cell gradient to the extrapolated face
    value ``phi_f = phi s / (s + (1-s) h/2)`` plus the penalty
    ``(1-s)/s * phi_f^2 * h``; faces with ``s <= SIGMA_MIN`` pin ``phi_f = 0``.
    """
    v = phi.values if isinstance(phi, Field) else np.asarray(phi, dtype=np.float64)
    if v.shape != (domain.n_cells,):
        raise ValueError("field size does not match domain")
    h = domain.h
    g = np.zeros(domain.grid.shape)
    g[domain.mask] = v
    m = domain.mask
    ex = m[:, 1:] & m[:, :-1]
    ey = m[1:, :] & m[:-1, :]
    num = float(np.sum((g[:, 1:] - g[:, :-1])[ex] ** 2))
    num += float(np.sum((g[1:, :] - g[:-1, :])[ey] ** 2))
    bfm = domain.boundary_face_mask()
    for d in range(4):
        sel = bfm[d]
        if not sel.any():
            continue
        s = domain.face_sigma[d][sel]
        u = g[sel]
        dir_ = s <= SIGMA_MIN
        num += float(np.sum(2.0 * u[dir_] ** 2))
        s, u = s[~dir_], u[~dir_]
        pf = u * s / (s + (1.0 - s) * h / 2.0)
        num += float(np.sum(2.0 * (u - pf) ** 2 + (1.0 - s) / s * pf**2 * h))
    return num


def rayleigh_quotient(domain: DomainModel, phi: Field | np.ndarray) -> float:
    """``quadratic_form / sum(phi^2 h^2)``; equals ``<A phi, phi>/<phi, phi>``."""
    v = phi.values if isinstance(phi, Field) else np.asarray(phi, dtype=np.float64)
    den = float(np.sum(v * v)) * domain.h**2
    if den == 0.0:
        raise ValueError("Rayleigh quotient of the zero field")
    return quadratic_form(domain, v) / den
