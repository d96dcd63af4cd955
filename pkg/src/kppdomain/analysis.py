"""Transverse sine analysis of solutions in a straight tail.

A tail is a block of full columns ``i0 <= i < i1`` by rows ``j0 <= j < j1``
recorded in ``domain.tags["tail"]``; its axial coordinate is
``x = x0 + (i - i0 + 1/2) h`` and its width is ``L = (j1 - j0) h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import Field


class TailRegionError(ValueError):
    pass


def zeta_constant(B: float, L: float) -> float:
    """``B * integral of phi_1^3`` over ``(0, L)`` for ``phi_1 = sqrt(2/L) sin(pi y/L)``."""
    return B * 8.0 * math.sqrt(2.0) / (3.0 * math.pi * math.sqrt(L))


def sine_basis(n: int, L: float, K: int) -> np.ndarray:
    """``(K, n)`` cell-center samples of ``sqrt(2/L) sin(pi k y / L)``, ``k = 1..K``.

    With cell weight ``h = L/n`` the rows are exactly orthonormal for ``K < n``.
    """
    y = (np.arange(n) + 0.5) / n
    k = np.arange(1, K + 1)[:, None]
    return math.sqrt(2.0 / L) * np.sin(np.pi * k * y[None, :])


def _tail_block(field: Field, tail_region=None, L: float | None = None):
    dom = field.domain
    tail = dom.tags.get("tail")
    if tail is None:
        raise TailRegionError("domain carries no tail region")
    h = dom.h
    i0, i1, j0, j1 = tail["i0"], tail["i1"], tail["j0"], tail["j1"]
    Ld = (j1 - j0) * h
    if L is not None and abs(L - Ld) > 0.5 * h:
        raise TailRegionError(f"tail width {Ld:.6g} does not match L = {L:.6g}")
    x = tail["x0"] + (np.arange(i0, i1) - i0 + 0.5) * h
    if tail_region is not None:
        keep = (x >= tail_region[0]) & (x <= tail_region[1])
        cols = np.arange(i0, i1)[keep]
        x = x[keep]
    else:
        cols = np.arange(i0, i1)
    if cols.size == 0:
        raise TailRegionError("tail region holds no columns")
    m = dom.mask
    block = m[j0:j1][:, cols]
    above = m[j1, cols] if j1 < m.shape[0] else np.zeros(cols.size, bool)
    below = m[j0 - 1, cols] if j0 > 0 else np.zeros(cols.size, bool)
    if not block.all() or above.any() or below.any():
        raise TailRegionError("tail region is not a clean rectangle of full columns")
    g = field.to_grid(fill=0.0)
    return x, g[j0:j1][:, cols], Ld, h


@dataclass
class TailProfile:
    x_samples: np.ndarray
    alpha: np.ndarray  # (K_max, n_x)
    L: float
    zeta: float
    B: float
    column_l2: np.ndarray
    columns: np.ndarray  # (n_y, n_x) raw values
    tail_length: float

    def parseval_error(self) -> np.ndarray:
        """Relative gap between the full coefficient sum and the column norm."""
        n = self.columns.shape[0]
        basis = sine_basis(n, self.L, n)
        basis[-1] /= math.sqrt(2.0)  # the k = n row has twice the norm of the others
        full = basis @ self.columns * (self.L / n)
        tot = np.sqrt(np.sum(full**2, axis=0))
        return np.abs(tot - self.column_l2) / np.maximum(self.column_l2, 1e-300)

    def to_rows(self):
        return [(float(x),) + tuple(float(a) for a in col) for x, col in zip(self.x_samples, self.alpha.T)]


def transverse_fourier(
    u: Field,
    tail_region=None,
    L: float | None = None,
    K_max: int = 5,
    B: float = 1.0,
) -> TailProfile:
    """Sine coefficients ``alpha_k(x)`` of every tail column by cell-center quadrature."""
    x, cols, Ld, h = _tail_block(u, tail_region, L)
    n = cols.shape[0]
    if K_max >= n:
        raise ValueError("K_max must be below the number of cells across the tail")
    alpha = sine_basis(n, Ld, K_max) @ cols * h
    col_l2 = np.sqrt(np.sum(cols**2, axis=0) * h)
    tail = u.domain.tags["tail"]
    length = (tail["i1"] - tail["i0"]) * h
    return TailProfile(x, alpha, Ld, zeta_constant(B, Ld), B, col_l2, cols, length)


@dataclass
class DecayFit:
    c_fit: float
    c_theory: float
    rel_err: float
    slope_free: float
    c_free: float
    window: tuple[float, float]

    def summary(self) -> dict:
        return {
            "c_fit": self.c_fit,
            "c_theory": self.c_theory,
            "rel_err": self.rel_err,
            "slope_free": self.slope_free,
            "c_free": self.c_free,
            "window": list(self.window),
        }


def default_window(profile: TailProfile) -> tuple[float, float]:
    return (0.25 * profile.tail_length, 0.6 * profile.tail_length)


def _window_mask(profile, window):
    if window is None:
        window = default_window(profile)
    sel = (profile.x_samples >= window[0]) & (profile.x_samples <= window[1])
    if sel.sum() < 3:
        raise ValueError("fit window holds fewer than 3 samples")
    return sel, (float(window[0]), float(window[1]))


def decay_fit(profile: TailProfile, window=None) -> DecayFit:
    """Fit ``alpha_1 = c / x^2`` in log-log form with the slope fixed at -2.

    Also reports the free-slope fit. ``c_theory = 6 / zeta``.
    """
    sel, window = _window_mask(profile, window)
    x = profile.x_samples[sel]
    a = profile.alpha[0, sel]
    if np.any(a <= 0):
        raise ValueError("alpha_1 is not positive on the fit window")
    lx, la = np.log(x), np.log(a)
    c_fit = float(np.exp(np.mean(la + 2.0 * lx)))
    slope, icpt = np.polyfit(lx, la, 1)
    c_th = 6.0 / profile.zeta
    return DecayFit(c_fit, c_th, abs(c_fit - c_th) / c_th, float(slope), float(np.exp(icpt)), window)


def ode_shadow(profile: TailProfile, window=None) -> float:
    """Largest relative defect ``|alpha_1'' - zeta alpha_1^2| / (zeta alpha_1^2)`` on the window."""
    sel, _ = _window_mask(profile, window)
    a = profile.alpha[0]
    h = profile.x_samples[1] - profile.x_samples[0]
    d2 = np.full_like(a, np.nan)
    d2[1:-1] = (a[2:] - 2.0 * a[1:-1] + a[:-2]) / h**2
    ref = profile.zeta * a**2
    defect = np.abs(d2 - ref) / ref
    return float(np.nanmax(defect[sel]))


def centerline(u: Field, tail_region=None) -> tuple[np.ndarray, np.ndarray]:
    """Tail abscissae and values on the middle row (the mean of two for even widths)."""
    x, cols, _, _ = _tail_block(u, tail_region)
    n = cols.shape[0]
    if n % 2:
        return x, cols[n // 2]
    return x, 0.5 * (cols[n // 2 - 1] + cols[n // 2])


def cylinder_symmetry_check(field: Field, tail_region=None, L: float | None = None) -> float:
    """Largest deviation between sup-normalized column shapes over the
    central half of the tail region."""
    x, cols, _, _ = _tail_block(field, tail_region, L)
    n = cols.shape[1]
    lo, hi = n // 4, n - n // 4
    mid = cols[:, lo:hi]
    tops = np.abs(mid).max(axis=0)
    if np.any(tops == 0):
        raise ValueError("field vanishes on a column")
    shapes = mid / tops
    ref = shapes[:, shapes.shape[1] // 2][:, None]
    return float(np.abs(shapes - ref).max())


def sine_profile_distance(field: Field, x: float) -> float:
    """Sup distance of the sup-normalized column at ``x`` to ``sin(pi y / L)``."""
    xs, cols, _, _ = _tail_block(field)
    k = int(np.argmin(np.abs(xs - x)))
    col = cols[:, k]
    n = col.size
    shape = col / np.abs(col).max()
    s = np.sin(np.pi * (np.arange(n) + 0.5) / n)
    return float(np.abs(shape - s / s.max()).max())
