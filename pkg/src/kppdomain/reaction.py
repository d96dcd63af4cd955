"""Reaction terms as piecewise polynomials with exact antiderivatives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial as P

from .operators import Field, quadratic_form
from .geometry import DomainModel

CLASS_TAGS = ("strong-KPP", "weak-KPP", "positive", "unclassified")


@dataclass(frozen=True, eq=False)
class ReactionSpec:
    """Reaction ``f`` given by polynomial pieces on ``(-inf, b_1], [b_1, b_2], ...``.

    ``H`` is the antiderivative with ``H(0) = 0``, continuous across breaks.
    """

    name: str
    breaks: tuple[float, ...]
    pieces: tuple[P, ...]
    fprime0: float
    B: float | None
    class_tag: str = "unclassified"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.pieces) != len(self.breaks) + 1:
            raise ValueError("need one more piece than breakpoints")
        prims = [p.integ() for p in self.pieces]
        # shift constants so H is continuous and H(0) = 0
        k0 = int(np.searchsorted(self.breaks, 0.0, side="right"))
        prims[k0] = prims[k0] - prims[k0](0.0)
        for k in range(k0 + 1, len(prims)):
            b = self.breaks[k - 1]
            prims[k] = prims[k] + (prims[k - 1](b) - prims[k](b))
        for k in range(k0 - 1, -1, -1):
            b = self.breaks[k]
            prims[k] = prims[k] + (prims[k + 1](b) - prims[k](b))
        object.__setattr__(self, "_prims", tuple(prims))
        object.__setattr__(self, "_derivs", tuple(p.deriv() for p in self.pieces))

    def _eval(self, polys, s):
        s = np.asarray(s, dtype=np.float64)
        k = np.searchsorted(self.breaks, s, side="right")
        out = np.empty_like(s)
        for m, p in enumerate(polys):
            sel = k == m
            if np.any(sel):
                out[sel] = p(s[sel])
        return out if out.ndim else float(out)

    def f(self, s):
        return self._eval(self.pieces, s)

    __call__ = f

    def df(self, s):
        return self._eval(self._derivs, s)

    def H(self, s):
        return self._eval(self._prims, s)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "fprime0": self.fprime0,
            "B": self.B,
            "class_tag": self.class_tag,
            "params": dict(self.params),
        }


def logistic() -> ReactionSpec:
    """``f(s) = s(1 - s)``."""
    return ReactionSpec("logistic", (), (P([0.0, 1.0, -1.0]),), 1.0, 1.0, "strong-KPP")


def cubic_kpp() -> ReactionSpec:
    """``f(s) = s(1 - s)(1 + s/2)``; ``f(s)/s = 1 - s/2 - s^2/2``."""
    p = P([0.0, 1.0, -1.0]) * P([1.0, 0.5])
    r = ReactionSpec("cubic", (), (p,), 1.0, 0.5)
    return _with_tag(r, classify(r))


def _with_tag(r: ReactionSpec, tag: str, **params) -> ReactionSpec:
    merged = dict(r.params)
    merged.update(params)
    return ReactionSpec(r.name, r.breaks, r.pieces, r.fprime0, r.B, tag, merged)


class ReactionConfigError(ValueError):
    pass


def weak_kpp_composite(
    amplitude_g: float,
    amplitude_h: float,
    epsilon_smooth: float,
    lam: float | None = None,
    max_halvings: int = 40,
) -> ReactionSpec:
    """KPP part on ``(0, 1/2)`` plus an ignition hump on ``(1/2, 1)``.

    ``g(s) = 4 a_g s (1/2 - s)`` and ``h(s) = 54 a_h (s - 1/2)^2 (1 - s)``
    (``max h = a_h`` on ``[1/2, 1]``; ``h < 0`` beyond 1). On
    ``[1/2 - eps, 1/2 + eps]`` the sum is replaced by the C^1 Hermite cubic
    matching ``g`` on the left and ``h`` on the right, lifted by the bump
    ``m (1 - t^2)^2``, ``t = (s - 1/2)/eps``. The bump starts at the
    tangent-line headroom and is halved until ``f <= f'(0) s`` holds on a
    dense sample; the final ``m`` is stored in ``params``.

    ``lam``, when given, is the domain eigenvalue the slope
    ``g'(0) = 2 a_g`` must exceed.
    """
    ag, ah, eps = float(amplitude_g), float(amplitude_h), float(epsilon_smooth)
    if not (0 < eps < 0.1):
        raise ReactionConfigError("epsilon_smooth must lie in (0, 0.1)")
    if ag <= 0 or ah <= 0:
        raise ReactionConfigError("amplitudes must be positive")
    g = 4.0 * ag * P([0.0, 0.5, -1.0])
    h = 54.0 * ah * P([-0.5, 1.0]) ** 2 * P([1.0, -1.0])
    slope = 2.0 * ag
    s = np.linspace(0.5, 1.0, 20001)[1:]
    sup_hs = float(np.max(h(s) / s))
    if slope <= sup_hs:
        raise ReactionConfigError(
            f"slope condition fails: g'(0) = {slope} <= sup h(s)/s = {sup_hs:.4g}"
        )
    if lam is not None and slope <= lam:
        raise ReactionConfigError(f"slope condition fails: g'(0) = {slope} <= lambda = {lam}")

    a, b = 0.5 - eps, 0.5 + eps
    ya, yb = g(a), h(b)
    da, db = g.deriv()(a), h.deriv()(b)
    # Hermite cubic on [a, b] in t = (s - 1/2)/eps, t in [-1, 1]
    t = P([-0.5 / eps, 1.0 / eps])
    h00 = (P([2.0, -3.0, 0.0, 1.0]) + 0.0) / 4.0  # basis on [-1, 1]
    h10 = P([1.0, -1.0, -1.0, 1.0]) / 4.0
    h01 = P([2.0, 3.0, 0.0, -1.0]) / 4.0
    h11 = P([-1.0, -1.0, 1.0, 1.0]) / 4.0
    herm = ya * h00 + eps * da * h10 + yb * h01 + eps * db * h11
    bump = P([1.0, 0.0, -2.0, 0.0, 1.0])
    ss = np.linspace(a, b, 4001)
    cub = herm(t)
    m = float(np.min(slope * ss - cub(ss)))
    if m <= 0:
        raise ReactionConfigError("no tangent-line headroom near s = 1/2")
    dense = np.concatenate([np.geomspace(1e-6, 1.0, 5000), np.linspace(0.0, 1.0, 10001)[1:]])
    for _ in range(max_halvings):
        mid = cub + m * bump(t)
        spec = ReactionSpec(
            "weak_kpp_composite",
            (a, b),
            (g, mid, h),
            slope,
            4.0 * ag,
        )
        fv = spec.f(dense)
        if np.all(fv <= slope * dense + 1e-10):
            break
        m *= 0.5
    else:
        raise ReactionConfigError("tangent-line condition not reached by halving the bump")
    fin = spec.f(np.linspace(0.0, 1.0, 20001)[1:-1])
    if np.any(fin <= 0):
        raise ReactionConfigError("smoothed reaction is not positive on (0, 1); raise epsilon_smooth")
    params = {
        "amplitude_g": ag,
        "amplitude_h": ah,
        "epsilon_smooth": eps,
        "bump_magnitude": m,
        "sup_h_over_s": sup_hs,
    }
    return _with_tag(spec, classify(spec), **params)


def sample_grid(samples: int) -> np.ndarray:
    """Geometric grid on ``[1e-6, 1]`` merged with a uniform grid on ``(0, 1]``."""
    n = samples // 2
    return np.unique(np.concatenate([np.geomspace(1e-6, 1.0, n), np.linspace(0.0, 1.0, samples - n + 1)[1:]]))


def classify(r: ReactionSpec, samples: int = 10000, margin: float = 1e-10) -> str:
    """Strongest of (P) positivity, (W) tangent-line bound, (S) decreasing
    ``f(s)/s`` passing on the sample grid, within ``margin``.

    A numerical check on samples, not a proof.
    """
    if samples < 1000:
        raise ValueError("classification needs at least 1000 samples")
    s = sample_grid(samples)
    fv = np.asarray(r.f(s))
    inner = s < 1.0
    pos = r.fprime0 > 0 and bool(np.all(fv[inner] > 0))
    if not pos:
        return "unclassified"
    weak = bool(np.all(fv <= r.fprime0 * s + margin))
    if not weak:
        return "positive"
    q = fv / s
    strong = bool(np.all(np.diff(q) < margin))
    return "strong-KPP" if strong else "weak-KPP"


def check_basic(r: ReactionSpec, samples: int = 1000) -> dict:
    """``f(0) = f(1) = 0`` and ``f < 0`` on ``(1, 2]``."""
    s = np.linspace(1.0, 2.0, samples + 1)[1:]
    return {
        "f0": abs(float(r.f(0.0))) <= 1e-12,
        "f1": abs(float(r.f(1.0))) <= 1e-12,
        "negative_above_1": bool(np.all(r.f(s) < 0)),
    }


def energy(domain: DomainModel, r: ReactionSpec, v: Field | np.ndarray, rho: float | None = None) -> float:
    """Discrete energy ``1/2 Q(v) - sum H(v) h^2``.

    ``Q`` is the face-based quadratic form of the Rayleigh quotient (so the
    Robin term enters with the factor 1/2 as well, making the steady states
    its critical points). ``rho`` overrides the domain's boundary parameter
    on every boundary face when given.
    """
    vals = v.values if isinstance(v, Field) else np.asarray(v, dtype=np.float64)
    if rho is not None:
        from .geometry import from_mask

        domain = from_mask(domain.grid, domain.mask, rho, domain.tags)
    return 0.5 * quadratic_form(domain, vals) - float(np.sum(r.H(vals))) * domain.h**2


PRESETS = {
    "logistic": logistic,
    "cubic": cubic_kpp,
    "weak_kpp_composite": weak_kpp_composite,
}


def make_reaction(name: str, **params) -> ReactionSpec:
    if name not in PRESETS:
        raise ValueError(f"unknown reaction preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name](**params)
