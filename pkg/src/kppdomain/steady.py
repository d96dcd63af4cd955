"""IMEX parabolic flows, steady states, and the existence/uniqueness experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .eigen import domain_eigenpair, principal_eigenpair
from .geometry import DomainModel, build_strip
from .operators import Field, assemble
from .reaction import ReactionSpec

TOL_DT = 1e-9
TOL_EXT = 1e-6
TOL_ELL_REL = 1e-6
MAX_STEPS = 200_000


class FlowBlowUp(RuntimeError):
    pass


class SubsolutionError(RuntimeError):
    pass


@dataclass
class FlowResult:
    u: Field
    steps: int
    final_dt_residual: float
    elliptic_residual: float
    classification: str
    min_increment: float = math.inf
    max_increment: float = -math.inf
    dt: float = 0.1
    trajectory: list = field(default_factory=list, repr=False)
    epsilon: float | None = None

    @property
    def sup_u(self) -> float:
        return float(self.u.values.max())

    @property
    def min_u(self) -> float:
        return float(self.u.values.min())

    def summary(self) -> dict:
        out = {
            "classification": self.classification,
            "steps": self.steps,
            "final_dt_residual": self.final_dt_residual,
            "elliptic_residual": self.elliptic_residual,
            "sup_u": self.sup_u,
            "min_u": self.min_u,
            "dt": self.dt,
        }
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        return out


class _Stepper:
    """Factorized ``I + dt A`` for one domain and step size."""

    def __init__(self, domain: DomainModel, dt: float):
        self.op = assemble(domain)
        self.A = self.op.to_scipy().tocsc()
        self.dt = dt
        self.lu = splu((sp.identity(self.op.n, format="csc") + dt * self.A).tocsc())
        self.tol_ell = TOL_ELL_REL * self.op.scale


def flow_to_steady(
    domain: DomainModel,
    r: ReactionSpec,
    initial: Field | np.ndarray,
    dt: float = 0.1,
    max_steps: int = MAX_STEPS,
    tol_dt: float = TOL_DT,
    tol_ext: float = TOL_EXT,
    record_every: int | None = None,
    callback: Callable[[int, np.ndarray], None] | None = None,
    stepper: _Stepper | None = None,
) -> FlowResult:
    """Semi-implicit flow ``(I + dt A) u^{n+1} = u^n + dt f(u^n)``.

    Each step solves for the increment ``(I + dt A) d = dt (f(u) - A u)`` with
    a sparse LU factorization computed once, which keeps monotone flows
    monotone to round-off. Stops when ``||d||_inf / dt < tol_dt``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    u = np.array(initial.values if isinstance(initial, Field) else initial, dtype=np.float64)
    if u.shape != (domain.n_cells,):
        raise ValueError("initial data size does not match domain")
    if np.any(~np.isfinite(u)):
        raise ValueError("initial data must be finite")
    st = stepper if stepper is not None else _Stepper(domain, dt)
    A, lu = st.A, st.lu
    cap = 10.0 * max(1.0, float(np.abs(u).max()))
    traj = []
    dmin, dmax = math.inf, -math.inf
    res = math.inf
    n = 0
    for n in range(1, max_steps + 1):
        d = lu.solve(dt * (r.f(u) - A @ u))
        u += d
        dmin = min(dmin, float(d.min()))
        dmax = max(dmax, float(d.max()))
        res = float(np.abs(d).max()) / dt
        if not np.isfinite(res) or np.abs(u).max() > cap:
            raise FlowBlowUp(f"flow left the bounded range at step {n} (sup |u| > {cap})")
        if record_every and n % record_every == 0:
            traj.append((n, u.copy()))
        if callback is not None:
            callback(n, u)
        if res < tol_dt:
            break
    ell = float(np.abs(A @ u - r.f(u)).max())
    sup = float(np.abs(u).max())
    if sup <= tol_ext:
        cls = "extinct"
    elif res < tol_dt and u.min() > 0 and ell <= st.tol_ell:
        cls = "positive_steady"
    else:
        cls = "not_converged"
    return FlowResult(Field(u, domain), n, res, ell, cls, dmin, dmax, dt, traj)


def stable_dt(r: ReactionSpec, dt: float) -> float:
    """Largest step not exceeding ``dt`` with ``dt * max(-f') <= 1`` on [0, 1].

    Under this bound ``s + dt f(s)`` is nondecreasing, which makes the scheme
    order preserving.
    """
    s = np.linspace(0.0, 1.0, 2001)
    worst = float(np.max(-r.df(s)))
    if worst > 0:
        dt = min(dt, 1.0 / worst)
    return dt


def subsolution_epsilon(
    domain: DomainModel,
    r: ReactionSpec,
    phi: np.ndarray,
    epsilon: float,
    halvings: int = 40,
) -> float:
    """Halve ``epsilon`` until ``A (eps phi) <= f(eps phi)`` holds cellwise."""
    op = assemble(domain)
    aphi = op.matvec(phi)
    eps = float(epsilon)
    for _ in range(halvings + 1):
        if np.all(eps * aphi <= r.f(eps * phi)):
            return eps
        eps *= 0.5
    raise SubsolutionError("no discrete subsolution eps*phi found after halving epsilon")


def minimal_solution(
    domain: DomainModel,
    r: ReactionSpec,
    epsilon: float = 0.1,
    dt: float = 0.1,
    max_steps: int = MAX_STEPS,
    **kw,
) -> FlowResult:
    """Flow from the verified subsolution ``eps * phi``."""
    pair = domain_eigenpair(domain)
    if pair is None or not pair.lam < r.fprime0:
        lam = math.inf if pair is None else pair.lam
        raise ValueError(f"lambda = {lam:.6g} is not below f'(0) = {r.fprime0}")
    phi = pair.phi.values
    eps = subsolution_epsilon(domain, r, phi, epsilon)
    res = flow_to_steady(domain, r, eps * phi, stable_dt(r, dt), max_steps, **kw)
    res.epsilon = eps
    return res


def maximal_solution(
    domain: DomainModel, r: ReactionSpec, dt: float = 0.1, max_steps: int = MAX_STEPS, **kw
) -> FlowResult:
    """Flow from the constant supersolution 1."""
    return flow_to_steady(domain, r, np.ones(domain.n_cells), stable_dt(r, dt), max_steps, **kw)


@dataclass
class UniquenessResult:
    gap: float
    minimal: FlowResult
    maximal: FlowResult

    def summary(self) -> dict:
        return {
            "gap": self.gap,
            "minimal": self.minimal.summary(),
            "maximal": self.maximal.summary(),
        }


def uniqueness_test(domain, r, epsilon: float = 0.1, dt: float = 0.1, **kw) -> UniquenessResult:
    lo = minimal_solution(domain, r, epsilon, dt, **kw)
    hi = maximal_solution(domain, r, dt, **kw)
    for name, res in (("minimal", lo), ("maximal", hi)):
        if res.classification != "positive_steady":
            raise RuntimeError(f"{name} flow ended as {res.classification}")
    gap = float(np.abs(hi.u.values - lo.u.values).max())
    return UniquenessResult(gap, lo, hi)


def uniqueness_gap(domain, r, epsilon: float = 0.1, dt: float = 0.1, **kw) -> float:
    """``||u_max - u_min||_inf`` between the maximal and minimal steady states."""
    return uniqueness_test(domain, r, epsilon, dt, **kw).gap


def bump(domain: DomainModel, center, radius: float, height: float) -> Field:
    """``height * cos^2(pi |x - c| / (2 radius))`` inside the ball, 0 outside."""
    xy = domain.centers()
    rr = np.hypot(xy[:, 0] - center[0], xy[:, 1] - center[1])
    vals = np.where(rr < radius, height * np.cos(np.pi * rr / (2 * radius)) ** 2, 0.0)
    return Field(vals, domain)


@dataclass
class HairTriggerResult:
    passed: bool
    deficit: float
    flow: FlowResult
    minimal: FlowResult

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "deficit": self.deficit,
            "flow": self.flow.summary(),
            "minimal": self.minimal.summary(),
        }


def hair_trigger_test(
    domain: DomainModel,
    r: ReactionSpec,
    bump_center,
    bump_radius: float,
    height: float = 1e-3,
    epsilon: float = 0.1,
    dt: float = 0.1,
    tol: float = 1e-4,
    minimal: FlowResult | None = None,
    **kw,
) -> HairTriggerResult:
    """Flow a small compactly supported bump; pass iff it ends above ``u_min - tol``."""
    lo = minimal if minimal is not None else minimal_solution(domain, r, epsilon, dt, **kw)
    init = bump(domain, bump_center, bump_radius, height)
    res = flow_to_steady(domain, r, init, stable_dt(r, dt), **kw)
    deficit = float(max(0.0, np.max(lo.u.values - res.u.values)))
    return HairTriggerResult(bool(deficit <= tol), deficit, res, lo)


@dataclass
class ThresholdResult:
    threshold: float
    bracket: tuple[float, float]
    evaluations: list  # (L, classification, sup_u)

    def summary(self) -> dict:
        return {
            "threshold": self.threshold,
            "bracket": list(self.bracket),
            "evaluations": [list(e) for e in self.evaluations],
        }


def persists(L: float, r: ReactionSpec, h: float, length_factor: float = 10.0, dt: float = 0.5, **kw):
    """Flow from 1 on a Dirichlet strip of width ``L``; returns (persists, result)."""
    dom = build_strip(length_factor * L, L, h)
    res = maximal_solution(dom, r, dt, **kw)
    return res.classification == "positive_steady", res


def existence_threshold(
    r: ReactionSpec,
    h: float,
    lo: float = 3.0,
    hi: float = 4.0,
    width_tol: float = 0.125,
    length_factor: float = 10.0,
    dt: float = 0.5,
    **kw,
) -> ThresholdResult:
    """Bisect the strip width between extinction (``lo``) and persistence (``hi``).

    The cross-section widths are rounded to whole cells, so the bracket is
    reported in realized widths.
    """
    evals = []

    def run(L):
        ok, res = persists(L, r, h, length_factor, dt, **kw)
        Lr = round(L / h) * h
        evals.append((Lr, res.classification, res.sup_u))
        return ok

    if run(lo):
        raise ValueError(f"lower width {lo} already persists")
    if not run(hi):
        raise ValueError(f"upper width {hi} does not persist")
    while hi - lo > width_tol + 1e-12:
        mid = round(0.5 * (lo + hi) / h) * h
        if mid <= lo or mid >= hi:
            break
        if run(mid):
            hi = mid
        else:
            lo = mid
    return ThresholdResult(0.5 * (lo + hi), (lo, hi), evals)
