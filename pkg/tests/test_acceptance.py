"""The thirteen acceptance criteria at their stated scale and tolerance.

Each test prints one ``criterion N PASS/FAIL`` line; the lines are repeated
in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from kppdomain import eigen as e
from kppdomain import geometry as g
from kppdomain import scenarios
from kppdomain import steady as sd
from kppdomain.operators import Field, assemble, rayleigh_quotient
from kppdomain.reaction import energy, logistic, weak_kpp_composite

from conftest import J01_SQ, PI2, record

pytestmark = pytest.mark.slow


def robin_mu_bisection():
    lo, hi = 1.2, 1.4
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if mid * math.tan(mid / 2) < 1 else (lo, mid)
    return 0.5 * (lo + hi)


@pytest.fixture(autouse=True)
def serial(monkeypatch):
    monkeypatch.setenv("KPPDOMAIN_THREADS", "1")


@pytest.fixture(scope="module")
def comb():
    return g.build_comb(30, 6, [2, 4, 2, 4], 12, 2, 0.125)


@pytest.mark.parametrize("L", [1, 2])
def test_c01_strip_eigenvalue(L):
    t = time.perf_counter()
    lam = e.principal_eigenvalue(g.build_strip(40 * L, L, L / 32))
    dt = time.perf_counter() - t
    err = abs(lam - PI2 / L**2) / (PI2 / L**2)
    ok = err <= 0.005 and dt < 10
    record(1, f"strip eigenvalue L={L}", ok, f"lambda={lam:.6f} rel_err={err:.2e} (<=5e-3) time={dt:.1f}s (<10)")
    assert ok


def test_c02_disk_eigenvalue():
    t = time.perf_counter()
    lam = e.principal_eigenvalue(g.build_disk(1, 1 / 64))
    dt = time.perf_counter() - t
    err = abs(lam - J01_SQ) / J01_SQ
    oracle = abs(e.LAMBDA_DISK - J01_SQ) / J01_SQ
    ok = err <= 0.02 and dt < 30 and oracle < 1e-8
    record(2, "disk eigenvalue", ok, f"lambda={lam:.6f} rel_err={err:.2e} (<=2e-2) radial_oracle_err={oracle:.1e} time={dt:.1f}s")
    assert ok


def test_c03_neumann_zero():
    shipped = {
        "rectangle": g.build_rectangle(1, 1, 1 / 64, 1.0),
        "strip": g.build_strip(40, 1, 1 / 32, 1.0),
        "interval": g.build_interval(1, 1 / 64, 1.0),
        "disk": g.build_disk(1, 1 / 64, 1.0),
        "comb": g.build_comb(30, 6, [2, 4, 2, 4], 12, 2, 0.125),
        "bulb": g.build_bulb(6, math.pi, 60, 0.1, snap_critical=True),
    }
    t = time.perf_counter()
    worst_lam, worst_spread = 0.0, 0.0
    for name, d in shipped.items():
        d = g.from_mask(d.grid, d.mask, 1.0)
        pair = e.principal_eigenpair(assemble(d))
        worst_lam = max(worst_lam, abs(pair.lam))
        worst_spread = max(worst_spread, float(np.ptp(pair.phi.values)))
    dt = time.perf_counter() - t
    ok = worst_lam <= 1e-10 and worst_spread <= 1e-8 and dt < 10
    record(3, "Neumann zero", ok, f"{len(shipped)} geometries max|lambda|={worst_lam:.1e} max_spread(phi)={worst_spread:.1e} time={dt:.1f}s")
    assert ok


def test_c04_robin_oracle():
    mu = robin_mu_bisection()
    t = time.perf_counter()
    lam = e.principal_eigenvalue(g.build_interval(1, 1 / 64, 0.5))
    dt = time.perf_counter() - t
    err = abs(lam - mu**2) / mu**2
    ok = err <= 0.01 and dt < 10
    record(4, "Robin interval", ok, f"lambda={lam:.6f} oracle={mu**2:.6f} rel_err={err:.2e} (<=1e-2) time={dt:.1f}s")
    assert ok


@pytest.mark.parametrize(
    "name, center, radii",
    [("strip", (20.0, 0.5), [2, 4, 8, 16, 24]), ("comb", (15.0, 3.0), [2, 4, 8, 16, 22])],
)
def test_c05_exhaustion(name, center, radii, comb):
    d = g.build_strip(40, 1, 1 / 32) if name == "strip" else comb
    t = time.perf_counter()
    curve = [lam for _, lam in e.exhaustion_curve(d, center, radii)]
    full = e.principal_eigenvalue(d)
    dt = time.perf_counter() - t
    mono = all(b <= a + 1e-9 for a, b in zip(curve, curve[1:]))
    err = abs(curve[-1] - full) / full
    ok = mono and err <= 0.01 and dt < 60
    record(5, f"exhaustion {name}", ok, f"monotone={mono} final_rel_err={err:.1e} time={dt:.1f}s")
    assert ok


@pytest.mark.parametrize("name", ["strip", "comb", "bulb"])
def test_c06_lieb_scan(name, comb):
    # R = 3 x local width: strip width 1, narrow comb teeth 2, bulb tail pi
    d, R = {
        "strip": (lambda: g.build_strip(40, 1, 1 / 32), 3.0),
        "comb": (lambda: comb, 6.0),
        "bulb": (lambda: g.build_bulb(6, math.pi, 60, 0.1, snap_critical=True), 3 * math.pi),
    }[name]
    d = d()
    t = time.perf_counter()
    scan = e.lieb_scan(d, R, R / 2)
    dt = time.perf_counter() - t
    limit = (scan.lam_domain + e.LAMBDA_DISK / R**2) * 1.05
    ok = scan.min_lambda <= limit and dt < 300
    record(6, f"Lieb scan {name}", ok, f"min_lambda={scan.min_lambda:.5f} <= {limit:.5f} (R={R:.3f}, {len(scan.samples)} balls) time={dt:.1f}s")
    assert ok


def test_c07_existence_threshold():
    r = logistic()
    t = time.perf_counter()
    ok4, res4 = sd.persists(4.0, r, 1 / 32)
    ok3, res3 = sd.persists(3.0, r, 1 / 32)
    thr = sd.existence_threshold(r, 1 / 32)
    dt = time.perf_counter() - t
    lo, hi = thr.bracket
    ok = (
        res4.classification == "positive_steady"
        and res3.classification == "extinct"
        and 3.05 <= lo < hi <= 3.25
        and dt < 300
    )
    record(7, "existence threshold", ok, f"w4={res4.classification} w3={res3.classification} bracket=[{lo}, {hi}] (in [3.05, 3.25]) time={dt:.1f}s")
    assert ok


@pytest.mark.parametrize("name", ["strip", "comb"])
def test_c08_uniqueness(name, comb):
    d = g.build_strip(40, 4, 1 / 8) if name == "strip" else comb
    t = time.perf_counter()
    u = sd.uniqueness_test(d, logistic(), epsilon=0.1, dt=1.0)
    dt = time.perf_counter() - t
    ok = u.gap < 1e-6 and dt < 300
    record(8, f"uniqueness {name}", ok, f"gap={u.gap:.2e} (<1e-6) sup_u={u.maximal.sup_u:.4f} time={dt:.1f}s")
    assert ok


def test_c09_nonuniqueness():
    d = g.build_disk(4, 1 / 16)
    r = weak_kpp_composite(0.5, 0.8, 0.05)
    t = time.perf_counter()
    lo = sd.minimal_solution(d, r, 0.1, 0.5)
    hi = sd.maximal_solution(d, r, 0.5)
    E = energy(d, r, hi.u)
    dt = time.perf_counter() - t
    gap = float(np.abs(hi.u.values - lo.u.values).max())
    steady_both = lo.classification == hi.classification == "positive_steady"
    ok = steady_both and lo.sup_u < 0.5 < hi.sup_u and gap > 0.2 and E < 0 and dt < 300
    record(9, "nonuniqueness", ok, f"sup u-={lo.sup_u:.4f} sup u+={hi.sup_u:.4f} gap={gap:.3f} E[u+]={E:.4f} time={dt:.1f}s")
    assert ok


def test_c10_hair_trigger():
    d = g.build_strip(40, 4, 1 / 8)
    r = logistic()
    t = time.perf_counter()
    lo = sd.minimal_solution(d, r, 0.1, 1.0)
    runs = [sd.hair_trigger_test(d, r, (12.0, 2.0), 1.0, hgt, dt=1.0, minimal=lo) for hgt in (1e-3, 1e-6)]
    dt = time.perf_counter() - t
    ok = all(x.deficit <= 1e-4 for x in runs) and dt < 300
    defs = ", ".join(f"{x.deficit:.1e}" for x in runs)
    record(10, "hair trigger", ok, f"deficits=[{defs}] (<=1e-4) time={dt:.1f}s")
    assert ok


def test_c11_decomposition(comb):
    mu, delta, R = 1.5, 0.3, 5.0
    t = time.perf_counter()
    try:
        res = e.ample_narrow_decompose(comb, mu, delta, R)
        raised = False
    except e.DecompositionError as exc:
        res, raised = exc.result, True
    dt = time.perf_counter() - t
    Y = comb.grid.centers()[1]
    base_h = comb.tags["base_height"]
    narrow_tall = np.zeros_like(comb.mask)
    wide = np.zeros_like(comb.mask)
    for tooth in comb.tags["teeth"]:
        block = np.zeros_like(comb.mask)
        block[tooth["j0"] : tooth["j1"], tooth["i0"] : tooth["i1"]] = True
        if tooth["width"] == 2:
            # tall: farther from the base than the local window radius 2R
            narrow_tall |= block & (Y - base_h > 2 * R)
        else:
            wide |= block
    base = comb.mask & (Y < base_h)
    checks = {
        "lambda_narrow>mu": (not raised) and res.narrow_lambda > mu,
        "tall_narrow_tooth_narrow": bool(narrow_tall.any() and res.narrow_mask[narrow_tall].all()),
        "wide_tooth_ample": bool(res.ample_mask[wide].all()),
        "base_ample": bool(res.ample_mask[base].all()),
        "covers": bool((res.ample_mask | res.narrow_mask)[comb.mask].all()),
    }
    ok = all(checks.values()) and dt < 600
    record(11, "ample-narrow decomposition", ok, f"lambda(narrow)={res.narrow_lambda:.4f} {checks} time={dt:.1f}s")
    assert ok


def test_c12_critical_bulb():
    items, base, _ = scenarios.load_suite(scenarios.shipped_suite())
    cfg = next(c for c in items if c["name"] == "critical_bulb")
    t = time.perf_counter()
    rep = scenarios.run_scenario(cfg, base_dir=base, write=False)
    dt = time.perf_counter() - t
    res = rep.data["results"]
    checks = {
        f"centerline_rel_err={res['centerline_max_rel_err']:.3f}<=0.15": res["centerline_max_rel_err"] <= 0.15,
        f"slope={res['slope_free']:.3f} in -2+-0.15": abs(res["slope_free"] + 2.0) <= 0.15,
        f"mode_ratio={res['higher_mode_ratio_end']:.1e}<0.05": res["higher_mode_ratio_end"] < 0.05,
        f"ode_defect {res['ode_defect_30']:.1e}<{res['ode_defect_15']:.1e}": res["ode_defect_30"] < res["ode_defect_15"],
    }
    ok = all(checks.values()) and dt < 1800
    detail = " ".join(f"{k}:{'ok' if v else 'FAIL'}" for k, v in checks.items())
    record(12, "critical bulb", ok, f"{detail} c_fit={res['c_fit']:.3f} c_theory={res['c_theory']:.3f} time={dt:.1f}s")
    assert ok


def test_c13_property_suites(comb):
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    r = logistic()
    out = {}

    d = g.build_rectangle(3, 2, 1 / 8, 0.3)
    dt_s = sd.stable_dt(r, 0.5)
    ok_cmp, ok_rng = True, True
    for _ in range(10):
        u0 = rng.random(d.n_cells)
        v0 = np.minimum(1.0, u0 + 0.3 * rng.random(d.n_cells))
        u = sd.flow_to_steady(d, r, u0, dt_s, max_steps=20, tol_dt=0.0).u.values
        v = sd.flow_to_steady(d, r, v0, dt_s, max_steps=20, tol_dt=0.0).u.values
        ok_cmp &= bool(np.all(u <= v + 1e-13))
        ok_rng &= bool(u.min() >= -1e-13 and v.max() <= 1 + 1e-13)
    out["comparison"], out["range"] = ok_cmp, ok_rng

    geoms = [
        g.build_strip(40, 1, 1 / 32),
        g.build_disk(1, 1 / 64),
        comb,
        g.build_rectangle(1, 1, 1 / 32, 0.5),
        g.build_interval(1, 1 / 64, 0.5),
        g.build_bulb(6, math.pi, 60, 0.1, snap_critical=True),
    ]
    pos, ray = True, 0.0
    for dom in geoms:
        pair = e.principal_eigenpair(assemble(dom))
        pos &= bool(pair.phi.values.min() > 0)
        ray = max(ray, abs(rayleigh_quotient(dom, pair.phi) - pair.lam) / pair.lam)
    out["positivity"], out["rayleigh"] = pos, ray <= 1e-6

    lam = e.principal_eigenvalue(comb)
    xy = comb.centers()
    mono = True
    for _ in range(20):
        c = xy[rng.integers(len(xy))]
        cut = g.intersect_ball(comb, c, rng.uniform(1.0, 15.0))
        mono &= bool(e.principal_eigenvalue(cut) >= lam - 1e-9)
    out["monotonicity_20_cuts"] = mono
    dt = time.perf_counter() - t
    ok = all(out.values()) and dt < 600
    record(13, "property suites (serial)", ok, f"{out} max_rayleigh_rel={ray:.1e} time={dt:.1f}s")
    assert ok
