import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from kppdomain import geometry as g
from kppdomain import kernels
from kppdomain.operators import assemble

compiled = pytest.importorskip("kppdomain._core")
BACKENDS = [kernels.load_backend("compiled"), kernels.load_backend("python")]


@pytest.fixture(scope="module")
def stencil():
    c = g.build_comb(12, 2, [1, 2], 4, 1, 0.25)
    d = g.from_mask(c.grid, c.mask, 0.3)
    op = assemble(d)
    return op.indptr, op.indices, op.data


def test_compiled_is_default():
    assert kernels.BACKEND == "compiled"


def test_env_forces_fallback():
    code = "import kppdomain.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, KPPDOMAIN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.load_backend("fortran")


@pytest.mark.parametrize("be", BACKENDS, ids=lambda b: b.name)
@pytest.mark.parametrize("shift", [0.0, 0.25])
def test_matvec_matches_scipy(be, stencil, shift, rng):
    ip, ix, dat = stencil
    n = len(ip) - 1
    A = sp.csr_matrix((dat, ix, ip), shape=(n, n))
    x = rng.standard_normal(n)
    assert np.allclose(be.csr_matvec(ip, ix, dat, x, shift), A @ x - shift * x, rtol=0, atol=1e-12)


def test_ic0_factor_parity(stencil):
    ip, ix, dat = stencil
    a = BACKENDS[0].ic0_factor(ip, ix, dat, -0.01)
    b = BACKENDS[1].ic0_factor(ip, ix, dat, -0.01)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert np.allclose(a[2], b[2], rtol=1e-13, atol=0)


def test_ic0_exact_on_tridiagonal():
    # IC(0) has no dropped fill on a tridiagonal matrix, so it is the exact Cholesky
    n = 30
    A = sp.diags([-np.ones(n - 1), 2.5 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()
    A.sort_indices()
    ip, ix = A.indptr.astype(np.int64), A.indices.astype(np.int64)
    b = np.linspace(-1, 1, n)
    for be in BACKENDS:
        lfac = be.ic0_factor(ip, ix, A.data, 0.0)
        z = be.ic0_apply(*lfac, b)
        assert np.allclose(A @ z, b, atol=1e-12)


def test_ic0_rejects_indefinite():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    ip, ix = A.indptr.astype(np.int64), A.indices.astype(np.int64)
    for be in BACKENDS:
        with pytest.raises(ArithmeticError):
            be.ic0_factor(ip, ix, A.data, 0.0)


@pytest.mark.parametrize("be", BACKENDS, ids=lambda b: b.name)
def test_pcg_solves(be, stencil, rng):
    ip, ix, dat = stencil
    n = len(ip) - 1
    A = sp.csr_matrix((dat, ix, ip), shape=(n, n))
    shift = -1e-3
    lfac = be.ic0_factor(ip, ix, dat, shift)
    b = rng.standard_normal(n)
    x = np.zeros(n)
    it, res = be.pcg(ip, ix, dat, b, x, shift, *lfac, 1e-12, 5000)
    assert it > 0
    assert np.linalg.norm(A @ x - shift * x - b) <= 1e-10 * np.linalg.norm(b)


def test_pcg_zero_rhs():
    A = sp.identity(4, format="csr")
    ip, ix = A.indptr.astype(np.int64), A.indices.astype(np.int64)
    for be in BACKENDS:
        lfac = be.ic0_factor(ip, ix, A.data, 0.0)
        x = np.ones(4)
        it, _ = be.pcg(ip, ix, A.data, np.zeros(4), x, 0.0, *lfac, 1e-10, 10)
        assert it == 0 and np.all(x == 0)


def test_eigenvalue_backend_parity():
    code = (
        "from kppdomain import geometry as g, eigen as e;"
        "print(repr(e.principal_eigenvalue(g.build_disk(1, 1/16))))"
    )
    vals = []
    for flag in ("0", "1"):
        env = dict(os.environ, KPPDOMAIN_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        vals.append(float(out.stdout))
    assert vals[0] == pytest.approx(vals[1], rel=1e-9)
