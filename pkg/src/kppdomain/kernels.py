"""Backend selection for the linear-algebra kernels.

The compiled extension is preferred. Set ``KPPDOMAIN_PURE_PYTHON=1`` to force
the NumPy fallback (useful for benchmarking and for platforms without a
compiler).
"""

import os

BACKEND = "python"

if os.environ.get("KPPDOMAIN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._core import csr_matvec, ic0_apply, ic0_factor, pcg  # noqa: F401

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build
        pass

if BACKEND == "python":
    from ._fallback import csr_matvec, ic0_apply, ic0_factor, pcg  # noqa: F401


def load_backend(name):
    """Return a namespace with the kernels of backend ``name``."""
    import types

    if name == "compiled":
        from . import _core as mod
    elif name == "python":
        from . import _fallback as mod
    else:
        raise ValueError(f"unknown backend {name!r}")
    return types.SimpleNamespace(
        name=name,
        csr_matvec=mod.csr_matvec,
        ic0_factor=mod.ic0_factor,
        ic0_apply=mod.ic0_apply,
        pcg=mod.pcg,
    )
