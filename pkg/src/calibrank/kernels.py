"""Kernel backend selection.

The decomposition inner loop (repeated bipartite matching over a shrinking
residual support) dominates the non-LP runtime, so it is implemented twice:
a compiled Cython extension and a pure-Python twin. The compiled backend is
used when the extension was built; set ``CALIBRANK_PURE_PYTHON=1`` to force
the fallback. ``benchmarks/kernel_benchmark.py`` compares the two.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None


def available_backends() -> dict:
    """Name-to-module map of the kernel implementations present."""
    backends = {"python": _kernels_py}
    if _compiled is not None:
        backends["cython"] = _compiled
    return backends


def get_backend(name: str | None = None):
    """Return a kernel module by name, or the default when ``name`` is None."""
    if name is None:
        return _default
    try:
        return available_backends()[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}; built: {sorted(available_backends())}") from None


if os.environ.get("CALIBRANK_PURE_PYTHON"):
    _default = _kernels_py
    BACKEND_NAME = "python"
elif _compiled is not None:
    _default = _compiled
    BACKEND_NAME = "cython"
else:
    _default = _kernels_py
    BACKEND_NAME = "python"

perfect_matching = _default.perfect_matching
bvn_extract = _default.bvn_extract
