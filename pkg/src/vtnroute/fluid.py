"""Max-min fair fluid kernel, compiled when available.

The Cython extension ``vtnroute._fluid`` is used if it imports; otherwise,
or when ``VTNROUTE_PURE_PYTHON=1`` is set, the pure-Python
``vtnroute._fluid_py`` provides the same functions. ``BACKEND`` names the
active one.
"""

from __future__ import annotations

import os

import numpy as np

from . import _fluid_py

BACKEND = "python"
_impl = _fluid_py
if os.environ.get("VTNROUTE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _fluid as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def backends() -> dict:
    """Every importable backend module, keyed by name."""
    out = {"python": _fluid_py}
    try:
        from . import _fluid as compiled
    except ImportError:
        return out
    out["cython"] = compiled
    return out


def to_csr(paths) -> tuple[np.ndarray, np.ndarray]:
    """Pack a list of link-index sequences into ``(flow_ptr, flow_links)``."""
    ptr = np.zeros(len(paths) + 1, dtype=np.int64)
    for i, p in enumerate(paths):
        ptr[i + 1] = ptr[i] + len(p)
    links = np.fromiter((l for p in paths for l in p), dtype=np.int64, count=int(ptr[-1]))
    return ptr, links


def maxmin_rates(capacity, paths, active=None, impl=None) -> np.ndarray:
    """Max-min fair rates for flows routed on ``paths`` over links with ``capacity``."""
    impl = impl or _impl
    ptr, links = to_csr(paths)
    if active is None:
        active = [i for i, p in enumerate(paths) if len(p)]
    return np.asarray(impl.maxmin_rates(np.asarray(capacity, dtype=float), ptr, links, list(active)), dtype=float)


def simulate(capacity, paths, sizes_bits, starts, record=False, impl=None):
    """Finish times (and optional epoch trace) of flows sharing links max-min fairly."""
    impl = impl or _impl
    ptr, links = to_csr(paths)
    finish, epochs = impl.simulate(
        np.asarray(capacity, dtype=float),
        ptr,
        links,
        np.asarray(sizes_bits, dtype=float),
        np.asarray(starts, dtype=float),
        record,
    )
    return np.asarray(finish, dtype=float), epochs
