"""Backend selection for the scan quadrature kernel.

The compiled extension is used when it was built; otherwise the NumPy
implementation is used. ``BACKEND`` names the active one.
"""
import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"

_UNIFORM_RTOL = 1e-9


def _impl(backend):
    if backend is None:
        backend = BACKEND
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available in this installation")
        return _compiled
    if backend == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {backend!r}")


def is_uniform(x):
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        return True
    step = np.diff(x)
    h = (x[-1] - x[0]) / (x.size - 1)
    return bool(np.all(np.abs(step - h) <= _UNIFORM_RTOL * np.abs(x).max()))


def phase_sums(x, phase_re, phase_im, weights, tau, *, backend=None, num_threads=1):
    """Weighted sin^2/cos^2 sums of ``x*tau + arg(phase)`` for every delay.

    ``phase_re + 1j*phase_im`` is a unit phasor carrying any static phase.
    Returns ``(sin_sums, cos_sums)``.
    """
    x = np.ascontiguousarray(x, dtype=float)
    ur = np.ascontiguousarray(phase_re, dtype=float)
    ui = np.ascontiguousarray(phase_im, dtype=float)
    w = np.ascontiguousarray(weights, dtype=float)
    tau = np.ascontiguousarray(np.atleast_1d(tau), dtype=float)
    out_s = np.empty(tau.size)
    out_c = np.empty(tau.size)
    block = 64 if is_uniform(x) else 1
    _impl(backend).phase_sums(x, ur, ui, w, tau, out_s, out_c, block, num_threads)
    return out_s, out_c
