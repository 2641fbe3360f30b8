"""NumPy reference implementation of the scan quadrature kernel.

Evaluates the carrier phase directly with ``np.sin``/``np.cos`` in chunks of
delays; slower than the compiled kernel but exact to rounding and valid for
non-uniform grids.
"""
import numpy as np

_CHUNK_ELEMENTS = 1 << 21


def phase_sums(x, ur, ui, w, tau, out_s, out_c, block=64, num_threads=1):
    x = np.asarray(x, dtype=float)
    ur = np.asarray(ur, dtype=float)
    ui = np.asarray(ui, dtype=float)
    w = np.asarray(w, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if not (ur.shape == ui.shape == w.shape == x.shape):
        raise ValueError("x, ur, ui and w must have equal length")
    if out_s.shape[0] != tau.shape[0] or out_c.shape[0] != tau.shape[0]:
        raise ValueError("output arrays must match tau")
    rows = max(1, _CHUNK_ELEMENTS // max(1, x.size))
    for start in range(0, tau.size, rows):
        t = tau[start:start + rows, None]
        arg = x[None, :] * t
        zr = np.cos(arg)
        zi = np.sin(arg)
        qr = zr * ur - zi * ui
        qi = zr * ui + zi * ur
        out_s[start:start + rows] = (w * qi * qi).sum(axis=1)
        out_c[start:start + rows] = (w * qr * qr).sum(axis=1)
