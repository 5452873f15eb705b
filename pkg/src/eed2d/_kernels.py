"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The barrier solver spends nearly all of its time evaluating batches of
quadratic forms and assembling Newton systems; the link simulator spends
its time on |h^H w|^2 gain tables.  Both are small-matrix workloads where
call overhead matters, so the loops are compiled with numba when available.

Set EED2D_NUMBA=0 to force the numpy path (the benchmark in
benchmarks/bench_kernels.py compares the two).
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    _HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAS_NUMBA = False

USE_NUMBA = _HAS_NUMBA and os.environ.get("EED2D_NUMBA", "1") != "0"


# ---------------------------------------------------------------------------
# pure numpy implementations


def beam_gains_np(channels: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Squared inner products |channels[i]^H w[k]|^2, shape (L, K).

    channels: (L, M) complex, one receiver channel per row.
    w: (K, M) complex beamformers.
    """
    inner = channels.conj() @ w.T
    return inner.real**2 + inner.imag**2


def quad_values_np(q: np.ndarray, b: np.ndarray, c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Values of m quadratics g_i(x) = x^T Q_i x + b_i^T x + c_i."""
    qx = q @ x
    return np.einsum("ij,j->i", qx, x) + b @ x + c


def quad_grads_np(q: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gradients 2 Q_i x + b_i, shape (m, n)."""
    return 2.0 * (q @ x) + b


def quad_vals_grads_np(
    q: np.ndarray, b: np.ndarray, c: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Values and gradients in one pass (they share the Q_i x products)."""
    qx = q @ x
    vals = np.einsum("ij,j->i", qx, x) + b @ x + c
    return vals, 2.0 * qx + b


def barrier_hessian_np(
    q: np.ndarray, grads: np.ndarray, w_lin: np.ndarray, w_out: np.ndarray
) -> np.ndarray:
    """sum_i w_lin[i] * 2*Q_i + w_out[i] * grads_i grads_i^T, shape (n, n)."""
    h = 2.0 * np.tensordot(w_lin, q, axes=1)
    h += (grads.T * w_out) @ grads
    return h


# ---------------------------------------------------------------------------
# numba implementations (loop form of the same contracts)

if _HAS_NUMBA:
    _njit = numba.njit(cache=True, fastmath=False)

    @_njit
    def _beam_gains_nb(channels, w):
        lch = channels.shape[0]
        k, m = w.shape
        out = np.empty((lch, k))
        for i in range(lch):
            for j in range(k):
                acc = 0.0 + 0.0j
                for t in range(m):
                    acc += np.conj(channels[i, t]) * w[j, t]
                out[i, j] = acc.real * acc.real + acc.imag * acc.imag
        return out

    @_njit
    def _quad_values_nb(q, b, c, x):
        m, n = b.shape
        out = np.empty(m)
        for i in range(m):
            acc = c[i]
            for r in range(n):
                row = 0.0
                for s in range(n):
                    row += q[i, r, s] * x[s]
                acc += (row + b[i, r]) * x[r]
            out[i] = acc
        return out

    @_njit
    def _quad_grads_nb(q, b, x):
        m, n = b.shape
        out = np.empty((m, n))
        for i in range(m):
            for r in range(n):
                row = 0.0
                for s in range(n):
                    row += q[i, r, s] * x[s]
                out[i, r] = 2.0 * row + b[i, r]
        return out

    @_njit
    def _quad_vals_grads_nb(q, b, c, x):
        m, n = b.shape
        vals = np.empty(m)
        grads = np.empty((m, n))
        for i in range(m):
            acc = c[i]
            for r in range(n):
                row = 0.0
                for s in range(n):
                    row += q[i, r, s] * x[s]
                grads[i, r] = 2.0 * row + b[i, r]
                acc += (row + b[i, r]) * x[r]
            vals[i] = acc
        return vals, grads

    @_njit
    def _barrier_hessian_nb(q, grads, w_lin, w_out):
        m, n = grads.shape
        h = np.zeros((n, n))
        for i in range(m):
            wl = 2.0 * w_lin[i]
            wo = w_out[i]
            for r in range(n):
                gr = grads[i, r]
                for s in range(n):
                    h[r, s] += wl * q[i, r, s] + wo * gr * grads[i, s]
        return h


if USE_NUMBA:
    beam_gains = _beam_gains_nb
    quad_values = _quad_values_nb
    quad_grads = _quad_grads_nb
    quad_vals_grads = _quad_vals_grads_nb
    barrier_hessian = _barrier_hessian_nb
else:
    beam_gains = beam_gains_np
    quad_values = quad_values_np
    quad_grads = quad_grads_np
    quad_vals_grads = quad_vals_grads_np
    barrier_hessian = barrier_hessian_np


def warmup() -> None:
    """Trigger JIT compilation once (e.g. before forking worker processes)."""
    if not USE_NUMBA:
        return
    ch = np.ones((2, 3), dtype=np.complex128)
    w = np.ones((2, 3), dtype=np.complex128)
    beam_gains(ch, w)
    q = np.zeros((2, 4, 4))
    b = np.zeros((2, 4))
    c = np.zeros(2)
    x = np.zeros(4)
    quad_values(q, b, c, x)
    g = quad_grads(q, b, x)
    quad_vals_grads(q, b, c, x)
    barrier_hessian(q, g, c, c)
