"""Compiled inner loops of the Boltzmann collision quadrature.

The sweep visits every pre-collision triple (v_a, w_b, omega_k) once. Its
weight is removed at v_a (and w_b) and redistributed around the post-collision
velocities with an interpolation stencil; the deposit is the transpose of
interpolating f at those points. Mass is conserved exactly, momentum exactly
for a stencil that reproduces linear functions, and energy exactly for one
that reproduces quadratics.

The outer loop over v_a is split into a fixed number of chunks, each with a
private accumulator; chunks are reduced in index order so results do not
depend on the thread count.
"""
from __future__ import annotations

import os

import numba as nb
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    # skip the TBB probe (it warns on older TBB builds); OpenMP or the
    # built-in work queue are equivalent for these loops
    nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

N_CHUNKS = 16
LINEAR = 0
QUADRATIC = 1


@nb.njit(cache=True, inline="always")
def _stencil(p, n, quadratic, wts):
    """Fill ``wts`` with 1D weights for fractional index ``p``; return the first index."""
    if quadratic:
        k = int(np.floor(p + 0.5))
        if k < 1:
            k = 1
        elif k > n - 2:
            k = n - 2
        t = p - k
        wts[0] = 0.5 * t * (t - 1.0)
        wts[1] = 1.0 - t * t
        wts[2] = 0.5 * t * (t + 1.0)
        return k - 1
    k = int(np.floor(p))
    if k > n - 2:
        k = n - 2
    t = p - k
    wts[0] = 1.0 - t
    wts[1] = t
    return k


@nb.njit(cache=True, inline="always")
def _deposit(out, row, px, py, pz, n, quadratic, amount, wx, wy, wz):
    sx = _stencil(px, n, quadratic, wx)
    sy = _stencil(py, n, quadratic, wy)
    sz = _stencil(pz, n, quadratic, wz)
    ns = 3 if quadratic else 2
    for dx in range(ns):
        ax = amount * wx[dx]
        base_x = (sx + dx) * n
        for dy in range(ns):
            axy = ax * wy[dy]
            base = (base_x + sy + dy) * n + sz
            for dz in range(ns):
                out[row, base + dz] += axy * wz[dz]


@nb.njit(cache=True, parallel=True)
def collision_sweep(fi, fj, lo_i, h_i, n_i, lo_j, h_j, n_j, omega, w_ang,
                    alpha_ij, alpha_ji, kind, strength, scale_i, scale_j,
                    do_i, do_j, same, quadratic, prune):
    """Gain and loss accumulators for one (i, j) interaction at one cell.

    Returns chunked arrays ``(gain_i, loss_i, gain_j, loss_j)`` of shape
    ``(N_CHUNKS, nodes)``; sum over axis 0 for the totals. ``kind`` 0 is a
    constant kernel, 1 is ``strength * |g|``. With ``same`` the j-side
    deposits land in the i-side arrays (single-species symmetric form).
    """
    nvi = n_i * n_i * n_i
    nvj = n_j * n_j * n_j
    n_ang = omega.shape[0]
    gi = np.zeros((N_CHUNKS, nvi))
    li = np.zeros((N_CHUNKS, nvi))
    if same:
        gj = gi
        lj = li
    else:
        gj = np.zeros((N_CHUNKS, nvj))
        lj = np.zeros((N_CHUNKS, nvj))
    fmax_i = 0.0
    for a in range(nvi):
        if fi[a] > fmax_i:
            fmax_i = fi[a]
    fmax_j = 0.0
    for b in range(nvj):
        if fj[b] > fmax_j:
            fmax_j = fj[b]
    threshold = prune * fmax_i * fmax_j
    top_i = n_i - 1.0
    top_j = n_j - 1.0
    for c in nb.prange(N_CHUNKS):
        wx = np.empty(3)
        wy = np.empty(3)
        wz = np.empty(3)
        a_start = (c * nvi) // N_CHUNKS
        a_stop = ((c + 1) * nvi) // N_CHUNKS
        for a in range(a_start, a_stop):
            fa = fi[a]
            if fa == 0.0:
                continue
            ix = a // (n_i * n_i)
            iy = (a // n_i) % n_i
            iz = a % n_i
            vx = lo_i[0] + (ix + 0.5) * h_i[0]
            vy = lo_i[1] + (iy + 0.5) * h_i[1]
            vz = lo_i[2] + (iz + 0.5) * h_i[2]
            for b in range(nvj):
                fb = fj[b]
                if fb == 0.0:
                    continue
                jx = b // (n_j * n_j)
                jy = (b // n_j) % n_j
                jz = b % n_j
                wvx = lo_j[0] + (jx + 0.5) * h_j[0]
                wvy = lo_j[1] + (jy + 0.5) * h_j[1]
                wvz = lo_j[2] + (jz + 0.5) * h_j[2]
                gx = vx - wvx
                gy = vy - wvy
                gz = vz - wvz
                g = np.sqrt(gx * gx + gy * gy + gz * gz)
                if g == 0.0:
                    continue
                sigma = strength if kind == 0 else strength * g
                base = sigma * fa * fb
                if base <= threshold:
                    continue
                cx = alpha_ij * vx + alpha_ji * wvx
                cy = alpha_ij * vy + alpha_ji * wvy
                cz = alpha_ij * vz + alpha_ji * wvz
                ri = alpha_ji * g
                rj = alpha_ij * g
                total = 0.0
                for k in range(n_ang):
                    ox = omega[k, 0]
                    oy = omega[k, 1]
                    oz = omega[k, 2]
                    px = (cx + ri * ox - lo_i[0]) / h_i[0] - 0.5
                    py = (cy + ri * oy - lo_i[1]) / h_i[1] - 0.5
                    pz = (cz + ri * oz - lo_i[2]) / h_i[2] - 0.5
                    if px < 0.0 or py < 0.0 or pz < 0.0 or px > top_i or py > top_i or pz > top_i:
                        continue
                    qx = (cx - rj * ox - lo_j[0]) / h_j[0] - 0.5
                    qy = (cy - rj * oy - lo_j[1]) / h_j[1] - 0.5
                    qz = (cz - rj * oz - lo_j[2]) / h_j[2] - 0.5
                    if qx < 0.0 or qy < 0.0 or qz < 0.0 or qx > top_j or qy > top_j or qz > top_j:
                        continue
                    wk = base * w_ang[k]
                    total += wk
                    if do_i:
                        _deposit(gi, c, px, py, pz, n_i, quadratic, scale_i * wk, wx, wy, wz)
                    if do_j:
                        _deposit(gj, c, qx, qy, qz, n_j, quadratic, scale_j * wk, wx, wy, wz)
                if do_i:
                    li[c, a] += scale_i * total
                if do_j:
                    lj[c, b] += scale_j * total
    return gi, li, gj, lj


def reduce_chunks(chunks: np.ndarray) -> np.ndarray:
    """Fixed-order sum over the chunk axis."""
    out = chunks[0].copy()
    for c in range(1, chunks.shape[0]):
        out += chunks[c]
    return out
