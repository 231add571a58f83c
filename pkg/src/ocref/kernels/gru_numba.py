"""Numba-compiled GRU recurrence kernels (hot path).

Same contract as gru_numpy; see that module for the gate equations. The
loops run over contiguous float64 arrays so numba lowers the per-step
GEMMs to BLAS calls, and the z/r gates share packed (H, 2H) weight
matrices to halve the number of small GEMM launches (column blocks are
independent, so results are bit-identical to the unpacked form).
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _pack_cols(a, b):
    H, W = a.shape
    out = np.empty((H, 2 * W))
    out[:, :W] = a
    out[:, W:] = b
    return out


@njit(cache=True)
def gru_forward(xz, xr, xn, wz, wr, wn, mask):
    T, B, H = xz.shape
    h = np.zeros((T + 1, B, H))
    z = np.empty((T, B, H))
    r = np.empty((T, B, H))
    n = np.empty((T, B, H))
    wzr = _pack_cols(wz, wr)
    for t in range(T):
        hp = h[t]
        gzr = np.dot(hp, wzr)
        for b in range(B):
            for j in range(H):
                z[t, b, j] = 1.0 / (1.0 + np.exp(-(xz[t, b, j] + gzr[b, j])))
                r[t, b, j] = 1.0 / (1.0 + np.exp(-(xr[t, b, j] + gzr[b, H + j])))
        rh = np.ascontiguousarray(r[t] * hp)
        gn = np.dot(rh, wn)
        for b in range(B):
            m = mask[t, b]
            for j in range(H):
                nt = np.tanh(xn[t, b, j] + gn[b, j])
                n[t, b, j] = nt
                hn = (1.0 - z[t, b, j]) * hp[b, j] + z[t, b, j] * nt
                h[t + 1, b, j] = m * hn + (1.0 - m) * hp[b, j]
    return h, z, r, n


@njit(cache=True)
def gru_backward(dh_last, h, z, r, n, wz, wr, wn, mask):
    T, B, H = z.shape
    dxz = np.zeros((T, B, H))
    dxr = np.zeros((T, B, H))
    dxn = np.zeros((T, B, H))
    dwzr = np.zeros((H, 2 * H))
    dwn = np.zeros((H, H))
    dh = dh_last.copy()
    dz = np.empty((B, H))
    dn = np.empty((B, H))
    dhp = np.empty((B, H))
    dzr = np.empty((B, 2 * H))
    wzrT = np.ascontiguousarray(_pack_cols(wz, wr).T)
    wnT = np.ascontiguousarray(wn.T)
    for t in range(T - 1, -1, -1):
        hp = h[t]
        for b in range(B):
            m = mask[t, b]
            for j in range(H):
                dg = dh[b, j] * m
                dz[b, j] = dg * (n[t, b, j] - hp[b, j])
                dn[b, j] = dg * z[t, b, j]
                dhp[b, j] = dg * (1.0 - z[t, b, j])
                # identity carry for padded steps
                dh[b, j] = dh[b, j] * (1.0 - m)
        dnp = np.ascontiguousarray(dn * (1.0 - n[t] * n[t]))
        dxn[t] = dnp
        drh = np.dot(dnp, wnT)
        rh = np.ascontiguousarray(r[t] * hp)
        dwn += np.dot(rh.T.copy(), dnp)
        for b in range(B):
            for j in range(H):
                dr_bj = drh[b, j] * hp[b, j]
                dhp[b, j] += drh[b, j] * r[t, b, j]
                zq = z[t, b, j]
                rq = r[t, b, j]
                dzr[b, j] = dz[b, j] * zq * (1.0 - zq)
                dzr[b, H + j] = dr_bj * rq * (1.0 - rq)
        dxz[t] = dzr[:, :H]
        dxr[t] = dzr[:, H:]
        dhp += np.dot(dzr, wzrT)
        hpT = np.ascontiguousarray(hp).T.copy()
        dwzr += np.dot(hpT, dzr)
        for b in range(B):
            for j in range(H):
                dh[b, j] += dhp[b, j]
    dwz = np.ascontiguousarray(dwzr[:, :H])
    dwr = np.ascontiguousarray(dwzr[:, H:])
    return dxz, dxr, dxn, dwz, dwr, dwn
