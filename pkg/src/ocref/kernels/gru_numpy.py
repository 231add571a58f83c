"""Pure-numpy GRU recurrence kernels (reference path).

Gate math, one direction, batch-first-free layout (T, B, H). Input
projections are precomputed by the caller (one large GEMM), so the kernel
only carries the sequential hidden-state dependency:

    z_t = sigmoid(xz_t + h_{t-1} Wz)
    r_t = sigmoid(xr_t + h_{t-1} Wr)
    n_t = tanh(xn_t + (r_t * h_{t-1}) Wn)
    h_t = (1 - z_t) * h_{t-1} + z_t * n_t

``mask`` is 1.0 while a sequence is still running and 0.0 on padding;
masked steps carry the state through unchanged, so the state at the last
step is each sequence's own final state.
"""
from __future__ import annotations

import numpy as np


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gru_forward(xz, xr, xn, wz, wr, wn, mask):
    """Run the recurrence; returns (h, z, r, n) with h of shape (T+1, B, H)
    (h[0] is the zero initial state) and per-step gate activations."""
    T, B, H = xz.shape
    h = np.zeros((T + 1, B, H))
    z = np.empty((T, B, H))
    r = np.empty((T, B, H))
    n = np.empty((T, B, H))
    for t in range(T):
        hp = h[t]
        zt = _sigmoid(xz[t] + hp @ wz)
        rt = _sigmoid(xr[t] + hp @ wr)
        nt = np.tanh(xn[t] + (rt * hp) @ wn)
        hn = (1.0 - zt) * hp + zt * nt
        m = mask[t][:, None]
        h[t + 1] = m * hn + (1.0 - m) * hp
        z[t] = zt
        r[t] = rt
        n[t] = nt
    return h, z, r, n


def gru_backward(dh_last, h, z, r, n, wz, wr, wn, mask):
    """Backpropagate a gradient at the final state through the recurrence.

    Returns gradients for the precomputed input projections (dxz, dxr,
    dxn) and the hidden weights (dwz, dwr, dwn)."""
    T, B, H = z.shape
    dxz = np.zeros((T, B, H))
    dxr = np.zeros((T, B, H))
    dxn = np.zeros((T, B, H))
    dwz = np.zeros((H, H))
    dwr = np.zeros((H, H))
    dwn = np.zeros((H, H))
    dh = dh_last.copy()
    for t in range(T - 1, -1, -1):
        m = mask[t][:, None]
        dg = dh * m
        dcarry = dh * (1.0 - m)
        hp = h[t]
        zt = z[t]
        rt = r[t]
        nt = n[t]
        dz = dg * (nt - hp)
        dn = dg * zt
        dhp = dg * (1.0 - zt)
        dnp = dn * (1.0 - nt * nt)
        dxn[t] = dnp
        drh = dnp @ wn.T
        dwn += (rt * hp).T @ dnp
        dr = drh * hp
        dhp += drh * rt
        dzp = dz * zt * (1.0 - zt)
        drp = dr * rt * (1.0 - rt)
        dxz[t] = dzp
        dxr[t] = drp
        dhp += dzp @ wz.T + drp @ wr.T
        dwz += hp.T @ dzp
        dwr += hp.T @ drp
        dh = dhp + dcarry
    return dxz, dxr, dxn, dwz, dwr, dwn
