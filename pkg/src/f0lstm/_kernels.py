"""Compiled inner loops for the LSTM recurrence (the only part that cannot be vectorized over time)."""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def lstm_forward_loop(zx, WhT, gates, c, tanh_c, h):
    """Fill gates/c/tanh_c/h in place. ``zx`` already holds ``x @ Wx.T + b``."""
    T, H4 = zx.shape
    H = H4 // 4
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    z = np.empty(H4)
    for t in range(T):
        for j in range(H4):
            z[j] = zx[t, j]
        for k in range(H):
            hk = h_prev[k]
            for j in range(H4):
                z[j] += hk * WhT[k, j]
        for j in range(3 * H):
            gates[t, j] = 0.5 * (math.tanh(0.5 * z[j]) + 1.0)
        for j in range(3 * H, H4):
            gates[t, j] = math.tanh(z[j])
        for j in range(H):
            cj = gates[t, H + j] * c_prev[j] + gates[t, j] * gates[t, 3 * H + j]
            c_prev[j] = cj
            c[t, j] = cj
            tc = math.tanh(cj)
            tanh_c[t, j] = tc
            hj = gates[t, 2 * H + j] * tc
            h_prev[j] = hj
            h[t, j] = hj


@numba.njit(cache=True)
def lstm_backward_loop(dh_in, Wh, gates, c, tanh_c, dz):
    """Reverse-time sweep writing dLoss/d(pre-activation) for every step into ``dz``."""
    T, H = c.shape
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        for j in range(H):
            i = gates[t, j]
            f = gates[t, H + j]
            o = gates[t, 2 * H + j]
            g = gates[t, 3 * H + j]
            tc = tanh_c[t, j]
            c_prev = c[t - 1, j] if t > 0 else 0.0
            dh = dh_in[t, j] + dh_next[j]
            dc = dc_next[j] + dh * o * (1.0 - tc * tc)
            dz[t, j] = dc * g * i * (1.0 - i)
            dz[t, H + j] = dc * c_prev * f * (1.0 - f)
            dz[t, 2 * H + j] = dh * tc * o * (1.0 - o)
            dz[t, 3 * H + j] = dc * i * (1.0 - g * g)
            dc_next[j] = dc * f
        for k in range(H):
            dh_next[k] = 0.0
        for j in range(4 * H):
            d = dz[t, j]
            for k in range(H):
                dh_next[k] += d * Wh[j, k]
