"""Compiled inner loops for the sweeping solver and the path simulator."""

from __future__ import annotations

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def godunov(vals, h, c):
    """Upwind solve of ``sum_k (max(u - m_k, 0) / h)^2 = c^2``.

    ``vals`` holds ``2n`` neighbor values ordered ``(axis0 -, axis0 +, ...)``;
    missing neighbors are ``inf``.
    """
    n = vals.size // 2
    m = np.empty(n)
    for k in range(n):
        a = vals[2 * k]
        b = vals[2 * k + 1]
        m[k] = a if a < b else b
    m.sort()
    ch = c * h
    u = m[0] + ch
    s = m[0]
    s2 = m[0] * m[0]
    for k in range(1, n):
        if u <= m[k]:
            break
        s += m[k]
        s2 += m[k] * m[k]
        K = k + 1
        disc = s * s - K * (s2 - ch * ch)
        if disc < 0.0:
            disc = 0.0
        u = (s + np.sqrt(disc)) / K
    return u


@njit(cache=True)
def elliptic_candidate(u, idx, nbr, W, C, R):
    acc = R[idx]
    for j in range(nbr.shape[1]):
        acc += W[idx, j] * u[nbr[idx, j]]
    return acc / C[idx]


@njit(cache=True)
def relax_pass(u, order, nbr, is_iface, W, C, R, h, c, strong):
    """One Gauss-Seidel pass over eikonal and interface nodes in ``order``."""
    width = nbr.shape[1]
    buf = np.empty(width)
    change = 0.0
    for t in range(order.size):
        idx = order[t]
        for j in range(width):
            q = nbr[idx, j]
            buf[j] = u[q] if q >= 0 else INF
        v = godunov(buf, h, c)
        if is_iface[idx] and not strong:
            e = elliptic_candidate(u, idx, nbr, W, C, R)
            if e < v:
                v = e
        d = abs(v - u[idx])
        if d > change:
            change = d
        u[idx] = v
    return change


@njit(cache=True)
def jacobi_updates(u, nodes, kinds, nbr, W, C, R, h, c, strong):
    """Scheme value at each node without modifying ``u``.

    ``kinds``: 0 eikonal, 1 Brownian, 2 interface.
    """
    width = nbr.shape[1]
    buf = np.empty(width)
    out = np.empty(nodes.size)
    for t in range(nodes.size):
        idx = nodes[t]
        k = kinds[t]
        if k == 1:
            out[t] = elliptic_candidate(u, idx, nbr, W, C, R)
            continue
        for j in range(width):
            q = nbr[idx, j]
            buf[j] = u[q] if q >= 0 else INF
        v = godunov(buf, h, c)
        if k == 2 and not strong:
            e = elliptic_candidate(u, idx, nbr, W, C, R)
            if e < v:
                v = e
        out[t] = v
    return out
