"""Pure-numpy implementation of the hot objective kernels.

Mirrors the compiled extension in ``_core.pyx``; selected automatically when
the extension is unavailable or when ``MSSG_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import numpy as np


def _xi_rows(qe, ent_off, ent_sp, ent_c):
    """xi evaluated at every row of qe, shape (rows,)."""
    rows = qe.shape[0]
    out = np.zeros(rows)
    for e in range(len(ent_c)):
        idx = ent_sp[ent_off[e]:ent_off[e + 1]]
        out += ent_c[e] * np.prod(qe[:, idx], axis=1)
    return out


def _dxi_rows(qe, ent_off, ent_sp, ent_c):
    """Gradient of xi (w.r.t. raw coordinates) at every row, shape (rows, n)."""
    rows, n = qe.shape
    out = np.zeros((rows, n))
    for e in range(len(ent_c)):
        idx = ent_sp[ent_off[e]:ent_off[e + 1]]
        vals = qe[:, idx]
        p = len(idx)
        for j in range(p):
            mask = np.ones(p, dtype=bool)
            mask[j] = False
            out[:, idx[j]] += ent_c[e] * np.prod(vals[:, mask], axis=1)
    return out


def _deltas(m, qe):
    """Delta^s_r for r = 1..k, shape (k, n); row r-1 is Delta at atom r."""
    k = m.shape[0]
    incr = m[:, None] * (qe[2:k + 2] - qe[1:k + 1])  # (k, n)
    return np.cumsum(incr[::-1], axis=0)[::-1]


def b_value(m, qe, lam, h, ent_off, ent_sp, ent_c):
    """Discrete Crisanti-Sommers value; +inf when some q_k^s >= 1."""
    k = m.shape[0]
    if np.any(qe[k] >= 1.0):
        return np.inf
    delta = _deltas(m, qe)
    xi = _xi_rows(qe, ent_off, ent_sp, ent_c)

    bracket = h * h * delta[0] + qe[1] / delta[0] + np.log(delta[k - 1])
    if k > 1:
        # (1/m_r) log(Delta_r / Delta_{r+1}) via log1p for small masses
        ratio = m[:k - 1, None] * (qe[2:k + 1] - qe[1:k]) / delta[1:k]
        bracket = bracket + np.sum(
            np.log1p(ratio) / m[:k - 1, None], axis=0
        )
    value = 0.5 * float(np.sum(lam * bracket))
    value += 0.5 * float(np.sum(m * (xi[2:k + 2] - xi[1:k + 1])))
    return value


def b_value_grad(m, qe, lam, h, ent_off, ent_sp, ent_c):
    """B value and analytic partials with respect to the atom coordinates.

    Returns ``(value, grad)`` with ``grad[l-1, s] = dB/dq_l^s`` for atoms
    l = 1..k.
    """
    k = m.shape[0]
    n = qe.shape[1]
    value = b_value(m, qe, lam, h, ent_off, ent_sp, ent_c)
    if not np.isfinite(value):
        raise FloatingPointError("gap condition violated: q_k^s >= 1")
    delta = _deltas(m, qe)
    dxi = _dxi_rows(qe[1:k + 1], ent_off, ent_sp, ent_c)  # rows = atoms 1..k
    xis = dxi / lam

    m_prev = np.concatenate(([0.0], m[:-1]))
    grad = np.empty((k, n))
    # S_l = sum_{r<l} (1/m_r)(1/Delta_r - 1/Delta_{r+1})
    #     = -sum_{r<l} (q_{r+1}-q_r) / (Delta_r Delta_{r+1})
    s_run = np.zeros(n)
    base = h * h - qe[1] / delta[0] ** 2
    for l in range(1, k + 1):
        grad[l - 1] = (
            0.5 * lam * (m_prev[l - 1] - m[l - 1]) * (base + s_run + xis[l - 1])
        )
        if l < k:
            s_run = s_run - (qe[l + 1] - qe[l]) / (delta[l - 1] * delta[l])
    return value, grad
