"""Closed-form evaluation of the two variational functionals.

Both objectives are evaluated exactly on discrete pairs: every integral has a
per-segment antiderivative, so no quadrature appears anywhere.  The heavy
entry points (the Crisanti-Sommers value and its point gradient) dispatch to
the compiled kernel when available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import MixtureModel, eval_theta, eval_xi_s
from .orderparam import DiscretePair, d_at_atoms, delta_at_atoms

FD_WEIGHT_STEP = 1e-6


class ConstraintError(ValueError):
    """Raised when b fails the lower-bound constraint b^s > d^s(0)."""


@dataclass(frozen=True)
class BAssignment:
    """Per-species auxiliary values of the Parisi representation."""

    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, float)))


@dataclass(frozen=True)
class FunctionalEval:
    value: float
    gradient: np.ndarray | None = None


def _kernel_args(pair: DiscretePair, model: MixtureModel):
    pk = model.packed()
    return (
        pair.m,
        pair.extended_q(),
        pk.lam,
        pk.h,
        pk.ent_off,
        pk.ent_sp,
        pk.ent_c,
    )


def eval_B(pair, model):
    """Discrete Crisanti-Sommers value; +inf when the gap condition fails."""
    return float(_kernels.b_value(*_kernel_args(pair, model)))


def grad_B_points(pair, model):
    """Analytic partials dB/dq_l^s, shape (k, n_species)."""
    _, grad = _kernels.b_value_grad(*_kernel_args(pair, model))
    return grad


def eval_B_with_grad(pair, model) -> FunctionalEval:
    value, grad = _kernels.b_value_grad(*_kernel_args(pair, model))
    return FunctionalEval(float(value), grad)


def grad_B_weights(pair, model, step=FD_WEIGHT_STEP):
    """Central finite differences of B in the free weights m_1..m_{k-1}.

    The final cumulative weight is pinned to 1, so the returned array has
    length k-1.
    """
    k = pair.k
    out = np.zeros(max(k - 1, 0))
    if k == 1:
        return out
    pk = model.packed()
    qe = pair.extended_q()
    for i in range(k - 1):
        lo = pair.m[i - 1] if i > 0 else 0.0
        hi = pair.m[i + 1]
        hstep = min(step, 0.25 * (hi - pair.m[i]), 0.25 * (pair.m[i] - lo))
        if hstep <= 0:
            continue
        mp = pair.m.copy()
        mp[i] += hstep
        vp = _kernels.b_value(mp, qe, pk.lam, pk.h, pk.ent_off, pk.ent_sp, pk.ent_c)
        mm = pair.m.copy()
        mm[i] -= hstep
        vm = _kernels.b_value(mm, qe, pk.lam, pk.h, pk.ent_off, pk.ent_sp, pk.ent_c)
        out[i] = (vp - vm) / (2 * hstep)
    return out


def eval_B_qstar(pair, model, t):
    """B evaluated with the support cutoff pushed beyond the last atom.

    ``t`` in [0, 1) places the cutoff a fraction t along each species'
    segment from its last atom toward 1.  The value is independent of t;
    this alternative evaluation path exists to test that invariance.
    """
    if not 0 <= t < 1:
        raise ValueError("t must be in [0, 1)")
    base = eval_B(pair, model)
    if not np.isfinite(base):
        return base
    qk = pair.q[-1]
    phi = qk + t * (1.0 - qk)
    # log Delta_k  ->  log(Delta_k / (1-phi)) + log(1-phi); telescopes exactly
    lam = model.lam
    correction = np.sum(
        0.5 * lam * (np.log((1 - qk) / (1 - phi)) + np.log1p(-phi)
                     - np.log1p(-qk))
    )
    return float(base + correction)


def _check_b(b, d0):
    b = np.atleast_1d(np.asarray(b, float))
    if np.any(b <= d0):
        raise ConstraintError(
            f"b below d(0): b={b}, d(0)={d0}"
        )
    return b


def _unwrap_b(b):
    return b.b if isinstance(b, BAssignment) else np.atleast_1d(np.asarray(b, float))


def eval_A(pair, model, b):
    """Discrete Parisi value at (pair, b); exact closed form.

    Requires b^s > d^s(0) for every species.
    """
    b = _unwrap_b(b)
    k = pair.k
    qe = pair.extended_q()
    d = d_at_atoms(pair, model)
    d0 = d[0]
    b = _check_b(b, d0)
    xis = np.array([eval_xi_s(model, qe[r]) for r in range(k + 2)])
    theta = np.array([eval_theta(model, qe[r]) for r in range(k + 2)])

    bracket = (model.h**2 + xis[0]) / (b - d0) + b - 1.0 - np.log(b)
    # zero-mass leading segment
    bracket += (xis[1] - xis[0]) / (b - d0)
    # mass-m_l segments, l = 1..k  (d_{k+1} = 0)
    for l in range(1, k + 1):
        dxi = xis[l + 1] - xis[l]
        bracket += np.log1p(pair.m[l - 1] * dxi / (b - d[l])) / pair.m[l - 1]
    value = 0.5 * float(np.sum(model.lam * bracket))
    value -= 0.5 * float(np.sum(pair.m * (theta[2:k + 2] - theta[1:k + 1])))
    return value


def dA_db(pair, model, b):
    """Per-species derivative of A in b, exact closed form."""
    b = _unwrap_b(b)
    k = pair.k
    qe = pair.extended_q()
    d = d_at_atoms(pair, model)
    d0 = d[0]
    b = _check_b(b, d0)
    xis = np.array([eval_xi_s(model, qe[r]) for r in range(k + 2)])

    integral = (xis[1] - xis[0]) / (b - d0) ** 2
    for l in range(1, k + 1):
        dxi = xis[l + 1] - xis[l]
        integral += dxi / ((b - d[l]) * (b - d[l + 1]))
    deriv = (
        -(model.h**2 + xis[0]) / (b - d0) ** 2 + 1.0 - 1.0 / b - integral
    )
    return 0.5 * model.lam * deriv


def parisi_phi_integral(pair, model, b, upto_atom):
    """int_0^{q_r} (xi^s o Phi)'/(b - d^s)^2 du for r = ``upto_atom`` (1-based).

    The building block of the second Parisi minimizer identity.
    """
    b = _unwrap_b(b)
    k = pair.k
    qe = pair.extended_q()
    d = d_at_atoms(pair, model)
    b = _check_b(b, d[0])
    xis = np.array([eval_xi_s(model, qe[r]) for r in range(k + 2)])
    total = (xis[1] - xis[0]) / (b - d[0]) ** 2
    for l in range(1, upto_atom):
        dxi = xis[l + 1] - xis[l]
        total += dxi / ((b - d[l]) * (b - d[l + 1]))
    return total


def cs_rhs_at_atoms(pair, model):
    """int_0^{q_r} (Phi^s)'/(Delta^s)^2 du for every atom r, shape (k, n)."""
    k = pair.k
    qe = pair.extended_q()
    delta = delta_at_atoms(pair)
    out = np.zeros((k, pair.n_species))
    seg0 = qe[1] / delta[0] ** 2
    run = seg0.copy()
    out[0] = run
    for r in range(2, k + 1):
        l = r - 1  # full segment between atoms l and l+1
        run = run + (qe[l + 1] - qe[l]) / (delta[l - 1] * delta[l])
        out[r - 1] = run
    return out


def lipschitz_constant(model, qbar):
    """Lipschitz bound of B on pairs supported below ``qbar``, w.r.t. the
    Wasserstein pseudometric."""
    xis1 = eval_xi_s(model, np.ones(model.n_species))
    vals = 0.5 * model.lam * (model.h**2 + 1.0 / (1.0 - qbar) ** 2 + xis1)
    return float(np.max(vals))
