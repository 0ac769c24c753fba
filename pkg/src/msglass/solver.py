"""Minimization of the Crisanti-Sommers functional over discrete pairs.

Projected gradient descent with an isotonic projection, multistart over
seeded initial conditions, and support-size escalation with warm starts.
The Parisi auxiliary vector b is recovered at the minimizer both in closed
form and as the root of the stationarity condition, which must agree.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .functionals import BAssignment, dA_db, eval_A, eval_B
from .model import MixtureModel, check_convexity, eval_xi_s
from .orderparam import DiscretePair, merge_atoms, pseudometric

WEIGHT_GAP = 1e-9
FD_STEP = 1e-6


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    k_max: int = 64
    tol_B: float = 1e-8
    tol_grad: float = 1e-7
    multistart_seeds: int = 16
    max_iters: int = 5000
    merge_tol: float = 1e-6
    grid_resolution: int = 0  # 0 -> pick by dimension

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        for name in ("tol_B", "tol_grad", "max_iters", "multistart_seeds"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class LocalMinimum:
    value: float
    pair: DiscretePair
    converged: bool


@dataclass
class SolveReport:
    value: float
    pair: DiscretePair
    b: BAssignment
    a_value: float
    local_minima: list = field(default_factory=list)
    escalation: list = field(default_factory=list)
    qbar: float = 1.0
    h3_ok: bool = True
    h3strict_ok: bool = True
    warnings: list = field(default_factory=list)
    residuals: dict | None = None
    classification: dict | None = None


def support_bound(model):
    """Explicit bound (qbar, u^s) confining minimizer atoms below 1.

    Species with h_s^2 + xi^s(1) = 0 never move the objective and are
    skipped; if all species are degenerate the bound collapses to 0.
    """
    ones = np.ones(model.n_species)
    g = model.h**2 + eval_xi_s(model, ones)
    u = np.zeros(model.n_species)
    candidates = []
    for s in range(model.n_species):
        if g[s] <= 0:
            continue
        u[s] = 1.0 - (np.sqrt(1.0 + 4.0 * g[s]) - 1.0) / (2.0 * g[s])
        candidates.append(
            ((1 - u[s]) * g[s] + u[s]) / ((1 - u[s]) * g[s] + 1.0)
        )
    qbar = max(candidates) if candidates else 0.0
    return float(qbar), u


def recover_b(pair, model):
    """Closed-form b from the bridge condition at the top of the support:
    b^s = d^s(q_k) + 1 / Delta^s(q_k)."""
    from .orderparam import d_at_atoms, delta_at_atoms

    k = pair.k
    delta_k = delta_at_atoms(pair)[k - 1]
    if np.any(delta_k <= 0):
        raise SolverError("degenerate Delta at the last atom")
    d_k = d_at_atoms(pair, model)[k]
    return BAssignment(d_k + 1.0 / delta_k)


def stationary_b(pair, model, tol=1e-12):
    """Per-species root of the Parisi stationarity condition dA/db = 0.

    Bracketed by doubling above d^s(0); the derivative is increasing in b^s
    so a sign change is guaranteed.
    """
    from .orderparam import d_at_atoms

    d0 = d_at_atoms(pair, model)[0]
    n = model.n_species
    out = np.zeros(n)
    for s in range(n):
        eps = 1e-12 * (1.0 + d0[s])

        def deriv(bs, s=s):
            b = out.copy()
            b[s] = bs
            # other entries irrelevant: dA_db is separable per species
            b = np.maximum(b, d0 + 2 * eps)
            b[s] = bs
            return dA_db(pair, model, b)[s]

        lo = d0[s] + eps
        width = max(1.0, abs(d0[s]))
        hi = d0[s] + width
        n_doublings = 0
        while deriv(hi) <= 0:
            width *= 2.0
            hi = d0[s] + width
            n_doublings += 1
            if n_doublings > 60:
                raise SolverError(f"no bracket for b^{s} after 60 doublings")
        flo = deriv(lo)
        if flo >= 0:
            out[s] = lo
            continue
        out[s] = brentq(deriv, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    return BAssignment(out)


def _pav_nondecreasing(y):
    """Pool-adjacent-violators projection onto nondecreasing sequences."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    vals = []
    counts = []
    for i in range(n):
        v, c = y[i], 1
        while vals and vals[-1] > v:
            v = (vals[-1] * counts[-1] + v * c) / (counts[-1] + c)
            c += counts.pop()
            vals.pop()
        vals.append(v)
        counts.append(c)
    return np.repeat(vals, counts)


def _project_points(q, qbar):
    """Isotonic clip of each species column into [0, qbar]."""
    out = np.empty_like(q)
    for s in range(q.shape[1]):
        out[:, s] = np.clip(_pav_nondecreasing(q[:, s]), 0.0, qbar)
    return out


def _project_weights(m):
    """Project cumulative weights onto strictly increasing with m_k = 1."""
    k = len(m)
    if k == 1:
        return np.array([1.0])
    shifted = _pav_nondecreasing(m - WEIGHT_GAP * np.arange(k))
    out = shifted + WEIGHT_GAP * np.arange(k)
    out[-1] = 1.0
    out = np.clip(out, WEIGHT_GAP, 1.0)
    for i in range(k - 2, -1, -1):
        out[i] = min(out[i], out[i + 1] - WEIGHT_GAP)
    out = np.maximum(out, WEIGHT_GAP)
    return out


def _pgd(m, q, pk, qbar, config):
    """Monotone projected gradient descent from one start.

    Points use the analytic gradient; weights use central finite
    differences.  Returns (value, m, q, converged).
    """
    kern = _kernels
    args = lambda mm, qq: (  # noqa: E731
        mm,
        np.ascontiguousarray(
            np.vstack([np.zeros(qq.shape[1]), qq, np.ones(qq.shape[1])])
        ),
        pk.lam,
        pk.h,
        pk.ent_off,
        pk.ent_sp,
        pk.ent_c,
    )
    k = len(m)
    value, grad_q = kern.b_value_grad(*args(m, q))
    step = 0.1
    converged = False
    for _ in range(config.max_iters):
        # finite-difference gradient in the free weights
        grad_m = np.zeros(k)
        for i in range(k - 1):
            lo = m[i - 1] if i > 0 else 0.0
            hstep = min(FD_STEP, 0.25 * (m[i + 1] - m[i]), 0.25 * (m[i] - lo))
            if hstep <= 0:
                continue
            mp = m.copy()
            mp[i] += hstep
            mm_ = m.copy()
            mm_[i] -= hstep
            grad_m[i] = (
                kern.b_value(*args(mp, q)) - kern.b_value(*args(mm_, q))
            ) / (2 * hstep)

        accepted = False
        for _bt in range(50):
            q_new = _project_points(q - step * grad_q, qbar)
            m_new = _project_weights(m - step * grad_m)
            v_new = kern.b_value(*args(m_new, q_new))
            if v_new < value - 1e-15:
                accepted = True
                break
            step *= 0.5
            if step < 1e-15:
                break
        if not accepted:
            converged = True
            break
        move = max(
            np.max(np.abs(q_new - q)), np.max(np.abs(m_new - m))
        )
        improvement = value - v_new
        m, q = m_new, q_new
        value, grad_q = kern.b_value_grad(*args(m, q))
        step = min(step * 1.3, 1e3)
        if move < 1e-12 and improvement < config.tol_B * 1e-3:
            converged = True
            break
    return value, m, q, converged


def _initial_starts(k, qbar, n, config):
    """Seeded multistart configurations: stratified atoms plus the RS start."""
    starts = [(np.linspace(1.0 / k, 1.0, k), np.zeros((k, n)))]
    for seed in range(config.multistart_seeds):
        rng = np.random.default_rng([seed, k])
        q = np.sort(rng.uniform(0.0, qbar, size=(k, n)), axis=0)
        strat = qbar * (np.arange(k)[:, None] + rng.uniform(0, 1, (k, n))) / k
        q = 0.5 * (q + np.sort(strat, axis=0))
        m = np.linspace(1.0 / k, 1.0, k)
        starts.append((m, q))
    return starts


def _duplicate_largest(m, q):
    """Warm start for k -> k+extra: split the largest-mass atom in two."""
    masses = np.diff(np.concatenate(([0.0], m)))
    r = int(np.argmax(masses))
    lo = m[r - 1] if r > 0 else 0.0
    mid = 0.5 * (lo + m[r])
    m_new = np.insert(m, r, max(mid, WEIGHT_GAP))
    q_new = np.insert(q, r, q[r], axis=0)
    return m_new, q_new


def _max_workers():
    env = os.environ.get("MSSG_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def minimize_B(model, config=None):
    """Full solve: k-escalation, multistart PGD, post-processing, and
    recovery of the Parisi vector at the best minimizer."""
    if config is None:
        config = SolveConfig()
    n = model.n_species
    qbar, _u = support_bound(model)
    pk = model.packed()

    res = config.grid_resolution or {1: 20, 2: 16, 3: 8}.get(n, 4)
    h3_ok, _w = check_convexity(model, "H3", res)
    h3strict_ok, _w2 = check_convexity(model, "H3strict", res)
    warnings = []
    if not h3_ok:
        warnings.append("H3 grid check failed: variational value unsupported")
    if not h3strict_ok:
        warnings.append(
            "H3strict failed: Parisi identity (b) checks are advisory only"
        )

    escalation = []
    solutions = []
    best = None
    k = 1
    warm = None
    while True:
        starts = _initial_starts(k, qbar, n, config)
        if warm is not None:
            starts.insert(0, warm)

        def run(start):
            m0, q0 = start
            try:
                return _pgd(m0.copy(), q0.copy(), pk, qbar, config)
            except FloatingPointError:
                return None

        with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
            results = [r for r in pool.map(run, starts) if r is not None]
        if not results:
            raise SolverError(f"all starts failed at k={k}")
        # deterministic reduction: by value then lexicographic content
        results.sort(
            key=lambda r: (r[0], tuple(r[1]), tuple(np.ravel(r[2])))
        )
        v_k, m_k, q_k, _conv = results[0]
        escalation.append({"k": k, "value": float(v_k)})
        for v, m_, q_, conv in results:
            pair_ = merge_atoms(
                DiscretePair(m_, q_), config.merge_tol
            )
            solutions.append(LocalMinimum(float(v), pair_, bool(conv)))

        improved = best is None or best[0] - v_k >= config.tol_B
        if best is None or v_k < best[0]:
            best = (v_k, m_k, q_k)
        if not improved or 2 * k > config.k_max:
            break
        warm = _duplicate_largest(best[1], best[2])
        # pad the warm start to the next k by further duplication
        k2 = min(2 * k, config.k_max)
        while len(warm[0]) < k2:
            warm = _duplicate_largest(*warm)
        k = k2

    v_best, m_best, q_best = best
    pair = merge_atoms(DiscretePair(m_best, q_best), config.merge_tol)
    value = eval_B(pair, model)
    if not value <= v_best + 1e-9:
        # merging should never hurt; fall back to the raw minimizer
        pair = DiscretePair(m_best, q_best)
        value = v_best

    b = recover_b(pair, model)
    a_value = eval_A(pair, model, b)

    # deduplicate the local-minimum list
    distinct = []
    for sol in sorted(solutions, key=lambda s: s.value):
        if any(
            abs(sol.value - d.value) < 1e-7
            and pseudometric(sol.pair, d.pair) < 1e-4
            for d in distinct
        ):
            continue
        distinct.append(sol)

    return SolveReport(
        value=float(value),
        pair=pair,
        b=b,
        a_value=float(a_value),
        local_minima=distinct,
        escalation=escalation,
        qbar=qbar,
        h3_ok=h3_ok,
        h3strict_ok=h3strict_ok,
        warnings=warnings,
    )
