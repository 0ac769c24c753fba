import numpy as np
import pytest

import msglass as mg
from msglass.functionals import (
    ConstraintError,
    cs_rhs_at_atoms,
    eval_B_qstar,
    grad_B_weights,
    lipschitz_constant,
    parisi_phi_integral,
)
from msglass.orderparam import DiscretePair, d_at_atoms
from msglass.solver import recover_b

from conftest import random_model, random_pair


def closed_form_B(q, beta):
    """Single-species 2-spin value at a point mass delta_q."""
    return 0.5 * (q / (1 - q) + np.log(1 - q) + beta**2 * (1 - q**2) / 2)


def test_eval_B_hand_values():
    for beta, q in [(1.0, 0.0), (2.0, 0.5)]:
        model = mg.single_species_pspin({2: beta**2 / 2})
        pair = DiscretePair.point_mass([q])
        assert mg.eval_B(pair, model) == pytest.approx(closed_form_B(q, beta))
    # beta = 2 at its minimizer equals beta - 3/4 - log(beta)/2
    model = mg.single_species_pspin({2: 2.0})
    pair = DiscretePair.point_mass([0.5])
    assert mg.eval_B(pair, model) == pytest.approx(
        2 - 0.75 - 0.5 * np.log(2), abs=1e-12
    )


def test_eval_B_gap_condition():
    model = mg.single_species_pspin({2: 0.5})
    pair = DiscretePair.point_mass([1.0])
    assert mg.eval_B(pair, model) == np.inf


def test_eval_B_matches_closed_form_grid():
    beta = 1.7
    model = mg.single_species_pspin({2: beta**2 / 2})
    for q in np.linspace(0.0, 0.95, 20):
        pair = DiscretePair.point_mass([q])
        assert mg.eval_B(pair, model) == pytest.approx(
            closed_form_B(q, beta), abs=1e-12
        )


def fd_point_grad(pair, model, eps=1e-6):
    out = np.zeros_like(pair.q)
    for r in range(pair.k):
        for s in range(pair.n_species):
            qp = pair.q.copy()
            qm = pair.q.copy()
            qp[r, s] += eps
            qm[r, s] -= eps
            vp = mg.eval_B(DiscretePair(pair.m, qp), model)
            vm = mg.eval_B(DiscretePair(pair.m, qm), model)
            out[r, s] = (vp - vm) / (2 * eps)
    return out


def interior_pair(rng, k, n, qbar=0.8, gap=1e-3):
    """Random pair whose atoms stay admissible under +-1e-6 perturbations."""
    while True:
        pair = random_pair(rng, k=k, n=n, qbar=qbar)
        if np.all(pair.q[0] > gap) and np.all(np.diff(pair.q, axis=0) > gap):
            return pair


def test_grad_B_points_matches_fd(rng):
    for _ in range(10):
        n = int(rng.integers(1, 4))
        model = random_model(rng, n)
        pair = interior_pair(rng, k=int(rng.integers(1, 5)), n=n)
        grad = mg.grad_B_points(pair, model)
        fd = fd_point_grad(pair, model)
        assert np.allclose(grad, fd, rtol=1e-5, atol=1e-7)


def test_grad_B_weights_shape(rng):
    model = random_model(rng, 2)
    pair = random_pair(rng, k=3, n=2)
    g = grad_B_weights(pair, model)
    assert g.shape == (2,)
    assert grad_B_weights(DiscretePair.point_mass([0.2, 0.3]), model).shape == (0,)


def test_eval_A_equals_B_at_point_mass():
    # k = 1: the bridge choice of b gives A = B identically in q
    beta = 2.0
    model = mg.single_species_pspin({2: beta**2 / 2})
    for q in (0.0, 0.3, 0.5, 0.8):
        pair = DiscretePair.point_mass([q])
        b = recover_b(pair, model)
        assert mg.eval_A(pair, model, b) == pytest.approx(
            mg.eval_B(pair, model), abs=1e-12
        )


def test_stationary_b_minimizes_A(rng):
    # A is convex in b; the stationary point found by root-finding is the
    # per-species minimum of A over b
    from msglass.solver import stationary_b

    for _ in range(10):
        n = int(rng.integers(1, 3))
        model = random_model(rng, n)
        pair = random_pair(rng, k=int(rng.integers(1, 4)), n=n, qbar=0.8)
        b = stationary_b(pair, model).b
        a0 = mg.eval_A(pair, model, b)
        assert np.max(np.abs(mg.dA_db(pair, model, b))) < 1e-9
        for eps in (1e-3, 0.1):
            assert mg.eval_A(pair, model, b + eps) >= a0 - 1e-12
            bm = b - eps
            d0 = d_at_atoms(pair, model)[0]
            if np.all(bm > d0 + 1e-9):
                assert mg.eval_A(pair, model, bm) >= a0 - 1e-12


def test_eval_A_constraint():
    model = mg.single_species_pspin({2: 2.0})
    pair = DiscretePair.point_mass([0.5])
    with pytest.raises(ConstraintError):
        mg.eval_A(pair, model, np.array([0.5]))  # below d(0) = 2


def test_dA_db_matches_fd(rng):
    for _ in range(20):
        n = int(rng.integers(1, 3))
        model = random_model(rng, n)
        pair = random_pair(rng, k=int(rng.integers(1, 4)), n=n, qbar=0.8)
        d0 = d_at_atoms(pair, model)[0]
        b = d0 + rng.uniform(0.5, 4.0, size=n)
        grad = mg.dA_db(pair, model, b)
        eps = 1e-6
        for s in range(n):
            bp, bm = b.copy(), b.copy()
            bp[s] += eps
            bm[s] -= eps
            fd = (mg.eval_A(pair, model, bp) - mg.eval_A(pair, model, bm)) / (2 * eps)
            assert grad[s] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_dA_db_hand_value():
    # beta = 2 minimizer: b = 4 is the stationary point of A in b
    model = mg.single_species_pspin({2: 2.0})
    pair = DiscretePair.point_mass([0.5])
    assert mg.dA_db(pair, model, np.array([4.0]))[0] == pytest.approx(0.0, abs=1e-14)


def test_qstar_invariance(rng):
    for _ in range(10):
        n = int(rng.integers(1, 3))
        model = random_model(rng, n)
        pair = random_pair(rng, k=int(rng.integers(1, 4)), n=n, qbar=0.85)
        base = mg.eval_B(pair, model)
        for t in (0.0, 0.3, 0.7, 0.95):
            assert eval_B_qstar(pair, model, t) == pytest.approx(base, abs=1e-10)


def test_cs_rhs_brute_force(rng):
    from msglass.orderparam import delta_at_atoms

    for _ in range(10):
        pair = random_pair(rng, k=int(rng.integers(1, 5)), n=2, qbar=0.8)
        rhs = cs_rhs_at_atoms(pair, None)
        delta = delta_at_atoms(pair)
        qe = pair.extended_q()
        k = pair.k
        # integral of (Phi^s)'/(Delta^s)^2 built segment by segment
        expect = np.zeros((k, 2))
        run = qe[1] / delta[0] ** 2
        expect[0] = run
        for r in range(1, k):
            run = run + (qe[r + 1] - qe[r]) / (delta[r - 1] * delta[r])
            expect[r] = run
        assert np.allclose(rhs, expect, atol=1e-13)


def test_parisi_phi_integral_monotone(rng):
    model = random_model(rng, 2)
    pair = random_pair(rng, k=3, n=2, qbar=0.8)
    d0 = d_at_atoms(pair, model)[0]
    b = d0 + 1.0
    vals = [parisi_phi_integral(pair, model, b, r) for r in range(1, 4)]
    for a, c in zip(vals, vals[1:]):
        assert np.all(c >= a - 1e-14)


def test_lipschitz_constant_hand():
    beta = 2.0
    model = mg.single_species_pspin({2: beta**2 / 2})
    qbar = 0.5
    # (1/2)(0 + 1/(1-qbar)^2 + xi'(1)) = (1/2)(4 + 4) = 4
    assert lipschitz_constant(model, qbar) == pytest.approx(4.0)
