"""Minimizer identity residuals and symmetry-breaking classification."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .functionals import (
    BAssignment,
    cs_rhs_at_atoms,
    dA_db,
    eval_A,
    eval_B,
    parisi_phi_integral,
)
from .model import cross_derivative, eval_xi_s, s_ext
from .orderparam import (
    DEFAULT_MERGE_TOL,
    MASS_FLOOR,
    d_at_atoms,
    delta_at_atoms,
    pushforward_atoms,
)


@dataclass
class ResidualBlock:
    """All identity residuals evaluated at one (pair, b)."""

    cs: np.ndarray          # (k, n): Crisanti-Sommers identity per atom
    parisi_a: np.ndarray    # (n,): stationarity of A in b
    parisi_b: np.ndarray    # (k, n): Phi identity per atom
    bridge: np.ndarray      # (k, n): b - d - 1/Delta per atom
    ab_gap: float           # |A - B|
    parisi_b_advisory: bool = False

    def max_abs(self):
        return {
            "cs": float(np.max(np.abs(self.cs))),
            "parisi_a": float(np.max(np.abs(self.parisi_a))),
            "parisi_b": float(np.max(np.abs(self.parisi_b))),
            "bridge": float(np.max(np.abs(self.bridge))),
            "ab_gap": float(self.ab_gap),
        }

    def to_dict(self):
        return {
            "cs": self.cs.tolist(),
            "parisi_a": self.parisi_a.tolist(),
            "parisi_b": self.parisi_b.tolist(),
            "bridge": self.bridge.tolist(),
            "ab_gap": float(self.ab_gap),
            "parisi_b_advisory": self.parisi_b_advisory,
            "max_abs": self.max_abs(),
        }


@dataclass
class ClassificationReport:
    supports: list                      # per-species support value lists
    support_masses: list                # matching mass lists
    rsb_levels: list                    # |support| - 1 per species
    labels: list                        # "RS" or "k-RSB" per species
    partition: list                     # simultaneity classes (species idx)
    bijections: dict                    # (s, t) -> list of (u_s, u_t) pairs
    hypothesis: dict = field(default_factory=dict)

    def to_dict(self, species=None):
        name = (lambda i: species[i]) if species else (lambda i: i)
        return {
            "supports": {name(i): v for i, v in enumerate(self.supports)},
            "support_masses": {
                name(i): v for i, v in enumerate(self.support_masses)
            },
            "rsb_levels": {name(i): v for i, v in enumerate(self.rsb_levels)},
            "labels": {name(i): v for i, v in enumerate(self.labels)},
            "partition": [[name(i) for i in cls] for cls in self.partition],
            "bijections": {
                f"{name(s)}->{name(t)}": pairs
                for (s, t), pairs in self.bijections.items()
            },
            "hypothesis": {
                f"{name(s)},{name(t)}": status
                for (s, t), status in self.hypothesis.items()
            },
        }


def cs_identity_residual(pair, model):
    """Residual of xi^s(Phi(q_r)) + h_s^2 = int_0^{q_r} (Phi^s)'/(Delta^s)^2
    at every atom; zero at any true minimizer."""
    k = pair.k
    qe = pair.extended_q()
    lhs = np.array(
        [eval_xi_s(model, qe[r]) + model.h**2 for r in range(1, k + 1)]
    )
    return lhs - cs_rhs_at_atoms(pair, model)


def parisi_identity_residuals(pair, model, b):
    """Residuals of the two Parisi minimizer identities.

    Returns ``(res_a, res_b)``: per-species stationarity residual and the
    per-atom map identity residual.  The map identity is proved only under
    strict convexity; callers flag it as advisory otherwise.
    """
    res_a = dA_db(pair, model, b) * 2.0 / model.lam
    k = pair.k
    res_b = np.empty((k, model.n_species))
    b_arr = b.b if isinstance(b, BAssignment) else np.asarray(b, float)
    d = d_at_atoms(pair, model)
    xis0 = eval_xi_s(model, np.zeros(model.n_species))
    head = (model.h**2 + xis0) / (b_arr - d[0]) ** 2
    for r in range(1, k + 1):
        integral = parisi_phi_integral(pair, model, b_arr, r)
        res_b[r - 1] = pair.q[r - 1] - (head + integral)
    return res_a, res_b


def bridge_residual(pair, model, b):
    """b^s - d^s(q_r) - 1/Delta^s(q_r) at every atom; all zero forces
    A = B exactly."""
    b_arr = b.b if isinstance(b, BAssignment) else np.asarray(b, float)
    k = pair.k
    d = d_at_atoms(pair, model)[1:k + 1]
    delta = delta_at_atoms(pair)[:k]
    return b_arr[None, :] - d - 1.0 / delta


def compute_residuals(pair, model, b, h3strict_ok=True):
    res_a, res_b = parisi_identity_residuals(pair, model, b)
    a_val = eval_A(pair, model, b)
    b_val = eval_B(pair, model)
    return ResidualBlock(
        cs=cs_identity_residual(pair, model),
        parisi_a=res_a,
        parisi_b=res_b,
        bridge=bridge_residual(pair, model, b),
        ab_gap=abs(a_val - b_val),
        parisi_b_advisory=not h3strict_ok,
    )


def _strictly_increases(pair, s, r0, r1, tol):
    return pair.q[r1, s] - pair.q[r0, s] > tol


def _pair_simultaneous(pair, s, t, tol):
    masses = pair.masses()
    atoms = [r for r in range(pair.k) if masses[r] >= MASS_FLOOR]
    for i, j in itertools.combinations(atoms, 2):
        inc_s = _strictly_increases(pair, s, i, j, tol)
        inc_t = _strictly_increases(pair, t, i, j, tol)
        if inc_s != inc_t:
            return False
    return True


def classify_rsb(pair, model, merge_tol=DEFAULT_MERGE_TOL):
    """Per-species RSB level plus the simultaneity partition.

    Simultaneity is decided atomwise: two species are in the same class iff
    strict increase of one map between support atoms always coincides with
    strict increase of the other.  For each simultaneous pair the increasing
    support bijection is emitted and checked to be mass-preserving.
    """
    n = model.n_species
    supports, masses = [], []
    for s in range(n):
        v, w = pushforward_atoms(pair, s, merge_tol)
        supports.append(v)
        masses.append(w)
    levels = [len(v) - 1 for v in supports]
    labels = ["RS" if lv == 0 else f"{lv}-RSB" for lv in levels]

    # simultaneity is transitive, so classes are connected components
    adj = {s: set() for s in range(n)}
    for s, t in itertools.combinations(range(n), 2):
        if _pair_simultaneous(pair, s, t, merge_tol):
            adj[s].add(t)
            adj[t].add(s)
    partition = []
    seen = set()
    for s in range(n):
        if s in seen:
            continue
        comp, stack = [], [s]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            comp.append(u)
            stack.extend(adj[u] - seen)
        partition.append(sorted(comp))

    bijections = {}
    for cls in partition:
        for s, t in itertools.combinations(cls, 2):
            if len(supports[s]) != len(supports[t]):
                raise AssertionError(
                    "simultaneous species with unequal support sizes"
                )
            pairs = list(zip(supports[s], supports[t]))
            if not np.allclose(masses[s], masses[t], atol=1e-8):
                raise AssertionError("support bijection not mass-preserving")
            bijections[(s, t)] = pairs
    return ClassificationReport(
        supports=supports,
        support_masses=masses,
        rsb_levels=levels,
        labels=labels,
        partition=partition,
        bijections=bijections,
    )


# hypothesis-check statuses, strongest first
QUADRATIC_COUPLING = "QuadraticCoupling"
GRID_VERIFIED = "GridVerified"
VERIFIED_AT_MINIMIZER = "VerifiedAtMinimizer"
NOT_VERIFIED = "NotVerified"

_GRID_STEP = 0.02
_POS_TOL = 1e-12


def _has_quadratic_cross(model, s, t):
    for p, coeffs in model.terms:
        if p != 2:
            continue
        if coeffs.get((s, t), 0.0) > 0 or coeffs.get((t, s), 0.0) > 0:
            return True
    return False


def _grid_points(n, step=_GRID_STEP):
    axis = np.arange(0.0, 1.0 + step / 2, step)
    return itertools.product(axis, repeat=n)


def _grid_condition_pair(model, s, t):
    """Strict positivity of d(xi^s)/d(q^t) on the required region."""
    ext = s_ext(model)
    for point in _grid_points(model.n_species):
        q = np.array(point)
        if not (q[s] > 0 or q[t] > 0):
            continue
        if any(q[r] <= 0 for r in ext):
            continue
        if cross_derivative(model, s, t, q) <= _POS_TOL:
            return False
    return True


def _grid_condition_chain(model, tee, s):
    """Chained condition: max_t d(xi^s)/d(q^t) > 0 on the chained region."""
    ext = s_ext(model)
    for point in _grid_points(model.n_species):
        q = np.array(point)
        if not (q[s] > 0 or min(q[t] for t in tee) > 0):
            continue
        if any(q[r] <= 0 for r in ext):
            continue
        if max(cross_derivative(model, s, t, q) for t in tee) <= _POS_TOL:
            return False
    return True


def _minimizer_condition_pair(model, s, t, pair):
    masses = pair.masses()
    for r in range(pair.k):
        if masses[r] < MASS_FLOOR:
            continue
        q = pair.q[r]
        if not (q[s] > 0 or q[t] > 0):
            continue
        if cross_derivative(model, s, t, q) <= _POS_TOL:
            return False
    return True


def check_simultaneity_hypothesis(model, species, minimizer=None):
    """Strongest verifiable simultaneity status for a species pair or set.

    Pair mode: ``QuadraticCoupling`` if the two species share a positive
    quadratic coefficient; else ``GridVerified`` if the cross-derivative
    condition holds on a sampled grid; else ``VerifiedAtMinimizer`` when a
    minimizer is supplied and the condition holds at its atoms; else
    ``NotVerified``.

    Set mode (three or more species): verifies pairs first, then closes the
    set by chaining, adding one species at a time via the chained grid
    condition.
    """
    species = [int(x) for x in species]
    if len(species) < 2:
        raise ValueError("need at least two species")
    if len(species) == 2:
        s, t = species
        if _has_quadratic_cross(model, s, t):
            return QUADRATIC_COUPLING
        if _grid_condition_pair(model, s, t):
            return GRID_VERIFIED
        if minimizer is not None and _minimizer_condition_pair(
            model, s, t, minimizer
        ):
            return VERIFIED_AT_MINIMIZER
        return NOT_VERIFIED

    # set mode
    if all(
        _has_quadratic_cross(model, s, t)
        for s, t in itertools.combinations(species, 2)
    ):
        return QUADRATIC_COUPLING
    verified = None
    for s, t in itertools.combinations(species, 2):
        if check_simultaneity_hypothesis(model, (s, t)) in (
            QUADRATIC_COUPLING,
            GRID_VERIFIED,
        ):
            verified = {s, t}
            break
    if verified is None:
        return NOT_VERIFIED
    remaining = [x for x in species if x not in verified]
    progress = True
    while remaining and progress:
        progress = False
        for x in list(remaining):
            if _grid_condition_chain(model, sorted(verified), x):
                verified.add(x)
                remaining.remove(x)
                progress = True
    return GRID_VERIFIED if not remaining else NOT_VERIFIED
