"""Finitely-supported order parameters for the variational formulas.

A :class:`DiscretePair` encodes a measure on [0,1] with atoms at the weighted
locations q_r = sum_s lam^s q_r^s, together with the per-species coordinates
of each atom.  Between atoms the species maps are piecewise linear, which
makes every integral appearing in the functionals closed-form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MASS_FLOOR = 1e-10
DEFAULT_MERGE_TOL = 1e-6


class PairValidationError(ValueError):
    pass


@dataclass(frozen=True)
class DiscretePair:
    """Cumulative weights ``m`` (shape (k,), strictly increasing to 1) and
    atom coordinates ``q`` (shape (k, n_species), columnwise nondecreasing).

    Sentinel rows q_0 = 0 and q_{k+1} = 1 are implicit; ``extended_q`` makes
    them explicit.
    """

    m: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(np.atleast_1d(np.asarray(self.m, dtype=float)))
        q = np.asarray(self.q, dtype=float)
        if q.ndim == 1:
            q = q[:, None]
        q = np.ascontiguousarray(q)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "q", q)
        k = m.shape[0]
        if q.shape[0] != k:
            raise PairValidationError("weights and points length mismatch")
        if k < 1:
            raise PairValidationError("need at least one atom")
        if not (m[0] > 0 and abs(m[-1] - 1.0) <= 1e-12):
            raise PairValidationError("weights must start > 0 and end at 1")
        if np.any(np.diff(m) <= 0):
            raise PairValidationError("weights must be strictly increasing")
        if np.any(q < -1e-15) or np.any(q > 1 + 1e-15):
            raise PairValidationError("points must lie in [0, 1]")
        if np.any(np.diff(q, axis=0) < -1e-12):
            raise PairValidationError("point columns must be nondecreasing")

    @property
    def k(self):
        return self.m.shape[0]

    @property
    def n_species(self):
        return self.q.shape[1]

    def extended_q(self):
        """Points with the sentinel rows 0 and 1 attached, shape (k+2, n)."""
        n = self.n_species
        return np.ascontiguousarray(
            np.vstack([np.zeros(n), self.q, np.ones(n)])
        )

    def masses(self):
        """Individual atom masses m_r - m_{r-1}."""
        return np.diff(np.concatenate(([0.0], self.m)))

    def atom_locations(self, lam):
        """Atom positions q_r = sum_s lam^s q_r^s of the encoded measure."""
        return self.q @ np.asarray(lam, dtype=float)

    def to_dict(self, species):
        return {
            "m": self.m.tolist(),
            "points": {
                name: self.q[:, i].tolist() for i, name in enumerate(species)
            },
        }

    @classmethod
    def from_dict(cls, doc, species):
        pts = doc["points"]
        q = np.column_stack([np.asarray(pts[name], dtype=float) for name in species])
        return cls(np.asarray(doc["m"], dtype=float), q)

    @classmethod
    def point_mass(cls, q_row):
        """k = 1 pair: full mass on a single atom."""
        return cls(np.array([1.0]), np.atleast_1d(np.asarray(q_row, float))[None, :])


@dataclass(frozen=True)
class PairMetricView:
    """Step-function view z -> Phi(Q_zeta(z)) over (m_{r-1}, m_r]."""

    pair: DiscretePair
    lam: np.ndarray = field(default=None)

    def __call__(self, z):
        r = np.searchsorted(self.pair.m, z, side="left")
        r = np.clip(r, 0, self.pair.k - 1)
        return self.pair.q[r]


def delta_at_atoms(pair, lam=None):
    """Delta^s_r = sum_{l>=r} m_l (q^s_{l+1} - q^s_l) for r = 1..k+1.

    Returns shape (k+1, n); the final row is the zero convention at r = k+1.
    Note Delta^s(0) equals the first row (the leading zero-mass segment
    contributes nothing).  ``lam`` is unused but kept for signature symmetry
    with the other atom maps.
    """
    qe = pair.extended_q()
    k = pair.k
    incr = pair.m[:, None] * (qe[2:k + 2] - qe[1:k + 1])
    out = np.zeros((k + 1, pair.n_species))
    out[:k] = np.cumsum(incr[::-1], axis=0)[::-1]
    return out


def d_at_atoms(pair, model):
    """d^s at q = 0 and at every atom, d^s_r for r = 0..k+1, shape (k+2, n).

    d^s_r = sum_{l>=r} m_l (xi^s(q_{l+1}) - xi^s(q_l)); row 0 duplicates row 1
    because the measure puts no mass below the first atom, and the final row
    is zero.
    """
    from .model import eval_xi_s

    qe = pair.extended_q()
    k = pair.k
    xis = np.array([eval_xi_s(model, qe[r]) for r in range(k + 2)])
    incr = pair.m[:, None] * (xis[2:k + 2] - xis[1:k + 1])
    out = np.zeros((k + 2, pair.n_species))
    out[1:k + 1] = np.cumsum(incr[::-1], axis=0)[::-1]
    out[0] = out[1]
    return out


def pushforward_support(pair, species, merge_tol=DEFAULT_MERGE_TOL):
    """Distinct overlap values of one species' pushforward measure.

    Atoms with mass below the noise floor are dropped; values within
    ``merge_tol`` are merged to their mass-weighted mean.  Returns a strictly
    increasing list.
    """
    values, _ = pushforward_atoms(pair, species, merge_tol)
    return values


def pushforward_atoms(pair, species, merge_tol=DEFAULT_MERGE_TOL):
    """Support values and their masses for one species, after merging."""
    if merge_tol < 0:
        raise ValueError("merge_tol must be >= 0")
    vals = pair.q[:, species]
    masses = pair.masses()
    keep = masses >= MASS_FLOOR
    vals, masses = vals[keep], masses[keep]
    out_v, out_m = [], []
    for v, w in zip(vals, masses):
        if out_v and v - out_v[-1] <= merge_tol:
            tot = out_m[-1] + w
            out_v[-1] = (out_v[-1] * out_m[-1] + v * w) / tot
            out_m[-1] = tot
        else:
            out_v.append(float(v))
            out_m.append(float(w))
    return out_v, out_m


def common_grid(pair1, pair2):
    """Refine both pairs onto the union of their cumulative-weight grids.

    Returns (weights, rows1, rows2) where ``weights`` are interval masses and
    rows map each interval to the covering atom's coordinate row.
    """
    grid = np.unique(np.concatenate((pair1.m, pair2.m)))
    grid = grid[grid > 0]
    idx1 = np.searchsorted(pair1.m, grid - 1e-15, side="left")
    idx2 = np.searchsorted(pair2.m, grid - 1e-15, side="left")
    idx1 = np.clip(idx1, 0, pair1.k - 1)
    idx2 = np.clip(idx2, 0, pair2.k - 1)
    w = np.diff(np.concatenate(([0.0], grid)))
    return w, pair1.q[idx1], pair2.q[idx2]


def pseudometric(pair1, pair2, lam=None):
    """Wasserstein-1 distance between the encoded measures on [0,1]^n.

    Computed on the common refinement of the weight grids:
    sum_l (m_l - m_{l-1}) ||q_l - p_l||_1.
    """
    if pair1.n_species != pair2.n_species:
        raise ValueError("species mismatch between pairs")
    w, rows1, rows2 = common_grid(pair1, pair2)
    return float(np.sum(w * np.sum(np.abs(rows1 - rows2), axis=1)))


def zeta_cdf(pair, lam, q):
    """zeta([0, q]) for the measure with atoms at the weighted locations."""
    locs = pair.atom_locations(lam)
    r = np.searchsorted(locs, q, side="right")
    return 0.0 if r == 0 else float(pair.m[r - 1])


def ibp_quantile_check(pair, lam, f, q):
    """Both sides of the quantile integration-by-parts identity.

    lhs = int_q^1 zeta([0,u]) f'(u) du,
    rhs = f(1) - zeta([0,q]) f(q) - int_{zeta([0,q])}^1 f(Q_zeta(z)) dz.

    Because zeta is finitely supported both sides reduce to finite sums of
    values of ``f`` (no quadrature); f must be Lipschitz and nondecreasing for
    the identity to hold.
    """
    lam = np.asarray(lam, dtype=float)
    locs = pair.atom_locations(lam)
    k = pair.k
    # lhs: zeta([0,u]) = m_r on [locs_r, locs_{r+1}); telescoping via FTC
    lhs = 0.0
    bounds = np.concatenate((locs, [1.0]))
    for r in range(k):
        lo = max(q, bounds[r])
        hi = max(q, bounds[r + 1])
        if hi > lo:
            lhs += pair.m[r] * (f(hi) - f(lo))

    z0 = zeta_cdf(pair, lam, q)
    rhs = f(1.0) - z0 * f(q)
    m_lo = np.concatenate(([0.0], pair.m[:-1]))
    for r in range(k):
        lo = max(z0, m_lo[r])
        hi = max(z0, pair.m[r])
        if hi > lo:
            rhs -= (hi - lo) * f(locs[r])
    return lhs, rhs


def split_atom(pair, r, frac=0.5):
    """Split atom ``r`` (0-based) into two co-located atoms.

    The cumulative weight grid gains one point; the encoded measure is
    unchanged, so all functionals must be invariant under this operation.
    """
    if not 0 < frac < 1:
        raise ValueError("frac must be in (0,1)")
    w = pair.masses()[r]
    m_lo = (pair.m[r - 1] if r > 0 else 0.0) + frac * w
    m = np.insert(pair.m, r, m_lo)
    q = np.insert(pair.q, r, pair.q[r], axis=0)
    return DiscretePair(m, q)


def merge_atoms(pair, merge_tol=DEFAULT_MERGE_TOL, mass_floor=MASS_FLOOR):
    """Collapse nearly co-located atoms and drop negligible masses.

    Adjacent atoms whose coordinate rows agree within ``merge_tol`` in every
    species are replaced by their mass-weighted mean row.
    """
    masses = pair.masses()
    rows = [pair.q[0].copy()]
    ws = [masses[0]]
    for r in range(1, pair.k):
        if np.max(np.abs(pair.q[r] - rows[-1])) <= merge_tol:
            tot = ws[-1] + masses[r]
            if tot > 0:
                rows[-1] = (rows[-1] * ws[-1] + pair.q[r] * masses[r]) / tot
            ws[-1] = tot
        else:
            rows.append(pair.q[r].copy())
            ws.append(masses[r])
    keep = [i for i, w in enumerate(ws) if w >= mass_floor]
    if not keep:
        keep = [int(np.argmax(ws))]
    rows = [rows[i] for i in keep]
    ws = np.array([ws[i] for i in keep])
    ws = ws / ws.sum()
    # re-impose monotone columns lost to weighted averaging at tol scale
    q = np.maximum.accumulate(np.vstack(rows), axis=0)
    return DiscretePair(np.cumsum(ws), q)


def save_pair(pair, species, path):
    with open(path, "w") as fh:
        json.dump(pair.to_dict(species), fh, indent=2)


def load_pair(source, species):
    if hasattr(source, "read"):
        doc = json.load(source)
    elif isinstance(source, dict):
        doc = source
    else:
        with open(source) as fh:
            doc = json.load(fh)
    return DiscretePair.from_dict(doc, species)
