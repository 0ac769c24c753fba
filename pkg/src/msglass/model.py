"""Covariance functions built from finite interaction mixtures.

A model is a finite list of species, each with a weight ``lambda`` and an
external field ``h``, together with a finite list of interaction terms.  A
degree-p term is a symmetric nonnegative tensor of coefficients indexed by
ordered species p-tuples.  The covariance is the polynomial

    xi(q) = sum_terms sum_tuples c * lam[s1]*...*lam[sp] * q[s1]*...*q[sp].
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

LAMBDA_SUM_TOL = 1e-12
_EIG_TOL = 1e-10


class ModelValidationError(ValueError):
    pass


@dataclass(frozen=True)
class PackedModel:
    """Flat array view of the interaction terms, consumed by the kernels.

    ``ent_off[e]:ent_off[e+1]`` slices ``ent_sp`` into the ordered species
    indices of entry ``e``; ``ent_c[e]`` is the coefficient already multiplied
    by the product of the species weights.
    """

    lam: np.ndarray
    h: np.ndarray
    ent_off: np.ndarray
    ent_sp: np.ndarray
    ent_c: np.ndarray


class MixtureModel:
    """Immutable multi-species mixture model.

    Parameters
    ----------
    species : sequence of str
        Species identifiers, order fixes the coordinate convention.
    lam : sequence of float
        Per-species weights in (0, 1], summing to 1.
    h : sequence of float
        Per-species external fields, >= 0.
    terms : sequence of (p, coeffs)
        ``coeffs`` maps ordered species-index p-tuples to nonnegative
        coefficients and must contain every permutation of each tuple it
        mentions, with equal values (use :func:`expand_orbit` or the JSON
        loader to build this from one representative per orbit).
    """

    def __init__(self, species, lam, h, terms):
        self.species = tuple(str(s) for s in species)
        n = len(self.species)
        if n < 1:
            raise ModelValidationError("need at least one species")
        if len(set(self.species)) != n:
            raise ModelValidationError("duplicate species names")
        self.lam = np.asarray(lam, dtype=float)
        self.h = np.asarray(h, dtype=float)
        if self.lam.shape != (n,) or self.h.shape != (n,):
            raise ModelValidationError("lambda/h length mismatch with species")
        if np.any(self.lam <= 0) or np.any(self.lam > 1):
            raise ModelValidationError("lambda entries must lie in (0, 1]")
        if abs(self.lam.sum() - 1.0) > LAMBDA_SUM_TOL:
            raise ModelValidationError(
                f"lambda must sum to 1 (got {self.lam.sum()!r})"
            )
        if np.any(self.h < 0):
            raise ModelValidationError("fields must be nonnegative")

        self.terms = []
        for p, coeffs in terms:
            p = int(p)
            if p < 1:
                raise ModelValidationError("term degree must be >= 1")
            clean = {}
            for tup, c in coeffs.items():
                tup = tuple(int(i) for i in tup)
                if len(tup) != p or any(i < 0 or i >= n for i in tup):
                    raise ModelValidationError(f"bad index tuple {tup}")
                c = float(c)
                if c < 0:
                    raise ModelValidationError("coefficients must be >= 0")
                if c > 0:
                    clean[tup] = c
            for tup, c in clean.items():
                for perm in itertools.permutations(tup):
                    if abs(clean.get(perm, -1.0) - c) > 1e-12 * (1 + abs(c)):
                        raise ModelValidationError(
                            f"tensor not symmetric at {tup} vs {perm}"
                        )
            self.terms.append((p, clean))

        self._packed = _pack(self)

    @property
    def n_species(self):
        return len(self.species)

    def species_index(self, name):
        return self.species.index(name)

    def packed(self) -> PackedModel:
        return self._packed

    def scaled(self, factor):
        """New model with every interaction coefficient multiplied by ``factor``."""
        if factor < 0:
            raise ModelValidationError("scale factor must be >= 0")
        terms = [
            (p, {tup: c * factor for tup, c in coeffs.items()})
            for p, coeffs in self.terms
        ]
        return MixtureModel(self.species, self.lam, self.h, terms)

    def to_dict(self):
        return {
            "species": [
                {"name": s, "lambda": float(l), "h": float(f)}
                for s, l, f in zip(self.species, self.lam, self.h)
            ],
            "terms": [
                {
                    "p": p,
                    "entries": [
                        {"tuple": [self.species[i] for i in tup], "coeff": c}
                        for tup, c in sorted(coeffs.items())
                    ],
                }
                for p, coeffs in self.terms
            ],
        }


def _pack(model: MixtureModel) -> PackedModel:
    offs = [0]
    sps = []
    cs = []
    for p, coeffs in model.terms:
        for tup, c in sorted(coeffs.items()):
            sps.extend(tup)
            cs.append(c * float(np.prod(model.lam[list(tup)])))
            offs.append(offs[-1] + p)
    return PackedModel(
        lam=model.lam,
        h=model.h,
        ent_off=np.asarray(offs, dtype=np.int32),
        ent_sp=np.asarray(sps, dtype=np.int32),
        ent_c=np.asarray(cs, dtype=float),
    )


def expand_orbit(tup, coeff):
    """Map one orbit representative to all its ordered permutations."""
    return {perm: coeff for perm in set(itertools.permutations(tuple(tup)))}


def _check_domain(model, q):
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n_species,):
        raise ValueError(f"q must have shape ({model.n_species},)")
    if np.any(q < 0) or np.any(q > 1):
        raise ValueError(f"q outside [0,1]^n: {q}")
    return q


def eval_xi(model, q):
    """Covariance polynomial xi at an overlap vector q in [0,1]^n."""
    q = _check_domain(model, q)
    pk = model.packed()
    total = 0.0
    for e in range(len(pk.ent_c)):
        idx = pk.ent_sp[pk.ent_off[e]:pk.ent_off[e + 1]]
        total += pk.ent_c[e] * np.prod(q[idx])
    return float(total)


def eval_xi_s(model, q):
    """Per-species derivatives xi^s(q) = (1/lam^s) d(xi)/d(q^s)."""
    q = _check_domain(model, q)
    pk = model.packed()
    out = np.zeros(model.n_species)
    for e in range(len(pk.ent_c)):
        idx = pk.ent_sp[pk.ent_off[e]:pk.ent_off[e + 1]]
        vals = q[idx]
        for j in range(len(idx)):
            prod_others = np.prod(np.delete(vals, j))
            out[idx[j]] += pk.ent_c[e] * prod_others
    return out / model.lam


def eval_theta(model, q):
    """theta(q) = q . grad xi(q) - xi(q), nonnegative on [0,1]^n."""
    q = _check_domain(model, q)
    xis = eval_xi_s(model, q)
    return float(np.sum(q * model.lam * xis) - eval_xi(model, q))


def hessian_xi(model, q):
    """Symmetric matrix of second partials of xi at q."""
    q = _check_domain(model, q)
    pk = model.packed()
    n = model.n_species
    out = np.zeros((n, n))
    for e in range(len(pk.ent_c)):
        idx = pk.ent_sp[pk.ent_off[e]:pk.ent_off[e + 1]]
        p = len(idx)
        if p < 2:
            continue
        vals = q[idx]
        for j in range(p):
            for j2 in range(p):
                if j2 == j:
                    continue
                mask = np.ones(p, dtype=bool)
                mask[j] = mask[j2] = False
                out[idx[j], idx[j2]] += pk.ent_c[e] * np.prod(vals[mask])
    return out


def cross_derivative(model, s, t, q):
    """d(xi^s)/d(q^t) at q, i.e. the (s,t) Hessian entry divided by lam^s."""
    return hessian_xi(model, q)[s, t] / model.lam[s]


def check_convexity(model, mode="H3", grid_resolution=10):
    """Grid-sampled Hessian eigenvalue check on [0,1]^n.

    ``H3`` requires all eigenvalues >= -1e-10 everywhere; ``H3strict``
    requires the smallest eigenvalue > 1e-10 at every sampled q != 0.
    Returns ``(True, None)`` or ``(False, witness_q)``.
    """
    if mode not in ("H3", "H3strict"):
        raise ValueError(f"unknown mode {mode!r}")
    g = int(grid_resolution)
    if g < 2:
        raise ValueError("grid_resolution must be >= 2")
    n = model.n_species
    axis = np.linspace(0.0, 1.0, g + 1)
    for point in itertools.product(axis, repeat=n):
        q = np.array(point)
        if mode == "H3strict" and not np.any(q > 0):
            continue
        w = np.linalg.eigvalsh(hessian_xi(model, q))
        if mode == "H3":
            if w[0] < -_EIG_TOL:
                return False, q
        else:
            if w[0] <= _EIG_TOL:
                return False, q
    return True, None


def s_ext(model):
    """Indices of species with a nonzero external field."""
    return [s for s in range(model.n_species) if model.h[s] ** 2 > 0]


def load_model(source):
    """Build a MixtureModel from a JSON config (path, file object, or dict).

    Each term entry lists one representative species tuple; the loader expands
    it to all permutations of the orbit.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)

    try:
        species = [entry["name"] for entry in doc["species"]]
        lam = [entry["lambda"] for entry in doc["species"]]
        h = [entry.get("h", 0.0) for entry in doc["species"]]
    except (KeyError, TypeError) as exc:
        raise ModelValidationError(f"bad species block: {exc}") from exc

    name_to_idx = {name: i for i, name in enumerate(species)}
    terms = []
    for term in doc.get("terms", []):
        try:
            p = int(term["p"])
            coeffs = {}
            for entry in term["entries"]:
                tup = tuple(name_to_idx[nm] for nm in entry["tuple"])
                if len(tup) != p:
                    raise ModelValidationError(
                        f"tuple {entry['tuple']} has length != p={p}"
                    )
                expanded = expand_orbit(tup, float(entry["coeff"]))
                for perm, c in expanded.items():
                    if perm in coeffs and abs(coeffs[perm] - c) > 1e-12:
                        raise ModelValidationError(
                            f"conflicting coefficients for orbit of {tup}"
                        )
                    coeffs[perm] = c
            terms.append((p, coeffs))
        except KeyError as exc:
            raise ModelValidationError(f"bad term block: missing {exc}") from exc
    return MixtureModel(species, lam, h, terms)


def single_species_pspin(beta2_coeffs, h=0.0):
    """Convenience builder: one species, xi(q) = sum_p c_p q^p.

    ``beta2_coeffs`` maps degree p to the coefficient of q^p.
    """
    terms = [(p, {tuple([0] * p): c}) for p, c in sorted(beta2_coeffs.items())]
    return MixtureModel(["s"], [1.0], [h], terms)
