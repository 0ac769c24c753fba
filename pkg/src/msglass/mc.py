"""Small-N Monte Carlo estimate of the free energy.

The disorder realization uses the extensive normalization: the Hamiltonian's
covariance is N * xi(R), matching the extensive external-field term (the
variational formulas are stated per spin).  The estimator is a plain average
of exp(H + field) over configurations drawn uniformly on the product of
spheres, combined with log-sum-exp; it is only trusted at weak disorder.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import MixtureModel, eval_xi

MAX_P = 4
MAX_N = 128

_EINSUM_LETTERS = "ijkl"


class McGuardError(ValueError):
    pass


@dataclass(frozen=True)
class McConfig:
    n_total: int
    samples: int
    seed: int = 0
    batch_size: int = 0  # 0 -> samples // 20

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("need at least one sample")

    def resolved_batch(self):
        bs = self.batch_size or max(1, self.samples // 20)
        return min(bs, self.samples)


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    annealed_ref: float
    variational: float | None = None
    meta: dict | None = None

    def to_dict(self):
        out = {
            "value": self.value,
            "stderr": self.stderr,
            "annealed_ref": self.annealed_ref,
        }
        if self.variational is not None:
            out["variational"] = self.variational
            out["gap"] = self.value - self.variational
            if self.stderr > 0:
                out["gap_sigma"] = (self.value - self.variational) / self.stderr
        if self.meta:
            out["meta"] = self.meta
        return out


def species_sizes(model, n_total):
    """Integer per-species sizes N^s ~ lam^s * N, adjusted to sum to N."""
    n = model.n_species
    if n_total < n:
        raise ValueError("N must be at least the number of species")
    sizes = np.maximum(1, np.round(model.lam * n_total).astype(int))
    while sizes.sum() != n_total:
        # push the largest rounding error toward the target
        err = model.lam * n_total - sizes
        if sizes.sum() < n_total:
            sizes[np.argmax(err)] += 1
        else:
            cand = np.where(sizes > 1, err, np.inf)
            sizes[np.argmin(cand)] -= 1
    return sizes


def empirical_lambda_model(model, sizes, n_total):
    """Model with lambda replaced by the realized ratios N^s / N."""
    lam_hat = sizes / n_total
    return MixtureModel(model.species, lam_hat, model.h, model.terms)


def sample_hamiltonian(model, mc: McConfig, rng):
    """Draw one disorder realization; returns an evaluator over batches.

    For each interaction entry (ordered tuple with coefficient c) an
    independent standard Gaussian array g is drawn and contributes
    sqrt(c) * N^{(1-p)/2} * sum_idx g * sigma(s_1) ... sigma(s_p).
    The evaluator maps {species -> (batch, N^s)} to H values, shape (batch,).
    """
    n_total = mc.n_total
    sizes = species_sizes(model, n_total)
    pieces = []
    for p, coeffs in model.terms:
        if p > MAX_P:
            raise McGuardError(f"tensor degree p={p} exceeds guard {MAX_P}")
        if n_total > MAX_N:
            raise McGuardError(f"N={n_total} exceeds guard {MAX_N}")
        for tup, c in sorted(coeffs.items()):
            if c <= 0:
                continue
            shape = tuple(int(sizes[s]) for s in tup)
            g = rng.standard_normal(shape)
            scale = np.sqrt(c) * n_total ** ((1 - p) / 2.0)
            pieces.append((tup, g, scale))

    def evaluate(sigma):
        nb = next(iter(sigma.values())).shape[0] if sigma else 0
        out = np.zeros(nb)
        for tup, g, scale in pieces:
            p = len(tup)
            if p == 1:
                out += scale * sigma[tup[0]] @ g
            elif p == 2:
                out += scale * np.sum(
                    (sigma[tup[0]] @ g) * sigma[tup[1]], axis=1
                )
            else:
                letters = _EINSUM_LETTERS[:p]
                spec = (
                    letters
                    + ","
                    + ",".join(f"b{c}" for c in letters)
                    + "->b"
                )
                out += scale * np.einsum(
                    spec, g, *(sigma[tup[j]] for j in range(p)), optimize=True
                )
        return out

    return evaluate, sizes


def _sphere_batch(rng, batch, sizes):
    """Uniform samples on the product of spheres, radius sqrt(N^s)."""
    sigma = {}
    for s, ns in enumerate(sizes):
        x = rng.standard_normal((batch, int(ns)))
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        sigma[s] = x / norms * np.sqrt(ns)
    return sigma


def _max_workers():
    env = os.environ.get("MSSG_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def estimate_F(model, mc: McConfig) -> McEstimate:
    """Free-energy estimate with jackknife standard error over batches.

    Deterministic for a fixed seed: the disorder uses stream (seed, 0) and
    batch b uses stream (seed, 1 + b), reduced in batch order regardless of
    the worker count.
    """
    evaluate, sizes = sample_hamiltonian(
        model, mc, np.random.default_rng([mc.seed, 0])
    )
    emp = empirical_lambda_model(model, sizes, mc.n_total)
    bs = mc.resolved_batch()
    n_batches = mc.samples // bs
    total = n_batches * bs
    field = emp.h  # per-species field strengths

    def one_batch(b):
        rng = np.random.default_rng([mc.seed, 1 + b])
        sigma = _sphere_batch(rng, bs, sizes)
        vals = evaluate(sigma)
        for s in range(emp.n_species):
            if field[s] != 0.0:
                vals = vals + field[s] * np.sum(sigma[s], axis=1)
        return logsumexp(vals)

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        lses = list(pool.map(one_batch, range(n_batches)))
    # per-batch log-means; keeps the zero-Hamiltonian case exactly zero
    lses = np.asarray(lses) - np.log(bs)

    n = mc.n_total
    value = (logsumexp(lses) - np.log(n_batches)) / n
    if n_batches > 1:
        # delete-one-batch jackknife
        loo = np.array(
            [
                (logsumexp(np.delete(lses, i)) - np.log(n_batches - 1)) / n
                for i in range(n_batches)
            ]
        )
        stderr = float(
            np.sqrt((n_batches - 1) / n_batches * np.sum((loo - loo.mean()) ** 2))
        )
    else:
        stderr = 0.0

    ones = np.ones(emp.n_species)
    annealed = eval_xi(emp, ones) / 2.0 + float(
        np.sum(emp.lam * emp.h**2 / 2.0)
    )
    meta = {
        "normalization": "extensive: Cov[H] = N * xi(R)",
        "N": n,
        "samples": total,
        "batches": n_batches,
        "seed": mc.seed,
        "empirical_lambda": (sizes / n).tolist(),
    }
    return McEstimate(
        value=float(value), stderr=stderr, annealed_ref=float(annealed),
        meta=meta,
    )
