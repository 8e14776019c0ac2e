"""Brute-force identifiability oracle.

Enumerates every soluble subset of the required size, finds the maximally
uniform distribution over them (the convex program minimizing the squared
frequency norm sum_i W_i^2), and draws candidate lists from it.  Exists for
verification of the efficient pipeline on small instances, not performance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .datagen import Dataset, round_half_away
from .prng import substream
from .rounding import CandidateEntry, CandidateList

ENUMERATION_GUARD = 10**6


class GuardExceeded(RuntimeError):
    """Combinatorial enumeration would exceed the configured budget."""


@dataclass
class SolubleSet:
    indices: tuple[int, ...]
    ell: np.ndarray
    residual: float


@dataclass
class SubsetDistribution:
    support: list[SolubleSet]
    probabilities: np.ndarray
    W: np.ndarray  # W_i = sum over sets containing i of mu(set)

    def to_dict(self) -> dict:
        return {
            "support": [
                {"indices": list(s.indices), "ell": s.ell.tolist(), "residual": s.residual}
                for s in self.support
            ],
            "probabilities": self.probabilities.tolist(),
            "W": self.W.tolist(),
        }


def solubility_tolerance(ds: Dataset) -> float:
    """Max per-equation residual defining solubility: exact for noiseless
    data, the 4*zeta feasibility box otherwise."""
    return 1e-9 if ds.zeta == 0.0 else 4.0 * ds.zeta


def enumerate_soluble(
    ds: Dataset, size: int, tol: float | None = None
) -> list[SolubleSet]:
    """All size-subsets admitting a common linear solution within tol."""
    n, d = ds.n, ds.d
    total = math.comb(n, size)
    if total > ENUMERATION_GUARD:
        raise GuardExceeded(
            f"C({n},{size}) = {total} exceeds {ENUMERATION_GUARD}; use a smaller n"
        )
    if size < d:
        warnings.warn(
            "subset size below dimension: systems are under-determined, "
            "keeping minimum-norm solutions"
        )
    if tol is None:
        tol = solubility_tolerance(ds)
    out = []
    for subset in combinations(range(n), size):
        idx = list(subset)
        A = ds.X[idx]
        b = ds.y[idx]
        ell, *_ = np.linalg.lstsq(A, b, rcond=None)
        resid = float(np.max(np.abs(A @ ell - b))) if size else 0.0
        if resid <= tol:
            out.append(SolubleSet(indices=subset, ell=ell, residual=resid))
    return out


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def max_uniform_distribution(
    sets: list[SolubleSet], n: int, max_iter: int = 100000, tol: float = 1e-9
) -> SubsetDistribution:
    """Distribution over soluble sets minimizing sum_i W_i^2.

    Projected gradient with exact simplex projection and step 1/L, followed
    by an exact KKT polish on the identified support so the frequency vector
    W is resolved to near machine precision.
    """
    if not sets:
        raise ValueError("need at least one soluble set")
    # collapse duplicate index sets before optimizing
    seen: dict[tuple, SolubleSet] = {}
    for s in sets:
        seen.setdefault(tuple(sorted(s.indices)), s)
    sets = list(seen.values())
    m = len(sets)
    M = np.zeros((m, n))
    for k, s in enumerate(sets):
        M[k, list(s.indices)] = 1.0
    Q = M @ M.T
    L = float(np.linalg.norm(M, 2)) ** 2
    mu = np.full(m, 1.0 / m)
    obj = float(mu @ Q @ mu)
    for _ in range(max_iter):
        mu_new = _project_simplex(mu - (2.0 / (2.0 * L)) * (Q @ mu))
        new_obj = float(mu_new @ Q @ mu_new)
        mu = mu_new
        if abs(obj - new_obj) <= tol * max(1.0, abs(obj)):
            obj = new_obj
            break
        obj = new_obj

    # KKT polish: solve the equality-constrained QP on the active support
    support = mu > 1e-10
    S = np.flatnonzero(support)
    if len(S) > 0:
        Qs = Q[np.ix_(S, S)]
        k = len(S)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * Qs
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        try:
            solvec = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            cand = np.zeros(m)
            cand[S] = solvec[:k]
            if cand.min() >= -1e-12:
                cand = np.maximum(cand, 0.0)
                cand /= cand.sum()
                if float(cand @ Q @ cand) <= obj + 1e-12:
                    mu = cand
        except np.linalg.LinAlgError:
            pass
    W = M.T @ mu
    return SubsetDistribution(support=sets, probabilities=mu, W=W)


def identifiability_list(
    ds: Dataset, mu: SubsetDistribution, draws: int, seed: int
) -> CandidateList:
    """`draws` i.i.d. soluble sets from mu; the list of their solutions."""
    rng = substream(seed, "oracle-draws")
    idx = rng.choice(len(mu.support), size=draws, p=mu.probabilities)
    entries = [
        CandidateEntry(
            vector=mu.support[k].ell.copy(),
            source_index=int(k),
            weight=float(mu.probabilities[k]),
        )
        for k in idx
    ]
    return CandidateList(entries=entries, draw_seed=seed)


def default_oracle_draws(alpha: float, delta: float | None = None) -> int:
    """List size 20/(alpha - delta); delta defaults to alpha/2."""
    if delta is None:
        delta = alpha / 2.0
    if not 0 <= delta < alpha:
        raise ValueError("need 0 <= delta < alpha")
    return math.ceil(20.0 / (alpha - delta))


def empirical_anticoncentrated(
    X: np.ndarray, directions: np.ndarray, frac: float, tol: float = 1e-9
) -> bool:
    """Check Pr_{rows}[<x, u> = 0] < frac along each supplied direction."""
    for u in np.atleast_2d(directions):
        norm_u = np.linalg.norm(u)
        if norm_u == 0:
            continue
        hits = np.mean(np.abs(X @ (u / norm_u)) <= tol)
        if hits >= frac:
            return False
    return True


def partition_check(
    ds: Dataset, partition: list[tuple[list[int], np.ndarray]], tol: float | None = None
) -> int | None:
    """Return the index of the block whose solution equals the planted one.

    The partition must be disjoint with blocks of size >= round(alpha n),
    each consistent with its own vector.  When the inliers are empirically
    anti-concentrated in the candidate difference directions, some block's
    vector must coincide with the plant; returns None otherwise.
    """
    if tol is None:
        tol = solubility_tolerance(ds)
    used: set[int] = set()
    min_size = round_half_away(ds.alpha * ds.n)
    for k, (idx, ell) in enumerate(partition):
        sidx = set(idx)
        if sidx & used:
            raise ValueError(f"block {k} overlaps an earlier block")
        used |= sidx
        if len(idx) < min_size:
            raise ValueError(f"block {k} smaller than alpha*n = {min_size}")
        resid = float(np.max(np.abs(ds.X[list(idx)] @ np.asarray(ell) - ds.y[list(idx)])))
        if resid > tol:
            raise ValueError(f"block {k} inconsistent: residual {resid:.3e}")
    if ds.ell_star is None or ds.inlier_mask is None:
        raise ValueError("partition check requires ground truth")
    diffs = np.array([np.asarray(ell, float) - ds.ell_star for _, ell in partition])
    X_in = ds.X[ds.inlier_mask]
    if not empirical_anticoncentrated(X_in, diffs, ds.alpha):
        return None
    for k, (_, ell) in enumerate(partition):
        if np.linalg.norm(np.asarray(ell, float) - ds.ell_star) <= 1e-9:
            return k
    return None
