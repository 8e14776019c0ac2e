"""Corrupted regression instance generation.

An instance is n linear equations y_i = <x_i, l> of which a fraction alpha
are inliers drawn i.i.d. from a chosen distribution and labeled (possibly
with bounded noise) by a hidden unit-norm vector; the rest are produced by
an adversary strategy.  Generation is pure given (config, seed): every
randomized stage draws from its own labelled sub-stream, so datasets are
reproducible and insensitive to the addition of new stages.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .prng import PRNG_CONTRACT, substream

NOISELESS_RTOL = 1e-12


class DatasetFormatError(ValueError):
    """A dataset file failed structural validation."""

    def __init__(self, message, fieldname=None, row=None):
        super().__init__(message)
        self.fieldname = fieldname
        self.row = row


def round_half_away(x: float) -> int:
    """Round to nearest integer, halves away from zero."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


def sample_design(dist_tag: str, n: int, d: int, rng, cov=None) -> np.ndarray:
    """Draw n rows from the named design distribution on R^d."""
    if dist_tag == "gaussian":
        X = rng.standard_normal((n, d))
        if cov is not None:
            chol = np.linalg.cholesky(np.asarray(cov, dtype=float))
            X = X @ chol.T
        return X
    if dist_tag == "hypercube01":
        return rng.integers(0, 2, size=(n, d)).astype(float)
    if dist_tag.startswith("qary:"):
        q = int(dist_tag.split(":", 1)[1])
        if q < 2:
            raise ValueError(f"qary alphabet must have q >= 2, got {q}")
        return rng.integers(0, q, size=(n, d)).astype(float)
    if dist_tag == "pm1":
        return rng.integers(0, 2, size=(n, d)).astype(float) * 2.0 - 1.0
    raise ValueError(f"unknown distribution tag {dist_tag!r}")


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    """A corrupted linear-equation sample with generator provenance."""

    X: np.ndarray
    y: np.ndarray
    alpha: float
    zeta: float
    seed: int
    dist_tag: str
    ell_star: np.ndarray | None = None
    inlier_mask: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.ell_star is not None:
            self.ell_star = np.asarray(self.ell_star, dtype=float)
        if self.inlier_mask is not None:
            self.inlier_mask = np.asarray(self.inlier_mask, dtype=bool)
        self.extra.setdefault("prng", PRNG_CONTRACT)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def validate(self) -> None:
        if self.X.ndim != 2 or self.y.shape != (self.n,):
            raise ValueError("X must be n x d and y length n")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.inlier_mask is not None:
            expected = round_half_away(self.alpha * self.n)
            got = int(self.inlier_mask.sum())
            if got != expected:
                raise ValueError(
                    f"inlier mask has {got} entries, expected round(alpha*n) = {expected}"
                )
        if self.ell_star is not None and self.inlier_mask is not None:
            resid = np.abs(
                self.y[self.inlier_mask] - self.X[self.inlier_mask] @ self.ell_star
            )
            y_scale = max(1.0, float(np.max(np.abs(self.y))) if self.n else 1.0)
            if self.zeta == 0.0:
                if resid.size and resid.max() > NOISELESS_RTOL * y_scale:
                    raise ValueError(
                        f"noiseless inlier residual {resid.max():.3e} exceeds "
                        f"{NOISELESS_RTOL} relative"
                    )
            elif resid.size and resid.max() > 4.0 * self.zeta + 1e-12:
                raise ValueError(
                    f"noisy inlier residual {resid.max():.3e} exceeds 4*zeta"
                )


# ---------------------------------------------------------------------------
# Inliers
# ---------------------------------------------------------------------------


def gen_inliers(
    dist: str,
    n_in: int,
    ell_star: np.ndarray,
    zeta: float,
    seed: int,
    cov=None,
    noise_model: str = "uniform",
) -> tuple[np.ndarray, np.ndarray]:
    """n_in design rows from `dist` labeled by ell_star plus bounded noise.

    Noise is uniform on [-zeta, zeta] by default so the 4*zeta feasibility
    box always holds; the gaussian switch (sd = zeta) is available but its
    tail leaves the box with small probability.
    """
    ell_star = np.asarray(ell_star, dtype=float)
    if np.linalg.norm(ell_star) > 1.0 + 1e-9:
        raise ValueError(f"||ell_star|| = {np.linalg.norm(ell_star):.6f} exceeds 1")
    if n_in < 1:
        raise ValueError("need at least one inlier")
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    X = sample_design(dist, n_in, len(ell_star), substream(seed, "inliers"), cov=cov)
    y = X @ ell_star
    if zeta > 0:
        rng = substream(seed, "inlier-noise")
        if noise_model == "uniform":
            y = y + rng.uniform(-zeta, zeta, size=n_in)
        elif noise_model == "gaussian":
            y = y + zeta * rng.standard_normal(n_in)
        else:
            raise ValueError(f"unknown noise model {noise_model!r}")
    return X, y


# ---------------------------------------------------------------------------
# Adversaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdversaryStrategy:
    """Outlier construction recipe; produces exactly n - round(alpha*n) rows."""

    kind: str
    params: dict = field(default_factory=dict)

    @classmethod
    def random_uniform(cls, box: float = 1.0) -> "AdversaryStrategy":
        return cls("random_uniform", {"box": float(box)})

    @classmethod
    def second_plant(cls, decoy=None, fraction: float = 1.0) -> "AdversaryStrategy":
        decoy_list = None if decoy is None else [float(v) for v in np.asarray(decoy)]
        return cls("second_plant", {"decoy": decoy_list, "fraction": float(fraction)})

    @classmethod
    def gv_ensemble(cls) -> "AdversaryStrategy":
        return cls("gv_ensemble", {})

    @classmethod
    def mixture_ri(cls, q: int, coord: int) -> "AdversaryStrategy":
        return cls("mixture_ri", {"q": int(q), "coord": int(coord)})


def _gv_multiset(d: int) -> tuple[np.ndarray, np.ndarray]:
    """The ambiguity multiset {(e_i, +-1/sqrt(d)) : i in [d]} in fixed order."""
    X = np.repeat(np.eye(d), 2, axis=0)
    y = np.tile([1.0, -1.0], d) / math.sqrt(d)
    return X, y


def _gen_outliers(strategy, n_out, d, dist_tag, ell_star, rng):
    kind = strategy.kind
    if kind == "random_uniform":
        box = strategy.params.get("box", 1.0)
        return rng.uniform(-box, box, size=(n_out, d)), rng.uniform(-box, box, size=n_out)
    if kind == "second_plant":
        decoy = strategy.params.get("decoy")
        decoy = -ell_star if decoy is None else np.asarray(decoy, dtype=float)
        frac = strategy.params.get("fraction", 1.0)
        n_plant = round_half_away(frac * n_out)
        Xp = sample_design(dist_tag, n_plant, d, rng)
        yp = Xp @ decoy
        Xr = rng.uniform(-1, 1, size=(n_out - n_plant, d))
        yr = rng.uniform(-1, 1, size=n_out - n_plant)
        return np.vstack([Xp, Xr]), np.concatenate([yp, yr])
    if kind == "gv_ensemble":
        Xm, ym = _gv_multiset(d)
        reps = -(-n_out // len(ym))
        return np.tile(Xm, (reps, 1))[:n_out], np.tile(ym, reps)[:n_out]
    if kind == "mixture_ri":
        q = strategy.params["q"]
        coord = strategy.params["coord"]
        X = rng.integers(0, q, size=(n_out, d)).astype(float)
        a = rng.integers(1, q, size=n_out)
        y = np.mod(X[:, coord] + a, q).astype(float)
        return X, y
    raise ValueError(f"unknown adversary kind {kind!r}")


def apply_adversary(
    X_in: np.ndarray,
    y_in: np.ndarray,
    ell_star: np.ndarray,
    strategy: AdversaryStrategy,
    n_total: int,
    seed: int,
    zeta: float = 0.0,
    dist_tag: str = "gaussian",
) -> Dataset:
    """Pad the inliers with strategy-generated outliers and shuffle."""
    n_in = X_in.shape[0]
    if n_total < n_in:
        raise ValueError(f"n_total = {n_total} smaller than inlier count {n_in}")
    d = X_in.shape[1]
    X_out, y_out = _gen_outliers(
        strategy, n_total - n_in, d, dist_tag, np.asarray(ell_star, float),
        substream(seed, "adversary"),
    )
    X = np.vstack([X_in, X_out])
    y = np.concatenate([y_in, y_out])
    mask = np.zeros(n_total, dtype=bool)
    mask[:n_in] = True
    perm = substream(seed, "adversary-shuffle").permutation(n_total)
    ds = Dataset(
        X=X[perm],
        y=y[perm],
        alpha=n_in / n_total,
        zeta=zeta,
        seed=seed,
        dist_tag=dist_tag,
        ell_star=np.asarray(ell_star, dtype=float),
        inlier_mask=mask[perm],
        extra={"adversary": strategy.kind, "adversary_params": dict(strategy.params)},
    )
    ds.validate()
    return ds


def gen_dataset(
    dist: str,
    d: int,
    n: int,
    alpha: float,
    seed: int,
    ell_star=None,
    zeta: float = 0.0,
    adversary: AdversaryStrategy | None = None,
    noise_model: str = "uniform",
) -> Dataset:
    """One-call corrupted instance: inliers per Model parameters + adversary."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if ell_star is None:
        raw = substream(seed, "ell-star").standard_normal(d)
        ell_star = raw / np.linalg.norm(raw)
    ell_star = np.asarray(ell_star, dtype=float)
    n_in = round_half_away(alpha * n)
    X_in, y_in = gen_inliers(dist, n_in, ell_star, zeta, seed, noise_model=noise_model)
    strategy = adversary or AdversaryStrategy.second_plant()
    return apply_adversary(
        X_in, y_in, ell_star, strategy, n, seed, zeta=zeta, dist_tag=dist
    )


# ---------------------------------------------------------------------------
# Mixed regression and hard instances
# ---------------------------------------------------------------------------


def gen_mixed_regression(
    components: list[tuple[float, np.ndarray]],
    dist: str,
    n: int,
    seed: int,
    zeta: float = 0.0,
) -> Dataset:
    """Each example labeled by one mixture component; alpha = min weight."""
    if not components:
        raise ValueError("component list must be nonempty")
    weights = np.array([w for w, _ in components], dtype=float)
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be positive and sum to 1")
    ells = [np.asarray(l, dtype=float) for _, l in components]
    for l in ells:
        if np.linalg.norm(l) > 1.0 + 1e-9:
            raise ValueError("every component vector must have norm <= 1")
    d = len(ells[0])
    X = sample_design(dist, n, d, substream(seed, "mixture-design"))
    ids = substream(seed, "mixture-components").choice(len(ells), size=n, p=weights)
    y = np.einsum("ij,ij->i", X, np.stack([ells[c] for c in ids]))
    if zeta > 0:
        y = y + substream(seed, "mixture-noise").uniform(-zeta, zeta, size=n)
    return Dataset(
        X=X,
        y=y,
        alpha=float(weights.min()),
        zeta=zeta,
        seed=seed,
        dist_tag=dist,
        extra={
            "component_ids": ids.tolist(),
            "components": [[w, l.tolist()] for w, l in zip(weights, ells)],
        },
    )


def with_component_as_inliers(ds: Dataset, component: int) -> Dataset:
    """View a mixture dataset with one component as the planted inliers."""
    ids = np.asarray(ds.extra["component_ids"])
    mask = ids == component
    ell = np.asarray(ds.extra["components"][component][1], dtype=float)
    out = Dataset(
        X=ds.X,
        y=ds.y,
        alpha=float(mask.sum()) / ds.n,
        zeta=ds.zeta,
        seed=ds.seed,
        dist_tag=ds.dist_tag,
        ell_star=ell,
        inlier_mask=mask,
        extra=dict(ds.extra, inlier_component=component),
    )
    out.validate()
    return out


def gen_gv_instance(d: int, seed: int, copies: int = 1) -> Dataset:
    """The coding-theory ambiguity instance: every sign pattern is consistent.

    Inliers are d draws from the standard basis labeled by the normalized
    all-ones vector; outliers are `copies` copies of the multiset
    {(e_i, +-1/sqrt(d))}.  Every a in {+-1/sqrt(d)}^d then labels a d-row
    subset exactly, so the instance is flagged ambiguous.
    """
    if d < 2:
        raise ValueError("need dimension >= 2")
    ell_star = np.ones(d) / math.sqrt(d)
    idx = substream(seed, "gv-inliers").integers(0, d, size=d)
    X_in = np.eye(d)[idx]
    y_in = X_in @ ell_star
    Xm, ym = _gv_multiset(d)
    X = np.vstack([X_in] + [Xm] * copies)
    y = np.concatenate([y_in] + [ym] * copies)
    n = len(y)
    mask = np.zeros(n, dtype=bool)
    mask[:d] = True
    perm = substream(seed, "gv-shuffle").permutation(n)
    ds = Dataset(
        X=X[perm],
        y=y[perm],
        alpha=d / n,
        zeta=0.0,
        seed=seed,
        dist_tag="custom:gv",
        ell_star=ell_star,
        inlier_mask=mask[perm],
        extra={"ambiguous": True, "gv_copies": copies},
    )
    ds.validate()
    return ds


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_REQUIRED_HEADER = ("n", "d", "alpha", "zeta", "seed", "dist_tag")
_KNOWN_HEADER = set(_REQUIRED_HEADER) | {"ell_star", "inlier_mask", "extra", "prng"}


def save_dataset(ds: Dataset, path) -> None:
    """Write the self-describing JSON dataset format (numbers round-trip)."""
    header = {
        "n": ds.n,
        "d": ds.d,
        "alpha": ds.alpha,
        "zeta": ds.zeta,
        "seed": ds.seed,
        "dist_tag": ds.dist_tag,
        "extra": ds.extra,
    }
    if ds.ell_star is not None:
        header["ell_star"] = ds.ell_star.tolist()
    if ds.inlier_mask is not None:
        header["inlier_mask"] = [bool(b) for b in ds.inlier_mask]
    rows = np.column_stack([ds.X, ds.y]).tolist()
    doc = {"format": "listdecreg-dataset-v1", "header": header, "rows": rows}
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_dataset(path) -> Dataset:
    """Read a dataset file; unknown header fields warn and are ignored."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise DatasetFormatError(f"not valid JSON: {err}", row=err.lineno) from err
    if doc.get("format") != "listdecreg-dataset-v1":
        raise DatasetFormatError(
            f"unknown format tag {doc.get('format')!r}", fieldname="format"
        )
    header = doc.get("header")
    if not isinstance(header, dict):
        raise DatasetFormatError("missing header object", fieldname="header")
    for key in _REQUIRED_HEADER:
        if key not in header:
            raise DatasetFormatError(f"header missing field {key!r}", fieldname=key)
    unknown = sorted(set(header) - _KNOWN_HEADER)
    if unknown:
        warnings.warn(f"ignoring unknown dataset header fields: {unknown}")
    rows = doc.get("rows")
    n, d = int(header["n"]), int(header["d"])
    if not isinstance(rows, list) or len(rows) != n:
        raise DatasetFormatError(
            f"expected {n} rows, found {len(rows) if isinstance(rows, list) else 'none'}",
            fieldname="rows",
        )
    data = np.asarray(rows, dtype=float)
    if data.shape != (n, d + 1):
        raise DatasetFormatError(
            f"rows must have {d + 1} columns, found {data.shape}", fieldname="rows"
        )
    mask = header.get("inlier_mask")
    ell = header.get("ell_star")
    ds = Dataset(
        X=data[:, :d],
        y=data[:, d],
        alpha=float(header["alpha"]),
        zeta=float(header["zeta"]),
        seed=int(header["seed"]),
        dist_tag=str(header["dist_tag"]),
        ell_star=None if ell is None else np.asarray(ell, dtype=float),
        inlier_mask=None if mask is None else np.asarray(mask, dtype=bool),
        extra=dict(header.get("extra", {})),
    )
    ds.validate()
    return ds


def export_csv(ds: Dataset, path) -> None:
    """Plain CSV interop export: x columns then the label column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(ds.d)] + ["y"])
        for i in range(ds.n):
            writer.writerow([repr(v) for v in ds.X[i]] + [repr(ds.y[i])])
