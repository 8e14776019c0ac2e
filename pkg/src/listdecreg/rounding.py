"""Votes-based rounding: per-sample candidate vectors, weighted draws,
list assembly, and evaluation against the planted vector."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .momentprog import MomentSolution
from .prng import substream


@dataclass
class CandidateEntry:
    vector: np.ndarray
    source_index: int
    weight: float


@dataclass
class CandidateList:
    entries: list[CandidateEntry] = field(default_factory=list)
    draw_seed: int = 0
    dedupe_radius: float = 0.0

    def __len__(self) -> int:
        return len(self.entries)

    def vectors(self) -> np.ndarray:
        return np.array([e.vector for e in self.entries])

    def to_dict(self) -> dict:
        return {
            "draw_seed": self.draw_seed,
            "dedupe_radius": self.dedupe_radius,
            "entries": [
                {
                    "vector": [float(v) for v in e.vector],
                    "source_index": e.source_index,
                    "weight": e.weight,
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateList":
        return cls(
            entries=[
                CandidateEntry(
                    vector=np.asarray(e["vector"], dtype=float),
                    source_index=int(e["source_index"]),
                    weight=float(e["weight"]),
                )
                for e in d["entries"]
            ],
            draw_seed=int(d.get("draw_seed", 0)),
            dedupe_radius=float(d.get("dedupe_radius", 0.0)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CandidateList":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def export_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            d = len(self.entries[0].vector) if self.entries else 0
            writer.writerow([f"v{j + 1}" for j in range(d)] + ["weight", "source_index"])
            for e in self.entries:
                writer.writerow(
                    [repr(float(x)) for x in e.vector]
                    + [repr(e.weight), e.source_index]
                )


def compute_votes(sol: MomentSolution, eps_w: float = 1e-9) -> np.ndarray:
    """Row i is pE[w_i l] / pE[w_i], or zero when the weight is negligible."""
    votes = np.zeros_like(sol.pE_wl)
    big = sol.pE_w > eps_w
    votes[big] = sol.pE_wl[big] / sol.pE_w[big, None]
    return votes


def default_draws(alpha: float, c_list: int = 20) -> int:
    """List size ceil(c_list / alpha); the default constant mirrors the
    identifiability list-size scale."""
    return math.ceil(c_list / alpha)


def sample_list(
    votes: np.ndarray,
    pE_w: np.ndarray,
    alpha: float,
    draws: int,
    seed: int,
    mass_target: float | None = None,
) -> CandidateList:
    """`draws` i.i.d. indices proportional to pE[w], returning their votes.

    Negative solver-noise weights are clamped to zero (magnitude logged via
    warning when material).  If the total mass strays more than 10% from
    the program's mass target a warning is emitted and the weights are
    renormalized for sampling.
    """
    w = np.asarray(pE_w, dtype=float)
    clipped = np.minimum(w, 0.0)
    if np.abs(clipped).max(initial=0.0) > 1e-6:
        warnings.warn(
            f"clamping negative weights with magnitude up to {-clipped.min():.2e}"
        )
    w = np.maximum(w, 0.0)
    total = float(w.sum())
    if total <= 0:
        raise ValueError("all sampling weights vanish")
    n = len(w)
    target = alpha * n if mass_target is None else mass_target
    if abs(total - target) > 0.1 * target:
        warnings.warn(
            f"weight mass {total:.3f} is more than 10% from target {target:.3f}; "
            "renormalizing"
        )
    prob = w / total
    rng = substream(seed, "rounding-draws")
    idx = rng.choice(n, size=draws, p=prob)
    entries = [
        CandidateEntry(
            vector=votes[i].copy(), source_index=int(i), weight=float(w[i] / target)
        )
        for i in idx
    ]
    return CandidateList(entries=entries, draw_seed=seed, dedupe_radius=0.0)


def dedupe(clist: CandidateList, radius: float) -> CandidateList:
    """Greedy scan in draw order keeping entries > radius from all kept."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    kept: list[CandidateEntry] = []
    for e in clist.entries:
        if all(np.linalg.norm(e.vector - k.vector) > radius for k in kept):
            kept.append(e)
    return CandidateList(entries=kept, draw_seed=clist.draw_seed, dedupe_radius=radius)


def evaluate(clist: CandidateList, ell_star: np.ndarray, eta: float) -> dict:
    """Minimum distance of any candidate to the planted vector."""
    if not clist.entries:
        raise ValueError("candidate list is empty")
    ell = np.asarray(ell_star, dtype=float)
    dists = np.linalg.norm(clist.vectors() - ell, axis=1)
    return {
        "min_dist": float(dists.min()),
        "hit": bool(dists.min() < eta),
        "list_size": len(clist.entries),
    }


def weighted_vote_error(
    sol: MomentSolution, inlier_mask: np.ndarray, ell_star: np.ndarray
) -> float:
    """(1/|I|) sum_{i in I} pE[w_i] ||v_i - l*||: the averaged vote error
    that the close-on-inliers argument bounds by (alpha/2) eta."""
    votes = compute_votes(sol)
    mask = np.asarray(inlier_mask, dtype=bool)
    errs = np.linalg.norm(votes[mask] - np.asarray(ell_star, float), axis=1)
    return float(np.sum(sol.pE_w[mask] * errs) / mask.sum())
