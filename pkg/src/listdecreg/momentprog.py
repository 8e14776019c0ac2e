"""Moment-matrix encodings of the quadratic constraint systems.

The plain system over selector variables w in {0,1}^n and a regression
vector l with ||l|| <= 1 is

    sum_i w_i = alpha*n,   w_i^2 = w_i,   w_i (y_i - <x_i, l>) = 0,

its Boolean variant replaces the ball constraint by l_j^2 = 1/d, and the
noisy variant relaxes the bilinear equality to |w_i (y_i - <x_i,l>)| <= 4*zeta
while halving the mass to (alpha/2)*n.  At degree k the moment matrix is
indexed by monomials up to degree k/2 (idempotent in w); each equality is
multiplied by every monomial that keeps all product terms representable as
matrix entries.  The norm objective ||pE w||_2 is minimized through one
arrow-shaped PSD block [[t, u^T], [u, t*I]] with u tied to the first-order
w moments.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement

import numpy as np

from .datagen import Dataset, round_half_away
from .sdp import SDPProblem, SDPSolution

# Monomials are canonical pairs (w_indices, l_indices), both sorted tuples;
# w_indices may repeat in product keys but never in row monomials.
Monomial = tuple[tuple[int, ...], tuple[int, ...]]

MOMENT_BLOCK = 0
ARROW_BLOCK = 1


def mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    return (
        tuple(sorted(m1[0] + m2[0])),
        tuple(sorted(m1[1] + m2[1])),
    )


def mono_deg(m: Monomial) -> int:
    return len(m[0]) + len(m[1])


def reduce_idempotent(m: Monomial) -> Monomial:
    return (tuple(sorted(set(m[0]))), m[1])


@dataclass
class MonomialIndex:
    """Row monomials of the moment matrix and the product-entry table."""

    n: int
    d: int
    degree: int
    rows: list[Monomial] = field(default_factory=list)
    row_of: dict[Monomial, int] = field(default_factory=dict)
    # product key -> canonical (i, j) entry of the moment block
    entry_of: dict[Monomial, tuple[int, int]] = field(default_factory=dict)
    # product key -> every (i, j) entry evaluating to it (for alias ties)
    entries_of: dict[Monomial, list[tuple[int, int]]] = field(default_factory=dict)
    idempotent: bool = True

    def __post_init__(self):
        half = self.degree // 2
        rows: list[Monomial] = [((), ())]
        if half >= 1:
            rows += [((i,), ()) for i in range(self.n)]
            rows += [((), (j,)) for j in range(self.d)]
        if half >= 2:
            rows += [((i, j), ()) for i, j in combinations(range(self.n), 2)]
            rows += [((i,), (j,)) for i in range(self.n) for j in range(self.d)]
            rows += [
                ((), (i, j)) for i, j in combinations_with_replacement(range(self.d), 2)
            ]
        if half > 2:
            raise ValueError("only degrees 2 and 4 are supported")
        self.rows = rows
        self.row_of = {m: k for k, m in enumerate(rows)}
        for p in range(len(rows)):
            for q in range(p, len(rows)):
                key = mono_mul(rows[p], rows[q])
                self.entries_of.setdefault(key, []).append((p, q))
                self.entry_of.setdefault(key, (p, q))

    @property
    def size(self) -> int:
        return len(self.rows)

    def representable(self, key: Monomial) -> bool:
        return key in self.entry_of


@dataclass
class MomentProgram:
    """A built relaxation: SDP data plus the decoding maps."""

    index: MonomialIndex
    sdp: SDPProblem
    variant: str
    alpha: float
    degree: int
    mass_target: float
    n: int
    d: int
    family_rows: dict[str, list[int]] = field(default_factory=dict)


@dataclass
class MomentSolution:
    """Decoded pseudo-moments of a solved (or constructed) program."""

    moment: np.ndarray
    pE_w: np.ndarray
    pE_wl: np.ndarray
    pE_ll: np.ndarray
    objective: float
    residual_report: dict = field(default_factory=dict)
    status: str = "constructed"


# ---------------------------------------------------------------------------
# Building
# ---------------------------------------------------------------------------


def _terms_representable(index, terms):
    return all(index.representable(key) for key, _ in terms)


def build_program(
    ds: Dataset, alpha: float, degree: int = 2, variant: str = "plain"
) -> MomentProgram:
    """Encode the constraint system at the given relaxation degree."""
    if degree not in (2, 4):
        raise ValueError(f"degree must be 2 or 4, got {degree}")
    if variant not in ("plain", "boolean", "noisy"):
        raise ValueError(f"unknown variant {variant!r}")
    n, d = ds.n, ds.d
    if alpha * n < 1:
        raise ValueError("alpha*n must be at least 1")
    if alpha * n < d + 1:
        warnings.warn("alpha*n below d+1; soluble subsets are under-determined")
    if degree == 4 and n + d > 60:
        raise ValueError("degree 4 is gated to instances with n + d <= 60")

    index = MonomialIndex(n=n, d=d, degree=degree)
    N = index.size
    mass = (alpha / 2.0) * n if variant == "noisy" else alpha * n

    constraints: list[tuple[str, float, list]] = []
    labels: list[str] = []
    family_rows: dict[str, list[int]] = {}

    def emit(family, sense, rhs, terms):
        entries = [
            (MOMENT_BLOCK, *index.entry_of[key], coeff) for key, coeff in terms
        ]
        family_rows.setdefault(family, []).append(len(constraints))
        constraints.append((sense, rhs, entries))
        labels.append(family)

    # pin the constant moment
    emit("pin", "=", 1.0, [(((), ()), 1.0)])

    # alias ties: every entry computing the same product equals the first
    for key, ents in index.entries_of.items():
        first = ents[0]
        for other in ents[1:]:
            family_rows.setdefault("alias", []).append(len(constraints))
            constraints.append(
                (
                    "=",
                    0.0,
                    [
                        (MOMENT_BLOCK, *first, 1.0),
                        (MOMENT_BLOCK, *other, -1.0),
                    ],
                )
            )
            labels.append("alias")

    one: Monomial = ((), ())

    # mass: sum_i w_i m = mass * m for every representable multiplier m
    for m in index.rows:
        terms = [(mono_mul(((i,), ()), m), 1.0) for i in range(n)]
        terms.append((m, -mass))
        if _terms_representable(index, terms):
            emit("mass", "=", 0.0, terms)

    # idempotence: w_i^2 m = w_i m (m free of w_i so products stay entries)
    for i in range(n):
        wi: Monomial = ((i,), ())
        wi2: Monomial = ((i, i), ())
        for m in index.rows:
            if i in m[0]:
                continue
            terms = [(mono_mul(wi2, m), 1.0), (mono_mul(wi, m), -1.0)]
            if _terms_representable(index, terms):
                emit("idempotent", "=", 0.0, terms)

    # label consistency
    if variant == "noisy":
        bound = 4.0 * ds.zeta
        for i in range(n):
            base = [(((i,), ()), ds.y[i])] + [
                (((i,), (j,)), -ds.X[i, j]) for j in range(d)
            ]
            emit("noise_hi", "<=", bound, base)
            emit("noise_lo", "<=", bound, [(key, -c) for key, c in base])
            # localized form: the inequality times the square w_i^2 reduces
            # (by idempotence) to |pE[w_i rho_i]| <= 4 zeta pE[w_i]
            loc = base + [(((i,), ()), -bound)]
            emit("noise_loc_hi", "<=", 0.0, loc)
            emit(
                "noise_loc_lo",
                "<=",
                0.0,
                [(key, -c) for key, c in base] + [(((i,), ()), -bound)],
            )
    else:
        for i in range(n):
            wi = ((i,), ())
            for m in index.rows:
                terms = [(mono_mul(wi, m), ds.y[i])] + [
                    (mono_mul(((i,), (j,)), m), -ds.X[i, j]) for j in range(d)
                ]
                if _terms_representable(index, terms):
                    emit("bilinear", "=", 0.0, terms)

    # direction constraint: ball (trace <= 1) or Boolean coordinates
    if variant == "boolean":
        for j in range(d):
            lj2: Monomial = ((), (j, j))
            for m in index.rows:
                terms = [(mono_mul(lj2, m), 1.0), (m, -1.0 / d)]
                if _terms_representable(index, terms):
                    emit("boolean", "=", 0.0, terms)
    else:
        emit("trace", "<=", 1.0, [(((), (j, j)), 1.0) for j in range(d)])

    # arrow block [[t, u^T], [u, t I]] with u_i = pE[w_i]
    arrow_dim = n + 1
    for i in range(n):
        wi_entry = index.entry_of[((i,), ())]
        family_rows.setdefault("arrow_tie", []).append(len(constraints))
        constraints.append(
            (
                "=",
                0.0,
                [(ARROW_BLOCK, 0, i + 1, 1.0), (MOMENT_BLOCK, *wi_entry, -1.0)],
            )
        )
        labels.append("arrow_tie")
        family_rows.setdefault("arrow_diag", []).append(len(constraints))
        constraints.append(
            (
                "=",
                0.0,
                [(ARROW_BLOCK, i + 1, i + 1, 1.0), (ARROW_BLOCK, 0, 0, -1.0)],
            )
        )
        labels.append("arrow_diag")
    for i, j in combinations(range(1, arrow_dim), 2):
        family_rows.setdefault("arrow_zero", []).append(len(constraints))
        constraints.append(("=", 0.0, [(ARROW_BLOCK, i, j, 1.0)]))
        labels.append("arrow_zero")

    sdp = SDPProblem(
        block_dims=[N, arrow_dim],
        constraints=constraints,
        objective=[(ARROW_BLOCK, 0, 0, 1.0)],
        labels=labels,
    )
    return MomentProgram(
        index=index,
        sdp=sdp,
        variant=variant,
        alpha=alpha,
        degree=degree,
        mass_target=mass,
        n=n,
        d=d,
        family_rows=family_rows,
    )


# ---------------------------------------------------------------------------
# Witness, extraction, validation
# ---------------------------------------------------------------------------


def _lift_vector(index: MonomialIndex, w: np.ndarray, ell: np.ndarray) -> np.ndarray:
    vals = np.empty(index.size)
    for k, (wpart, lpart) in enumerate(index.rows):
        v = 1.0
        for i in wpart:
            v *= w[i]
        for j in lpart:
            v *= ell[j]
        vals[k] = v
    return vals


def feasibility_witness(ds: Dataset, degree: int = 2, half_mass: bool = False):
    """Rank-one lift of (1, indicator of the inliers, ell_star).

    Returns (MomentSolution, warm_blocks) where warm_blocks is the block
    list usable as a solver warm start.  With half_mass, only the first
    half of the inliers is selected (the feasible point of the noisy
    program, whose mass constraint is (alpha/2) n).
    """
    if ds.inlier_mask is None or ds.ell_star is None:
        raise ValueError("witness requires ground-truth mask and ell_star")
    w = ds.inlier_mask.astype(float)
    if half_mass:
        idx = np.flatnonzero(ds.inlier_mask)
        keep = idx[: round_half_away(len(idx) / 2.0)]
        w = np.zeros(ds.n)
        w[keep] = 1.0
    index = MonomialIndex(n=ds.n, d=ds.d, degree=degree)
    z = _lift_vector(index, w, ds.ell_star)
    M = np.outer(z, z)
    pE_w = w.copy()
    pE_wl = np.outer(w, ds.ell_star)
    pE_ll = np.outer(ds.ell_star, ds.ell_star)
    t = float(np.linalg.norm(w))
    arrow = np.zeros((ds.n + 1, ds.n + 1))
    arrow[0, 0] = t
    arrow[1:, 1:] = t * np.eye(ds.n)
    arrow[0, 1:] = w
    arrow[1:, 0] = w
    sol = MomentSolution(
        moment=M,
        pE_w=pE_w,
        pE_wl=pE_wl,
        pE_ll=pE_ll,
        objective=t,
        status="witness",
    )
    return sol, [M, arrow]


def extract_pseudo_moments(raw: SDPSolution, prog: MomentProgram) -> MomentSolution:
    """Decode first and second moments from the solved cone-side blocks."""
    if raw.status == "infeasible_suspected":
        raise ValueError(
            "solver suspects infeasibility; residuals "
            f"primal={raw.primal_residual:.2e} dual={raw.dual_residual:.2e}"
        )
    index = prog.index
    M = raw.blocks[MOMENT_BLOCK]
    n, d = prog.n, prog.d
    pE_w = np.array([M[index.entry_of[((i,), ())]] for i in range(n)])
    pE_wl = np.array(
        [[M[index.entry_of[((i,), (j,))]] for j in range(d)] for i in range(n)]
    )
    pE_ll = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            pE_ll[i, j] = M[index.entry_of[((), tuple(sorted((i, j))))]]
    report = validate_constraints_blocks(raw.blocks, raw.slacks, prog, tol=1e-5)
    report["negative_pE_w"] = int(np.sum(pE_w < -1e-6))
    report["solver_status"] = raw.status
    report["solver_iterations"] = raw.iterations
    return MomentSolution(
        moment=M,
        pE_w=pE_w,
        pE_wl=pE_wl,
        pE_ll=pE_ll,
        objective=raw.blocks[ARROW_BLOCK][0, 0],
        residual_report=report,
        status=raw.status,
    )


def validate_constraints_blocks(blocks, slacks, prog: MomentProgram, tol: float) -> dict:
    """Residuals per constraint family plus the moment-block eigenvalue floor."""
    labels = prog.sdp.labels
    worst: dict[str, float] = {}
    slack_id = 0
    for k, (sense, rhs, entries) in enumerate(prog.sdp.constraints):
        val = sum(coeff * blocks[blk][i, j] for blk, i, j, coeff in entries)
        if sense == "=":
            r = abs(val - rhs)
        else:
            r = max(0.0, val - rhs)
            slack_id += 1
        fam = labels[k]
        worst[fam] = max(worst.get(fam, 0.0), float(r))
    M = blocks[MOMENT_BLOCK]
    eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
    out = {
        "family_residuals": worst,
        "max_residual": max(worst.values()) if worst else 0.0,
        "min_eig": float(eigs[0]),
        "trace": float(np.trace(M)),
        "tol": tol,
    }
    out["passed"] = (
        out["max_residual"] <= tol and eigs[0] >= -1e-6 * max(out["trace"], 1.0)
    )
    return out


def validate_constraints(sol: MomentSolution, prog: MomentProgram, tol: float) -> dict:
    """Family residuals for a bare moment matrix (no arrow/slack blocks)."""
    n = prog.n
    t = float(np.linalg.norm(sol.pE_w))
    arrow = np.zeros((n + 1, n + 1))
    arrow[0, 0] = t
    arrow[1:, 1:] = t * np.eye(n)
    arrow[0, 1:] = sol.pE_w
    arrow[1:, 0] = sol.pE_w
    return validate_constraints_blocks([sol.moment, arrow], None, prog, tol)


# ---------------------------------------------------------------------------
# The mixture norm-decrease inequality
# ---------------------------------------------------------------------------


def mixture_norm_decrease(
    pE_w: np.ndarray, inlier_mask: np.ndarray, alpha: float
) -> dict:
    """Line-search the mixture u_lam = (1-lam) u + lam u* for a norm drop.

    u is the normalized weight profile of a feasible solution, u* the
    profile of the inlier indicator.  Whenever the solution puts less than
    an alpha fraction of its mass on the inliers, some lam in (0, 1] makes
    the mixture strictly shorter; the returned record carries the best one.
    """
    mask = np.asarray(inlier_mask, dtype=bool)
    n = len(pE_w)
    mass = float(np.sum(pE_w))
    u = np.asarray(pE_w, dtype=float) / mass
    u_star = mask.astype(float) / mask.sum()
    norm0 = float(np.linalg.norm(u))
    lams = np.linspace(0.0, 1.0, 2001)[1:]
    norms = np.linalg.norm(
        (1.0 - lams)[:, None] * u[None, :] + lams[:, None] * u_star[None, :], axis=1
    )
    k = int(np.argmin(norms))
    return {
        "wt_inliers": float(u[mask].sum()),
        "alpha": alpha,
        "lambda": float(lams[k]),
        "norm_before": norm0,
        "norm_after": float(norms[k]),
        "decrease": norm0 - float(norms[k]),
    }
