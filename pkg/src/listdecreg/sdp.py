"""A small operator-splitting semidefinite programming solver.

Problems are block-diagonal: symmetric PSD blocks plus nonnegative slack
scalars introduced for inequality rows, sparse linear constraints over
canonical (i <= j) block entries, and a linear objective.  The solve is
relaxed Douglas-Rachford splitting between

  * the affine set {A x = b} shifted by the objective gradient, projected
    through one cached sparse factorization of A A^T, and
  * the cone, projected block-wise by eigenvalue clipping.

The projection gap ||y_k - x_k|| is the merit function; non-expansiveness
of the relaxed splitting map makes it non-increasing, which the test suite
asserts.  Everything is deterministic given the problem and options.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu


class SDPValidationError(ValueError):
    """Problem data is structurally inconsistent."""


class SolverFailure(RuntimeError):
    """Raised by callers that require convergence (exit code 3 in the CLI)."""


@dataclass
class SDPProblem:
    """min <objective, x> over block-PSD x subject to sparse rows."""

    block_dims: list[int]
    # each constraint: (sense, rhs, entries) with sense in {"=", "<="} and
    # entries a list of (block, i, j, coeff) referencing i <= j
    constraints: list[tuple[str, float, list[tuple[int, int, int, float]]]]
    objective: list[tuple[int, int, int, float]]
    labels: list[str] | None = None

    def validate(self) -> None:
        for b, dim in enumerate(self.block_dims):
            if dim < 1:
                raise SDPValidationError(f"block {b} has dimension {dim}")
        def check(entries, where):
            for blk, i, j, _ in entries:
                if not (0 <= blk < len(self.block_dims)):
                    raise SDPValidationError(f"{where}: block {blk} out of range")
                dim = self.block_dims[blk]
                if not (0 <= i <= j < dim):
                    raise SDPValidationError(
                        f"{where}: entry ({i},{j}) not canonical for dim {dim}"
                    )
        for k, (sense, _, entries) in enumerate(self.constraints):
            if sense not in ("=", "<="):
                raise SDPValidationError(f"constraint {k}: bad sense {sense!r}")
            check(entries, f"constraint {k}")
        check(self.objective, "objective")
        if self.labels is not None and len(self.labels) != len(self.constraints):
            raise SDPValidationError("labels length mismatch")


@dataclass
class SDPSolution:
    blocks: list[np.ndarray]          # cone-side iterate, PSD by construction
    affine_blocks: list[np.ndarray]   # affine-side iterate, equalities exact
    slacks: np.ndarray
    affine_slacks: np.ndarray
    objective: float
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    merit: float


# ---------------------------------------------------------------------------
# svec packing: symmetric matrices to vectors preserving inner products
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


class _Packing:
    def __init__(self, block_dims, n_slack):
        self.block_dims = list(block_dims)
        self.offsets = []
        off = 0
        for dim in self.block_dims:
            self.offsets.append(off)
            off += dim * (dim + 1) // 2
        self.slack_off = off
        self.total = off + n_slack
        self._tri = [np.triu_indices(dim) for dim in self.block_dims]

    def entry_index(self, blk, i, j):
        dim = self.block_dims[blk]
        # position of (i, j), i <= j, in row-major upper triangle
        return self.offsets[blk] + i * dim - i * (i - 1) // 2 + (j - i)

    def entry_scale(self, i, j):
        return 1.0 if i == j else _SQRT2

    def pack(self, mats, slacks, out=None):
        x = np.empty(self.total) if out is None else out
        for blk, M in enumerate(mats):
            iu, ju = self._tri[blk]
            v = M[iu, ju].copy()
            v[iu != ju] *= _SQRT2
            x[self.offsets[blk] : self.offsets[blk] + len(v)] = v
        x[self.slack_off :] = slacks
        return x

    def unpack(self, x):
        mats = []
        for blk, dim in enumerate(self.block_dims):
            iu, ju = self._tri[blk]
            v = x[self.offsets[blk] : self.offsets[blk] + len(iu)].copy()
            v[iu != ju] /= _SQRT2
            M = np.zeros((dim, dim))
            M[iu, ju] = v
            M[ju, iu] = v
            mats.append(M)
        return mats, x[self.slack_off :].copy()


def project_psd(M: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm via eigenvalue clipping."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    if w[0] >= 0:
        return 0.5 * (M + M.T)
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.T


def _project_cone(x, packing):
    mats, slacks = packing.unpack(x)
    out = np.empty_like(x)
    for blk, M in enumerate(mats):
        w, V = np.linalg.eigh(M)
        if w[0] < 0:
            M = (V * np.clip(w, 0.0, None)) @ V.T
        mats[blk] = M
    packing.pack(mats, np.maximum(slacks, 0.0), out=out)
    return out


# ---------------------------------------------------------------------------
# Solve
# ---------------------------------------------------------------------------


def _build_system(problem: SDPProblem):
    problem.validate()
    n_ineq = sum(1 for sense, _, _ in problem.constraints if sense == "<=")
    packing = _Packing(problem.block_dims, n_ineq)
    rows, cols, vals, rhs = [], [], [], []
    slack_id = 0
    for r, (sense, b, entries) in enumerate(problem.constraints):
        for blk, i, j, coeff in entries:
            rows.append(r)
            cols.append(packing.entry_index(blk, i, j))
            # functional coeff * M_ij on the sqrt2-scaled packed entry
            vals.append(coeff / packing.entry_scale(i, j))
        if sense == "<=":
            rows.append(r)
            cols.append(packing.slack_off + slack_id)
            vals.append(1.0)
            slack_id += 1
        rhs.append(b)
    A = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(problem.constraints), packing.total)
    )
    b = np.asarray(rhs, dtype=float)
    row_norms = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    row_norms[row_norms == 0] = 1.0
    D = sparse.diags(1.0 / row_norms)
    A = (D @ A).tocsr()
    b = b / row_norms
    c = np.zeros(packing.total)
    for blk, i, j, coeff in problem.objective:
        c[packing.entry_index(blk, i, j)] += coeff / packing.entry_scale(i, j)
    return packing, A, b, c, row_norms


def solve(
    problem: SDPProblem,
    tol: float = 1e-6,
    max_iter: int = 20000,
    over_relaxation: float = 1.5,
    obj_weight: float = 1.0,
    warm_start: list[np.ndarray] | None = None,
    warm_slacks: np.ndarray | None = None,
    trace: list | None = None,
    check_every: int = 10,
) -> SDPSolution:
    """Run relaxed Douglas-Rachford splitting until residuals fall below tol.

    Stopping residuals live in the row-equilibrated space: primal is the
    equality violation of the cone-side iterate, dual is the normalized
    projection gap between the two iterates (zero exactly at optimality).
    """
    packing, A, b, c, _ = _build_system(problem)
    cop = c * (obj_weight / max(1.0, np.linalg.norm(c)))
    gram = (A @ A.T).tocsc() + 1e-10 * sparse.eye(A.shape[0], format="csc")
    lu = splu(gram)

    def proj_affine(w):
        return w - A.T @ lu.solve(A @ w - b)

    if warm_start is not None:
        slacks0 = (
            warm_slacks
            if warm_slacks is not None
            else np.zeros(packing.total - packing.slack_off)
        )
        zeta = packing.pack([np.asarray(M, float) for M in warm_start], slacks0)
    else:
        zeta = np.zeros(packing.total)

    lam = over_relaxation
    bnorm = 1.0 + np.linalg.norm(b)
    status = "max_iter"
    it = 0
    primal = dual = merit = np.inf
    stall_window: list[float] = []
    x = y = zeta
    for it in range(1, max_iter + 1):
        x = proj_affine(zeta - cop)
        y = _project_cone(2.0 * x - zeta, packing)
        diff = y - x
        zeta = zeta + lam * diff
        merit = float(np.linalg.norm(diff))
        if trace is not None or it % check_every == 0 or it == max_iter:
            primal = float(np.linalg.norm(A @ y - b)) / bnorm
            dual = merit / (1.0 + float(np.linalg.norm(y)))
            if trace is not None:
                trace.append((it, primal, dual, float(np.dot(c, y)), merit))
            if max(primal, dual) <= tol:
                status = "optimal"
                break
            stall_window.append(primal)
            if len(stall_window) > 50:
                stall_window.pop(0)
    if status == "max_iter" and primal > 1e3 * tol and len(stall_window) >= 50:
        lo, hi = min(stall_window), max(stall_window)
        if hi - lo <= 0.01 * hi:
            status = "infeasible_suspected"

    mats, slacks = packing.unpack(y)
    aff_mats, aff_slacks = packing.unpack(x)
    return SDPSolution(
        blocks=mats,
        affine_blocks=aff_mats,
        slacks=slacks,
        affine_slacks=aff_slacks,
        objective=float(np.dot(c, y)),
        status=status,
        iterations=it,
        primal_residual=primal,
        dual_residual=dual,
        merit=merit,
    )


def residuals(problem: SDPProblem, solution: SDPSolution) -> dict:
    """Recompute the reported residuals from the returned matrices."""
    packing, A, b, _, _ = _build_system(problem)
    y = packing.pack(solution.blocks, solution.slacks)
    x = packing.pack(solution.affine_blocks, solution.affine_slacks)
    primal = float(np.linalg.norm(A @ y - b)) / (1.0 + float(np.linalg.norm(b)))
    dual = float(np.linalg.norm(y - x)) / (1.0 + float(np.linalg.norm(y)))
    return {"primal": primal, "dual": dual}


# ---------------------------------------------------------------------------
# Sparse block-diagonal text format
# ---------------------------------------------------------------------------


def write_problem(problem: SDPProblem, path) -> None:
    """Text export: block dims, constraint senses/rhs, entries (row 0 = objective)."""
    lines = ["# listdecreg sdp v1"]
    lines.append(" ".join(str(d) for d in problem.block_dims))
    lines.append(str(len(problem.constraints)))
    for k, (sense, rhs, _) in enumerate(problem.constraints):
        lines.append(f"{k + 1} {sense} {rhs!r}")
    for blk, i, j, vv in problem.objective:
        lines.append(f"0 {blk} {i} {j} {vv!r}")
    for k, (_, _, entries) in enumerate(problem.constraints):
        for blk, i, j, vv in entries:
            lines.append(f"{k + 1} {blk} {i} {j} {vv!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_problem(path) -> SDPProblem:
    with open(path, encoding="utf-8") as fh:
        lines = [l.strip() for l in fh if l.strip() and not l.startswith("#")]
    dims = [int(t) for t in lines[0].split()]
    n_cons = int(lines[1])
    senses = {}
    for k in range(n_cons):
        idx, sense, rhs = lines[2 + k].split()
        senses[int(idx)] = (sense, float(rhs))
    constraints = [(senses[k + 1][0], senses[k + 1][1], []) for k in range(n_cons)]
    objective = []
    for line in lines[2 + n_cons :]:
        cid, blk, i, j, vv = line.split()
        entry = (int(blk), int(i), int(j), float(vv))
        if int(cid) == 0:
            objective.append(entry)
        else:
            constraints[int(cid) - 1][2].append(entry)
    return SDPProblem(block_dims=dims, constraints=constraints, objective=objective)
