"""End-to-end solve-and-round runs shared by the CLI and the test suite."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import sdp as sdpmod
from .datagen import AdversaryStrategy, Dataset, gen_dataset
from .momentprog import (
    MomentProgram,
    MomentSolution,
    build_program,
    extract_pseudo_moments,
    feasibility_witness,
)
from .rounding import (
    CandidateList,
    compute_votes,
    default_draws,
    dedupe,
    evaluate,
    sample_list,
    weighted_vote_error,
)


@dataclass
class RunResult:
    program: MomentProgram
    solution: MomentSolution
    votes: np.ndarray
    candidates: CandidateList
    deduped: CandidateList | None
    metrics: dict = field(default_factory=dict)


def pick_variant(ds: Dataset, boolean: bool = False) -> str:
    if boolean:
        return "boolean"
    return "noisy" if ds.zeta > 0 else "plain"


def solve_round(
    ds: Dataset,
    alpha: float | None = None,
    degree: int = 2,
    variant: str | None = None,
    draws: int | None = None,
    eta: float = 0.1,
    seed: int | None = None,
    tol: float = 1e-6,
    max_iter: int = 20000,
    warm_start: bool = True,
    dedupe_radius: float | None = None,
) -> RunResult:
    """Build, solve, and round one instance; metrics mirror the CLI output."""
    alpha = ds.alpha if alpha is None else alpha
    variant = pick_variant(ds) if variant is None else variant
    seed = ds.seed if seed is None else seed
    t0 = time.perf_counter()
    prog = build_program(ds, alpha, degree, variant)
    warm = None
    if warm_start and ds.inlier_mask is not None and ds.ell_star is not None:
        _, warm = feasibility_witness(ds, degree=degree)
    raw = sdpmod.solve(prog.sdp, tol=tol, max_iter=max_iter, warm_start=warm)
    if raw.status == "infeasible_suspected":
        raise sdpmod.SolverFailure(
            f"solver reports infeasible_suspected "
            f"(primal={raw.primal_residual:.2e}, dual={raw.dual_residual:.2e})"
        )
    sol = extract_pseudo_moments(raw, prog)
    votes = compute_votes(sol)
    n_draws = default_draws(alpha) if draws is None else draws
    clist = sample_list(
        votes, sol.pE_w, alpha, n_draws, seed, mass_target=prog.mass_target
    )
    radius = eta / 2.0 if dedupe_radius is None else dedupe_radius
    dlist = dedupe(clist, radius)
    metrics = {
        "objective": float(sol.objective),
        "solver_status": raw.status,
        "solver_iterations": raw.iterations,
        "primal_residual": raw.primal_residual,
        "dual_residual": raw.dual_residual,
        "variant": variant,
        "degree": degree,
        "draws": n_draws,
        "mass_target": prog.mass_target,
        "sum_pE_w": float(sol.pE_w.sum()),
        "wall_time_s": time.perf_counter() - t0,
        "list_size": len(clist),
        "dedupe_radius": radius,
        "deduped_size": len(dlist),
    }
    if ds.inlier_mask is not None:
        metrics["inlier_weight"] = float(sol.pE_w[ds.inlier_mask].sum())
    if ds.ell_star is not None and ds.inlier_mask is not None:
        metrics["weighted_vote_error"] = weighted_vote_error(
            sol, ds.inlier_mask, ds.ell_star
        )
    if ds.ell_star is not None:
        metrics.update(evaluate(clist, ds.ell_star, eta))
        metrics["eta"] = eta
    return RunResult(
        program=prog,
        solution=sol,
        votes=votes,
        candidates=clist,
        deduped=dlist,
        metrics=metrics,
    )


def acceptance_instance(seed: int, zeta: float = 0.0) -> Dataset:
    """The d=4, n=120, alpha=0.4 second-plant family used by the smoke suite."""
    return gen_dataset(
        "gaussian",
        d=4,
        n=120,
        alpha=0.4,
        seed=seed,
        zeta=zeta,
        adversary=AdversaryStrategy.second_plant(),
    )


def recovery_trial(seed: int, zeta: float = 0.0, eta: float = 0.1, draws: int = 50,
                   tol: float = 1e-6) -> dict:
    """One seed of the recovery sweep; returns the run metrics only."""
    ds = acceptance_instance(seed, zeta=zeta)
    res = solve_round(ds, draws=draws, eta=eta, tol=tol)
    return res.metrics
