"""Command-line front end for reproducible experiments.

Subcommands: gen, solve-round (also solve/round aliases), oracle, certify,
lowerbound, bench.  Every run writes manifest.json echoing the resolved
configuration; re-running a command with the same arguments reproduces the
outputs bitwise on one platform.

Exit codes: 0 success, 2 usage error, 3 solver failure, 4 resource guard.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import lowerbound as lb
from . import oracle as oraclemod
from . import sdp as sdpmod
from .certificates import CertificationFailedError, certify_anticoncentration
from .datagen import (
    AdversaryStrategy,
    export_csv,
    gen_dataset,
    gen_gv_instance,
    load_dataset,
    save_dataset,
)
from .oracle import GuardExceeded as OracleGuard
from .lowerbound import GuardExceeded as LowerboundGuard
from .pipeline import solve_round
from .polyapprox import (
    choose_core_indicator,
    gaussian_univariate_reduction,
)

EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_GUARD = 4

METRICS_SCHEMA_VERSION = 1


def _write_manifest(outdir: Path, command: str, args: dict, outputs: list[str]) -> None:
    manifest = {
        "tool": "listdecreg",
        "version": __version__,
        "command": command,
        "config": args,
        "outputs": outputs,
        "metrics_schema_version": METRICS_SCHEMA_VERSION,
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )


def _outdir(ns) -> Path:
    out = Path(ns.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _adversary_from_args(ns) -> AdversaryStrategy:
    kind = ns.adversary
    if kind == "random":
        return AdversaryStrategy.random_uniform(ns.adversary_box)
    if kind == "second-plant":
        return AdversaryStrategy.second_plant()
    if kind == "gv":
        return AdversaryStrategy.gv_ensemble()
    if kind == "mixture-ri":
        return AdversaryStrategy.mixture_ri(ns.q, ns.coord - 1)
    raise ValueError(f"unknown adversary {kind!r}")


def cmd_gen(ns) -> int:
    out = _outdir(ns)
    if ns.adversary == "gv":
        ds = gen_gv_instance(ns.d, ns.seed)
    else:
        ds = gen_dataset(
            ns.dist,
            d=ns.d,
            n=ns.n,
            alpha=ns.alpha,
            seed=ns.seed,
            zeta=ns.zeta,
            adversary=_adversary_from_args(ns),
        )
    path = out / "dataset.json"
    save_dataset(ds, path)
    outputs = [str(path)]
    if ns.format == "csv":
        csv_path = out / "dataset.csv"
        export_csv(ds, csv_path)
        outputs.append(str(csv_path))
    _write_manifest(out, "gen", vars(ns) | {"realized_alpha": ds.alpha}, outputs)
    if ns.verbose:
        print(f"wrote {path} (n={ds.n}, d={ds.d}, alpha={ds.alpha:.4f})")
    return 0


def cmd_solve_round(ns) -> int:
    out = _outdir(ns)
    ds = load_dataset(ns.dataset)
    variant = "boolean" if ns.variant == "boolean" else None
    res = solve_round(
        ds,
        degree=ns.degree,
        variant=variant,
        draws=ns.draws,
        eta=ns.eta,
        seed=ns.seed if ns.seed is not None else ds.seed,
        tol=ns.tol,
        max_iter=ns.max_iter,
        warm_start=not ns.no_warm_start,
    )
    list_path = out / "candidates.json"
    res.candidates.save(list_path)
    csv_path = out / "candidates.csv"
    res.candidates.export_csv(csv_path)
    metrics_path = out / "metrics.json"
    extra = {}
    if ds.zeta > 0:
        extra["noise_bound"] = 4.0 * ds.zeta
    metrics_path.write_text(
        json.dumps(res.metrics | extra, indent=2, sort_keys=True), encoding="utf-8"
    )
    _write_manifest(
        out,
        "solve-round",
        vars(ns) | {"resolved_variant": res.metrics["variant"]} | extra,
        [str(list_path), str(csv_path), str(metrics_path)],
    )
    if ns.verbose:
        print(json.dumps(res.metrics, indent=2, sort_keys=True))
    return 0


def cmd_oracle(ns) -> int:
    out = _outdir(ns)
    ds = load_dataset(ns.dataset)
    sets = oraclemod.enumerate_soluble(ds, ns.size)
    report: dict = {"soluble_sets": len(sets)}
    outputs = []
    if sets:
        mu = oraclemod.max_uniform_distribution(sets, ds.n)
        draws = ns.draws or oraclemod.default_oracle_draws(ds.alpha, ns.delta)
        clist = oraclemod.identifiability_list(ds, mu, draws, ns.seed)
        list_path = out / "oracle_list.json"
        clist.save(list_path)
        outputs.append(str(list_path))
        report |= {
            "W": mu.W.tolist(),
            "sum_W_sq": float(np.dot(mu.W, mu.W)),
            "draws": draws,
        }
        if ds.inlier_mask is not None:
            report["inlier_W_mass"] = float(mu.W[ds.inlier_mask].sum())
        mu_path = out / "oracle_distribution.json"
        mu_path.write_text(json.dumps(mu.to_dict(), indent=2), encoding="utf-8")
        outputs.append(str(mu_path))
    report_path = out / "oracle_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
    outputs.append(str(report_path))
    _write_manifest(out, "oracle", vars(ns), outputs)
    if ns.verbose:
        print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_certify(ns) -> int:
    out = _outdir(ns)
    q, L, report = choose_core_indicator(ns.delta, ns.C, dist_hint=ns.dist)
    result = {
        "delta": ns.delta,
        "C": ns.C,
        "L": L,
        "degree": q.degree,
        "report": {
            "q0": report.q0,
            "max_dev_core": report.max_dev_core,
            "band_max": report.band_max,
            "expectation": report.expectation,
            "passed": report.passed,
        },
    }
    outputs = []
    poly_path = out / "indicator.json"
    poly_path.write_text(json.dumps(q.to_dict()), encoding="utf-8")
    outputs.append(str(poly_path))
    F = gaussian_univariate_reduction(q)
    s = np.linspace(0.0, 1.0, 2001)
    honest = float(np.max(s * F(s)))
    result["max_sF"] = honest
    cert_C = ns.certify_C if ns.certify_C is not None else ns.C
    try:
        cert = certify_anticoncentration(F, cert_C, ns.delta)
        cert_path = out / "certificate.json"
        cert_path.write_text(json.dumps(cert.to_dict()), encoding="utf-8")
        outputs.append(str(cert_path))
        result["certificate"] = {
            "C": cert_C,
            "residual": cert.residual(),
            "form": cert.form,
        }
    except CertificationFailedError as err:
        result["certificate"] = {
            "C": cert_C,
            "failed": True,
            "worst_s": err.worst_s,
            "margin": err.margin,
        }
    report_path = out / "certify_report.json"
    report_path.write_text(json.dumps(result, indent=2, sort_keys=True), encoding="utf-8")
    outputs.append(str(report_path))
    _write_manifest(out, "certify", vars(ns), outputs)
    if ns.verbose:
        print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def cmd_lowerbound(ns) -> int:
    out = _outdir(ns)
    result: dict = {"q": ns.q, "d": ns.d}
    if ns.check_joint:
        tables = [
            lb.joint_law(lb.EnsembleSpec(q=ns.q, d=ns.d, coord=i + 1))
            for i in range(ns.d)
        ]
        identical = all(lb.tables_equal(tables[0], t) for t in tables[1:])
        result["identical"] = identical
        result["table_size"] = len(tables[0])
    if ns.anticonc_direction is not None:
        v = [float(t) for t in ns.anticonc_direction.split(",")]
        prob = lb.hypercube_anticonc(v, ns.q)
        result["anticonc"] = {
            "direction": v,
            "numerator": prob.numerator,
            "denominator": prob.denominator,
        }
    report_path = out / "lowerbound_report.json"
    report_path.write_text(json.dumps(result, indent=2, sort_keys=True), encoding="utf-8")
    _write_manifest(out, "lowerbound", vars(ns), [str(report_path)])
    if ns.verbose:
        print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def cmd_bench(ns) -> int:
    from concurrent.futures import ProcessPoolExecutor

    out = _outdir(ns)
    seeds = list(range(ns.seed, ns.seed + ns.instances))
    rows = []
    from .pipeline import recovery_trial

    if ns.workers > 1:
        with ProcessPoolExecutor(max_workers=ns.workers) as pool:
            futures = {s: pool.submit(recovery_trial, s, ns.zeta, ns.eta) for s in seeds}
            for s in seeds:
                rows.append({"seed": s} | futures[s].result())
    else:
        for s in seeds:
            rows.append({"seed": s} | recovery_trial(s, ns.zeta, ns.eta))
    csv_path = out / "bench.csv"
    keys = ["seed"] + sorted(set().union(*(set(r) for r in rows)) - {"seed"})
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(repr(r.get(k, "")) for k in keys) + "\n")
    hits = sum(1 for r in rows if r.get("hit"))
    summary = {"instances": len(rows), "hits": hits}
    _write_manifest(out, "bench", vars(ns), [str(csv_path)])
    print(json.dumps(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="listdecreg",
        description="List-decodable regression via low-degree moment relaxations.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", default=".", help="directory for outputs")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("gen", help="generate a corrupted instance")
    common(p)
    p.add_argument("--dist", default="gaussian")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, default=120)
    p.add_argument("--alpha", type=float, required=False)
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument(
        "--adversary",
        choices=["second-plant", "random", "gv", "mixture-ri"],
        default="second-plant",
    )
    p.add_argument("--adversary-box", type=float, default=1.0)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--coord", type=int, default=1)
    p.set_defaults(func=cmd_gen)

    for name in ("solve-round", "solve", "round"):
        p = sub.add_parser(name, help="solve the relaxation and round to a list")
        common(p)
        p.add_argument("--dataset", required=True)
        p.add_argument("--degree", type=int, default=2)
        p.add_argument("--variant", choices=["auto", "boolean"], default="auto")
        p.add_argument("--draws", type=int, default=None)
        p.add_argument("--eta", type=float, default=0.1)
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--max-iter", type=int, default=20000)
        p.add_argument("--no-warm-start", action="store_true")
        p.set_defaults(func=cmd_solve_round, seed=None)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("oracle", help="brute-force soluble-set oracle")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("certify", help="core indicator + anti-concentration certificate")
    common(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--dist", choices=["gauss", "hypercube01"], default="gauss")
    p.add_argument(
        "--certify-C",
        type=float,
        default=None,
        help="constant used for the interval certificate (defaults to --C)",
    )
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("lowerbound", help="exact ensemble and anti-concentration checks")
    common(p)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--check-joint", action="store_true")
    p.add_argument(
        "--anticonc-direction",
        default=None,
        help="comma-separated rational direction for the exact zero-mass count",
    )
    p.set_defaults(func=cmd_lowerbound)

    p = sub.add_parser("bench", help="run the recovery sweep over a seed grid")
    common(p)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "gen" and ns.adversary != "gv" and ns.alpha is None:
        parser.error("--alpha is required unless --adversary gv")
    try:
        return ns.func(ns)
    except (OracleGuard, LowerboundGuard) as err:
        print(f"resource guard exceeded: {err}", file=sys.stderr)
        return EXIT_GUARD
    except sdpmod.SolverFailure as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
