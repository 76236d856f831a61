"""Command-line front end.

Subcommands: robustify (least-favorable stage models and ratio bands),
optimize (solve a model file into a threshold policy), check-optimality
(would early positive declarations help?), simulate (stream a solved
policy), and compare (sweep the prior and race the cascade against ideal
and real duty cycling, CSV out).

Exit codes: 0 success, 2 malformed input, 3 infeasible configuration,
4 numerical failure.  GUIDEDPROC_THREADS>1 parallelizes compare rows.
"""

from __future__ import annotations

import argparse
import csv
import json
import io as _stdio
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__, io
from .cascade import (
    calibrate_lambda,
    check_cascade_optimality,
    evaluate,
    solve,
)
from .dutycycle import DutyCycleSpec, dc_risk, dominance_check, energy_equivalent_rho, ideal_duty_cycle
from .errors import (
    DegenerateContaminationError,
    GuidedProcError,
    InfeasibleBandError,
    InfeasibleBudgetError,
    ModelFormatError,
)
from .graph import solve_graph
from .models import BeliefGrid
from .robust import BeliefInterval, least_favorable, model_posterior_bounds
from .sim import StreamConfig, simulate

COMPARE_COLUMNS = [
    "pi0",
    "gp_risk",
    "dc_ideal_risk",
    "dc_real_risk",
    "gp_energy",
    "dc_energy",
    "gp_fa",
    "dc_fa",
    "gp_miss",
    "dc_miss",
    "dominance_eq13",
    "dominance_eq14",
]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="guidedproc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"guidedproc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("model", help="model file (JSON)")
        sp.add_argument("-o", "--output", default=None, help="output path (default stdout)")
        sp.add_argument("--grid", type=int, default=None, help="belief grid size override")

    sp = sub.add_parser("robustify", help="least-favorable stage models under contamination")
    common(sp)

    sp = sub.add_parser("optimize", help="solve the censoring policy")
    common(sp)
    sp.add_argument("--prior", type=float, default=None)
    sp.add_argument("--energy-weight", type=float, default=None)
    sp.add_argument("--energy-budget", type=float, default=None)

    sp = sub.add_parser("check-optimality", help="verify censoring-only decisions suffice")
    common(sp)
    sp.add_argument("--prior", type=float, default=None)

    sp = sub.add_parser("simulate", help="stream frames against a solved policy")
    common(sp)
    sp.add_argument("--policy", default=None, help="policy JSON from optimize (default: solve now)")
    sp.add_argument("--prior", type=float, default=None, help="stream prior override")
    sp.add_argument("--mode", choices=["belief", "adaptive"], default="belief")
    sp.add_argument("--mu", type=float, default=1e-3)
    sp.add_argument("--burn-in", type=int, default=0)
    sp.add_argument("--n-frames", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=1)

    sp = sub.add_parser("compare", help="prior sweep: cascade vs duty cycling (CSV)")
    common(sp)
    sp.add_argument("--sweep", default=None, metavar="LO:HI:N", help="prior sweep override")
    sp.add_argument("--n-frames", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=1)
    return p


def cmd_robustify(args) -> int:
    doc = io.load_model_file(args.model)
    if doc.kind != "cascade":
        raise ModelFormatError("robustify applies to cascade model files")
    interval = BeliefInterval.point(doc.default_prior())
    stages = []
    for k, (model, _, _, u) in enumerate(doc.stages):
        last = k == len(doc.stages) - 1
        if last and not u.is_zero:
            raise ModelFormatError("last stage: uncertainty is not supported there")
        q, band = least_favorable(model, u)
        if not last:
            interval = model_posterior_bounds(interval, q)
        stages.append(
            {
                "q0": q.p0.tolist(),
                "q1": q.p1.tolist(),
                "band": io.band_payload(band),
                "posterior_lo": 0.0 if last else interval.lo,
                "posterior_hi": 1.0 if last else interval.hi,
            }
        )
    bundle = io.result_bundle(doc, prior=doc.default_prior(), stages=stages)
    text = io.write_json(bundle, args.output)
    if args.output is None:
        sys.stdout.write(text + "\n")
    return 0


def _solve_document(doc, prior, grid, energy_weight=None, energy_budget=None):
    spec, bands = io.build_from_document(
        doc, prior=prior, energy_weight=energy_weight, energy_budget=energy_budget
    )
    if spec.energy_budget is not None:
        lam, policy = calibrate_lambda(spec, grid)
        spec = replace(spec, energy_weight=lam, energy_budget=None)
    else:
        policy = solve(spec, grid)
    return spec, bands, policy


def cmd_optimize(args) -> int:
    doc = io.load_model_file(args.model)
    grid = BeliefGrid(args.grid or doc.grid_size)
    if doc.kind == "graph":
        if doc.energy_weight is None:
            raise ModelFormatError("graph model files need energy_weight")
        prior = args.prior if args.prior is not None else doc.default_prior()
        gpol = solve_graph(doc.graph, doc.miss_cost, doc.fa_cost, doc.energy_weight, prior, grid)
        bundle = io.result_bundle(doc, graph_policy=io.graph_policy_payload(gpol))
        text = io.write_json(bundle, args.output)
        if args.output is None:
            sys.stdout.write(text + "\n")
        return 0
    spec, bands, policy = _solve_document(
        doc, args.prior, grid, energy_weight=args.energy_weight, energy_budget=args.energy_budget
    )
    report = evaluate(spec, policy)
    opt = check_cascade_optimality(spec, policy)
    bundle = io.result_bundle(
        doc,
        prior=spec.prior,
        policy=io.policy_payload(policy),
        risk=io.risk_payload(report),
        bands=[io.band_payload(b) for b in bands],
        optimality={
            "positive_thresholds": [io.finite_or_none(t) for t in opt.positive_thresholds],
            "per_stage": list(opt.per_stage),
            "all_hold": opt.all_hold,
        },
    )
    text = io.write_json(bundle, args.output)
    if args.output is None:
        sys.stdout.write(text + "\n")
    return 0


def cmd_check_optimality(args) -> int:
    doc = io.load_model_file(args.model)
    if doc.kind != "cascade":
        raise ModelFormatError("check-optimality applies to cascade model files")
    grid = BeliefGrid(args.grid or doc.grid_size)
    spec, _, policy = _solve_document(doc, args.prior, grid)
    opt = check_cascade_optimality(spec, policy)
    bundle = io.result_bundle(
        doc,
        prior=spec.prior,
        positive_thresholds=[io.finite_or_none(t) for t in opt.positive_thresholds],
        per_stage=list(opt.per_stage),
        all_hold=opt.all_hold,
    )
    text = io.write_json(bundle, args.output)
    if args.output is None:
        sys.stdout.write(text + "\n")
    return 0


def cmd_simulate(args) -> int:
    doc = io.load_model_file(args.model)
    grid = BeliefGrid(args.grid or doc.grid_size)
    if doc.kind == "graph":
        if args.mode != "belief":
            raise ModelFormatError("adaptive mode applies to cascade systems")
        if doc.energy_weight is None:
            raise ModelFormatError("graph model files need energy_weight")
        prior = args.prior if args.prior is not None else doc.default_prior()
        policy = solve_graph(doc.graph, doc.miss_cost, doc.fa_cost, doc.energy_weight, prior, grid)
        config = StreamConfig(
            system=doc.graph, n_frames=args.n_frames, seed=args.seed, prior=prior
        )
        report = simulate(config, policy)
        bundle = io.result_bundle(doc, simulation=io.sim_payload(report), v0=policy.v0)
        text = io.write_json(bundle, args.output)
        if args.output is None:
            sys.stdout.write(text + "\n")
        return 0
    if args.policy is not None:
        spec, _ = io.build_from_document(doc, prior=args.prior)
        with open(args.policy, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        policy = io.policy_from_payload(payload.get("policy", payload))
    else:
        spec, _, policy = _solve_document(doc, args.prior, grid)
    config = StreamConfig(
        system=spec,
        n_frames=args.n_frames,
        seed=args.seed,
        mode=args.mode,
        mu=args.mu,
        burn_in=args.burn_in,
        prior=args.prior,
    )
    report = simulate(config, policy)
    bundle = io.result_bundle(
        doc,
        simulation=io.sim_payload(report),
        policy=io.policy_payload(policy),
        analytic_risk=io.risk_payload(evaluate(spec, policy)) if args.policy is None else None,
    )
    text = io.write_json(bundle, args.output)
    if args.output is None:
        sys.stdout.write(text + "\n")
    return 0


def _duty_block(doc) -> tuple[float, float]:
    if doc.duty_cycle is not None:
        return doc.duty_cycle
    # fall back to powering every post-wake stage as one block
    on = sum(s[1] for s in doc.stages[1:])
    off = sum(s[2] for s in doc.stages[1:])
    if not off < on:
        raise ModelFormatError("cannot derive a duty-cycle block from the stage costs")
    return float(on), float(off)


def _compare_row(task) -> dict:
    raw, pi0, n_frames, seed, grid_size, row = task
    doc = io.parse_model_document(raw)
    grid = BeliefGrid(grid_size)
    spec, _, policy = _solve_document(doc, pi0, grid)
    lam = policy.energy_weight
    report = evaluate(spec, policy)
    verdict = dominance_check(spec, policy, report)
    last = spec.stages[-1]

    rho_ideal, _ = energy_equivalent_rho(report.energy, last.on_cost, last.off_cost)
    ideal_total = dc_risk(ideal_duty_cycle(spec, rho_ideal), lam).total

    dc_on, dc_off = _duty_block(doc)
    rho_real, _ = energy_equivalent_rho(report.energy, dc_on, dc_off)
    dc_spec = DutyCycleSpec(
        detector=last.model,
        rho=rho_real,
        on_cost=dc_on,
        off_cost=dc_off,
        miss_cost=spec.miss_cost,
        fa_cost=spec.fa_cost,
        prior=pi0,
    )
    gp_sim = simulate(
        StreamConfig(system=spec, n_frames=n_frames, seed=seed + 2 * row), policy
    )
    dc_sim = simulate(
        StreamConfig(
            system=dc_spec, n_frames=n_frames, seed=seed + 2 * row + 1, energy_weight=lam
        ),
        None,
    )
    return {
        "pi0": pi0,
        "gp_risk": report.total,
        "dc_ideal_risk": ideal_total,
        "dc_real_risk": dc_sim.empirical_risk,
        "gp_energy": report.energy,
        "dc_energy": dc_sim.energy,
        "gp_fa": gp_sim.fa_rate,
        "dc_fa": dc_sim.fa_rate,
        "gp_miss": gp_sim.miss_rate,
        "dc_miss": dc_sim.miss_rate,
        "dominance_eq13": verdict.beats_always_off,
        "dominance_eq14": verdict.censor_miss_within_saving,
    }


def _parse_sweep(text) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ModelFormatError("--sweep wants LO:HI:N")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not (0.0 <= lo <= hi <= 1.0 and n >= 1):
        raise ModelFormatError("--sweep out of range")
    return lo, hi, n


def cmd_compare(args) -> int:
    doc = io.load_model_file(args.model)
    if doc.kind != "cascade":
        raise ModelFormatError("compare applies to cascade model files")
    if args.sweep is not None:
        lo, hi, n = _parse_sweep(args.sweep)
        points = np.linspace(lo, hi, n)
    else:
        points = doc.sweep_points()
    grid_size = args.grid or doc.grid_size
    tasks = [
        (doc.raw, float(pi0), args.n_frames, args.seed, grid_size, row)
        for row, pi0 in enumerate(points)
    ]
    workers = int(os.environ.get("GUIDEDPROC_THREADS", "1"))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_compare_row, tasks))
    else:
        rows = [_compare_row(t) for t in tasks]
    rows.sort(key=lambda r: r["pi0"])

    buf = _stdio.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(
            {k: (str(v).lower() if isinstance(v, bool) else repr(v) if isinstance(v, float) else v) for k, v in r.items()}
        )
    text = buf.getvalue()
    if args.output is None:
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


_COMMANDS = {
    "robustify": cmd_robustify,
    "optimize": cmd_optimize,
    "check-optimality": cmd_check_optimality,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InfeasibleBandError, InfeasibleBudgetError, DegenerateContaminationError) as exc:
        print(f"guidedproc: infeasible: {exc}", file=sys.stderr)
        return 3
    except ModelFormatError as exc:
        print(f"guidedproc: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"guidedproc: {exc}", file=sys.stderr)
        return 2
    except (GuidedProcError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"guidedproc: numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
