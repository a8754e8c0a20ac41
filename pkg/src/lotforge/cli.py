"""Command-line interface: solve, render, validate, oracle, bench, gen.

Exit codes: 0 success, 1 validation failures, 2 infeasible instance, 3 bad input.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import engine, oracle, render, synth
from .backend import BACKEND_ENV_VAR, BackendUnavailable
from .formulations import FormulationKind, MultiEntrance, TurnRestriction, Variant
from .grid import (FieldParams, GridError, GridSpec, Mode, dump_instance,
                   instance_from_dict, instance_to_dict, load_instance,
                   rasterize_polygon)
from .model import Layout, SolveStatus

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3


class InputError(Exception):
    pass


def _read_instance(path: str, mode_override: str | None = None) -> tuple[GridSpec, FieldParams]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        grid, params = load_instance(text)
    except GridError as exc:
        raise InputError(str(exc)) from exc
    if mode_override and mode_override != grid.mode.value:
        mode = Mode(mode_override)
        exits = grid.exits if mode is Mode.ONE_WAY else ()
        try:
            grid = grid.with_access(grid.entrances, exits, mode=mode)
        except GridError as exc:
            raise InputError(str(exc)) from exc
    return grid, params


def _read_layout(path: str) -> tuple[Layout, dict | None]:
    """Accepts a bare layout JSON or a solve-result JSON with a layout field."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read layout {path}: {exc}") from exc
    instance = None
    if isinstance(data, dict) and "layout" in data:
        instance = data.get("instance")
        data = data["layout"]
    if data is None:
        raise InputError(f"{path} holds no layout")
    return Layout.from_dict(data), instance


def _kind_from_args(args) -> FormulationKind:
    return FormulationKind(
        variant=Variant(args.formulation),
        turn=TurnRestriction(args.turn),
        multi_entrance=MultiEntrance(args.multi_entrance),
    )


def _resolve_multi(args, grid: GridSpec) -> None:
    if args.multi_entrance == "auto":
        args.multi_entrance = "single" if len(grid.entrances) <= 1 else "connected"


def cmd_solve(args) -> int:
    grid, params = _read_instance(args.instance, args.mode)
    _resolve_multi(args, grid)
    kind = _kind_from_args(args)
    log_fh = None
    log_fn = None
    if args.log_rounds:
        log_fh = open(args.log_rounds, "w")

        def log_fn(record):
            log_fh.write(json.dumps(record) + "\n")

    try:
        result = engine.solve_instance(grid, params, kind, budget=args.time_limit,
                                       backend=args.backend, log=log_fn,
                                       per_component_cuts=args.per_component_cuts)
    finally:
        if log_fh:
            log_fh.close()
    payload = result.to_dict()
    payload["instance"] = instance_to_dict(grid, params)
    payload["formulation"] = kind.variant.value
    if args.counts:
        from .formulations import build_model
        payload["constraint_counts"] = build_model(grid, params, kind).model.tag_counts()
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_INFEASIBLE if result.status is SolveStatus.INFEASIBLE else EXIT_OK


def cmd_render(args) -> int:
    layout, instance = _read_layout(args.layout)
    if args.instance:
        grid, params = _read_instance(args.instance)
    elif instance is not None:
        grid, params = instance_from_dict(instance)
    else:
        raise InputError("render needs an instance (embedded in the result or via --instance)")
    style = render.RenderStyle(format=args.format, show_directions=args.show_directions,
                               flip_arrows=args.flip_arrows)
    try:
        if args.format == "ascii":
            text = render.render_ascii(layout, grid, params, style)
        else:
            text = render.render_svg(layout, grid, params, style)
    except (render.UnknownFormat, ValueError) as exc:
        raise InputError(str(exc)) from exc
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    grid, params = _read_instance(args.instance)
    layout, _ = _read_layout(args.layout)
    multi = MultiEntrance.SINGLE if len(grid.entrances) <= 1 else MultiEntrance(args.multi_entrance_check)
    report = engine.validate_layout(layout, grid, params, multi_entrance=multi,
                                    turn=TurnRestriction(args.turn))
    if report.ok:
        print("layout valid:", layout.stall_count, "stalls")
        return EXIT_OK
    for violation in report.violations:
        print("VIOLATION:", violation)
    return EXIT_INVALID


def cmd_oracle(args) -> int:
    grid, params = _read_instance(args.instance)
    try:
        if grid.mode is Mode.TWO_WAY:
            result = oracle.brute_force_two_way(grid, params)
        else:
            result = oracle.brute_force_one_way(grid, params)
    except (oracle.InstanceTooLarge, oracle.UnsupportedInstance) as exc:
        raise InputError(str(exc)) from exc
    if result.optimum is None:
        print(json.dumps({"optimum": None, "explored": result.explored}))
        return EXIT_INFEASIBLE
    payload = {"optimum": result.optimum, "explored": result.explored,
               "witness": result.witness.to_dict()}
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read manifest: {exc}") from exc
    kinds = [FormulationKind(variant=Variant(k)) for k in manifest.get("kinds", ["flow", "flow-vis", "bnc"])]
    instances = []
    base = Path(args.manifest).parent
    for entry in manifest.get("instances", []):
        path = Path(entry)
        if not path.is_absolute():
            path = base / path
        grid, params = _read_instance(str(path))
        instances.append((path.stem, grid, params))
    if not instances:
        raise InputError("manifest lists no instances")
    rows = engine.compare_formulations(instances, kinds, budget=args.budget,
                                       backend=args.backend, workers=args.workers)
    summary = engine.summarize_rows(rows)
    out = Path(args.out) if args.out else None
    fh = out.open("w", newline="") if out else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(["instance", "kind", "mode", "status", "LB", "UB", "Gap", "Time", "cut_rounds", "cuts"])
        for row in rows:
            d = row.to_dict()
            writer.writerow([d["instance"], d["kind"], d["mode"], d["status"], d["lb"],
                             d["ub"], d["gap"], d["time_s"], d["cut_rounds"], d["cuts"]])
        writer.writerow([])
        writer.writerow(["group", "kind", "count", "Time avg", "Time median", "LB avg",
                         "LB median", "UB avg", "Gap avg", "Gap median", "optimal"])
        for s in summary:
            writer.writerow([s["group"], s["kind"], s["count"], s["avg_time_s"],
                             s["median_time_s"], s["avg_lb"], s["median_lb"], s["avg_ub"],
                             s["avg_gap"], s["median_gap"], s["optimal_count"]])
    finally:
        if out:
            fh.close()
    return EXIT_OK


def cmd_gen(args) -> int:
    grid, params = synth.generate_instance(args.rows, args.cols, args.blocked_rate,
                                           mode=args.mode, seed=args.seed,
                                           entrances=args.entrances)
    text = dump_instance(grid, params)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_rasterize(args) -> int:
    try:
        data = json.loads(Path(args.geojson).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read GeoJSON: {exc}") from exc
    geom = data.get("geometry", data)
    if geom.get("type") != "Polygon":
        raise InputError("expected a GeoJSON Polygon")
    ring = geom["coordinates"][0]
    grid = rasterize_polygon(ring, args.cell_size, rotation_deg=args.rotation,
                             min_overlap_fraction=args.min_overlap, mode=args.mode)
    params = synth.default_params(grid.mode)
    if args.entrance:
        grid = grid.with_access([tuple(args.entrance)],
                                [tuple(args.exit)] if args.exit else ())
    text = dump_instance(grid, params)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lotforge",
        description="Capacity-maximizing parking-lot layouts on rasterized grids.",
        epilog=f"The solver backend is selected via --backend or ${BACKEND_ENV_VAR}.")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve an instance JSON")
    ps.add_argument("instance")
    ps.add_argument("--mode", choices=[m.value for m in Mode], default=None,
                    help="override the instance mode")
    ps.add_argument("--formulation", choices=[v.value for v in Variant], default="bnc")
    ps.add_argument("--time-limit", type=float, default=900.0)
    ps.add_argument("--turn", choices=[t.value for t in TurnRestriction], default="off")
    ps.add_argument("--multi-entrance", choices=["auto", "single", "connected", "disjoint"],
                    default="auto")
    ps.add_argument("--per-component-cuts", action="store_true",
                    help="one cut batch per stranded component (one-way)")
    ps.add_argument("--backend", default=None)
    ps.add_argument("--counts", action="store_true", help="report per-family constraint counts")
    ps.add_argument("--log-rounds", default=None, help="write per-round JSON records here")
    ps.add_argument("--out", default=None)
    ps.set_defaults(func=cmd_solve)

    pr = sub.add_parser("render", help="render a layout or solve result")
    pr.add_argument("layout")
    pr.add_argument("--instance", default=None)
    pr.add_argument("--format", choices=["ascii", "svg"], default="ascii")
    pr.add_argument("--show-directions", action="store_true")
    pr.add_argument("--flip-arrows", action="store_true")
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=cmd_render)

    pv = sub.add_parser("validate", help="validate a layout against an instance")
    pv.add_argument("instance")
    pv.add_argument("layout")
    pv.add_argument("--turn", choices=[t.value for t in TurnRestriction], default="off")
    pv.add_argument("--multi-entrance-check", choices=["connected", "disjoint"],
                    default="connected")
    pv.set_defaults(func=cmd_validate)

    po = sub.add_parser("oracle", help="brute-force optimum for a small instance")
    po.add_argument("instance")
    po.set_defaults(func=cmd_oracle)

    pb = sub.add_parser("bench", help="compare formulations over a manifest of instances")
    pb.add_argument("manifest")
    pb.add_argument("--budget", type=float, default=900.0)
    pb.add_argument("--workers", type=int, default=1)
    pb.add_argument("--backend", default=None)
    pb.add_argument("--out", default=None)
    pb.set_defaults(func=cmd_bench)

    pg = sub.add_parser("gen", help="generate a synthetic instance")
    pg.add_argument("--rows", type=int, required=True)
    pg.add_argument("--cols", type=int, required=True)
    pg.add_argument("--blocked-rate", type=float, default=0.2)
    pg.add_argument("--mode", choices=[m.value for m in Mode], default="two-way")
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--entrances", type=int, default=1)
    pg.add_argument("--out", default=None)
    pg.set_defaults(func=cmd_gen)

    pz = sub.add_parser("rasterize", help="rasterize a GeoJSON polygon into an instance grid")
    pz.add_argument("geojson")
    pz.add_argument("--cell-size", type=float, default=3.0)
    pz.add_argument("--rotation", type=float, default=0.0)
    pz.add_argument("--min-overlap", type=float, default=0.0)
    pz.add_argument("--mode", choices=[m.value for m in Mode], default="two-way")
    pz.add_argument("--entrance", type=int, nargs=2, default=None)
    pz.add_argument("--exit", type=int, nargs=2, default=None)
    pz.add_argument("--out", default=None)
    pz.set_defaults(func=cmd_rasterize)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GridError, BackendUnavailable, engine.BudgetNonPositive) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
