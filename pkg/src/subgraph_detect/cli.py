"""Command-line entry point: ``generate``, ``detect``, ``evaluate``, ``bench``.

Every run writes a manifest next to its outputs recording the command,
inputs, resolved configuration, seed, tool version, and timestamps, so a
run can be repeated from the manifest alone. Exit codes: 0 success, 1
internal failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import formats
from .baseline_search import EXHAUSTIVE, duration_preset
from .detection_pipeline import (
    CUBE_SEARCHERS,
    REWEIGHT_MEAN,
    MultiDetectConfig,
    SearchOptions,
    Searcher,
    detect_multiple,
)
from .evaluation import (
    FRONTIER_POOLS,
    BenchInstance,
    MethodSpec,
    benchmark,
    evaluate,
    frontier_methods,
    frontier_table,
)
from .spacetime_graph import GraphConfig, Linking, NodeStructure, VideoExtent, build_graph
from .synthetic_data import generate, load_spec, spec_to_dict

OUT_ENV = "SUBGRAPH_DETECT_OUT"

METHODS = [s.value for s in Searcher if s is not Searcher.SUBGRAPH]
SLIDING = {Searcher.T_SLIDING.value, Searcher.T_SLIDING_NORM.value}


class UsageError(ValueError):
    """Bad flag combination; reported with exit code 2."""


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _out_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "."))


def _manifest(command: str, inputs: dict, config: dict, seed, outputs: list, started: str, extra=None) -> dict:
    doc = {
        "command": command,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "config": config,
        "seed": seed,
        "version": _version(),
        "started": started,
        "finished": _now(),
        "outputs": [str(o) for o in outputs],
    }
    if extra:
        doc.update(extra)
    return doc


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".manifest.json")


# generate ------------------------------------------------------------------


def cmd_generate(args) -> int:
    started = _now()
    spec = load_spec(args.spec)
    scenario = generate(spec, args.seed)
    spec = scenario.spec
    out = Path(args.out_dir) if args.out_dir else _out_root() / spec.name
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "features": out / "features.jsonl",
        "model": out / "model.json",
        "truth": out / "truth.jsonl",
    }
    formats.write_features(files["features"], scenario.feature_table)
    formats.write_model(files["model"], scenario.model)
    formats.write_truths(files["truth"], scenario.truths)
    manifest = _manifest(
        "generate",
        {"spec": args.spec},
        {"scenario": spec_to_dict(spec)},
        spec.seed,
        list(files.values()),
        started,
        {
            "video": spec.name,
            "extent": {"num_frames": spec.extent.num_frames, "width": spec.extent.width, "height": spec.extent.height},
        },
    )
    formats.write_json(out / "manifest.json", manifest)
    print(f"wrote {len(scenario.feature_table)} features, {len(scenario.truths)} truths to {out}")
    return 0


# detect --------------------------------------------------------------------


def _parse_grid(text: str) -> tuple[int, int]:
    parts = text.lower().replace("x", " ").replace(",", " ").split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise argparse.ArgumentTypeError(f"grid must look like ROWSxCOLS, got {text!r}")
    rows, cols = int(parts[0]), int(parts[1])
    if rows < 1 or cols < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be >= 1")
    return rows, cols


def _parse_durations(text: str, slab_frames: int):
    if text == EXHAUSTIVE:
        return EXHAUSTIVE
    if not text.replace(",", "").isdigit():
        return duration_preset(text, slab_frames)
    return tuple(int(v) for v in text.split(",") if v)


def _neighbour_manifest(features: Path) -> dict | None:
    m = features.parent / "manifest.json"
    if m.is_file():
        try:
            return formats.read_json(m)
        except ValueError:
            return None
    return None


def _resolve_extent(args, table: np.ndarray, manifest: dict | None) -> tuple[VideoExtent, str]:
    if args.extent:
        return VideoExtent(*args.extent), "flag"
    if manifest and "extent" in manifest:
        e = manifest["extent"]
        return VideoExtent(int(e["num_frames"]), int(e["width"]), int(e["height"])), "manifest"
    if table.size == 0:
        raise ValueError("cannot infer the video extent from an empty feature file; pass --extent")
    t, x, y = (int(v) + 1 for v in table[:, :3].max(axis=0))
    return VideoExtent(t, x, y), "inferred"


def _check_detect_flags(args) -> None:
    cube = Searcher(args.method) in CUBE_SEARCHERS
    if cube and args.grid is None:
        raise UsageError(f"method {args.method} works on spatio-temporal cubes and needs --grid")
    if not cube and args.grid is not None:
        raise UsageError(f"--grid conflicts with method {args.method}, which uses whole-frame slabs")
    if args.jump_reach is not None and args.method != Searcher.T_JUMP.value:
        raise UsageError(f"--jump-reach only applies to t-jump, not {args.method}")
    if (args.durations is not None or args.step is not None) and args.method not in SLIDING:
        raise UsageError(f"--durations/--step only apply to t-sliding and t-sliding-norm, not {args.method}")


def cmd_detect(args) -> int:
    started = _now()
    _check_detect_flags(args)
    features = Path(args.features)
    table = formats.read_features(features)
    model = formats.read_model(args.model)
    manifest = _neighbour_manifest(features)
    extent, extent_source = _resolve_extent(args, table, manifest)
    video = args.video or (manifest or {}).get("video") or features.stem

    method = Searcher(args.method)
    cube = method in CUBE_SEARCHERS
    config = GraphConfig(
        node_structure=NodeStructure.SPATIOTEMPORAL_CUBE if cube else NodeStructure.TEMPORAL_SLAB,
        slab_frames=args.slab_frames,
        spatial_grid=args.grid or (3, 3),
        linking=Linking.TEMPORAL_JUMP if method is Searcher.T_JUMP else Linking.ADJACENT,
        jump_reach=args.jump_reach or 2,
    )
    options = SearchOptions(
        durations=_parse_durations(args.durations, args.slab_frames) if args.durations else EXHAUSTIVE,
        step=args.step or 1,
        nms_threshold=args.nms,
        time_budget=args.time_budget,
    )
    reweight = REWEIGHT_MEAN if args.reweight == REWEIGHT_MEAN else float(args.reweight)
    multi = MultiDetectConfig(args.max_detections, reweight, args.stop_below)

    t0 = time.perf_counter()
    graph = build_graph(table, model, extent, config)
    t1 = time.perf_counter()
    dets = detect_multiple(graph, method, multi, options)
    t2 = time.perf_counter()
    if args.label:
        dets = [replace(d, label=args.label) for d in dets]

    out = Path(args.out) if args.out else _out_root() / "detections.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    formats.write_detections(out, {video: dets})
    formats.write_json(_sidecar(out), _manifest(
        "detect",
        {"features": features, "model": args.model},
        {
            "method": method.value,
            "slab_frames": config.slab_frames,
            "grid": list(config.grid),
            "linking": config.linking.value,
            "jump_reach": config.jump_reach,
            "extent": [extent.num_frames, extent.width, extent.height],
            "extent_source": extent_source,
            "max_detections": multi.max_detections,
            "reweight": multi.reweight_value,
            "stop_below": multi.stop_below,
            "durations": options.durations if isinstance(options.durations, str) else list(options.durations),
            "step": options.step,
            "nms": options.nms_threshold,
            "time_budget": options.time_budget,
            "video": video,
        },
        None,
        [out],
        started,
        {"timing_ms": {"build_graph": (t1 - t0) * 1000.0, "search": (t2 - t1) * 1000.0}},
    ))
    print(f"{len(dets)} detection(s) written to {out}")
    return 0


# evaluate ------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    started = _now()
    dets = formats.read_detections(args.detections)
    truths = formats.read_truths(args.truth)
    unknown = sorted(set(dets) - set(truths))
    if unknown:
        raise ValueError(f"detections reference videos absent from the truth file: {', '.join(unknown)}")
    frame_size = tuple(args.frame_size) if args.frame_size else None
    report = evaluate(dets, truths, args.iou, args.spatial, frame_size)
    value = report.mean_overlap if args.metric == "overlap" else report.average_precision
    doc = {
        "metric": args.metric,
        "value": value,
        "iou_threshold": args.iou,
        "mean_overlap": report.mean_overlap,
        "overlaps": list(report.overlaps),
        "mean_average_precision": report.average_precision,
    }
    out = Path(args.out) if args.out else _out_root() / "report.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    formats.write_json(out, doc)
    formats.write_json(_sidecar(out), _manifest(
        "evaluate",
        {"detections": args.detections, "truth": args.truth},
        {"metric": args.metric, "iou": args.iou, "spatial": args.spatial},
        None,
        [out],
        started,
    ))
    print(f"{args.metric}: {value:.6f}")
    return 0


# bench ---------------------------------------------------------------------


def cmd_bench(args) -> int:
    started = _now()
    instances = []
    for source in args.scenarios:
        sc = generate(load_spec(source), args.seed)
        instances.append(BenchInstance(sc.spec.name, sc.graph(cube=args.cube), sc.truths))
    if args.frontier:
        if args.cube:
            raise UsageError("--frontier compares temporal sliding windows and cannot be combined with --cube")
        methods = frontier_methods(FRONTIER_POOLS)
    else:
        methods = [MethodSpec(m, m) for m in args.methods]
    result = benchmark(methods, instances, args.reps)
    prefix = Path(args.out) if args.out else _out_root() / "bench"
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = prefix.with_name(prefix.name + ".csv")
    summary_path = prefix.with_name(prefix.name + ".summary.json")
    csv_path.write_text(result.to_csv())
    formats.write_json(summary_path, {"summary": result.summary(), "frontier": frontier_table(result)})
    formats.write_json(_sidecar(prefix), _manifest(
        "bench",
        {f"scenario{i}": s for i, s in enumerate(args.scenarios)},
        {"methods": [m.name for m in methods], "reps": args.reps, "cube": args.cube, "frontier": args.frontier},
        args.seed,
        [csv_path, summary_path],
        started,
    ))
    for row in frontier_table(result):
        print(f"{row['method']:<24} accuracy={row['accuracy']:.4f} time_ms={row['time_ms']:.3f}")
    return 0


# parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subgraph-detect", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic scenario to disk")
    g.add_argument("spec", help="preset name or path to a scenario document")
    g.add_argument("--out-dir", help=f"output directory (default: ${OUT_ENV}/<scenario name>)")
    g.add_argument("--seed", type=int, help="override the scenario seed")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("detect", help="detect activities in a feature file")
    d.add_argument("--features", required=True)
    d.add_argument("--model", required=True)
    d.add_argument("--method", required=True, choices=METHODS)
    d.add_argument("--out", help=f"detection file (default: ${OUT_ENV}/detections.jsonl)")
    d.add_argument("--slab-frames", type=int, default=10)
    d.add_argument("--grid", type=_parse_grid, help="spatial grid ROWSxCOLS, required for st-* and two-stage")
    d.add_argument("--jump-reach", type=int, help="temporal jump reach for t-jump (default 2)")
    d.add_argument("--extent", type=int, nargs=3, metavar=("FRAMES", "WIDTH", "HEIGHT"))
    d.add_argument("--video", help="video identifier written to each record")
    d.add_argument("--label", help="activity label written to each record")
    d.add_argument("--max-detections", type=int, default=10)
    d.add_argument("--reweight", default="0", help=f"weight given to used nodes, a number or {REWEIGHT_MEAN!r}")
    d.add_argument("--stop-below", type=float, default=0.0)
    d.add_argument("--durations", help="sliding durations in slabs: 'exhaustive', a preset name, or a comma list")
    d.add_argument("--step", type=int, help="sliding step in slabs (default 1)")
    d.add_argument("--nms", type=float, default=0.5, help="overlap threshold for window suppression")
    d.add_argument("--time-budget", type=float, help="seconds allowed for the general exact solver")
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("evaluate", help="score detections against ground truth")
    e.add_argument("--detections", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--metric", choices=["overlap", "map"], default="overlap")
    e.add_argument("--iou", type=float, default=0.5)
    e.add_argument("--spatial", action="store_true", help="use voxel overlap where the truth has boxes")
    e.add_argument("--frame-size", type=int, nargs=2, metavar=("WIDTH", "HEIGHT"))
    e.add_argument("--out", help=f"report file (default: ${OUT_ENV}/report.json)")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="time searchers on synthetic scenarios")
    b.add_argument("scenarios", nargs="+", help="preset names or scenario documents")
    b.add_argument("--methods", nargs="+", default=["subgraph", "t-sliding"], choices=["subgraph", *METHODS])
    b.add_argument("--frontier", action="store_true", help="sliding windows with growing duration pools vs. subgraph")
    b.add_argument("--cube", action="store_true", help="build spatio-temporal cube graphs")
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--seed", type=int, help="override every scenario seed")
    b.add_argument("--out", help=f"output prefix (default: ${OUT_ENV}/bench)")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
