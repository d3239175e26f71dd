"""Command-line entry point.

Subcommands: run (simulate a scenario and export the run CSV), metrics
(recompute distances from an exported run), miou (compare two label
maps), keyframe-train / keyframe-eval (fit and score the frame gate),
serve (TCP bridge for an external simulator), make-world (generate the
synthetic benchmark worlds).

Diagnostics go to stderr; the SEMNAV_LOG environment variable (error,
info, debug) sets the verbosity.  Machine-readable results are printed
to stdout as key=value pairs.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import bridge, worlds
from .errors import SemnavError
from .gridio import load_semantic_map, read_pgm
from .nn import (
    evaluate_keyframe,
    load_keyframe_model,
    miou,
    save_keyframe_model,
    train_keyframe,
)
from .scenario import load_scenario, parse_overrides
from .simulator import RunRecord, compute_metrics, export_run, format_float, parse_run, run_episode

log = logging.getLogger("semnav.cli")

_KEYFRAME_REFERENCE = (
    "Reference statistics from the original flight stack this package "
    "reimplements: accuracy 0.72 and TPR(Yes) 0.83 on its 200-image "
    "dataset (137 Yes / 63 No)."
)


def _configure_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("SEMNAV_LOG", "error").strip().lower(), logging.ERROR
    )
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def cmd_run(args) -> int:
    try:
        overrides = parse_overrides(args.override)
        scenario = load_scenario(args.scenario, overrides)
        record = run_episode(
            scenario.world, scenario.planner,
            keyframe_model=scenario.keyframe_model,
            max_steps=scenario.max_steps,
            sensor=scenario.sensor, table=scenario.table,
        )
        comments = [f"scenario {Path(args.scenario).name}"]
        comments += [f"override {pair}" for pair in args.override]
        comments += [f"world {record.world_name}", f"outcome {record.outcome}"]
        export_run(record, args.out, comments=comments)
        flight, unreliable = compute_metrics(record, scenario.world)
    except (SemnavError, OSError) as exc:
        return _fail(str(exc))
    print(f"outcome={record.outcome} flight_distance={format_float(flight)} "
          f"unreliable_distance={format_float(unreliable)}")
    log.info("run written to %s (%d steps)", args.out, len(record.steps))
    return 0 if record.outcome == "reached" else 2


def cmd_metrics(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        steps = parse_run(args.run)
        # outcome is irrelevant for distance metrics; use a neutral value
        record = RunRecord(steps=steps, outcome="timeout", world_name=scenario.world.name)
        flight, unreliable = compute_metrics(record, scenario.world)
    except (SemnavError, OSError) as exc:
        return _fail(str(exc))
    print(f"flight_distance={format_float(flight)} "
          f"unreliable_distance={format_float(unreliable)}")
    return 0


def cmd_miou(args) -> int:
    try:
        pred = load_semantic_map(args.pred)
        ref = load_semantic_map(args.ref)
        value = miou(pred, ref)
    except (SemnavError, OSError) as exc:
        return _fail(str(exc))
    print(f"miou={value:.6f}")
    return 0


def _load_keyframe_dataset(data_dir):
    data_dir = Path(data_dir)
    index = data_dir / "labels.txt"
    if not index.exists():
        raise SemnavError(f"{index}: labels file not found")
    dataset = []
    for lineno, line in enumerate(index.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1].lower() not in ("yes", "no"):
            raise SemnavError(f"{index}:{lineno}: expected '<filename> Yes|No', got {line!r}")
        image_path = data_dir / parts[0]
        if not image_path.exists():
            raise SemnavError(f"{index}:{lineno}: image not found: {image_path}")
        values, maxval = read_pgm(image_path)
        dataset.append((values / float(maxval), parts[1].lower() == "yes"))
    if not dataset:
        raise SemnavError(f"{index}: no labeled images")
    return dataset


def cmd_keyframe_train(args) -> int:
    try:
        dataset = _load_keyframe_dataset(args.data)
        result = train_keyframe(dataset, patch_size=args.patch,
                                epochs=args.epochs, learning_rate=args.lr)
        save_keyframe_model(result.model, args.out)
        report = evaluate_keyframe(result.model, dataset)
    except (SemnavError, OSError) as exc:
        return _fail(str(exc))
    print(f"accuracy={format_float(report.accuracy)} "
          f"tpr_yes={format_float(report.tpr_yes)} "
          f"tpr_no={format_float(report.tpr_no)}")
    log.info("weights written to %s (%d features)", args.out, result.model.input_len)
    return 0


def cmd_keyframe_eval(args) -> int:
    try:
        dataset = _load_keyframe_dataset(args.data)
        model = load_keyframe_model(args.weights)
        report = evaluate_keyframe(model, dataset)
    except (SemnavError, OSError) as exc:
        return _fail(str(exc))
    print(f"accuracy={format_float(report.accuracy)} "
          f"tpr_yes={format_float(report.tpr_yes)}")
    return 0


def cmd_serve(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        bridge.serve(args.host, args.port, scenario.planner,
                     obstacle_labels=scenario.world.obstacle_labels,
                     keyframe_model=scenario.keyframe_model,
                     table=scenario.table)
    except (SemnavError, OSError) as exc:
        return _fail(str(exc))
    return 0


def cmd_make_world(args) -> int:
    try:
        paths = worlds.write_world(args.template, args.seed, args.out_prefix)
    except (SemnavError, OSError) as exc:
        return _fail(str(exc))
    for path in paths:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semnav",
        description="Semantic-aware UAV navigation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and export the run CSV")
    p.add_argument("--scenario", required=True, help="scenario file path")
    p.add_argument("--out", required=True, help="run CSV output path")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VAL",
                   help="override a scenario key (repeatable)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", help="recompute distances from an exported run CSV")
    p.add_argument("--run", required=True, help="run CSV path")
    p.add_argument("--scenario", required=True, help="scenario the run belongs to")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("miou", help="mean IoU between two label-map PGMs")
    p.add_argument("pred", help="predicted label map (PGM)")
    p.add_argument("ref", help="reference label map (PGM)")
    p.set_defaults(func=cmd_miou)

    p = sub.add_parser(
        "keyframe-train",
        help="fit the keyframe gate on a labeled image directory",
        epilog=_KEYFRAME_REFERENCE,
    )
    p.add_argument("--data", required=True,
                   help="directory with PGM images and labels.txt (<file> Yes|No per line)")
    p.add_argument("--out", required=True, help="output weights file (KFM1)")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.5, help="learning rate")
    p.add_argument("--patch", type=int, default=8, help="pooling patch size")
    p.set_defaults(func=cmd_keyframe_train)

    p = sub.add_parser(
        "keyframe-eval",
        help="score a trained keyframe gate on a labeled image directory",
        epilog=_KEYFRAME_REFERENCE,
    )
    p.add_argument("--data", required=True)
    p.add_argument("--weights", required=True, help="KFM1 weights file")
    p.set_defaults(func=cmd_keyframe_eval)

    p = sub.add_parser("serve", help="serve the TCP bridge for an external simulator")
    p.add_argument("--port", type=int, default=bridge.DEFAULT_PORT)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--scenario", required=True,
                   help="scenario providing planner config and label policy")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("make-world", help="generate a synthetic benchmark world")
    p.add_argument("--template", required=True,
                   help=f"one of: {', '.join(worlds.TEMPLATES)}")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-prefix", required=True,
                   help="output prefix; writes <prefix>.pgm/.meta/.toy")
    p.set_defaults(func=cmd_make_world)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
