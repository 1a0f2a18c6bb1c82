"""Command-line entry point: ``dismap <subcommand>``.

Exit codes: 0 success, 1 configuration error, 2 input/format error,
3 pipeline error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

from . import __version__
from .attrgran import granulate
from .changedetect.pipeline import detect_changes
from .config import build_config, load_config_file, set_key, template_text
from .database import DisasterDatabase, write_csv, write_geojson
from .errors import ConfigError, DismapError, InputError, PipelineError
from .evaluation import confusion, metrics, metrics_table, timing_report
from .raster import read_change_map, read_raster, write_change_map
from .render import write_ppm
from .spacegran import run_space_granulation

log = logging.getLogger("dismap")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_PIPELINE = 0, 1, 2, 3


class _Stage:
    name = "startup"


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _threads(args) -> int:
    n = getattr(args, "threads", None)
    if n is None:
        return os.cpu_count() or 1
    if n < 1:
        raise ConfigError(f"--threads must be >= 1, got {n}")
    return n


def _raw_config(args) -> tuple[dict, Path | None]:
    raw, base = ({}, None)
    if getattr(args, "config", None):
        raw, base = load_config_file(args.config)
    for item in getattr(args, "set", None) or []:
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        set_key(raw, key, value)
    if getattr(args, "seed", None) is not None:
        raw["rng_seed"] = args.seed
    return raw, base


def cmd_run(args, stage: _Stage) -> int:
    stage.name = "config"
    raw, base = _raw_config(args)
    cfg = build_config(raw, base)
    threads = _threads(args)

    stage.name = "space granulation"
    cm, diag = run_space_granulation(cfg.scenario, cfg.changedetect, cfg.branch, threads=threads)
    log.info("branch %s", diag.branch)

    stage.name = "attribute granulation"
    records = granulate(cm, cfg.connectivity, cfg.granulate_min_area_px)
    provenance = cfg.provenance()
    provenance["branch"] = diag.branch
    db = DisasterDatabase(records, crs=cm.crs, source_scene=provenance)

    stage.name = "write outputs"
    out = cfg.outputs
    if out["mask"]:
        write_change_map(cm, out["mask"])
    if out["geojson"]:
        write_geojson(db, out["geojson"])
    if out["csv"]:
        write_csv(db, out["csv"])
    report = timing_report(diag)
    if out["report"]:
        _write_json(out["report"], {
            "branch": diag.branch,
            "records": len(records),
            "diagnostics": diag.to_dict(),
            "timing": report.to_dict(),
        })
    if out["render"]:
        write_ppm(read_raster(cfg.scenario.post_image), cm, out["render"])
    print(report.table())
    print(f"{len(records)} disaster records ({diag.branch})")
    return EXIT_OK


def cmd_detect_change(args, stage: _Stage) -> int:
    stage.name = "config"
    raw, base = _raw_config(args)
    cfg = build_config(raw, base, require_scenario=False)
    threads = _threads(args)
    stage.name = "read inputs"
    pre = read_raster(args.pre)
    post = read_raster(args.post)
    stage.name = "change detection"
    cm, diag = detect_changes(pre, post, cfg.changedetect, threads=threads)
    diag.branch = "UNSUPERVISED_CHANGE_DETECTION"
    stage.name = "write outputs"
    write_change_map(cm, args.out)
    report = timing_report(diag)
    report_path = args.report or f"{args.out}.diagnostics.json"
    _write_json(report_path, {"diagnostics": diag.to_dict(), "timing": report.to_dict()})
    print(report.table())
    return EXIT_OK


def cmd_granulate(args, stage: _Stage) -> int:
    stage.name = "config"
    raw, base = _raw_config(args)
    cfg = build_config(raw, base, require_scenario=False)
    stage.name = "read mask"
    cm = read_change_map(args.mask)
    stage.name = "attribute granulation"
    records = granulate(cm, cfg.connectivity, cfg.granulate_min_area_px)
    db = DisasterDatabase(records, crs=cm.crs, source_scene={
        "mask": args.mask, "branch": None, "timestamp": cfg.provenance_timestamp})
    stage.name = "write outputs"
    write_geojson(db, args.out_geojson)
    write_csv(db, args.out_csv)
    print(f"{len(records)} disaster records")
    return EXIT_OK


def cmd_evaluate(args, stage: _Stage) -> int:
    stage.name = "read masks"
    pred = read_change_map(args.pred)
    gt = read_change_map(args.gt)
    stage.name = "evaluate"
    cm = confusion(pred, gt)
    m = metrics(cm)
    print(metrics_table(m))
    if args.out:
        _write_json(args.out, {"confusion": {"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn},
                               "metrics": m.to_dict()})
    return EXIT_OK


def cmd_render(args, stage: _Stage) -> int:
    stage.name = "read inputs"
    base = read_raster(args.base)
    cm = read_change_map(args.mask)
    stage.name = "render"
    write_ppm(base, cm, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON pipeline config")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads (default: all cores); never changes results")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override rng_seed")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--set", action="append", default=argparse.SUPPRESS, metavar="KEY=VALUE",
                        help="override a config key, e.g. --set changedetect.margin=0.05")

    parser = argparse.ArgumentParser(prog="dismap", parents=[common],
                                     description="Disaster mapping from multi-temporal rasters.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--print-config-template", action="store_true",
                        help="print the default JSON config and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("run", parents=[common], help="full pipeline from a config file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("detect-change", parents=[common], help="unsupervised change detection only")
    p.add_argument("pre")
    p.add_argument("post")
    p.add_argument("out", help="output mask raster (stem or .bsq path)")
    p.add_argument("--report", help="diagnostics JSON (default: OUT.diagnostics.json)")
    p.set_defaults(func=cmd_detect_change)

    p = sub.add_parser("granulate", parents=[common], help="disaster database from a mask")
    p.add_argument("mask")
    p.add_argument("out_geojson")
    p.add_argument("out_csv")
    p.set_defaults(func=cmd_granulate)

    p = sub.add_parser("evaluate", parents=[common], help="accuracy of a mask against truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--out", help="metrics JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("render", parents=[common], help="PPM quick-look of a mask")
    p.add_argument("base")
    p.add_argument("mask")
    p.add_argument("out")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_config_template:
        sys.stdout.write(template_text())
        return EXIT_OK
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_CONFIG

    stage = _Stage()
    try:
        return args.func(args, stage)
    except ConfigError as exc:
        code = EXIT_CONFIG
        err = exc
    except (InputError, FileNotFoundError, IsADirectoryError) as exc:
        code = EXIT_INPUT
        err = exc
    except (PipelineError, DismapError) as exc:
        code = EXIT_PIPELINE
        err = exc
    except OSError as exc:
        code = EXIT_INPUT
        err = exc
    except Exception as exc:  # noqa: BLE001 - last line of defence, keep the exit-code contract
        code = EXIT_PIPELINE
        err = exc
    where = getattr(err, "stage", "") or stage.name
    print(f"dismap: error in {where}: {err}", file=sys.stderr)
    if verbose:
        traceback.print_exception(type(err), err, err.__traceback__, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
