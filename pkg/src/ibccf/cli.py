"""Command-line front end: ``ibccf track | eval | synth | selftest``.

Exit codes: 0 success, 2 usage, 3 data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, evaluation, selftest
from .errors import DataError, IBCCFError, UsageError
from .geometry import SIDES
from .sequence_io import (find_groundtruth, format_key_values, load_dataclass, load_sequence,
                          load_synth_spec, read_boxes, save_sequence, write_boxes)
from .synthetic import aspect_sequence, synth_sequence
from .tracker import TrackerConfig

log = logging.getLogger("ibccf")

RESULTS_NAME = "results.txt"
DIAGNOSTICS_NAME = "diagnostics.log"
MANIFEST_NAME = "manifest.txt"


@dataclasses.dataclass
class RunManifest:
    sequence: str
    config: TrackerConfig
    outputs: dict
    started: str
    finished: str
    version: str = __version__
    status: str = "ok"

    def to_text(self) -> str:
        lines = [f"version = {self.version}", f"sequence = {self.sequence}", f"status = {self.status}",
                 f"started = {self.started}", f"finished = {self.finished}"]
        lines += [f"output.{k} = {v}" for k, v in self.outputs.items()]
        lines += ["config." + line for line in format_key_values(self.config).splitlines()]
        return "\n".join(lines) + "\n"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fmt(v) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else repr(v)


def diagnostics_lines(rec: evaluation.TrackRecord) -> list[str]:
    # frames are 1-based, matching the line numbers of the results file
    head = ["frame", "center_dx", "center_dy"] + [f"shift_{s.value}" for s in SIDES]
    head += ["admm_iters", "objective"] + [f"angle_{s.value}" for s in SIDES]
    lines = [" ".join(head)]
    for d in rec.diagnostics:
        row = [str(d.frame + 1), str(d.center_shift[0]), str(d.center_shift[1])]
        row += [str(d.boundary_shift.get(s, 0)) for s in SIDES]
        row += [str(d.admm_iterations), _fmt(d.objective)]
        row += [_fmt(d.angles[s]) if s in d.angles else "nan" for s in SIDES]
        lines.append(" ".join(row))
    if rec.failed:
        lines.append(f"# tracking failed at frame {rec.failure_frame}")
    return lines


def load_config(config_path=None, overrides: dict | None = None) -> TrackerConfig:
    return load_dataclass(config_path, TrackerConfig, overrides)


def cmd_track(seq_dir, config_path=None, out_dir=None, overrides: dict | None = None) -> tuple[Path, bool]:
    """Track one OTB-layout sequence; returns the results path and whether it finished."""
    started = _now()
    seq_dir = Path(seq_dir)
    find_groundtruth(seq_dir)
    cfg = load_config(config_path, overrides)
    seq = load_sequence(seq_dir)
    out_dir = Path(out_dir) if out_dir is not None else Path("results") / seq.name
    out_dir.mkdir(parents=True, exist_ok=True)

    rec = evaluation.run_ope(seq, cfg)
    paths = {"results": out_dir / RESULTS_NAME, "diagnostics": out_dir / DIAGNOSTICS_NAME}
    write_boxes(paths["results"], rec.boxes)
    paths["diagnostics"].write_text("\n".join(diagnostics_lines(rec)) + "\n", encoding="ascii")
    status = f"failed at frame {rec.failure_frame}" if rec.failed else "ok"
    manifest = RunManifest(seq.name, cfg, {k: str(v) for k, v in paths.items()}, started, _now(), status=status)
    (out_dir / MANIFEST_NAME).write_text(manifest.to_text(), encoding="utf-8")
    log.info("%s: %d frames -> %s", seq.name, len(rec), paths["results"])
    return paths["results"], not rec.failed


@dataclasses.dataclass
class SequenceReport:
    name: str
    op: float
    curve: evaluation.SuccessCurve

    def line(self) -> str:
        return f"{self.name}: OP(0.5) = {self.op:.3f}  AUC = {self.curve.auc:.3f}"


def evaluate_files(results_path, seq_dir) -> SequenceReport:
    seq_dir = Path(seq_dir)
    gt = read_boxes(find_groundtruth(seq_dir))
    pred = read_boxes(results_path)
    if len(pred) != len(gt):
        raise DataError(f"{results_path}: {len(pred)} boxes but {len(gt)} ground-truth frames")
    ious = evaluation.sequence_ious(pred, gt)
    return SequenceReport(seq_dir.name, evaluation.op_from_ious(ious, 0.5), evaluation.curve_from_ious(ious))


def cmd_eval(results_paths, seq_dirs, out_dir=None) -> list[SequenceReport]:
    if len(results_paths) != len(seq_dirs):
        raise UsageError(f"{len(results_paths)} results files for {len(seq_dirs)} sequences")
    with ThreadPoolExecutor(max(1, min(4, len(seq_dirs)))) as pool:
        reports = list(pool.map(evaluate_files, results_paths, seq_dirs))
    lines = [r.line() for r in reports]
    mean_op = sum(r.op for r in reports) / len(reports)
    mean_auc = sum(r.curve.auc for r in reports) / len(reports)
    lines.append(f"mean over {len(reports)} sequence(s): OP(0.5) = {mean_op:.3f}  AUC = {mean_auc:.3f}")
    print("\n".join(lines))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
        for r in reports:
            rows = ["threshold,op"] + [f"{t:.2f},{float(v)!r}" for t, v in zip(r.curve.thresholds, r.curve.values)]
            (out_dir / f"success_{r.name}.csv").write_text("\n".join(rows) + "\n", encoding="ascii")
    return reports


def cmd_synth(spec_path=None, out_dir=None, seed: int | None = None, preset: str = "default") -> Path:
    overrides = {} if seed is None else {"seed": seed}
    if preset == "aspect":
        if spec_path is not None:
            raise UsageError("--preset aspect takes no spec file")
        seq = aspect_sequence(seed=0 if seed is None else seed)
    else:
        seq = synth_sequence(load_synth_spec(spec_path, overrides))
    out = Path(out_dir) if out_dir is not None else Path(seq.name)
    save_sequence(seq, out)
    log.info("wrote %d frames to %s", len(seq), out)
    return out


def cmd_selftest(seed: int = 0, solve_uk_fn=None) -> bool:
    results = selftest.run_selftest(seed, solve_uk_fn)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        f = failed[0]
        print(f"first failure: {f.name}: achieved {f.achieved:.3e} > required {f.required:.0e}",
              file=sys.stderr)
    return not failed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ibccf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    levels = ["DEBUG", "INFO", "WARNING", "ERROR"]
    parser.add_argument("--log-level", default="WARNING", choices=levels, type=str.upper)
    # also accepted after the verb
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=argparse.SUPPRESS, choices=levels, type=str.upper)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("track", parents=[common], help="track one OTB-layout sequence")
    p.add_argument("--seq", required=True, help="sequence directory (img/ and groundtruth_rect.txt)")
    p.add_argument("--config", help="key=value tracker config file")
    p.add_argument("--out", help="output directory (default results/<sequence>)")
    p.add_argument("--mu", type=float, help="override the orthogonality weight")
    p.add_argument("--disable-boundaries", action="store_true", help="center filter only")

    p = sub.add_parser("eval", parents=[common], help="score results files against ground truth")
    p.add_argument("--results", action="append", required=True, help="results file (repeatable)")
    p.add_argument("--seq", action="append", required=True, help="matching sequence directory (repeatable)")
    p.add_argument("--out", help="directory for metrics.txt and success_<name>.csv")

    p = sub.add_parser("synth", parents=[common], help="write a synthetic sequence in OTB layout")
    p.add_argument("--config", help="key=value synthetic-sequence spec file")
    p.add_argument("--preset", choices=["default", "aspect"], default="default")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("selftest", parents=[common], help="check every fast solver against dense oracles")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "track":
            overrides = {}
            if args.mu is not None:
                overrides["mu"] = args.mu
            if args.disable_boundaries:
                overrides["disable_boundaries"] = True
            path, finished = cmd_track(args.seq, args.config, args.out, overrides)
            print(path)
            return 0 if finished else 4
        if args.verb == "eval":
            cmd_eval(args.results, args.seq, args.out)
            return 0
        if args.verb == "synth":
            print(cmd_synth(args.config, args.out, args.seed, args.preset))
            return 0
        return 0 if cmd_selftest(args.seed) else 4
    except IBCCFError as exc:
        print(f"ibccf {args.verb}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"ibccf {args.verb}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
