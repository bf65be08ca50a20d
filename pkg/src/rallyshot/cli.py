"""Command-line entry point.

One executable, one subcommand per pipeline stage:

    simulate  synthetic rally detections or swing/idle pose streams
    track     identity-preserving tracking over a detection file
    extract   shot / notshot segments from keypoints plus annotations
    pretrain  contrastive backbone training, one checkpoint per court side
    train     transformer shot classifiers on frozen backbone features
    infer     sliding-window shot events over tracked keypoints
    sweep     threshold sweep report over a score log
    gaps      missing-frame prediction-error report
    score     confusion metrics and identity-switch counts against truth

Configuration comes from an optional JSON file (--config or the
RALLYSHOT_CONFIG environment variable) overridden by flags; every run writes
run_manifest.json beside its outputs. Report subcommands render a matplotlib
figure next to each CSV they emit.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import backbone as bb
from . import classifier as clf
from . import evaluate, figures, ingest, pipeline, pose, sim, tracker
from .config import (
    RunConfig,
    build_run_config,
    default_config_path,
    load_config_file,
    write_manifest,
)
from .court import build_roi, net_side
from .errors import ConfigError, DataError, RallyshotError
from .nn import config_hash

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2


def _parse_set(values: list[str]) -> dict:
    out = {}
    for item in values or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


def _load_run_config(args, **extra) -> RunConfig:
    path = args.config or default_config_path()
    file_values = load_config_file(path) if path else None
    overrides = _parse_set(args.set)
    overrides.update({k: v for k, v in extra.items() if v is not None})
    if args.seed is not None:
        overrides["seed"] = args.seed
    return build_run_config(file_values, **overrides)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report_csv(path, seed: int, header: list[str], rows: list[list],
                      comment_extra: str = "") -> None:
    lines = [f"# seed={seed}" + (f" {comment_extra}" if comment_extra else "")]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".6f")
    return str(v)


def _parse_occlusion(spec: str) -> sim.Occlusion:
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise ConfigError(f"occlusion spec must be agent:start:duration[:offset], got {spec!r}")
    agent, start, duration = (int(p) for p in parts[:3])
    offset = float(parts[3]) if len(parts) == 4 else 0.0
    return sim.Occlusion(agent=agent, start=start, duration=duration,
                         reappear_offset=offset)


# --- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args)
    ingest.write_corners(out / "corners.json", sim.default_corners())
    if args.kind == "rally":
        occlusions = [_parse_occlusion(s) for s in (args.occlusion or [])]
        scenario = sim.random_scenario(
            n_agents=args.agents, n_frames=args.frames, occlusions=occlusions,
            noise_sigma=args.noise_sigma, seed=cfg.seed)
        truth, detections = sim.generate_rally(scenario)
        ingest.write_detections(out / "detections.jsonl", detections)
        sim.write_truth(out / "truth.jsonl", truth)
        outputs = ["corners.json", "detections.jsonl", "truth.jsonl"]
    else:
        params = sim.MotionParams(amplitude=args.amplitude, jitter_sigma=args.jitter,
                                  spacing=args.spacing, seed=cfg.seed)
        dataset = sim.generate_pose_dataset(args.per_class, params)
        ingest.write_keypoints(out / "keypoints.jsonl", dataset.keypoints)
        ingest.write_annotations(out / "annotations.csv", dataset.annotations)
        sim.write_pose_labels(out / "labels.csv", dataset)
        tracker.write_tracks(out / "tracks.jsonl", sim.pose_tracks(dataset))
        outputs = ["corners.json", "keypoints.jsonl", "annotations.csv",
                   "labels.csv", "tracks.jsonl"]
    write_manifest(out, "simulate", cfg, {}, outputs, args.deterministic)
    return EXIT_OK


def cmd_track(args) -> int:
    extra = {}
    if args.no_reassign:
        extra["tracker.reassign_enabled"] = False
    if args.roster is not None:
        extra["tracker.roster_size"] = args.roster
    cfg = _load_run_config(args, **extra)
    out = _out_dir(args)
    detections = ingest.read_detections(args.detections)
    roi = build_roi(ingest.read_corners(args.corners))
    snapshots = tracker.run_tracker(detections, roi, cfg.tracker)
    tracker.write_tracks(out / "tracks.jsonl", snapshots)
    write_manifest(out, "track", cfg,
                   {"detections": args.detections, "corners": args.corners},
                   ["tracks.jsonl"], args.deterministic)
    return EXIT_OK


def _player_sides(keypoints, roi):
    """Median feet position per player (ankles, falling back to hips),
    classified against the net line."""
    pts: dict[int, list[np.ndarray]] = {}
    for kp in keypoints:
        arr = np.asarray(kp.keypoints, dtype=np.float64)
        for pair in ((15, 16), (11, 12)):
            sel = [i for i in pair if arr[i, 2] >= pose.DEFAULT_VISIBILITY_FLOOR]
            if sel:
                pts.setdefault(kp.player_id, []).append(arr[sel, :2].mean(axis=0))
                break
    sides = {}
    for pid, arrs in pts.items():
        med = np.median(np.stack(arrs), axis=0)
        sides[pid] = net_side(roi, (float(med[0]), float(med[1])))
    return sides


def cmd_extract(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args)
    keypoints = ingest.read_keypoints(args.keypoints)
    annotations = ingest.read_annotations(args.annotations)
    roi = build_roi(ingest.read_corners(args.corners))
    sides = _player_sides(keypoints, roi)
    segments = pose.extract_segments(keypoints, annotations, sides)
    pose.write_segments(out / "segments.bin", segments)
    pose.write_segment_index(out / "segments.index.csv", segments)
    write_manifest(out, "extract", cfg,
                   {"keypoints": args.keypoints, "annotations": args.annotations,
                    "corners": args.corners},
                   ["segments.bin", "segments.index.csv"], args.deterministic)
    return EXIT_OK


def _segments_by_side(path):
    segments = pose.read_segments(path)
    by_side: dict = {}
    for seg in segments:
        by_side.setdefault(seg.side, []).append(seg)
    return by_side


def _log_rows(side_logs: dict, deterministic: bool) -> list[list]:
    rows = []
    for name, log in side_logs.items():
        for entry in log:
            rows.append([name, entry.epoch, entry.loss, entry.best_loss,
                         0.0 if deterministic else entry.elapsed])
    return rows


def cmd_pretrain(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args)
    by_side = _segments_by_side(args.segments)
    results = bb.pretrain(by_side, cfg.backbone)
    cfg_hash = config_hash(cfg.to_dict())
    outputs = []
    logs = {}
    for side, result in results.items():
        name = f"backbone_{side.value}.ckpt"
        bb.save_backbone(out / name, result.model, cfg_hash)
        outputs += [name, name + ".json"]
        logs[side.value] = result.log
    _write_report_csv(out / "pretrain_log.csv", cfg.seed,
                      ["side", "epoch", "loss", "best_loss", "elapsed"],
                      _log_rows(logs, args.deterministic))
    figures.render_training_curves(logs, out / "pretrain_curves.png")
    outputs += ["pretrain_log.csv", "pretrain_curves.png"]
    write_manifest(out, "pretrain", cfg, {"segments": args.segments},
                   outputs, args.deterministic)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args)
    by_side = _segments_by_side(args.segments)
    backbones = {side: bb.load_backbone(Path(args.backbones) / f"backbone_{side.value}.ckpt")
                 for side in by_side}
    results = clf.train_classifier(by_side, backbones, cfg.classifier)
    cfg_hash = config_hash(cfg.to_dict())
    outputs = []
    logs = {}
    metric_rows = []
    for side, result in results.items():
        name = f"classifier_{side.value}.ckpt"
        clf.save_classifier(out / name, result.model, cfg_hash)
        outputs += [name, name + ".json"]
        logs[side.value] = result.log
        m = result.test_metrics
        metric_rows.append([side.value, m.accuracy, m.precision, m.recall, m.f1])
    _write_report_csv(out / "train_log.csv", cfg.seed,
                      ["side", "epoch", "loss", "best_loss", "elapsed"],
                      _log_rows(logs, args.deterministic))
    _write_report_csv(out / "test_metrics.csv", cfg.seed,
                      ["side", "accuracy", "precision", "recall", "f1"], metric_rows)
    figures.render_training_curves(logs, out / "train_curves.png")
    outputs += ["train_log.csv", "test_metrics.csv", "train_curves.png"]
    write_manifest(out, "train", cfg,
                   {"segments": args.segments, "backbones": str(args.backbones)},
                   outputs, args.deterministic)
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = _load_run_config(args, threshold=args.threshold, stride=args.stride,
                           suppress=True if args.suppress else None)
    out = _out_dir(args)
    tracks = tracker.read_tracks(args.tracks)
    keypoints = ingest.read_keypoints(args.keypoints)
    sides_present = {t.side for t in tracks}
    backbones, classifiers = {}, {}
    for side in sides_present:
        bpath = Path(args.models) / f"backbone_{side.value}.ckpt"
        cpath = Path(args.models) / f"classifier_{side.value}.ckpt"
        if not bpath.exists() or not cpath.exists():
            raise ConfigError(f"missing checkpoint for required side {side.value!r} "
                              f"under {args.models}")
        backbones[side] = bb.load_backbone(bpath)
        classifiers[side] = clf.load_classifier(cpath)

    events, scores = pipeline.infer_stream(
        tracks, keypoints, backbones, classifiers,
        threshold=cfg.threshold, stride=cfg.stride, suppress=cfg.suppress,
        jobs=args.jobs)

    inputs = {"tracks": args.tracks, "keypoints": args.keypoints}
    if args.annotations:
        annotations = ingest.read_annotations(args.annotations)
        contact = {(a.frame, a.player_id) for a in annotations}
        scores = [pipeline.ShotScore(frame=s.frame, player_id=s.player_id,
                                     confidence=s.confidence,
                                     truth=(s.frame, s.player_id) in contact)
                  for s in scores]
        inputs["annotations"] = args.annotations

    pipeline.write_events(out / "events.jsonl", events)
    pipeline.write_scores(out / "scores.jsonl", scores)
    write_manifest(out, "infer", cfg, inputs,
                   ["events.jsonl", "scores.jsonl"], args.deterministic)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args)
    scores = pipeline.read_scores(args.scores)
    if not scores:
        raise DataError(f"{args.scores}: no scores to sweep")
    if any(s.truth is None for s in scores):
        raise DataError(f"{args.scores}: every score needs a truth label for a sweep")

    if args.frame_level:
        by_frame: dict[int, list[pipeline.ShotScore]] = {}
        for s in scores:
            by_frame.setdefault(s.frame, []).append(s)
        confidences = np.array([max(x.confidence for x in group)
                                for _, group in sorted(by_frame.items())])
        truths = np.array([any(x.truth for x in group)
                           for _, group in sorted(by_frame.items())])
    else:
        confidences = np.array([s.confidence for s in scores])
        truths = np.array([s.truth for s in scores])

    if args.balance:
        rng = np.random.default_rng(cfg.seed)
        pos = np.flatnonzero(truths)
        neg = np.flatnonzero(~truths)
        n = min(len(pos), len(neg))
        if n == 0:
            raise DataError("cannot balance: one class is empty")
        keep = np.sort(np.concatenate([
            rng.choice(pos, size=n, replace=False),
            rng.choice(neg, size=n, replace=False)]))
        confidences, truths = confidences[keep], truths[keep]

    rows, best = clf.sweep_threshold(confidences, truths)
    _write_report_csv(out / "sweep.csv", cfg.seed,
                      ["threshold", "accuracy", "precision", "recall", "f1"],
                      [[r.threshold, r.accuracy, r.precision, r.recall, r.f1] for r in rows],
                      comment_extra=f"optimal_threshold={best.threshold:.2f}")
    figures.render_threshold_curves(rows, best, out / "sweep.png")
    print(f"optimal threshold {best.threshold:.2f}: accuracy {best.accuracy:.4f} "
          f"precision {best.precision:.4f} recall {best.recall:.4f} f1 {best.f1:.4f}")
    write_manifest(out, "sweep", cfg, {"scores": args.scores},
                   ["sweep.csv", "sweep.png"], args.deterministic)
    return EXIT_OK


def cmd_gaps(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args)
    inputs = {}
    if args.truth:
        per_id = sim.truth_to_tracks(sim.read_truth(args.truth))
        inputs["truth"] = args.truth
    else:
        snapshots = tracker.read_tracks(args.tracks)
        per_id: dict[int, list[tuple[int, float, float]]] = {}
        for s in snapshots:
            if not s.ghost:
                per_id.setdefault(s.id, []).append((s.frame, s.center[0], s.center[1]))
        inputs["tracks"] = args.tracks

    merged: dict[int, list[float]] = {}
    for track_pts in per_id.values():
        try:
            trials = sim.gap_scenarios(track_pts)
        except DataError:
            continue
        for g, dists in trials.items():
            merged.setdefault(g, []).extend(dists)
    if not merged:
        raise DataError("no identity provided enough consecutive detections for gap trials")

    summary, hist = evaluate.gap_report(merged)
    _write_report_csv(out / "gap_summary.csv", cfg.seed,
                      ["gap", "count", "median", "p90", "max"],
                      [[r.gap, r.count, r.median, r.p90, r.max] for r in summary])
    _write_report_csv(out / "gap_hist.csv", cfg.seed,
                      ["bin_lo", "bin_hi", "count"],
                      [[lo, hi, n] for lo, hi, n in hist])
    figures.render_gap_report(summary, hist, out / "gaps.png")
    write_manifest(out, "gaps", cfg, inputs,
                   ["gap_summary.csv", "gap_hist.csv", "gaps.png"], args.deterministic)
    return EXIT_OK


def cmd_score(args) -> int:
    cfg = _load_run_config(args, threshold=args.threshold)
    out = _out_dir(args)
    inputs = {}
    outputs = []
    if bool(args.tracks) != bool(args.truth):
        raise ConfigError("--tracks and --truth go together")
    if not args.tracks and not args.scores:
        raise ConfigError("nothing to score: give --tracks/--truth and/or --scores")

    if args.tracks:
        snapshots = tracker.read_tracks(args.tracks)
        truth = sim.read_truth(args.truth)
        report = evaluate.id_switches(snapshots, truth)
        rows = []
        for true_id in sorted(report.mapping):
            for pred_id, first, last in report.mapping[true_id]:
                rows.append([true_id, pred_id, first, last])
        _write_report_csv(out / "id_switches.csv", cfg.seed,
                          ["true_id", "predicted_id", "first_frame", "last_frame"], rows,
                          comment_extra=f"switches={report.switches} misses={report.misses}")
        print(f"id switches: {report.switches} (misses: {report.misses})")
        inputs.update({"tracks": args.tracks, "truth": args.truth})
        outputs.append("id_switches.csv")

    if args.scores:
        scores = pipeline.read_scores(args.scores)
        if any(s.truth is None for s in scores):
            raise DataError(f"{args.scores}: every score needs a truth label")
        conf = clf.confusion_at(np.array([s.confidence for s in scores]),
                                np.array([s.truth for s in scores]), cfg.threshold)
        m = evaluate.metrics(conf)
        _write_report_csv(out / "metrics.csv", cfg.seed,
                          ["threshold", "accuracy", "precision", "recall", "f1",
                           "tp", "fp", "tn", "fn"],
                          [[cfg.threshold, m.accuracy, m.precision, m.recall, m.f1,
                            conf.tp, conf.fp, conf.tn, conf.fn]])
        print(f"threshold {cfg.threshold:.2f}: accuracy {m.accuracy:.4f} "
              f"precision {m.precision:.4f} recall {m.recall:.4f} f1 {m.f1:.4f}")
        inputs["scores"] = args.scores
        outputs.append("metrics.csv")

    write_manifest(out, "score", cfg, inputs, outputs, args.deterministic)
    return EXIT_OK


# --- argument wiring -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", required=True, help="directory for outputs")
    common.add_argument("--config", help="JSON config file (default: $RALLYSHOT_CONFIG)")
    common.add_argument("--seed", type=int, default=None, help="seed override")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="config override, e.g. tracker.reassign_radius=150")
    common.add_argument("--deterministic", action="store_true",
                        help="suppress timestamps/timings for byte-identical reruns")
    common.add_argument("--jobs", type=int, default=1,
                        help="worker threads for parallel stages (results are "
                             "identical for any value)")

    parser = argparse.ArgumentParser(
        prog="rallyshot",
        description="Badminton shot recognition over detector-produced "
                    "detections and keypoints.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="generate synthetic rally or pose data")
    p.add_argument("--kind", choices=["rally", "pose"], required=True)
    p.add_argument("--agents", type=int, choices=[2, 4], default=2)
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--occlusion", action="append", metavar="AGENT:START:DUR[:OFFSET]",
                   help="hide an agent's detections for DUR frames (repeatable)")
    p.add_argument("--per-class", type=int, default=50,
                   help="pose kind: contact annotations per player")
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--jitter", type=float, default=0.02)
    p.add_argument("--spacing", type=int, default=24)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", parents=[common], help="run the tracker")
    p.add_argument("--detections", required=True)
    p.add_argument("--corners", required=True)
    p.add_argument("--no-reassign", action="store_true",
                   help="disable ghost reassignment (diagnostic)")
    p.add_argument("--roster", type=int, choices=[2, 4], default=None)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("extract", parents=[common],
                       help="cut shot / notshot segments")
    p.add_argument("--keypoints", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--corners", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("pretrain", parents=[common],
                       help="contrastive backbone pretraining")
    p.add_argument("--segments", required=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", parents=[common], help="train shot classifiers")
    p.add_argument("--segments", required=True)
    p.add_argument("--backbones", required=True,
                   help="directory holding backbone_front.ckpt / backbone_back.ckpt")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[common], help="emit shot events")
    p.add_argument("--tracks", required=True)
    p.add_argument("--keypoints", required=True)
    p.add_argument("--models", required=True, help="checkpoint directory")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--suppress", action="store_true",
                   help="drop events outscored within 5 frames")
    p.add_argument("--annotations", default=None,
                   help="attach truth labels to the score log")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("sweep", parents=[common], help="threshold sweep report")
    p.add_argument("--scores", required=True)
    p.add_argument("--frame-level", action="store_true",
                   help="aggregate per frame (max confidence over players)")
    p.add_argument("--balance", action="store_true",
                   help="subsample to equal shot / notshot counts (seeded)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gaps", parents=[common],
                       help="missing-frame prediction-error report")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--truth")
    group.add_argument("--tracks")
    p.set_defaults(func=cmd_gaps)

    p = sub.add_parser("score", parents=[common],
                       help="score tracks and/or classifications against truth")
    p.add_argument("--tracks")
    p.add_argument("--truth")
    p.add_argument("--scores")
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_score)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RallyshotError as exc:
        print(f"rallyshot {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
