"""End-to-end shot inference over tracked keypoint streams.

A 15-frame window slides along the stream; within each window every player is
normalized, encoded by the backbone matching their court side, and scored by
the matching classifier. The player with the highest confidence wins the
window; an event is emitted when that confidence clears the threshold. Singles
and doubles share this code path; the roster size is configuration, not logic.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .backbone import BackboneModel
from .classifier import ClassifierModel
from .court import Side
from .errors import AlignmentError, ConfigError, ParseError
from .ingest import KeypointFrame
from .pose import HALF_WINDOW, SEGMENT_LEN, build_segment_frames
from .tracker import TrackSnapshot

MIN_VALID_FRAMES = 12
SUPPRESS_WINDOW = 5


@dataclass(frozen=True)
class ShotEvent:
    frame: int  # center frame of the window
    player_id: int
    confidence: float


@dataclass(frozen=True)
class ShotScore:
    frame: int
    player_id: int
    confidence: float
    truth: bool | None = None


def score_window(
    window: Mapping[int, Mapping[int, KeypointFrame]],
    frames: Sequence[int],
    sides: Mapping[int, Side],
    backbones: Mapping[Side, BackboneModel],
    classifiers: Mapping[Side, ClassifierModel],
) -> dict[int, float]:
    """Per-player shot confidence for one window.

    `window` maps player id to (frame -> keypoint record). A player whose
    pose is usable in fewer than 12 of the 15 frames (or whose dropouts cannot
    be interpolated) scores 0 so the stream stays total.
    """
    scores: dict[int, float] = {}
    for pid in sorted(window):
        side = sides[pid]
        if side not in backbones or side not in classifiers:
            raise ConfigError(f"no model checkpoint for side {side.value!r}")
        stack, n_valid = build_segment_frames(window[pid], frames)
        if stack is None or n_valid < MIN_VALID_FRAMES:
            scores[pid] = 0.0
            continue
        frame_feats, _ = backbones[side].encode(stack[None])
        scores[pid] = float(classifiers[side].classify(frame_feats)[0])
    return scores


def infer_window(
    window: Mapping[int, Mapping[int, KeypointFrame]],
    frames: Sequence[int],
    sides: Mapping[int, Side],
    backbones: Mapping[Side, BackboneModel],
    classifiers: Mapping[Side, ClassifierModel],
    threshold: float,
) -> tuple[ShotEvent | None, dict[int, float]]:
    """Highest-confidence-player selection over one window.

    Returns (event or None, the full per-player score map). Confidence ties go
    to the lower player id; if everyone falls below the threshold there is no
    event.
    """
    scores = score_window(window, frames, sides, backbones, classifiers)
    if not scores:
        return None, scores
    best_pid = max(sorted(scores), key=lambda p: scores[p])
    best = scores[best_pid]
    center = frames[len(frames) // 2]
    if best >= threshold:
        return ShotEvent(frame=center, player_id=best_pid, confidence=best), scores
    return None, scores


def _side_lookup(tracks: Sequence[TrackSnapshot]) -> dict[int, list[tuple[int, Side]]]:
    by_player: dict[int, list[tuple[int, Side]]] = {}
    for t in sorted(tracks, key=lambda t: (t.id, t.frame)):
        by_player.setdefault(t.id, []).append((t.frame, t.side))
    return by_player


def _side_at(history: list[tuple[int, Side]], frame: int) -> Side:
    side = history[0][1]
    for f, s in history:
        if f > frame:
            break
        side = s
    return side


def infer_stream(
    tracks: Sequence[TrackSnapshot],
    keypoints: Sequence[KeypointFrame],
    backbones: Mapping[Side, BackboneModel],
    classifiers: Mapping[Side, ClassifierModel],
    threshold: float,
    stride: int = 1,
    suppress: bool = False,
    jobs: int = 1,
) -> tuple[list[ShotEvent], list[ShotScore]]:
    """Slide the window over the whole stream.

    Keypoint records must carry player ids issued by the tracker; any
    (frame, player_id) unknown to the track stream is an alignment error.
    With `suppress`, an event is dropped when a strictly higher-confidence
    event sits within 5 frames of it.
    """
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1), got {threshold}")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")

    track_keys = {(t.frame, t.id) for t in tracks}
    bad_frames = sorted({kp.frame for kp in keypoints
                         if (kp.frame, kp.player_id) not in track_keys})
    if bad_frames:
        raise AlignmentError("keypoint records reference players with no track",
                             frames=bad_frames)

    side_hist = _side_lookup(tracks)
    streams: dict[int, dict[int, KeypointFrame]] = {}
    for kp in keypoints:
        streams.setdefault(kp.player_id, {})[kp.frame] = kp
    if not keypoints:
        return [], []

    lo = min(kp.frame for kp in keypoints)
    hi = max(kp.frame for kp in keypoints)
    centers = list(range(lo + HALF_WINDOW, hi - HALF_WINDOW + 1, stride))

    def evaluate_center(center: int) -> tuple[ShotEvent | None, list[ShotScore]]:
        frames = range(center - HALF_WINDOW, center + HALF_WINDOW + 1)
        window = {pid: streams[pid] for pid in sorted(streams)}
        sides = {pid: _side_at(side_hist[pid], center) for pid in window}
        event, scores = infer_window(window, list(frames), sides,
                                     backbones, classifiers, threshold)
        rows = [ShotScore(frame=center, player_id=pid, confidence=scores[pid])
                for pid in sorted(scores)]
        return event, rows

    if jobs > 1 and len(centers) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate_center, centers))
    else:
        results = [evaluate_center(c) for c in centers]

    events = [ev for ev, _ in results if ev is not None]
    score_log = [row for _, rows in results for row in rows]

    if suppress:
        events = [e for e in events
                  if not any(o.confidence > e.confidence
                             and abs(o.frame - e.frame) <= SUPPRESS_WINDOW
                             for o in events)]
    return events, score_log


def write_events(path, events: Sequence[ShotEvent]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in events:
            fh.write(json.dumps({"frame": e.frame, "player_id": e.player_id,
                                 "confidence": e.confidence},
                                separators=(",", ":")) + "\n")


def write_scores(path, scores: Sequence[ShotScore]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in scores:
            truth = None if s.truth is None else ("shot" if s.truth else "notshot")
            fh.write(json.dumps({"frame": s.frame, "player_id": s.player_id,
                                 "confidence": s.confidence, "truth": truth},
                                separators=(",", ":")) + "\n")


def read_scores(path) -> list[ShotScore]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                truth = rec.get("truth")
                out.append(ShotScore(
                    frame=int(rec["frame"]), player_id=int(rec["player_id"]),
                    confidence=float(rec["confidence"]),
                    truth=None if truth is None else truth == "shot"))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ParseError(path, line_no, f"bad score record: {exc}") from exc
    return out
