"""Wire formats through which upstream detectors, pose estimators, and
annotation sets enter the system.

Detections and keypoints travel as line-delimited JSON (one record per line),
shot annotations as CSV, court corners as a single JSON document. Readers
validate every invariant before a record is released downstream; writers emit
the canonical byte form so that write(read(x)) round-trips exactly.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .coco import N_KEYPOINTS
from .errors import ParseError, ValidationError

Bbox = tuple[float, float, float, float]


@dataclass(frozen=True)
class Detection:
    """One person bounding box reported by an upstream detector."""

    frame: int
    bbox: Bbox
    score: float

    @property
    def bottom_center(self) -> tuple[float, float]:
        """Feet reference point: horizontal bbox midpoint at the lower edge."""
        x1, y1, x2, y2 = self.bbox
        return ((x1 + x2) / 2.0, y2)


@dataclass(frozen=True)
class KeypointFrame:
    """17 COCO keypoints (x, y, visibility) for one player in one frame."""

    frame: int
    player_id: int
    keypoints: tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class ShotAnnotation:
    """Racket-contact frame for one player within a rally."""

    frame: int
    player_id: int
    rally_id: int


@dataclass(frozen=True)
class CornerBoxSet:
    """Four court-corner bounding boxes plus the frame dimensions."""

    width: int
    height: int
    boxes: tuple[Bbox, Bbox, Bbox, Bbox]


def _require(cond: bool, reason: str, field: str, line_no: int | None = None) -> None:
    if not cond:
        raise ValidationError(reason, field=field, line_no=line_no)


def _validate_detection(frame, bbox, score, line_no=None) -> Detection:
    _require(isinstance(frame, int) and frame >= 0, "frame must be an integer >= 0", "frame", line_no)
    _require(len(bbox) == 4, "bbox must have four coordinates", "bbox", line_no)
    x1, y1, x2, y2 = (float(v) for v in bbox)
    _require(x1 < x2, f"x1 must be < x2 (got {x1} >= {x2})", "bbox", line_no)
    _require(y1 < y2, f"y1 must be < y2 (got {y1} >= {y2})", "bbox", line_no)
    score = float(score)
    _require(0.0 <= score <= 1.0, f"score must be in [0, 1] (got {score})", "score", line_no)
    return Detection(frame=frame, bbox=(x1, y1, x2, y2), score=score)


def _validate_keypoint_frame(frame, player_id, kp, line_no=None) -> KeypointFrame:
    _require(isinstance(frame, int) and frame >= 0, "frame must be an integer >= 0", "frame", line_no)
    _require(isinstance(player_id, int) and player_id >= 0,
             "player_id must be an integer >= 0", "player_id", line_no)
    _require(len(kp) == N_KEYPOINTS, f"expected 17 keypoints, got {len(kp)}", "kp", line_no)
    triples = []
    for j, triple in enumerate(kp):
        _require(len(triple) == 3, f"keypoint {j} must be an [x, y, v] triple", "kp", line_no)
        x, y, v = (float(c) for c in triple)
        _require(0.0 <= v <= 1.0, f"keypoint {j} visibility must be in [0, 1] (got {v})", "kp", line_no)
        triples.append((x, y, v))
    return KeypointFrame(frame=frame, player_id=player_id, keypoints=tuple(triples))


def _read_jsonl(path) -> Iterable[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ParseError(path, line_no, "record must be a JSON object")
            yield line_no, obj


def read_detections(path) -> list[Detection]:
    """Read detections.jsonl, validating invariants and frame ordering."""
    out: list[Detection] = []
    prev_frame = -1
    for line_no, obj in _read_jsonl(path):
        try:
            det = _validate_detection(obj["frame"], obj["bbox"], obj["score"], line_no)
        except KeyError as exc:
            raise ParseError(path, line_no, f"missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ParseError(path, line_no, f"bad field value: {exc}") from exc
        _require(det.frame >= prev_frame, "frame indices must be non-decreasing", "frame", line_no)
        prev_frame = det.frame
        out.append(det)
    return out


def read_keypoints(path) -> list[KeypointFrame]:
    """Read keypoints.jsonl, validating invariants and frame ordering."""
    out: list[KeypointFrame] = []
    prev_frame = -1
    for line_no, obj in _read_jsonl(path):
        try:
            rec = _validate_keypoint_frame(obj["frame"], obj["player_id"], obj["kp"], line_no)
        except KeyError as exc:
            raise ParseError(path, line_no, f"missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ParseError(path, line_no, f"bad field value: {exc}") from exc
        _require(rec.frame >= prev_frame, "frame indices must be non-decreasing", "frame", line_no)
        prev_frame = rec.frame
        out.append(rec)
    return out


ANNOTATION_HEADER = ["rally_id", "frame", "player_id"]


def read_annotations(path) -> list[ShotAnnotation]:
    """Read annotations.csv; result is sorted by frame, duplicates rejected."""
    out: list[ShotAnnotation] = []
    seen: set[tuple[int, int]] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "missing header row") from None
        if [h.strip() for h in header] != ANNOTATION_HEADER:
            raise ParseError(path, 1, f"expected header {','.join(ANNOTATION_HEADER)!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(path, line_no, f"expected 3 columns, got {len(row)}")
            try:
                rally_id, frame, player_id = (int(c) for c in row)
            except ValueError as exc:
                raise ParseError(path, line_no, f"bad integer value: {exc}") from exc
            _require(frame >= 0, "frame must be >= 0", "frame", line_no)
            key = (frame, player_id)
            _require(key not in seen, f"duplicate (frame, player_id) = {key}", "frame", line_no)
            seen.add(key)
            out.append(ShotAnnotation(frame=frame, player_id=player_id, rally_id=rally_id))
    out.sort(key=lambda a: (a.frame, a.player_id))
    return out


def read_corners(path) -> CornerBoxSet:
    """Read corners.json and validate the four-box contract."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from exc
    try:
        width, height, boxes = obj["width"], obj["height"], obj["boxes"]
    except (KeyError, TypeError) as exc:
        raise ParseError(path, 1, "corners document needs width, height, boxes") from exc
    _require(isinstance(width, int) and width > 0, "width must be a positive integer", "width")
    _require(isinstance(height, int) and height > 0, "height must be a positive integer", "height")
    _require(len(boxes) == 4, f"expected exactly 4 corner boxes, got {len(boxes)}", "boxes")
    parsed = []
    for i, box in enumerate(boxes):
        _require(len(box) == 4, f"box {i} must have four coordinates", "boxes")
        x1, y1, x2, y2 = (float(v) for v in box)
        _require(x1 <= x2 and y1 <= y2, f"box {i} must satisfy x1 <= x2 and y1 <= y2", "boxes")
        _require(0.0 <= x1 and x2 <= width and 0.0 <= y1 and y2 <= height,
                 f"box {i} must lie within the {width}x{height} frame", "boxes")
        parsed.append((x1, y1, x2, y2))
    return CornerBoxSet(width=width, height=height, boxes=tuple(parsed))


# --- canonical writers ------------------------------------------------------

def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def write_detections(path, detections: Sequence[Detection]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in detections:
            fh.write(_dump({"frame": d.frame, "bbox": list(d.bbox), "score": d.score}) + "\n")


def write_keypoints(path, records: Sequence[KeypointFrame]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            kp = [[x, y, v] for (x, y, v) in r.keypoints]
            fh.write(_dump({"frame": r.frame, "player_id": r.player_id, "kp": kp}) + "\n")


def write_annotations(path, annotations: Sequence[ShotAnnotation]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ANNOTATION_HEADER)
    for a in sorted(annotations, key=lambda a: (a.frame, a.player_id)):
        writer.writerow([a.rally_id, a.frame, a.player_id])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_corners(path, corners: CornerBoxSet) -> None:
    doc = {"width": corners.width, "height": corners.height,
           "boxes": [list(b) for b in corners.boxes]}
    Path(path).write_text(_dump(doc) + "\n", encoding="utf-8")
