"""Pose-sequence preparation: hip-relative normalization, horizontal flip
augmentation, and extraction of fixed-length shot / notshot segments.

A segment is a window of 15 consecutive normalized poses whose center frame
either is (Shot) or is not (NotShot) an annotated racket-contact frame for the
segment's player. NotShot windows come from the opponent during the same
window: while one player hits, the other cannot be hitting.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .coco import LEFT_HIP, LEFT_RIGHT_PAIRS, N_KEYPOINTS, RIGHT_HIP
from .court import Side
from .errors import DataError, DegeneratePoseError, ValidationError
from .ingest import KeypointFrame, ShotAnnotation

SEGMENT_LEN = 15
HALF_WINDOW = SEGMENT_LEN // 2
JITTER_MAX = 2  # extra context frames kept on each side for augmentation
CONTEXT_LEN = SEGMENT_LEN + 2 * JITTER_MAX

DEFAULT_VISIBILITY_FLOOR = 0.3
DEFAULT_SIGMA_EPS = 1e-6
DEFAULT_MAX_FILL_GAP = 3


class Label(enum.Enum):
    NOTSHOT = 0
    SHOT = 1


@dataclass(frozen=True)
class NormalizedPose:
    """17 standardized joint coordinates; zero mean and unit spread per axis."""

    coords: np.ndarray  # shape (17, 2), float64

    @property
    def flat(self) -> np.ndarray:
        return self.coords.reshape(-1)


@dataclass(frozen=True)
class PoseSegment:
    frames: np.ndarray  # (15, 17, 2) normalized coordinates
    label: Label
    player_id: int
    side: Side
    center_frame: int
    context: np.ndarray | None = None  # (19, 17, 2) when the stream allows re-slicing


def _normalize_xy(xy: np.ndarray, hip_mask: np.ndarray, sigma_eps: float) -> np.ndarray:
    """Core standardization on raw (17, 2) coordinates.

    hip_mask flags which of (left hip, right hip) may anchor the relative
    coordinates; at least one must be set.
    """
    hips = []
    if hip_mask[0]:
        hips.append(xy[LEFT_HIP])
    if hip_mask[1]:
        hips.append(xy[RIGHT_HIP])
    if not hips:
        raise DegeneratePoseError("both hips are missing; cannot anchor the pose")
    hip_mid = np.mean(hips, axis=0)

    rel = xy - hip_mid
    mu = rel.mean(axis=0)
    sigma = rel.std(axis=0)
    if np.any(sigma <= sigma_eps):
        raise DegeneratePoseError(
            f"pose spread is degenerate (sigma={sigma.tolist()}, eps={sigma_eps})")
    return (rel - mu) / sigma


def normalize(
    kp: KeypointFrame,
    visibility_floor: float = DEFAULT_VISIBILITY_FLOOR,
    sigma_eps: float = DEFAULT_SIGMA_EPS,
) -> NormalizedPose:
    """Standardize one keypoint frame.

    All 17 joints are expressed relative to the hip midpoint (a single visible
    hip stands in when the other is below the visibility floor), then shifted
    and scaled per axis to zero mean and unit standard deviation. The result
    is invariant to translation and uniform scaling of the input.
    """
    arr = np.asarray(kp.keypoints, dtype=np.float64)
    xy, vis = arr[:, :2], arr[:, 2]
    hip_mask = np.array([vis[LEFT_HIP] >= visibility_floor,
                         vis[RIGHT_HIP] >= visibility_floor])
    coords = _normalize_xy(xy, hip_mask, sigma_eps)
    return NormalizedPose(coords=coords)


def flip_horizontal(kp: KeypointFrame, frame_width: float) -> KeypointFrame:
    """Mirror a keypoint frame about the vertical image axis.

    Every x becomes frame_width - x and the left/right joint pairs swap
    indices so the skeleton stays anatomically labeled. An involution.
    """
    if frame_width <= 0:
        raise ValidationError("frame_width must be positive", field="frame_width")
    pts = list(kp.keypoints)
    flipped = [(frame_width - x, y, v) for (x, y, v) in pts]
    for a, b in LEFT_RIGHT_PAIRS:
        flipped[a], flipped[b] = flipped[b], flipped[a]
    return KeypointFrame(frame=kp.frame, player_id=kp.player_id, keypoints=tuple(flipped))


def _fill_window(
    records: Mapping[int, KeypointFrame],
    frames: Sequence[int],
    visibility_floor: float,
    max_gap: int,
) -> tuple[np.ndarray | None, int]:
    """Assemble raw coordinates for a frame window, interpolating short
    per-joint dropouts.

    Returns (coords [T, 17, 2] or None, count of frames that were directly
    normalizable before interpolation). A joint sample is missing when its
    frame is absent or its visibility is below the floor; interior runs of at
    most `max_gap` missing samples are filled linearly from their neighbors,
    anything longer (or touching the window edge) voids the window.
    """
    T = len(frames)
    xy = np.zeros((T, N_KEYPOINTS, 2))
    missing = np.ones((T, N_KEYPOINTS), dtype=bool)
    n_valid = 0
    for i, f in enumerate(frames):
        rec = records.get(f)
        if rec is None:
            continue
        arr = np.asarray(rec.keypoints, dtype=np.float64)
        xy[i] = arr[:, :2]
        missing[i] = arr[:, 2] < visibility_floor
        if (arr[:, 2] >= visibility_floor)[[LEFT_HIP, RIGHT_HIP]].any():
            rel = xy[i] - xy[i].mean(axis=0)
            if np.all(rel.std(axis=0) > DEFAULT_SIGMA_EPS):
                n_valid += 1

    for j in range(N_KEYPOINTS):
        col = missing[:, j]
        if not col.any():
            continue
        i = 0
        while i < T:
            if not col[i]:
                i += 1
                continue
            run_start = i
            while i < T and col[i]:
                i += 1
            run_end = i  # exclusive
            run_len = run_end - run_start
            if run_start == 0 or run_end == T or run_len > max_gap:
                return None, n_valid
            left, right = run_start - 1, run_end
            for k in range(run_start, run_end):
                t = (k - left) / (right - left)
                xy[k, j] = (1.0 - t) * xy[left, j] + t * xy[right, j]

    return xy, n_valid


def build_segment_frames(
    records: Mapping[int, KeypointFrame],
    frames: Sequence[int],
    visibility_floor: float = DEFAULT_VISIBILITY_FLOOR,
    max_gap: int = DEFAULT_MAX_FILL_GAP,
    sigma_eps: float = DEFAULT_SIGMA_EPS,
) -> tuple[np.ndarray | None, int]:
    """Normalized pose stack for a window, or None when the window is unusable.

    Returns (stack [T, 17, 2] or None, directly-valid frame count).
    """
    xy, n_valid = _fill_window(records, frames, visibility_floor, max_gap)
    if xy is None:
        return None, n_valid
    out = np.empty_like(xy)
    both_hips = np.array([True, True])
    for i in range(xy.shape[0]):
        try:
            out[i] = _normalize_xy(xy[i], both_hips, sigma_eps)
        except DegeneratePoseError:
            return None, n_valid
    return out, n_valid


def extract_segments(
    keypoints: Sequence[KeypointFrame],
    annotations: Sequence[ShotAnnotation],
    sides: Mapping[int, Side],
    visibility_floor: float = DEFAULT_VISIBILITY_FLOOR,
    max_gap: int = DEFAULT_MAX_FILL_GAP,
) -> list[PoseSegment]:
    """Cut Shot and NotShot segments around every annotated contact frame.

    For an annotation (frame f, player p) the window [f-7, f+7] yields a Shot
    segment for p and a NotShot segment for p's opponent. Windows that poke
    past a player's stream bounds are dropped, as are windows with
    uninterpolatable joint dropouts. Output is sorted by (center frame,
    player id).
    """
    streams: dict[int, dict[int, KeypointFrame]] = {}
    for rec in keypoints:
        streams.setdefault(rec.player_id, {})[rec.frame] = rec
    players = sorted(streams)
    if len(players) != 2:
        raise DataError(
            f"segment extraction needs exactly two player streams, got {len(players)}")
    for pid in players:
        if pid not in sides:
            raise DataError(f"no court side assigned for player {pid}")

    bounds = {p: (min(streams[p]), max(streams[p])) for p in players}
    segments: list[PoseSegment] = []
    for ann in annotations:
        if ann.player_id not in streams:
            raise ValidationError(
                f"annotation at frame {ann.frame} references unknown player {ann.player_id}",
                field="player_id")
        opponent = players[0] if ann.player_id == players[1] else players[1]
        for pid, label in ((ann.player_id, Label.SHOT), (opponent, Label.NOTSHOT)):
            lo, hi = ann.frame - HALF_WINDOW, ann.frame + HALF_WINDOW
            if lo < bounds[pid][0] or hi > bounds[pid][1]:
                continue
            window = range(lo, hi + 1)
            frames, _ = build_segment_frames(streams[pid], window, visibility_floor, max_gap)
            if frames is None:
                continue
            context = None
            clo, chi = ann.frame - HALF_WINDOW - JITTER_MAX, ann.frame + HALF_WINDOW + JITTER_MAX
            if clo >= bounds[pid][0] and chi <= bounds[pid][1]:
                ctx, _ = build_segment_frames(
                    streams[pid], range(clo, chi + 1), visibility_floor, max_gap)
                context = ctx
            segments.append(PoseSegment(
                frames=frames, label=label, player_id=pid,
                side=sides[pid], center_frame=ann.frame, context=context))
    segments.sort(key=lambda s: (s.center_frame, s.player_id))
    return segments


# --- segment container ------------------------------------------------------

_MAGIC = b"RSSEG\x00\x00\x01"
_VERSION = 1


def write_segments(path, segments: Sequence[PoseSegment]) -> None:
    """Binary segment container plus nothing else; pair with write_segment_index
    for the human-readable listing."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, len(segments), SEGMENT_LEN))
        for seg in segments:
            has_ctx = seg.context is not None
            fh.write(struct.pack(
                "<qqBBB", seg.center_frame, seg.player_id, seg.label.value,
                0 if seg.side is Side.FRONT else 1, int(has_ctx)))
            data = seg.context if has_ctx else seg.frames
            fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def read_segments(path) -> list[PoseSegment]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise DataError(f"{path}: not a segment container")
        version, count, seg_len = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise DataError(f"{path}: unsupported container version {version}")
        if seg_len != SEGMENT_LEN:
            raise DataError(f"{path}: unsupported segment length {seg_len}")
        out = []
        for _ in range(count):
            center_frame, player_id, label, side, has_ctx = struct.unpack("<qqBBB", fh.read(19))
            n = CONTEXT_LEN if has_ctx else SEGMENT_LEN
            raw = fh.read(n * N_KEYPOINTS * 2 * 8)
            data = np.frombuffer(raw, dtype="<f8").reshape(n, N_KEYPOINTS, 2).copy()
            context = data if has_ctx else None
            frames = data[JITTER_MAX:JITTER_MAX + SEGMENT_LEN] if has_ctx else data
            out.append(PoseSegment(
                frames=frames, label=Label(label), player_id=player_id,
                side=Side.FRONT if side == 0 else Side.BACK,
                center_frame=center_frame, context=context))
        return out


def write_segment_index(path, segments: Sequence[PoseSegment]) -> None:
    lines = ["center_frame,player_id,label,side"]
    for seg in segments:
        lines.append(f"{seg.center_frame},{seg.player_id},{seg.label.name.lower()},{seg.side.value}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
