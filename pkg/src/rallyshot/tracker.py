"""Persistent player identities over a detection stream.

A deliberately small association core (greedy nearest-center matching, gated
by distance) plus the layer that makes it robust to dropouts: when a track
vanishes, a ghost extrapolates its position at constant velocity, and a
reappearing detection within the reassignment radius of a ghost's predicted
position inherits the original identity instead of minting a new one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

from .court import CourtROI, Side, contains, side_of
from .errors import ConfigError, ParseError, SequencingError
from .ingest import Bbox, Detection

Point = tuple[float, float]


@dataclass
class Track:
    id: int
    center: Point
    bbox: Bbox
    velocity: Point  # pixels per frame; zero until two observations exist
    last_seen: int
    side: Side
    n_obs: int = 1


@dataclass
class Ghost:
    id: int
    anchor: Point  # position at the last successful detection
    velocity: Point
    t_s: int  # frame of the last successful detection
    frames_missing: int
    bbox: Bbox
    side: Side


@dataclass(frozen=True)
class TrackerConfig:
    reassign_radius: float = 200.0
    max_missing: int = 15
    assoc_gate: float = 150.0
    roster_size: int = 2
    reassign_enabled: bool = True

    def __post_init__(self):
        if self.reassign_radius <= 0 or self.max_missing <= 0 or self.assoc_gate <= 0:
            raise ConfigError("tracker distances and lifetimes must be strictly positive")
        if self.roster_size not in (2, 4):
            raise ConfigError(f"roster_size must be 2 or 4, got {self.roster_size}")


@dataclass(frozen=True)
class TrackSnapshot:
    frame: int
    id: int
    bbox: Bbox
    center: Point
    side: Side
    ghost: bool


def predict(ghost: Ghost, t: int) -> Point:
    """Constant-velocity extrapolation t frames past the last detection."""
    if t < 1:
        raise ValueError(f"prediction horizon must be >= 1, got {t}")
    return (ghost.anchor[0] + ghost.velocity[0] * t,
            ghost.anchor[1] + ghost.velocity[1] * t)


def associate(
    tracks: Sequence[Track],
    detections: Sequence[Detection],
    gate: float,
) -> tuple[dict[int, int], list[int], list[int]]:
    """Greedy globally-nearest pairing of tracks to detections.

    Candidate pairs beyond `gate` pixels are discarded; remaining pairs are
    consumed in (distance, track id, detection order) order, each track and
    detection used at most once. Returns (track_id -> detection index,
    unmatched detection indices, unmatched track ids).
    """
    pairs = []
    for tr in tracks:
        for di, det in enumerate(detections):
            cx, cy = det.bottom_center
            d = math.hypot(cx - tr.center[0], cy - tr.center[1])
            if d <= gate:
                pairs.append((d, tr.id, di))
    pairs.sort()

    assigned: dict[int, int] = {}
    used_dets: set[int] = set()
    for d, tid, di in pairs:
        if tid in assigned or di in used_dets:
            continue
        assigned[tid] = di
        used_dets.add(di)
    unmatched_dets = [di for di in range(len(detections)) if di not in used_dets]
    unmatched_tracks = [tr.id for tr in tracks if tr.id not in assigned]
    return assigned, unmatched_dets, unmatched_tracks


def try_reassign(
    ghosts: dict[int, Ghost],
    detection: Detection,
    radius: float,
    now: int,
) -> int | None:
    """Give a reappearing detection the identity of the nearest qualifying ghost.

    A ghost qualifies when its predicted position at `now` lies within
    `radius` of the detection's reference point. Ties go to the lower id.
    The winning ghost is removed from `ghosts`.
    """
    cx, cy = detection.bottom_center
    best: tuple[float, int] | None = None
    for gid, ghost in ghosts.items():
        px, py = predict(ghost, now - ghost.t_s)
        d = math.hypot(cx - px, cy - py)
        if d <= radius and (best is None or (d, gid) < best):
            best = (d, gid)
    if best is None:
        return None
    del ghosts[best[1]]
    return best[1]


class PlayerTracker:
    """Sequential tracker state machine; one instance per video stream."""

    def __init__(self, roi: CourtROI, cfg: TrackerConfig | None = None):
        self.roi = roi
        self.cfg = cfg or TrackerConfig()
        self.tracks: dict[int, Track] = {}
        self.ghosts: dict[int, Ghost] = {}
        self._next_id = 0
        self._last_frame = -1
        self.expired_ids: list[int] = []

    def _mint_id(self) -> int:
        new_id = self._next_id
        self._next_id += 1
        return new_id

    def step(self, frame: int, detections: Sequence[Detection]) -> list[TrackSnapshot]:
        """Advance by one frame and return the per-identity snapshots."""
        if frame <= self._last_frame:
            raise SequencingError(
                f"frame {frame} does not advance past frame {self._last_frame}")
        cfg = self.cfg

        for ghost in self.ghosts.values():
            ghost.frames_missing = frame - ghost.t_s

        on_court = [d for d in detections if contains(self.roi, d.bottom_center)]

        active = [self.tracks[tid] for tid in sorted(self.tracks)]
        assigned, unmatched_dets, unmatched_tids = associate(active, on_court, cfg.assoc_gate)

        for tid, di in assigned.items():
            det = on_court[di]
            self._observe(self.tracks[tid], det, frame)

        for tid in unmatched_tids:
            tr = self.tracks.pop(tid)
            self.ghosts[tid] = Ghost(
                id=tid, anchor=tr.center, velocity=tr.velocity, t_s=tr.last_seen,
                frames_missing=frame - tr.last_seen, bbox=tr.bbox, side=tr.side)

        for di in unmatched_dets:
            det = on_court[di]
            revived = None
            if cfg.reassign_enabled:
                ghost_objs = dict(self.ghosts)
                revived = try_reassign(self.ghosts, det, cfg.reassign_radius, frame)
            if revived is not None:
                self._revive(ghost_objs[revived], det, frame)
            elif len(self.tracks) + len(self.ghosts) < cfg.roster_size:
                self._start(self._mint_id(), det, frame)
            # else: roster full, detection dropped

        # Retire ghosts whose object stayed missing past the lifetime; this
        # runs after reassignment so a gap of exactly max_missing frames is
        # still recoverable.
        for gid in list(self.ghosts):
            if self.ghosts[gid].frames_missing > cfg.max_missing:
                del self.ghosts[gid]
                self.expired_ids.append(gid)

        self._last_frame = frame
        return self._snapshots(frame)

    def _observe(self, tr: Track, det: Detection, frame: int) -> None:
        new_center = det.bottom_center
        dt = frame - tr.last_seen
        tr.velocity = ((new_center[0] - tr.center[0]) / dt,
                       (new_center[1] - tr.center[1]) / dt)
        tr.center = new_center
        tr.bbox = det.bbox
        tr.last_seen = frame
        tr.n_obs += 1
        tr.side = side_of(self.roi, new_center)

    def _revive(self, ghost: Ghost, det: Detection, frame: int) -> None:
        # Velocity restarts as the two-point difference across the gap,
        # in pixels per frame.
        center = det.bottom_center
        dt = frame - ghost.t_s
        velocity = ((center[0] - ghost.anchor[0]) / dt,
                    (center[1] - ghost.anchor[1]) / dt)
        self.tracks[ghost.id] = Track(
            id=ghost.id, center=center, bbox=det.bbox, velocity=velocity,
            last_seen=frame, side=side_of(self.roi, center), n_obs=2)

    def _start(self, tid: int, det: Detection, frame: int) -> None:
        center = det.bottom_center
        self.tracks[tid] = Track(
            id=tid, center=center, bbox=det.bbox, velocity=(0.0, 0.0),
            last_seen=frame, side=side_of(self.roi, center), n_obs=1)

    def _snapshots(self, frame: int) -> list[TrackSnapshot]:
        out = []
        for tid in sorted(self.tracks):
            tr = self.tracks[tid]
            out.append(TrackSnapshot(frame=frame, id=tid, bbox=tr.bbox,
                                     center=tr.center, side=tr.side, ghost=False))
        for gid in sorted(self.ghosts):
            g = self.ghosts[gid]
            px, py = predict(g, frame - g.t_s)
            ax, ay = g.anchor
            bbox = (g.bbox[0] + px - ax, g.bbox[1] + py - ay,
                    g.bbox[2] + px - ax, g.bbox[3] + py - ay)
            out.append(TrackSnapshot(frame=frame, id=gid, bbox=bbox,
                                     center=(px, py), side=g.side, ghost=True))
        return out


def run_tracker(
    detections: Sequence[Detection],
    roi: CourtROI,
    cfg: TrackerConfig | None = None,
) -> list[TrackSnapshot]:
    """Feed a whole detection file through a fresh tracker, frame by frame."""
    tracker = PlayerTracker(roi, cfg)
    snapshots: list[TrackSnapshot] = []
    by_frame: dict[int, list[Detection]] = {}
    for det in detections:
        by_frame.setdefault(det.frame, []).append(det)
    for frame in sorted(by_frame):
        snapshots.extend(tracker.step(frame, by_frame[frame]))
    return snapshots


def write_tracks(path, snapshots: Sequence[TrackSnapshot]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in snapshots:
            rec = {"frame": s.frame, "id": s.id, "bbox": list(s.bbox),
                   "center": [s.center[0], s.center[1]],
                   "side": s.side.value, "ghost": s.ghost}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_tracks(path) -> list[TrackSnapshot]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(TrackSnapshot(
                    frame=int(rec["frame"]), id=int(rec["id"]),
                    bbox=tuple(float(v) for v in rec["bbox"]),
                    center=(float(rec["center"][0]), float(rec["center"][1])),
                    side=Side(rec["side"]), ghost=bool(rec["ghost"])))
            except (json.JSONDecodeError, KeyError, ValueError, IndexError) as exc:
                raise ParseError(path, line_no, f"bad track record: {exc}") from exc
    return out
