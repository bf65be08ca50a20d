"""Deterministic synthetic data: court trajectories with occlusion dropout for
tracker testing, swing/idle pose streams for the learning stack, and the
missing-frame trial harness behind the gap-error report.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .coco import N_KEYPOINTS
from .court import Side
from .errors import DataError, ValidationError
from .ingest import CornerBoxSet, Detection, KeypointFrame, ShotAnnotation
from .pose import HALF_WINDOW, JITTER_MAX, PoseSegment, extract_segments

FRAME_WIDTH = 1280
FRAME_HEIGHT = 720
AGENT_BOX = (60.0, 160.0)  # bbox width/height around the feet point


def default_corners() -> CornerBoxSet:
    """Corner boxes for the canned 1280x720 broadcast-style court."""
    centers = ((170, 170), (1110, 170), (80, 640), (1200, 640))
    half = 12.0
    boxes = tuple((cx - half, cy - half, cx + half, cy + half) for cx, cy in centers)
    return CornerBoxSet(width=FRAME_WIDTH, height=FRAME_HEIGHT, boxes=boxes)


# --- rally trajectories -------------------------------------------------------

@dataclass(frozen=True)
class AgentPath:
    """Piecewise-constant-velocity path through (frame, x, y) waypoints."""

    waypoints: tuple[tuple[int, float, float], ...]

    def position(self, frame: int) -> tuple[float, float]:
        wp = self.waypoints
        if frame <= wp[0][0]:
            return (wp[0][1], wp[0][2])
        for (f0, x0, y0), (f1, x1, y1) in zip(wp, wp[1:]):
            if f0 <= frame <= f1:
                t = (frame - f0) / (f1 - f0)
                return (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
        return (wp[-1][1], wp[-1][2])


@dataclass(frozen=True)
class Occlusion:
    agent: int
    start: int
    duration: int
    reappear_offset: float = 0.0


@dataclass(frozen=True)
class RallyScenario:
    agents: tuple[AgentPath, ...]
    n_frames: int
    occlusions: tuple[Occlusion, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if len(self.agents) not in (2, 4):
            raise ValidationError(f"scenarios carry 2 or 4 agents, got {len(self.agents)}")
        spans: dict[int, list[tuple[int, int]]] = {}
        for occ in self.occlusions:
            if occ.duration < 1:
                raise ValidationError("occlusion duration must be >= 1")
            if occ.start < 0 or occ.start + occ.duration > self.n_frames:
                raise ValidationError("occlusion window must lie inside the frame range")
            for s, e in spans.get(occ.agent, []):
                if occ.start < e and s < occ.start + occ.duration:
                    raise ValidationError(
                        f"overlapping occlusions on agent {occ.agent}")
            spans.setdefault(occ.agent, []).append((occ.start, occ.start + occ.duration))


@dataclass(frozen=True)
class TruthRow:
    frame: int
    true_id: int
    center: tuple[float, float]


def _bbox_at(center: tuple[float, float]) -> tuple[float, float, float, float]:
    w, h = AGENT_BOX
    cx, cy = center
    return (cx - w / 2.0, cy - h, cx + w / 2.0, cy)


def generate_rally(scenario: RallyScenario) -> tuple[list[TruthRow], list[Detection]]:
    """Render a scenario into ground truth and a detection stream.

    Each agent produces one detection per frame (center noise drawn from the
    seeded generator) except during its occlusion windows; after an occlusion
    the remainder of the agent's path is displaced by reappear_offset pixels
    in a seeded direction.
    """
    rng = np.random.default_rng(scenario.seed)
    n_agents = len(scenario.agents)
    noise = rng.normal(0.0, scenario.noise_sigma, size=(scenario.n_frames, n_agents, 2)) \
        if scenario.noise_sigma > 0 else np.zeros((scenario.n_frames, n_agents, 2))
    scores = rng.uniform(0.8, 1.0, size=(scenario.n_frames, n_agents))

    offsets = {}
    for occ in sorted(scenario.occlusions, key=lambda o: (o.agent, o.start)):
        angle = rng.uniform(0.0, 2.0 * math.pi)
        offsets[(occ.agent, occ.start)] = (
            occ.reappear_offset * math.cos(angle),
            occ.reappear_offset * math.sin(angle))

    hidden: dict[int, set[int]] = {a: set() for a in range(n_agents)}
    for occ in scenario.occlusions:
        hidden[occ.agent].update(range(occ.start, occ.start + occ.duration))

    truth: list[TruthRow] = []
    detections: list[Detection] = []
    for frame in range(scenario.n_frames):
        for a in range(n_agents):
            if frame in hidden[a]:
                continue
            x, y = scenario.agents[a].position(frame)
            for occ in scenario.occlusions:
                if occ.agent == a and frame >= occ.start + occ.duration:
                    dx, dy = offsets[(occ.agent, occ.start)]
                    x, y = x + dx, y + dy
            cx, cy = x + noise[frame, a, 0], y + noise[frame, a, 1]
            truth.append(TruthRow(frame=frame, true_id=a, center=(cx, cy)))
            detections.append(Detection(frame=frame, bbox=_bbox_at((cx, cy)),
                                        score=float(scores[frame, a])))
    return truth, detections


def write_truth(path, rows: Sequence[TruthRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(json.dumps({"frame": r.frame, "true_id": r.true_id,
                                 "center": [r.center[0], r.center[1]]},
                                separators=(",", ":")) + "\n")


def read_truth(path) -> list[TruthRow]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(TruthRow(frame=int(rec["frame"]), true_id=int(rec["true_id"]),
                                center=(float(rec["center"][0]), float(rec["center"][1]))))
    return out


# --- swing / idle pose streams -------------------------------------------------

class MotionClass(enum.Enum):
    SHOT = "shot"
    NOTSHOT = "notshot"


@dataclass(frozen=True)
class MotionParams:
    amplitude: float = 0.5  # swing arc size, in skeleton-height units
    jitter_sigma: float = 0.02
    spacing: int = 24  # frames between consecutive contact annotations
    seed: int = 0


# Standing template, hip midpoint at the origin, y down, height about 1.6 units.
_TEMPLATE = np.array([
    (0.00, -0.70),   # nose
    (0.03, -0.73), (-0.03, -0.73),   # eyes
    (0.07, -0.70), (-0.07, -0.70),   # ears
    (0.18, -0.50), (-0.18, -0.50),   # shoulders
    (0.30, -0.25), (-0.30, -0.25),   # elbows
    (0.36, -0.05), (-0.36, -0.05),   # wrists
    (0.12, 0.00), (-0.12, 0.00),     # hips
    (0.14, 0.45), (-0.14, 0.45),     # knees
    (0.15, 0.90), (-0.15, 0.90),     # ankles
])
_SWING_JOINTS = {8: 0.5, 10: 1.0}  # right elbow and wrist, arc fractions
_SWING_DIR = np.array([0.4, -0.9])

_PLAYER_SCALE = {0: 200.0, 1: 140.0}  # the front player renders larger
_PLAYER_BASE = {0: (640.0, 500.0), 1: (640.0, 260.0)}  # hip midpoints, px


@dataclass
class PoseDataset:
    segments: list[PoseSegment]
    keypoints: list[KeypointFrame]
    annotations: list[ShotAnnotation]
    sides: dict[int, Side] = field(default_factory=lambda: {0: Side.FRONT, 1: Side.BACK})


def _swing_pose(phase: float, amplitude: float) -> np.ndarray:
    pose = _TEMPLATE.copy()
    swing = amplitude * math.sin(math.pi * phase)
    for joint, frac in _SWING_JOINTS.items():
        pose[joint] = pose[joint] + frac * swing * _SWING_DIR
    return pose


def generate_pose_dataset(n_per_class: int, params: MotionParams | None = None
                          ) -> PoseDataset:
    """One simulated two-player rally per call.

    Players 0 (front) and 1 (back) alternate annotated contact frames; each
    annotation yields one Shot segment for the hitter and one NotShot segment
    for the opponent via the regular extraction path, so every segment flows
    through the same windowing, interpolation, and normalization code as real
    data. n_per_class is per player, so each court side receives n Shot plus
    n NotShot segments.
    """
    if n_per_class < 1:
        raise DataError("n_per_class must be >= 1")
    params = params or MotionParams()
    rng = np.random.default_rng(params.seed)

    margin = HALF_WINDOW + JITTER_MAX + 1
    contact_frames = []
    for i in range(2 * n_per_class):
        contact_frames.append((margin + i * params.spacing, i % 2))
    n_frames = contact_frames[-1][0] + margin + 1

    swing_center = {0: np.full(n_frames, -1), 1: np.full(n_frames, -1)}
    for f, pid in contact_frames:
        for t in range(f - HALF_WINDOW, f + HALF_WINDOW + 1):
            swing_center[pid][t] = f

    keypoints: list[KeypointFrame] = []
    annotations = [ShotAnnotation(frame=f, player_id=pid, rally_id=1)
                   for f, pid in contact_frames]
    jitter = rng.normal(0.0, params.jitter_sigma, size=(n_frames, 2, N_KEYPOINTS, 2)) \
        if params.jitter_sigma > 0 else np.zeros((n_frames, 2, N_KEYPOINTS, 2))
    sway = rng.normal(0.0, 12.0, size=(2 * n_per_class, 2))  # px offset per rally leg

    for frame in range(n_frames):
        for pid in (0, 1):
            center = swing_center[pid][frame]
            if center >= 0:
                phase = (frame - center + HALF_WINDOW) / (2 * HALF_WINDOW)
                pose = _swing_pose(phase, params.amplitude)
            else:
                pose = _TEMPLATE.copy()
            pose = pose + jitter[frame, pid]
            leg = min(frame // params.spacing, 2 * n_per_class - 1)
            base = np.array(_PLAYER_BASE[pid]) + sway[leg]
            px = pose * _PLAYER_SCALE[pid] + base
            kp = tuple((float(x), float(y), 1.0) for x, y in px)
            keypoints.append(KeypointFrame(frame=frame, player_id=pid, keypoints=kp))

    sides = {0: Side.FRONT, 1: Side.BACK}
    segments = extract_segments(keypoints, annotations, sides)
    return PoseDataset(segments=segments, keypoints=keypoints,
                       annotations=annotations, sides=sides)


def pose_tracks(dataset: PoseDataset) -> list:
    """Ideal tracker output for a generated pose stream: one non-ghost
    snapshot per (frame, player) with the known court side."""
    from .tracker import TrackSnapshot

    out = []
    for kp in dataset.keypoints:
        arr = np.asarray(kp.keypoints, dtype=np.float64)
        x1, y1 = arr[:, 0].min(), arr[:, 1].min()
        x2, y2 = arr[:, 0].max(), arr[:, 1].max()
        out.append(TrackSnapshot(
            frame=kp.frame, id=kp.player_id, bbox=(x1, y1, x2, y2),
            center=((x1 + x2) / 2.0, y2), side=dataset.sides[kp.player_id],
            ghost=False))
    out.sort(key=lambda s: (s.frame, s.id))
    return out


def write_pose_labels(path, dataset: PoseDataset) -> None:
    lines = ["center_frame,player_id,label,side"]
    for seg in dataset.segments:
        lines.append(f"{seg.center_frame},{seg.player_id},"
                     f"{seg.label.name.lower()},{seg.side.value}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# --- canned scenarios -----------------------------------------------------------

# Play regions inside the canned court, one per roster slot: full front/back
# halves for two agents, quadrants for four.
_REGIONS_2 = (((300.0, 1070.0), (430.0, 560.0)), ((300.0, 1070.0), (250.0, 380.0)))
_REGIONS_4 = (
    ((300.0, 660.0), (430.0, 560.0)), ((710.0, 1070.0), (430.0, 560.0)),
    ((300.0, 660.0), (250.0, 380.0)), ((710.0, 1070.0), (250.0, 380.0)),
)


def random_scenario(
    n_agents: int,
    n_frames: int,
    occlusions: Sequence[Occlusion] = (),
    noise_sigma: float = 0.0,
    seed: int = 0,
    waypoint_every: int = 30,
    max_speed: float = 8.0,  # per axis; diagonal speed stays under 12 px/frame
) -> RallyScenario:
    """A scenario with each agent wandering inside its own court region at
    bounded speed."""
    rng = np.random.default_rng(seed)
    regions = _REGIONS_2 if n_agents == 2 else _REGIONS_4
    agents = []
    for a in range(n_agents):
        (x_lo, x_hi), (y_lo, y_hi) = regions[a]
        x = rng.uniform(x_lo, x_hi)
        y = rng.uniform(y_lo, y_hi)
        waypoints = [(0, float(x), float(y))]
        frame = 0
        while frame < n_frames - 1:
            nxt = min(frame + waypoint_every, n_frames - 1)
            step = max_speed * (nxt - frame)
            x = float(np.clip(x + rng.uniform(-step, step), x_lo, x_hi))
            y = float(np.clip(y + rng.uniform(-step, step), y_lo, y_hi))
            waypoints.append((nxt, x, y))
            frame = nxt
        agents.append(AgentPath(waypoints=tuple(waypoints)))
    return RallyScenario(agents=tuple(agents), n_frames=n_frames,
                         occlusions=tuple(occlusions), noise_sigma=noise_sigma,
                         seed=seed)


# --- missing-frame trials -------------------------------------------------------

def gap_scenarios(
    track: Sequence[tuple[int, float, float]],
    gaps: Sequence[int] = tuple(range(1, 15)),
) -> dict[int, list[float]]:
    """Simulated missing-frame trials over one identity's detected positions.

    For every run position with a detected predecessor and 14 detected
    successors, the constant-velocity prediction is anchored at that position
    (velocity from the two-point difference with the predecessor); hiding the
    following g frames, the recorded error is the distance between the
    prediction g frames ahead and the true position there.
    """
    pts = sorted(track)
    if len(pts) < 2:
        raise DataError("track too short for gap trials")
    by_frame = {f: (x, y) for f, x, y in pts}
    max_gap = max(gaps)

    out: dict[int, list[float]] = {g: [] for g in gaps}
    n_trials = 0
    for f, x, y in pts:
        if (f - 1) not in by_frame:
            continue
        if any((f + d) not in by_frame for d in range(1, max_gap + 1)):
            continue
        px, py = by_frame[f - 1]
        vx, vy = x - px, y - py
        for g in gaps:
            tx, ty = by_frame[f + g]
            out[g].append(math.hypot(x + vx * g - tx, y + vy * g - ty))
        n_trials += 1
    if n_trials == 0:
        raise DataError("track too short for gap trials")
    return out


def truth_to_tracks(rows: Sequence[TruthRow]) -> dict[int, list[tuple[int, float, float]]]:
    out: dict[int, list[tuple[int, float, float]]] = {}
    for r in rows:
        out.setdefault(r.true_id, []).append((r.frame, r.center[0], r.center[1]))
    return out
