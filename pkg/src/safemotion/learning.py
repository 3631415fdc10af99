"""Incremental learning of linear barriers from streamed demonstration points.

Streamed points are classified against the current barrier set: points near
an existing plane refine it, points pushed beyond a plane delete it, and
points away from every plane accumulate in a small buffer. Whenever the
buffer holds as many points as the state dimension, a new plane is fitted by
principal component analysis (normal = smallest-variance direction), oriented
so the goal stays on the admissible side, and added to the set.

All operations are functional: they return new values plus an event list and
never mutate their inputs. ConstraintLearner is a thin stateful wrapper for
callers that prefer mutation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .barriers import TOL_BOUNDARY, AdmissibleSet, LinearBarrier
from .errors import DegenerateFitError, DimensionMismatchError

# Default half-width of the on-plane band, in meters.
DEFAULT_DELTA = 0.05
DEFAULT_DECIMATION_HZ = 10.0

_SIGN_TOL = 1e-9      # first-nonzero threshold for the deterministic sign convention
_GOAL_PLANE_TOL = 1e-9  # |h(goal)| below this: orientation undecidable
_EIG_GAP_TOL = 1e-12  # second-smallest eigenvalue below this (relative): normal ambiguous


@dataclass(frozen=True)
class LearnerConfig:
    goal: np.ndarray
    delta: float = DEFAULT_DELTA
    decimation_hz: float = DEFAULT_DECIMATION_HZ
    refine: bool = False
    gain: float = 10.0

    def __post_init__(self):
        goal = np.asarray(self.goal, dtype=float)
        if goal.ndim != 1 or not np.all(np.isfinite(goal)):
            raise ValueError("goal must be a finite vector")
        goal = goal.copy()
        goal.flags.writeable = False
        object.__setattr__(self, "goal", goal)
        if not self.delta > TOL_BOUNDARY:
            raise ValueError(f"delta must exceed the boundary tolerance {TOL_BOUNDARY}")
        if self.decimation_hz <= 0:
            raise ValueError("decimation_hz must be positive")
        if self.gain <= 0:
            raise ValueError("gain must be positive")


@dataclass(frozen=True)
class TrainingBuffer:
    """Unassigned demonstration points awaiting a fit.

    capacity equals the state dimension; a fit fires exactly when the buffer
    fills. fit_count feeds deterministic barrier ids and never decreases.
    """

    capacity: int
    points: tuple = ()
    fit_count: int = 0

    def __post_init__(self):
        if self.capacity < 2:
            raise ValueError("buffer capacity (state dimension) must be >= 2")
        if len(self.points) > self.capacity:
            raise ValueError("buffer may hold at most capacity points (at fit time)")

    def __len__(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, self.capacity))
        return np.array([np.asarray(p, dtype=float) for p in self.points])


@dataclass(frozen=True)
class LearnerEvent:
    kind: str  # point_buffered | point_on_barrier | barrier_added | barrier_refined | barrier_removed
    t: float
    barrier_id: str = ""
    barrier: LinearBarrier | None = None
    ambiguous_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class BarrierStats:
    """Running mean and centered scatter of the points attributed to one barrier.

    Updated with Welford's recurrence, so the scatter equals the batch value
    sum (x - mean)(x - mean)^T over all absorbed points to rounding error.
    """

    count: int
    mean: np.ndarray
    scatter: np.ndarray

    @staticmethod
    def from_points(points: np.ndarray) -> "BarrierStats":
        stats = BarrierStats(0, np.zeros(points.shape[1]), np.zeros((points.shape[1],) * 2))
        for p in points:
            stats = stats.absorb(p)
        return stats

    def absorb(self, point) -> "BarrierStats":
        x = np.asarray(point, dtype=float)
        k = self.count + 1
        d = x - self.mean
        mean = self.mean + d / k
        scatter = self.scatter + np.outer(d, x - mean)
        return BarrierStats(k, mean, scatter)


def _oriented_plane(mean: np.ndarray, scatter: np.ndarray, goal: np.ndarray):
    """Smallest-variance plane through `mean`, oriented toward the goal.

    Returns (normal, offset) or raises DegenerateFitError when the normal
    direction is ambiguous or the goal sits on the plane.
    """
    w, V = np.linalg.eigh(scatter)
    gap_tol = _EIG_GAP_TOL * max(1.0, float(w[-1]))
    if w[1] <= gap_tol:
        raise DegenerateFitError(
            "points do not pin down a plane (two near-zero variance directions)"
        )
    normal = V[:, 0].copy()
    for v in normal:
        if abs(v) > _SIGN_TOL:
            if v < 0:
                normal = -normal
            break
    offset = -float(normal @ mean)
    h_goal = float(normal @ goal) + offset
    if abs(h_goal) < _GOAL_PLANE_TOL:
        raise DegenerateFitError("goal lies on the fitted plane; orientation undecidable")
    if h_goal < 0:
        normal = -normal
        offset = -offset
    return normal, offset


def fit_barrier(buf: TrainingBuffer, goal, gain: float = 10.0,
                barrier_id: str = "") -> LinearBarrier:
    """Fit a plane to a full buffer: PCA normal, offset through the centroid.

    The normal is the smallest-variance direction of the centered points,
    made deterministic by forcing its first non-negligible component positive
    and then flipping the whole plane if the goal lands on the negative side.
    """
    pts = buf.as_array()
    if pts.shape[0] != buf.capacity:
        raise ValueError(f"fit needs exactly {buf.capacity} points, buffer holds {pts.shape[0]}")
    goal = np.asarray(goal, dtype=float)
    if goal.shape != (pts.shape[1],):
        raise DimensionMismatchError("goal dimension does not match points")
    stats = BarrierStats.from_points(pts)
    normal, offset = _oriented_plane(stats.mean, stats.scatter, goal)
    return LinearBarrier(normal, offset, gain, barrier_id)


def refine_barrier(barrier: LinearBarrier, stats: BarrierStats, point, goal):
    """Absorb one on-plane point into a barrier's statistics and re-fit.

    Returns (barrier, stats, changed). The statistics always absorb the
    point; the plane only moves when the refit is well conditioned and the
    goal stays strictly off the plane, so refinement can never flip the goal
    to the inadmissible side. A refined barrier keeps its id and gain.
    """
    stats = stats.absorb(point)
    goal = np.asarray(goal, dtype=float)
    try:
        normal, offset = _oriented_plane(stats.mean, stats.scatter, goal)
    except DegenerateFitError:
        return barrier, stats, False
    refined = LinearBarrier(normal, offset, barrier.gain, barrier.id)
    return refined, stats, True


def ingest(point, t: float, cfg: LearnerConfig, aset: AdmissibleSet, buf: TrainingBuffer,
           stats: dict | None = None):
    """Classify one demonstration point and update the barrier set.

    Exactly one of these happens per point:
      * some h_i < -delta: the single most-violated barrier is removed and
        the buffer is cleared (stale cluster geometry);
      * some |h_i| <= delta (and none violated): the point lies on barrier i,
        refining it when enabled; a point within delta of several barriers is
        attributed to the smallest |h_i| and the tie is recorded on the event;
      * otherwise (or when no barriers exist): the point is buffered, and a
        full buffer fits and adds a new barrier.

    Returns (aset, buf, events, stats). `stats` carries the per-barrier
    refinement statistics keyed by id; pass the returned dict back in.
    """
    x = np.asarray(point, dtype=float)
    if x.shape != (buf.capacity,) or not np.all(np.isfinite(x)):
        raise DimensionMismatchError(
            f"point must be a finite vector of dimension {buf.capacity}"
        )
    stats = dict(stats or {})
    events: list[LearnerEvent] = []
    delta = cfg.delta

    if len(aset):
        h = aset.evaluate_all(x)
        violated = np.flatnonzero(h < -delta)
        if violated.size:
            worst = int(violated[np.argmin(h[violated])])
            removed = aset.barriers[worst]
            aset = aset.without_barrier(removed.id)
            stats.pop(removed.id, None)
            buf = replace(buf, points=())
            events.append(LearnerEvent("barrier_removed", t, barrier_id=removed.id))
            return aset, buf, events, stats

        on = np.flatnonzero(np.abs(h) <= delta)
        if on.size:
            best = int(on[np.argmin(np.abs(h[on]))])
            bid = aset.barriers[best].id
            ambiguous = tuple(aset.barriers[i].id for i in on) if on.size > 1 else ()
            events.append(LearnerEvent("point_on_barrier", t, barrier_id=bid,
                                       ambiguous_ids=ambiguous))
            if cfg.refine:
                barrier = aset.barriers[best]
                st = stats.get(bid)
                if st is None:
                    st = BarrierStats(0, np.zeros(buf.capacity), np.zeros((buf.capacity,) * 2))
                refined, st, changed = refine_barrier(barrier, st, x, cfg.goal)
                stats[bid] = st
                if changed:
                    aset = aset.replace_barrier(refined)
                    events.append(LearnerEvent("barrier_refined", t, barrier_id=bid,
                                               barrier=refined))
            return aset, buf, events, stats

    buf = replace(buf, points=buf.points + (tuple(float(v) for v in x),))
    events.append(LearnerEvent("point_buffered", t))
    if len(buf.points) == buf.capacity:
        bid = f"b{buf.fit_count + 1}"
        barrier = fit_barrier(buf, cfg.goal, cfg.gain, bid)
        aset = aset.with_barrier(barrier)
        stats[bid] = BarrierStats.from_points(buf.as_array())
        buf = TrainingBuffer(buf.capacity, (), buf.fit_count + 1)
        events.append(LearnerEvent("barrier_added", t, barrier_id=bid, barrier=barrier))
    return aset, buf, events, stats


class ConstraintLearner:
    """Stateful wrapper around ingest() owning one session's learner state."""

    def __init__(self, cfg: LearnerConfig, aset: AdmissibleSet | None = None):
        self.cfg = cfg
        self.aset = aset if aset is not None else AdmissibleSet()
        self.buffer = TrainingBuffer(capacity=cfg.goal.shape[0])
        self.stats: dict = {}

    def ingest(self, point, t: float) -> list[LearnerEvent]:
        self.aset, self.buffer, events, self.stats = ingest(
            point, t, self.cfg, self.aset, self.buffer, self.stats
        )
        return events

    def set_goal(self, goal) -> None:
        self.cfg = replace(self.cfg, goal=np.asarray(goal, dtype=float))

    def clear_buffer(self) -> None:
        self.buffer = replace(self.buffer, points=())


def event_to_dict(event: LearnerEvent) -> dict:
    doc = {"kind": event.kind, "t": event.t}
    if event.barrier_id:
        doc["barrier_id"] = event.barrier_id
    if event.ambiguous_ids:
        doc["ambiguous_ids"] = list(event.ambiguous_ids)
    if event.barrier is not None:
        doc["barrier"] = {
            "id": event.barrier.id,
            "normal": [float(v) for v in event.barrier.normal],
            "offset": float(event.barrier.offset),
            "gain": float(event.barrier.gain),
        }
    return doc


def event_from_dict(doc: dict) -> LearnerEvent:
    barrier = None
    if "barrier" in doc:
        raw = doc["barrier"]
        barrier = LinearBarrier(np.array(raw["normal"], dtype=float), raw["offset"],
                                raw["gain"], raw["id"])
    return LearnerEvent(
        kind=doc["kind"],
        t=float(doc["t"]),
        barrier_id=doc.get("barrier_id", ""),
        barrier=barrier,
        ambiguous_ids=tuple(doc.get("ambiguous_ids", ())),
    )


def write_event_log(events, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(event_to_dict(ev), sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_event_log(path) -> list[LearnerEvent]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(event_from_dict(json.loads(line)))
    return out
