"""Frame-to-frame association inside one view.

Appearance cost (cosine distance on single-view embeddings), gating, Hungarian
assignment, an optional IoU pass for leftovers, and the track lifecycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assignment import GATED, Assignment, hungarian
from .core import BBox, Track, TrackStatus, ema_update, iou


@dataclass
class RunConfig:
    delta_d: float = 0.5  # detection confidence threshold
    delta_s: float = 0.3  # single-view cosine-distance gate
    delta_c: float = 0.5  # cross-view matching threshold
    epsilon: float = 0.5  # adaptive temperature parameters
    gamma: float = 0.5
    ema_alpha: float = 0.9
    max_age: int = 30
    min_hits: int = 2
    iou_fallback: bool = True
    iou_fallback_threshold: float = 0.3
    iou_threshold_eval: float = 0.5
    max_interp_gap: int = 10  # fill gaps up to this many frames on re-match; 0 disables
    symmetric_matching: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta_s < 2:
            raise ValueError("delta_s must lie in (0, 2)")
        if not 0 < self.delta_c < 1:
            raise ValueError("delta_c must lie in (0, 1)")
        if self.epsilon <= 0 or not 0 < self.gamma < 1:
            raise ValueError("need epsilon > 0 and gamma in (0, 1)")
        if not 0 <= self.ema_alpha <= 1:
            raise ValueError("ema_alpha must lie in [0, 1]")
        if self.max_age < 0 or self.min_hits < 1 or self.max_interp_gap < 0:
            raise ValueError("need max_age >= 0, min_hits >= 1 and max_interp_gap >= 0")


def build_cost_matrix(tracks, detections) -> np.ndarray:
    """Cosine distances between track and detection single-view embeddings.

    Embeddings are unit-norm at ingestion, so the distance is ``1 - t . d``.
    """
    if not tracks or not detections:
        return np.zeros((len(tracks), len(detections)))
    t = np.array([tr.smoothed_single_emb for tr in tracks])
    d = np.array([det.single_emb for det in detections])
    t = t / np.linalg.norm(t, axis=1, keepdims=True)
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    return np.clip(1.0 - t @ d.T, 0.0, 2.0)


def gate(cost, delta_s: float) -> np.ndarray:
    cost = np.array(cost, dtype=float)
    cost[cost > delta_s] = GATED
    return cost


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    out = np.zeros((len(boxes_a), len(boxes_b)))
    for i, a in enumerate(boxes_a):
        for j, b in enumerate(boxes_b):
            out[i, j] = iou(a, b)
    return out


def interpolate_gap(ident, f0: int, b0: BBox, f1: int, b1: BBox) -> list:
    """Linearly interpolated rows for the frames strictly between ``f0`` and ``f1``."""
    rows = []
    start = np.array(b0.as_tuple())
    end = np.array(b1.as_tuple())
    for f in range(f0 + 1, f1):
        w = (f - f0) / (f1 - f0)
        rows.append((f, ident, BBox(*((1 - w) * start + w * end))))
    return rows


@dataclass
class ViewTracker:
    """Tracker state for one view. ``step`` must see frames in increasing order."""

    view: int
    config: RunConfig = field(default_factory=RunConfig)
    tracks: list = field(default_factory=list)
    next_local_id: int = 1
    last_frame: int = 0
    started: bool = False

    def live_tracks(self):
        return [t for t in self.tracks if not t.is_dead]

    def confirmed_tracks(self):
        return [t for t in self.tracks if t.is_confirmed]

    def _match(self, tracks, dets) -> Assignment:
        cfg = self.config
        cost = gate(build_cost_matrix(tracks, dets), cfg.delta_s)
        result = hungarian(cost)
        if not cfg.iou_fallback or not result.unmatched_rows or not result.unmatched_cols:
            return result
        rows, cols = result.unmatched_rows, result.unmatched_cols
        overlap = iou_matrix([tracks[r].box for r in rows], [dets[c].box for c in cols])
        fallback = np.where(overlap >= cfg.iou_fallback_threshold, 1.0 - overlap, GATED)
        extra = hungarian(fallback)
        matches = result.matches + [(rows[r], cols[c]) for r, c in extra.matches]
        used_r = {r for r, _ in matches}
        used_c = {c for _, c in matches}
        return Assignment(
            sorted(matches),
            [r for r in range(len(tracks)) if r not in used_r],
            [c for c in range(len(dets)) if c not in used_c],
        )

    def step(self, frame: int, detections) -> list:
        """Advance one frame; returns ``(frame, local_id, box)`` rows ready for output.

        Rows of a track seen while it was tentative are released on the frame
        it gets confirmed, so the returned list can include earlier frames.
        """
        cfg = self.config
        if frame <= self.last_frame:
            raise ValueError(f"view {self.view}: frame {frame} not after {self.last_frame}")
        gap = frame - self.last_frame if self.started else 1
        self.last_frame = frame
        dets = [d for d in detections if d.confidence >= cfg.delta_d]
        tracks = self.live_tracks()
        assignment = self._match(tracks, dets)

        out = []
        for r, c in assignment.matches:
            tr, det = tracks[r], dets[c]
            if tr.is_confirmed and 1 < frame - tr.last_frame <= cfg.max_interp_gap + 1:
                out.extend(interpolate_gap(tr.local_id, tr.last_frame, tr.box, frame, det.box))
            tr.smoothed_single_emb = ema_update(tr.smoothed_single_emb, det.single_emb, cfg.ema_alpha)
            tr.smoothed_cross_emb = ema_update(tr.smoothed_cross_emb, det.cross_emb, cfg.ema_alpha)
            tr.box = det.box
            tr.last_frame = frame
            tr.age_since_update = 0
            tr.hits += 1
            if tr.status is TrackStatus.TENTATIVE and tr.hits >= cfg.min_hits:
                tr.status = TrackStatus.CONFIRMED
                out.extend(tr.pending)
                tr.pending = []
            if tr.is_confirmed:
                out.append((frame, tr.local_id, det.box))
            else:
                tr.pending.append((frame, tr.local_id, det.box))

        for r in assignment.unmatched_rows:
            tr = tracks[r]
            tr.age_since_update += gap
            if tr.status is TrackStatus.TENTATIVE or tr.age_since_update > cfg.max_age:
                tr.status = TrackStatus.DEAD
                tr.pending = []

        for c in assignment.unmatched_cols:
            det = dets[c]
            tr = Track(
                local_id=self.next_local_id, view=self.view, last_frame=frame, box=det.box,
                smoothed_single_emb=np.array(det.single_emb, dtype=float),
                smoothed_cross_emb=np.array(det.cross_emb, dtype=float),
            )
            self.next_local_id += 1
            # tracks born on the first processed frame are trusted immediately
            if not self.started or tr.hits >= cfg.min_hits:
                tr.status = TrackStatus.CONFIRMED
                out.append((frame, tr.local_id, det.box))
            else:
                tr.pending.append((frame, tr.local_id, det.box))
            self.tracks.append(tr)

        self.started = True
        self.tracks = [t for t in self.tracks if not t.is_dead]
        out.sort(key=lambda row: (row[0], row[1]))
        return out


def sv_step(state: ViewTracker, frame: int, detections) -> list:
    return state.step(frame, detections)


def track_view(frames, view: int, config: RunConfig | None = None) -> list:
    """Run a tracker over ``frames`` (list over frames of detection lists, frame k+1 at index k)."""
    tracker = ViewTracker(view, config or RunConfig())
    rows = []
    for k, dets in enumerate(frames):
        rows.extend(tracker.step(k + 1, dets))
    return rows
