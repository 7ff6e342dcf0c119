"""Cross-view matching and global-ID resolution for one synchronized frame."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assignment import Assignment, max_weight_matching
from .assoc_sv import RunConfig, ViewTracker
from .core import TrackStatus


def adaptive_temperature(epsilon: float, gamma: float, a_c: int) -> float:
    """``(1/epsilon) * ln((gamma * (a_c - 1) + 1) / (1 - gamma))``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if a_c < 1:
        raise ValueError("need at least one column")
    return float(np.log((gamma * (a_c - 1) + 1.0) / (1.0 - gamma)) / epsilon)


def association_matrix(e_i, e_j) -> np.ndarray:
    """Similarity ``E_i E_j^T`` after unit-normalizing every row."""
    e_i = np.atleast_2d(np.asarray(e_i, dtype=float))
    e_j = np.atleast_2d(np.asarray(e_j, dtype=float))
    e_i = e_i / np.linalg.norm(e_i, axis=1, keepdims=True)
    e_j = e_j / np.linalg.norm(e_j, axis=1, keepdims=True)
    return e_i @ e_j.T


def row_softmax(a, tau: float) -> np.ndarray:
    z = tau * np.asarray(a, dtype=float)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def matching_matrix(a, tau: float, delta_c: float) -> np.ndarray:
    """Row softmax at temperature ``tau`` with entries ``<= delta_c`` zeroed."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros(a.shape)
    m = row_softmax(a, tau)
    m[m <= delta_c] = 0.0
    return m


def pair_match(m) -> Assignment:
    """Maximum-score assignment; zero entries are never matched."""
    return max_weight_matching(np.asarray(m, dtype=float))


class UnionFind:
    def __init__(self, items=()):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        # keep the smaller key as root so results do not depend on call order
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return ra

    def groups(self):
        out = {}
        for x in sorted(self.parent):
            out.setdefault(self.find(x), []).append(x)
        return out


@dataclass
class GlobalIdMap:
    """Assignment of ``(view, local_id)`` tracks to global IDs.

    ``holders[gid][view]`` is the latest track of that view carrying ``gid``.
    A global ID, once given to a track, never changes.
    """

    gid_of: dict = field(default_factory=dict)
    holders: dict = field(default_factory=dict)
    next_gid: int = 1

    def clusters(self) -> dict:
        out = {}
        for key, gid in sorted(self.gid_of.items()):
            out.setdefault(gid, []).append(key)
        return out

    def _bind(self, key, gid):
        view = key[0]
        displaced = None
        prev = self.holders.setdefault(gid, {}).get(view)
        if prev is not None and prev != key:
            displaced = prev
        self.holders[gid][view] = key
        self.gid_of[key] = gid
        return displaced


def resolve_global_ids(gmap: GlobalIdMap, participants, pairs) -> list:
    """Merge matched tracks into global-ID clusters.

    ``participants`` are the ``(view, local_id)`` keys active this frame and
    ``pairs`` are ``(score, i, j, row, key_a, key_b)`` from the pairwise matchings.
    Pairs are applied in descending score (ties by ``i, j, row``). A merge is
    refused when it would join two tracks of one view or two different existing
    global IDs. Returns keys of older tracks displaced from a global ID by a
    newer track of the same view; callers retire those tracks.
    """
    participants = sorted(participants)
    uf = UnionFind(participants)
    views = {k: {k[0]} for k in participants}
    gids = {k: ({gmap.gid_of[k]} if k in gmap.gid_of else set()) for k in participants}

    for score, i, j, row, a, b in sorted(pairs, key=lambda p: (-p[0], p[1], p[2], p[3])):
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        if views[ra] & views[rb]:
            continue
        if len(gids[ra] | gids[rb]) > 1:
            continue
        root = uf.union(ra, rb)
        other = rb if root == ra else ra
        views[root] = views[ra] | views[rb]
        gids[root] = gids[ra] | gids[rb]
        del views[other], gids[other]

    displaced = []
    for root, members in uf.groups().items():
        if gids[root]:
            gid = next(iter(gids[root]))
        else:
            gid = gmap.next_gid
            gmap.next_gid += 1
        for key in members:
            if gmap.gid_of.get(key) == gid:
                gmap.holders.setdefault(gid, {})[key[0]] = key
                continue
            old = gmap._bind(key, gid)
            if old is not None:
                displaced.append(old)
    return displaced


@dataclass
class MultiViewTracker:
    """Single-view trackers for every view plus the shared global-ID map."""

    views: list
    config: RunConfig = field(default_factory=RunConfig)
    trackers: dict = field(default_factory=dict)
    gmap: GlobalIdMap = field(default_factory=GlobalIdMap)

    def __post_init__(self):
        for v in self.views:
            self.trackers.setdefault(v, ViewTracker(v, self.config))

    def step(self, frame: int, detections: dict):
        """Run single-view then cross-view matching for one synchronized frame.

        ``detections`` maps view -> list of detections (missing views are empty).
        Returns ``(single_rows, cross_rows)``; both map view -> list of
        ``(frame, id, box)`` where id is the local and the global ID respectively.
        """
        single = {v: self.trackers[v].step(frame, detections.get(v, [])) for v in self.views}
        cv_step(self, frame)
        cross = {}
        for v, rows in single.items():
            cross[v] = [(f, self.gmap.gid_of[(v, lid)], box) for f, lid, box in rows]
        return single, cross


def cv_step(state: MultiViewTracker, frame: int) -> list:
    """Cross-view matching over confirmed tracks updated at ``frame``."""
    cfg = state.config
    active = {}
    for v in state.views:
        tracks = [t for t in state.trackers[v].confirmed_tracks() if t.last_frame == frame]
        active[v] = sorted(tracks, key=lambda t: t.local_id)

    pairs = []
    views = [v for v in state.views if active[v]]
    for ii, vi in enumerate(views):
        for vj in views[ii + 1:]:
            ti, tj = active[vi], active[vj]
            a = association_matrix([t.smoothed_cross_emb for t in ti], [t.smoothed_cross_emb for t in tj])
            tau = adaptive_temperature(cfg.epsilon, cfg.gamma, a.shape[1])
            m = matching_matrix(a, tau, cfg.delta_c)
            if cfg.symmetric_matching:
                tau_t = adaptive_temperature(cfg.epsilon, cfg.gamma, a.shape[0])
                m = np.minimum(m, matching_matrix(a.T, tau_t, cfg.delta_c).T)
            for r, c in pair_match(m).matches:
                pairs.append((float(m[r, c]), vi, vj, r,
                              (vi, ti[r].local_id), (vj, tj[c].local_id)))

    participants = [(v, t.local_id) for v in state.views for t in active[v]]
    displaced = resolve_global_ids(state.gmap, participants, pairs)
    for view, lid in displaced:
        for t in state.trackers[view].tracks:
            if t.local_id == lid:
                t.status = TrackStatus.DEAD
        state.trackers[view].tracks = [t for t in state.trackers[view].tracks if not t.is_dead]
    return displaced


def run_tracking(stream: dict, n_frames: int, config: RunConfig | None = None):
    """Track a whole scene. ``stream[view][k]`` holds the detections of frame ``k + 1``.

    Returns ``(single, cross)``: view -> rows sorted by (frame, id).
    """
    config = config or RunConfig()
    views = sorted(stream)
    mvt = MultiViewTracker(views, config)
    single = {v: [] for v in views}
    cross = {v: [] for v in views}
    for k in range(n_frames):
        frame_dets = {v: stream[v][k] if k < len(stream[v]) else [] for v in views}
        s, c = mvt.step(k + 1, frame_dets)
        for v in views:
            single[v].extend(s[v])
            cross[v].extend(c[v])
    for v in views:
        single[v].sort(key=lambda r: (r[0], r[1]))
        cross[v].sort(key=lambda r: (r[0], r[1]))
    return single, cross
