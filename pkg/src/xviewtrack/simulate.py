"""Synthetic multi-view scenes: random-waypoint agents seen by overlapping cameras.

Each camera maps the ground plane to pixels with an axis-aligned affine map.
Boxes grow as agents approach the camera's reference edge. Appearance
embeddings are drawn from a controllable identity/view mixture so that
single-view and cross-view labels can be made to conflict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import EMBEDDING_DIM, BBox, Detection, normalize

EDGES = ("south", "west", "north", "east")


@dataclass
class CameraSpec:
    rect: tuple  # (x0, y0, x1, y1) visible ground rectangle, meters
    pixel_scale: float = 40.0  # px per meter
    ref_edge: str = "south"
    base_height: float = 160.0  # box height (px) for an agent on the reference edge
    falloff: float = 6.0  # meters; height = base_height * falloff / (falloff + depth)

    def __post_init__(self):
        if self.ref_edge not in EDGES:
            raise ValueError(f"ref_edge must be one of {EDGES}")
        x0, y0, x1, y1 = self.rect
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate camera rectangle {self.rect}")
        if self.pixel_scale <= 0 or self.base_height <= 0 or self.falloff <= 0:
            raise ValueError("camera scale parameters must be positive")

    def contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.rect
        return x0 <= x <= x1 and y0 <= y <= y1

    def _along_depth(self, x, y):
        x0, y0, x1, y1 = self.rect
        if self.ref_edge == "south":
            return x - x0, y - y0, y1 - y0
        if self.ref_edge == "north":
            return x1 - x, y1 - y, y1 - y0
        if self.ref_edge == "west":
            return y1 - y, x - x0, x1 - x0
        return y - y0, x1 - x, x1 - x0

    def depth(self, x: float, y: float) -> float:
        return self._along_depth(x, y)[1]

    def project(self, x: float, y: float) -> BBox:
        along, depth, extent = self._along_depth(x, y)
        h = self.base_height * self.falloff / (self.falloff + depth)
        w = 0.4 * h
        foot_u = along * self.pixel_scale
        foot_v = self.base_height + (extent - depth) * self.pixel_scale
        return BBox(foot_u - w / 2, foot_v - h, w, h)


def default_cameras(arena, n_views: int, coverage: float = 1.0) -> list:
    """Cameras looking at the arena from rotating sides.

    ``coverage`` < 1 shrinks each view to a sub-rectangle of that width fraction,
    staggered across the arena so neighbouring views overlap.
    """
    ax0, ay0, ax1, ay1 = arena
    cams = []
    for v in range(n_views):
        if coverage >= 1.0:
            rect = (ax0, ay0, ax1, ay1)
        else:
            span = (ax1 - ax0) * coverage
            start = ax0 + (ax1 - ax0 - span) * (v / max(n_views - 1, 1))
            rect = (start, ay0, start + span, ay1)
        cams.append(CameraSpec(rect=rect, pixel_scale=40.0 + 5.0 * v, ref_edge=EDGES[v % 4]))
    return cams


@dataclass
class SceneConfig:
    n_agents: int = 6
    n_views: int = 3
    n_frames: int = 200
    arena: tuple = (0.0, 0.0, 20.0, 20.0)
    speed_range: tuple = (0.05, 0.2)
    cameras: Optional[list] = None
    camera_coverage: float = 1.0
    miss_prob: float = 0.0
    fp_rate: float = 0.0
    box_jitter_sigma: float = 0.0
    sigma_cross: float = 0.0
    sigma_single: float = 0.0
    view_component_weight: float = 0.5
    embedding_dim: int = EMBEDDING_DIM
    hard_negatives: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_agents < 1 or self.n_views < 2 or self.n_frames < 1:
            raise ValueError("need n_agents >= 1, n_views >= 2, n_frames >= 1")
        ax0, ay0, ax1, ay1 = self.arena
        if not (ax1 > ax0 and ay1 > ay0):
            raise ValueError(f"degenerate arena {self.arena}")
        lo, hi = self.speed_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad speed_range {self.speed_range}")
        if not 0.0 <= self.miss_prob < 1.0:
            raise ValueError("miss_prob must lie in [0, 1)")
        for name in ("fp_rate", "box_jitter_sigma", "sigma_cross", "sigma_single"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.view_component_weight <= 1.0:
            raise ValueError("view_component_weight must lie in [0, 1]")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be positive")
        if self.cameras is None:
            self.cameras = default_cameras(self.arena, self.n_views, self.camera_coverage)
        if len(self.cameras) != self.n_views:
            raise ValueError("one camera spec per view required")
        for cam in self.cameras:
            cx0, cy0, cx1, cy1 = cam.rect
            if cx1 <= ax0 or cx0 >= ax1 or cy1 <= ay0 or cy0 >= ay1:
                raise ValueError(f"camera rectangle {cam.rect} misses the arena")


@dataclass
class SceneTruth:
    trajectories: np.ndarray  # (n_frames, n_agents, 2) ground positions
    gt: dict = field(default_factory=dict)  # view -> list over frames of list[Detection]

    @property
    def n_frames(self) -> int:
        return self.trajectories.shape[0]

    @property
    def views(self) -> list:
        return sorted(self.gt)


def _streams(seed: int):
    motion, detect, appearance, noise = np.random.SeedSequence(seed).spawn(4)
    return (np.random.default_rng(motion), np.random.default_rng(detect),
            np.random.default_rng(appearance), np.random.default_rng(noise))


def random_waypoint(config: SceneConfig, rng) -> np.ndarray:
    ax0, ay0, ax1, ay1 = config.arena
    lo, hi = config.speed_range
    lower = np.array([ax0, ay0])
    upper = np.array([ax1, ay1])
    pos = rng.uniform(lower, upper, size=(config.n_agents, 2))
    target = rng.uniform(lower, upper, size=(config.n_agents, 2))
    speed = rng.uniform(lo, hi, size=config.n_agents)
    out = np.empty((config.n_frames, config.n_agents, 2))
    for t in range(config.n_frames):
        out[t] = pos
        step = target - pos
        dist = np.linalg.norm(step, axis=1)
        for a in range(config.n_agents):
            if dist[a] <= speed[a]:
                pos[a] = target[a]
                target[a] = rng.uniform(lower, upper)
                speed[a] = rng.uniform(lo, hi)
            else:
                pos[a] = pos[a] + step[a] * (speed[a] / dist[a])
    return out


def _placeholder(dim):
    return np.zeros(dim)


def simulate_truth(config: SceneConfig, rng=None) -> SceneTruth:
    if rng is None:
        rng = _streams(config.seed)[0]
    traj = random_waypoint(config, rng)
    gt = {}
    for v, cam in enumerate(config.cameras):
        frames = []
        for t in range(config.n_frames):
            dets = []
            for g in range(config.n_agents):
                x, y = traj[t, g]
                if cam.contains(x, y):
                    dets.append(Detection(
                        view=v, frame=t + 1, box=cam.project(x, y), confidence=1.0,
                        single_emb=_placeholder(config.embedding_dim),
                        cross_emb=_placeholder(config.embedding_dim),
                        gt_global_id=g,
                    ))
            frames.append(dets)
        gt[v] = frames
    return SceneTruth(traj, gt)


def _jitter(box: BBox, sigma: float, rng) -> BBox:
    if sigma == 0:
        return box
    dl, dt, dw, dh = rng.normal(0.0, sigma, size=4)
    return BBox(box.left + dl, box.top + dt, max(box.width + dw, 1.0), max(box.height + dh, 1.0))


def corrupt(truth: SceneTruth, config: SceneConfig, rng) -> dict:
    """Observed detections: Bernoulli dropouts, box jitter, Poisson false positives."""
    dets = {}
    ax0, ay0, ax1, ay1 = config.arena
    for v in truth.views:
        cam = config.cameras[v]
        cx0, cy0, cx1, cy1 = cam.rect
        lo = (max(cx0, ax0), max(cy0, ay0))
        hi = (min(cx1, ax1), min(cy1, ay1))
        frames = []
        for t, gt_frame in enumerate(truth.gt[v]):
            out = []
            for d in gt_frame:
                if rng.random() < config.miss_prob:
                    continue
                out.append(Detection(
                    view=v, frame=d.frame, box=_jitter(d.box, config.box_jitter_sigma, rng),
                    confidence=float(rng.uniform(0.6, 1.0)),
                    single_emb=d.single_emb, cross_emb=d.cross_emb, gt_global_id=d.gt_global_id,
                ))
            for _ in range(rng.poisson(config.fp_rate)):
                x, y = rng.uniform(lo, hi)
                out.append(Detection(
                    view=v, frame=t + 1, box=_jitter(cam.project(x, y), config.box_jitter_sigma, rng),
                    confidence=float(rng.uniform(0.3, 1.0)),
                    single_emb=_placeholder(config.embedding_dim),
                    cross_emb=_placeholder(config.embedding_dim),
                ))
            frames.append(out)
        dets[v] = frames
    return dets


class AppearanceModel:
    """Fixed identity vectors ``u_g`` and per-view vectors ``w_{g,v}``.

    Noise levels are expressed as expected noise norm: each coordinate gets
    ``sigma / sqrt(dim)`` so a sigma of 0.1 perturbs a unit vector by about 10%.
    """

    def __init__(self, n_ids: int, n_views: int, dim: int, rng):
        self.dim = dim
        self.identity = np.array([normalize(rng.normal(size=dim)) for _ in range(n_ids)])
        self.view = np.array([[normalize(rng.normal(size=dim)) for _ in range(n_views)]
                              for _ in range(n_ids)])

    def _noise(self, sigma, rng):
        if sigma == 0:
            return 0.0
        return rng.normal(0.0, sigma / np.sqrt(self.dim), size=self.dim)

    def cross(self, g, sigma, rng):
        return normalize(self.identity[g] + self._noise(sigma, rng))

    def single(self, g, v, lam, sigma, rng):
        base = (1.0 - lam) * self.identity[g] + lam * self.view[g, v]
        return normalize(base + self._noise(sigma, rng))

    def random_unit(self, rng):
        return normalize(rng.normal(size=self.dim))


def sample_embeddings(stream: dict, config: SceneConfig, model: AppearanceModel, rng) -> dict:
    """Fill ``single_emb``/``cross_emb`` of every detection in place; returns the stream."""
    lam = config.view_component_weight
    n_ids = model.identity.shape[0]
    for v in sorted(stream):
        for frame in stream[v]:
            for d in frame:
                g = d.gt_global_id
                if g is not None:
                    d.cross_emb = model.cross(g, config.sigma_cross, rng)
                    d.single_emb = model.single(g, v, lam, config.sigma_single, rng)
                elif config.hard_negatives:
                    decoy = int(rng.integers(n_ids))
                    d.cross_emb = model.cross(decoy, 0.5, rng)
                    d.single_emb = model.single(decoy, v, lam, 0.5, rng)
                else:
                    d.cross_emb = model.random_unit(rng)
                    d.single_emb = model.random_unit(rng)
    return stream


def generate_scene(config: SceneConfig):
    """Returns ``(truth, detections)``; detections map view -> per-frame lists.

    Frames are 1-based. Identical config (seed included) gives identical output.
    """
    motion_rng, detect_rng, appearance_rng, noise_rng = _streams(config.seed)
    truth = simulate_truth(config, motion_rng)
    model = AppearanceModel(config.n_agents, config.n_views, config.embedding_dim, appearance_rng)
    dets = corrupt(truth, config, detect_rng)
    # GT embeddings come from a separate stream so detections do not depend on them
    sample_embeddings(truth.gt, config, model, np.random.default_rng([config.seed, 1]))
    sample_embeddings(dets, config, model, noise_rng)
    return truth, dets
