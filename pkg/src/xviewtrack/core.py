"""Domain types and vector/box primitives shared across the tracker."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

EMBEDDING_DIM = 512


@dataclass(frozen=True)
class BBox:
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"box needs positive width/height, got {self.width}x{self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    def as_tuple(self):
        return (self.left, self.top, self.width, self.height)


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0:
        raise ValueError("cannot normalize a zero or non-finite vector")
    return v / n


def cosine_distance(a, b) -> float:
    """``1 - cos(a, b)``; zero-norm inputs raise ``ValueError``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine distance undefined for zero-norm vector")
    d = 1.0 - float(a @ b) / (na * nb)
    return min(max(d, 0.0), 2.0)


def ema_update(old, new, alpha: float) -> np.ndarray:
    """Blend ``alpha * old + (1 - alpha) * new`` and renormalize to unit length."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    old = np.asarray(old, dtype=float)
    new = np.asarray(new, dtype=float)
    if old.shape != new.shape:
        raise ValueError(f"dimension mismatch: {old.shape} vs {new.shape}")
    return normalize(alpha * old + (1.0 - alpha) * new)


@dataclass
class Detection:
    view: int
    frame: int
    box: BBox
    confidence: float
    single_emb: np.ndarray
    cross_emb: np.ndarray
    gt_global_id: Optional[int] = None


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DEAD = "dead"


@dataclass
class Track:
    local_id: int
    view: int
    last_frame: int
    box: BBox
    smoothed_single_emb: np.ndarray
    smoothed_cross_emb: np.ndarray
    age_since_update: int = 0
    hits: int = 1
    status: TrackStatus = TrackStatus.TENTATIVE
    global_id: Optional[int] = None
    # rows observed while tentative, emitted once the track is confirmed
    pending: list = field(default_factory=list)

    @property
    def is_confirmed(self) -> bool:
        return self.status is TrackStatus.CONFIRMED

    @property
    def is_dead(self) -> bool:
        return self.status is TrackStatus.DEAD
