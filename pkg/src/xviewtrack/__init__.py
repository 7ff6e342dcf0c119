"""Cross-view multi-object tracking: association, Re-ID losses, metrics, simulation."""

from .assignment import GATED, Assignment, hungarian
from .assoc_cv import MultiViewTracker, adaptive_temperature, matching_matrix, run_tracking
from .assoc_sv import RunConfig, ViewTracker
from .core import BBox, Detection, Track, cosine_distance, ema_update, iou
from .metrics import MetricsReport, evaluate
from .simulate import SceneConfig, generate_scene

__version__ = "0.1.0"
