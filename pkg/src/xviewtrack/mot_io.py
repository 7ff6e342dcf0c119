"""MOT-Challenge text files, embedding sidecars and flat ``key = value`` configs."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import BBox, Detection, normalize


class FormatError(ValueError):
    pass


@dataclass
class MotRecord:
    frame: int
    id: int
    bb_left: float
    bb_top: float
    bb_width: float
    bb_height: float
    conf: float = 1.0
    x: float = -1.0
    y: float = -1.0
    z: float = -1.0

    @property
    def box(self) -> BBox:
        return BBox(self.bb_left, self.bb_top, self.bb_width, self.bb_height)


def _g(x) -> str:
    return format(float(x), ".6g")


def format_mot(records) -> str:
    lines = []
    for r in records:
        fields = [str(int(r.frame)), str(int(r.id))]
        fields += [_g(v) for v in (r.bb_left, r.bb_top, r.bb_width, r.bb_height, r.conf, r.x, r.y, r.z)]
        lines.append(",".join(fields))
    return "".join(line + "\n" for line in lines)


def write_mot(path, records):
    Path(path).write_text(format_mot(records))


def parse_mot_text(text: str, source: str = "<text>") -> list:
    records = []
    last_frame = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if not 7 <= len(parts) <= 10:
            raise FormatError(f"{source}:{lineno}: expected 7-10 comma-separated fields, got {len(parts)}")
        try:
            frame = int(parts[0])
            ident = int(float(parts[1]))
            values = [float(p) for p in parts[2:]]
        except ValueError as exc:
            raise FormatError(f"{source}:{lineno}: {exc}") from None
        values += [-1.0] * (8 - len(values))
        if frame < 1:
            raise FormatError(f"{source}:{lineno}: frame numbers start at 1")
        if last_frame is not None and frame < last_frame:
            raise FormatError(f"{source}:{lineno}: frame {frame} after frame {last_frame}")
        last_frame = frame
        records.append(MotRecord(frame, ident, *values))
    return records


def parse_mot(path) -> list:
    path = Path(path)
    return parse_mot_text(path.read_text(), str(path))


def rows_from_records(records) -> list:
    """``(frame, id, BBox)`` rows as used by the tracker and the metrics."""
    return [(r.frame, r.id, r.box) for r in records]


def records_from_rows(rows, conf: float = 1.0) -> list:
    return [MotRecord(f, i, *box.as_tuple(), conf) for f, i, box in rows]


# --- embedding sidecars ---------------------------------------------------

def format_sidecar(rows, dim: int) -> str:
    """``rows`` are ``(frame, det_index, vector)``; values written with 8 significant digits."""
    out = [f"dim={dim}\n"]
    for frame, idx, vec in rows:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (dim,):
            raise FormatError(f"embedding of frame {frame} has shape {vec.shape}, expected ({dim},)")
        out.append(f"{int(frame)},{int(idx)}," + ",".join(format(v, ".8g") for v in vec) + "\n")
    return "".join(out)


def parse_sidecar_text(text: str, source: str = "<sidecar>"):
    lines = text.splitlines()
    if not lines or not re.fullmatch(r"dim=\d+", lines[0].strip()):
        raise FormatError(f"{source}:1: missing 'dim=<K>' header")
    dim = int(lines[0].strip()[4:])
    out = {}
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != dim + 2:
            raise FormatError(f"{source}:{lineno}: expected {dim} values, got {len(parts) - 2}")
        try:
            key = (int(parts[0]), int(parts[1]))
            out[key] = np.array([float(p) for p in parts[2:]])
        except ValueError as exc:
            raise FormatError(f"{source}:{lineno}: {exc}") from None
    return dim, out


def write_detections(directory, view: int, frames):
    """Write one view's detections as MOT rows plus single/cross embedding sidecars."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records, single, cross = [], [], []
    dim = None
    for dets in frames:
        for idx, d in enumerate(dets):
            records.append(MotRecord(d.frame, -1, *d.box.as_tuple(), d.confidence))
            single.append((d.frame, idx, d.single_emb))
            cross.append((d.frame, idx, d.cross_emb))
            dim = len(d.single_emb)
    dim = dim or 0
    write_mot(directory / f"view_{view}.txt", records)
    (directory / f"view_{view}.single.emb").write_text(format_sidecar(single, dim))
    (directory / f"view_{view}.cross.emb").write_text(format_sidecar(cross, dim))


def read_detections(directory, view: int) -> list:
    """Inverse of ``write_detections``: list over frames (index k = frame k + 1).

    Embeddings are unit-normalized on the way in.
    """
    directory = Path(directory)
    records = parse_mot(directory / f"view_{view}.txt")
    _, single = parse_sidecar_text((directory / f"view_{view}.single.emb").read_text(),
                                   f"view_{view}.single.emb")
    _, cross = parse_sidecar_text((directory / f"view_{view}.cross.emb").read_text(),
                                  f"view_{view}.cross.emb")
    if len(single) != len(records) or len(cross) != len(records):
        raise FormatError(f"view {view}: sidecars do not have one row per detection")
    n_frames = max((r.frame for r in records), default=0)
    frames = [[] for _ in range(n_frames)]
    for r in records:
        idx = len(frames[r.frame - 1])
        key = (r.frame, idx)
        if key not in single or key not in cross:
            raise FormatError(f"view {view}: no embedding for frame {r.frame} detection {idx}")
        frames[r.frame - 1].append(Detection(
            view=view, frame=r.frame, box=r.box, confidence=r.conf,
            single_emb=normalize(single[key]), cross_emb=normalize(cross[key]),
        ))
    return frames


def view_files(directory) -> dict:
    """``view -> path`` for every ``view_<i>.txt`` in ``directory``."""
    out = {}
    for p in Path(directory).glob("view_*.txt"):
        m = re.fullmatch(r"view_(\d+)\.txt", p.name)
        if m:
            out[int(m.group(1))] = p
    return dict(sorted(out.items()))


def read_rows_dir(directory) -> dict:
    return {v: rows_from_records(parse_mot(p)) for v, p in view_files(directory).items()}


def write_rows_dir(directory, rows_by_view: dict):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for v, rows in rows_by_view.items():
        write_mot(directory / f"view_{v}.txt", records_from_rows(sorted(rows, key=lambda r: (r[0], r[1]))))


# --- flat configs ---------------------------------------------------------

class ConfigError(ValueError):
    pass


def parse_flat(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def _coerce(value: str, default, key: str):
    try:
        if isinstance(default, bool):
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            return tuple(float(v) for v in value.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None
    raise ConfigError(f"key {key} cannot be set from a config file")


def build_config(cls, values: dict, skip=("cameras",)):
    """Instantiate dataclass ``cls`` from string values; unknown keys are errors."""
    defaults = cls()
    known = {f.name for f in dataclasses.fields(cls) if f.name not in skip}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    kwargs = {k: _coerce(v, getattr(defaults, k), k) for k, v in values.items()}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(cls, path=None):
    if path is None:
        return cls()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return build_config(cls, parse_flat(path.read_text(), str(path)))


def dump_config(cfg, skip=("cameras",)) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        if f.name in skip:
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, tuple):
            v = ",".join(repr(float(x)) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
