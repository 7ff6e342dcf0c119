"""Tracking metrics: cross-view CVMA / CVIDF1 and single-view CLEAR + IDF1.

Inputs are per-view row lists ``[(frame, id, BBox), ...]``. Boxes are matched
per (view, frame) by maximum cardinality, then maximum total IoU, keeping pairs
with IoU >= ``iou_threshold``.

Counting conventions:

* CVMA pools all views at a timestamp. A GT identity counts one mismatch at
  timestamp t when its matched predictions disagree across views, or when
  their majority predicted ID differs from the one at the
  identity's previous matched timestamp. Ties keep the previous label when
  it is among them, else the label seen in the lowest-index view, so the
  count does not depend on how predicted IDs are numbered.
* CVIDF1 / IDF1 use one global one-to-one GT<->prediction ID mapping that
  maximizes the number of matched box pairs sharing the mapped IDs.
* IDSw counts, per GT track, changes of the matched prediction ID between
  consecutive matched frames. FM counts unmatched gaps between matched frames.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .assignment import GATED, hungarian, max_weight_matching
from .core import iou


@dataclass
class FrameCorrespondence:
    matches: list = field(default_factory=list)  # (gt_id, pred_id, iou)
    unmatched_gt: list = field(default_factory=list)
    unmatched_pred: list = field(default_factory=list)


def match_frame(gt, pred, iou_threshold: float = 0.5) -> FrameCorrespondence:
    """One-to-one matching of ``[(id, box)]`` lists for a single view and frame."""
    if not gt or not pred:
        return FrameCorrespondence([], [g for g, _ in gt], [p for p, _ in pred])
    overlap = np.array([[iou(gb, pb) for _, pb in pred] for _, gb in gt])
    cost = np.where(overlap >= iou_threshold, 1.0 - overlap, GATED)
    a = hungarian(cost)
    matches = [(gt[r][0], pred[c][0], float(overlap[r, c])) for r, c in a.matches]
    return FrameCorrespondence(
        matches,
        [gt[r][0] for r in a.unmatched_rows],
        [pred[c][0] for c in a.unmatched_cols],
    )


def _by_frame(rows):
    out = defaultdict(list)
    for frame, ident, box in rows:
        out[frame].append((ident, box))
    return out


def correspond(gt: dict, pred: dict, iou_threshold: float = 0.5) -> dict:
    """``(view, frame) -> FrameCorrespondence`` over every frame present in either input."""
    if set(gt) != set(pred):
        raise ValueError(f"view sets differ: gt {sorted(gt)} vs pred {sorted(pred)}")
    if not any(gt[v] for v in gt):
        raise ValueError("empty ground truth: metrics undefined")
    out = {}
    for v in sorted(gt):
        g = _by_frame(gt[v])
        p = _by_frame(pred[v])
        for frame in sorted(set(g) | set(p)):
            out[(v, frame)] = match_frame(g.get(frame, []), p.get(frame, []), iou_threshold)
    return out


def _check_nonempty(corrs):
    if sum(len(c.matches) + len(c.unmatched_gt) for c in corrs.values()) == 0:
        raise ValueError("empty ground truth: metrics undefined")


def cvma_counts(corrs: dict) -> dict:
    _check_nonempty(corrs)
    frames = defaultdict(list)
    for (view, frame), c in sorted(corrs.items()):
        frames[frame].append(c)
    misses = fps = mme = gt_total = 0
    prev = {}
    for frame in sorted(frames):
        carried = defaultdict(list)
        for c in frames[frame]:
            misses += len(c.unmatched_gt)
            fps += len(c.unmatched_pred)
            gt_total += len(c.matches) + len(c.unmatched_gt)
            for g, p, _ in c.matches:
                carried[g].append(p)
        for g in sorted(carried):
            preds = carried[g]
            counts = Counter(preds)
            top = max(counts.values())
            tied = [p for p in preds if counts[p] == top]  # view order
            majority = prev[g] if prev.get(g) in tied else tied[0]
            if len(counts) > 1 or (g in prev and prev[g] != majority):
                mme += 1
            prev[g] = majority
    return {"misses": misses, "fp": fps, "mme": mme, "gt": gt_total}


def cvma(corrs: dict) -> float:
    k = cvma_counts(corrs)
    return 1.0 - (k["misses"] + k["fp"] + 2 * k["mme"]) / k["gt"]


def _id_mapping_tp(corrs) -> int:
    pair_counts = Counter()
    for c in corrs.values():
        for g, p, _ in c.matches:
            pair_counts[(g, p)] += 1
    if not pair_counts:
        return 0
    gts = sorted({g for g, _ in pair_counts})
    preds = sorted({p for _, p in pair_counts})
    gi = {g: i for i, g in enumerate(gts)}
    pi = {p: i for i, p in enumerate(preds)}
    weight = np.zeros((len(gts), len(preds)))
    for (g, p), n in pair_counts.items():
        weight[gi[g], pi[p]] = n
    a = max_weight_matching(weight)
    return int(sum(weight[r, c] for r, c in a.matches))


def _box_totals(corrs):
    n_gt = sum(len(c.matches) + len(c.unmatched_gt) for c in corrs.values())
    n_pred = sum(len(c.matches) + len(c.unmatched_pred) for c in corrs.values())
    return n_gt, n_pred


def id_scores(corrs: dict) -> dict:
    """IDTP/IDFP/IDFN with precision, recall and F1 under the optimal ID mapping."""
    _check_nonempty(corrs)
    idtp = _id_mapping_tp(corrs)
    n_gt, n_pred = _box_totals(corrs)
    idfp = n_pred - idtp
    idfn = n_gt - idtp
    idp = idtp / n_pred if n_pred else 0.0
    idr = idtp / n_gt
    f1 = 2 * idp * idr / (idp + idr) if idp + idr > 0 else 0.0
    return {"idtp": idtp, "idfp": idfp, "idfn": idfn, "idp": idp, "idr": idr, "idf1": f1}


def cvidf1(corrs: dict):
    """``(cvidf1, cvidp, cvidr)`` with identities pooled across every view."""
    s = id_scores(corrs)
    return s["idf1"], s["idp"], s["idr"]


@dataclass
class ClearStats:
    gt: int = 0
    fn: int = 0
    fp: int = 0
    idsw: int = 0
    matches: int = 0
    iou_sum: float = 0.0
    fm: int = 0
    mt: int = 0
    ml: int = 0
    n_tracks: int = 0
    idtp: int = 0
    n_pred: int = 0

    @property
    def mota(self) -> float:
        if self.gt == 0:
            return float("nan")
        return 1.0 - (self.fn + self.fp + self.idsw) / self.gt

    @property
    def motp(self) -> float:
        return self.iou_sum / self.matches if self.matches else 0.0

    @property
    def idf1(self) -> float:
        if self.gt + self.n_pred == 0:
            return 0.0
        return 2 * self.idtp / (self.gt + self.n_pred)

    def __add__(self, other):
        return ClearStats(**{k: getattr(self, k) + getattr(other, k) for k in self.__dataclass_fields__})


def clear_view(corrs: dict) -> ClearStats:
    """CLEAR counts for one view; ``corrs`` maps frame -> FrameCorrespondence."""
    s = ClearStats()
    last_pred = {}
    history = defaultdict(list)  # gt id -> matched flags over its frames
    for frame in sorted(corrs):
        c = corrs[frame]
        s.gt += len(c.matches) + len(c.unmatched_gt)
        s.n_pred += len(c.matches) + len(c.unmatched_pred)
        s.fn += len(c.unmatched_gt)
        s.fp += len(c.unmatched_pred)
        for g, p, overlap in c.matches:
            s.matches += 1
            s.iou_sum += overlap
            if g in last_pred and last_pred[g] != p:
                s.idsw += 1
            last_pred[g] = p
            history[g].append(True)
        for g in c.unmatched_gt:
            history[g].append(False)
    for g, flags in history.items():
        s.n_tracks += 1
        ratio = sum(flags) / len(flags)
        if ratio >= 0.8:
            s.mt += 1
        elif ratio <= 0.2:
            s.ml += 1
        first = flags.index(True) if True in flags else len(flags)
        gap = False
        for f in flags[first:]:
            if not f:
                gap = True
            elif gap:
                s.fm += 1
                gap = False
    s.idtp = _id_mapping_tp(corrs) if corrs else 0
    return s


def clear_metrics(corrs: dict) -> dict:
    """Per-view ClearStats plus an ``"all"`` entry with counts summed over views."""
    _check_nonempty(corrs)
    per_view = defaultdict(dict)
    for (view, frame), c in corrs.items():
        per_view[view][frame] = c
    out = {v: clear_view(per_view[v]) for v in sorted(per_view)}
    total = ClearStats()
    for s in out.values():
        total = total + s
    out["all"] = total
    return out


@dataclass
class MetricsReport:
    mota: float
    motp: float
    idf1: float
    idsw: int
    fm: int
    mt: int
    ml: int
    cvma: float | None = None
    cvidf1: float | None = None
    cvidp: float | None = None
    cvidr: float | None = None
    per_view: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {}
        if self.cvma is not None:
            out.update(cvma=self.cvma, cvidf1=self.cvidf1, cvidp=self.cvidp, cvidr=self.cvidr)
        out.update(mota=self.mota, motp=self.motp, idf1=self.idf1,
                   idsw=self.idsw, fm=self.fm, mt=self.mt, ml=self.ml)
        return out

    def format_kv(self) -> str:
        lines = [f"{k}={_fmt(v)}" for k, v in self.as_dict().items()]
        for v, s in self.per_view.items():
            lines.append(f"view_{v}.mota={s.mota:.6f}")
            lines.append(f"view_{v}.idf1={s.idf1:.6f}")
            lines.append(f"view_{v}.idsw={s.idsw}")
        return "\n".join(lines) + "\n"

    def format_text(self) -> str:
        cols = ["view", "MOTA", "MOTP", "IDF1", "IDSw", "FM", "MT", "ML"]
        rows = []
        for v, s in list(self.per_view.items()) + [("all", None)]:
            if s is None:
                rows.append(["all", self.mota, self.motp, self.idf1, self.idsw, self.fm, self.mt, self.ml])
            else:
                rows.append([str(v), s.mota, s.motp, s.idf1, s.idsw, s.fm, s.mt, s.ml])
        rows = [[_fmt(x) for x in r] for r in rows]
        width = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(cols)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(cols, width))]
        lines += ["  ".join(x.rjust(w) for x, w in zip(r, width)) for r in rows]
        if self.cvma is not None:
            lines.append("")
            lines.append(f"CVMA    {self.cvma:.6f}")
            lines.append(f"CVIDF1  {self.cvidf1:.6f}  (CVIDP {self.cvidp:.6f}, CVIDR {self.cvidr:.6f})")
        return "\n".join(lines) + "\n"


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.6f}"


def evaluate(gt: dict, pred: dict, cross_view: bool = True, iou_threshold: float = 0.5) -> MetricsReport:
    """Full report; ``cross_view`` requires IDs in both inputs to be global IDs."""
    corrs = correspond(gt, pred, iou_threshold)
    clear = clear_metrics(corrs)
    total = clear.pop("all")
    report = MetricsReport(
        mota=total.mota, motp=total.motp, idf1=total.idf1, idsw=total.idsw,
        fm=total.fm, mt=total.mt, ml=total.ml, per_view=clear,
    )
    if cross_view:
        report.cvma = cvma(corrs)
        report.cvidf1, report.cvidp, report.cvidr = cvidf1(corrs)
    return report
