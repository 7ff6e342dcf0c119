"""Naive reference for the metrics, used to cross-check the fast path.

Everything here is deliberately plain: IoU recomputed by hand, per-frame
matching by exhaustive search over partial matchings, ID mapping by trying
every injection. Only tiny scenes are accepted.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

MAX_IDS = 8
MAX_FRAMES = 20
MAX_VIEWS = 3
MAX_MAPPINGS = 2_000_000


def _iou(a, b):
    ax1, ay1 = a.left + a.width, a.top + a.height
    bx1, by1 = b.left + b.width, b.top + b.height
    w = min(ax1, bx1) - max(a.left, b.left)
    h = min(ay1, by1) - max(a.top, b.top)
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    return inter / (a.width * a.height + b.width * b.height - inter)


def _best_frame_matching(gt, pred, thr):
    # gt, pred: lists of (id, box). Returns list of (gi, pi, iou) index triples.
    feasible = [[(j, _iou(gb, pb)) for j, (_, pb) in enumerate(pred) if _iou(gb, pb) >= thr]
                for _, gb in gt]
    best = ((0, 0.0), [])

    def search(i, used, chosen, count, total):
        nonlocal best
        if i == len(gt):
            key = (count, total)
            if key > best[0]:
                best = (key, list(chosen))
            return
        search(i + 1, used, chosen, count, total)
        for j, v in feasible[i]:
            if j in used:
                continue
            used.add(j)
            chosen.append((i, j, v))
            search(i + 1, used, chosen, count + 1, total + v)
            chosen.pop()
            used.discard(j)

    search(0, set(), [], 0, 0.0)
    return best[1]


def _frames(rows):
    out = {}
    for frame, ident, box in rows:
        out.setdefault(frame, []).append((ident, box))
    return out


def _optimal_idtp(pairs):
    # pairs: list of (gt_id, pred_id) matched boxes; brute force over injections
    gts = sorted({g for g, _ in pairs})
    preds = sorted({p for _, p in pairs})
    if not gts:
        return 0
    count = {}
    for g, p in pairs:
        count[(g, p)] = count.get((g, p), 0) + 1
    small, large, flip = (gts, preds, False) if len(gts) <= len(preds) else (preds, gts, True)
    if math.perm(len(large), len(small)) > MAX_MAPPINGS:
        raise ValueError("too many ID mappings for brute force")
    best = 0
    for image in itertools.permutations(large, len(small)):
        total = 0
        for a, b in zip(small, image):
            total += count.get((b, a) if flip else (a, b), 0)
        best = max(best, total)
    return best


def brute_force_reference(gt: dict, pred: dict, iou_threshold: float = 0.5) -> dict:
    """Same fields as the fast path, from scratch. Raises on oversized scenes."""
    if set(gt) != set(pred):
        raise ValueError("view sets differ")
    views = sorted(gt)
    if len(views) > MAX_VIEWS:
        raise ValueError("too many views for brute force")
    gt_ids = {i for v in views for _, i, _ in gt[v]}
    frames = sorted({f for v in views for f, _, _ in list(gt[v]) + list(pred[v])})
    if len(gt_ids) > MAX_IDS or len(frames) > MAX_FRAMES:
        raise ValueError("scene too large for brute force")
    if not gt_ids:
        raise ValueError("empty ground truth")

    # per (view, frame) matching
    matched = {}  # (view, frame) -> list of (gt_id, pred_id, iou)
    missed = {}
    extra = {}
    for v in views:
        g_frames, p_frames = _frames(gt[v]), _frames(pred[v])
        for f in frames:
            g = g_frames.get(f, [])
            p = p_frames.get(f, [])
            m = _best_frame_matching(g, p, iou_threshold)
            matched[(v, f)] = [(g[i][0], p[j][0], s) for i, j, s in m]
            used_g = {i for i, _, _ in m}
            used_p = {j for _, j, _ in m}
            missed[(v, f)] = [g[i][0] for i in range(len(g)) if i not in used_g]
            extra[(v, f)] = [p[j][0] for j in range(len(p)) if j not in used_p]

    n_gt = sum(len(matched[k]) + len(missed[k]) for k in matched)
    n_pred = sum(len(matched[k]) + len(extra[k]) for k in matched)

    # cross-view accuracy
    m_sum = sum(len(x) for x in missed.values())
    fp_sum = sum(len(x) for x in extra.values())
    mme = 0
    previous = {}
    for f in frames:
        for g in sorted(gt_ids):
            carried = [p for v in views for gg, p, _ in matched[(v, f)] if gg == g]
            if not carried:
                continue
            tally = {}
            for p in carried:
                tally[p] = tally.get(p, 0) + 1
            top = max(tally.values())
            if g in previous and tally.get(previous[g]) == top:
                majority = previous[g]
            else:
                majority = next(p for p in carried if tally[p] == top)
            if len(tally) > 1 or (g in previous and previous[g] != majority):
                mme += 1
            previous[g] = majority
    cvma = 1.0 - (m_sum + fp_sum + 2 * mme) / n_gt

    pooled = [(g, p) for k in matched for g, p, _ in matched[k]]
    idtp = _optimal_idtp(pooled)
    idp = idtp / n_pred if n_pred else 0.0
    idr = idtp / n_gt
    cvidf1 = 2 * idp * idr / (idp + idr) if idp + idr > 0 else 0.0

    # single-view CLEAR, summed over views
    idsw = 0
    view_idtp = 0
    for v in views:
        last = {}
        for f in frames:
            for g, p, _ in matched[(v, f)]:
                if g in last and last[g] != p:
                    idsw += 1
                last[g] = p
        view_idtp += _optimal_idtp([(g, p) for f in frames for g, p, _ in matched[(v, f)]])
    mota = 1.0 - (m_sum + fp_sum + idsw) / n_gt
    idf1 = 2 * view_idtp / (n_gt + n_pred)

    return {"cvma": cvma, "cvidf1": cvidf1, "cvidp": idp, "cvidr": idr,
            "mota": mota, "idf1": idf1, "idsw": idsw}


def fast_path(gt: dict, pred: dict, iou_threshold: float = 0.5) -> dict:
    from .metrics import clear_metrics, correspond, cvidf1, cvma

    corrs = correspond(gt, pred, iou_threshold)
    total = clear_metrics(corrs)["all"]
    f1, p, r = cvidf1(corrs)
    return {"cvma": cvma(corrs), "cvidf1": f1, "cvidp": p, "cvidr": r,
            "mota": total.mota, "idf1": total.idf1, "idsw": total.idsw}


def random_tiny_scene(rng, max_ids=MAX_IDS, max_frames=MAX_FRAMES, max_views=MAX_VIEWS):
    """A small GT/prediction pair with misses, false positives, jitter and ID noise."""
    from .core import BBox

    n_ids = int(rng.integers(1, max_ids + 1))
    n_frames = int(rng.integers(1, max_frames + 1))
    n_views = int(rng.integers(1, max_views + 1))
    n_pred_ids = int(rng.integers(1, max_ids + 1))
    gt = {v: [] for v in range(n_views)}
    pred = {v: [] for v in range(n_views)}
    for v in range(n_views):
        pos = rng.uniform(0, 200, size=(n_ids, 2))
        label = rng.integers(0, n_pred_ids, size=n_ids)
        for f in range(1, n_frames + 1):
            pos += rng.normal(0, 8, size=pos.shape)
            for g in range(n_ids):
                if rng.random() < 0.15:
                    continue
                box = BBox(pos[g, 0], pos[g, 1], 40.0, 80.0)
                gt[v].append((f, g, box))
                if rng.random() < 0.15:
                    continue
                if rng.random() < 0.1:
                    label[g] = rng.integers(0, n_pred_ids)
                jx, jy = rng.normal(0, 6, size=2)
                pred[v].append((f, int(label[g]), BBox(pos[g, 0] + jx, pos[g, 1] + jy, 40.0, 80.0)))
            if rng.random() < 0.3:
                x, y = rng.uniform(0, 200, size=2)
                pred[v].append((f, int(rng.integers(0, n_pred_ids)), BBox(x, y, 40.0, 80.0)))
    # a prediction ID may appear at most once per (view, frame)
    for v in pred:
        seen = set()
        kept = []
        for f, p, box in pred[v]:
            if (f, p) in seen:
                continue
            seen.add((f, p))
            kept.append((f, p, box))
        pred[v] = kept
    if not any(gt[v] for v in gt):
        gt[0].append((1, 0, BBox(0.0, 0.0, 40.0, 80.0)))
    return gt, pred


def max_abs_diff(a: dict, b: dict) -> float:
    return max(abs(float(a[k]) - float(b[k])) for k in a)
