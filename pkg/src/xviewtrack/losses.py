"""Re-ID training losses with analytic gradients, plus a toy trainer.

Three pieces:

* ``cross_view_ce``: plain softmax cross-entropy over global-ID classes.
* ``conflict_free_ce``: softmax cross-entropy over local-ID classes where each
  sample only competes against classes from its own view.
* ``total_loss``: uncertainty-weighted sum of the detection loss and the two
  Re-ID losses with learnable log-variance weights.

Every loss returns ``(value, grads)`` so the pieces can be chained through
linear layers and checked with ``finite_diff_check``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


@dataclass
class LinearHead:
    W: np.ndarray  # (n_out, n_in)
    b: np.ndarray  # (n_out,)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.W.ndim != 2 or self.W.shape[0] < 1 or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"inconsistent head shapes W{self.W.shape} b{self.b.shape}")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise ValueError("head parameters must be finite")

    @classmethod
    def init(cls, n_out: int, n_in: int, rng, scale=None):
        scale = 1.0 / np.sqrt(n_in) if scale is None else scale
        return cls(rng.normal(0.0, scale, size=(n_out, n_in)), np.zeros(n_out))

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.W.T + self.b

    def backward(self, x, dout):
        """Gradients of a scalar w.r.t. ``W``, ``b`` and ``x`` given ``dout = dL/d(output)``."""
        return {"W": dout.T @ x, "b": dout.sum(axis=0), "x": dout @ self.W}

    def copy(self):
        return LinearHead(self.W.copy(), self.b.copy())


@dataclass
class Sample:
    x: np.ndarray
    gid: int
    lid: int
    view: int


def stack(samples):
    """Split a list of ``Sample`` into ``(x, gid, lid, view)`` arrays."""
    x = np.array([s.x for s in samples], dtype=float)
    gid = np.array([s.gid for s in samples], dtype=int)
    lid = np.array([s.lid for s in samples], dtype=int)
    view = np.array([s.view for s in samples], dtype=int)
    return x, gid, lid, view


@dataclass
class UncertaintyWeights:
    w1: float = -1.85
    w2: float = -1.05

    def __post_init__(self):
        if not (np.isfinite(self.w1) and np.isfinite(self.w2)):
            raise ValueError("uncertainty weights must be finite")


def _check_labels(labels, n_classes):
    labels = np.asarray(labels, dtype=int)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("need a non-empty 1-D label array")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"label out of range [0, {n_classes})")
    return labels


def _masked_ce(head, x, labels, mask):
    # mask[i, c] True where class c competes for sample i; true class always included
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = labels.size
    logits = head(x)
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(z - zmax), 0.0)
    denom = e.sum(axis=1, keepdims=True)
    p = e / denom
    rows = np.arange(n)
    loss = float(np.mean(np.log(denom[:, 0]) + zmax[:, 0] - logits[rows, labels]))
    dz = p.copy()
    dz[rows, labels] -= 1.0
    dz /= n
    grads = head.backward(x, dz)
    return loss, grads


def cross_view_ce(head: LinearHead, x, labels):
    """Mean softmax cross-entropy of ``head(x)`` against ``labels``.

    Returns ``(loss, {"W", "b", "x"})``.
    """
    labels = _check_labels(labels, head.n_classes)
    mask = np.ones((labels.size, head.n_classes), dtype=bool)
    return _masked_ce(head, x, labels, mask)


def class_view_mask(labels, lid_to_view):
    lid_to_view = np.asarray(lid_to_view)
    return lid_to_view[None, :] == lid_to_view[labels][:, None]


def conflict_free_ce(head: LinearHead, x, lids, lid_to_view):
    """Cross-entropy where a sample only competes with local IDs of its own view.

    ``lid_to_view[c]`` is the view owning class ``c``; every class needs one.
    Classes of other views are left out of the softmax entirely, so their
    weight rows receive exactly zero gradient from that sample.
    """
    lids = _check_labels(lids, head.n_classes)
    lid_to_view = np.asarray(lid_to_view)
    if lid_to_view.shape != (head.n_classes,):
        raise ValueError(f"lid_to_view must give a view for each of {head.n_classes} classes")
    if np.any(lid_to_view < 0):
        raise ValueError("local ID with unknown view")
    return _masked_ce(head, x, lids, class_view_mask(lids, lid_to_view))


def total_loss(l_det: float, l_single: float, l_cross: float, w: UncertaintyWeights):
    """``0.5 * (exp(-w1) l_det + exp(-w2) (l_single + l_cross) + w1 + w2)``.

    Returns ``(value, grads)`` with grads for ``w1``, ``w2`` and the scale factors
    applied to each component loss (``d_det``, ``d_reid``).
    """
    a = np.exp(-w.w1)
    c = np.exp(-w.w2)
    reid = l_single + l_cross
    value = 0.5 * (a * l_det + c * reid + w.w1 + w.w2)
    grads = {
        "w1": 0.5 * (1.0 - a * l_det),
        "w2": 0.5 * (1.0 - c * reid),
        "d_det": 0.5 * a,
        "d_reid": 0.5 * c,
    }
    return float(value), grads


def finite_diff_check(loss_fn, params: dict, epsilon: float = 1e-5) -> float:
    """Max over coordinates of ``|analytic - numeric| / max(1, |numeric|)``.

    ``loss_fn(params) -> (loss, grads)`` with ``grads`` keyed like ``params``.
    Numeric derivatives use central differences.
    """
    if not 0 < epsilon <= 1e-2:
        raise ValueError("epsilon must lie in (0, 1e-2]")
    params = {k: np.array(v, dtype=float) for k, v in params.items()}
    _, analytic = loss_fn(params)
    worst = 0.0
    for key, value in params.items():
        grad = np.asarray(analytic[key], dtype=float).reshape(value.shape)
        flat = value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = loss_fn(params)[0]
            flat[i] = orig - epsilon
            down = loss_fn(params)[0]
            flat[i] = orig
            numeric = (up - down) / (2 * epsilon)
            err = abs(grad.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst


# --- toy ablation trainer -------------------------------------------------

class Mode(enum.Enum):
    SHARED = "shared"
    DECOUPLED_PLAIN = "plain"
    DECOUPLED_CONFLICT_FREE = "conflict-free"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class ToyBatch:
    x: np.ndarray
    gid: np.ndarray
    lid: np.ndarray
    view: np.ndarray
    lid_to_view: np.ndarray
    n_gid: int
    n_lid: int


def make_toy_batch(n_ids=4, n_views=3, per_pair=4, dim=16, view_weight=0.5, sigma=0.5,
                   seed=0, noise_seed=None) -> ToyBatch:
    """Features drawn from the simulator's identity/view mixture.

    Local IDs are ``view * n_ids + gid`` so each (gid, view) owns one class.
    ``noise_seed`` varies the per-sample noise while keeping identity vectors fixed,
    which is how held-out pairs are drawn.
    """
    from .simulate import AppearanceModel

    model = AppearanceModel(n_ids, n_views, dim, np.random.default_rng(seed))
    rng = np.random.default_rng([seed, 7 if noise_seed is None else 1000 + noise_seed])
    xs, gids, lids, views = [], [], [], []
    for v in range(n_views):
        for g in range(n_ids):
            for _ in range(per_pair):
                xs.append(model.single(g, v, view_weight, sigma, rng))
                gids.append(g)
                lids.append(v * n_ids + g)
                views.append(v)
    lid_to_view = np.repeat(np.arange(n_views), n_ids)
    return ToyBatch(np.array(xs), np.array(gids), np.array(lids), np.array(views),
                    lid_to_view, n_ids, n_ids * n_views)


def init_model(mode: Mode, batch: ToyBatch, hidden=16, emb=8, seed=0) -> dict:
    """Trunk plus one (shared) or two (decoupled) embedding heads feeding the classifiers."""
    rng = np.random.default_rng(seed)
    d = batch.x.shape[1]
    heads = {"trunk": LinearHead.init(hidden, d, rng)}
    heads["cross_emb"] = LinearHead.init(emb, hidden, rng)
    if mode is not Mode.SHARED:
        heads["single_emb"] = LinearHead.init(emb, hidden, rng)
    heads["gid_cls"] = LinearHead.init(batch.n_gid, emb, rng)
    heads["lid_cls"] = LinearHead.init(batch.n_lid, emb, rng)
    return heads


def cross_embedding(mode: Mode, heads: dict, x) -> np.ndarray:
    """Features used for cross-view matching: the input to the global-ID classifier."""
    return heads["cross_emb"](heads["trunk"](x))


def _accumulate(total, key, g):
    if key in total:
        total[key]["W"] += g["W"]
        total[key]["b"] += g["b"]
    else:
        total[key] = {"W": g["W"].copy(), "b": g["b"].copy()}


def model_loss(mode: Mode, heads: dict, batch: ToyBatch, weights: UncertaintyWeights):
    """Combined loss and parameter gradients for one full-batch step."""
    z = heads["trunk"](batch.x)
    z_c = heads["cross_emb"](z)
    z_s = z_c if mode is Mode.SHARED else heads["single_emb"](z)

    l_cross, g_cross = cross_view_ce(heads["gid_cls"], z_c, batch.gid)
    if mode is Mode.DECOUPLED_CONFLICT_FREE:
        l_single, g_single = conflict_free_ce(heads["lid_cls"], z_s, batch.lid, batch.lid_to_view)
    else:
        l_single, g_single = cross_view_ce(heads["lid_cls"], z_s, batch.lid)

    value, tg = total_loss(0.0, l_single, l_cross, weights)
    s = tg["d_reid"]
    grads = {}
    _accumulate(grads, "gid_cls", {"W": s * g_cross["W"], "b": s * g_cross["b"]})
    _accumulate(grads, "lid_cls", {"W": s * g_single["W"], "b": s * g_single["b"]})
    dz_c = s * g_cross["x"]
    dz_s = s * g_single["x"]
    if mode is Mode.SHARED:
        gc = heads["cross_emb"].backward(z, dz_c + dz_s)
        _accumulate(grads, "cross_emb", gc)
        dz = gc["x"]
    else:
        gc = heads["cross_emb"].backward(z, dz_c)
        gs = heads["single_emb"].backward(z, dz_s)
        _accumulate(grads, "cross_emb", gc)
        _accumulate(grads, "single_emb", gs)
        dz = gc["x"] + gs["x"]
    _accumulate(grads, "trunk", heads["trunk"].backward(batch.x, dz))
    return value, {"l_single": l_single, "l_cross": l_cross, "w2": tg["w2"]}, grads


@dataclass
class TrainResult:
    mode: Mode
    heads: dict
    initial: dict
    trace: list = field(default_factory=list)
    weights: UncertaintyWeights = field(default_factory=UncertaintyWeights)


def toy_train(batch: ToyBatch, mode: Mode, epochs=200, lr=0.5, seed=0,
              weights: UncertaintyWeights | None = None, learn_weights=False) -> TrainResult:
    """Plain full-batch gradient descent on the combined Re-ID loss.

    ``trace[k]`` is the combined loss before update ``k``; the final entry is the
    loss after the last update. ``w1`` never moves (no detection loss here);
    ``w2`` moves only when ``learn_weights`` is set.
    """
    mode = Mode(mode)
    heads = init_model(mode, batch, seed=seed)
    initial = {k: h.copy() for k, h in heads.items()}
    weights = UncertaintyWeights() if weights is None else UncertaintyWeights(weights.w1, weights.w2)
    trace = []
    for epoch in range(epochs + 1):
        value, parts, grads = model_loss(mode, heads, batch, weights)
        if not np.isfinite(value):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch} ({mode.value})")
        trace.append(value)
        if epoch == epochs:
            break
        for key, g in grads.items():
            heads[key].W -= lr * g["W"]
            heads[key].b -= lr * g["b"]
        if learn_weights:
            weights.w2 -= lr * parts["w2"]
    return TrainResult(mode, heads, initial, trace, weights)


def matching_accuracy(mode: Mode, heads: dict, batch: ToyBatch) -> float:
    """Cross-view nearest-neighbour retrieval accuracy by cosine similarity.

    Every sample of view ``a`` queries all samples of each other view ``b``;
    a hit is a nearest neighbour with the same global ID.
    """
    mode = Mode(mode)
    emb = cross_embedding(mode, heads, batch.x)
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.where(norms == 0, 1.0, norms)
    hits = total = 0
    views = np.unique(batch.view)
    for a in views:
        qa = np.flatnonzero(batch.view == a)
        for b in views:
            if a == b:
                continue
            cb = np.flatnonzero(batch.view == b)
            sim = emb[qa] @ emb[cb].T
            best = cb[np.argmax(sim, axis=1)]
            hits += int(np.sum(batch.gid[best] == batch.gid[qa]))
            total += qa.size
    return hits / total


def ablation_accuracy(mode: Mode, seed: int, epochs=300, lr=0.5, n_ids=8, n_views=3,
                      sigma=0.3, view_weight=0.5) -> tuple:
    """Train on one noise draw, score on a fresh draw of the same identities.

    Returns ``(accuracy, TrainResult)``.
    """
    kw = dict(n_ids=n_ids, n_views=n_views, per_pair=4, dim=16,
              view_weight=view_weight, sigma=sigma, seed=seed)
    result = toy_train(make_toy_batch(**kw), mode, epochs=epochs, lr=lr, seed=seed)
    return matching_accuracy(mode, result.heads, make_toy_batch(**kw, noise_seed=1)), result
