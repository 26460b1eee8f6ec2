"""Distance/hop prediction model over skeleton labels.

Vertex features are z-scored graph and bucket statistics.  Embeddings come
from one message-passing iteration per tier: iteration l aggregates each
vertex's tier-(l-1) label neighbors with symmetric degree normalization, so
nearby vertices enter first and distant tiers join without attenuating them.
Two small MLP heads read the concatenated pair embedding and jointly predict
shortest distance and hop count; the weighted sum of their squared errors is
trained end-to-end with hand-rolled reverse-mode gradients and Adam.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .graph import Graph, dijkstra
from .skeleton import SkeletonConfig, SkeletonLabels
from . import storage

MODEL_MAGIC = b"SGNN"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.01
    batch_size: int = 10_000
    epochs: int = 200
    embedding_dim: int = 32
    gamma: float = 0.5
    seed: int = 0
    train_fraction: float = 0.9
    pair_sample_budget: int = 200_000
    head_hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must be in [0, 1]")
        if not (0.0 < self.train_fraction <= 1.0):
            raise ValueError("train_fraction must be in (0, 1]")


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------


def feature_dim(cfg: SkeletonConfig) -> int:
    return 2 + 4 * cfg.base * (cfg.max_tier + 1)


def extract_features(g: Graph, labels: SkeletonLabels) -> np.ndarray:
    """Raw (unnormalized) feature matrix, one row per vertex.

    Columns: degree, clustering coefficient, then (count, min, max, mean)
    of the stored distances for each bucket in (tier, k) order.  Empty
    buckets contribute zeros.
    """
    cfg = labels.config
    n = g.vertex_count
    feats = np.zeros((n, feature_dim(cfg)))
    nbr = g.neighbor_sets
    for v in range(n):
        deg = g.degree(v)
        feats[v, 0] = deg
        if deg >= 2:
            tri = 0
            neigh = sorted(nbr[v])
            for i, a in enumerate(neigh):
                na = nbr[a]
                for b in neigh[i + 1:]:
                    if b in na:
                        tri += 1
            feats[v, 1] = 2.0 * tri / (deg * (deg - 1))
        col = 2
        for tier in range(cfg.max_tier + 1):
            for hop in cfg.tier_hops(tier):
                entries = labels.bucket(v, hop)
                if entries:
                    dists = [e.dist for e in entries]
                    feats[v, col] = len(entries)
                    feats[v, col + 1] = min(dists)
                    feats[v, col + 2] = max(dists)
                    feats[v, col + 3] = sum(dists) / len(dists)
                col += 4
    return feats


def normalize_features(raw: np.ndarray, mean: np.ndarray | None = None,
                       std: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z-score per column; constant columns become all zeros."""
    if mean is None:
        mean = raw.mean(axis=0)
        std = raw.std(axis=0)
    safe = np.where(std > 1e-12, std, 1.0)
    normed = (raw - mean) / safe
    normed[:, std <= 1e-12] = 0.0
    return normed, mean, std


def tier_adjacency(labels: SkeletonLabels, tier: int) -> sp.csr_matrix:
    """Sparse aggregation matrix A with A[i,j] = 1/sqrt(|N(i)|*|N(j)|).

    Rows with empty neighbor sets stay zero; a neighbor that itself has an
    empty set at this tier gets its factor clamped to 1 (it can still appear
    in other vertices' labels, e.g. degree-1 vertices above tier 0).
    """
    n = labels.vertex_count
    sets = [labels.tier_neighbors(v, tier) for v in range(n)]
    sizes = np.array([max(len(s), 1) for s in sets], dtype=np.float64)
    inv_sqrt = 1.0 / np.sqrt(sizes)
    rows, cols, vals = [], [], []
    for i, s in enumerate(sets):
        for j in sorted(s):
            rows.append(i)
            cols.append(j)
            vals.append(inv_sqrt[i] * inv_sqrt[j])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def tier_adjacencies(labels: SkeletonLabels) -> list[sp.csr_matrix]:
    return [tier_adjacency(labels, t) for t in range(labels.config.max_tier + 1)]


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class SgnnModel:
    """All learnable tensors plus the statistics needed to reuse them."""

    def __init__(self, base: int, max_tier: int, feat_dim: int, embedding_dim: int,
                 head_hidden: tuple[int, ...], gamma: float):
        self.base = base
        self.max_tier = max_tier
        self.feat_dim = feat_dim
        self.embedding_dim = embedding_dim
        self.head_hidden = tuple(head_hidden)
        self.gamma = gamma
        self.layers = max_tier + 1

        self.mp_w_self: list[np.ndarray] = []
        self.mp_w_msg: list[np.ndarray] = []
        self.mp_bias: list[np.ndarray] = []
        self.head_d: list[tuple[np.ndarray, np.ndarray]] = []
        self.head_h: list[tuple[np.ndarray, np.ndarray]] = []

        self.feat_mean = np.zeros(feat_dim)
        self.feat_std = np.ones(feat_dim)
        self.y_scale_d = 1.0
        self.y_scale_h = 1.0
        self.e_d = math.inf
        self.e_h = math.inf

    @classmethod
    def initialize(cls, cfg: SkeletonConfig, train_cfg: TrainingConfig,
                   rng: np.random.Generator) -> "SgnnModel":
        model = cls(cfg.base, cfg.max_tier, feature_dim(cfg), train_cfg.embedding_dim,
                    train_cfg.head_hidden, train_cfg.gamma)
        dims = [model.feat_dim] + [model.embedding_dim] * model.layers
        for l in range(model.layers):
            model.mp_w_self.append(_glorot(rng, dims[l], dims[l + 1]))
            model.mp_w_msg.append(_glorot(rng, dims[l], dims[l + 1]))
            model.mp_bias.append(np.zeros(dims[l + 1]))
        head_dims = [2 * model.embedding_dim, *model.head_hidden, 1]
        for head in (model.head_d, model.head_h):
            for a, b in zip(head_dims[:-1], head_dims[1:]):
                head.append((_glorot(rng, a, b), np.zeros(b)))
        return model

    # -- parameter plumbing -------------------------------------------------

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for l in range(self.layers):
            out.append((f"mp{l}.w_self", self.mp_w_self[l]))
            out.append((f"mp{l}.w_msg", self.mp_w_msg[l]))
            out.append((f"mp{l}.bias", self.mp_bias[l]))
        for tag, head in (("d", self.head_d), ("h", self.head_h)):
            for j, (w, b) in enumerate(head):
                out.append((f"head_{tag}.{j}.w", w))
                out.append((f"head_{tag}.{j}.b", b))
        return out

    def param_count(self) -> int:
        return sum(p.size for _, p in self.named_params())

    def copy(self) -> "SgnnModel":
        other = SgnnModel(self.base, self.max_tier, self.feat_dim, self.embedding_dim,
                          self.head_hidden, self.gamma)
        other.mp_w_self = [w.copy() for w in self.mp_w_self]
        other.mp_w_msg = [w.copy() for w in self.mp_w_msg]
        other.mp_bias = [b.copy() for b in self.mp_bias]
        other.head_d = [(w.copy(), b.copy()) for w, b in self.head_d]
        other.head_h = [(w.copy(), b.copy()) for w, b in self.head_h]
        other.feat_mean = self.feat_mean.copy()
        other.feat_std = self.feat_std.copy()
        other.y_scale_d = self.y_scale_d
        other.y_scale_h = self.y_scale_h
        other.e_d = self.e_d
        other.e_h = self.e_h
        return other

    # -- forward ------------------------------------------------------------

    def _mp_forward(self, feats_norm: np.ndarray, adjs: Sequence[sp.csr_matrix]):
        hs = [feats_norm]
        aggs = []
        pres = []
        h = feats_norm
        for l in range(self.layers):
            agg = adjs[l] @ h
            pre = h @ self.mp_w_self[l] + agg @ self.mp_w_msg[l] + self.mp_bias[l]
            h = np.maximum(pre, 0.0)
            hs.append(h)
            aggs.append(agg)
            pres.append(pre)
        return hs, aggs, pres

    def embeddings(self, feats_norm: np.ndarray, adjs: Sequence[sp.csr_matrix]) -> np.ndarray:
        hs, _, _ = self._mp_forward(feats_norm, adjs)
        return hs[-1]

    @staticmethod
    def _head_forward(head, x):
        acts = [x]
        pres = []
        a = x
        last = len(head) - 1
        for j, (w, b) in enumerate(head):
            pre = a @ w + b
            a = pre if j == last else np.maximum(pre, 0.0)
            pres.append(pre)
            acts.append(a)
        return acts, pres

    def head_outputs(self, z: np.ndarray, s, t) -> tuple[np.ndarray, np.ndarray]:
        """Raw (normalized-space) head outputs for pair arrays."""
        x = np.hstack([z[s], z[t]])
        out_d = self._head_forward(self.head_d, x)[0][-1][:, 0]
        out_h = self._head_forward(self.head_h, x)[0][-1][:, 0]
        return out_d, out_h

    def predict_pairs(self, z: np.ndarray, s, t) -> tuple[np.ndarray, np.ndarray]:
        """Denormalized predictions, clamped to be non-negative."""
        out_d, out_h = self.head_outputs(z, s, t)
        return (np.maximum(out_d * self.y_scale_d, 0.0),
                np.maximum(out_h * self.y_scale_h, 0.0))

    def predict_pair(self, z: np.ndarray, s: int, t: int) -> tuple[float, float]:
        d, h = self.predict_pairs(z, np.array([s]), np.array([t]))
        return float(d[0]), float(h[0])

    # -- loss and gradients ---------------------------------------------------

    @staticmethod
    def _head_backward(head, acts, pres, dout):
        grads = []
        da = dout
        for j in range(len(head) - 1, -1, -1):
            w, _ = head[j]
            if j != len(head) - 1:
                da = da * (pres[j] > 0)
            grads.append((acts[j].T @ da, da.sum(axis=0)))
            da = da @ w.T
        grads.reverse()
        return grads, da

    def loss_and_grads(self, feats_norm: np.ndarray, adjs: Sequence[sp.csr_matrix],
                       s: np.ndarray, t: np.ndarray,
                       yd_norm: np.ndarray, yh_norm: np.ndarray):
        """Joint loss and exact gradients for one batch.

        Returns (loss, loss_d, loss_h, grads) where grads maps parameter
        names (as in named_params) to arrays of matching shape.
        """
        if len(s) == 0:
            raise ValueError("empty batch")
        hs, aggs, pres = self._mp_forward(feats_norm, adjs)
        z = hs[-1]
        x = np.hstack([z[s], z[t]])
        acts_d, pres_d = self._head_forward(self.head_d, x)
        acts_h, pres_h = self._head_forward(self.head_h, x)
        out_d = acts_d[-1][:, 0]
        out_h = acts_h[-1][:, 0]
        batch = len(s)
        err_d = out_d - yd_norm
        err_h = out_h - yh_norm
        loss_d = float(err_d @ err_d) / batch
        loss_h = float(err_h @ err_h) / batch
        loss = self.gamma * loss_d + (1.0 - self.gamma) * loss_h

        dout_d = (2.0 * self.gamma / batch) * err_d[:, None]
        dout_h = (2.0 * (1.0 - self.gamma) / batch) * err_h[:, None]
        grads_d, dx_d = self._head_backward(self.head_d, acts_d, pres_d, dout_d)
        grads_h, dx_h = self._head_backward(self.head_h, acts_h, pres_h, dout_h)
        dx = dx_d + dx_h

        d = self.embedding_dim
        dz = np.zeros_like(z)
        np.add.at(dz, s, dx[:, :d])
        np.add.at(dz, t, dx[:, d:])

        grads: dict[str, np.ndarray] = {}
        dh = dz
        for l in range(self.layers - 1, -1, -1):
            dpre = dh * (pres[l] > 0)
            grads[f"mp{l}.w_self"] = hs[l].T @ dpre
            grads[f"mp{l}.w_msg"] = aggs[l].T @ dpre
            grads[f"mp{l}.bias"] = dpre.sum(axis=0)
            dh = dpre @ self.mp_w_self[l].T + adjs[l].T @ (dpre @ self.mp_w_msg[l].T)
        for tag, head_grads in (("d", grads_d), ("h", grads_h)):
            for j, (gw, gb) in enumerate(head_grads):
                grads[f"head_{tag}.{j}.w"] = gw
                grads[f"head_{tag}.{j}.b"] = gb
        return loss, loss_d, loss_h, grads


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


class Adam:
    def __init__(self, params: list[tuple[str, np.ndarray]], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p) for name, p in params}
        self.v = {name: np.zeros_like(p) for name, p in params}

    def step(self, params: list[tuple[str, np.ndarray]], grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for name, p in params:
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainReport:
    epochs: int
    pair_count: int
    train_count: int
    test_count: int
    loss_total: list[float] = field(default_factory=list)
    loss_distance: list[float] = field(default_factory=list)
    loss_hop: list[float] = field(default_factory=list)
    mape_d: float = math.nan
    mape_h: float = math.nan
    rmse_d: float = math.nan
    rmse_h: float = math.nan
    e_d: float = math.inf
    e_h: float = math.inf
    train_seconds: float = 0.0


def _components(g: Graph) -> np.ndarray:
    comp = np.full(g.vertex_count, -1, dtype=np.int64)
    cid = 0
    for start in range(g.vertex_count):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = cid
        while stack:
            v = stack.pop()
            for u, _ in g.adjacency[v]:
                if comp[u] < 0:
                    comp[u] = cid
                    stack.append(u)
        cid += 1
    return comp


def sample_pairs(g: Graph, budget: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Connected (s, t) pairs with s < t: all of them if they fit the budget,
    otherwise a uniform sample without replacement."""
    comp = _components(g)
    sizes = np.bincount(comp)
    total = int((sizes.astype(np.int64) * (sizes - 1) // 2).sum())
    if total == 0:
        raise ValueError("graph has no connected vertex pairs to train on")
    if total <= budget:
        ss, ts = [], []
        for cid in range(len(sizes)):
            members = np.flatnonzero(comp == cid)
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    ss.append(members[i])
                    ts.append(members[j])
        return np.array(ss, dtype=np.int64), np.array(ts, dtype=np.int64)
    chosen: set[tuple[int, int]] = set()
    n = g.vertex_count
    while len(chosen) < budget:
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        if a == b or comp[a] != comp[b]:
            continue
        chosen.add((a, b) if a < b else (b, a))
    pairs = sorted(chosen)
    arr = np.array(pairs, dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def pair_ground_truth(g: Graph, s: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact distance and hop targets via one oracle run per distinct source."""
    yd = np.empty(len(s))
    yh = np.empty(len(s))
    order = np.argsort(s, kind="stable")
    i = 0
    while i < len(order):
        j = i
        src = s[order[i]]
        res = dijkstra(g, int(src))
        while j < len(order) and s[order[j]] == src:
            idx = order[j]
            yd[idx] = res.dist[t[idx]]
            yh[idx] = res.hop[t[idx]]
            j += 1
        i = j
    return yd, yh


def train(g: Graph, labels: SkeletonLabels, cfg: TrainingConfig,
          log_path: str | None = None) -> tuple[SgnnModel, TrainReport, tuple[float, float]]:
    """Full training run; deterministic given cfg.seed.

    Returns the trained model, the per-epoch report, and the (e_d, e_h)
    error buffers (maximum absolute test-set errors in original units).
    """
    started = time.perf_counter()
    rng_init = np.random.default_rng([cfg.seed, 0])
    rng_pairs = np.random.default_rng([cfg.seed, 1])
    rng_epochs = np.random.default_rng([cfg.seed, 2])

    raw = extract_features(g, labels)
    feats, mean, std = normalize_features(raw)
    adjs = tier_adjacencies(labels)

    s, t = sample_pairs(g, cfg.pair_sample_budget, rng_pairs)
    yd, yh = pair_ground_truth(g, s, t)
    finite = np.isfinite(yd)
    s, t, yd, yh = s[finite], t[finite], yd[finite], yh[finite]

    perm = rng_pairs.permutation(len(s))
    n_train = max(1, int(round(cfg.train_fraction * len(s))))
    train_idx = perm[:n_train]
    test_idx = perm[n_train:]

    model = SgnnModel.initialize(labels.config, cfg, rng_init)
    model.feat_mean = mean
    model.feat_std = std
    model.y_scale_d = max(float(yd[train_idx].max()), 1e-12)
    model.y_scale_h = max(float(yh[train_idx].max()), 1e-12)
    yd_norm = yd / model.y_scale_d
    yh_norm = yh / model.y_scale_h

    report = TrainReport(epochs=cfg.epochs, pair_count=len(s),
                         train_count=len(train_idx), test_count=len(test_idx))
    optimizer = Adam(model.named_params(), cfg.learning_rate)
    log_rows = []
    for epoch in range(cfg.epochs):
        order = rng_epochs.permutation(train_idx)
        flip = rng_epochs.random(len(order)) < 0.5
        es = np.where(flip, t[order], s[order])
        et = np.where(flip, s[order], t[order])
        eyd = yd_norm[order]
        eyh = yh_norm[order]
        total = total_d = total_h = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            hi = min(lo + cfg.batch_size, len(order))
            loss, loss_d, loss_h, grads = model.loss_and_grads(
                feats, adjs, es[lo:hi], et[lo:hi], eyd[lo:hi], eyh[lo:hi])
            optimizer.step(model.named_params(), grads)
            span = hi - lo
            total += loss * span
            total_d += loss_d * span
            total_h += loss_h * span
        count = len(order)
        report.loss_total.append(total / count)
        report.loss_distance.append(total_d / count)
        report.loss_hop.append(total_h / count)
        log_rows.append((epoch, total / count, total_d / count, total_h / count))

    # Test metrics and error buffers in original units, via the same
    # prediction path used at inference (clamped, denormalized).
    eval_idx = test_idx if len(test_idx) else train_idx
    z = model.embeddings(feats, adjs)
    pred_d, pred_h = model.predict_pairs(z, s[eval_idx], t[eval_idx])
    true_d, true_h = yd[eval_idx], yh[eval_idx]
    abs_d = np.abs(pred_d - true_d)
    abs_h = np.abs(pred_h - true_h)
    report.mape_d = float(np.mean(abs_d / true_d))
    report.mape_h = float(np.mean(abs_h / np.maximum(true_h, 1e-12)))
    report.rmse_d = float(np.sqrt(np.mean(abs_d**2)))
    report.rmse_h = float(np.sqrt(np.mean(abs_h**2)))
    model.e_d = float(abs_d.max())
    model.e_h = float(abs_h.max())
    report.e_d = model.e_d
    report.e_h = model.e_h
    report.train_seconds = time.perf_counter() - started

    if log_path is not None:
        with open(log_path, "w", encoding="utf8") as fh:
            fh.write("epoch,loss_total,loss_distance,loss_hop\n")
            for row in log_rows:
                fh.write(f"{row[0]},{row[1]!r},{row[2]!r},{row[3]!r}\n")
    return model, report, (model.e_d, model.e_h)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def write_model(fh, model: SgnnModel) -> None:
    """Emit the model onto an open binary stream (embeddable in bundles)."""
    storage.write_header(fh, MODEL_MAGIC, MODEL_VERSION)
    storage.write_u32(fh, model.base)
    storage.write_u32(fh, model.max_tier)
    storage.write_u32(fh, model.feat_dim)
    storage.write_u32(fh, model.embedding_dim)
    storage.write_u32(fh, len(model.head_hidden))
    for h in model.head_hidden:
        storage.write_u32(fh, h)
    storage.write_f64(fh, model.gamma)
    storage.write_f64(fh, model.e_d)
    storage.write_f64(fh, model.e_h)
    storage.write_f64(fh, model.y_scale_d)
    storage.write_f64(fh, model.y_scale_h)
    storage.write_array(fh, model.feat_mean)
    storage.write_array(fh, model.feat_std)
    for _, p in model.named_params():
        storage.write_array(fh, np.asarray(p, dtype=np.float64))


def read_model(fh) -> SgnnModel:
    storage.check_header(fh, MODEL_MAGIC, MODEL_VERSION)
    base = storage.read_u32(fh)
    max_tier = storage.read_u32(fh)
    feat_dim = storage.read_u32(fh)
    embedding_dim = storage.read_u32(fh)
    hidden_count = storage.read_u32(fh)
    head_hidden = tuple(storage.read_u32(fh) for _ in range(hidden_count))
    gamma = storage.read_f64(fh)
    model = SgnnModel(base, max_tier, feat_dim, embedding_dim, head_hidden, gamma)
    model.e_d = storage.read_f64(fh)
    model.e_h = storage.read_f64(fh)
    model.y_scale_d = storage.read_f64(fh)
    model.y_scale_h = storage.read_f64(fh)
    model.feat_mean = storage.read_array(fh)
    model.feat_std = storage.read_array(fh)
    if model.feat_mean.shape != (feat_dim,):
        raise storage.FormatError("feature statistics shape mismatch")
    dims = [feat_dim] + [embedding_dim] * model.layers
    for l in range(model.layers):
        w_self = storage.read_array(fh)
        w_msg = storage.read_array(fh)
        bias = storage.read_array(fh)
        if w_self.shape != (dims[l], dims[l + 1]) or w_msg.shape != (dims[l], dims[l + 1]):
            raise storage.FormatError(f"layer {l} weight shape mismatch")
        model.mp_w_self.append(w_self)
        model.mp_w_msg.append(w_msg)
        model.mp_bias.append(bias)
    head_dims = [2 * embedding_dim, *head_hidden, 1]
    for head in (model.head_d, model.head_h):
        for a, b in zip(head_dims[:-1], head_dims[1:]):
            w = storage.read_array(fh)
            bias = storage.read_array(fh)
            if w.shape != (a, b):
                raise storage.FormatError("head weight shape mismatch")
            head.append((w, bias))
    return model


def save_model(path: str, model: SgnnModel) -> None:
    with open(path, "wb") as fh:
        write_model(fh, model)


def load_model(path: str) -> SgnnModel:
    with open(path, "rb") as fh:
        model = read_model(fh)
        if fh.read(1):
            raise storage.FormatError("trailing bytes after model tensors")
    return model
