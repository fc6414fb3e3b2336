"""Edge-aware graph convolutional network over embedded patch graphs.

Three residual message-passing layers add a transformed per-node aggregation
of edge features to the degree-normalized node term; the three layer outputs
are concatenated, pooled once with self-attention graph pooling, read out by
columnwise max+mean, and classified by a two-layer MLP.  Training uses
softmax cross-entropy with L2 regularization and Adamax updates.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tensor, concat_cols, cross_entropy
from .embedding import DegenerateSampleError, EmbeddedGraph

TASK_CLASSES = {"binary": 2, "cwe": 7, "severity": 4}


@dataclass
class TrainConfig:
    task: str = "binary"
    hidden: int = 64
    batch_size: int = 32
    epochs: int = 50
    lr: float = 1e-3
    weight_decay: float = 5e-4
    lr_gamma: float = 0.8
    dropout: float = 0.5
    pool_ratio: float = 0.5
    seed: int = 0
    repeats: int = 1
    # embedding stage
    embed_dim: int = 64
    embed_window: int = 5
    embed_negatives: int = 5
    embed_epochs: int = 5
    embed_lr: float = 0.025
    code_token_cap: int = 12
    type_token_cap: int = 4
    compact_parts: bool = False  # 12/4-dimensional part reading instead of token caps
    # ablation flags
    no_edge_features: bool = False
    no_type_embedding: bool = False
    graph_structure: str = "CPG"  # AST | DDG+CDG | CPG
    edge_agg: str = "mean"  # mean | sum

    def __post_init__(self):
        if self.task not in TASK_CLASSES:
            raise ValueError(f"unknown task {self.task!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        for name in ("lr", "lr_gamma", "pool_ratio"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.graph_structure not in ("AST", "DDG+CDG", "CPG"):
            raise ValueError(f"unknown graph_structure {self.graph_structure!r}")

    @property
    def n_classes(self) -> int:
        return TASK_CLASSES[self.task]

    @property
    def feature_dim(self) -> int:
        per_part = (self.type_token_cap, self.code_token_cap) if self.compact_parts \
            else (self.embed_dim, self.embed_dim)
        return per_part[0] + per_part[1]

    @property
    def part_dims(self) -> tuple[int, int] | None:
        if self.compact_parts:
            return (self.type_token_cap, self.code_token_cap)
        return None


def normalize_adjacency(adj: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization of the self-looped adjacency."""
    a_hat = adj + np.eye(adj.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def aggregate_edge_features(edge_index: np.ndarray, edge_features: np.ndarray,
                            n_nodes: int, mode: str = "mean") -> np.ndarray:
    """Aggregate incident-edge feature vectors to node granularity."""
    agg = np.zeros((n_nodes, edge_features.shape[1] if edge_features.size else 6))
    count = np.zeros(n_nodes)
    for (s, d), feat in zip(edge_index, edge_features):
        agg[s] += feat
        count[s] += 1
        if d != s:
            agg[d] += feat
            count[d] += 1
    if mode == "mean":
        nz = count > 0
        agg[nz] /= count[nz, None]
    elif mode != "sum":
        raise ValueError(f"unknown edge aggregation {mode!r}")
    return agg


class NEGCN:
    """Model parameters plus the forward pass."""

    def __init__(self, config: TrainConfig, rng: np.random.Generator | None = None):
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        h = config.hidden
        d = config.feature_dim
        c = config.n_classes

        def glorot(rows, cols):
            limit = math.sqrt(6.0 / (rows + cols))
            return Tensor(rng.uniform(-limit, limit, size=(rows, cols)))

        self.params: dict[str, Tensor] = {
            "proj": glorot(d, h),
            "wn1": glorot(d, h), "we1": glorot(6, h),
            "wn2": glorot(h, h), "we2": glorot(6, h),
            "wn3": glorot(h, h), "we3": glorot(6, h),
            "pool_w": glorot(3 * h, 1),
            "mlp_w1": glorot(6 * h, 3 * h),
            "mlp_b1": Tensor(np.zeros((1, 3 * h))),
            "mlp_w2": glorot(3 * h, c),
            "mlp_b2": Tensor(np.zeros((1, c))),
        }

    # -- forward -------------------------------------------------------

    def _layer(self, h: Tensor, an: Tensor, eagg: Tensor, wn: Tensor,
               we: Tensor, residual: Tensor) -> Tensor:
        z = an @ (h @ wn)
        if not self.config.no_edge_features:
            z = z + eagg @ we
        return (z + residual).relu()

    def _encode(self, graph: EmbeddedGraph) -> Tensor:
        if graph.n_nodes == 0:
            raise DegenerateSampleError("cannot run the model on an empty graph")
        cfg = self.config
        p = self.params
        an_np = normalize_adjacency(graph.adjacency())
        an = Tensor(an_np)
        if cfg.no_edge_features:
            eagg = Tensor(np.zeros((graph.n_nodes, 6)))
        else:
            eagg = Tensor(aggregate_edge_features(graph.edge_index,
                                                  graph.edge_features,
                                                  graph.n_nodes, cfg.edge_agg))
        x = Tensor(graph.x)
        h1 = self._layer(x, an, eagg, p["wn1"], p["we1"], x @ p["proj"])
        h2 = self._layer(h1, an, eagg, p["wn2"], p["we2"], h1)
        h3 = self._layer(h2, an, eagg, p["wn3"], p["we3"], h2)
        hcat = concat_cols([h1, h2, h3])
        pooled, _, _ = sag_pool(hcat, an_np, cfg.pool_ratio, p["pool_w"])
        return concat_cols([pooled.max0(), pooled.mean0()])

    def represent(self, graph: EmbeddedGraph) -> np.ndarray:
        """Graph-level representation: the 6h readout vector."""
        return self._encode(graph).data[0].copy()

    def forward(self, graph: EmbeddedGraph, mode: str = "eval",
                rng: np.random.Generator | None = None) -> Tensor:
        cfg = self.config
        p = self.params
        readout = self._encode(graph)
        hidden = (readout @ p["mlp_w1"] + p["mlp_b1"]).relu()
        if mode == "train" and cfg.dropout > 0.0:
            if rng is None:
                raise ValueError("train mode requires an rng for dropout")
            keep = (rng.random(hidden.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
            hidden = hidden * Tensor(keep)
        return hidden @ p["mlp_w2"] + p["mlp_b2"]

    # -- training ------------------------------------------------------

    def weight_params(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.params.items() if not k.startswith("mlp_b")}

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for k, v in state.items():
            self.params[k].data = np.asarray(v, dtype=np.float64)


def sag_pool(h: Tensor, an: np.ndarray, ratio: float,
             pool_w: Tensor) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Self-attention graph pooling: score nodes by a one-channel graph
    convolution, keep the top ceil(ratio*N) (ties by lower node index), and
    gate kept features by tanh(score).  Returns (features, induced adjacency
    of the un-normalized input, kept indices)."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError("pool ratio must lie in (0, 1]")
    n = h.shape[0]
    score = Tensor(an) @ h @ pool_w  # N x 1
    k = math.ceil(ratio * n)
    order = np.argsort(-score.data[:, 0], kind="stable")
    kept = np.sort(order[:k])
    gated = h.rows(kept) * score.rows(kept).tanh()
    a_kept = an[np.ix_(kept, kept)]
    return gated, a_kept, kept


def loss_and_grads(model: NEGCN, batch: list[tuple[EmbeddedGraph, int]],
                   mode: str = "train",
                   rng: np.random.Generator | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch plus (weight_decay/2)*sum ||W||^2;
    gradients for every parameter via reverse-mode differentiation."""
    if not batch:
        raise ValueError("empty batch")
    c = model.config.n_classes
    for _, label in batch:
        if not 0 <= label < c:
            raise ValueError(f"label {label} outside [0, {c})")
    model.zero_grads()
    total = None
    for graph, label in batch:
        logits = model.forward(graph, mode, rng)
        loss = cross_entropy(logits, label)
        total = loss if total is None else total + loss
    total = total * (1.0 / len(batch))
    if model.config.weight_decay > 0.0:
        reg = None
        for w in model.weight_params().values():
            sq = w.sum_squares()
            reg = sq if reg is None else reg + sq
        total = total + reg * (model.config.weight_decay / 2.0)
    total.backward()
    return float(total.data), {k: v.grad.copy() for k, v in model.params.items()}


class Adamax:
    """Standard Adamax update; gradients are expected to already include the
    L2 term."""

    def __init__(self, params: dict[str, Tensor], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.u = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, params: dict[str, Tensor], grads: dict[str, np.ndarray],
             lr_t: float) -> None:
        self.t += 1
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.u[k] = np.maximum(self.beta2 * self.u[k], np.abs(g))
            p.data = p.data - (lr_t / (1.0 - self.beta1 ** self.t)) * \
                self.m[k] / (self.u[k] + self.eps)


# ---------------------------------------------------------------------------
# Checkpoints: npz with a JSON hyperparameter header

CHECKPOINT_FORMAT = 1


def save_checkpoint(model: NEGCN, path, extra: dict | None = None) -> None:
    header = {"format": CHECKPOINT_FORMAT, "config": asdict(model.config)}
    if extra:
        header["extra"] = extra
    arrays = {f"param/{k}": v for k, v in model.state_dict().items()}
    np.savez(path, _header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
             **arrays)


def load_checkpoint(path) -> tuple[NEGCN, dict]:
    with np.load(path) as data:
        header = json.loads(bytes(data["_header"]).decode())
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {header.get('format')!r}")
        config = TrainConfig(**header["config"])
        model = NEGCN(config)
        model.load_state_dict({k[len("param/"):]: data[k]
                               for k in data.files if k.startswith("param/")})
    return model, header.get("extra", {})
