"""Graph embedding model: conv stack, attention top-k pooling, readout,
and the two task heads (2-class classifier, Siamese cosine)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nncore as nc
from .errors import EmptyPoolError, ShapeMismatchError, WrongHeadError

ACTIVATIONS = ("relu", "tanh", "identity")

DEFAULT_ARCH = {
    "in_dim": None,  # filled from the vocabulary
    "conv_dims": [64, 64],
    "activation": "relu",
    "pooling_ratio": 0.5,
    "readout": "sum",
    "head": "classifier",  # or "siamese"
    "mlp_hidden": [32],
    "directed_messages": False,
}


@dataclass
class GraphAdj:
    """Message-passing index arrays: node dst receives the mean of its
    neighborhood (undirected by default, deduplicated, self-loops once)."""

    n: int
    msg_src: np.ndarray
    msg_dst: np.ndarray
    inv_deg: np.ndarray  # n x 1, zero rows for isolated nodes


def build_adjacency(n: int, edges, directed: bool = False) -> GraphAdj:
    neigh: list[set[int]] = [set() for _ in range(n)]
    for s, d in edges:
        neigh[s].add(d)
        if not directed:
            neigh[d].add(s)
    src: list[int] = []
    dst: list[int] = []
    inv = np.zeros((n, 1))
    for v in range(n):
        others = sorted(neigh[v])
        for u in others:
            src.append(u)
            dst.append(v)
        if others:
            inv[v, 0] = 1.0 / len(others)
    return GraphAdj(n, np.asarray(src, dtype=np.intp), np.asarray(dst, dtype=np.intp), inv)


def neighbor_mean(X: nc.Tensor, adj: GraphAdj) -> nc.Tensor:
    if X.rows != adj.n:
        raise ShapeMismatchError(f"{X.rows} feature rows for {adj.n} nodes")
    gathered = nc.gather_rows(X, adj.msg_src)
    summed = nc.scatter_add_rows(gathered, adj.msg_dst, adj.n)
    return nc.row_scale(summed, nc.constant(adj.inv_deg))


class ConvLayer:
    """h'_v = act(W_self h_v + W_neigh mean_{u in N(v)} h_u + bias)."""

    def __init__(self, in_dim: int, out_dim: int, activation: str, rng, name: str):
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")
        bound = math.sqrt(6.0 / (in_dim + out_dim))
        self.W_self = nc.Parameter(rng.uniform(-bound, bound, (in_dim, out_dim)), f"{name}.W_self")
        self.W_neigh = nc.Parameter(rng.uniform(-bound, bound, (in_dim, out_dim)), f"{name}.W_neigh")
        self.bias = nc.Parameter(np.zeros((1, out_dim)), f"{name}.bias")
        self.activation = activation

    def params(self) -> list[nc.Parameter]:
        return [self.W_self, self.W_neigh, self.bias]

    def forward(self, X: nc.Tensor, adj: GraphAdj) -> nc.Tensor:
        agg = neighbor_mean(X, adj)
        pre = nc.add(nc.add(nc.matmul(X, self.W_self), nc.matmul(agg, self.W_neigh)), self.bias)
        if self.activation == "relu":
            return nc.relu(pre)
        if self.activation == "tanh":
            return nc.tanh_(pre)
        return pre


@dataclass
class PoolLayer:
    scorer: ConvLayer  # out_dim 1, identity activation: raw scores
    pooling_ratio: float = 0.5


class Mlp:
    def __init__(self, in_dim: int, hidden: list[int], out_dim: int, rng, name: str):
        dims = [in_dim] + list(hidden) + [out_dim]
        self.weights: list[nc.Parameter] = []
        self.biases: list[nc.Parameter] = []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            bound = math.sqrt(6.0 / (a + b))
            self.weights.append(nc.Parameter(rng.uniform(-bound, bound, (a, b)), f"{name}.W{i}"))
            self.biases.append(nc.Parameter(np.zeros((1, b)), f"{name}.b{i}"))

    def params(self) -> list[nc.Parameter]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def forward(self, x: nc.Tensor) -> nc.Tensor:
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            x = nc.add(nc.matmul(x, W), b)
            if i < len(self.weights) - 1:
                x = nc.relu(x)
        return x


@dataclass
class GnnModel:
    arch: dict
    conv_stack: list[ConvLayer]
    pool: PoolLayer
    readout_mode: str
    head: str
    mlp: Mlp | None
    vocab_fingerprint: str = ""
    directed_messages: bool = False

    def params(self) -> list[nc.Parameter]:
        out: list[nc.Parameter] = []
        for layer in self.conv_stack:
            out.extend(layer.params())
        out.extend(self.pool.scorer.params())
        if self.mlp is not None:
            out.extend(self.mlp.params())
        return out


def build_model(arch: dict, seed: int = 0, vocab_fingerprint: str = "") -> GnnModel:
    cfg = dict(DEFAULT_ARCH)
    unknown = set(arch) - set(cfg)
    if unknown:
        raise ValueError(f"unknown architecture keys {sorted(unknown)}")
    cfg.update(arch)
    if not cfg["in_dim"]:
        raise ValueError("arch requires in_dim (vocabulary size)")
    if cfg["readout"] not in ("sum", "mean"):
        raise ValueError(f"readout must be sum or mean, got {cfg['readout']!r}")
    if cfg["head"] not in ("classifier", "siamese"):
        raise ValueError(f"head must be classifier or siamese, got {cfg['head']!r}")
    if not 0.0 < cfg["pooling_ratio"] <= 1.0:
        raise ValueError("pooling_ratio must be in (0, 1]")
    rng = np.random.default_rng(seed)
    dims = [cfg["in_dim"]] + list(cfg["conv_dims"])
    conv_stack = [
        ConvLayer(a, b, cfg["activation"], rng, f"conv{i}")
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:]))
    ]
    scorer = ConvLayer(dims[-1], 1, "identity", rng, "pool.scorer")
    mlp = None
    if cfg["head"] == "classifier":
        mlp = Mlp(dims[-1], list(cfg["mlp_hidden"]), 2, rng, "mlp")
    return GnnModel(
        arch=cfg,
        conv_stack=conv_stack,
        pool=PoolLayer(scorer, cfg["pooling_ratio"]),
        readout_mode=cfg["readout"],
        head=cfg["head"],
        mlp=mlp,
        vocab_fingerprint=vocab_fingerprint,
        directed_messages=bool(cfg["directed_messages"]),
    )


# --- model stages ---

def graph_conv(X: nc.Tensor, A, layer: ConvLayer, directed: bool = False) -> nc.Tensor:
    return layer.forward(X, build_adjacency(X.rows, A, directed))


def score_nodes(X_prop: nc.Tensor, A, pool: PoolLayer, directed: bool = False) -> nc.Tensor:
    return pool.scorer.forward(X_prop, build_adjacency(X_prop.rows, A, directed))


def topk_filter(alpha, pr: float, n: int) -> list[int]:
    """Indices of the k = ceil(pr*n) highest scores (k >= 1), ties broken
    by lower node id; returned sorted ascending."""
    values = alpha.data if isinstance(alpha, nc.Tensor) else np.asarray(alpha, dtype=np.float64)
    values = values.reshape(-1)
    if values.size != n:
        raise ShapeMismatchError(f"{values.size} scores for {n} nodes")
    if n < 1:
        raise EmptyPoolError("cannot pool an empty graph")
    k = max(1, math.ceil(pr * n))
    order = sorted(range(n), key=lambda i: (-values[i], i))
    return sorted(order[:k])


def pool_graph(X_prop: nc.Tensor, A, alpha: nc.Tensor, P: list[int]):
    """Gate rows by tanh(score), keep rows P, induce the subgraph edges."""
    gated = nc.row_scale(X_prop, nc.tanh_(alpha))
    X_pool = nc.gather_rows(gated, np.asarray(P, dtype=np.intp))
    rank = {v: i for i, v in enumerate(P)}
    A_pool = [(rank[s], rank[d]) for s, d in A if s in rank and d in rank]
    return X_pool, A_pool


def readout(X_pool: nc.Tensor, mode: str) -> nc.Tensor:
    if X_pool.rows == 0:
        raise EmptyPoolError("readout over zero rows")
    if mode == "sum":
        return nc.sum_rows(X_pool)
    if mode == "mean":
        return nc.mean_rows(X_pool)
    raise ValueError(f"readout mode must be sum or mean, got {mode!r}")


def embed(model: GnnModel, tensors) -> nc.Tensor:
    """conv stack -> score -> top-k -> pool -> readout; one row out."""
    X = nc.constant(tensors.X)
    adj = build_adjacency(X.rows, tensors.A, model.directed_messages)
    for layer in model.conv_stack:
        X = layer.forward(X, adj)
    alpha = model.pool.scorer.forward(X, adj)
    P = topk_filter(alpha, model.pool.pooling_ratio, X.rows)
    X_pool, _ = pool_graph(X, tensors.A, alpha, P)
    return readout(X_pool, model.readout_mode)


def classify(model: GnnModel, h_g: nc.Tensor) -> nc.Tensor:
    """Class probabilities [Trojan, Non_Trojan]."""
    if model.head != "classifier" or model.mlp is None:
        raise WrongHeadError("model has no classifier head")
    return nc.softmax_rows(model.mlp.forward(h_g))


def pair_similarity(model: GnnModel, h_g1: nc.Tensor, h_g2: nc.Tensor) -> nc.Tensor:
    if model.head != "siamese":
        raise WrongHeadError("model has no Siamese head")
    return nc.cosine(h_g1, h_g2)
