"""Dataset handling: label normalization, vocabularies, one-hot encoding,
splits, graph pairs, and a content-addressed disk cache."""
from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import (
    CacheCorruptError,
    DegenerateSplitError,
    EmptyCorpusError,
    UnknownCircuitError,
    UnknownLabelError,
)
from .hwgraph import AST_LABELS, DFG, DFG_LABELS, GraphNode, HWGraph, graph_to_json


@dataclass
class NodeVocab:
    labels: list[str]
    index: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        if sorted(self.labels) != self.labels or len(set(self.labels)) != len(self.labels):
            raise ValueError("vocabulary must be sorted and duplicate-free")
        self.index = {lab: i for i, lab in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(_vocab_bytes(self.labels)).hexdigest()


@dataclass
class GraphTensors:
    X: np.ndarray  # |V| x d one-hot rows
    A: list[tuple[int, int]]
    graph_id: str
    label: object = None


@dataclass
class GraphPair:
    first: str
    second: str
    label: int  # +1 Similar, -1 Dissimilar

    def __post_init__(self) -> None:
        if self.first == self.second:
            raise ValueError("pair members must differ")
        if self.label not in (1, -1):
            raise ValueError(f"pair label must be +1 or -1, got {self.label}")


@dataclass
class DatasetSplit:
    train: list
    test: list
    seed: int
    ratio: float


def normalize(g: HWGraph) -> HWGraph:
    """Drop node names, keep structure, and verify every label belongs to
    the graph kind's fixed vocabulary."""
    allowed = DFG_LABELS if g.kind == DFG else AST_LABELS
    nodes = []
    for n in g.nodes:
        if n.label not in allowed:
            raise UnknownLabelError(f"label {n.label!r} not in the {g.kind} label set")
        nodes.append(GraphNode(n.id, n.label, None))
    return HWGraph(kind=g.kind, nodes=nodes, edges=list(g.edges), design_name=g.design_name)


def build_vocab(graphs: list[HWGraph]) -> NodeVocab:
    if not graphs:
        raise EmptyCorpusError("cannot build a vocabulary from zero graphs")
    labels: set[str] = set()
    for g in graphs:
        labels.update(n.label for n in g.nodes)
    return NodeVocab(sorted(labels))


def encode(g: HWGraph, vocab: NodeVocab, label=None) -> GraphTensors:
    X = np.zeros((len(g.nodes), len(vocab)))
    for n in g.nodes:
        col = vocab.index.get(n.label)
        if col is None:
            raise UnknownLabelError(f"label {n.label!r} missing from the vocabulary")
        X[n.id, col] = 1.0
    return GraphTensors(X=X, A=list(g.edges), graph_id=g.design_name, label=label)


def split(ids: list, ratio: float, seed: int) -> DatasetSplit:
    if not 0.0 < ratio < 1.0:
        raise DegenerateSplitError(f"ratio must be in (0, 1), got {ratio}")
    if len(ids) < 2:
        raise DegenerateSplitError("need at least 2 items to split")
    n_test = round(ratio * len(ids))
    if n_test == 0 or n_test == len(ids):
        raise DegenerateSplitError(
            f"ratio {ratio} over {len(ids)} items leaves one side empty"
        )
    perm = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    return DatasetSplit(train=shuffled[n_test:], test=shuffled[:n_test], seed=seed, ratio=ratio)


def leave_one_circuit_out(ids: list, circuit_of: dict, held_out) -> DatasetSplit:
    if held_out not in set(circuit_of.get(i) for i in ids):
        raise UnknownCircuitError(f"no item belongs to circuit {held_out!r}")
    test = [i for i in ids if circuit_of.get(i) == held_out]
    train = [i for i in ids if circuit_of.get(i) != held_out]
    return DatasetSplit(train=train, test=test, seed=0, ratio=len(test) / len(ids))


def make_pairs(ids: list, category_of: dict) -> list[GraphPair]:
    return [
        GraphPair(a, b, 1 if category_of[a] == category_of[b] else -1)
        for a, b in combinations(ids, 2)
    ]


# --- vocabulary persistence ---

def _vocab_bytes(labels: list[str]) -> bytes:
    return "".join(f"{lab}\n" for lab in labels).encode("utf-8")


def save_vocab(vocab: NodeVocab, path: Path) -> None:
    path.write_bytes(_vocab_bytes(vocab.labels))


def load_vocab(path: Path) -> NodeVocab:
    labels = path.read_text(encoding="utf-8").splitlines()
    return NodeVocab(labels)


# --- disk cache ---

_CACHE_MAGIC = b"HWGT\x01"


def cache_key(g: HWGraph, vocab: NodeVocab) -> str:
    """Content hash of (canonical graph JSON, vocabulary fingerprint)."""
    payload = graph_to_json(g).encode("utf-8") + vocab.fingerprint.encode("ascii")
    return hashlib.sha256(payload).hexdigest()


def _cache_path(root: Path, key: str) -> Path:
    return Path(root) / f"{key}.gt"


def cache_put(root: Path, key: str, tensors: GraphTensors) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    header = json.dumps(
        {
            "graph_id": tensors.graph_id,
            "label": tensors.label,
            "rows": int(tensors.X.shape[0]),
            "cols": int(tensors.X.shape[1]),
            "edges": len(tensors.A),
        },
        ensure_ascii=False,
    ).encode("utf-8")
    x_bytes = np.ascontiguousarray(tensors.X, dtype="<f8").tobytes()
    edge_arr = np.asarray(tensors.A, dtype="<i8").reshape(len(tensors.A), 2)
    payload = (
        _CACHE_MAGIC
        + struct.pack("<Q", len(header))
        + header
        + x_bytes
        + edge_arr.tobytes()
    )
    digest = hashlib.sha256(payload).digest()
    path = _cache_path(root, key)
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(payload + digest)
    os.replace(tmp, path)
    return path


def cache_get(root: Path, key: str) -> GraphTensors | None:
    """Stored tensors for key, or None on a miss.

    A present-but-unreadable entry (truncation, bit rot, checksum mismatch)
    raises CacheCorrupt instead of silently recomputing.
    """
    path = _cache_path(Path(root), key)
    if not path.exists():
        return None
    blob = path.read_bytes()
    if len(blob) < len(_CACHE_MAGIC) + 8 + 32 or not blob.startswith(_CACHE_MAGIC):
        raise CacheCorruptError(f"{path}: malformed cache entry")
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CacheCorruptError(f"{path}: checksum mismatch")
    offset = len(_CACHE_MAGIC)
    (header_len,) = struct.unpack_from("<Q", payload, offset)
    offset += 8
    header = json.loads(payload[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    rows, cols, n_edges = header["rows"], header["cols"], header["edges"]
    x_size = rows * cols * 8
    expected = offset + x_size + n_edges * 16
    if len(payload) != expected:
        raise CacheCorruptError(f"{path}: payload length mismatch")
    X = np.frombuffer(payload, dtype="<f8", count=rows * cols, offset=offset).reshape(rows, cols)
    offset += x_size
    edges = np.frombuffer(payload, dtype="<i8", count=n_edges * 2, offset=offset).reshape(
        n_edges, 2
    )
    return GraphTensors(
        X=X.copy(),
        A=[(int(s), int(d)) for s, d in edges],
        graph_id=header["graph_id"],
        label=header["label"],
    )


def encode_cached(g: HWGraph, vocab: NodeVocab, root: Path, label=None) -> GraphTensors:
    """encode() with get-after-put reuse keyed by graph content + vocab."""
    key = cache_key(g, vocab)
    hit = cache_get(root, key)
    if hit is not None:
        if label is not None:
            hit.label = label
        return hit
    tensors = encode(g, vocab, label=label)
    cache_put(root, key, tensors)
    return tensors
