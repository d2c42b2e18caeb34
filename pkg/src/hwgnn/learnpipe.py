"""Losses, trainers, decision rules, metrics, checkpoints, and exports."""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nncore as nc
from .errors import (
    BadLabelError,
    CorruptFileError,
    DivergenceError,
    NonFiniteError,
    ShapeMismatchError,
    VersionMismatchError,
    VocabMismatchError,
)
from .graph2vec import GnnModel, build_model, classify, embed, pair_similarity
from .graphdata import GraphPair, GraphTensors

TROJAN = "Trojan"
NON_TROJAN = "Non_Trojan"
PIRACY = "Piracy"
NON_PIRACY = "Non_Piracy"

_LOG_EPS = 1e-12


@dataclass
class TrainConfig:
    epochs: int = 120
    batch_size: int = 8
    lr: float = 1e-2
    optimizer: str = "adam"  # or "sgd"
    pooling_ratio: float = 0.5
    margin: float = 0.5
    delta: float = 0.5
    seed: int = 0
    mini_test_interval: int = 10
    readout: str = "sum"
    conv_dims: list[int] = field(default_factory=lambda: [64, 64])
    activation: str = "relu"
    mlp_hidden: list[int] = field(default_factory=lambda: [32])
    directed_messages: bool = False

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size <= 0 or self.lr <= 0:
            raise ValueError("batch_size and lr must be positive")
        if not 0.0 <= self.margin < 1.0:
            raise ValueError(f"margin must be in [0, 1), got {self.margin}")
        if not -1.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (-1, 1), got {self.delta}")
        if self.mini_test_interval <= 0:
            raise ValueError("mini_test_interval must be positive")

    def arch(self, in_dim: int, head: str) -> dict:
        return {
            "in_dim": in_dim,
            "conv_dims": list(self.conv_dims),
            "activation": self.activation,
            "pooling_ratio": self.pooling_ratio,
            "readout": self.readout,
            "head": head,
            "mlp_hidden": list(self.mlp_hidden),
            "directed_messages": self.directed_messages,
        }


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    degenerate: bool = False
    per_item: list = field(default_factory=list)


@dataclass
class Checkpoint:
    model: GnnModel
    best_metric: float
    best_step: int = 0
    history: list = field(default_factory=list)


# --- losses ---

def cross_entropy(y_hat: nc.Tensor, Y: np.ndarray) -> nc.Tensor:
    """Summed negative log-likelihood over the batch rows."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != y_hat.shape:
        raise ShapeMismatchError(f"targets {Y.shape} vs predictions {y_hat.shape}")
    shifted = nc.add(y_hat, nc.constant(np.full(y_hat.shape, _LOG_EPS)))
    picked = nc.hadamard(nc.constant(Y), nc.log_(shifted))
    return nc.scale(nc.sum_all(picked), -1.0)


def contrastive_loss(y_hat: nc.Tensor, y: int, margin: float = 0.5) -> nc.Tensor:
    """+1 pairs pay 1 - similarity; -1 pairs pay only above the margin."""
    if y not in (1, -1):
        raise BadLabelError(f"pair label must be +1 or -1, got {y!r}")
    if y == 1:
        return nc.add(nc.constant([[1.0]]), nc.scale(y_hat, -1.0))
    return nc.relu(nc.add(y_hat, nc.constant([[-margin]])))


# --- decision rules ---

def _check_dims(model: GnnModel, tensors: GraphTensors) -> None:
    want = model.arch["in_dim"]
    if tensors.X.shape[1] != want:
        raise VocabMismatchError(
            f"graph {tensors.graph_id!r} encoded with {tensors.X.shape[1]} labels, "
            f"model expects {want}; re-encode with the model's vocabulary"
        )


def predict_ht(model: GnnModel, tensors: GraphTensors) -> str:
    _check_dims(model, tensors)
    y = classify(model, embed(model, tensors)).data[0]
    return TROJAN if y[0] > y[1] else NON_TROJAN


def pair_similarity_value(model: GnnModel, t1: GraphTensors, t2: GraphTensors) -> float:
    _check_dims(model, t1)
    _check_dims(model, t2)
    return pair_similarity(model, embed(model, t1), embed(model, t2)).item()


def predict_piracy(
    model: GnnModel, t1: GraphTensors, t2: GraphTensors, delta: float = 0.5
) -> str:
    y = pair_similarity_value(model, t1, t2)
    return PIRACY if y > delta else NON_PIRACY


# --- metrics ---

def compute_metrics(tp: int, fp: int, fn: int, tn: int, per_item=None) -> EvalReport:
    degenerate = False

    def ratio(num: float, den: float) -> float:
        nonlocal degenerate
        if den == 0:
            degenerate = True
            return 0.0
        return num / den

    precision = ratio(tp, tp + fp)
    recall = ratio(tp, tp + fn)
    f1 = ratio(2.0 * precision * recall, precision + recall)
    accuracy = ratio(tp + tn, tp + fp + fn + tn)
    return EvalReport(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=accuracy,
        degenerate=degenerate,
        per_item=list(per_item) if per_item else [],
    )


def report_to_json(report: EvalReport) -> str:
    doc = {
        "counts": {"tp": report.tp, "fp": report.fp, "fn": report.fn, "tn": report.tn},
        "metrics": {
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
            "accuracy": report.accuracy,
            "degenerate": report.degenerate,
        },
        "per_item": report.per_item,
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# --- evaluation ---

def _onehot(label) -> np.ndarray:
    if label == TROJAN or label == 1:
        return np.array([[1.0, 0.0]])
    if label == NON_TROJAN or label == 0:
        return np.array([[0.0, 1.0]])
    raise BadLabelError(f"classifier label must be {TROJAN!r} or {NON_TROJAN!r}, got {label!r}")


def _is_trojan(label) -> bool:
    return _onehot(label)[0, 0] == 1.0


def evaluate_classifier(model: GnnModel, dataset: list[GraphTensors]) -> EvalReport:
    tp = fp = fn = tn = 0
    per_item = []
    for t in dataset:
        verdict = predict_ht(model, t)
        truth = _is_trojan(t.label)
        predicted = verdict == TROJAN
        if predicted and truth:
            tp += 1
        elif predicted and not truth:
            fp += 1
        elif not predicted and truth:
            fn += 1
        else:
            tn += 1
        per_item.append({"graph_id": t.graph_id, "label": t.label, "prediction": verdict})
    return compute_metrics(tp, fp, fn, tn, per_item)


def evaluate_pairs(
    model: GnnModel,
    pairs: list[GraphPair],
    tensors_by_id: dict[str, GraphTensors],
    delta: float = 0.5,
) -> EvalReport:
    tp = fp = fn = tn = 0
    per_item = []
    for pair in pairs:
        t1, t2 = tensors_by_id[pair.first], tensors_by_id[pair.second]
        sim = pair_similarity(model, embed(model, t1), embed(model, t2)).item()
        predicted = sim > delta
        truth = pair.label == 1
        if predicted and truth:
            tp += 1
        elif predicted and not truth:
            fp += 1
        elif not predicted and truth:
            fn += 1
        else:
            tn += 1
        per_item.append(
            {
                "first": pair.first,
                "second": pair.second,
                "label": pair.label,
                "similarity": sim,
                "prediction": PIRACY if predicted else NON_PIRACY,
            }
        )
    return compute_metrics(tp, fp, fn, tn, per_item)


# --- training ---

class _Queue:
    """Endless deterministic sampler: shuffle, drain, reshuffle."""

    def __init__(self, items: list, rng):
        self.items = list(items)
        self.rng = rng
        self.buffer: list = []

    def take(self, k: int) -> list:
        out = []
        while len(out) < k:
            if not self.buffer:
                order = self.rng.permutation(len(self.items))
                self.buffer = [self.items[i] for i in order]
            out.append(self.buffer.pop())
        return out


def _make_optimizer(cfg: TrainConfig, params: list[nc.Parameter]):
    if cfg.optimizer == "adam":
        opt = nc.Adam(params, lr=cfg.lr)
        return lambda: opt.step()
    if cfg.optimizer == "sgd":
        return lambda: nc.sgd_step(params, cfg.lr)
    raise ValueError(f"optimizer must be adam or sgd, got {cfg.optimizer!r}")


def _snapshot(model: GnnModel) -> list[np.ndarray]:
    return [p.data.copy() for p in model.params()]


def _restore(model: GnnModel, snap: list[np.ndarray]) -> None:
    for p, data in zip(model.params(), snap):
        p.data[...] = data


def _step_loss(loss: nc.Tensor, step: int, last_finite: float) -> float:
    value = loss.data[0, 0]
    if not np.isfinite(value):
        raise DivergenceError(step, last_finite)
    return float(value)


def train_graph_classifier(
    train: list[GraphTensors],
    val: list[GraphTensors],
    cfg: TrainConfig,
    vocab_fingerprint: str = "",
) -> Checkpoint:
    """Minimize summed cross-entropy; keep the parameters that score the
    best validation F1 across the initial, periodic, and final evaluations."""
    if not train or not val:
        raise ValueError("train and validation sets must both be nonempty")
    in_dim = train[0].X.shape[1]
    model = build_model(cfg.arch(in_dim, "classifier"), seed=cfg.seed,
                        vocab_fingerprint=vocab_fingerprint)
    params = model.params()
    step_fn = _make_optimizer(cfg, params)
    rng = np.random.default_rng(cfg.seed)

    history: list[dict] = []

    def validate(step: int) -> float:
        metric = evaluate_classifier(model, val).f1
        history.append({"step": step, "f1": metric})
        return metric

    best_metric = validate(0)
    best_snap = _snapshot(model)
    best_step = 0
    queue = _Queue(list(range(len(train))), rng)
    steps_per_epoch = max(1, math.ceil(len(train) / cfg.batch_size))
    step = 0
    last_finite = math.inf
    try:
        for _ in range(cfg.epochs):
            for _ in range(steps_per_epoch):
                batch = queue.take(min(cfg.batch_size, len(train)))
                nc.zero_grads(params)
                loss = None
                for idx in batch:
                    t = train[idx]
                    item = cross_entropy(classify(model, embed(model, t)), _onehot(t.label))
                    loss = item if loss is None else nc.add(loss, item)
                last_finite = _step_loss(loss, step, last_finite)
                nc.backward(loss)
                step_fn()
                step += 1
                if step % cfg.mini_test_interval == 0:
                    metric = validate(step)
                    if metric > best_metric:
                        best_metric, best_snap, best_step = metric, _snapshot(model), step
        final = validate(step)
    except NonFiniteError as exc:
        # blown-up weights surface as Inf in the next forward pass, well
        # before the loss tensor itself could ever hold a NaN
        raise DivergenceError(step, last_finite) from exc
    if final > best_metric:
        best_metric, best_snap, best_step = final, _snapshot(model), step
    _restore(model, best_snap)
    return Checkpoint(model=model, best_metric=best_metric, best_step=best_step, history=history)


def train_pair_model(
    train_pairs: list[GraphPair],
    val_pairs: list[GraphPair],
    tensors_by_id: dict[str, GraphTensors],
    cfg: TrainConfig,
    vocab_fingerprint: str = "",
) -> Checkpoint:
    """Siamese training on Eq-style contrastive loss; batches draw a
    balanced half from each pair polarity when both exist."""
    if not train_pairs or not val_pairs:
        raise ValueError("train and validation pair sets must both be nonempty")
    some_id = train_pairs[0].first
    in_dim = tensors_by_id[some_id].X.shape[1]
    model = build_model(cfg.arch(in_dim, "siamese"), seed=cfg.seed,
                        vocab_fingerprint=vocab_fingerprint)
    params = model.params()
    step_fn = _make_optimizer(cfg, params)
    rng = np.random.default_rng(cfg.seed)

    history: list[dict] = []

    def validate(step: int) -> float:
        metric = evaluate_pairs(model, val_pairs, tensors_by_id, cfg.delta).accuracy
        history.append({"step": step, "accuracy": metric})
        return metric

    best_metric = validate(0)
    best_snap = _snapshot(model)
    best_step = 0

    positives = [p for p in train_pairs if p.label == 1]
    negatives = [p for p in train_pairs if p.label == -1]
    balanced = bool(positives) and bool(negatives)
    if balanced:
        pos_queue = _Queue(positives, rng)
        neg_queue = _Queue(negatives, rng)
    else:
        all_queue = _Queue(train_pairs, rng)

    steps_per_epoch = max(1, math.ceil(len(train_pairs) / cfg.batch_size))
    step = 0
    last_finite = math.inf
    try:
        for _ in range(cfg.epochs):
            for _ in range(steps_per_epoch):
                if balanced:
                    half = max(1, cfg.batch_size // 2)
                    batch = pos_queue.take(half) + neg_queue.take(cfg.batch_size - half)
                else:
                    batch = all_queue.take(min(cfg.batch_size, len(train_pairs)))
                nc.zero_grads(params)
                loss = None
                for pair in batch:
                    h1 = embed(model, tensors_by_id[pair.first])
                    h2 = embed(model, tensors_by_id[pair.second])
                    item = contrastive_loss(pair_similarity(model, h1, h2), pair.label, cfg.margin)
                    loss = item if loss is None else nc.add(loss, item)
                last_finite = _step_loss(loss, step, last_finite)
                nc.backward(loss)
                step_fn()
                step += 1
                if step % cfg.mini_test_interval == 0:
                    metric = validate(step)
                    if metric > best_metric:
                        best_metric, best_snap, best_step = metric, _snapshot(model), step
        final = validate(step)
    except NonFiniteError as exc:
        raise DivergenceError(step, last_finite) from exc
    if final > best_metric:
        best_metric, best_snap, best_step = final, _snapshot(model), step
    _restore(model, best_snap)
    return Checkpoint(model=model, best_metric=best_metric, best_step=best_step, history=history)


# --- checkpoint file format ---

_CKPT_MAGIC = b"HWGNNCK\x00"
CKPT_VERSION = 1


def save_checkpoint(ckpt: Checkpoint | GnnModel, path: Path) -> None:
    model = ckpt.model if isinstance(ckpt, Checkpoint) else ckpt
    best = ckpt.best_metric if isinstance(ckpt, Checkpoint) else None
    params = model.params()
    header = {
        "vocab_fingerprint": model.vocab_fingerprint,
        "arch": model.arch,
        "best_metric": best if best is None or math.isfinite(best) else None,
        "params": [
            {"name": p.name, "rows": p.rows, "cols": p.cols} for p in params
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    blob = bytearray()
    blob += _CKPT_MAGIC
    blob += struct.pack("<I", CKPT_VERSION)
    blob += struct.pack("<Q", len(header_bytes))
    blob += header_bytes
    for p in params:
        blob += np.ascontiguousarray(p.data, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: Path, vocab_fingerprint: str | None = None) -> Checkpoint:
    blob = Path(path).read_bytes()
    base = len(_CKPT_MAGIC)
    if len(blob) < base + 12 or not blob.startswith(_CKPT_MAGIC):
        raise CorruptFileError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack_from("<I", blob, base)
    if version != CKPT_VERSION:
        raise VersionMismatchError(
            f"{path}: checkpoint format {version}, this build reads {CKPT_VERSION}"
        )
    (header_len,) = struct.unpack_from("<Q", blob, base + 4)
    offset = base + 12
    if len(blob) < offset + header_len:
        raise CorruptFileError(f"{path}: truncated header")
    try:
        header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{path}: unreadable header: {exc}") from None
    offset += header_len
    stored_fp = header.get("vocab_fingerprint", "")
    if vocab_fingerprint is not None and vocab_fingerprint != stored_fp:
        raise VocabMismatchError(
            f"{path}: checkpoint built for vocabulary {stored_fp[:12]}..., "
            f"requested {vocab_fingerprint[:12]}...; re-encode the graphs with "
            f"the vocabulary file saved next to this checkpoint"
        )
    model = build_model(header["arch"], seed=0, vocab_fingerprint=stored_fp)
    params = model.params()
    specs = header.get("params", [])
    if [p.name for p in params] != [s["name"] for s in specs]:
        raise CorruptFileError(f"{path}: parameter list does not match the architecture")
    for p, spec in zip(params, specs):
        if (p.rows, p.cols) != (spec["rows"], spec["cols"]):
            raise CorruptFileError(f"{path}: shape mismatch for {p.name}")
        size = spec["rows"] * spec["cols"] * 8
        if len(blob) < offset + size:
            raise CorruptFileError(f"{path}: truncated parameter block {p.name}")
        p.data[...] = np.frombuffer(blob, dtype="<f8", count=p.data.size, offset=offset).reshape(
            p.data.shape
        )
        offset += size
    if offset != len(blob):
        raise CorruptFileError(f"{path}: {len(blob) - offset} trailing bytes")
    best = header.get("best_metric")
    return Checkpoint(model=model, best_metric=math.nan if best is None else float(best))


# --- embedding export ---

def export_embeddings(model: GnnModel, dataset: list[GraphTensors], path: Path) -> None:
    """TSV: header line, then one row per graph (id, label, components)."""
    dim = model.arch["conv_dims"][-1]
    lines = ["graph_id\tlabel\t" + "\t".join(f"e{i}" for i in range(dim))]
    for t in dataset:
        h = embed(model, t).data.reshape(-1)
        label = "" if t.label is None else str(t.label)
        # repr(float) round-trips exactly, so a re-export is byte-identical
        lines.append(t.graph_id + "\t" + label + "\t" + "\t".join(repr(float(x)) for x in h))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
