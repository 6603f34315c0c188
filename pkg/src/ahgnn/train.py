"""Full-batch training with Adam, early stopping, and head-diversity loss.

The objective is cross entropy on the train split plus two regularizers
that PUSH attention heads apart: for each attention level, minus the
mean symmetric KL divergence over unordered head pairs (so minimizing
the loss maximizes disagreement between heads).  Validation micro-F1
drives early stopping and best-parameter selection.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import HeteroGraph
from .model import (ModelOutput, ModelParams, init_model_params,
                    model_forward)
from .propagate import MessageCache

MAX_WEIGHT_DECAY = 5e-6


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 5e-6
    max_epochs: int = 200
    hidden: int = 256
    l1: int = 2
    l2: int = 2
    alpha: float = 0.25
    lambda1: float = 1e-4
    lambda2: float = 1e-4
    heads: int = 4
    patience: int = 30
    seed: int = 0
    precision: str = "f32"
    fix_gamma_uniform: bool = False

    def validate(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0 <= self.weight_decay <= MAX_WEIGHT_DECAY:
            raise ValueError(f"weight_decay must lie in [0, {MAX_WEIGHT_DECAY}]")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.hidden < 1 or self.heads < 1 or self.hidden % self.heads:
            raise ValueError("hidden must be a positive multiple of heads")
        if self.l1 < 1 or self.l2 < 1:
            raise ValueError("propagation depths must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("regularizer weights must be non-negative")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.precision not in ("f32", "f64"):
            raise ValueError("precision must be 'f32' or 'f64'")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        cfg = TrainConfig(**d)
        cfg.validate()
        return cfg


class Adam:
    """Adam with bias correction and decoupled weight decay.

    Weight decay shrinks parameters by lr*wd*theta before the moment
    update.  A step with any non-finite gradient is rejected wholesale.
    """

    def __init__(self, lr: float, weight_decay: float = 0.0,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, Tensor]) -> bool:
        """Apply one update; returns False (no change) on non-finite grads."""
        live = {n: p for n, p in params.items()
                if p.requires_grad and p.grad is not None}
        for p in live.values():
            if not np.all(np.isfinite(p.grad)):
                return False
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, p in live.items():
            g = p.grad.astype(np.float64)
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            if self.weight_decay:
                p.data = p.data - self.lr * self.weight_decay * p.data
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / b1t
            v_hat = self.v[name] / b2t
            upd = self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.data = (p.data - upd.astype(p.data.dtype)).astype(p.data.dtype)
        return True


def head_diversity(atts: list[Tensor]) -> Tensor:
    """Minus the mean symmetric KL between attention head pairs.

    Zero (constant) when there is a single head.
    """
    if len(atts) < 2:
        return ad.constant(np.zeros((), dtype=atts[0].data.dtype))
    pairs = list(combinations(range(len(atts)), 2))
    acc = None
    for i, j in pairs:
        sym = ad.scale(ad.add(ad.kl_mean(atts[i], atts[j]),
                              ad.kl_mean(atts[j], atts[i])), 0.5)
        acc = sym if acc is None else ad.add(acc, sym)
    return ad.scale(acc, -1.0 / len(pairs))


def training_loss(output: ModelOutput, labels: np.ndarray,
                  train_mask: np.ndarray, lambda1: float,
                  lambda2: float) -> tuple[Tensor, dict]:
    """Cross entropy plus weighted coarse/fine diversity terms."""
    ce = ad.cross_entropy_logits(output.logits, labels, train_mask)
    r_coarse = head_diversity(output.coarse_attention)
    r_fine = head_diversity(output.fine_attention)
    loss = ad.add(ce, ad.add(ad.scale(r_coarse, lambda1),
                             ad.scale(r_fine, lambda2)))
    parts = {"ce": float(ce.data), "r_coarse": float(r_coarse.data),
             "r_fine": float(r_fine.data)}
    return loss, parts


@dataclass
class Metrics:
    macro_f1: float
    micro_f1: float


def f1_scores(predictions: np.ndarray, labels: np.ndarray,
              num_classes: int) -> Metrics:
    """Macro (mean over ALL classes, empty classes scoring 0) and micro F1."""
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise ValueError("prediction/label length mismatch")
    if labels.size == 0:
        raise ValueError("cannot score an empty label set")
    per_class = np.zeros(num_classes)
    for c in range(num_classes):
        tp = int(np.sum((predictions == c) & (labels == c)))
        fp = int(np.sum((predictions == c) & (labels != c)))
        fn = int(np.sum((predictions != c) & (labels == c)))
        denom = 2 * tp + fp + fn
        per_class[c] = (2 * tp / denom) if denom else 0.0
    micro = float(np.mean(predictions == labels))
    return Metrics(macro_f1=float(per_class.mean()), micro_f1=micro)


def evaluate(logits: np.ndarray, labels: np.ndarray,
             mask: np.ndarray) -> Metrics:
    """Argmax predictions scored on masked, labeled nodes."""
    mask = np.asarray(mask, dtype=bool) & (np.asarray(labels) >= 0)
    if not np.any(mask):
        raise ValueError("evaluation mask selects no labeled node")
    preds = np.argmax(logits[mask], axis=1)
    return f1_scores(preds, np.asarray(labels)[mask], logits.shape[1])


@dataclass
class EpochRow:
    epoch: int
    loss: float
    train_micro: float
    val_macro: float
    val_micro: float


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochRow]
    best_epoch: int
    best_val_micro: float
    test: Metrics
    diverged: bool = False
    rejected_epochs: list[int] = field(default_factory=list)


def _snapshot(params: ModelParams) -> dict[str, np.ndarray]:
    return {n: t.data.copy() for n, t in params.all_parameters().items()}


def _restore(params: ModelParams, snap: dict[str, np.ndarray]) -> None:
    for n, t in params.all_parameters().items():
        t.data = snap[n].copy()


def train(graph: HeteroGraph, cache: MessageCache,
          config: TrainConfig) -> TrainResult:
    """Train to convergence or max_epochs; returns best-validation params."""
    config.validate()
    if cache.l1 != config.l1 or cache.l2 != config.l2:
        raise ValueError(
            f"cache was built for L1={cache.l1}, L2={cache.l2}; config asks "
            f"for L1={config.l1}, L2={config.l2}")
    dtype = config.dtype
    work = cache.astype(dtype)
    rng = np.random.default_rng(config.seed)
    params = init_model_params(work, config.hidden, config.heads, config.alpha,
                               rng, dtype=dtype,
                               fix_gamma=config.fix_gamma_uniform)
    named = params.all_parameters()
    opt = Adam(lr=config.lr, weight_decay=config.weight_decay)
    labels = graph.labels
    train_mask = graph.train_mask & (labels >= 0)
    if not np.any(train_mask):
        raise ValueError("train split holds no labeled node")
    val_mask = graph.val_mask & (labels >= 0)
    if not np.any(val_mask):
        raise ValueError("validation split holds no labeled node")

    history: list[EpochRow] = []
    rejected: list[int] = []
    best = _snapshot(params)
    best_val = -1.0
    best_epoch = 0
    bad_epochs = 0
    diverged = False

    for epoch in range(1, config.max_epochs + 1):
        for t in named.values():
            t.grad = None
        with ad.Tape() as tape:
            out = model_forward(work, params)
            loss, _ = training_loss(out, labels, train_mask,
                                    config.lambda1, config.lambda2)
        loss_val = float(loss.data)
        if not np.isfinite(loss_val):
            diverged = True
            break
        tape.backward(loss)
        if not opt.step(named):
            rejected.append(epoch)
        logits = model_forward(work, params).logits.data
        m = evaluate(logits, labels, val_mask)
        m_train = evaluate(logits, labels, train_mask)
        history.append(EpochRow(epoch=epoch, loss=loss_val,
                                train_micro=m_train.micro_f1,
                                val_macro=m.macro_f1, val_micro=m.micro_f1))
        if m.micro_f1 > best_val:
            best_val = m.micro_f1
            best = _snapshot(params)
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > config.patience:
                break

    _restore(params, best)
    test_mask = graph.test_mask & (labels >= 0)
    if np.any(test_mask):
        test = evaluate(model_forward(work, params).logits.data, labels,
                        test_mask)
    else:
        test = Metrics(macro_f1=float("nan"), micro_f1=float("nan"))
    return TrainResult(params=params, history=history, best_epoch=best_epoch,
                       best_val_micro=best_val, test=test, diverged=diverged,
                       rejected_epochs=rejected)


def write_metrics_csv(history: list[EpochRow], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "loss", "train_micro", "val_macro", "val_micro"])
        for row in history:
            w.writerow([row.epoch, f"{row.loss:.10g}",
                        f"{row.train_micro:.10g}",
                        f"{row.val_macro:.10g}", f"{row.val_micro:.10g}"])


def write_gamma_csv(rows: list[tuple[str, int, float]], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["path", "hop", "value"])
        for key, hop, val in rows:
            w.writerow([key, hop, f"{val:.10g}"])


def write_beta_csv(rows: list[tuple[str, float]], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["path", "beta"])
        for key, val in rows:
            w.writerow([key, f"{val:.10g}"])


def write_run_json(config: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(config, f, indent=2, sort_keys=True)
        f.write("\n")
