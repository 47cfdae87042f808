"""Loss, regularizers, Adagrad, and the training loop.

One optimizer step on a batch of reciprocal-augmented facts combines:

  * the multi-class log-loss: mean over the batch of
    -log softmax(phi(h, r, ·, tau))[t] against all candidate tails; head
    prediction is trained by the reciprocal rows (t, r + R, h, tau);
  * the embedding penalty: batch mean of sum |x|^p over the 4d reals of
    q_h, the composite relation w, and q_t, weighted by lambda_e. The
    penalty is on the composite, so its gradient flows through the
    rotation and the periodic sine;
  * the temporal smoothness penalty on adjacent raw timestamp rows,
    ||dq_tau + dq_tau'||_p^p averaged over the |T|-1 gaps, weighted by
    lambda_t. It is computed once per step over the full time tables.

Adagrad keeps per-entry squared-gradient accumulators:
acc += g^2; x -= lr * g / (sqrt(acc) + 1e-10). Rows with zero gradient are
exact no-ops, so dense application equals a sparse row update.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import evaluation, model, quat
from .data import (
    FilterIndex,
    QuadrupleDataset,
    Vocabulary,
    batch_iterator,
    build_filter_index,
    load_dataset_or_cache,
)
from .errors import ConfigError, TrainingDivergedError
from .model import Gradients, ModelParams
from .quat import QuaternionBatch

__all__ = [
    "TrainConfig",
    "AdagradState",
    "TrainResult",
    "EvalRecord",
    "multiclass_log_loss",
    "embedding_regularizer",
    "temporal_regularizer",
    "total_loss",
    "adagrad_step",
    "train",
    "train_model",
    "ablation_eval",
]

ADAGRAD_EPS = 1e-10


@dataclass
class TrainConfig:
    """Everything a training run needs; every field doubles as a config-file
    key and a CLI flag of the same (kebab-cased) name."""

    dataset: str = ""
    checkpoint: str = ""
    dim: int = 2000
    batch_size: int = 1000
    epochs: int = 200
    lr: float = 0.1
    lambda_e: float = 0.0025
    lambda_t: float = 0.1
    p: float = 4.0
    periodic: bool = True
    seed: int = 0
    eval_every: int = 5
    float32: bool = False
    metrics_log: str = ""

    def validate(self) -> None:
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.lambda_e < 0 or self.lambda_t < 0:
            raise ConfigError("regularizer weights must be >= 0")
        if self.eval_every < 0:
            raise ConfigError(f"eval_every must be >= 0, got {self.eval_every}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    @property
    def dtype(self):
        return np.float32 if self.float32 else np.float64

    def metrics_path(self) -> Path | None:
        if self.metrics_log:
            return Path(self.metrics_log)
        if self.checkpoint:
            return Path(str(self.checkpoint) + ".metrics")
        return None


def config_field_names() -> tuple[str, ...]:
    return tuple(f.name for f in fields(TrainConfig))


@dataclass
class AdagradState:
    """Per-entry accumulated squared gradients, shaped like the tables."""

    accum: Gradients
    eps: float = ADAGRAD_EPS

    @classmethod
    def zeros(cls, params: ModelParams, eps: float = ADAGRAD_EPS) -> "AdagradState":
        return cls(accum=Gradients.zeros(params), eps=eps)


@dataclass(frozen=True)
class EvalRecord:
    epoch: int
    train_loss: float
    mrr: float
    hits1: float
    hits3: float
    hits10: float
    seconds: float

    def line(self) -> str:
        return (
            f"epoch={self.epoch} loss={self.train_loss:.6f} "
            f"valid_mrr={self.mrr:.6f} valid_hits1={self.hits1:.6f} "
            f"valid_hits3={self.hits3:.6f} valid_hits10={self.hits10:.6f} "
            f"seconds={self.seconds:.2f}"
        )


@dataclass
class TrainResult:
    params: ModelParams
    state: AdagradState
    vocab: Vocabulary
    dataset: QuadrupleDataset
    filter_index: FilterIndex
    history: list[EvalRecord]
    epoch_losses: list[float]

    @property
    def best_valid_mrr(self) -> float:
        return max((r.mrr for r in self.history), default=float("nan"))


def multiclass_log_loss(
    params: ModelParams, quads: np.ndarray, with_grads: bool = True
) -> tuple[float, Gradients | None]:
    """Mean -log softmax(phi(e, r, ·, tau))[gold] over the batch, with
    gradients for every touched row (all entities, via the softmax)."""
    quads = np.asarray(quads)
    b = len(quads)
    gold = quads[:, 2].astype(np.intp)
    scores, cache = model.score_against_all(params, quads[:, 0], quads[:, 1], quads[:, 3])

    m = scores.max(axis=1, keepdims=True)
    shifted = scores - m
    np.exp(shifted, out=scores)  # reuse the buffer
    denom = scores.sum(axis=1, keepdims=True)
    rows = np.arange(b)
    log_probs = shifted[rows, gold] - np.log(denom[:, 0])
    loss = float(-log_probs.mean())
    if not with_grads:
        return loss, None

    prob = scores
    prob /= denom
    prob[rows, gold] -= 1.0
    prob /= b

    grads = Gradients.zeros(params)
    ent = params.entity
    u = cache.u
    d_u = QuaternionBatch(prob @ ent.a, prob @ ent.b, prob @ ent.c, prob @ ent.d)
    for gcomp, ucomp in zip(grads.entity.components(), u.components()):
        np.matmul(prob.T, ucomp, out=gcomp)

    d_qh = quat.hamilton_product(d_u, quat.conjugate(cache.w))
    d_w = quat.hamilton_product(quat.conjugate(cache.qh), d_u)
    model._scatter_add(grads.entity, cache.e_ids, d_qh)
    model.relation_path_backward(cache, d_w, grads)
    return loss, grads


def _power_penalty(x: np.ndarray, p: float) -> np.ndarray:
    return np.abs(x) ** p


def _power_grad(x: np.ndarray, p: float) -> np.ndarray:
    return p * np.sign(x) * np.abs(x) ** (p - 1.0)


def embedding_regularizer(
    params: ModelParams, quads: np.ndarray, p: float, with_grads: bool = True
) -> tuple[float, Gradients | None]:
    """Batch mean of sum |x|^p over q_h, the composite relation, and q_t."""
    quads = np.asarray(quads)
    b = len(quads)
    cache = model._forward(params, quads[:, 0], quads[:, 1], quads[:, 3])
    qt = params.entity.gather(quads[:, 2])

    value = 0.0
    for batch in (cache.qh, cache.w, qt):
        for comp in batch.components():
            value += float(_power_penalty(comp, p).sum())
    value /= b
    if not with_grads:
        return value, None

    grads = Gradients.zeros(params)
    scale = 1.0 / b
    d_qh = QuaternionBatch(*(_power_grad(comp, p) * scale for comp in cache.qh.components()))
    d_qt = QuaternionBatch(*(_power_grad(comp, p) * scale for comp in qt.components()))
    d_w = QuaternionBatch(*(_power_grad(comp, p) * scale for comp in cache.w.components()))
    model._scatter_add(grads.entity, cache.e_ids, d_qh)
    model._scatter_add(grads.entity, quads[:, 2], d_qt)
    model.relation_path_backward(cache, d_w, grads)
    return value, grads


def temporal_regularizer(
    params: ModelParams, p: float, with_grads: bool = True
) -> tuple[float, Gradients | None]:
    """Smoothness of adjacent raw timestamp rows, rotation plus periodic:
    mean over gaps of ||q_tau(i+1) - q_tau(i) + q_tau'(i+1) - q_tau'(i)||_p^p."""
    grads = Gradients.zeros(params) if with_grads else None
    n_ts = params.n_timestamps
    if n_ts < 2:
        return 0.0, grads
    value = 0.0
    inv = 1.0 / (n_ts - 1)
    for i, (rot_c, per_c) in enumerate(
        zip(params.rot_time.components(), params.per_time.components())
    ):
        s = np.diff(rot_c, axis=0) + np.diff(per_c, axis=0)
        value += float(_power_penalty(s, p).sum())
        if grads is None:
            continue
        g = _power_grad(s, p) * inv
        grot_c = grads.rot_time.components()[i]
        gper_c = grads.per_time.components()[i]
        grot_c[1:] += g
        grot_c[:-1] -= g
        gper_c[1:] += g
        gper_c[:-1] -= g
    return value * inv, grads


def total_loss(
    params: ModelParams, quads: np.ndarray, cfg: TrainConfig, with_grads: bool = True
) -> tuple[float, Gradients | None]:
    """L = L_softmax + lambda_e * embedding penalty + lambda_t * temporal penalty."""
    loss, grads = multiclass_log_loss(params, quads, with_grads)
    if cfg.lambda_e:
        reg, reg_grads = embedding_regularizer(params, quads, cfg.p, with_grads)
        loss += cfg.lambda_e * reg
        if grads is not None:
            grads.add_scaled(reg_grads, cfg.lambda_e)
    if cfg.lambda_t:
        lam, lam_grads = temporal_regularizer(params, cfg.p, with_grads)
        loss += cfg.lambda_t * lam
        if grads is not None:
            grads.add_scaled(lam_grads, cfg.lambda_t)
    return loss, grads


def adagrad_step(
    params: ModelParams, state: AdagradState, grads: Gradients, lr: float
) -> None:
    """In-place sparse-equivalent Adagrad update of every table."""
    for table, acc, grad in zip(params.tables(), state.accum.tables(), grads.tables()):
        for x, a, g in zip(table.components(), acc.components(), grad.components()):
            a += g * g
            x -= lr * g / (np.sqrt(a) + state.eps)


def train_model(
    vocab: Vocabulary,
    dataset: QuadrupleDataset,
    cfg: TrainConfig,
    log: Callable[[str], None] | None = None,
) -> TrainResult:
    """Run the optimization loop on an already-loaded dataset.

    Checkpoints: the final state always goes to cfg.checkpoint (when set);
    whenever a validation pass improves the best MRR so far, the same
    format is written to cfg.checkpoint + ".best". Validation runs every
    eval_every epochs and at the last epoch; eval_every = 0 disables it.
    Deterministic given the config and seed in single-threaded mode.
    """
    cfg.validate()
    params = ModelParams.init(
        vocab.n_entities,
        vocab.n_relations,
        vocab.n_timestamps,
        cfg.dim,
        periodic=cfg.periodic,
        seed=cfg.seed,
        dtype=cfg.dtype,
    )
    state = AdagradState.zeros(params)
    filter_index = build_filter_index(dataset)
    metrics_path = cfg.metrics_path()

    def emit(line: str) -> None:
        if log is not None:
            log(line)
        if metrics_path is not None:
            with open(metrics_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    history: list[EvalRecord] = []
    epoch_losses: list[float] = []
    best_mrr = -np.inf
    started = time.perf_counter()

    for epoch in range(1, cfg.epochs + 1):
        batch_losses = []
        for step, batch in enumerate(
            batch_iterator(dataset, cfg.batch_size, seed=(cfg.seed, epoch))
        ):
            loss, grads = total_loss(params, batch, cfg)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss!r} at epoch {epoch}, step {step}; "
                    f"try a smaller lr (current {cfg.lr}) or weaker regularizers"
                )
            adagrad_step(params, state, grads, cfg.lr)
            batch_losses.append(loss)
        epoch_losses.append(float(np.mean(batch_losses)))

        due = cfg.eval_every and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs)
        if due:
            result = evaluation.evaluate(params, dataset.valid, filter_index)
            record = EvalRecord(
                epoch=epoch,
                train_loss=epoch_losses[-1],
                mrr=result.mrr,
                hits1=result.hits[1],
                hits3=result.hits[3],
                hits10=result.hits[10],
                seconds=time.perf_counter() - started,
            )
            history.append(record)
            emit(record.line())
            if cfg.checkpoint and result.mrr > best_mrr:
                best_mrr = result.mrr
                model.save_checkpoint(str(cfg.checkpoint) + ".best", params, state.accum)

    if cfg.checkpoint:
        model.save_checkpoint(cfg.checkpoint, params, state.accum)
    return TrainResult(
        params=params,
        state=state,
        vocab=vocab,
        dataset=dataset,
        filter_index=filter_index,
        history=history,
        epoch_losses=epoch_losses,
    )


def train(cfg: TrainConfig, log: Callable[[str], None] | None = None) -> TrainResult:
    """Load cfg.dataset (directory or cache file) and run train_model."""
    cfg.validate()
    if not cfg.dataset:
        raise ConfigError("dataset path is required")
    vocab, dataset = load_dataset_or_cache(cfg.dataset)
    return train_model(vocab, dataset, cfg, log=log)


def ablation_eval(
    cfg: TrainConfig, log: Callable[[str], None] | None = None
) -> evaluation.RankingResult:
    """Train with the periodic time translation disabled and return the
    filtered test-split ranking, for pairing against a periodic-on run."""
    result = train(replace(cfg, periodic=False), log=log)
    return evaluation.evaluate(result.params, result.dataset.test, result.filter_index)
