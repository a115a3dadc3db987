"""Contrastive training of the encoder parameters.

Each batch of n triplets (premise, entailed, contradicted) is scored with the
asymmetric similarity and pushed through a softmax-style loss: the positive
logit for anchor i is sim(entailed_i || premise_i) / tau, and the denominator
always contains the entailed-hypothesis logits over the whole batch, plus the
contradicted-hypothesis logits when the variant includes "con", plus the
direction-flipped logits sim(premise_j || entailed_i) / tau when it includes
"rev". Gradients are exact reverse-mode derivatives of the closed forms,
hand-derived and batched; finite differences appear only in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .encoder import VARIANCE_EPSILON, SentenceModel, new_bag_model, sigmoid
from .nli import auprc, positive_labels, score_examples

LOSS_VARIANTS = ("ent", "ent+con", "ent+rev", "ent+con+rev")


@dataclass(frozen=True)
class TrainConfig:
    temperature: float = 0.05
    batch_size: int = 32
    learning_rate: float = 0.05
    loss_variant: str = "ent+con+rev"
    epochs: int = 3
    seed: int = 0
    eval_every: int = 100
    # Decoupled-weight-decay adaptive optimizer settings.
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ValueError(f"loss_variant must be one of {LOSS_VARIANTS}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    @property
    def with_contradiction(self) -> bool:
        return "con" in self.loss_variant.split("+")

    @property
    def with_reversed(self) -> bool:
        return "rev" in self.loss_variant.split("+")


@dataclass(frozen=True)
class LossBreakdown:
    """Batch loss plus the mean denominator mass contributed by each negative set."""

    total: float
    v_e: float
    v_c: float
    v_r: float


class _Role:
    """Forward state for one batch role (premises, entailed, contradicted)."""

    __slots__ = ("vectors", "buckets", "mean", "z_var", "var", "d_mean", "d_var")

    def __init__(self, model: SentenceModel, sentences, handles):
        if model.base.kind == "bag":
            self.buckets = [handles[s] for s in sentences]
            table = model.base.table
            self.vectors = np.stack([table[b].mean(axis=0) for b in self.buckets])
        else:
            self.buckets = None
            self.vectors = np.stack([handles[s] for s in sentences])
        heads = model.heads
        self.mean = self.vectors @ heads.w_mean + heads.b_mean
        self.z_var = self.vectors @ heads.w_var + heads.b_var
        self.var = np.logaddexp(0.0, self.z_var) + VARIANCE_EPSILON
        self.d_mean = np.zeros_like(self.mean)
        self.d_var = np.zeros_like(self.var)


def _sentence_handles(model: SentenceModel, sentences) -> dict:
    """Per-unique-sentence encoder input: bucket indices (bag) or fixed base vector."""
    handles = {}
    for s in sentences:
        if s not in handles:
            if model.base.kind == "bag":
                handles[s] = model.base.bucket_indices(s)
            else:
                handles[s] = model.base.base_vector(s)
    return handles


def _kl_block(query: _Role, ref: _Role):
    d = query.mean.shape[1]
    inv_vr = 1.0 / ref.var
    log_det_q = np.sum(np.log(query.var), axis=1)
    log_det_r = np.sum(np.log(ref.var), axis=1)
    trace = query.var @ inv_vr.T
    diff = query.mean[:, None, :] - ref.mean[None, :, :]
    quad = np.einsum("qrk,rk->qr", diff * diff, inv_vr)
    kl = 0.5 * (log_det_r[None, :] - log_det_q[:, None] + trace + quad - d)
    return np.maximum(kl, 0.0), diff, inv_vr


def _kl_block_backward(grad_kl, query: _Role, ref: _Role, diff, inv_vr):
    """Accumulate d(loss)/d(mean, var) of both roles given d(loss)/d(KL[q, r])."""
    weighted = diff * inv_vr[None, :, :]
    query.d_mean += np.einsum("qr,qrk->qk", grad_kl, weighted)
    ref.d_mean -= np.einsum("qr,qrk->rk", grad_kl, weighted)
    row_mass = grad_kl.sum(axis=1)
    col_mass = grad_kl.sum(axis=0)
    query.d_var += 0.5 * (grad_kl @ inv_vr - row_mass[:, None] / query.var)
    ref.d_var += 0.5 * (
        col_mass[:, None] * inv_vr
        - (grad_kl.T @ query.var) * inv_vr * inv_vr
        - np.einsum("qr,qrk->rk", grad_kl, diff * diff) * inv_vr * inv_vr
    )


def _forward(model: SentenceModel, batch, config: TrainConfig, handles=None):
    premises = [t.premise for t in batch]
    positives = [t.entailed for t in batch]
    negatives = [t.contradicted for t in batch]
    if handles is None:
        needed = premises + positives + (negatives if config.with_contradiction else [])
        handles = _sentence_handles(model, needed)
    roles = {
        "premise": _Role(model, premises, handles),
        "positive": _Role(model, positives, handles),
    }
    if config.with_contradiction:
        roles["negative"] = _Role(model, negatives, handles)

    # Each block is (query rows, anchor columns); anchors index the premises
    # except in the reversed block, where the anchor's entailed hypothesis is
    # the reference.
    blocks = []
    kl_e, diff_e, inv_e = _kl_block(roles["positive"], roles["premise"])
    blocks.append(("e", roles["positive"], roles["premise"], kl_e, diff_e, inv_e))
    if config.with_contradiction:
        kl_c, diff_c, inv_c = _kl_block(roles["negative"], roles["premise"])
        blocks.append(("c", roles["negative"], roles["premise"], kl_c, diff_c, inv_c))
    if config.with_reversed:
        kl_r, diff_r, inv_r = _kl_block(roles["premise"], roles["positive"])
        blocks.append(("r", roles["premise"], roles["positive"], kl_r, diff_r, inv_r))
    return roles, blocks


def _loss_from_blocks(blocks, config: TrainConfig):
    n = blocks[0][3].shape[0]
    sims = {name: 1.0 / (1.0 + kl) for name, _, _, kl, _, _ in blocks}
    logits = np.vstack([sims[name] / config.temperature for name, *_ in blocks])
    peak = logits.max(axis=0)
    lse = peak + np.log(np.exp(logits - peak).sum(axis=0))
    positive_logit = np.diag(sims["e"]) / config.temperature
    losses = lse - positive_logit
    block_mass = {}
    offset = 0
    for name, *_ in blocks:
        chunk = logits[offset : offset + n]
        chunk_peak = chunk.max(axis=0)
        block_mass[name] = float(
            np.mean(np.exp(chunk_peak) * np.exp(chunk - chunk_peak).sum(axis=0))
        )
        offset += n
    breakdown = LossBreakdown(
        total=float(losses.mean()),
        v_e=block_mass.get("e", 0.0),
        v_c=block_mass.get("c", 0.0),
        v_r=block_mass.get("r", 0.0),
    )
    softmax = np.exp(logits - lse)
    return breakdown, sims, softmax


def batch_loss(batch, model: SentenceModel, config: TrainConfig) -> LossBreakdown:
    """Mean contrastive loss over the batch, with the per-set denominator masses."""
    if not batch:
        raise ValueError("empty batch")
    _, blocks = _forward(model, batch, config)
    breakdown, _, _ = _loss_from_blocks(blocks, config)
    if not math.isfinite(breakdown.total):
        raise ArithmeticError(f"non-finite loss: {breakdown.total}")
    return breakdown


def loss_gradients(batch, model: SentenceModel, config: TrainConfig, handles=None):
    """Loss plus exact gradients for every trainable array, keyed like trainable_params()."""
    if not batch:
        raise ValueError("empty batch")
    roles, blocks = _forward(model, batch, config, handles)
    breakdown, sims, softmax = _loss_from_blocks(blocks, config)
    if not math.isfinite(breakdown.total):
        raise ArithmeticError(f"non-finite loss: {breakdown.total}")

    n = blocks[0][3].shape[0]
    scale = 1.0 / (n * config.temperature)
    offset = 0
    for name, query, ref, kl, diff, inv_vr in blocks:
        grad_logit = softmax[offset : offset + n].copy()
        if name == "e":
            grad_logit[np.arange(n), np.arange(n)] -= 1.0
        # d sim / d KL = -sim^2
        grad_kl = grad_logit * scale * -(sims[name] ** 2)
        _kl_block_backward(grad_kl, query, ref, diff, inv_vr)
        offset += n

    heads = model.heads
    grads = {name: np.zeros_like(arr) for name, arr in model.trainable_params().items()}
    for role in roles.values():
        d_z = role.d_var * sigmoid(role.z_var)
        grads["w_mean"] += role.vectors.T @ role.d_mean
        grads["b_mean"] += role.d_mean.sum(axis=0)
        grads["w_var"] += role.vectors.T @ d_z
        grads["b_var"] += d_z.sum(axis=0)
        if role.buckets is not None:
            d_vec = role.d_mean @ heads.w_mean.T + d_z @ heads.w_var.T
            for row, buckets in enumerate(role.buckets):
                np.add.at(grads["table"], buckets, d_vec[row] / len(buckets))
    return breakdown, grads


class AdamW:
    """Adaptive moments with decoupled weight decay applied to every parameter."""

    def __init__(self, params: dict[str, np.ndarray], config: TrainConfig):
        self.params = params
        self.config = config
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        c = self.config
        self.t += 1
        bias1 = 1.0 - c.beta1**self.t
        bias2 = 1.0 - c.beta2**self.t
        for key, p in self.params.items():
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            update = (m / bias1) / (np.sqrt(v / bias2) + c.adam_epsilon)
            p -= lr * (update + c.weight_decay * p)


@dataclass
class LogRecord:
    step: int
    lr: float
    loss: float
    v_e: float
    v_c: float
    v_r: float
    dev_auprc: float | None = None


@dataclass
class TrainingLog:
    records: list[LogRecord] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_tsv(self) -> str:
        lines = [f"# {note}" for note in self.notes]
        lines.append("step\tlr\tloss\tv_e\tv_c\tv_r\tdev_auprc")
        for r in self.records:
            dev = f"{r.dev_auprc:.6f}" if r.dev_auprc is not None else ""
            lines.append(
                f"{r.step}\t{r.lr:.10g}\t{r.loss:.10g}\t{r.v_e:.10g}\t{r.v_c:.10g}\t{r.v_r:.10g}\t{dev}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    model: SentenceModel
    log: TrainingLog
    best_dev_auprc: float | None
    best_step: int | None
    initial_dev_auprc: float | None


def _dev_auprc(model: SentenceModel, dev) -> float:
    return auprc(score_examples(dev, model), positive_labels(dev))


def train(dataset, dev, config: TrainConfig, model: SentenceModel | None = None) -> TrainResult:
    """Shuffled epochs with linear warmup; keeps the dev-AUPRC-best snapshot.

    The learning rate at step t of T is learning_rate * t / T, reaching the
    configured value exactly at the final step. The dev set is scored every
    ``eval_every`` steps and at the final step; the parameters with the best
    dev AUPRC are restored into the returned model (ties keep the earlier
    snapshot). An empty dev set skips evaluation, keeps the final parameters,
    and flags the log.
    """
    dataset = list(dataset)
    if not dataset:
        raise ValueError("training dataset is empty")
    dev = list(dev)
    if model is None:
        model = new_bag_model(seed=config.seed)

    params = model.trainable_params()
    optimizer = AdamW(params, config)
    _, shuffle_ss = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(shuffle_ss)

    triplet_sentences = []
    for t in dataset:
        triplet_sentences.append(t.premise)
        triplet_sentences.append(t.entailed)
        if config.with_contradiction:
            triplet_sentences.append(t.contradicted)
    handles = _sentence_handles(model, triplet_sentences)

    log = TrainingLog()
    batches_per_epoch = math.ceil(len(dataset) / config.batch_size)
    total_steps = config.epochs * batches_per_epoch

    initial_auprc = _dev_auprc(model, dev) if dev else None
    best_auprc: float | None = None
    best_step: int | None = None
    best_snapshot: dict[str, np.ndarray] | None = None
    if not dev:
        log.notes.append("dev evaluation skipped: empty dev set")

    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(dataset), config.batch_size):
            step += 1
            batch = [dataset[i] for i in order[start : start + config.batch_size]]
            lr = config.learning_rate * step / total_steps
            breakdown, grads = loss_gradients(batch, model, config, handles)
            optimizer.step(grads, lr)
            record = LogRecord(
                step=step,
                lr=lr,
                loss=breakdown.total,
                v_e=breakdown.v_e,
                v_c=breakdown.v_c,
                v_r=breakdown.v_r,
            )
            if dev and (step % config.eval_every == 0 or step == total_steps):
                score = _dev_auprc(model, dev)
                record.dev_auprc = score
                if best_auprc is None or score > best_auprc:
                    best_auprc = score
                    best_step = step
                    best_snapshot = {k: v.copy() for k, v in params.items()}
            log.records.append(record)

    if best_snapshot is not None:
        for key, value in best_snapshot.items():
            np.copyto(params[key], value)
    return TrainResult(
        model=model,
        log=log,
        best_dev_auprc=best_auprc,
        best_step=best_step,
        initial_dev_auprc=initial_auprc,
    )


@dataclass
class GridCell:
    batch_size: int
    learning_rate: float
    dev_auprc: float | None
    status: str


@dataclass
class GridSearchResult:
    cells: list[GridCell]
    best: GridCell

    def to_tsv(self) -> str:
        lines = ["batch_size\tlearning_rate\tdev_auprc\tstatus"]
        for cell in self.cells:
            score = f"{cell.dev_auprc:.6f}" if cell.dev_auprc is not None else ""
            lines.append(f"{cell.batch_size}\t{cell.learning_rate:.10g}\t{score}\t{cell.status}")
        return "\n".join(lines) + "\n"


DEFAULT_GRID_BATCH_SIZES = (16, 32, 64, 128)
DEFAULT_GRID_LEARNING_RATES = (1e-5, 3e-5, 5e-5)


def grid_search(
    dataset,
    dev,
    batch_sizes,
    learning_rates,
    config: TrainConfig,
    model_factory=None,
) -> GridSearchResult:
    """Train one model per (batch size, learning rate) cell; score by best dev AUPRC.

    A failing cell is recorded and skipped. Ties prefer the smaller batch
    size, then the smaller learning rate.
    """
    batch_sizes = list(batch_sizes)
    learning_rates = list(learning_rates)
    if not batch_sizes or not learning_rates:
        raise ValueError("grid must be non-empty")
    if not dev:
        raise ValueError("grid search needs a non-empty dev set")
    if model_factory is None:
        model_factory = lambda cfg: new_bag_model(seed=cfg.seed)

    cells = []
    for bs in batch_sizes:
        for lr in learning_rates:
            cfg = replace(config, batch_size=bs, learning_rate=lr)
            try:
                result = train(dataset, dev, cfg, model_factory(cfg))
                cells.append(GridCell(bs, lr, result.best_dev_auprc, "ok"))
            except Exception as exc:
                cells.append(GridCell(bs, lr, None, f"failed: {exc}"))

    best = None
    for cell in sorted(cells, key=lambda c: (c.batch_size, c.learning_rate)):
        if cell.dev_auprc is None:
            continue
        if best is None or cell.dev_auprc > best.dev_auprc:
            best = cell
    if best is None:
        raise RuntimeError("every grid cell failed")
    return GridSearchResult(cells=cells, best=best)
