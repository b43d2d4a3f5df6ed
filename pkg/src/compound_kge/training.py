"""Training loop with self-adversarial negative sampling.

Each positive triple is paired with uniformly drawn corruptions of one
side; corruption alternates head/tail across the batch so both
prediction directions train.  Negative triples are weighted by a
temperature-scaled softmax of their own scores, and those weights are
treated as constants during backpropagation.  After every optimizer
step entity rows are projected back to unit norm.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import TripleStore, build_filter_index
from .errors import TrainingDivergedError
from .model import KGEModel
from .scoring import _norm_and_grad
from .transforms import TransformParams, chain_backward, chain_forward_tape

__all__ = [
    "Side",
    "TrainConfig",
    "NegativeBatch",
    "sample_negatives",
    "self_adversarial_weights",
    "loss",
    "log_sigmoid",
    "normalize_entities",
    "Adam",
    "SGD",
    "make_optimizer",
    "train_step",
    "train",
    "TrainResult",
    "LOG_HEADER",
]

log = logging.getLogger(__name__)

LOG_HEADER = "step,loss,valid_mrr,elapsed_seconds"


class Side(enum.Enum):
    HEAD = "head"
    TAIL = "tail"


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    learning_rate: float = 1e-3
    batch_size: int = 256
    negative_size: int = 64
    adversarial_temperature: float = 1.0
    margin: float = 6.0
    max_steps: int = 10000
    seed: int = 0
    optimizer: str = "adam"
    valid_interval: int = 1000
    valid_limit: int | None = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.batch_size < 1 or self.negative_size < 1:
            raise ValueError("batch_size and negative_size must be positive")
        if self.adversarial_temperature < 0:
            raise ValueError("adversarial_temperature must be nonnegative")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.valid_interval < 1:
            raise ValueError("valid_interval must be positive")


@dataclass
class NegativeBatch:
    """Corruptions of one positive triple on one side."""

    corrupted_entity_ids: np.ndarray
    corruption_side: Side
    source_triple: tuple[int, int, int]


def sample_negatives(
    triple, n_entities: int, n: int, side: Side, rng: np.random.Generator
) -> NegativeBatch:
    """Draw ``n`` replacement entities uniformly, with replacement.

    No filtering against known-true triples happens here; filtering is
    purely an evaluation concept.
    """
    if n_entities < 1:
        raise ValueError("cannot sample negatives from an empty entity set")
    if n_entities < 2:
        raise ValueError("negative sampling needs at least two entities")
    if n < 1:
        raise ValueError("need at least one negative sample")
    ids = rng.integers(0, n_entities, size=n, dtype=np.int64)
    h, r, t = (int(x) for x in triple)
    return NegativeBatch(ids, side, (h, r, t))


def log_sigmoid(x):
    """Numerically stable log of the logistic function."""
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def self_adversarial_weights(neg_scores, temperature: float):
    """Softmax of ``temperature * score`` along the last axis.

    Zero temperature gives uniform weights.  The result is meant to be
    used as constants: no gradient flows through these weights.
    """
    if temperature < 0:
        raise ValueError("temperature must be nonnegative")
    z = temperature * np.asarray(neg_scores, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    w = np.exp(z)
    return w / np.sum(w, axis=-1, keepdims=True)


def loss(pos_score, neg_scores, weights, margin: float):
    """Negative-sampling loss of one positive and its negatives.

    ``-log sigma(margin - f_pos) - sum_i w_i log sigma(f_neg_i - margin)``
    with ``weights`` summing to one along the last axis.  Stable for
    score magnitudes far beyond the overflow range of a naive sigmoid.
    """
    pos_term = -log_sigmoid(margin - np.asarray(pos_score, dtype=np.float64))
    neg_term = -np.sum(
        np.asarray(weights) * log_sigmoid(np.asarray(neg_scores) - margin), axis=-1
    )
    return pos_term + neg_term


def normalize_entities(table: np.ndarray, rng: np.random.Generator | None = None) -> int:
    """Project every entity row to unit L2 norm, in place.

    Rows with norm below 1e-12 cannot be normalized; they are
    re-randomized first (then normalized) and counted.  Returns the
    number of re-randomized rows.
    """
    norms = np.linalg.norm(table, axis=1)
    degenerate = norms < 1e-12
    n_bad = int(np.count_nonzero(degenerate))
    if n_bad:
        if rng is None:
            rng = np.random.default_rng(0)
        d = table.shape[1]
        table[degenerate] = rng.uniform(-0.5, 0.5, size=(n_bad, d)) / np.sqrt(d)
        norms = np.linalg.norm(table, axis=1)
        log.warning("re-randomized %d degenerate entity rows", n_bad)
    table /= norms[:, None]
    return n_bad


# ---------------------------------------------------------------------------
# Optimizers (sparse row updates over embedding tables)
# ---------------------------------------------------------------------------

class Adam:
    """Adam with lazy sparse updates: only rows that received gradient
    move, and only their moment entries decay.  Bias correction uses
    the global step count."""

    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def begin_step(self):
        self.t += 1

    def update(self, name: str, param: np.ndarray, rows: np.ndarray, grads: np.ndarray):
        if name not in self._moments:
            self._moments[name] = (np.zeros_like(param), np.zeros_like(param))
        m, v = self._moments[name]
        m[rows] = self.beta1 * m[rows] + (1 - self.beta1) * grads
        v[rows] = self.beta2 * v[rows] + (1 - self.beta2) * grads * grads
        m_hat = m[rows] / (1 - self.beta1**self.t)
        v_hat = v[rows] / (1 - self.beta2**self.t)
        param[rows] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


class SGD:
    def __init__(self, learning_rate):
        self.learning_rate = learning_rate

    def begin_step(self):
        pass

    def update(self, name, param, rows, grads):
        param[rows] -= self.learning_rate * grads


def make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.learning_rate)
    return SGD(config.learning_rate)


# ---------------------------------------------------------------------------
# Batched forward/backward
# ---------------------------------------------------------------------------

def _gather(tables, rids, extra_axis=False) -> TransformParams:
    tr = tables.translations[rids]
    an = tables.angles[rids]
    sc = tables.scales[rids]
    if extra_axis:
        tr, an, sc = tr[:, None, :], an[:, None, :], sc[:, None, :]
    return TransformParams(tr, an, sc)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def _accumulate_rows(ids, grads):
    """Sum gradient rows sharing an id; returns (unique_ids, summed)."""
    rows, inverse = np.unique(ids, return_inverse=True)
    acc = np.zeros((len(rows),) + grads.shape[1:], dtype=np.float64)
    np.add.at(acc, inverse, grads)
    return rows, acc


def batch_loss_and_grads(
    model: KGEModel,
    positives: np.ndarray,
    neg_ids: np.ndarray,
    corrupt_head: np.ndarray,
    config: TrainConfig,
    weights: np.ndarray | None = None,
):
    """Mean loss of a batch and gradients for every trainable table.

    ``positives`` is (B, 3), ``neg_ids`` (B, N), ``corrupt_head`` a
    boolean row mask choosing which side each row's negatives replace.
    ``weights`` overrides the self-adversarial weights (used by
    gradient checks, which must hold them constant).

    Returns ``(mean_loss, per_positive_loss, grads)`` with ``grads``
    mapping table names to ``(rows, grad_rows)`` pairs.
    """
    spec = model.spec
    ents = model.entities
    h_ids, r_ids, t_ids = positives[:, 0], positives[:, 1], positives[:, 2]
    B, N = neg_ids.shape

    ph = _gather(model.head, r_ids)
    pt = _gather(model.tail, r_ids)
    u, tape_u = chain_forward_tape(ents[h_ids], spec.head_chain, ph)
    v, tape_v = chain_forward_tape(ents[t_ids], spec.tail_chain, pt)
    f_pos, gdir_pos = _norm_and_grad(u - v, spec.norm)

    idx_h = np.where(corrupt_head)[0]
    idx_t = np.where(~corrupt_head)[0]
    f_neg = np.empty((B, N))
    neg_passes = {}
    for idx, side in ((idx_h, Side.HEAD), (idx_t, Side.TAIL)):
        if len(idx) == 0:
            continue
        x = ents[neg_ids[idx]]
        if side is Side.HEAD:
            p = _gather(model.head, r_ids[idx], extra_axis=True)
            y, tape = chain_forward_tape(x, spec.head_chain, p)
            diff = y - v[idx][:, None, :]
        else:
            p = _gather(model.tail, r_ids[idx], extra_axis=True)
            y, tape = chain_forward_tape(x, spec.tail_chain, p)
            diff = u[idx][:, None, :] - y
        f, gdir = _norm_and_grad(diff, spec.norm)
        f_neg[idx] = f
        neg_passes[side] = (idx, p, tape, gdir)

    if weights is None:
        weights = self_adversarial_weights(f_neg, config.adversarial_temperature)
    per_pos = loss(f_pos, f_neg, weights, config.margin)
    mean_loss = float(np.mean(per_pos))

    # d loss / d score, already divided by the batch size
    c_pos = _sigmoid(f_pos - config.margin) / B
    c_neg = -weights * _sigmoid(config.margin - f_neg) / B

    # upstream gradients of the transformed positive-side vectors
    g_u = c_pos[:, None] * gdir_pos
    g_v = -g_u.copy()
    for side, (idx, p, tape, gdir) in neg_passes.items():
        weighted = c_neg[idx][:, :, None] * gdir
        if side is Side.HEAD:
            g_v[idx] -= np.sum(weighted, axis=1)
        else:
            g_u[idx] += np.sum(weighted, axis=1)
        neg_passes[side] = (idx, p, tape, weighted)

    entity_ids = []
    entity_grads = []
    head_param = {"translations": [], "angles": [], "scales": []}
    tail_param = {"translations": [], "angles": [], "scales": []}
    head_rows, tail_rows = [], []

    gx, g_par = chain_backward(g_u, ph, tape_u)
    entity_ids.append(np.asarray(h_ids))
    entity_grads.append(gx)
    head_rows.append(np.asarray(r_ids))
    head_param["translations"].append(g_par.translation)
    head_param["angles"].append(g_par.angles)
    head_param["scales"].append(g_par.scale)

    gx, g_par = chain_backward(g_v, pt, tape_v)
    entity_ids.append(np.asarray(t_ids))
    entity_grads.append(gx)
    tail_rows.append(np.asarray(r_ids))
    tail_param["translations"].append(g_par.translation)
    tail_param["angles"].append(g_par.angles)
    tail_param["scales"].append(g_par.scale)

    for side, (idx, p, tape, weighted) in neg_passes.items():
        upstream = weighted if side is Side.HEAD else -weighted
        gx, g_par = chain_backward(upstream, p, tape)
        entity_ids.append(neg_ids[idx].ravel())
        entity_grads.append(gx.reshape(-1, spec.dim))
        bucket, rows = (
            (head_param, head_rows) if side is Side.HEAD else (tail_param, tail_rows)
        )
        rows.append(np.asarray(r_ids[idx]))
        bucket["translations"].append(np.sum(g_par.translation, axis=1))
        bucket["angles"].append(np.sum(g_par.angles, axis=1))
        bucket["scales"].append(np.sum(g_par.scale, axis=1))

    grads: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    grads["entities"] = _accumulate_rows(
        np.concatenate(entity_ids), np.concatenate(entity_grads)
    )

    tr = model.trainable

    def emit(name, rows_list, grads_list):
        if rows_list:
            grads[name] = _accumulate_rows(
                np.concatenate(rows_list), np.concatenate(grads_list)
            )

    if tr.head_translation:
        emit("head.translations", head_rows, head_param["translations"])
    if tr.head_scale:
        emit("head.scales", head_rows, head_param["scales"])
    if tr.tail_translation:
        emit("tail.translations", tail_rows, tail_param["translations"])
    if tr.tail_scale:
        emit("tail.scales", tail_rows, tail_param["scales"])
    if model.shared_rotation:
        if tr.head_rotation:
            emit(
                "head.angles",
                head_rows + tail_rows,
                head_param["angles"] + tail_param["angles"],
            )
    else:
        if tr.head_rotation:
            emit("head.angles", head_rows, head_param["angles"])
        if tr.tail_rotation:
            emit("tail.angles", tail_rows, tail_param["angles"])

    return mean_loss, per_pos, grads


def _resolve_table(model: KGEModel, name: str) -> np.ndarray:
    if name == "entities":
        return model.entities
    side, attr = name.split(".")
    return getattr(getattr(model, side), attr)


def train_step(
    model: KGEModel,
    positives: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
    optimizer,
) -> float:
    """One optimization step over a batch of positive triples.

    Negatives are drawn uniformly per positive; rows alternate between
    head and tail corruption.  After the parameter update the touched
    entity rows are re-projected to unit norm (untouched rows are
    already unit, so the whole table stays normalized).
    """
    positives = np.asarray(positives, dtype=np.int64)
    if positives.ndim != 2 or positives.shape[1] != 3:
        raise ValueError("positives must be a (B, 3) integer array")
    B = positives.shape[0]
    neg_ids = rng.integers(
        0, model.n_entities, size=(B, config.negative_size), dtype=np.int64
    )
    corrupt_head = np.arange(B) % 2 == 0

    mean_loss, per_pos, grads = batch_loss_and_grads(
        model, positives, neg_ids, corrupt_head, config
    )
    if not np.isfinite(mean_loss):
        bad = [tuple(int(x) for x in positives[i]) for i in np.where(~np.isfinite(per_pos))[0]]
        raise TrainingDivergedError(model.step, bad)

    optimizer.begin_step()
    for name, (rows, g) in grads.items():
        optimizer.update(name, _resolve_table(model, name), rows, g)

    touched = grads["entities"][0]
    rows = model.entities[touched]
    norms = np.linalg.norm(rows, axis=1)
    degenerate = norms < 1e-12
    if np.any(degenerate):
        d = model.dim
        rows[degenerate] = rng.uniform(
            -0.5, 0.5, size=(int(degenerate.sum()), d)
        ) / np.sqrt(d)
        norms = np.linalg.norm(rows, axis=1)
    model.entities[touched] = rows / norms[:, None]
    model.step += 1
    return mean_loss


@dataclass
class TrainResult:
    model: KGEModel
    best_model: KGEModel
    best_valid_mrr: float
    best_step: int
    log_rows: list[tuple] = field(default_factory=list)
    final_rng_state: dict | None = None
    best_rng_state: dict | None = None


def train(
    store: TripleStore,
    model: KGEModel,
    config: TrainConfig,
    *,
    log_path=None,
    workers: int | None = None,
) -> TrainResult:
    """Run the full training loop.

    Batches are drawn uniformly from the training split.  Every
    ``valid_interval`` steps the model is scored on the validation
    split (optionally truncated to ``config.valid_limit`` triples) and
    the best-validation-MRR snapshot is retained.  One log row is
    emitted per step: ``step,loss,valid_mrr,elapsed_seconds`` with the
    MRR column empty between validations.
    """
    from .evaluation import evaluate  # local import, avoids cycle at module load

    if len(store.train) == 0:
        raise ValueError("training split is empty")
    rng = np.random.default_rng(config.seed)
    optimizer = make_optimizer(config)
    normalize_entities(model.entities, rng)

    filter_index = build_filter_index(store) if len(store.valid) else None
    best_model = model.copy()
    best_mrr = -np.inf
    best_step = 0
    best_rng_state = rng.bit_generator.state
    log_rows: list[tuple] = []
    fh = open(log_path, "a", encoding="utf-8") if log_path else None
    if fh and fh.tell() == 0:
        fh.write(LOG_HEADER + "\n")
    t0 = time.monotonic()
    try:
        for step in range(1, config.max_steps + 1):
            batch_idx = rng.integers(0, len(store.train), size=config.batch_size)
            step_loss = train_step(model, store.train[batch_idx], config, rng, optimizer)
            valid_mrr = ""
            if (
                filter_index is not None
                and config.valid_interval > 0
                and step % config.valid_interval == 0
            ):
                report = evaluate(
                    model,
                    store,
                    "valid",
                    categories=None,
                    filter_index=filter_index,
                    limit=config.valid_limit,
                    workers=workers,
                )
                valid_mrr = report.mrr
                if valid_mrr > best_mrr:
                    best_mrr = valid_mrr
                    best_model = model.copy()
                    best_step = step
                    best_rng_state = rng.bit_generator.state
                log.info("step %d loss %.4f valid MRR %.4f", step, step_loss, valid_mrr)
            row = (step, step_loss, valid_mrr, time.monotonic() - t0)
            log_rows.append(row)
            if fh:
                mrr_txt = f"{valid_mrr:.6f}" if valid_mrr != "" else ""
                fh.write(f"{row[0]},{row[1]:.6f},{mrr_txt},{row[3]:.3f}\n")
    finally:
        if fh:
            fh.close()

    final_rng_state = rng.bit_generator.state
    if best_mrr == -np.inf:
        best_model = model.copy()
        best_mrr = float("nan")
        best_step = model.step
        best_rng_state = final_rng_state
    return TrainResult(
        model,
        best_model,
        float(best_mrr),
        best_step,
        log_rows,
        final_rng_state=final_rng_state,
        best_rng_state=best_rng_state,
    )
