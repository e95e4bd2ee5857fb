"""Training loop: balanced sampling, Adam, early stopping on validation AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ParamStore, backward
from .graphs import MultiRelationGraph, RelationAdjacency
from .metrics import MetricsReport, accuracy, evaluate
from .model import ConfigError, DualChannelModel, ForwardResult, TrainConfig
from .separator import edge_label_signs


class NumericalError(RuntimeError):
    """Training hit a non-finite loss."""


class Adam:
    """Classic Adam with bias-corrected moments and coupled L2 weight decay.

    Decay is added to the gradient before the moment updates and only for
    parameters flagged as decaying (weight matrices, not biases or
    normalization parameters).
    """

    def __init__(
        self,
        store: ParamStore,
        learning_rate: float,
        weight_decay: float = 0.0,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.store = store
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {name: np.zeros_like(p.data) for name, p in store.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in store.items()}

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for name, p in self.store.items():
            g = p.grad
            if g is None:
                raise ValueError(f"parameter {name!r} has no gradient; run backward first")
            if self.weight_decay and self.store.decays(name):
                g = g + self.weight_decay * p.data
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1**t)
            v_hat = v / (1 - self.beta2**t)
            p.data -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def balanced_node_sample(train_idx, labels, rng: np.random.Generator) -> np.ndarray:
    """Equal-count class sample from the train split; the minority count governs.

    All minority-class nodes are taken and the majority class is subsampled
    uniformly without replacement to match.
    """
    train_idx = np.asarray(train_idx, dtype=np.int64)
    labels = np.asarray(labels)
    fraud = train_idx[labels[train_idx] == 1]
    benign = train_idx[labels[train_idx] == 0]
    if len(fraud) == 0 or len(benign) == 0:
        raise ConfigError("balanced sampling needs both classes in the train split")
    k = min(len(fraud), len(benign))

    def take(pool):
        return pool if len(pool) == k else rng.choice(pool, size=k, replace=False)

    return np.concatenate([take(fraud), take(benign)])


def balanced_edge_sample(positions, sign_labels, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Equal-count sample of same-label and different-label training edges.

    When either side is absent the batch is empty and that relation's edge
    loss is skipped for the epoch.
    """
    positions = np.asarray(positions, dtype=np.int64)
    sign_labels = np.asarray(sign_labels, dtype=np.float64)
    same = np.flatnonzero(sign_labels < 0)
    diff = np.flatnonzero(sign_labels > 0)
    k = min(len(same), len(diff))
    if k == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    pick = np.concatenate(
        [
            same if len(same) == k else rng.choice(same, size=k, replace=False),
            diff if len(diff) == k else rng.choice(diff, size=k, replace=False),
        ]
    )
    return positions[pick], sign_labels[pick]


def training_edge_sets(
    relations: list[RelationAdjacency], labels: np.ndarray, train_mask: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per relation: positions and sign labels of edges with both endpoints in train."""
    return [
        edge_label_signs(rel.edge_sources(), rel.targets, labels, train_mask) for rel in relations
    ]


@dataclass
class FitResult:
    model: DualChannelModel
    log: list[dict]
    best_epoch: int
    best_val_auc: float

    def final_forward(self) -> ForwardResult:
        return self.model.forward(training=False)


def fit(graph: MultiRelationGraph, config: TrainConfig) -> FitResult:
    """Train one model per the configured schedule.

    Every epoch re-scores and re-partitions each relation's edges, runs the
    active channels, takes one Adam step on the joint loss over balanced
    node/edge batches, and evaluates the validation split. The parameters
    with the best validation AUC are restored before returning; training
    stops early after ``patience`` epochs without improvement.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    model = DualChannelModel(graph, config, rng)
    graph = model.graph  # the rel ablation swaps in the merged union graph

    train_idx = np.asarray(graph.split.train, dtype=np.int64)
    val_idx = np.asarray(graph.split.val, dtype=np.int64)
    train_mask = graph.split.train_mask(graph.num_nodes)
    labeled_edges = (
        training_edge_sets(graph.relations, graph.labels, train_mask)
        if config.ablation != "sep"
        else None
    )

    optimizer = Adam(model.params, config.learning_rate, config.weight_decay)
    log: list[dict] = []
    best_auc = -np.inf
    best_epoch = 0
    best_snapshot = model.params.snapshot()
    stale = 0

    for epoch in range(1, config.epochs + 1):
        node_batch = balanced_node_sample(train_idx, graph.labels, rng)
        edge_batches = None
        if labeled_edges is not None:
            edge_batches = [balanced_edge_sample(pos, signs, rng) for pos, signs in labeled_edges]

        model.params.zero_grads()
        out = model.forward(training=True, rng=rng, node_batch=node_batch, edge_batches=edge_batches)
        loss_value = out.loss_total.item()
        if not np.isfinite(loss_value):
            raise NumericalError(f"non-finite loss {loss_value} at epoch {epoch}")
        backward(out.loss_total)
        optimizer.step()

        eval_out = model.forward(training=False)
        fraud_scores = eval_out.probs.data[:, 1]
        val_report = evaluate(fraud_scores, graph.labels, val_idx) if len(val_idx) else None

        record = {
            "epoch": epoch,
            "loss_total": loss_value,
            "loss_cls": out.loss_cls.item(),
            "edge_losses": [l.item() for l in out.edge_losses],
            "train_accuracy": accuracy(fraud_scores, graph.labels, train_idx),
        }
        if val_report is not None:
            record.update(
                val_auc=val_report.auc,
                val_recall=val_report.recall,
                val_f1_macro=val_report.f1_macro,
                val_gmean=val_report.gmean,
            )
        log.append(record)

        current = val_report.auc if val_report is not None else float("nan")
        if np.isfinite(current) and current > best_auc:
            best_auc = current
            best_epoch = epoch
            best_snapshot = model.params.snapshot()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    model.params.restore(best_snapshot)
    return FitResult(model=model, log=log, best_epoch=best_epoch, best_val_auc=float(best_auc))


def evaluate_split(model: DualChannelModel, node_idx) -> MetricsReport:
    """Metrics of the current parameters over one split (evaluation forward)."""
    out = model.forward(training=False)
    return evaluate(out.probs.data[:, 1], model.graph.labels, node_idx)
