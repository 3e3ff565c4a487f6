"""Pairwise-ranking pre-training of the embedding table.

The model is linear propagation over the interaction graph on top of a free
embedding table; the only learnable parameters here are the table rows. The
loss is the pairwise ranking objective

    L = sum_(u,i,j) log(1 + exp(-(x_u . x_i - x_u . x_j))) + l2 * ||rows||^2

over sampled (user, positive item, negative item) triples. Gradients are
derived by hand: the loss gradient w.r.t. final embeddings is scattered over
the triple rows, pulled back through the propagation stack by its adjoint,
and the L2 term contributes directly on the initial table. Updates use Adam.

Validation is a per-user holdout of training edges; training stops early
when held-out recall has not improved for `patience` consecutive epochs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import InteractionGraph, apply_temporal, build_graph
from .evaluation import evaluate_users
from .propagation import PropagationWeights, build_weights, forward, forward_backward
from .rng import seed_stream


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings for embedding training."""

    learning_rate: float = 1e-3
    batch_size: int = 1024
    max_epochs: int = 100
    patience: int = 10
    l2_reg: float = 1e-4
    val_fraction: float = 0.05
    eval_k: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs > 0 and self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")
        if self.l2_reg < 0:
            raise ValueError("l2_reg must be >= 0")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.eval_k < 1:
            raise ValueError("eval_k must be >= 1")


class Adam:
    """Adam over a dict of named arrays, updated in place."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {k: np.zeros_like(v) for k, v in params.items()}
        self._v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        t = self.step_count
        for name, g in grads.items():
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            self.params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def _edge_keys(graph: InteractionGraph) -> np.ndarray:
    """Sorted (user, item) composite keys for O(log E) membership tests."""
    return graph.edge_user * np.int64(graph.n_items) + graph.edge_item_local


def sample_negatives(
    graph: InteractionGraph, positives: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Pair each (user, positive item) with a uniform unseen negative item.

    `positives` is an (n, 2) array of (user, global item id) rows. Returns an
    (n, 3) array (user, positive, negative), all global ids. Negatives are
    drawn uniformly from the items the user has no edge to in `graph`,
    by rejection; a user with an edge to every item makes that impossible
    and raises ValueError.
    """
    if positives.size == 0:
        return np.empty((0, 3), dtype=np.int64)
    if int(graph.user_degrees().max(initial=0)) >= graph.n_items:
        full = np.flatnonzero(graph.user_degrees() >= graph.n_items)
        raise ValueError(
            f"cannot sample negatives: user {full[0]} interacts with every item"
        )
    keys = _edge_keys(graph)  # ascending, since canonical order sorts by (user, item)
    users = positives[:, 0].astype(np.int64)
    neg_local = rng.integers(0, graph.n_items, size=users.size, dtype=np.int64)
    pending = np.arange(users.size) if keys.size else np.empty(0, dtype=np.int64)
    while pending.size:
        q = users[pending] * np.int64(graph.n_items) + neg_local[pending]
        pos = np.searchsorted(keys, q)
        seen = (pos < keys.size) & (keys[np.minimum(pos, keys.size - 1)] == q)
        clash = pending[seen]
        if clash.size == 0:
            break
        neg_local[clash] = rng.integers(0, graph.n_items, size=clash.size, dtype=np.int64)
        pending = clash
    triples = np.empty((users.size, 3), dtype=np.int64)
    triples[:, 0] = users
    triples[:, 1] = positives[:, 1]
    triples[:, 2] = neg_local + graph.n_users
    return triples


def bpr_loss(
    x_final: np.ndarray,
    triples: np.ndarray,
    x0: np.ndarray | None = None,
    l2_reg: float = 0.0,
) -> float:
    """Pairwise ranking loss over (user, positive, negative) triples.

    Scores are dot products of final embeddings. With `l2_reg` > 0 the
    penalty applies to the initial-table rows of each triple, counted once
    per occurrence.
    """
    u, i, j = triples[:, 0], triples[:, 1], triples[:, 2]
    s = np.einsum("nd,nd->n", x_final[u], x_final[i] - x_final[j])
    loss = float(np.sum(np.logaddexp(0.0, -s)))
    if l2_reg > 0.0:
        if x0 is None:
            raise ValueError("l2_reg > 0 requires the initial embedding table")
        rows = triples.ravel()
        loss += l2_reg * float(np.sum(x0[rows] ** 2))
    return loss


def bpr_gradients(
    weights: PropagationWeights,
    x0: np.ndarray,
    triples: np.ndarray,
    n_layers: int,
    l2_reg: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient w.r.t. the initial embedding table.

    The chain has three stages: scatter the per-triple score gradients onto
    the final table (rows repeated across triples accumulate), pull the
    result back through propagation with the adjoint pass, then add the L2
    contribution, which acts on the initial table directly.
    """
    z = forward(weights, x0, n_layers)
    u, i, j = triples[:, 0], triples[:, 1], triples[:, 2]
    zu, zi, zj = z[u], z[i], z[j]
    s = np.einsum("nd,nd->n", zu, zi - zj)
    loss = float(np.sum(np.logaddexp(0.0, -s)))
    coef = expit(-s)[:, None]  # -dL/ds for each triple
    grad_z = np.zeros_like(z)
    np.add.at(grad_z, u, -coef * (zi - zj))
    np.add.at(grad_z, i, -coef * zu)
    np.add.at(grad_z, j, coef * zu)
    grad_x0 = forward_backward(weights, grad_z, n_layers)
    if l2_reg > 0.0:
        rows = triples.ravel()
        loss += l2_reg * float(np.sum(x0[rows] ** 2))
        np.add.at(grad_x0, rows, 2.0 * l2_reg * x0[rows])
    return loss, grad_x0


def holdout_split(
    graph: InteractionGraph, val_fraction: float, rng: np.random.Generator
) -> tuple[list, dict[int, np.ndarray]]:
    """Per-user split of edges into training and held-out validation items.

    Users keep at least one training edge; single-edge users contribute
    nothing to validation. Returns the surviving training edges and a map
    from user to held-out local item ids.
    """
    train_edges = []
    val_items: dict[int, np.ndarray] = {}
    all_edges = graph.interactions()
    for user in range(graph.n_users):
        lo, hi = graph.ui_indptr[user], graph.ui_indptr[user + 1]
        deg = int(hi - lo)
        if deg == 0:
            continue
        n_val = min(deg - 1, max(1, int(deg * val_fraction))) if deg >= 2 else 0
        edges = all_edges[lo:hi]
        if n_val == 0:
            train_edges.extend(edges)
            continue
        held = set(rng.choice(deg, size=n_val, replace=False).tolist())
        locals_ = []
        for pos, edge in enumerate(edges):
            if pos in held:
                locals_.append(edge.item - graph.n_users)
            else:
                train_edges.append(edge)
        val_items[user] = np.array(sorted(locals_), dtype=np.int64)
    return train_edges, val_items


@dataclass
class PretrainResult:
    """Best embedding table found during pre-training plus the epoch log."""

    embeddings: np.ndarray
    log: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_recall: float = 0.0
    optimizer_steps: int = 0


def pretrain(
    graph: InteractionGraph,
    dim: int,
    n_layers: int,
    tau: float,
    cfg: TrainConfig,
    *,
    no_temporal: bool = False,
    init_std: float = 0.1,
) -> PretrainResult:
    """Train the embedding table on `graph` with early stopping.

    The table is Gaussian-initialized, optimized with Adam on the pairwise
    ranking loss over the training split, and snapshotted whenever held-out
    recall improves; the best snapshot is returned. `max_epochs=0` returns
    the untouched initialization. With `val_fraction=0` there is no holdout
    and training runs all epochs on the full graph.
    """
    n = graph.n_nodes
    x = seed_stream(cfg.seed, "init").normal(0.0, init_std, size=(n, dim))

    if cfg.max_epochs == 0:
        return PretrainResult(embeddings=x)

    if cfg.val_fraction > 0.0:
        train_edges, val_items = holdout_split(
            graph, cfg.val_fraction, seed_stream(cfg.seed, "val-split")
        )
        train_graph = apply_temporal(
            build_graph(train_edges, graph.n_users, graph.n_items), tau
        )
    else:
        train_graph, val_items = apply_temporal(graph, tau), {}
    weights = build_weights(train_graph, no_temporal=no_temporal)

    positives = np.stack([train_graph.edge_user, train_graph.edge_item], axis=1)
    train_mask = {
        u: _item_mask(train_graph, u) for u in val_items
    }
    rng = seed_stream(cfg.seed, "negatives")
    adam = Adam({"x": x}, cfg.learning_rate)

    best = PretrainResult(embeddings=x.copy())
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(positives.shape[0])
        total = 0.0
        for start in range(0, order.size, cfg.batch_size):
            batch = positives[order[start : start + cfg.batch_size]]
            triples = sample_negatives(train_graph, batch, rng)
            loss, grad = bpr_gradients(weights, x, triples, n_layers, cfg.l2_reg)
            adam.step({"x": grad})
            total += loss
        mean_loss = total / max(positives.shape[0], 1)

        record = {"epoch": epoch, "loss": mean_loss, "val_recall": None}
        if val_items:
            z = forward(weights, x, n_layers)
            report = evaluate_users(
                z, graph.n_users, val_items, train_mask, cfg.eval_k
            )
            record["val_recall"] = report.mean_recall()
            if record["val_recall"] > best.best_recall or best.best_epoch == 0:
                best.embeddings = x.copy()
                best.best_epoch = epoch
                best.best_recall = record["val_recall"]
                stale = 0
            else:
                stale += 1
        else:
            best.embeddings = x.copy()
            best.best_epoch = epoch
        best.log.append(record)
        if val_items and stale >= cfg.patience:
            break
    best.optimizer_steps = adam.step_count
    return best


def _item_mask(graph: InteractionGraph, user: int) -> np.ndarray:
    """Boolean mask over local item ids covering `user`'s edges in `graph`."""
    mask = np.zeros(graph.n_items, dtype=bool)
    mask[graph.user_items(user) - graph.n_users] = True
    return mask
