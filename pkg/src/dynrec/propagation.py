"""Time-aware linear propagation over the user-item graph.

Each undirected user-item edge gets one weight per direction:

    w(src -> dst) = 1 / (2 * sqrt(deg_dst * deg_src)) + alpha(dst, src) / 2

where alpha is a softmax over the destination's neighborhood of the
normalized edge timesteps, so a node's most recent interactions carry the
largest share of its incoming mass. With temporal weighting disabled the
weight falls back to the plain symmetric-normalized 1 / sqrt(deg_dst * deg_src).

Propagation itself is linear: one layer is a sparse matrix-vector product
per embedding column, and the final representation averages layers 0..L.
Because the map from initial embeddings to final ones is linear, its adjoint
(needed for gradient computation) is the same accumulation run with the
transposed operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .data import InteractionGraph


def temporal_softmax(graph: InteractionGraph) -> tuple[np.ndarray, np.ndarray]:
    """Per-neighborhood softmax of normalized edge times, for both directions.

    Returns (alpha_ui, alpha_iu), both aligned with the canonical edge order:
    alpha_ui[e] is edge e's share within its user's neighborhood, alpha_iu[e]
    its share within its item's neighborhood. Each neighborhood's shares sum
    to 1; nodes of degree 0 contribute nothing.
    """
    if graph.edge_time_norm is None:
        raise ValueError("graph has no temporal attributes; call apply_temporal first")
    t = graph.edge_time_norm
    ex = np.exp(t)
    # user side: canonical order is already grouped by user
    denom_u = np.bincount(graph.edge_user, weights=ex, minlength=graph.n_users)
    alpha_ui = ex / denom_u[graph.edge_user]
    # item side: group via the item-sorted permutation
    denom_i = np.bincount(graph.edge_item_local, weights=ex, minlength=graph.n_items)
    alpha_iu = ex / denom_i[graph.edge_item_local]
    return alpha_ui, alpha_iu


@dataclass(frozen=True)
class PropagationWeights:
    """Directed edge weights plus the assembled sparse propagation operator.

    `matrix` maps node values to node values: row = destination, column =
    source. `isolated` marks nodes with no edges; the forward pass keeps
    their layer-0 rows instead of averaging in zeros.
    """

    w_ui: np.ndarray  # (E,) weight item -> user, canonical edge order
    w_iu: np.ndarray  # (E,) weight user -> item, canonical edge order
    matrix: sp.csr_matrix  # (N, N) one propagation step
    matrix_t: sp.csr_matrix  # transpose, for the adjoint pass
    isolated: np.ndarray  # (N,) bool

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]


def edge_weights(
    graph: InteractionGraph,
    alpha_ui: np.ndarray | None = None,
    alpha_iu: np.ndarray | None = None,
    *,
    no_temporal: bool = False,
) -> PropagationWeights:
    """Assemble directed edge weights and the sparse one-step operator."""
    deg = graph.node_degrees().astype(np.float64)
    deg_u = deg[graph.edge_user]
    deg_i = deg[graph.edge_item]
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = 1.0 / np.sqrt(deg_u * deg_i)
    if no_temporal:
        w_ui = sym.copy()
        w_iu = sym.copy()
    else:
        if alpha_ui is None or alpha_iu is None:
            alpha_ui, alpha_iu = temporal_softmax(graph)
        w_ui = 0.5 * sym + 0.5 * alpha_ui
        w_iu = 0.5 * sym + 0.5 * alpha_iu

    n = graph.n_nodes
    rows = np.concatenate([graph.edge_user, graph.edge_item])
    cols = np.concatenate([graph.edge_item, graph.edge_user])
    vals = np.concatenate([w_ui, w_iu])
    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    isolated = deg == 0
    return PropagationWeights(
        w_ui=w_ui,
        w_iu=w_iu,
        matrix=matrix,
        matrix_t=matrix.T.tocsr(),
        isolated=isolated,
    )


def build_weights(
    graph: InteractionGraph, *, no_temporal: bool = False
) -> PropagationWeights:
    """Edge weights for a graph that already carries temporal attributes."""
    if no_temporal:
        return edge_weights(graph, no_temporal=True)
    alpha_ui, alpha_iu = temporal_softmax(graph)
    return edge_weights(graph, alpha_ui, alpha_iu)


def propagate_layer(weights: PropagationWeights, x: np.ndarray) -> np.ndarray:
    """One propagation step: gather weighted neighbor rows into each node."""
    return np.asarray(weights.matrix @ x)


def propagate_transpose(weights: PropagationWeights, g: np.ndarray) -> np.ndarray:
    """One step of the adjoint operator (scatter back along edges)."""
    return np.asarray(weights.matrix_t @ g)


def forward(
    weights: PropagationWeights, x0: np.ndarray, n_layers: int
) -> np.ndarray:
    """Mean of propagation layers 0..n_layers from initial embeddings `x0`.

    Isolated nodes (degree 0) keep their layer-0 rows unchanged rather than
    being averaged toward zero. `n_layers=0` returns a copy of `x0`.
    """
    if n_layers < 0:
        raise ValueError("n_layers must be >= 0")
    acc = x0.copy()
    x = x0
    for _ in range(n_layers):
        x = propagate_layer(weights, x)
        acc += x
    out = acc / float(n_layers + 1)
    if n_layers and weights.isolated.any():
        out[weights.isolated] = x0[weights.isolated]
    return out


def forward_backward(
    weights: PropagationWeights, grad_out: np.ndarray, n_layers: int
) -> np.ndarray:
    """Adjoint of `forward`: map a gradient w.r.t. the output back to x0.

    The forward map is x0 -> (sum_{l=0..L} A^l x0) / (L+1) with isolated rows
    passed through, so the adjoint accumulates (A^T)^l over the non-isolated
    part and adds the upstream gradient directly on isolated rows.
    """
    if n_layers < 0:
        raise ValueError("n_layers must be >= 0")
    g = grad_out.copy()
    if n_layers and weights.isolated.any():
        g[weights.isolated] = 0.0
    acc = g.copy()
    cur = g
    for _ in range(n_layers):
        cur = propagate_transpose(weights, cur)
        acc += cur
    grad_x0 = acc / float(n_layers + 1)
    if n_layers and weights.isolated.any():
        grad_x0[weights.isolated] += grad_out[weights.isolated]
    return grad_x0
