"""Interaction ingestion, snapshot segmentation and sparse graph construction.

Input data is a log of (user, item, unix-timestamp) triples. Users and items
are remapped onto one global id space (users first, then items) so a single
embedding table serves both. The log is split into a pre-training graph plus
a sequence of fixed-width time-slot snapshots, and each edge set can be built
into an immutable bidirectional CSR graph carrying per-edge time attributes:
the raw timestamp, a relative timestep (timestamp offset divided by the
interval `tau`, floored) and that timestep min-max normalized into [0, 1].
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class Interaction:
    """One user-item interaction at a point in time."""

    user: int
    item: int
    ts_unix: int


@dataclass(frozen=True)
class Vocabulary:
    """Global id remap: users occupy [0, n_users), items [n_users, n_users + n_items)."""

    user_index: dict[int, int]
    item_index: dict[int, int]

    @property
    def n_users(self) -> int:
        return len(self.user_index)

    @property
    def n_items(self) -> int:
        return len(self.item_index)

    @property
    def n_nodes(self) -> int:
        return self.n_users + self.n_items

    @classmethod
    def from_interactions(cls, interactions: Iterable[Interaction]) -> "Vocabulary":
        users = sorted({x.user for x in interactions})
        items = sorted({x.item for x in interactions})
        n_users = len(users)
        return cls(
            user_index={u: k for k, u in enumerate(users)},
            item_index={i: n_users + k for k, i in enumerate(items)},
        )

    def encode(self, interactions: Iterable[Interaction]) -> list[Interaction]:
        """Map raw ids into the global id space."""
        return [
            Interaction(self.user_index[x.user], self.item_index[x.item], x.ts_unix)
            for x in interactions
        ]


def _iter_lines(source: IO[bytes] | IO[str] | Iterable[str]) -> Iterator[str]:
    for raw in source:
        yield raw.decode("utf-8") if isinstance(raw, bytes) else raw


def ingest_interactions(
    source: IO[bytes] | IO[str] | Iterable[str],
) -> tuple[list[Interaction], Vocabulary]:
    """Parse `user<TAB>item<TAB>ts_unix` lines and build the global id remap.

    Returns the interactions in input order with their original ids, plus the
    vocabulary mapping raw ids onto the global id space. Blank lines are
    skipped; anything else that does not parse as three non-negative integers
    raises ValueError naming the 1-based line number. Empty input yields an
    empty list, not an error.
    """
    interactions: list[Interaction] = []
    for lineno, line in enumerate(_iter_lines(source), start=1):
        stripped = line.rstrip("\n").rstrip("\r")
        if not stripped.strip():
            continue
        fields = stripped.split("\t")
        if len(fields) != 3:
            raise ValueError(
                f"malformed interaction at line {lineno}: expected 3 tab-separated "
                f"fields, got {len(fields)}"
            )
        try:
            user, item, ts = (int(f) for f in fields)
        except ValueError:
            raise ValueError(
                f"malformed interaction at line {lineno}: non-integer field in "
                f"{stripped!r}"
            ) from None
        if user < 0 or item < 0 or ts < 0:
            raise ValueError(f"malformed interaction at line {lineno}: negative value")
        interactions.append(Interaction(user, item, ts))
    return interactions, Vocabulary.from_interactions(interactions)


def load_interactions(path: str) -> tuple[list[Interaction], Vocabulary]:
    with open(path, "rb") as fh:
        return ingest_interactions(fh)


def interactions_to_arrays(
    interactions: Sequence[Interaction],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a sequence of interactions into (user, item, ts) int64 arrays."""
    if not interactions:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    arr = np.array([(x.user, x.item, x.ts_unix) for x in interactions], dtype=np.int64)
    return arr[:, 0], arr[:, 1], arr[:, 2]


@dataclass(frozen=True)
class InteractionGraph:
    """Immutable bidirectional sparse user-item graph with per-edge time attributes.

    Edges are stored once, in canonical order (sorted by user then item), with
    CSR index structures for both directions. `edge_item` holds global ids
    (already offset by `n_users`). `edge_step` / `edge_time_norm` are None
    until temporal attributes are attached via `apply_temporal`.
    """

    n_users: int
    n_items: int
    edge_user: np.ndarray  # (E,) destination-side user id per canonical edge
    edge_item: np.ndarray  # (E,) global item id per canonical edge
    edge_ts: np.ndarray  # (E,) unix timestamp
    ui_indptr: np.ndarray  # (n_users+1,) canonical edges grouped by user
    iu_indptr: np.ndarray  # (n_items+1,) edges grouped by item
    iu_edge: np.ndarray  # (E,) canonical edge index in item-grouped order
    edge_step: np.ndarray | None = None
    edge_time_norm: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return self.n_users + self.n_items

    @property
    def n_edges(self) -> int:
        return int(self.edge_user.shape[0])

    @property
    def edge_item_local(self) -> np.ndarray:
        return self.edge_item - self.n_users

    def user_degrees(self) -> np.ndarray:
        return np.diff(self.ui_indptr)

    def item_degrees(self) -> np.ndarray:
        return np.diff(self.iu_indptr)

    def node_degrees(self) -> np.ndarray:
        return np.concatenate([self.user_degrees(), self.item_degrees()])

    def user_items(self, user: int) -> np.ndarray:
        """Global item ids interacted by `user`, ascending."""
        return self.edge_item[self.ui_indptr[user] : self.ui_indptr[user + 1]]

    def item_users(self, item_local: int) -> np.ndarray:
        """User ids that interacted with local item `item_local`, ascending."""
        sel = self.iu_edge[self.iu_indptr[item_local] : self.iu_indptr[item_local + 1]]
        return self.edge_user[sel]

    def undirected_edges(self) -> set[tuple[int, int]]:
        return set(zip(self.edge_user.tolist(), self.edge_item.tolist()))

    def interactions(self) -> list[Interaction]:
        return [
            Interaction(int(u), int(i), int(t))
            for u, i, t in zip(self.edge_user, self.edge_item, self.edge_ts)
        ]


def build_graph(
    edges: Sequence[Interaction], n_users: int, n_items: int
) -> InteractionGraph:
    """Build the CSR graph for an edge set in global id space.

    Duplicate (user, item) pairs collapse into one edge keeping the latest
    timestamp. An empty edge list yields a valid graph with zero edges.
    """
    user, item, ts = interactions_to_arrays(edges)
    if user.size:
        if user.min() < 0 or user.max() >= n_users:
            raise ValueError("user id outside [0, n_users)")
        if item.min() < n_users or item.max() >= n_users + n_items:
            raise ValueError("item id outside [n_users, n_users + n_items)")
        # sort by (user, item, ts); the last row of each (user, item) group
        # carries the latest timestamp
        order = np.lexsort((ts, item, user))
        user, item, ts = user[order], item[order], ts[order]
        keep = np.ones(user.size, dtype=bool)
        same = (user[1:] == user[:-1]) & (item[1:] == item[:-1])
        keep[:-1][same] = False
        user, item, ts = user[keep], item[keep], ts[keep]

    item_local = item - n_users
    ui_counts = np.bincount(user, minlength=n_users) if user.size else np.zeros(n_users, dtype=np.int64)
    iu_counts = np.bincount(item_local, minlength=n_items) if user.size else np.zeros(n_items, dtype=np.int64)
    ui_indptr = np.concatenate([[0], np.cumsum(ui_counts)]).astype(np.int64)
    iu_indptr = np.concatenate([[0], np.cumsum(iu_counts)]).astype(np.int64)
    iu_edge = np.lexsort((user, item_local)).astype(np.int64)
    return InteractionGraph(
        n_users=n_users,
        n_items=n_items,
        edge_user=user,
        edge_item=item,
        edge_ts=ts,
        ui_indptr=ui_indptr,
        iu_indptr=iu_indptr,
        iu_edge=iu_edge,
    )


def relative_timesteps(graph: InteractionGraph, tau: float) -> np.ndarray:
    """Per-edge relative timestep: floor((ts - min ts over edges) / tau)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if graph.n_edges == 0:
        return np.empty(0, dtype=np.int64)
    offset = graph.edge_ts - graph.edge_ts.min()
    return np.floor(offset / float(tau)).astype(np.int64)


def normalize_times(steps: np.ndarray) -> np.ndarray:
    """Min-max normalize timesteps into [0, 1]; all-equal steps map to 0."""
    if steps.size == 0:
        raise ValueError("no timesteps to normalize")
    lo, hi = steps.min(), steps.max()
    if hi == lo:
        return np.zeros(steps.shape, dtype=np.float64)
    return (steps - lo) / float(hi - lo)


def apply_temporal(graph: InteractionGraph, tau: float) -> InteractionGraph:
    """Return a copy of `graph` with timestep and normalized-time attributes."""
    if graph.n_edges == 0:
        empty_i = np.empty(0, dtype=np.int64)
        empty_f = np.empty(0, dtype=np.float64)
        return dataclasses.replace(graph, edge_step=empty_i, edge_time_norm=empty_f)
    steps = relative_timesteps(graph, tau)
    return dataclasses.replace(
        graph, edge_step=steps, edge_time_norm=normalize_times(steps)
    )


@dataclass(frozen=True)
class SnapshotSeries:
    """Pre-training graph plus ordered time-slot snapshots, in global id space.

    Snapshot n (1-based) holds the edges with timestamp in
    [boundaries[n-1] - granularity, boundaries[n-1]); the pre-training graph
    holds everything before `pretrain_end`. A trailing partial slot is kept.
    """

    vocab: Vocabulary
    pretrain: InteractionGraph
    snapshots: tuple[tuple[Interaction, ...], ...]
    pretrain_end: int
    boundaries: tuple[int, ...]

    @property
    def n_users(self) -> int:
        return self.vocab.n_users

    @property
    def n_items(self) -> int:
        return self.vocab.n_items

    @property
    def n_snapshots(self) -> int:
        return len(self.snapshots)

    def manifest(self) -> dict:
        """Segmentation summary written next to run outputs for reproducibility."""
        return {
            "n_users": self.n_users,
            "n_items": self.n_items,
            "pretrain_end": int(self.pretrain_end),
            "pretrain_edges": self.pretrain.n_edges,
            "boundaries": [int(b) for b in self.boundaries],
            "edge_counts": [len(s) for s in self.snapshots],
        }


def segment_snapshots(
    interactions: Sequence[Interaction], pretrain_span: int, granularity: int
) -> SnapshotSeries:
    """Split raw interactions into a pre-training graph and fixed-width snapshots.

    The vocabulary is built over the full log up front, so nodes that only
    appear in later snapshots still get embedding rows from the start. Edges
    with ts < min_ts + pretrain_span form the pre-training graph; the rest
    fall into consecutive buckets of width `granularity` (empty middle
    buckets are kept as empty snapshots).
    """
    if not interactions:
        raise ValueError("no interactions to segment")
    if pretrain_span <= 0 or granularity <= 0:
        raise ValueError("pretrain_span and granularity must be positive")
    vocab = Vocabulary.from_interactions(interactions)
    encoded = vocab.encode(interactions)
    ts = np.array([x.ts_unix for x in encoded], dtype=np.int64)
    pretrain_end = int(ts.min()) + int(pretrain_span)

    pretrain_edges = [x for x in encoded if x.ts_unix < pretrain_end]
    rest = [x for x in encoded if x.ts_unix >= pretrain_end]
    if not rest:
        raise ValueError("no snapshots remain: pre-training span consumes all data")

    n_buckets = int((max(x.ts_unix for x in rest) - pretrain_end) // granularity) + 1
    buckets: list[list[Interaction]] = [[] for _ in range(n_buckets)]
    for x in rest:
        buckets[(x.ts_unix - pretrain_end) // granularity].append(x)
    boundaries = tuple(
        pretrain_end + (k + 1) * int(granularity) for k in range(n_buckets)
    )
    return SnapshotSeries(
        vocab=vocab,
        pretrain=build_graph(pretrain_edges, vocab.n_users, vocab.n_items),
        snapshots=tuple(tuple(b) for b in buckets),
        pretrain_end=pretrain_end,
        boundaries=boundaries,
    )
