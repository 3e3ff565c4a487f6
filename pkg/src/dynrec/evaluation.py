"""Top-K ranking evaluation: recall and normalized DCG over held-out edges.

Scores are dot products between a user's final embedding and item rows.
Items the user already interacted with during training are masked out of the
candidate set. Ties in score break toward the smaller item id so rankings
are deterministic. Users with no unseen relevant items are excluded from the
averages rather than counted as zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def rank_items(
    x: np.ndarray,
    user: int,
    mask: np.ndarray,
    k: int,
    n_users: int,
    candidates: np.ndarray | None = None,
) -> np.ndarray:
    """Top-`k` local item ids for `user` by descending score, ties to smaller id.

    `x` holds final embeddings over the global id space (users then items).
    `mask` is a boolean array over local item ids; masked items are removed
    from the candidate set before ranking. `candidates`, if given, restricts
    ranking to those local item ids (the mask still applies).
    """
    n_items = x.shape[0] - n_users
    if candidates is None:
        ids = np.flatnonzero(~mask)
    else:
        ids = candidates[~mask[candidates]]
    if ids.size == 0:
        return np.empty(0, dtype=np.int64)
    scores = x[n_users + ids] @ x[user]
    # primary key: score descending; secondary: item id ascending
    order = np.lexsort((ids, -scores))
    return ids[order[: min(k, ids.size)]].astype(np.int64)


def recall_at_k(ranked: np.ndarray, relevant: np.ndarray) -> float:
    """Fraction of the relevant set present in the ranked list."""
    if relevant.size == 0:
        raise ValueError("recall undefined for an empty relevant set")
    hits = np.intersect1d(ranked, relevant).size
    return hits / float(relevant.size)


def ndcg_at_k(ranked: np.ndarray, relevant: np.ndarray, k: int) -> float:
    """Binary-gain normalized DCG with the ideal over min(|relevant|, k)."""
    if relevant.size == 0:
        raise ValueError("ndcg undefined for an empty relevant set")
    rel = np.isin(ranked[:k], relevant)
    positions = np.flatnonzero(rel) + 1  # 1-based ranks of the hits
    dcg = float(np.sum(1.0 / np.log2(positions + 1.0)))
    ideal_n = min(relevant.size, k)
    idcg = float(np.sum(1.0 / np.log2(np.arange(1, ideal_n + 1) + 1.0)))
    return dcg / idcg


@dataclass
class MetricsReport:
    """Per-user metric table with aggregate views."""

    k: int
    users: list[int] = field(default_factory=list)
    recalls: list[float] = field(default_factory=list)
    ndcgs: list[float] = field(default_factory=list)

    def add(self, user: int, recall: float, ndcg: float) -> None:
        self.users.append(user)
        self.recalls.append(recall)
        self.ndcgs.append(ndcg)

    @property
    def n_users(self) -> int:
        return len(self.users)

    def mean_recall(self) -> float:
        return float(np.mean(self.recalls)) if self.recalls else 0.0

    def mean_ndcg(self) -> float:
        return float(np.mean(self.ndcgs)) if self.ndcgs else 0.0

    def subset(self, users: set[int]) -> "MetricsReport":
        sub = MetricsReport(k=self.k)
        for u, r, n in zip(self.users, self.recalls, self.ndcgs):
            if u in users:
                sub.add(u, r, n)
        return sub


def evaluate_users(
    x: np.ndarray,
    n_users: int,
    test_items: dict[int, np.ndarray],
    train_mask: dict[int, np.ndarray],
    k: int,
    candidates: np.ndarray | None = None,
) -> MetricsReport:
    """Rank and score every test user with a nonempty unseen relevant set.

    `test_items[u]` holds local relevant item ids, `train_mask[u]` a boolean
    mask of local items to hide. Relevant items that are also masked are
    dropped from the relevant set; users left with nothing relevant are
    skipped entirely.
    """
    report = MetricsReport(k=k)
    for user in sorted(test_items):
        mask = train_mask[user]
        relevant = test_items[user]
        relevant = relevant[~mask[relevant]]
        if relevant.size == 0:
            continue
        cand = candidates
        if cand is not None:
            # ensure relevant items are rankable even under sampled candidates
            cand = np.union1d(cand, relevant)
        ranked = rank_items(x, user, mask, k, n_users, cand)
        report.add(
            user,
            recall_at_k(ranked, relevant),
            ndcg_at_k(ranked, relevant, k),
        )
    return report


def split_tuned_untuned(
    test_users: set[int], finetune_users: set[int]
) -> tuple[set[int], set[int]]:
    """Partition test users by whether they had edges in the tuning snapshot."""
    tuned = test_users & finetune_users
    return tuned, test_users - tuned
