"""Synthetic log generators: planted blocks, drifting preferences, user splits."""
from __future__ import annotations

import numpy as np
import pytest

from dynrec.data import load_interactions
from dynrec.synthetic import (
    DAY_SECONDS,
    drift_series,
    planted_blocks,
    split_by_user,
    write_tsv,
)


def test_planted_blocks_confines_users_to_their_block():
    log = planted_blocks(n_users=20, n_items=40, n_blocks=4, per_user=5, seed=0)
    assert len(log) == 100
    for x in log:
        block = x.user // 5
        assert block * 10 <= x.item < (block + 1) * 10
        assert 0 <= x.ts_unix < 5 * DAY_SECONDS
    # per-user items are distinct
    for user in range(20):
        items = [x.item for x in log if x.user == user]
        assert len(items) == len(set(items)) == 5


def test_planted_blocks_caps_per_user_at_block_size():
    log = planted_blocks(n_users=4, n_items=8, n_blocks=4, per_user=10, seed=1)
    assert len(log) == 4 * 2  # only 2 items per block exist


def test_planted_blocks_requires_divisible_counts():
    with pytest.raises(ValueError):
        planted_blocks(n_users=10, n_items=9, n_blocks=4, per_user=2, seed=0)


def test_planted_blocks_is_seeded():
    a = planted_blocks(20, 40, 4, 5, seed=2)
    b = planted_blocks(20, 40, 4, 5, seed=2)
    c = planted_blocks(20, 40, 4, 5, seed=3)
    assert a == b and a != c


def test_split_by_user_is_leakage_free_and_sized():
    log = planted_blocks(20, 40, 4, 5, seed=0)
    train, test = split_by_user(log, 0.4, seed=0)
    assert sorted(train + test, key=lambda x: (x.user, x.item, x.ts_unix)) == sorted(
        log, key=lambda x: (x.user, x.item, x.ts_unix)
    )
    for user in range(20):
        held = [x for x in test if x.user == user]
        kept = [x for x in train if x.user == user]
        assert len(kept) >= 1
        assert len(held) == min(4, max(1, int(5 * 0.4)))


def test_split_by_user_rejects_degenerate_fraction():
    with pytest.raises(ValueError):
        split_by_user([], 0.0, seed=0)


def test_drift_series_bimodal_day_structure():
    log = drift_series(
        n_blocks=4,
        users_per_block=3,
        items_per_block=5,
        pretrain_days=1,
        snapshot_days=2,
        stale_per_day=2,
        lead_per_day=1,
        seed=0,
    )
    n_users = 12
    assert len(log) == n_users * 3 * 3  # users * days * edges-per-day
    for x in log:
        day = x.ts_unix // DAY_SECONDS
        frac = (x.ts_unix - day * DAY_SECONDS) / DAY_SECONDS
        block = x.user // 3
        item_block = x.item // 5
        if frac < 0.30:
            assert item_block == (block + day) % 4  # early edges: today's block
        else:
            assert frac >= 0.85
            assert item_block == (block + day + 1) % 4  # late edges: tomorrow's


def test_drift_series_is_seeded():
    a = drift_series(n_blocks=2, users_per_block=2, items_per_block=3, pretrain_days=1, snapshot_days=1, seed=5)
    b = drift_series(n_blocks=2, users_per_block=2, items_per_block=3, pretrain_days=1, snapshot_days=1, seed=5)
    c = drift_series(n_blocks=2, users_per_block=2, items_per_block=3, pretrain_days=1, snapshot_days=1, seed=6)
    assert a == b and a != c


def test_write_tsv_round_trips(tmp_path):
    log = planted_blocks(8, 8, 2, 2, seed=0)
    path = tmp_path / "log.tsv"
    write_tsv(str(path), log)
    loaded, vocab = load_interactions(str(path))
    assert loaded == log
    assert vocab.n_users == 8
