"""Ingestion, id remapping, graph construction and snapshot segmentation."""
from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynrec.data import (
    Interaction,
    Vocabulary,
    apply_temporal,
    build_graph,
    ingest_interactions,
    interactions_to_arrays,
    load_interactions,
    normalize_times,
    relative_timesteps,
    segment_snapshots,
)

interaction_lists = st.lists(
    st.tuples(
        st.integers(0, 6), st.integers(0, 6), st.integers(0, 1000)
    ).map(lambda t: Interaction(*t)),
    min_size=1,
    max_size=40,
)


# -- parsing ---------------------------------------------------------------


def test_ingest_parses_tab_separated_lines_in_order():
    text = "5\t9\t100\n2\t9\t50\n5\t7\t200\n"
    interactions, vocab = ingest_interactions(io.StringIO(text))
    assert interactions == [
        Interaction(5, 9, 100),
        Interaction(2, 9, 50),
        Interaction(5, 7, 200),
    ]
    # raw ids are remapped in sorted order: users {2, 5}, items {7, 9}
    assert vocab.user_index == {2: 0, 5: 1}
    assert vocab.item_index == {7: 2, 9: 3}
    assert vocab.n_users == 2 and vocab.n_items == 2 and vocab.n_nodes == 4


def test_ingest_accepts_bytes_and_skips_blank_lines():
    raw = io.BytesIO(b"1\t2\t3\n\n   \n4\t5\t6\n")
    interactions, _ = ingest_interactions(raw)
    assert len(interactions) == 2


def test_ingest_empty_input_yields_empty_log():
    interactions, vocab = ingest_interactions(io.StringIO(""))
    assert interactions == [] and vocab.n_nodes == 0


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("1\t2\t3\n1\t2\n", 2),
        ("1\t2\t3\t4\n", 1),
        ("1\t2\t3\nx\t2\t3\n", 2),
        ("1\t2\t-3\n", 1),
        ("1 2 3\n", 1),
    ],
)
def test_ingest_rejects_malformed_lines_with_line_number(text, lineno):
    with pytest.raises(ValueError, match=f"line {lineno}"):
        ingest_interactions(io.StringIO(text))


def test_load_interactions_round_trips_a_file(tmp_path):
    path = tmp_path / "log.tsv"
    path.write_text("0\t1\t10\n1\t1\t20\n")
    interactions, vocab = load_interactions(str(path))
    assert len(interactions) == 2 and vocab.n_users == 2 and vocab.n_items == 1


def test_vocabulary_encode_maps_into_global_id_space():
    log = [Interaction(10, 100, 1), Interaction(20, 200, 2)]
    vocab = Vocabulary.from_interactions(log)
    encoded = vocab.encode(log)
    assert [x.user for x in encoded] == [0, 1]
    assert [x.item for x in encoded] == [2, 3]  # items offset by n_users
    assert [x.ts_unix for x in encoded] == [1, 2]


def test_interactions_to_arrays_handles_empty():
    u, i, t = interactions_to_arrays([])
    assert u.size == i.size == t.size == 0
    assert u.dtype == np.int64


# -- graph construction ----------------------------------------------------


def test_build_graph_sorts_edges_canonically():
    edges = [Interaction(1, 3, 5), Interaction(0, 4, 1), Interaction(0, 2, 9)]
    g = build_graph(edges, n_users=2, n_items=3)
    assert g.edge_user.tolist() == [0, 0, 1]
    assert g.edge_item.tolist() == [2, 4, 3]
    assert g.edge_ts.tolist() == [9, 1, 5]


def test_build_graph_collapses_duplicates_keeping_latest_timestamp():
    edges = [
        Interaction(0, 1, 50),
        Interaction(0, 1, 99),
        Interaction(0, 1, 10),
    ]
    g = build_graph(edges, n_users=1, n_items=1)
    assert g.n_edges == 1
    assert g.edge_ts.tolist() == [99]


def test_build_graph_neighbor_queries():
    edges = [
        Interaction(0, 2, 1),
        Interaction(0, 3, 2),
        Interaction(1, 3, 3),
    ]
    g = build_graph(edges, n_users=2, n_items=2)
    assert g.user_items(0).tolist() == [2, 3]
    assert g.user_items(1).tolist() == [3]
    assert g.item_users(0).tolist() == [0]
    assert g.item_users(1).tolist() == [0, 1]
    assert g.user_degrees().tolist() == [2, 1]
    assert g.item_degrees().tolist() == [1, 2]
    assert g.node_degrees().tolist() == [2, 1, 1, 2]


def test_build_graph_rejects_out_of_range_ids():
    with pytest.raises(ValueError, match="user id"):
        build_graph([Interaction(3, 3, 0)], n_users=2, n_items=2)
    with pytest.raises(ValueError, match="item id"):
        build_graph([Interaction(0, 1, 0)], n_users=2, n_items=2)


def test_build_graph_empty_edge_list():
    g = build_graph([], n_users=3, n_items=2)
    assert g.n_edges == 0
    assert g.ui_indptr.tolist() == [0, 0, 0, 0]
    assert g.iu_indptr.tolist() == [0, 0, 0]


@given(interaction_lists)
def test_graph_invariants(raw):
    vocab = Vocabulary.from_interactions(raw)
    g = build_graph(vocab.encode(raw), vocab.n_users, vocab.n_items)
    # one edge per distinct (user, item) pair
    assert g.n_edges == len({(x.user, x.item) for x in raw})
    # indptrs are monotone and bound the edge array
    assert np.all(np.diff(g.ui_indptr) >= 0) and g.ui_indptr[-1] == g.n_edges
    assert np.all(np.diff(g.iu_indptr) >= 0) and g.iu_indptr[-1] == g.n_edges
    # both degree views count every edge once
    assert int(g.user_degrees().sum()) == g.n_edges
    assert int(g.item_degrees().sum()) == g.n_edges
    # the item-grouped view is a permutation of the canonical edges
    assert sorted(g.iu_edge.tolist()) == list(range(g.n_edges))
    for item_local in range(g.n_items):
        users = g.item_users(item_local)
        assert users.tolist() == sorted(users.tolist())


@given(interaction_lists)
def test_graph_keeps_latest_timestamp_per_pair(raw):
    vocab = Vocabulary.from_interactions(raw)
    g = build_graph(vocab.encode(raw), vocab.n_users, vocab.n_items)
    latest: dict[tuple[int, int], int] = {}
    for x in vocab.encode(raw):
        key = (x.user, x.item)
        latest[key] = max(latest.get(key, -1), x.ts_unix)
    got = {
        (int(u), int(i)): int(t)
        for u, i, t in zip(g.edge_user, g.edge_item, g.edge_ts)
    }
    assert got == latest


# -- temporal attributes ---------------------------------------------------


def test_relative_timesteps_floor_formula():
    g = build_graph(
        [Interaction(0, 1, 100), Interaction(0, 2, 130), Interaction(0, 3, 260)],
        n_users=1,
        n_items=3,
    )
    assert relative_timesteps(g, 60.0).tolist() == [0, 0, 2]
    assert relative_timesteps(g, 1000.0).tolist() == [0, 0, 0]


def test_relative_timesteps_requires_positive_tau():
    g = build_graph([Interaction(0, 1, 0)], 1, 1)
    with pytest.raises(ValueError):
        relative_timesteps(g, 0.0)


def test_normalize_times_hand_case():
    assert normalize_times(np.array([0, 2, 5])).tolist() == [0.0, 0.4, 1.0]


def test_normalize_times_all_equal_and_empty():
    assert normalize_times(np.array([7, 7, 7])).tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        normalize_times(np.empty(0, dtype=np.int64))


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=50))
def test_normalize_times_range_and_extremes(steps):
    t = normalize_times(np.array(steps, dtype=np.int64))
    assert np.all(t >= 0.0) and np.all(t <= 1.0)
    if len(set(steps)) > 1:
        assert t[np.argmax(steps)] == 1.0 and t[np.argmin(steps)] == 0.0


def test_apply_temporal_attaches_attributes():
    g = build_graph([Interaction(0, 1, 0), Interaction(0, 2, 3600)], 1, 2)
    assert g.edge_step is None and g.edge_time_norm is None
    gt = apply_temporal(g, 3600.0)
    assert gt.edge_step.tolist() == [0, 1]
    assert gt.edge_time_norm.tolist() == [0.0, 1.0]
    # source graph untouched
    assert g.edge_step is None


def test_apply_temporal_empty_graph():
    gt = apply_temporal(build_graph([], 1, 1), 60.0)
    assert gt.edge_step.size == 0 and gt.edge_time_norm.size == 0


# -- segmentation ----------------------------------------------------------


def _log_at(stamps: list[int]) -> list[Interaction]:
    return [Interaction(k % 3, 100 + k % 4, ts) for k, ts in enumerate(stamps)]


def test_segment_snapshots_boundaries_and_buckets():
    # min ts 0, span 100 -> pretrain covers [0, 100); buckets of width 50
    log = _log_at([0, 10, 99, 100, 149, 150, 260])
    series = segment_snapshots(log, pretrain_span=100, granularity=50)
    assert series.pretrain_end == 100
    assert series.pretrain.n_edges == 3
    # last edge at 260 -> bucket floor((260-100)/50) = 3 -> 4 buckets
    assert series.n_snapshots == 4
    assert series.boundaries == (150, 200, 250, 300)
    # 100 and 149 share the first bucket, 150 opens the second, 260 the last
    assert [len(s) for s in series.snapshots] == [2, 1, 0, 1]


def test_segment_snapshots_vocabulary_covers_whole_log():
    log = [Interaction(0, 10, 0), Interaction(1, 11, 500)]
    series = segment_snapshots(log, pretrain_span=100, granularity=100)
    # user 1 / item 11 appear only after the pre-training span but still get ids
    assert series.n_users == 2 and series.n_items == 2
    assert series.pretrain.n_edges == 1


def test_segment_snapshots_manifest_summary():
    log = _log_at([0, 10, 99, 100, 149, 150, 260])
    series = segment_snapshots(log, 100, 50)
    m = series.manifest()
    assert m["pretrain_end"] == 100
    assert m["boundaries"] == [150, 200, 250, 300]
    assert m["edge_counts"] == [2, 1, 0, 1]
    assert m["pretrain_edges"] == 3


def test_segment_snapshots_errors():
    with pytest.raises(ValueError, match="no interactions"):
        segment_snapshots([], 10, 10)
    with pytest.raises(ValueError, match="no snapshots remain"):
        segment_snapshots([Interaction(0, 1, 5)], pretrain_span=10, granularity=10)
    with pytest.raises(ValueError, match="positive"):
        segment_snapshots([Interaction(0, 1, 5)], pretrain_span=0, granularity=10)


@given(
    st.lists(st.integers(0, 5000), min_size=2, max_size=60),
    st.integers(1, 2000),
    st.integers(1, 1000),
)
def test_segment_snapshots_partition(stamps, span, gran):
    log = _log_at(stamps)
    lo = min(stamps)
    if max(stamps) < lo + span:
        with pytest.raises(ValueError):
            segment_snapshots(log, span, gran)
        return
    series = segment_snapshots(log, span, gran)
    # every edge lands in exactly one piece
    total = series.pretrain.n_edges + sum(len(s) for s in series.snapshots)
    distinct = len({(x.user, x.item) for x in series.pretrain.interactions()})
    assert series.pretrain.n_edges == distinct  # pretrain graph deduplicates
    raw_pretrain = sum(1 for ts in stamps if ts < lo + span)
    assert sum(len(s) for s in series.snapshots) == len(stamps) - raw_pretrain
    assert total <= len(stamps)
    # snapshot k holds edges in [boundary_k - gran, boundary_k)
    for bound, snap in zip(series.boundaries, series.snapshots):
        for edge in snap:
            assert bound - gran <= edge.ts_unix < bound
