from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from behavior_manifold.features.functionals import FrameSequence
from behavior_manifold.sampling import (
    SamplerConfig,
    file_seed,
    format_manifest,
    parse_manifest,
    sample_context_pairs,
    sample_split_tuples,
    sample_triplet_tuples,
)


def seq(n, sid="f0", dim=3):
    return FrameSequence(np.zeros((n, dim)), sid)


def corpus(n_files, n_frames=100):
    return [seq(n_frames, f"f{i:02d}") for i in range(n_files)]


def test_dense_anchoring_counts_and_bounds():
    pairs = sample_context_pairs(seq(100), SamplerConfig(seed=3))
    assert len(pairs) == 400
    assert all(1 <= abs(p.i - p.j) <= 6 for p in pairs)
    by_anchor = Counter(p.i for p in pairs)
    assert set(by_anchor.values()) == {4}
    for a in range(100):
        js = [p.j for p in pairs if p.i == a]
        assert len(set(js)) == 4, "neighbors are drawn without replacement"


def test_edge_anchor_clipped():
    cfg = SamplerConfig(seed=0)
    seen = set()
    for s in range(50):
        pairs = sample_context_pairs(seq(100), SamplerConfig(seed=s))
        seen |= {p.j for p in pairs if p.i == 0}
    assert seen == {1, 2, 3, 4, 5, 6}
    last = {p.j for p in sample_context_pairs(seq(100), cfg) if p.i == 99}
    assert last <= set(range(93, 99))


def test_neighbor_choice_is_uniform():
    counts = Counter()
    for s in range(300):
        counts.update(p.j - p.i for p in sample_context_pairs(seq(40), SamplerConfig(seed=s))
                      if 10 <= p.i < 30)
    offsets = [-6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6]
    observed = [counts[o] for o in offsets]
    assert stats.chisquare(observed).pvalue > 1e-3


def test_k_in_frames_follows_shift():
    assert SamplerConfig(k_seconds=6, shift_s=1.0).k_frames == 6
    assert SamplerConfig(k_seconds=6, shift_s=2.0).k_frames == 3
    pairs = sample_context_pairs(seq(50), SamplerConfig(k_seconds=6, shift_s=2.0, n_context=2))
    assert all(1 <= abs(p.i - p.j) <= 3 for p in pairs)


def test_short_sequence_skipped():
    skipped = []
    assert sample_context_pairs(seq(7), SamplerConfig(), skipped) == []
    assert skipped[0].source_id == "f0" and skipped[0].n_frames == 7
    assert len(sample_context_pairs(seq(8), SamplerConfig())) == 32


def test_context_pairs_deterministic():
    cfg = SamplerConfig(seed=11)
    assert sample_context_pairs(seq(100), cfg) == sample_context_pairs(seq(100), cfg)
    assert sample_context_pairs(seq(100), cfg) != sample_context_pairs(seq(100), SamplerConfig(seed=12))


def test_file_seed_depends_on_all_parts():
    assert file_seed(0, "a") == file_seed(0, "a")
    assert len({file_seed(0, "a"), file_seed(1, "a"), file_seed(0, "b"),
                file_seed(0, "a", "negative")}) == 4


def test_triplets_two_files():
    tuples = sample_triplet_tuples(corpus(2), SamplerConfig(seed=1))
    assert len(tuples) == 2 * 400
    for t in tuples:
        assert t.a_id != t.b_id
        assert 1 <= abs(t.a - t.p) <= 6
        assert 1 <= abs(t.n - t.n_p) <= 6
        assert 0 <= t.n < 100 and 0 <= t.n_p < 100


def test_triplets_follow_context_pairs():
    files = corpus(3)
    cfg = SamplerConfig(seed=5)
    tuples = sample_triplet_tuples(files, cfg)
    pairs = [p for f in files for p in sample_context_pairs(f, cfg)]
    assert [(t.a_id, t.a, t.p) for t in tuples] == [(p.source_id, p.i, p.j) for p in pairs]


def test_negative_file_uniform():
    # 10 files x 1000 anchors x 1 context = 10k draws
    files = corpus(10, n_frames=1000)
    tuples = sample_triplet_tuples(files, SamplerConfig(seed=7, n_context=1))
    assert len(tuples) == 10_000
    counts = Counter(t.b_id for t in tuples)
    n, p = len(tuples), 1 / 10
    sigma = np.sqrt(n * p * (1 - p))
    assert all(abs(counts[f.source_id] - n * p) <= 3 * sigma for f in files)
    # per anchor file the nine other files are equally likely
    for f in files:
        own = Counter(t.b_id for t in tuples if t.a_id == f.source_id)
        assert f.source_id not in own
        assert stats.chisquare(list(own.values())).pvalue > 1e-4


def test_single_file_rejected():
    with pytest.raises(ValueError, match="requires >=2 sources"):
        sample_triplet_tuples(corpus(1), SamplerConfig())


def test_triplets_independent_of_corpus_order():
    files = corpus(4)
    cfg = SamplerConfig(seed=9)
    fwd = sample_triplet_tuples(files, cfg)
    rev = sample_triplet_tuples(files[::-1], cfg)
    assert sorted(fwd) == sorted(rev)


def test_split_sampling_never_crosses():
    files = corpus(5)
    tuples = sample_split_tuples(files, SamplerConfig(), val_ids={"f03", "f04"})
    for t in tuples:
        assert (t.a_id in {"f03", "f04"}) == (t.b_id in {"f03", "f04"})


def test_manifest_round_trip_and_bytes():
    cfg = SamplerConfig(seed=2)
    tuples = sample_triplet_tuples(corpus(3), cfg)
    text = format_manifest(tuples)
    assert parse_manifest(text) == tuples
    assert text.splitlines()[0].count(" ") == 5
    assert format_manifest(sample_triplet_tuples(corpus(3), cfg)).encode() == text.encode()
    with pytest.raises(ValueError):
        parse_manifest("a 1 2 b 3\n")


@settings(max_examples=30, deadline=None)
@given(n=st.integers(8, 60), k=st.integers(1, 8), n_context=st.integers(1, 6), seed=st.integers(0, 2**32))
def test_stationarity_bound_property(n, k, n_context, seed):
    cfg = SamplerConfig(k_seconds=k, n_context=n_context, seed=seed)
    files = [seq(n, "a"), seq(n + 3, "b")]
    if n <= k + 1:
        with pytest.raises(ValueError):
            sample_triplet_tuples(files[:1] + [seq(n, "c")], cfg)
        return
    for t in sample_triplet_tuples(files, cfg):
        assert 1 <= abs(t.a - t.p) <= k and 1 <= abs(t.n - t.n_p) <= k
        assert t.a_id != t.b_id
