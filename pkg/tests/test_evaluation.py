import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from behavior_manifold.evaluation import (
    SessionRecord,
    balanced_subset,
    classify_sessions,
    knn_label,
    make_fold_plan,
    matrix_csv,
    mcnemar_counts,
    nearest_neighbors,
    predictions_csv,
    read_labels_csv,
    similarity_confusion,
    trajectory,
)
from behavior_manifold.bench import session_records
from behavior_manifold.synth import SynthConfig, generate, state_means
from oracles import brute_nearest


# nearest neighbors

def test_knn_geometry():
    refs = np.array([[0.0, 0.0], [10.0, 10.0]])
    assert knn_label([1.0, 1.0], refs, [0, 1]) == 0
    assert knn_label([10.0, 10.0], refs, [0, 1]) == 1
    with pytest.raises(ValueError):
        knn_label([1.0, 1.0], np.empty((0, 2)), [])


def test_ties_go_to_lowest_index():
    refs = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    assert nearest_neighbors([0.0, 0.0], refs)[0, 0] == 0
    assert knn_label([0.0, 0.0], refs, [7, 3, 3, 3]) == 7
    np.testing.assert_array_equal(nearest_neighbors([0.0, 0.0], refs, k=3)[0], [0, 1, 2])


def test_one_nn_matches_exhaustive_scan():
    rng = np.random.default_rng(0)
    refs = rng.normal(size=(200, 8))
    queries = rng.normal(size=(1000, 8))
    got = nearest_neighbors(queries, refs)[:, 0]
    want = [brute_nearest(q, refs) for q in queries]
    np.testing.assert_array_equal(got, want)


def test_one_nn_exact_on_near_ties():
    # large offsets make the Gram expansion lose the small differences
    rng = np.random.default_rng(1)
    base = 1e4 + rng.integers(0, 3, size=(200, 4)).astype(float)
    refs = base + rng.choice([0.0, 1e-6], size=base.shape)
    queries = 1e4 + rng.integers(0, 3, size=(300, 4)).astype(float)
    got = nearest_neighbors(queries, refs)[:, 0]
    np.testing.assert_array_equal(got, [brute_nearest(q, refs) for q in queries])


def test_mask_excludes_references():
    refs = np.array([[0.0], [1.0], [5.0]])
    mask = np.array([[True, False, False]])
    assert nearest_neighbors([[0.0]], refs, mask=mask)[0, 0] == 1


# fold plans and session classification

def sessions_from(groups, labels, frames):
    return [SessionRecord(f"s{i}", g, f, {"c": l}) for i, (g, l, f) in enumerate(zip(groups, labels, frames))]


def test_fold_plan_hygiene():
    groups = ["a", "a", "b", "c", "c", "d"]
    sessions = sessions_from(groups, [0] * 6, [np.zeros((2, 1))] * 6)
    plan = make_fold_plan(sessions)
    assert sorted(h for h, _ in plan) == ["a", "b", "c", "d"]
    for held, refs in plan:
        assert held not in refs
        assert set(refs) | {held} == {"a", "b", "c", "d"}


def test_same_group_frames_never_used():
    x = np.random.default_rng(2).normal(size=(10, 3))
    sessions = sessions_from(["a", "a", "b"], [1, 1, 0], [x, x.copy(), x + 100.0])
    res = classify_sessions(sessions, "c")
    by_id = {p.session_id: p for p in res.predictions}
    assert by_id["s0"].predicted == 0 and by_id["s1"].predicted == 0
    assert by_id["s2"].predicted == 1


def test_all_positive_references():
    rng = np.random.default_rng(3)
    frames = [rng.normal(size=(5, 2)) for _ in range(6)]
    sessions = sessions_from(["a", "a", "b", "b", "c", "c"], [1] * 6, frames)
    res = classify_sessions(sessions, "c")
    assert all(p.predicted == 1 for p in res.predictions)
    assert res.accuracy == 1.0


def test_vote_tie_predicts_one():
    ref_pos, ref_neg = np.array([[0.0]]), np.array([[10.0]])
    query = np.array([[1.0], [9.0]])
    sessions = [SessionRecord("q", "a", query, {"c": 0}),
                SessionRecord("p", "b", ref_pos, {"c": 1}),
                SessionRecord("n", "c", ref_neg, {"c": 0})]
    q = classify_sessions(sessions, "c").predictions[0]
    assert (q.votes_positive, q.votes_total, q.predicted) == (1, 2, 1)


def test_missing_label_and_bad_plan():
    sessions = sessions_from(["a", "b"], [0, 1], [np.zeros((2, 1))] * 2)
    sessions[0].labels.clear()
    with pytest.raises(ValueError, match="without label"):
        classify_sessions(sessions, "c")
    with pytest.raises(ValueError):
        SessionRecord("x", "", np.zeros((1, 1)))
    with pytest.raises(ValueError):
        SessionRecord("x", "g", np.zeros((1, 1)), {"c": 2})


def test_single_group_has_empty_reference_set():
    sessions = sessions_from(["a", "a"], [0, 1], [np.zeros((2, 1))] * 2)
    with pytest.raises(ValueError, match="empty reference"):
        classify_sessions(sessions, "c")


def test_separable_states_classify_well():
    cfg = SynthConfig(n_files=12, file_duration_s=120.0, nuisance_strength=0.0, preference=1.0, seed=4)
    corpus = generate(cfg)
    sessions = session_records(corpus)
    for code in cfg.code_names:
        assert classify_sessions(sessions, code).accuracy >= 0.9


def test_embedder_is_applied():
    rng = np.random.default_rng(5)
    frames = [rng.normal(size=(4, 3)) for _ in range(4)]
    sessions = sessions_from(["a", "b", "c", "d"], [0, 1, 0, 1], frames)
    calls = []

    def emb(x):
        calls.append(x.shape)
        return x[:, :2]

    classify_sessions(sessions, "c", emb)
    assert calls == [(4, 3)] * 4


def test_mcnemar_counts():
    rng = np.random.default_rng(6)
    sessions = sessions_from(["a", "b", "c", "d"], [0, 1, 0, 1], [rng.normal(size=(3, 2)) for _ in range(4)])
    a = classify_sessions(sessions, "c")
    counts = mcnemar_counts(a, a)
    assert counts["a_only"] == counts["b_only"] == 0
    assert counts["both_correct"] + counts["both_wrong"] == 4


def test_balanced_subset():
    sessions = sessions_from(list("abcdefgh"), [1, 1, 1, 1, 1, 0, 0, 0], [np.zeros((1, 1))] * 8)
    sub = balanced_subset(sessions, "c", 2, seed=0)
    assert sorted(s.labels["c"] for s in sub) == [0, 0, 1, 1]
    assert sub == balanced_subset(sessions, "c", 2, seed=0)


# trajectories

def test_trajectory_constant_cases():
    rng = np.random.default_rng(7)
    refs, frames = rng.normal(size=(80, 3)), rng.normal(size=(25, 3))
    np.testing.assert_array_equal(trajectory(frames, refs, np.ones(80)), 1.0)
    labels = rng.integers(0, 2, size=80)
    np.testing.assert_allclose(trajectory(frames, refs, labels, n=80), labels.mean())
    with pytest.raises(ValueError):
        trajectory(frames, refs, labels, n=81)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_trajectory_bounds_and_monotone(seed, n):
    rng = np.random.default_rng(seed)
    refs, frames = rng.normal(size=(40, 2)), rng.normal(size=(15, 2))
    labels = rng.integers(0, 2, size=40)
    before = trajectory(frames, refs, labels, n=n)
    assert np.all((before >= 0) & (before <= 1))
    zeros = np.flatnonzero(labels == 0)
    if zeros.size:
        flipped = labels.copy()
        flipped[rng.choice(zeros)] = 1
        assert np.all(trajectory(frames, refs, flipped, n=n) >= before)


def test_trajectory_tracks_alternating_states():
    cfg = SynthConfig(n_files=6, file_duration_s=120.0, n_behavior_states=2, preference=1.0, seed=8)
    corpus = generate(cfg)
    refs = np.vstack([s.frames for s in corpus.sequences])
    labels = np.concatenate([np.full(len(s), corpus.labels[s.source_id]["code0"]) for s in corpus.sequences])
    assert 0 < labels.mean() < 1
    means = state_means(cfg)
    truth = (np.arange(240) // 40) % 2
    rng = np.random.default_rng(9)
    session = means[truth] + rng.normal(size=(240, cfg.dim))
    scores = trajectory(session, refs, labels, n=60)
    assert np.corrcoef(scores, truth)[0, 1] >= 0.7


# scenario similarity

def test_confusion_identical_files():
    x = np.random.default_rng(10).normal(size=(20, 4))
    np.testing.assert_array_equal(similarity_confusion([x, x.copy()]), [[0.0, 1.0], [1.0, 0.0]])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.sampled_from([0.5, 3.7, 1e3]))
def test_confusion_row_stochastic_and_scale_invariant(seed, n_files, scale):
    rng = np.random.default_rng(seed)
    files = [rng.normal(size=(int(rng.integers(1, 12)), 5)) for _ in range(n_files)]
    m = similarity_confusion(files)
    np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_array_equal(np.diag(m), 0.0)
    np.testing.assert_array_equal(similarity_confusion([scale * f for f in files]), m)


def test_confusion_within_generator_dominates():
    a = generate(SynthConfig(n_files=2, file_duration_s=100.0, seed=11, map_seed=1, nuisance_strength=0.3))
    b = generate(SynthConfig(n_files=1, file_duration_s=100.0, seed=12, map_seed=2, nuisance_strength=0.3))
    files = [a.sequences[0].frames, a.sequences[1].frames, b.sequences[0].frames]
    m = similarity_confusion(files)
    assert m[0, 1] > m[0, 2] and m[1, 0] > m[1, 2]


def test_confusion_errors():
    with pytest.raises(ValueError):
        similarity_confusion([np.zeros((3, 2))])
    with pytest.raises(ValueError):
        similarity_confusion([np.zeros((3, 2)), np.zeros((0, 2))])


# text formats

def test_labels_csv_parse():
    text = "session_id,group_id,code,label\ns1,g1,a,1\ns1,g1,b,0\ns2,g2,a,0\n"
    groups, labels = read_labels_csv(text)
    assert groups == {"s1": "g1", "s2": "g2"}
    assert labels == {"s1": {"a": 1, "b": 0}, "s2": {"a": 0}}
    with pytest.raises(ValueError):
        read_labels_csv("session_id,group_id,code,label\ns1,g1,a,2\n")
    with pytest.raises(ValueError):
        read_labels_csv("session_id,group_id,code,label\ns1,g1,a,1\ns1,g2,b,1\n")
    with pytest.raises(ValueError):
        read_labels_csv("id,label\n")


def test_output_csvs():
    sessions = sessions_from(["a", "b"], [0, 1], [np.zeros((2, 1)), np.ones((2, 1))])
    text = predictions_csv([classify_sessions(sessions, "c")])
    assert text.splitlines()[0] == "code,session_id,group_id,truth,predicted,votes_positive,votes_total"
    assert len(text.splitlines()) == 3
    m = matrix_csv(np.array([[0.0, 1.0], [1.0, 0.0]]), ["x", "y"])
    assert m.splitlines() == ["file_id,x,y", "x,0.0,1.0", "y,1.0,0.0"]
