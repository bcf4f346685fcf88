"""Label-aware evaluation of frozen frame representations.

Nearest neighbors are found by exhaustive scan in float64. A BLAS Gram
expansion ranks candidates quickly; every candidate within a rounding margin
of the best is then re-measured by explicit differences, so the winner is the
exact Euclidean argmin, with ties going to the lowest reference index.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

CHUNK = 512


@dataclass
class SessionRecord:
    session_id: str
    group_id: str
    frames: np.ndarray
    labels: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.group_id:
            raise ValueError(f"session {self.session_id}: empty group_id")
        for code, value in self.labels.items():
            if value not in (0, 1):
                raise ValueError(f"session {self.session_id}: label {code}={value} is not binary")


@dataclass
class FoldPlan:
    folds: list[tuple[str, list[str]]]

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


@dataclass
class SessionPrediction:
    session_id: str
    group_id: str
    truth: int
    predicted: int
    votes_positive: int
    votes_total: int


@dataclass
class ClassificationResult:
    code: str
    predictions: list[SessionPrediction]

    @property
    def accuracy(self) -> float:
        return float(np.mean([p.truth == p.predicted for p in self.predictions]))


def _sq_norms(x):
    return np.einsum("ij,ij->i", x, x)


def nearest_neighbors(queries, refs, k: int = 1, mask: np.ndarray | None = None) -> np.ndarray:
    """Indices of the ``k`` Euclidean-nearest references per query (ascending).

    ``mask`` (n_queries, n_refs), True marks references a query may not use.
    Equal distances resolve toward the lower reference index.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    refs = np.atleast_2d(np.asarray(refs, dtype=np.float64))
    if refs.shape[0] == 0:
        raise ValueError("empty reference set")
    if queries.shape[1] != refs.shape[1]:
        raise ValueError("query and reference dimensions differ")
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    ref_norms = _sq_norms(refs)
    for start in range(0, queries.shape[0], CHUNK):
        q = queries[start:start + CHUNK]
        d2 = _sq_norms(q)[:, None] + ref_norms[None, :] - 2.0 * (q @ refs.T)
        if mask is not None:
            d2 = np.where(mask[start:start + CHUNK], np.inf, d2)
        for row in range(q.shape[0]):
            out[start + row] = _exact_topk(q[row], refs, d2[row], k)
    return out


def _exact_topk(q, refs, approx, k):
    n_valid = int(np.isfinite(approx).sum())
    if n_valid < k:
        raise ValueError(f"only {n_valid} usable references, need {k}")
    scale = np.abs(approx[np.isfinite(approx)]).max() if n_valid else 0.0
    slack = 1e-9 * (scale + float(q @ q)) + 1e-12
    kth = np.partition(approx, k - 1)[k - 1]
    cand = np.flatnonzero(approx <= kth + slack)
    diff = refs[cand] - q
    exact = np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((cand, exact))
    return cand[order[:k]]


def knn_label(query, ref_vectors, ref_labels, k: int = 1) -> int:
    """Majority label among the ``k`` nearest references (k=1: nearest's label)."""
    ref_labels = np.asarray(ref_labels)
    if ref_labels.size == 0:
        raise ValueError("empty reference set")
    idx = nearest_neighbors(query, ref_vectors, k)[0]
    values, counts = np.unique(ref_labels[idx], return_counts=True)
    return values[np.argmax(counts)].item()


def make_fold_plan(sessions: Sequence[SessionRecord]) -> FoldPlan:
    groups = sorted({s.group_id for s in sessions})
    return FoldPlan([(g, [h for h in groups if h != g]) for g in groups])


def balanced_subset(sessions, code: str, n_per_class: int, seed: int = 0) -> list[SessionRecord]:
    """Up to ``n_per_class`` sessions of each label for ``code`` (input order kept)."""
    rng = np.random.default_rng(seed)
    keep = set()
    for value in (0, 1):
        idx = [i for i, s in enumerate(sessions) if s.labels.get(code) == value]
        if len(idx) > n_per_class:
            idx = rng.choice(idx, size=n_per_class, replace=False).tolist()
        keep.update(idx)
    return [s for i, s in enumerate(sessions) if i in keep]


def _stack(sessions, embedder):
    blocks = [np.asarray(embedder(s.frames) if embedder else s.frames, dtype=np.float64)
              for s in sessions]
    owner = np.concatenate([np.full(b.shape[0], i) for i, b in enumerate(blocks)])
    return np.vstack(blocks), owner


def classify_sessions(sessions: Sequence[SessionRecord], code: str,
                      embedder: Callable | None = None, plan: FoldPlan | None = None
                      ) -> ClassificationResult:
    """Leave-one-group-out 1-NN frame labeling with session majority vote.

    Each frame of a held-out session takes the label of its nearest frame among
    sessions of the fold's reference groups. An exact vote tie predicts 1.
    """
    missing = [s.session_id for s in sessions if code not in s.labels]
    if missing:
        raise ValueError(f"sessions without label for {code}: {missing[:5]}")
    plan = plan or make_fold_plan(sessions)
    covered = {g for g, _ in plan}
    if not {s.group_id for s in sessions} <= covered:
        raise ValueError("fold plan does not cover every group")
    vectors, owner = _stack(sessions, embedder)
    frame_labels = np.array([sessions[i].labels[code] for i in owner])
    group_of = np.array([s.group_id for s in sessions])
    predictions = {}
    for held_out, ref_groups in plan:
        if held_out in ref_groups:
            raise ValueError(f"group {held_out} is in its own reference set")
        ref_idx = np.flatnonzero(np.isin(group_of[owner], ref_groups))
        if ref_idx.size == 0:
            raise ValueError(f"fold {held_out}: empty reference set")
        for si in np.flatnonzero(group_of == held_out):
            q_idx = np.flatnonzero(owner == si)
            nn = ref_idx[nearest_neighbors(vectors[q_idx], vectors[ref_idx])[:, 0]]
            votes = frame_labels[nn]
            pos, total = int(votes.sum()), int(votes.size)
            s = sessions[si]
            predictions[si] = SessionPrediction(s.session_id, s.group_id, s.labels[code],
                                                int(2 * pos >= total), pos, total)
    return ClassificationResult(code, [predictions[i] for i in sorted(predictions)])


def mcnemar_counts(result_a: ClassificationResult, result_b: ClassificationResult) -> dict:
    """2x2 correctness contingency between two systems on the same sessions."""
    b = {p.session_id: p for p in result_b.predictions}
    counts = {"both_correct": 0, "a_only": 0, "b_only": 0, "both_wrong": 0}
    for pa in result_a.predictions:
        pb = b[pa.session_id]
        ca, cb = pa.predicted == pa.truth, pb.predicted == pb.truth
        key = "both_correct" if ca and cb else "a_only" if ca else "b_only" if cb else "both_wrong"
        counts[key] += 1
    return counts


def trajectory(session_frames, ref_vectors, ref_labels, n: int = 60) -> np.ndarray:
    """Per-frame fraction of positive labels among the top-``n`` nearest references."""
    ref_labels = np.asarray(ref_labels, dtype=np.float64)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > ref_labels.size:
        raise ValueError(f"N={n} exceeds the {ref_labels.size} available references")
    idx = nearest_neighbors(session_frames, ref_vectors, k=n)
    return ref_labels[idx].mean(axis=1)


def similarity_confusion(files: Sequence[np.ndarray]) -> np.ndarray:
    """Row i: where file i's frames find their nearest other-file frame.

    Entry (i, j) is the fraction of file i's frames whose nearest neighbor,
    searched over all frames of the other files, lies in file j.
    """
    if len(files) < 2:
        raise ValueError("need at least 2 files")
    if any(np.asarray(f).shape[0] == 0 for f in files):
        raise ValueError("empty file in similarity comparison")
    vectors = np.vstack([np.asarray(f, dtype=np.float64) for f in files])
    owner = np.concatenate([np.full(np.asarray(f).shape[0], i) for i, f in enumerate(files)])
    n = len(files)
    out = np.zeros((n, n))
    for i in range(n):
        q_idx = np.flatnonzero(owner == i)
        r_idx = np.flatnonzero(owner != i)
        nn = r_idx[nearest_neighbors(vectors[q_idx], vectors[r_idx])[:, 0]]
        out[i] = np.bincount(owner[nn], minlength=n) / q_idx.size
    return out


def read_labels_csv(text: str) -> tuple[dict[str, str], dict[str, dict[str, int]]]:
    """Parse ``session_id,group_id,code,label`` rows into (groups, labels)."""
    groups, labels = {}, {}
    reader = csv.DictReader(io.StringIO(text))
    needed = {"session_id", "group_id", "code", "label"}
    if not reader.fieldnames or not needed <= set(reader.fieldnames):
        raise ValueError(f"labels CSV needs header {sorted(needed)}")
    for row in reader:
        sid = row["session_id"]
        if groups.setdefault(sid, row["group_id"]) != row["group_id"]:
            raise ValueError(f"session {sid} assigned to two groups")
        value = int(row["label"])
        if value not in (0, 1):
            raise ValueError(f"non-binary label {value} for {sid}/{row['code']}")
        labels.setdefault(sid, {})[row["code"]] = value
    return groups, labels


def predictions_csv(results: Sequence[ClassificationResult]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["code", "session_id", "group_id", "truth", "predicted", "votes_positive", "votes_total"])
    for res in results:
        for p in res.predictions:
            w.writerow([res.code, p.session_id, p.group_id, p.truth, p.predicted,
                        p.votes_positive, p.votes_total])
    return out.getvalue()


def matrix_csv(matrix: np.ndarray, ids: Sequence[str]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["file_id", *ids])
    for sid, row in zip(ids, matrix):
        w.writerow([sid, *(repr(float(v)) for v in row)])
    return out.getvalue()
