"""Embedding IO, ridge fits, fold hygiene, and evaluation metrics."""

from __future__ import annotations

import math

import numpy as np
import pytest

from dialrel import jsonl
from dialrel.classifier import (
    DimMismatch,
    DuplicateKey,
    EmbeddingTable,
    Malformed,
    MissingEmbedding,
    NoAnnotations,
    SingleDialogue,
    TrainRow,
    build_train_rows,
    cross_entropy,
    evaluate,
    fit_ridge_ovr,
    gold_distribution,
    load_embeddings,
    loco_folds,
    predict_distribution,
    ridge_solution,
    write_embeddings,
)
from dialrel.labels import LABEL_INDEX, LABELS, RelationLabel
from dialrel.pairs import PairType
from dialrel.store import Annotation
from synthcorpus import dummy_task

COMMENT = RelationLabel.COMMENT
ELAB = RelationLabel.ELABORATION
RESULT = RelationLabel.RESULT


def ann(task_id, annotator, labels, rejected=False):
    return Annotation(
        task_id=task_id,
        annotator_id=annotator,
        labels=frozenset(labels),
        rejected=rejected,
        timestamp="2000-01-01T00:00:00+00:00",
    )


def one_hot_target(label):
    return tuple(int(l is label) for l in LABELS)


# -- embedding file ------------------------------------------------------------


def test_load_embeddings_basic(tmp_path):
    path = tmp_path / "emb.jsonl"
    jsonl.write_records(
        path,
        [
            {"dim": 8},
            {"task_id": "t1", "vector": [0.5] * 8},
            {"task_id": "t2", "vector": list(range(8))},
            {"task_id": "t3", "vector": [1e-17] * 8},
        ],
    )
    table = load_embeddings(path)
    assert table.dim == 8
    assert set(table.entries) == {"t1", "t2", "t3"}


def test_load_embeddings_dim_mismatch(tmp_path):
    path = tmp_path / "emb.jsonl"
    jsonl.write_records(
        path,
        [
            {"task_id": "t1", "vector": [0.0] * 8},
            {"task_id": "t2", "vector": [0.0] * 16},
        ],
    )
    with pytest.raises(DimMismatch):
        load_embeddings(path)


def test_load_embeddings_duplicate_and_malformed(tmp_path):
    path = tmp_path / "emb.jsonl"
    jsonl.write_records(
        path,
        [{"task_id": "t1", "vector": [0.0]}, {"task_id": "t1", "vector": [1.0]}],
    )
    with pytest.raises(DuplicateKey):
        load_embeddings(path)
    jsonl.write_records(path, [{"task_id": "t1"}])
    with pytest.raises(Malformed):
        load_embeddings(path)
    jsonl.write_records(path, [{"dim": 4}])
    with pytest.raises(Malformed):
        load_embeddings(path)


def test_embeddings_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    table = EmbeddingTable(
        dim=16,
        entries={f"t{i}": rng.standard_normal(16) for i in range(20)},
    )
    path = tmp_path / "emb.jsonl"
    write_embeddings(path, table)
    loaded = load_embeddings(path)
    assert loaded.dim == 16
    for key, vector in table.entries.items():
        assert np.array_equal(loaded.entries[key], vector)


# -- folds -------------------------------------------------------------------------


def make_rows(n_dialogues, rows_per_dialogue, rng):
    rows = []
    for d in range(n_dialogues):
        for i in range(rows_per_dialogue):
            label = LABELS[int(rng.integers(0, len(LABELS)))]
            rows.append(
                TrainRow(
                    task_id=f"d{d}-t{i}",
                    dialogue_id=f"d{d}",
                    annotator_id=f"a{i % 3}",
                    target=one_hot_target(label),
                    pair_type=PairType.WITHIN_TURN,
                )
            )
    return rows


def test_loco_fold_structure():
    rng = np.random.default_rng(5)
    rows = make_rows(19, 6, rng)
    folds = loco_folds(rows)
    assert len(folds) == 19
    all_test = [r for _, test in folds for r in test]
    assert len(all_test) == len(rows)
    assert {id(r) for r in all_test} == {id(r) for r in rows}
    for train, test in folds:
        test_dialogues = {r.dialogue_id for r in test}
        assert len(test_dialogues) == 1
        assert test_dialogues.isdisjoint({r.dialogue_id for r in train})


def test_loco_two_dialogues_complementary():
    rng = np.random.default_rng(7)
    rows = make_rows(2, 4, rng)
    folds = loco_folds(rows)
    assert len(folds) == 2
    assert folds[0][0] == folds[1][1]
    assert folds[0][1] == folds[1][0]


def test_loco_single_dialogue_error():
    rng = np.random.default_rng(9)
    with pytest.raises(SingleDialogue):
        loco_folds(make_rows(1, 5, rng))


# -- ridge ---------------------------------------------------------------------------


def test_ridge_tiny_closed_form():
    X = np.array([[1.0], [1.0]])
    y = np.array([[1.0], [0.0]])
    w = ridge_solution(X, y, alpha=1.0)
    assert w[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_ridge_normal_equations_residual():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((60, 12))
    Y = rng.standard_normal((60, 4))
    for alpha in (0.1, 1.0, 10.0):
        W = ridge_solution(X, Y, alpha)
        residual = X.T @ X @ W + alpha * W - X.T @ Y
        assert float(np.max(np.abs(residual))) < 1e-6


def test_large_alpha_shrinks_to_base_rates():
    rng = np.random.default_rng(13)
    rows = make_rows(3, 40, rng)
    embeddings = EmbeddingTable(
        dim=6, entries={r.task_id: rng.standard_normal(6) for r in rows}
    )
    model = fit_ridge_ovr(rows, embeddings, alpha=1e9)
    feature_part = model.weights[:-1]
    assert float(np.max(np.abs(feature_part))) < 1e-4
    base_rates = np.mean([r.target for r in rows], axis=0)
    probe = predict_distribution(model, np.zeros(6))
    scores = model.scores(np.zeros(6))
    assert np.allclose(scores, base_rates, atol=1e-4)
    assert probe.argmax() == base_rates.argmax()


def test_separable_direction_sign():
    rng = np.random.default_rng(17)
    rows = []
    for i in range(200):
        x = rng.standard_normal()
        label = COMMENT if x > 0 else ELAB
        rows.append(
            TrainRow(
                task_id=f"t{i}",
                dialogue_id=f"d{i % 2}",
                annotator_id="a0",
                target=one_hot_target(label),
                pair_type=PairType.WITHIN_TURN,
            )
        )
        rows[-1] = rows[-1]
    embeddings = EmbeddingTable(
        dim=1,
        entries={
            r.task_id: np.array([1.0 if r.target[LABEL_INDEX[COMMENT]] else -1.0])
            for r in rows
        },
    )
    model = fit_ridge_ovr(rows, embeddings, alpha=0.5)
    assert model.weights[0, LABEL_INDEX[COMMENT]] > 0
    assert model.weights[0, LABEL_INDEX[ELAB]] < 0


def test_missing_embedding():
    rng = np.random.default_rng(19)
    rows = make_rows(2, 3, rng)
    embeddings = EmbeddingTable(dim=2, entries={})
    with pytest.raises(MissingEmbedding):
        fit_ridge_ovr(rows, embeddings, alpha=1.0)


# -- distributions ----------------------------------------------------------------


def test_predict_distribution_properties():
    model = LinearModelStub = None  # noqa: F841
    weights = np.zeros((4, len(LABELS)))
    from dialrel.classifier import LinearModel

    model = LinearModel(weights=weights, alpha=1.0)
    uniform = predict_distribution(model, np.zeros(3))
    assert np.allclose(uniform, 1.0 / len(LABELS))
    assert uniform.sum() == pytest.approx(1.0, abs=1e-9)

    rng = np.random.default_rng(23)
    weights = rng.standard_normal((4, len(LABELS)))
    model = LinearModel(weights=weights, alpha=1.0)
    vec = rng.standard_normal(3)
    probs = predict_distribution(model, vec)
    assert probs.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(probs > 0)
    # shift invariance of the softmax mapping
    shifted = LinearModel(weights=weights + np.array([[0.0]] * 3 + [[7.5]]), alpha=1.0)
    assert np.allclose(predict_distribution(shifted, vec), probs, atol=1e-12)
    # argmax follows the largest score
    scores = model.scores(vec)
    assert probs.argmax() == scores.argmax()


def test_predict_dim_mismatch():
    from dialrel.classifier import LinearModel

    model = LinearModel(weights=np.zeros((4, len(LABELS))), alpha=1.0)
    with pytest.raises(DimMismatch):
        predict_distribution(model, np.zeros(7))


def test_gold_distribution_cases():
    annotations = [
        ann("t1", "a0", {COMMENT}),
        ann("t1", "a1", {COMMENT}),
        ann("t2", "a0", {COMMENT}),
        ann("t2", "a1", {RESULT}),
        ann("t3", "a0", {COMMENT, RESULT}),
        ann("t3", "a1", {COMMENT}),
    ]
    g1 = gold_distribution("t1", annotations)
    assert g1[LABEL_INDEX[COMMENT]] == 1.0
    g2 = gold_distribution("t2", annotations)
    assert g2[LABEL_INDEX[COMMENT]] == pytest.approx(0.5)
    assert g2[LABEL_INDEX[RESULT]] == pytest.approx(0.5)
    g3 = gold_distribution("t3", annotations)
    assert g3[LABEL_INDEX[COMMENT]] == pytest.approx(2 / 3)
    assert g3[LABEL_INDEX[RESULT]] == pytest.approx(1 / 3)
    with pytest.raises(NoAnnotations):
        gold_distribution("ghost", annotations)
    with pytest.raises(NoAnnotations):
        gold_distribution("t4", [ann("t4", "a0", (), rejected=True)])


def test_gibbs_inequality_on_random_distributions():
    rng = np.random.default_rng(29)
    for _ in range(500):
        gold = rng.dirichlet(np.ones(len(LABELS)) * rng.uniform(0.2, 3.0))
        pred = rng.dirichlet(np.ones(len(LABELS)) * rng.uniform(0.2, 3.0))
        entropy = -float(np.sum(gold[gold > 0] * np.log(gold[gold > 0])))
        assert cross_entropy(gold, pred) >= entropy - 1e-9
        assert cross_entropy(gold, gold) == pytest.approx(entropy, abs=1e-9)
    # equality case with a point mass: predicting the gold exactly costs nothing
    one_hot = np.zeros(len(LABELS))
    one_hot[3] = 1.0
    assert cross_entropy(one_hot, one_hot) == 0.0


def test_uniform_predictor_cross_entropy_is_log_twelve():
    # CE(gold, uniform) telescopes to ln 12 regardless of gold
    rng = np.random.default_rng(31)
    uniform = np.full(len(LABELS), 1.0 / len(LABELS))
    for _ in range(5):
        gold = rng.dirichlet(np.ones(len(LABELS)))
        direct = -sum(
            g * math.log(1.0 / len(LABELS)) for g in gold if g > 0
        )
        assert cross_entropy(gold, uniform) == pytest.approx(direct, abs=1e-12)
        assert direct == pytest.approx(math.log(len(LABELS)), abs=1e-9)


# -- evaluation --------------------------------------------------------------------


def build_eval_setup(
    rng, n_dialogues=4, tasks_per_dialogue=12, annotators=3, noise=0.05, label_mode="round_robin"
):
    """Cluster embeddings per label so argmax prediction is learnable.

    Round-robin labels put every label in every dialogue, so each training
    split sees each cluster.
    """
    centers = rng.standard_normal((len(LABELS), 24)) * 3.0
    tasks, annotations, entries = [], [], {}
    for d in range(n_dialogues):
        for i in range(tasks_per_dialogue):
            if label_mode == "round_robin":
                label_i = i % len(LABELS)
            else:
                label_i = int(rng.integers(0, len(LABELS)))
            task = dummy_task(f"d{d}-t{i}", f"d{d}", PairType.WITHIN_TURN)
            tasks.append(task)
            entries[task.task_id] = centers[label_i] + noise * rng.standard_normal(24)
            for k in range(annotators):
                annotations.append(ann(task.task_id, f"a{k}", {LABELS[label_i]}))
    embeddings = EmbeddingTable(dim=24, entries=entries)
    rows = build_train_rows(annotations, tasks)
    return tasks, annotations, embeddings, rows


def test_perfect_setup_gives_perfect_metrics():
    rng = np.random.default_rng(37)
    tasks, annotations, embeddings, rows = build_eval_setup(rng, noise=0.01)
    report = evaluate(loco_folds(rows), embeddings, annotations, alpha=0.1)
    assert report.macro_precision == pytest.approx(1.0)
    assert report.macro_recall == pytest.approx(1.0)
    assert report.macro_f1 == pytest.approx(1.0)
    assert report.in_set_recall_overall == pytest.approx(1.0)
    assert report.in_set_recall_by_group_mean == pytest.approx(1.0)
    # the softmax spreads mass even when the argmax is always right, so the
    # cross-entropy is positive but clearly better than a uniform guesser
    for ce in report.cross_entropy_by_pair_type.values():
        assert 0.0 < ce < math.log(len(LABELS))


def test_evaluate_matches_naive_reference():
    rng = np.random.default_rng(41)
    tasks, annotations, embeddings, rows = build_eval_setup(
        rng, n_dialogues=3, tasks_per_dialogue=5, annotators=2, noise=2.5,
        label_mode="random",
    )
    folds = loco_folds(rows)
    report = evaluate(folds, embeddings, annotations, alpha=1.0)

    # naive double-loop reference over all folds
    predictions = {}
    for train, test in folds:
        model = fit_ridge_ovr(train, embeddings, alpha=1.0)
        for row in test:
            pred = predict_distribution(model, embeddings.entries[row.task_id])
            predictions[(row.task_id, row.annotator_id)] = int(np.argmax(pred))

    per_label = {}
    for row in rows:
        top = predictions[(row.task_id, row.annotator_id)]
        for l in range(len(LABELS)):
            tp, fp, fn = per_label.get(l, (0, 0, 0))
            if l == top and row.target[l]:
                tp += 1
            elif l == top and not row.target[l]:
                fp += 1
            elif l != top and row.target[l]:
                fn += 1
            per_label[l] = (tp, fp, fn)
    precisions, recalls, f1s = [], [], []
    for l, (tp, fp, fn) in sorted(per_label.items()):
        if tp + fn == 0:
            continue
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn)
        f = 2 * p * r / (p + r) if p + r else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    assert report.macro_precision == pytest.approx(np.mean(precisions), abs=1e-12)
    assert report.macro_recall == pytest.approx(np.mean(recalls), abs=1e-12)
    assert report.macro_f1 == pytest.approx(np.mean(f1s), abs=1e-12)

    union = {}
    for a in annotations:
        union.setdefault(a.task_id, set()).update(a.labels)
    hits = {
        t.task_id: LABELS[predictions[(t.task_id, "a0")]] in union[t.task_id]
        for t in tasks
    }
    assert report.in_set_recall_overall == pytest.approx(
        sum(hits.values()) / len(hits), abs=1e-12
    )


def test_evaluate_fold_order_invariance():
    rng = np.random.default_rng(43)
    tasks, annotations, embeddings, rows = build_eval_setup(
        rng, n_dialogues=3, tasks_per_dialogue=4, annotators=2, noise=1.0
    )
    folds = loco_folds(rows)
    forward = evaluate(folds, embeddings, annotations, alpha=1.0)
    backward = evaluate(list(reversed(folds)), embeddings, annotations, alpha=1.0)
    assert forward == backward


def test_skipped_labels_are_reported():
    rng = np.random.default_rng(47)
    tasks, annotations, entries = [], [], {}
    for d in range(2):
        for i in range(6):
            label = COMMENT if (i + d) % 2 == 0 else ELAB
            task = dummy_task(f"d{d}-t{i}", f"d{d}", PairType.WITHIN_TURN)
            tasks.append(task)
            entries[task.task_id] = rng.standard_normal(4)
            annotations.append(ann(task.task_id, "a0", {label}))
    rows = build_train_rows(annotations, tasks)
    report = evaluate(loco_folds(rows), EmbeddingTable(4, entries), annotations, alpha=1.0)
    assert COMMENT not in report.skipped_labels
    assert RESULT in report.skipped_labels
    assert len(report.skipped_labels) == len(LABELS) - 2


def test_build_train_rows_drops_rejections():
    tasks = [dummy_task("t1", "d1", PairType.WITHIN_TURN)]
    annotations = [
        ann("t1", "a0", {COMMENT, ELAB}),
        ann("t1", "a1", (), rejected=True),
    ]
    rows = build_train_rows(annotations, tasks)
    assert len(rows) == 1
    assert sum(rows[0].target) == 2
