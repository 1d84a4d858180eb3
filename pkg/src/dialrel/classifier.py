"""Relation prediction from pair embeddings, evaluated conversation-wise.

A ridge regression per label (one-vs-rest, closed form) is trained on all
but one conversation and tested on that conversation's annotations, for
every conversation in turn. Beyond strict per-annotation metrics, the
evaluation reports whether the model's top guess lands in the set of all
labels any annotator chose for the pair, and the cross-entropy between
the model's label distribution and the annotators' pooled label
distribution, broken out by discourse context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from dialrel import jsonl
from dialrel.errors import DialrelError
from dialrel.labels import LABEL_INDEX, LABELS, RelationLabel
from dialrel.pairs import AnnotationTask, PairType
from dialrel.store import Annotation


class ClassifierError(DialrelError):
    code = "classifier_error"


class DimMismatch(ClassifierError):
    code = "dim_mismatch"


class DuplicateKey(ClassifierError):
    code = "duplicate_key"


class Malformed(ClassifierError):
    code = "malformed_embeddings"


class SingleDialogue(ClassifierError):
    code = "single_dialogue"


class MissingEmbedding(ClassifierError):
    code = "missing_embedding"


class NoAnnotations(ClassifierError):
    code = "no_annotations"


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    entries: Mapping[str, np.ndarray]


@dataclass(frozen=True)
class TrainRow:
    task_id: str
    dialogue_id: str
    annotator_id: str
    target: tuple[int, ...]  # multi-hot over the canonical label order
    pair_type: PairType


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # (dim + 1, n_labels); last row is the intercept
    alpha: float

    @property
    def dim(self) -> int:
        return self.weights.shape[0] - 1

    def scores(self, vector: np.ndarray) -> np.ndarray:
        if vector.shape != (self.dim,):
            raise DimMismatch(f"expected a vector of length {self.dim}, got {vector.shape}")
        return np.append(vector, 1.0) @ self.weights


@dataclass(frozen=True)
class EvalReport:
    macro_precision: float
    macro_recall: float
    macro_f1: float
    in_set_recall_overall: float
    in_set_recall_by_group_mean: float
    cross_entropy_by_pair_type: Mapping[PairType, float]
    skipped_labels: tuple[RelationLabel, ...]
    score_mode: str
    per_fold: tuple[dict, ...] = ()

    def as_dict(self) -> dict:
        return {
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "in_set_recall_overall": self.in_set_recall_overall,
            "in_set_recall_by_group_mean": self.in_set_recall_by_group_mean,
            "cross_entropy_by_pair_type": {
                pt.value: ce for pt, ce in self.cross_entropy_by_pair_type.items()
            },
            "skipped_labels": [l.value for l in self.skipped_labels],
            "score_mode": self.score_mode,
            "per_fold": list(self.per_fold),
        }


# -- embeddings -----------------------------------------------------------------


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read line-delimited {"task_id", "vector"} records.

    An optional first line {"dim": n} pins the dimension; otherwise the
    first vector does. Every vector must match, and task ids are unique.
    """
    dim: int | None = None
    entries: dict[str, np.ndarray] = {}
    for rec in jsonl.read_records(path):
        if "dim" in rec and "task_id" not in rec:
            if entries:
                raise Malformed("the dimension header must be the first line")
            dim = int(rec["dim"])
            continue
        if "task_id" not in rec or "vector" not in rec:
            raise Malformed(f"embedding record needs task_id and vector: {rec}")
        task_id = str(rec["task_id"])
        if task_id in entries:
            raise DuplicateKey(f"task {task_id!r} appears twice")
        vector = np.asarray(rec["vector"], dtype=np.float64)
        if vector.ndim != 1 or vector.size == 0:
            raise Malformed(f"task {task_id!r}: vector must be a non-empty flat list")
        if dim is None:
            dim = int(vector.size)
        elif vector.size != dim:
            raise DimMismatch(
                f"task {task_id!r}: vector has length {vector.size}, expected {dim}"
            )
        entries[task_id] = vector
    if dim is None or not entries:
        raise Malformed("embedding file has no vectors")
    return EmbeddingTable(dim=dim, entries=entries)


def write_embeddings(path: str | Path, table: EmbeddingTable) -> None:
    records: list[dict] = [{"dim": table.dim}]
    records.extend(
        {"task_id": tid, "vector": [float(v) for v in vec]}
        for tid, vec in table.entries.items()
    )
    jsonl.write_records(path, records)


# -- training data ----------------------------------------------------------------


def build_train_rows(
    annotations: Iterable[Annotation], tasks: Sequence[AnnotationTask]
) -> list[TrainRow]:
    """One row per non-rejected (task, annotator) with a multi-hot target."""
    by_id = {t.task_id: t for t in tasks}
    rows = []
    for ann in annotations:
        if ann.rejected:
            continue
        task = by_id.get(ann.task_id)
        if task is None:
            raise ClassifierError(f"annotation references unknown task {ann.task_id!r}")
        target = tuple(int(label in ann.labels) for label in LABELS)
        rows.append(
            TrainRow(
                task_id=ann.task_id,
                dialogue_id=task.dialogue_id,
                annotator_id=ann.annotator_id,
                target=target,
                pair_type=task.pair_type,
            )
        )
    return rows


def loco_folds(rows: Sequence[TrainRow]) -> list[tuple[list[TrainRow], list[TrainRow]]]:
    """One fold per conversation: its rows are the test set, the rest train."""
    dialogues = sorted({r.dialogue_id for r in rows})
    if len(dialogues) < 2:
        raise SingleDialogue("leave-one-conversation-out needs at least two dialogues")
    folds = []
    for held_out in dialogues:
        train = [r for r in rows if r.dialogue_id != held_out]
        test = [r for r in rows if r.dialogue_id == held_out]
        folds.append((train, test))
    return folds


# -- model ------------------------------------------------------------------------


def ridge_solution(X: np.ndarray, Y: np.ndarray, alpha: float, penalize: np.ndarray | None = None) -> np.ndarray:
    """Solve (X'X + alpha * diag(penalize)) W = X'Y; penalize defaults to all ones."""
    d = X.shape[1]
    diag = np.ones(d) if penalize is None else np.asarray(penalize, dtype=float)
    return np.linalg.solve(X.T @ X + alpha * np.diag(diag), X.T @ Y)


def fit_ridge_ovr(
    train_rows: Sequence[TrainRow], embeddings: EmbeddingTable, alpha: float
) -> LinearModel:
    """Closed-form ridge per label; an intercept column is appended and
    left out of the penalty."""
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    missing = [r.task_id for r in train_rows if r.task_id not in embeddings.entries]
    if missing:
        raise MissingEmbedding(f"no embedding for tasks {sorted(set(missing))[:5]}")
    X = np.stack([embeddings.entries[r.task_id] for r in train_rows])
    X = np.column_stack([X, np.ones(len(train_rows))])
    Y = np.asarray([r.target for r in train_rows], dtype=np.float64)
    penalize = np.ones(X.shape[1])
    penalize[-1] = 0.0
    return LinearModel(weights=ridge_solution(X, Y, alpha, penalize), alpha=alpha)


def predict_distribution(
    model: LinearModel, vector: np.ndarray, score_mode: str = "softmax"
) -> np.ndarray:
    """Turn the 12 per-label scores into a probability vector.

    "softmax" is the default mapping; "clipped" clips scores at zero and
    normalizes, with a floor so downstream logs stay finite. The mapping
    is a modeling choice and is recorded in evaluation reports.
    """
    scores = model.scores(np.asarray(vector, dtype=np.float64))
    if score_mode == "softmax":
        shifted = scores - np.max(scores)
        weights = np.exp(shifted)
    elif score_mode == "clipped":
        weights = np.clip(scores, 0.0, None) + 1e-12
    else:
        raise ValueError(f"unknown score mode {score_mode!r}")
    return weights / weights.sum()


def gold_distribution(task_id: str, annotations: Iterable[Annotation]) -> np.ndarray:
    """Label counts pooled over the task's annotators, normalized to sum 1."""
    counts = np.zeros(len(LABELS))
    for ann in annotations:
        if ann.task_id != task_id or ann.rejected:
            continue
        for label in ann.labels:
            counts[LABEL_INDEX[label]] += 1.0
    if counts.sum() == 0:
        raise NoAnnotations(f"task {task_id!r} has no labeled annotations")
    return counts / counts.sum()


def cross_entropy(gold: np.ndarray, pred: np.ndarray) -> float:
    """-sum(gold * log pred), with predictions floored at 1e-12."""
    pred = np.clip(pred, 1e-12, None)
    mask = gold > 0
    return float(-np.sum(gold[mask] * np.log(pred[mask])))


def evaluate(
    folds: Sequence[tuple[list[TrainRow], list[TrainRow]]],
    embeddings: EmbeddingTable,
    annotations: Iterable[Annotation],
    alpha: float,
    score_mode: str = "softmax",
) -> EvalReport:
    """Train and test every fold, then aggregate.

    Strict metrics score the single top label against each annotation's
    multi-hot target, macro-averaged over labels with gold support (labels
    without any gold occurrence are skipped and listed). The in-set
    recall is per task: does the top label fall in the union of labels
    any annotator chose? Cross-entropy compares the predicted
    distribution with the pooled annotator distribution per task and is
    averaged within each discourse context.
    """
    annotations = list(annotations)
    union: dict[str, set[RelationLabel]] = {}
    for ann in annotations:
        union.setdefault(ann.task_id, set()).update(ann.labels)

    n_labels = len(LABELS)
    tp = np.zeros(n_labels)
    fp = np.zeros(n_labels)
    fn = np.zeros(n_labels)
    gold_support = np.zeros(n_labels)
    in_set_hits: dict[str, bool] = {}
    task_group: dict[str, str] = {}
    ce_by_type: dict[PairType, list[float]] = {}
    per_fold = []

    for train, test in sorted(folds, key=lambda f: f[1][0].dialogue_id if f[1] else ""):
        model = fit_ridge_ovr(train, embeddings, alpha)
        fold_rows = 0
        fold_hits = 0
        fold_tasks = 0
        fold_ces = []
        test_dialogue = test[0].dialogue_id if test else ""
        # distinct hygiene check: the held-out conversation never leaks
        if any(r.dialogue_id == test_dialogue for r in train):
            raise ClassifierError(f"fold for {test_dialogue!r} has training leakage")
        seen_tasks: set[str] = set()
        for row in test:
            vector = embeddings.entries.get(row.task_id)
            if vector is None:
                raise MissingEmbedding(f"no embedding for task {row.task_id!r}")
            pred = predict_distribution(model, vector, score_mode)
            top = int(np.argmax(pred))
            target = np.asarray(row.target)
            gold_support += target
            for l in range(n_labels):
                if l == top and target[l]:
                    tp[l] += 1
                elif l == top:
                    fp[l] += 1
                elif target[l]:
                    fn[l] += 1
            fold_rows += 1
            if row.task_id in seen_tasks:
                continue
            seen_tasks.add(row.task_id)
            labels_union = union.get(row.task_id, set())
            if labels_union:
                hit = LABELS[top] in labels_union
                in_set_hits[row.task_id] = hit
                task_group[row.task_id] = row.dialogue_id
                fold_tasks += 1
                fold_hits += int(hit)
                gold = gold_distribution(row.task_id, annotations)
                ce = cross_entropy(gold, pred)
                ce_by_type.setdefault(row.pair_type, []).append(ce)
                fold_ces.append(ce)
        per_fold.append(
            {
                "dialogue_id": test_dialogue,
                "n_rows": fold_rows,
                "n_tasks": fold_tasks,
                "in_set_recall": (fold_hits / fold_tasks) if fold_tasks else 0.0,
                "mean_cross_entropy": float(np.mean(fold_ces)) if fold_ces else 0.0,
            }
        )

    supported = [l for l in range(n_labels) if gold_support[l] > 0]
    skipped = tuple(LABELS[l] for l in range(n_labels) if gold_support[l] == 0)
    precisions, recalls, f1s = [], [], []
    for l in supported:
        precision = tp[l] / (tp[l] + fp[l]) if tp[l] + fp[l] > 0 else 0.0
        recall = tp[l] / (tp[l] + fn[l]) if tp[l] + fn[l] > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)

    overall = (
        sum(in_set_hits.values()) / len(in_set_hits) if in_set_hits else 0.0
    )
    by_group: dict[str, list[bool]] = {}
    for task_id, hit in in_set_hits.items():
        by_group.setdefault(task_group[task_id], []).append(hit)
    group_means = [sum(v) / len(v) for _, v in sorted(by_group.items())]

    return EvalReport(
        macro_precision=float(np.mean(precisions)) if precisions else 0.0,
        macro_recall=float(np.mean(recalls)) if recalls else 0.0,
        macro_f1=float(np.mean(f1s)) if f1s else 0.0,
        in_set_recall_overall=float(overall),
        in_set_recall_by_group_mean=float(np.mean(group_means)) if group_means else 0.0,
        cross_entropy_by_pair_type={
            pt: float(np.mean(v)) for pt, v in sorted(ce_by_type.items(), key=lambda kv: kv[0].value)
        },
        skipped_labels=skipped,
        score_mode=score_mode,
        per_fold=tuple(per_fold),
    )
