"""How relation use varies with discourse context.

Three layers:
  * descriptive statistics — label counts per pair under a team or
    annotator grouping, per-context label distributions, and pooled
    two-sample t comparisons between contexts;
  * per-label one-vs-rest logistic regressions over context indicator
    features (plus optional team dummies), fit by Newton iteration on the
    exact likelihood;
  * likelihood-ratio comparison of nested fits, with the chi-square tail
    from :mod:`dialrel.special`.

The observation unit is one row per selected label per annotation: an
annotator who marks three relations on one pair contributes three rows.
The context coding uses the same-speaker cross-turn case as the
reference level, so the two indicators are "different speaker" and
"within turn" (never both).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit, stdtr

from dialrel.errors import DialrelError
from dialrel.labels import LABEL_INDEX, LABELS, RelationLabel
from dialrel.pairs import AnnotationTask, PairType
from dialrel.special import chi_square_sf
from dialrel.store import Annotation


class ContextModelError(DialrelError):
    code = "context_model_error"


class EmptyGroup(ContextModelError):
    code = "empty_group"


class ZeroVariance(ContextModelError):
    code = "zero_variance"


class UnknownTask(ContextModelError):
    code = "unknown_task"


class Separation(ContextModelError):
    code = "separation"


class RankDeficient(ContextModelError):
    code = "rank_deficient"


class NotNested(ContextModelError):
    code = "not_nested"


@dataclass(frozen=True)
class ObservationRow:
    label: RelationLabel
    different_speaker: int
    within_turn: int
    team_id: str
    task_id: str
    annotator_id: str


@dataclass(frozen=True)
class FitResult:
    labels: tuple[RelationLabel, ...]
    feature_names: tuple[str, ...]
    coefficients: Mapping[RelationLabel, np.ndarray]
    log_likelihood: float
    n_params: int
    n_rows: int
    converged: bool
    penalized: bool


@dataclass(frozen=True)
class LRTResult:
    statistic: float
    df: int
    p_value: float


@dataclass(frozen=True)
class TTestResult:
    mean_a: float
    mean_b: float
    t: float
    df: int
    p_value: float


# -- descriptive layer ---------------------------------------------------------


def build_rows(
    annotations: Iterable[Annotation],
    tasks: Sequence[AnnotationTask],
    team_of: Mapping[str, str] | None = None,
) -> list[ObservationRow]:
    """Expand annotations into one row per selected label.

    Rejected annotations contribute no rows. With no roster given, the
    dialogue id stands in for the team (teams and dialogues are 1:1).
    """
    by_id = {t.task_id: t for t in tasks}
    rows = []
    for ann in annotations:
        task = by_id.get(ann.task_id)
        if task is None:
            raise UnknownTask(f"annotation references unknown task {ann.task_id!r}")
        if ann.rejected:
            continue
        team = team_of[ann.annotator_id] if team_of is not None else task.dialogue_id
        for label in LABELS:
            if label not in ann.labels:
                continue
            rows.append(
                ObservationRow(
                    label=label,
                    different_speaker=int(
                        task.pair_type is PairType.CROSS_TURN_DIFFERENT_SPEAKER
                    ),
                    within_turn=int(task.pair_type is PairType.WITHIN_TURN),
                    team_id=team,
                    task_id=ann.task_id,
                    annotator_id=ann.annotator_id,
                )
            )
    return rows


def per_task_label_sums(
    annotations: Iterable[Annotation], tasks: Sequence[AnnotationTask]
) -> dict[PairType, list[int]]:
    """Total labels chosen per task (summed over annotators), keyed by context.

    Rejections count as zero-label decisions.
    """
    by_id = {t.task_id: t for t in tasks}
    sums: dict[str, int] = {}
    for ann in annotations:
        task = by_id.get(ann.task_id)
        if task is None:
            raise UnknownTask(f"annotation references unknown task {ann.task_id!r}")
        sums[ann.task_id] = sums.get(ann.task_id, 0) + len(ann.labels)
    out: dict[PairType, list[int]] = {}
    for task_id, total in sums.items():
        out.setdefault(by_id[task_id].pair_type, []).append(total)
    return out


def labels_per_pair(
    annotations: Iterable[Annotation],
    tasks: Sequence[AnnotationTask],
    grouping: str = "team",
) -> dict[PairType, float]:
    """Mean labels per pair under a grouping.

    "team": mean over tasks of the task's total label count (all of a
    team's annotators pooled). "annotator": mean over individual
    (task, annotator) decisions of their label count.
    """
    if grouping not in ("team", "annotator"):
        raise ValueError(f"grouping must be 'team' or 'annotator', got {grouping!r}")
    annotations = list(annotations)
    if grouping == "team":
        per_type = per_task_label_sums(annotations, tasks)
        if not per_type:
            raise EmptyGroup("no annotations to aggregate")
        return {pt: float(np.mean(v)) for pt, v in per_type.items()}
    by_id = {t.task_id: t for t in tasks}
    counts: dict[PairType, list[int]] = {}
    for ann in annotations:
        task = by_id.get(ann.task_id)
        if task is None:
            raise UnknownTask(f"annotation references unknown task {ann.task_id!r}")
        counts.setdefault(task.pair_type, []).append(len(ann.labels))
    if not counts:
        raise EmptyGroup("no annotations to aggregate")
    return {pt: float(np.mean(v)) for pt, v in counts.items()}


def two_sample_t(xs: Sequence[float], ys: Sequence[float]) -> TTestResult:
    """Pooled-variance two-sample t test, df = n1 + n2 - 2, two-sided p.

    The statistic is (mean(xs) - mean(ys)) / se, so t is negative when the
    first sample has the smaller mean.
    """
    if len(xs) < 2 or len(ys) < 2:
        raise ValueError("need at least two observations per sample")
    xs_arr = np.asarray(xs, dtype=float)
    ys_arr = np.asarray(ys, dtype=float)
    df = len(xs_arr) + len(ys_arr) - 2
    pooled = ((len(xs_arr) - 1) * xs_arr.var(ddof=1) + (len(ys_arr) - 1) * ys_arr.var(ddof=1)) / df
    if pooled <= 0.0:
        raise ZeroVariance("pooled variance is zero")
    se = math.sqrt(pooled * (1.0 / len(xs_arr) + 1.0 / len(ys_arr)))
    t = float((xs_arr.mean() - ys_arr.mean()) / se)
    p = float(2.0 * stdtr(df, -abs(t)))
    return TTestResult(
        mean_a=float(xs_arr.mean()), mean_b=float(ys_arr.mean()), t=t, df=df, p_value=p
    )


def distribution_report(
    annotations: Iterable[Annotation], tasks: Sequence[AnnotationTask]
) -> dict[PairType, dict[str, dict[RelationLabel, float]]]:
    """Per-context label counts and proportions (proportions sum to 1)."""
    by_id = {t.task_id: t for t in tasks}
    counts: dict[PairType, dict[RelationLabel, int]] = {}
    for ann in annotations:
        task = by_id.get(ann.task_id)
        if task is None:
            raise UnknownTask(f"annotation references unknown task {ann.task_id!r}")
        bucket = counts.setdefault(task.pair_type, {label: 0 for label in LABELS})
        for label in ann.labels:
            bucket[label] += 1
    report: dict[PairType, dict[str, dict[RelationLabel, float]]] = {}
    for pair_type, bucket in counts.items():
        total = sum(bucket.values())
        report[pair_type] = {
            "counts": {l: float(c) for l, c in bucket.items()},
            "proportions": {
                l: (c / total if total else 0.0) for l, c in bucket.items()
            },
        }
    return report


# -- one-vs-rest logistic layer ------------------------------------------------


def loglik_and_grad(
    w: np.ndarray, X: np.ndarray, y: np.ndarray, penalty: float = 0.0
) -> tuple[float, np.ndarray]:
    """Bernoulli log likelihood and its gradient, with an optional ridge
    term on every coefficient except the intercept (column 0)."""
    z = X @ w
    # log sigma(z) = -log(1 + exp(-z)) done stably via logaddexp
    ll = float(np.sum(y * z - np.logaddexp(0.0, z)))
    grad = X.T @ (y - expit(z))
    if penalty > 0.0:
        mask = np.ones_like(w)
        mask[0] = 0.0
        ll -= 0.5 * penalty * float(np.sum((mask * w) ** 2))
        grad = grad - penalty * mask * w
    return ll, grad


def _fit_binary_logistic(
    X: np.ndarray,
    y: np.ndarray,
    penalty: float,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> tuple[np.ndarray, bool]:
    """Newton iteration with step halving; converged when the gradient's
    max-abs entry drops below ``tol``."""
    n, d = X.shape
    w = np.zeros(d)
    pen = np.full(d, penalty)
    pen[0] = 0.0
    ll, grad = loglik_and_grad(w, X, y, penalty)
    for _ in range(max_iter):
        if np.max(np.abs(grad)) < tol:
            _check_separation(w, penalty)
            return w, True
        p = expit(X @ w)
        weights = p * (1.0 - p)
        hessian = (X * weights[:, None]).T @ X + np.diag(pen)
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            raise Separation(
                "Newton step failed: fitted probabilities have saturated "
                "(perfect separation); consider a ridge penalty"
            ) from None
        # halve until the objective improves (full steps almost always do)
        scale = 1.0
        for _ in range(40):
            trial = w + scale * step
            trial_ll, trial_grad = loglik_and_grad(trial, X, y, penalty)
            if trial_ll >= ll - 1e-12:
                w, ll, grad = trial, trial_ll, trial_grad
                break
            scale *= 0.5
        else:
            break
    _check_separation(w, penalty)
    if np.max(np.abs(grad)) < tol:
        return w, True
    return w, False


def _check_separation(w: np.ndarray, penalty: float) -> None:
    # saturated probabilities zero the gradient at absurd log odds, so a
    # "converged" separated fit is caught by coefficient magnitude
    if penalty == 0.0 and np.max(np.abs(w)) > 15.0:
        raise Separation(
            "coefficients diverged: the data are perfectly (or almost "
            "perfectly) separated; consider a ridge penalty"
        )


def design_matrix(
    rows: Sequence[ObservationRow], features: Sequence[str]
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Intercept plus the requested features; "team" expands to dummy
    columns over the teams present, dropping the alphabetically first."""
    columns = [np.ones(len(rows))]
    names = ["intercept"]
    for feature in features:
        if feature == "different_speaker":
            columns.append(np.array([r.different_speaker for r in rows], dtype=float))
            names.append("different_speaker")
        elif feature == "within_turn":
            columns.append(np.array([r.within_turn for r in rows], dtype=float))
            names.append("within_turn")
        elif feature == "team":
            teams = sorted({r.team_id for r in rows})
            for team in teams[1:]:
                columns.append(np.array([float(r.team_id == team) for r in rows]))
                names.append(f"team:{team}")
        else:
            raise ValueError(f"unknown feature {feature!r}")
    return np.column_stack(columns), tuple(names)


def fit_ovr_logistic(
    rows: Sequence[ObservationRow],
    features: Sequence[str] = ("different_speaker", "within_turn"),
    penalty: float = 0.0,
    labels: Sequence[RelationLabel] | None = None,
) -> FitResult:
    """Fit one binary logistic regression per label (that label vs rest).

    The reported log likelihood is the unpenalized likelihood summed over
    the per-label fits; when a penalty is used the result is flagged, as
    likelihood-ratio theory assumes unpenalized maxima.
    """
    if not rows:
        raise EmptyGroup("no observation rows to fit")
    X, names = design_matrix(rows, features)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficient(f"design matrix with columns {names} is rank deficient")
    row_labels = np.array([LABEL_INDEX[r.label] for r in rows])
    if labels is None:
        present = sorted(set(row_labels.tolist()))
        fitted_labels = tuple(LABELS[i] for i in present)
    else:
        fitted_labels = tuple(labels)
    coefficients = {}
    total_ll = 0.0
    all_converged = True
    for label in fitted_labels:
        y = (row_labels == LABEL_INDEX[label]).astype(float)
        if y.sum() == 0 or y.sum() == len(y):
            raise Separation(f"label {label.value} has no variation in these rows")
        w, converged = _fit_binary_logistic(X, y, penalty)
        ll, _ = loglik_and_grad(w, X, y, penalty=0.0)
        coefficients[label] = w
        total_ll += ll
        all_converged = all_converged and converged
    return FitResult(
        labels=fitted_labels,
        feature_names=names,
        coefficients=coefficients,
        log_likelihood=total_ll,
        n_params=len(names) * len(fitted_labels),
        n_rows=len(rows),
        converged=all_converged,
        penalized=penalty > 0.0,
    )


def likelihood_ratio_test(fit_null: FitResult, fit_alt: FitResult) -> LRTResult:
    """2 * (ll_alt - ll_null) against chi-square with the parameter-count
    difference as degrees of freedom."""
    if fit_alt.n_params <= fit_null.n_params:
        raise NotNested("the alternative fit must add parameters over the null")
    if fit_alt.n_rows != fit_null.n_rows or fit_alt.labels != fit_null.labels:
        raise NotNested("fits compare different data or different label sets")
    delta = fit_alt.log_likelihood - fit_null.log_likelihood
    if delta < -1e-6:
        raise NotNested(
            f"alternative likelihood is below the null by {-delta:.3g}; "
            "the models are not nested maxima"
        )
    statistic = max(2.0 * delta, 0.0)
    df = fit_alt.n_params - fit_null.n_params
    return LRTResult(statistic=statistic, df=df, p_value=chi_square_sf(statistic, df))
