"""Multi-label inter-annotator agreement: observed, chance, and adjusted.

Observed agreement averages an item-level score over every unordered
annotator pair and every item the pair co-annotated. Chance agreement is
estimated by bootstrap: each resampling round redraws every cell from the
empirical distribution of that annotator's observed label sets, and the
same observed statistic is computed on the pseudo-grid. The adjusted
value is the usual chance correction (observed - expected) / (1 - expected).

Item scores for label sets A (first annotator of the pair) and B (second):

    soft_match:      1 if A and B intersect, else 0
    augmented:       |A and B| / max(|A|, |B|)
    boot_match:      same item score as soft_match
    boot_recall:     |A and B| / |B|
    boot_precision:  |A and B| / |A|
    boot_f1:         harmonic mean of precision and recall

Scores with an empty denominator are 0; in particular two rejections
(empty sets) never count as agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from dialrel.agreement.backend import get_kernel
from dialrel.agreement.matrix import LabelMatrix
from dialrel.errors import DialrelError

METRICS: tuple[str, ...] = (
    "soft_match",
    "augmented",
    "boot_match",
    "boot_recall",
    "boot_precision",
    "boot_f1",
)

#: Row labels used when rendering reports as a table.
METRIC_DISPLAY: Mapping[str, str] = {
    "soft_match": "soft-match",
    "augmented": "augmented",
    "boot_match": "boot-match",
    "boot_recall": "boot-rec.",
    "boot_precision": "boot-prec.",
    "boot_f1": "boot-F1",
}

_CHUNK_ROUNDS = 512


class AgreementError(DialrelError):
    code = "agreement_error"


class NoOverlap(AgreementError):
    code = "no_overlap"


class DegenerateExpected(AgreementError):
    code = "degenerate_expected"


@dataclass(frozen=True)
class AgreementConfig:
    """Bootstrap and scoring options.

    ``pooling`` picks where resampled label sets come from: each
    annotator's own observed sets ("per_annotator", respecting annotator
    bias) or everyone's sets pooled ("global"). ``include_rejected``
    keeps explicit rejections in play as empty label sets.
    ``augmented_denominator`` switches the augmented score's denominator
    between max(|A|,|B|) and the mean set size.
    """

    n_resamples: int = 10_000
    seed: int = 0
    pairing: str = "all_annotator_pairs"
    pooling: str = "per_annotator"
    include_rejected: bool = True
    augmented_denominator: str = "max"
    backend: str = "auto"

    def __post_init__(self) -> None:
        if self.n_resamples < 100:
            raise ValueError("n_resamples must be at least 100")
        if self.pairing != "all_annotator_pairs":
            raise ValueError(f"unsupported pairing {self.pairing!r}")
        if self.pooling not in ("per_annotator", "global"):
            raise ValueError(f"unsupported pooling {self.pooling!r}")
        if self.augmented_denominator not in ("max", "mean"):
            raise ValueError(f"augmented_denominator must be 'max' or 'mean'")


DEFAULT_CONFIG = AgreementConfig()


@dataclass(frozen=True)
class MetricAgreement:
    observed: float
    expected: float
    adjusted: float
    expected_se: float  # Monte-Carlo standard error of the expected value


@dataclass(frozen=True)
class AgreementReport:
    values: Mapping[str, MetricAgreement]
    n_resamples: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "n_resamples": self.n_resamples,
            "seed": self.seed,
            "metrics": {
                m: {
                    "observed": v.observed,
                    "expected": v.expected,
                    "adjusted": v.adjusted,
                    "expected_se": v.expected_se,
                }
                for m, v in self.values.items()
            },
        }


@dataclass(frozen=True)
class _Plan:
    """Matrix compiled to flat arrays for the kernels."""

    cell_masks: np.ndarray  # uint64 bitmask per observed cell
    cell_base: np.ndarray  # offset of each cell's sampling pool (into cell_masks)
    cell_pool_size: np.ndarray
    entry_a: np.ndarray  # cell index of the pair's first annotator, per (pair, item)
    entry_b: np.ndarray
    entry_pair: np.ndarray
    pair_sizes: np.ndarray
    labels: tuple


def _aug_mode(config: AgreementConfig) -> int:
    return 0 if config.augmented_denominator == "max" else 1


def build_plan(matrix: LabelMatrix, config: AgreementConfig = DEFAULT_CONFIG) -> _Plan:
    n_items = len(matrix.items)
    n_annotators = len(matrix.annotators)
    labels = sorted({l for s in matrix.cells.values() for l in s}, key=str)
    if len(labels) > 64:
        raise AgreementError(f"at most 64 distinct labels supported, got {len(labels)}")
    bit = {l: 1 << i for i, l in enumerate(labels)}

    # cells grouped per annotator (item-ascending), so each annotator's
    # sampling pool is a contiguous run of its own observed masks
    cell_of: dict[tuple[int, int], int] = {}
    masks: list[int] = []
    base: list[int] = []
    sizes: list[int] = []
    for j in range(n_annotators):
        start = len(masks)
        for i in range(n_items):
            cell = matrix.cells.get((i, j))
            if cell is None:
                continue
            if not config.include_rejected and not cell:
                continue
            cell_of[(i, j)] = len(masks)
            mask = 0
            for l in cell:
                mask |= bit[l]
            masks.append(mask)
        count = len(masks) - start
        base.extend([start] * count)
        sizes.extend([count] * count)
    if config.pooling == "global":
        base = [0] * len(masks)
        sizes = [len(masks)] * len(masks)

    entry_a: list[int] = []
    entry_b: list[int] = []
    entry_pair: list[int] = []
    pair_sizes: list[int] = []
    for j1 in range(n_annotators):
        for j2 in range(j1 + 1, n_annotators):
            shared = [
                i for i in range(n_items) if (i, j1) in cell_of and (i, j2) in cell_of
            ]
            if not shared:
                continue
            pair_id = len(pair_sizes)
            pair_sizes.append(len(shared))
            for i in shared:
                entry_a.append(cell_of[(i, j1)])
                entry_b.append(cell_of[(i, j2)])
                entry_pair.append(pair_id)
    if not pair_sizes:
        raise NoOverlap("no two annotators share a co-annotated item")

    return _Plan(
        cell_masks=np.asarray(masks, dtype=np.uint64),
        cell_base=np.asarray(base, dtype=np.int64),
        cell_pool_size=np.asarray(sizes, dtype=np.int64),
        entry_a=np.asarray(entry_a, dtype=np.int32),
        entry_b=np.asarray(entry_b, dtype=np.int32),
        entry_pair=np.asarray(entry_pair, dtype=np.int32),
        pair_sizes=np.asarray(pair_sizes, dtype=np.int64),
        labels=tuple(labels),
    )


def _observed_all(plan: _Plan, config: AgreementConfig) -> list[float]:
    kernel = get_kernel(config.backend)
    return kernel.metrics_from_masks(
        plan.cell_masks, plan.entry_a, plan.entry_b, plan.entry_pair, plan.pair_sizes,
        _aug_mode(config),
    )


def round_indices(seed: int, round_index: int, pool_sizes: np.ndarray) -> np.ndarray:
    """Per-round resampling draws; each round's generator is derived from
    (seed, round_index) so rounds can be computed in any order."""
    rng = np.random.default_rng([seed, round_index])
    return rng.integers(0, pool_sizes, dtype=np.int64)


def _expected_all(plan: _Plan, config: AgreementConfig) -> tuple[list[float], list[float]]:
    kernel = get_kernel(config.backend)
    sums = [0.0] * len(METRICS)
    sumsqs = [0.0] * len(METRICS)
    n = config.n_resamples
    for start in range(0, n, _CHUNK_ROUNDS):
        stop = min(start + _CHUNK_ROUNDS, n)
        idx = np.stack(
            [round_indices(config.seed, r, plan.cell_pool_size) for r in range(start, stop)]
        )
        kernel.bootstrap_accumulate(
            plan.cell_masks, plan.cell_base, idx,
            plan.entry_a, plan.entry_b, plan.entry_pair, plan.pair_sizes,
            _aug_mode(config), sums, sumsqs,
        )
    expected = [s / n for s in sums]
    ses = [
        math.sqrt(max(sq / n - e * e, 0.0) / n) for sq, e in zip(sumsqs, expected)
    ]
    return expected, ses


def observed_metric(
    matrix: LabelMatrix, metric: str, config: AgreementConfig = DEFAULT_CONFIG
) -> float:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    plan = build_plan(matrix, config)
    return _observed_all(plan, config)[METRICS.index(metric)]


def expected_metric_bootstrap(
    matrix: LabelMatrix, metric: str, config: AgreementConfig = DEFAULT_CONFIG
) -> float:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    plan = build_plan(matrix, config)
    expected, _ = _expected_all(plan, config)
    return expected[METRICS.index(metric)]


def adjust_kappa(observed: float, expected: float) -> float:
    """Chance-corrected agreement; undefined when chance agreement is total."""
    if expected >= 1.0:
        raise DegenerateExpected(f"expected agreement {expected} leaves no room above chance")
    return (observed - expected) / (1.0 - expected)


def agreement_report(
    matrix: LabelMatrix, config: AgreementConfig = DEFAULT_CONFIG
) -> AgreementReport:
    plan = build_plan(matrix, config)
    observed = _observed_all(plan, config)
    expected, ses = _expected_all(plan, config)
    values = {}
    for m, obs, exp, se in zip(METRICS, observed, expected, ses):
        values[m] = MetricAgreement(
            observed=obs, expected=exp, adjusted=adjust_kappa(obs, exp), expected_se=se
        )
    return AgreementReport(values=values, n_resamples=config.n_resamples, seed=config.seed)


def render_report_tsv(report: AgreementReport) -> str:
    """Two-decimal metric table: metric / observed / expected / adjusted."""
    lines = ["metric\tobserved\texpected\tadjusted"]
    for m in METRICS:
        v = report.values[m]
        lines.append(
            f"{METRIC_DISPLAY[m]}\t{v.observed:.2f}\t{v.expected:.2f}\t{v.adjusted:.2f}"
        )
    return "\n".join(lines) + "\n"
