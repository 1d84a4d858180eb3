#!/usr/bin/env python3
"""Compare the pure-Python and compiled agreement kernels.

Builds a corpus-scale matrix (19 teams of 6 annotators, 25 co-annotated
items per team, multi-label cells) and times the observed pass plus the
bootstrap at a configurable number of resamples on each backend. Results
are cross-checked to agree exactly.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dialrel.agreement import (
    METRICS,
    AgreementConfig,
    LabelMatrix,
    available_backends,
    build_plan,
    observed_metric,
)
from dialrel.agreement.metrics import _expected_all, _observed_all

LABELS = [f"rel{i}" for i in range(12)]


def corpus_scale_matrix(
    n_teams: int = 19, annotators_per_team: int = 6, items_per_team: int = 25, seed: int = 0
) -> LabelMatrix:
    rng = np.random.default_rng(seed)
    data: dict[str, dict[str, set]] = {}
    for team in range(n_teams):
        for i in range(items_per_team):
            item = f"team{team:02d}-item{i:02d}"
            row = {}
            for a in range(annotators_per_team):
                if rng.random() < 0.05:
                    continue
                if rng.random() < 0.08:
                    row[f"team{team:02d}-ann{a}"] = set()
                else:
                    k = int(rng.integers(1, 4))
                    row[f"team{team:02d}-ann{a}"] = set(
                        rng.choice(LABELS, size=k, replace=False)
                    )
            data[item] = row
    return LabelMatrix.from_nested(data)


def run(backend: str, matrix: LabelMatrix, resamples: int, seed: int) -> tuple[dict, float, float]:
    config = AgreementConfig(n_resamples=resamples, seed=seed, backend=backend)
    plan = build_plan(matrix, config)

    started = time.perf_counter()
    observed = _observed_all(plan, config)
    observed_time = time.perf_counter() - started

    started = time.perf_counter()
    expected, _ = _expected_all(plan, config)
    bootstrap_time = time.perf_counter() - started

    values = {m: (observed[i], expected[i]) for i, m in enumerate(METRICS)}
    return values, observed_time, bootstrap_time


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--resamples", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=123)
    args = parser.parse_args()

    matrix = corpus_scale_matrix()
    n_cells = len(matrix.cells)
    print(
        f"matrix: {len(matrix.items)} items x {len(matrix.annotators)} annotators, "
        f"{n_cells} cells, {args.resamples} resamples"
    )

    results = {}
    for backend in available_backends():
        values, observed_time, bootstrap_time = run(backend, matrix, args.resamples, args.seed)
        results[backend] = values
        per_round = bootstrap_time / args.resamples * 1e6
        print(
            f"{backend:>9}: observed {observed_time * 1e3:8.2f} ms   "
            f"bootstrap {bootstrap_time:8.3f} s   ({per_round:8.1f} us/round)"
        )

    if len(results) == 2:
        py, compiled = results["python"], results["compiled"]
        worst = max(
            max(abs(py[m][0] - compiled[m][0]), abs(py[m][1] - compiled[m][1])) for m in METRICS
        )
        print(f"backend agreement: max |difference| = {worst:.3e}")
        if worst != 0.0:
            raise SystemExit("backends disagree")
    else:
        print("compiled backend not built; showing the pure-Python numbers only")


if __name__ == "__main__":
    main()
