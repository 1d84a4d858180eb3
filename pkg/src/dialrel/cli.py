"""Command-line pipeline: ingest, segment, pair, serve, agree, model, classify, report.

Configuration comes from flat KEY=VALUE files with flag overrides
(precedence: flag > file > default). All analysis randomness flows from
one --seed value; per-module generators are derived from it with a fixed
tag (agreement bootstrap: tag 1, random serving order: tag 2) via
numpy's SeedSequence, so reruns with the same inputs and seed produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from dialrel import jsonl
from dialrel.agreement import AgreementConfig, agreement_report, render_report_tsv
from dialrel.classifier import build_train_rows, evaluate, load_embeddings, loco_folds
from dialrel.contextstats import (
    Separation,
    build_rows,
    distribution_report,
    fit_ovr_logistic,
    labels_per_pair,
    likelihood_ratio_test,
    per_task_label_sums,
    two_sample_t,
)
from dialrel.corpus import dialogue_records, ingest_transcripts
from dialrel.errors import DialrelError, IOFailure
from dialrel.labels import LABELS
from dialrel.pairs import (
    DEFAULT_POLICY,
    PairPolicy,
    PairType,
    attach_context,
    export_tasks,
    generate_pairs,
    read_tasks,
)
from dialrel.segmentation import (
    edu_record,
    parse_edu,
    parse_syntax_records,
    segment_dialogue,
)
from dialrel.store import AnnotationStore, parse_annotation, read_roster, replay_log

_PAIR_TYPE_ORDER = (
    PairType.WITHIN_TURN,
    PairType.CROSS_TURN_SAME_SPEAKER,
    PairType.CROSS_TURN_DIFFERENT_SPEAKER,
)

AGREEMENT_SEED_TAG = 1
SERVING_SEED_TAG = 2


def derived_seed(seed: int, tag: int) -> int:
    """Module-specific 63-bit seed derived from the top-level seed."""
    state = np.random.SeedSequence([seed, tag]).generate_state(1, np.uint64)[0]
    return int(state % (1 << 63))


def load_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    config = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
        key, _, value = line.partition("=")
        config[key.strip()] = value.strip()
    return config


def pick(flag_value: Any, config: dict[str, str], key: str, default: Any, cast: Callable = str) -> Any:
    if flag_value is not None:
        return flag_value
    if key in config:
        raw = config[key]
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _require(path: str | None, what: str) -> Path:
    if path is None:
        raise ValueError(f"missing required path: {what}")
    p = Path(path)
    if not p.exists():
        raise IOFailure(f"{what} not found: {p}")
    return p


def _outdir(args: argparse.Namespace, config: dict[str, str]) -> Path:
    out = Path(pick(args.out, config, "out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace, config: dict[str, str]) -> int:
    transcripts = _require(pick(args.transcripts, config, "transcripts", None), "transcripts")
    out = _outdir(args, config)
    dialogues = ingest_transcripts(jsonl.read_records(transcripts))
    n = jsonl.write_records(out / "dialogues.jsonl", dialogue_records(dialogues))
    print(f"ingested {len(dialogues)} dialogues ({n} turns) -> {out / 'dialogues.jsonl'}")
    return 0


def cmd_segment(args: argparse.Namespace, config: dict[str, str]) -> int:
    transcripts = _require(pick(args.transcripts, config, "transcripts", None), "transcripts")
    syntax_path = _require(pick(args.syntax, config, "syntax", None), "syntax sidecar")
    out = _outdir(args, config)
    dialogues = ingest_transcripts(jsonl.read_records(transcripts))
    syntax = parse_syntax_records(jsonl.read_records(syntax_path))
    records = []
    n_turns = 0
    for dialogue in dialogues:
        per_turn = {
            idx: syn
            for (did, idx), syn in syntax.items()
            if did == dialogue.dialogue_id
        }
        segmented = segment_dialogue(dialogue, per_turn)
        for idx in sorted(segmented):
            n_turns += 1
            records.extend(edu_record(e) for e in segmented[idx])
    n = jsonl.write_records(out / "units.jsonl", records)
    print(f"segmented {n_turns} eligible turns into {n} units -> {out / 'units.jsonl'}")
    return 0


def cmd_pair(args: argparse.Namespace, config: dict[str, str]) -> int:
    transcripts = _require(pick(args.transcripts, config, "transcripts", None), "transcripts")
    units_path = _require(pick(args.units, config, "units", None), "units")
    out = _outdir(args, config)
    max_per = pick(args.max_per_dialogue, config, "max_per_dialogue", None, int)
    adjacency = not pick(args.all_combinations, config, "all_combinations", False, bool)
    policy = PairPolicy(max_per_dialogue=max_per, adjacency_only=adjacency)
    dialogues = {d.dialogue_id: d for d in ingest_transcripts(jsonl.read_records(transcripts))}
    units_by_dialogue: dict[str, list] = {}
    for rec in jsonl.read_records(units_path):
        edu = parse_edu(rec)
        units_by_dialogue.setdefault(edu.dialogue_id, []).append(edu)
    tasks = []
    for did in sorted(units_by_dialogue):
        dialogue = dialogues.get(did)
        if dialogue is None:
            raise IOFailure(f"units reference dialogue {did!r} missing from transcripts")
        for task in generate_pairs(dialogue, units_by_dialogue[did], policy):
            tasks.append(attach_context(task, dialogue))
    n = export_tasks(tasks, out / "tasks.jsonl")
    print(f"generated {n} tasks -> {out / 'tasks.jsonl'}")
    return 0


def cmd_serve(args: argparse.Namespace, config: dict[str, str]) -> int:
    import uvicorn

    from dialrel.server import create_app

    tasks_path = _require(pick(args.tasks, config, "tasks", None), "tasks")
    roster_path = _require(pick(args.roster, config, "roster", None), "roster")
    log_path = Path(pick(args.log, config, "log", "annotations.jsonl"))
    seed = pick(args.seed, config, "seed", 0, int)
    store = AnnotationStore(
        tasks=read_tasks(tasks_path),
        roster=read_roster(jsonl.read_records(roster_path)),
        log_path=log_path,
        serving_order=pick(args.serving_order, config, "serving_order", "document"),
        seed=derived_seed(seed, SERVING_SEED_TAG),
        fsync=pick(args.fsync, config, "fsync", False, bool),
    )
    assignments = pick(args.assignments, config, "assignments", None)
    if assignments is not None:
        for rec in jsonl.read_records(_require(assignments, "assignments")):
            store.assign_team(str(rec["team_id"]), str(rec["dialogue_id"]))
    static_dir = pick(args.static_dir, config, "static_dir", None)
    app = create_app(store, static_dir=static_dir)
    host = pick(args.bind, config, "bind", "127.0.0.1")
    port = pick(args.port, config, "port", 8787, int)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def _load_annotation_data(args: argparse.Namespace, config: dict[str, str]):
    tasks = read_tasks(_require(pick(args.tasks, config, "tasks", None), "tasks"))
    log_path = _require(pick(args.log, config, "log", None), "annotations log")
    history = replay_log(log_path)
    latest: dict[tuple[str, str], Any] = {}
    for ann in history:
        latest[(ann.task_id, ann.annotator_id)] = ann
    order = {t.task_id: i for i, t in enumerate(tasks)}
    annotations = [
        latest[k] for k in sorted(latest, key=lambda k: (order.get(k[0], len(order)), k[1]))
    ]
    return tasks, annotations


def _matrix_from(tasks, annotations, pair_type: PairType | None = None):
    from dialrel.agreement import LabelMatrix

    keep = {
        t.task_id: i
        for i, t in enumerate(t for t in tasks if pair_type is None or t.pair_type is pair_type)
    }
    annotators = sorted({a.annotator_id for a in annotations if a.task_id in keep})
    col = {a: j for j, a in enumerate(annotators)}
    cells = {
        (keep[a.task_id], col[a.annotator_id]): a.labels
        for a in annotations
        if a.task_id in keep
    }
    return LabelMatrix(items=tuple(keep), annotators=tuple(annotators), cells=cells)


def cmd_agree(args: argparse.Namespace, config: dict[str, str]) -> int:
    out = _outdir(args, config)
    tasks, annotations = _load_annotation_data(args, config)
    seed = pick(args.seed, config, "seed", 0, int)
    pair_type = pick(args.pair_type, config, "pair_type", None)
    agreement_config = AgreementConfig(
        n_resamples=pick(args.resamples, config, "resamples", 10_000, int),
        seed=derived_seed(seed, AGREEMENT_SEED_TAG),
        pooling=pick(args.pooling, config, "pooling", "per_annotator"),
        include_rejected=not pick(args.exclude_rejected, config, "exclude_rejected", False, bool),
        backend=pick(args.backend, config, "backend", "auto"),
    )
    matrix = _matrix_from(tasks, annotations, PairType(pair_type) if pair_type else None)
    report = agreement_report(matrix, agreement_config)
    jsonl.write_text(out / "agreement.tsv", render_report_tsv(report))
    jsonl.write_text(out / "agreement.json", json.dumps(report.as_dict(), indent=2) + "\n")
    print(render_report_tsv(report), end="")
    return 0


def _coefficient_tsv(fit) -> str:
    header = "label\t" + "\t".join(fit.feature_names)
    lines = [header]
    for label in fit.labels:
        coefs = fit.coefficients[label]
        lines.append(label.display_name + "\t" + "\t".join(f"{c:.2f}" for c in coefs))
    return "\n".join(lines) + "\n"


def _distribution_tsv(report) -> str:
    lines = ["pair_type\tlabel\tcount\tproportion"]
    for pair_type in _PAIR_TYPE_ORDER:
        if pair_type not in report:
            continue
        data = report[pair_type]
        for label in LABELS:
            lines.append(
                f"{pair_type.value}\t{label.display_name}\t"
                f"{int(data['counts'][label])}\t{data['proportions'][label]:.6f}"
            )
    return "\n".join(lines) + "\n"


def render_distribution_svg(report, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "dialrel"
    contexts = [pt for pt in _PAIR_TYPE_ORDER if pt in report]
    fig, axes = plt.subplots(
        1, max(len(contexts), 1), figsize=(4.5 * max(len(contexts), 1), 3.6), sharey=True
    )
    if len(contexts) <= 1:
        axes = [axes]
    names = [l.display_name for l in LABELS]
    for ax, pair_type in zip(axes, contexts):
        data = report[pair_type]
        proportions = [data["proportions"][l] for l in LABELS]
        counts = [int(data["counts"][l]) for l in LABELS]
        bars = ax.bar(range(len(LABELS)), proportions, color="#4878a8")
        for rect, count in zip(bars, counts):
            if count:
                ax.annotate(
                    str(count),
                    (rect.get_x() + rect.get_width() / 2, rect.get_height()),
                    ha="center", va="bottom", fontsize=6,
                )
        ax.set_xticks(range(len(LABELS)))
        ax.set_xticklabels(names, rotation=60, ha="right", fontsize=6)
        ax.set_title(pair_type.value, fontsize=9)
        ax.set_ylabel("proportion of pairs")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_model(args: argparse.Namespace, config: dict[str, str]) -> int:
    out = _outdir(args, config)
    tasks, annotations = _load_annotation_data(args, config)
    penalty = pick(args.penalty, config, "penalty", 0.0, float)
    rows = build_rows(annotations, tasks)

    fit_null = fit_ovr_logistic(rows, features=(), penalty=penalty)
    fit_context = fit_ovr_logistic(
        rows, features=("different_speaker", "within_turn"), penalty=penalty
    )
    context_lrt = likelihood_ratio_test(fit_null, fit_context)
    tests: dict[str, Any] = {
        "modeled_labels": [l.value for l in fit_context.labels],
        "penalty": penalty,
        "penalized": fit_context.penalized,
        "context_lrt": {
            "statistic": context_lrt.statistic,
            "df": context_lrt.df,
            "p_value": context_lrt.p_value,
        },
    }
    jsonl.write_text(out / "context_coefficients.tsv", _coefficient_tsv(fit_context))

    teams = {r.team_id for r in rows}
    if len(teams) >= 2:
        # sparse team dummies often separate; fall back to a small ridge
        # guard (both sides of the comparison refit with it) and say so
        team_penalty = penalty
        fit_team_null = fit_context
        try:
            fit_team = fit_ovr_logistic(
                rows, features=("different_speaker", "within_turn", "team"), penalty=penalty
            )
        except Separation:
            if penalty > 0.0:
                raise
            team_penalty = 0.1
            fit_team_null = fit_ovr_logistic(
                rows, features=("different_speaker", "within_turn"), penalty=team_penalty
            )
            fit_team = fit_ovr_logistic(
                rows,
                features=("different_speaker", "within_turn", "team"),
                penalty=team_penalty,
            )
        team_lrt = likelihood_ratio_test(fit_team_null, fit_team)
        tests["team_lrt"] = {
            "statistic": team_lrt.statistic,
            "df": team_lrt.df,
            "p_value": team_lrt.p_value,
            "penalized": fit_team.penalized,
            "penalty": team_penalty,
        }
        jsonl.write_text(out / "team_coefficients.tsv", _coefficient_tsv(fit_team))

    tests["labels_per_pair"] = {
        grouping: {
            pt.value: mean
            for pt, mean in sorted(
                labels_per_pair(annotations, tasks, grouping).items(), key=lambda kv: kv[0].value
            )
        }
        for grouping in ("team", "annotator")
    }
    sums = per_task_label_sums(annotations, tasks)
    comparisons = []
    ordered = [pt for pt in _PAIR_TYPE_ORDER if pt in sums and len(sums[pt]) >= 2]
    for baseline, group in zip(ordered, ordered[1:]):
        try:
            result = two_sample_t(sums[group], sums[baseline])
        except DialrelError:
            continue
        comparisons.append(
            {
                "group": group.value,
                "baseline": baseline.value,
                "mean_group": result.mean_a,
                "mean_baseline": result.mean_b,
                "t": result.t,
                "df": result.df,
                "p_value": result.p_value,
            }
        )
    tests["labels_per_pair_comparisons"] = comparisons

    distribution = distribution_report(annotations, tasks)
    jsonl.write_text(out / "label_distribution.tsv", _distribution_tsv(distribution))
    render_distribution_svg(distribution, out / "label_distribution.svg")
    jsonl.write_text(out / "model_tests.json", json.dumps(tests, indent=2) + "\n")
    print(
        f"context model: X2({context_lrt.df}) = {context_lrt.statistic:.2f}, "
        f"p = {context_lrt.p_value:.3g}"
    )
    return 0


def _classifier_tsv(report) -> str:
    lines = ["metric\tvalue"]
    lines.append(f"macro_precision\t{report.macro_precision:.4f}")
    lines.append(f"macro_recall\t{report.macro_recall:.4f}")
    lines.append(f"macro_f1\t{report.macro_f1:.4f}")
    lines.append(f"in_set_recall_overall\t{report.in_set_recall_overall:.4f}")
    lines.append(f"in_set_recall_by_group_mean\t{report.in_set_recall_by_group_mean:.4f}")
    for pair_type, ce in report.cross_entropy_by_pair_type.items():
        lines.append(f"cross_entropy[{pair_type.value}]\t{ce:.4f}")
    return "\n".join(lines) + "\n"


def _folds_tsv(report) -> str:
    lines = ["dialogue_id\tn_rows\tn_tasks\tin_set_recall\tmean_cross_entropy"]
    for fold in report.per_fold:
        lines.append(
            f"{fold['dialogue_id']}\t{fold['n_rows']}\t{fold['n_tasks']}\t"
            f"{fold['in_set_recall']:.4f}\t{fold['mean_cross_entropy']:.4f}"
        )
    return "\n".join(lines) + "\n"


def cmd_classify(args: argparse.Namespace, config: dict[str, str]) -> int:
    out = _outdir(args, config)
    tasks, annotations = _load_annotation_data(args, config)
    embeddings = load_embeddings(
        _require(pick(args.embeddings, config, "embeddings", None), "embeddings")
    )
    alpha = pick(args.alpha, config, "alpha", 1.0, float)
    score_mode = pick(args.score_mode, config, "score_mode", "softmax")
    rows = build_train_rows(annotations, tasks)
    folds = loco_folds(rows)
    report = evaluate(folds, embeddings, annotations, alpha, score_mode)
    jsonl.write_text(out / "classifier_report.json", json.dumps(report.as_dict(), indent=2) + "\n")
    jsonl.write_text(out / "classifier_report.tsv", _classifier_tsv(report))
    jsonl.write_text(out / "classifier_folds.tsv", _folds_tsv(report))
    print(_classifier_tsv(report), end="")
    return 0


def cmd_report(args: argparse.Namespace, config: dict[str, str]) -> int:
    status = cmd_agree(args, config)
    status |= cmd_model(args, config)
    if pick(args.embeddings, config, "embeddings", None) is not None:
        status |= cmd_classify(args, config)
    return status


# -- argument wiring -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialrel",
        description="Discourse relation annotation and analysis for two-party dialogue.",
    )
    parser.add_argument("--config", help="flat KEY=VALUE configuration file")
    parser.add_argument("--seed", type=int, help="top-level random seed (default 0)")
    parser.add_argument("--out", help="output directory (default ./out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and canonicalize transcripts")
    p.add_argument("--transcripts")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("segment", help="segment eligible turns into units")
    p.add_argument("--transcripts")
    p.add_argument("--syntax")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("pair", help="generate annotation tasks")
    p.add_argument("--transcripts")
    p.add_argument("--units")
    p.add_argument("--max-per-dialogue", dest="max_per_dialogue", type=int)
    p.add_argument("--all-combinations", dest="all_combinations", action="store_const", const=True)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("serve", help="serve tasks to annotators over HTTP")
    p.add_argument("--tasks")
    p.add_argument("--roster")
    p.add_argument("--log")
    p.add_argument("--assignments")
    p.add_argument("--static-dir", dest="static_dir")
    p.add_argument("--serving-order", dest="serving_order", choices=("document", "random"))
    p.add_argument("--fsync", action="store_const", const=True)
    p.add_argument("--bind")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("agree", help="inter-annotator agreement report")
    p.add_argument("--tasks")
    p.add_argument("--log")
    p.add_argument("--resamples", type=int)
    p.add_argument("--pair-type", dest="pair_type", choices=[t.value for t in PairType])
    p.add_argument("--pooling", choices=("per_annotator", "global"))
    p.add_argument("--exclude-rejected", dest="exclude_rejected", action="store_const", const=True)
    p.add_argument("--backend", choices=("auto", "compiled", "python"))
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("model", help="context-conditioned relation models")
    p.add_argument("--tasks")
    p.add_argument("--log")
    p.add_argument("--penalty", type=float)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("classify", help="conversation-wise classifier evaluation")
    p.add_argument("--tasks")
    p.add_argument("--log")
    p.add_argument("--embeddings")
    p.add_argument("--alpha", type=float)
    p.add_argument("--score-mode", dest="score_mode", choices=("softmax", "clipped"))
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="run agree + model (+ classify) together")
    p.add_argument("--tasks")
    p.add_argument("--log")
    p.add_argument("--embeddings")
    p.add_argument("--resamples", type=int)
    p.add_argument("--pair-type", dest="pair_type", choices=[t.value for t in PairType])
    p.add_argument("--pooling", choices=("per_annotator", "global"))
    p.add_argument("--exclude-rejected", dest="exclude_rejected", action="store_const", const=True)
    p.add_argument("--backend", choices=("auto", "compiled", "python"))
    p.add_argument("--penalty", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--score-mode", dest="score_mode", choices=("softmax", "clipped"))
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except DialrelError as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "detail": str(exc)}) + "\n")
        return 1
    except ValueError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
