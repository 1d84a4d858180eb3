"""Store behaviour: assignment, serving, validation, durability."""

from __future__ import annotations

import json
import threading

import numpy as np
import pytest

from dialrel.errors import UnknownDialogue
from dialrel.labels import RelationLabel
from dialrel.pairs import PairType
from dialrel.store import (
    AlreadyAssigned,
    Annotation,
    AnnotationStore,
    Annotator,
    ConfidenceRange,
    InvalidLabels,
    UnknownAnnotator,
    UnknownTask,
    WrongTeam,
    replay_log,
)
from dialrel.corpus import ingest_transcripts
from dialrel.pairs import attach_context, generate_pairs
from dialrel.segmentation import segment_dialogue, parse_syntax_records
from synthcorpus import make_corpus

COMMENT = RelationLabel.COMMENT
ELAB = RelationLabel.ELABORATION


def build_tasks(n_dialogues=2, n_turns=6, seed=0):
    records, syntax = make_corpus(n_dialogues, n_turns, seed)
    syn = parse_syntax_records(syntax)
    tasks = []
    for dialogue in ingest_transcripts(records):
        per_turn = {i: s for (d, i), s in syn.items() if d == dialogue.dialogue_id}
        segmented = segment_dialogue(dialogue, per_turn)
        units = [e for v in segmented.values() for e in v]
        tasks.extend(attach_context(t, dialogue) for t in generate_pairs(dialogue, units))
    return tasks


def roster_for(tasks, per_team=3):
    dialogues = sorted({t.dialogue_id for t in tasks})
    return [
        Annotator(f"{d}-a{k}", f"team-{d}") for d in dialogues for k in range(per_team)
    ]


@pytest.fixture
def store(tmp_path):
    tasks = build_tasks()
    s = AnnotationStore(tasks, roster_for(tasks), tmp_path / "log.jsonl")
    yield s
    s.close()


def annotate(task_id, annotator_id, labels=(COMMENT,), rejected=False, confidence=None):
    return Annotation(
        task_id=task_id,
        annotator_id=annotator_id,
        labels=frozenset(labels),
        confidence=confidence,
        rejected=rejected,
    )


def dialogues_of(store):
    return sorted({t.dialogue_id for t in store._tasks})


def test_assign_and_reassign(store):
    d1, d2 = dialogues_of(store)
    store.assign_team("t1", d1)
    with pytest.raises(AlreadyAssigned):
        store.assign_team("t1", d2)
    with pytest.raises(AlreadyAssigned):
        store.assign_team("t9", d1)
    with pytest.raises(UnknownDialogue):
        store.assign_team("t2", "missing")


def test_nineteen_team_bijection(tmp_path):
    tasks = build_tasks(n_dialogues=19, n_turns=4)
    store = AnnotationStore(tasks, roster_for(tasks, per_team=1), tmp_path / "log.jsonl")
    dialogues = sorted({t.dialogue_id for t in tasks})
    for i, d in enumerate(dialogues):
        store.assign_team(f"team-{i}", d)
    assignments = store.assignments()
    assert len(assignments) == 19
    assert sorted(assignments.values()) == dialogues
    store.close()


def test_serving_order_and_exhaustion(store):
    d1, _ = dialogues_of(store)
    store.assign_team(f"team-{d1}", d1)
    annotator = f"{d1}-a0"
    queue = [t.task_id for t in store._tasks if t.dialogue_id == d1]
    served = []
    while True:
        task = store.next_task(annotator)
        if task is None:
            break
        served.append(task.task_id)
        store.record_annotation(annotate(task.task_id, annotator))
    assert served == queue
    assert store.next_task(annotator) is None


def test_interleaved_annotators_each_see_everything(store):
    d1, _ = dialogues_of(store)
    store.assign_team(f"team-{d1}", d1)
    a1, a2 = f"{d1}-a0", f"{d1}-a1"
    seen = {a1: [], a2: []}
    rng = np.random.default_rng(4)
    while True:
        progressed = False
        for a in (a1, a2):
            if rng.random() < 0.7:
                task = store.next_task(a)
                if task is not None:
                    seen[a].append(task.task_id)
                    store.record_annotation(annotate(task.task_id, a, labels={ELAB}))
                    progressed = True
        if store.next_task(a1) is None and store.next_task(a2) is None and not progressed:
            break
    queue = [t.task_id for t in store._tasks if t.dialogue_id == d1]
    assert seen[a1] == queue
    assert seen[a2] == queue


def test_unknown_annotator(store):
    with pytest.raises(UnknownAnnotator):
        store.next_task("nobody")


def test_record_validation(store):
    d1, _ = dialogues_of(store)
    store.assign_team(f"team-{d1}", d1)
    annotator = f"{d1}-a0"
    task = store.next_task(annotator)
    with pytest.raises(InvalidLabels):
        store.record_annotation(annotate(task.task_id, annotator, labels=()))
    with pytest.raises(InvalidLabels):
        store.record_annotation(
            annotate(task.task_id, annotator, labels={COMMENT}, rejected=True)
        )
    with pytest.raises(ConfidenceRange):
        store.record_annotation(annotate(task.task_id, annotator, confidence=9))
    with pytest.raises(UnknownTask):
        store.record_annotation(annotate("missing", annotator))
    other_annotator = f"{dialogues_of(store)[1]}-a0"
    with pytest.raises(WrongTeam):
        store.record_annotation(annotate(task.task_id, other_annotator))
    receipt = store.record_annotation(
        annotate(task.task_id, annotator, labels={ELAB, COMMENT}, confidence=4)
    )
    assert not receipt.superseded
    stored = [a for a in store.annotations() if a.task_id == task.task_id]
    assert stored[0].labels == {ELAB, COMMENT}


def test_supersession_keeps_history(store, tmp_path):
    d1, _ = dialogues_of(store)
    store.assign_team(f"team-{d1}", d1)
    annotator = f"{d1}-a0"
    task = store.next_task(annotator)
    store.record_annotation(annotate(task.task_id, annotator, labels={COMMENT}))
    receipt = store.record_annotation(annotate(task.task_id, annotator, labels={ELAB}))
    assert receipt.superseded
    latest = [a for a in store.annotations() if a.task_id == task.task_id]
    assert len(latest) == 1 and latest[0].labels == {ELAB}
    history = replay_log(store._log_path)
    assert [a.labels for a in history] == [frozenset({COMMENT}), frozenset({ELAB})]


def test_rejection_stored_as_empty_cell(store):
    d1, _ = dialogues_of(store)
    store.assign_team(f"team-{d1}", d1)
    annotator = f"{d1}-a0"
    task = store.next_task(annotator)
    store.record_annotation(annotate(task.task_id, annotator, labels=(), rejected=True))
    matrix = store.label_matrix(dialogue=d1)
    row = matrix.items.index(task.task_id)
    col = matrix.annotators.index(annotator)
    assert matrix.cells[(row, col)] == frozenset()
    # a task nobody touched has no cell at all
    untouched = matrix.items.index(store._tasks[1].task_id)
    assert (untouched, col) not in matrix.cells


def test_label_matrix_filter_and_marginals(store):
    d1, d2 = dialogues_of(store)
    store.assign_team(f"team-{d1}", d1)
    store.assign_team(f"team-{d2}", d2)
    rng = np.random.default_rng(11)
    labels = list(RelationLabel)
    for d in (d1, d2):
        for k in range(3):
            annotator = f"{d}-a{k}"
            while (task := store.next_task(annotator)) is not None:
                if rng.random() < 0.2:
                    store.record_annotation(
                        annotate(task.task_id, annotator, labels=(), rejected=True)
                    )
                else:
                    chosen = rng.choice(len(labels), size=rng.integers(1, 3), replace=False)
                    store.record_annotation(
                        annotate(task.task_id, annotator, labels={labels[c] for c in chosen})
                    )

    full = store.label_matrix()
    within = store.label_matrix(pair_type=PairType.WITHIN_TURN)
    within_ids = {t.task_id for t in store._tasks if t.pair_type is PairType.WITHIN_TURN}
    assert set(within.items) == within_ids

    # marginals equal a recount over the raw log (after supersession)
    history = replay_log(store._log_path)
    latest = {}
    for ann in history:
        latest[(ann.task_id, ann.annotator_id)] = ann
    for j, annotator in enumerate(full.annotators):
        cells = sum(1 for (r, c) in full.cells if c == j)
        recount = sum(1 for (tid, a) in latest if a == annotator)
        assert cells == recount

    by_team = store.label_matrix(team=f"team-{d1}")
    assert set(by_team.items) == {t.task_id for t in store._tasks if t.dialogue_id == d1}


def test_matrix_read_consistent_after_write(store):
    d1, _ = dialogues_of(store)
    store.assign_team(f"team-{d1}", d1)
    annotator = f"{d1}-a0"
    task = store.next_task(annotator)
    store.record_annotation(annotate(task.task_id, annotator, labels={COMMENT, ELAB}))
    matrix = store.label_matrix(dialogue=d1)
    cell = matrix.cells[(matrix.items.index(task.task_id), matrix.annotators.index(annotator))]
    assert cell == frozenset({COMMENT, ELAB})


def test_progress(store):
    d1, _ = dialogues_of(store)
    team = f"team-{d1}"
    store.assign_team(team, d1)
    annotator = f"{d1}-a0"
    task = store.next_task(annotator)
    store.record_annotation(annotate(task.task_id, annotator))
    progress = store.progress(team)
    n_tasks = len([t for t in store._tasks if t.dialogue_id == d1])
    assert progress["tasks_total"] == n_tasks
    assert progress["total"] == n_tasks * 3
    assert progress["answered"] == 1
    assert progress["per_annotator"][annotator] == 1


def test_restart_replays_state(tmp_path):
    tasks = build_tasks()
    log = tmp_path / "log.jsonl"
    with AnnotationStore(tasks, roster_for(tasks), log) as store:
        dialogue = tasks[0].dialogue_id
        store.assign_team(f"team-{dialogue}", dialogue)
        annotator = f"{dialogue}-a0"
        first = store.next_task(annotator)
        store.record_annotation(annotate(first.task_id, annotator, labels={ELAB}))
    with AnnotationStore(tasks, roster_for(tasks), log) as reopened:
        reopened.assign_team(f"team-{tasks[0].dialogue_id}", tasks[0].dialogue_id)
        assert reopened.next_task(f"{tasks[0].dialogue_id}-a0").task_id != first.task_id
        stored = [a for a in reopened.annotations() if a.task_id == first.task_id]
        assert stored[0].labels == {ELAB}


def test_truncated_tail_is_dropped(tmp_path):
    tasks = build_tasks()
    log = tmp_path / "log.jsonl"
    with AnnotationStore(tasks, roster_for(tasks), log) as store:
        dialogue = tasks[0].dialogue_id
        store.assign_team(f"team-{dialogue}", dialogue)
        annotator = f"{dialogue}-a0"
        for _ in range(3):
            task = store.next_task(annotator)
            store.record_annotation(annotate(task.task_id, annotator))
    intact = replay_log(log)
    assert len(intact) == 3
    data = log.read_bytes()
    torn = tmp_path / "torn.jsonl"
    torn.write_bytes(data[:-7])  # cut into the final record
    assert replay_log(torn) == intact[:2]


def test_crash_injection_never_yields_torn_records(tmp_path):
    tasks = build_tasks()
    log = tmp_path / "log.jsonl"
    with AnnotationStore(tasks, roster_for(tasks), log) as store:
        dialogue = tasks[0].dialogue_id
        store.assign_team(f"team-{dialogue}", dialogue)
        recorded = []
        for k in range(3):
            annotator = f"{dialogue}-a{k}"
            while (task := store.next_task(annotator)) is not None:
                ann = annotate(task.task_id, annotator, labels={COMMENT})
                store.record_annotation(ann)
                recorded.append((task.task_id, annotator))
    data = log.read_bytes()
    line_ends = [i + 1 for i, b in enumerate(data) if b == 0x0A]
    rng = np.random.default_rng(21)
    for cut in rng.integers(1, len(data), size=50):
        partial = tmp_path / "partial.jsonl"
        partial.write_bytes(data[: int(cut)])
        replayed = replay_log(partial)
        # every replayed record is complete and a prefix of what was recorded
        n_complete = sum(1 for end in line_ends if end <= cut)
        assert len(replayed) == n_complete
        assert [(a.task_id, a.annotator_id) for a in replayed] == recorded[:n_complete]


def test_concurrent_writers_single_service(tmp_path):
    tasks = build_tasks(n_dialogues=2, n_turns=8)
    log = tmp_path / "log.jsonl"
    store = AnnotationStore(tasks, roster_for(tasks, per_team=4), log)
    dialogue = tasks[0].dialogue_id
    store.assign_team(f"team-{dialogue}", dialogue)
    served: dict[str, list[str]] = {}
    errors = []

    def worker(annotator):
        served[annotator] = []
        try:
            while (task := store.next_task(annotator)) is not None:
                served[annotator].append(task.task_id)
                store.record_annotation(annotate(task.task_id, annotator))
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [
        threading.Thread(target=worker, args=(f"{dialogue}-a{k}",)) for k in range(4)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    queue = [t.task_id for t in tasks if t.dialogue_id == dialogue]
    for annotator, seen in served.items():
        assert seen == queue  # exactly once each, in order
    store.close()
    assert len(replay_log(log)) == len(queue) * 4


def test_log_is_valid_jsonl(tmp_path):
    tasks = build_tasks()
    log = tmp_path / "log.jsonl"
    with AnnotationStore(tasks, roster_for(tasks), log) as store:
        dialogue = tasks[0].dialogue_id
        store.assign_team(f"team-{dialogue}", dialogue)
        annotator = f"{dialogue}-a0"
        task = store.next_task(annotator)
        store.record_annotation(
            annotate(task.task_id, annotator, labels={ELAB}, confidence=3)
        )
    line = json.loads(log.read_text().splitlines()[0])
    assert line["labels"] == ["elaboration"]
    assert line["confidence"] == 3
    assert line["rejected"] is False
    assert line["ts"]
