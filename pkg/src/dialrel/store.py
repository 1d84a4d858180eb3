"""Task serving and durable multi-label annotation storage.

Annotations append to a line-delimited log, one JSON object per line
written with a single ``os.write`` call, so a crash can only ever lose the
line being written. The in-memory index is rebuilt by replaying the log;
a torn final line is dropped. Re-annotation of the same (task, annotator)
supersedes the earlier decision while the log keeps the full history.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import threading
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from dialrel.agreement.matrix import LabelMatrix
from dialrel.errors import DialrelError, UnknownDialogue
from dialrel.labels import LABELS, RelationLabel, parse_label
from dialrel.pairs import AnnotationTask, PairType


class StoreError(DialrelError):
    code = "store_error"


class AlreadyAssigned(StoreError):
    code = "already_assigned"


class UnknownAnnotator(StoreError):
    code = "unknown_annotator"


class UnknownTask(StoreError):
    code = "unknown_task"


class WrongTeam(StoreError):
    code = "wrong_team"


class InvalidLabels(StoreError):
    code = "invalid_labels"


class ConfidenceRange(StoreError):
    code = "confidence_range"


class CorruptLog(StoreError):
    code = "corrupt_log"


@dataclass(frozen=True)
class Annotator:
    annotator_id: str
    team_id: str


@dataclass(frozen=True)
class Assignment:
    team_id: str
    dialogue_id: str


@dataclass(frozen=True)
class Annotation:
    """One annotator's decision for one task.

    ``rejected`` means the annotator judged that no relation holds; the
    label set is then empty by definition. A non-rejected decision carries
    one or more labels. The 1-5 confidence rating is stored but optional.
    """

    task_id: str
    annotator_id: str
    labels: frozenset[RelationLabel]
    confidence: int | None = None
    rejected: bool = False
    timestamp: str = ""


@dataclass(frozen=True)
class Receipt:
    seq: int
    superseded: bool


def validate_annotation(ann: Annotation) -> None:
    if ann.rejected and ann.labels:
        raise InvalidLabels("a rejected item must carry no labels")
    if not ann.rejected and not ann.labels:
        raise InvalidLabels("a non-rejected item needs at least one label")
    if ann.confidence is not None and not (1 <= ann.confidence <= 5):
        raise ConfidenceRange(f"confidence must be in [1, 5], got {ann.confidence}")


def annotation_record(ann: Annotation) -> dict[str, Any]:
    rec: dict[str, Any] = {
        "task_id": ann.task_id,
        "annotator_id": ann.annotator_id,
        "labels": [l.value for l in LABELS if l in ann.labels],
        "rejected": ann.rejected,
        "ts": ann.timestamp,
    }
    if ann.confidence is not None:
        rec["confidence"] = ann.confidence
    return rec


def parse_annotation(record: Mapping[str, Any]) -> Annotation:
    try:
        labels = frozenset(parse_label(v) for v in record["labels"])
        ann = Annotation(
            task_id=str(record["task_id"]),
            annotator_id=str(record["annotator_id"]),
            labels=labels,
            confidence=record.get("confidence"),
            rejected=bool(record["rejected"]),
            timestamp=str(record.get("ts", "")),
        )
    except (KeyError, ValueError) as exc:
        raise InvalidLabels(f"bad annotation record: {exc}") from exc
    validate_annotation(ann)
    return ann


def replay_log(path: str | Path) -> list[Annotation]:
    """Read every complete record from the log, in append order.

    A final line without its newline terminator (the torn tail of a crash
    mid-write) is dropped. Damage anywhere else is real corruption.
    """
    path = Path(path)
    if not path.exists():
        return []
    data = path.read_bytes()
    if not data:
        return []
    lines = data.split(b"\n")
    tail = lines.pop()  # b"" when the file ends with a newline
    out = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            out.append(parse_annotation(json.loads(line.decode("utf-8"))))
        except (ValueError, InvalidLabels) as exc:
            raise CorruptLog(f"{path}: record {i + 1} is damaged: {exc}") from exc
    if tail.strip():
        try:
            out.append(parse_annotation(json.loads(tail.decode("utf-8"))))
        except (ValueError, InvalidLabels):
            pass  # torn tail: the write never completed
    return out


def _utcnow() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class AnnotationStore:
    """Serves tasks team by team and persists decisions.

    Writes are serialized by a single lock; readers take the same lock
    briefly to snapshot, so they always see a prefix of completed writes.
    """

    def __init__(
        self,
        tasks: Sequence[AnnotationTask],
        roster: Iterable[Annotator],
        log_path: str | Path,
        serving_order: str = "document",
        seed: int = 0,
        fsync: bool = False,
    ):
        if serving_order not in ("document", "random"):
            raise ValueError(f"serving_order must be 'document' or 'random', got {serving_order!r}")
        self._tasks = list(tasks)
        self._task_by_id = {t.task_id: t for t in self._tasks}
        if len(self._task_by_id) != len(self._tasks):
            raise StoreError("duplicate task ids in the task list")
        self._tasks_by_dialogue: dict[str, list[AnnotationTask]] = {}
        for task in self._tasks:
            self._tasks_by_dialogue.setdefault(task.dialogue_id, []).append(task)
        self._team_of: dict[str, str] = {}
        for a in roster:
            if a.annotator_id in self._team_of:
                raise StoreError(f"annotator {a.annotator_id!r} appears twice in the roster")
            self._team_of[a.annotator_id] = a.team_id
        self._serving_order = serving_order
        self._seed = seed
        self._fsync = fsync
        self._assignments: dict[str, str] = {}  # team -> dialogue
        self._assigned_dialogues: set[str] = set()
        self._queues: dict[str, list[str]] = {}  # team -> ordered task ids
        self._latest: dict[tuple[str, str], Annotation] = {}
        self._seq = 0
        self._lock = threading.Lock()
        self._log_path = Path(log_path)
        for ann in replay_log(self._log_path):
            self._apply(ann)
            self._seq += 1
        self._fd = os.open(self._log_path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)

    # -- lifecycle ---------------------------------------------------------

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def __enter__(self) -> "AnnotationStore":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    # -- assignment and serving --------------------------------------------

    def assign_team(self, team_id: str, dialogue_id: str) -> Assignment:
        with self._lock:
            if dialogue_id not in self._tasks_by_dialogue:
                raise UnknownDialogue(f"no tasks for dialogue {dialogue_id!r}")
            if team_id in self._assignments:
                raise AlreadyAssigned(f"team {team_id!r} already has a dialogue")
            if dialogue_id in self._assigned_dialogues:
                raise AlreadyAssigned(f"dialogue {dialogue_id!r} already has a team")
            order = [t.task_id for t in self._tasks_by_dialogue[dialogue_id]]
            if self._serving_order == "random":
                rng = np.random.default_rng([self._seed, zlib.crc32(team_id.encode("utf-8"))])
                order = [order[i] for i in rng.permutation(len(order))]
            self._assignments[team_id] = dialogue_id
            self._assigned_dialogues.add(dialogue_id)
            self._queues[team_id] = order
            return Assignment(team_id, dialogue_id)

    def assignments(self) -> dict[str, str]:
        with self._lock:
            return dict(self._assignments)

    def _team_for(self, annotator_id: str) -> str:
        team = self._team_of.get(annotator_id)
        if team is None:
            raise UnknownAnnotator(f"annotator {annotator_id!r} is not on the roster")
        return team

    def next_task(self, annotator_id: str) -> AnnotationTask | None:
        team = self._team_for(annotator_id)
        with self._lock:
            for task_id in self._queues.get(team, ()):
                if (task_id, annotator_id) not in self._latest:
                    return self._task_by_id[task_id]
        return None

    # -- recording -----------------------------------------------------------

    def record_annotation(self, ann: Annotation) -> Receipt:
        task = self._task_by_id.get(ann.task_id)
        if task is None:
            raise UnknownTask(f"no task with id {ann.task_id!r}")
        team = self._team_for(ann.annotator_id)
        if self._assignments.get(team) != task.dialogue_id:
            raise WrongTeam(
                f"annotator {ann.annotator_id!r} (team {team!r}) is not assigned "
                f"to dialogue {task.dialogue_id!r}"
            )
        validate_annotation(ann)
        if not ann.timestamp:
            ann = Annotation(
                ann.task_id, ann.annotator_id, ann.labels, ann.confidence, ann.rejected, _utcnow()
            )
        line = (json.dumps(annotation_record(ann), ensure_ascii=False) + "\n").encode("utf-8")
        with self._lock:
            superseded = (ann.task_id, ann.annotator_id) in self._latest
            os.write(self._fd, line)
            if self._fsync:
                os.fsync(self._fd)
            self._apply(ann)
            self._seq += 1
            return Receipt(seq=self._seq, superseded=superseded)

    def _apply(self, ann: Annotation) -> None:
        self._latest[(ann.task_id, ann.annotator_id)] = ann

    # -- reading ---------------------------------------------------------------

    def annotations(self) -> list[Annotation]:
        """Latest decision per (task, annotator), in task order then annotator order."""
        with self._lock:
            snapshot = dict(self._latest)
        order = {t.task_id: i for i, t in enumerate(self._tasks)}
        return [
            snapshot[k]
            for k in sorted(snapshot, key=lambda k: (order.get(k[0], len(order)), k[1]))
        ]

    def progress(self, team_id: str) -> dict[str, Any]:
        with self._lock:
            if team_id not in self._assignments:
                raise StoreError(f"team {team_id!r} has no assignment")
            queue = self._queues[team_id]
            members = sorted(a for a, t in self._team_of.items() if t == team_id)
            per_annotator = {
                a: sum(1 for tid in queue if (tid, a) in self._latest) for a in members
            }
        return {
            "team_id": team_id,
            "answered": sum(per_annotator.values()),
            "total": len(queue) * len(members),
            "tasks_total": len(queue),
            "per_annotator": per_annotator,
        }

    def label_matrix(
        self,
        dialogue: str | None = None,
        team: str | None = None,
        pair_type: PairType | None = None,
    ) -> LabelMatrix:
        """(task x annotator) label sets; rejections are explicit empty cells."""
        if team is not None:
            team_dialogue = self._assignments.get(team)
            if team_dialogue is None:
                raise StoreError(f"team {team!r} has no assignment")
            if dialogue is not None and dialogue != team_dialogue:
                raise StoreError("dialogue and team filters disagree")
            dialogue = team_dialogue
        rows = [
            t
            for t in self._tasks
            if (dialogue is None or t.dialogue_id == dialogue)
            and (pair_type is None or t.pair_type == pair_type)
        ]
        with self._lock:
            snapshot = dict(self._latest)
        row_ids = [t.task_id for t in rows]
        row_pos = {tid: i for i, tid in enumerate(row_ids)}
        annotators = sorted(
            {a for (tid, a) in snapshot if tid in row_pos}
        )
        col_pos = {a: j for j, a in enumerate(annotators)}
        cells = {
            (row_pos[tid], col_pos[a]): ann.labels
            for (tid, a), ann in snapshot.items()
            if tid in row_pos
        }
        return LabelMatrix(items=tuple(row_ids), annotators=tuple(annotators), cells=cells)


def read_roster(records: Iterable[Mapping[str, Any]]) -> list[Annotator]:
    return [Annotator(str(r["annotator_id"]), str(r["team_id"])) for r in records]
