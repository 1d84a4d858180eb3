"""Candidate (first-argument, second-argument) pair generation.

Three contexts are distinguished: both units inside one turn, units across
adjacent turns by different speakers, and units across turns by the same
speaker with exactly one intervening turn. Each emitted task carries up to
two turns of preceding and following dialogue for the annotator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

from dialrel.corpus import Dialogue
from dialrel.errors import DialrelError, UnknownDialogue
from dialrel.segmentation import (
    CDU,
    EDU,
    DiscourseUnit,
    parse_edu,
    edu_record,
    unit_ids,
    unit_position,
    unit_text,
    unit_turns,
)
from dialrel import jsonl


class PairError(DialrelError):
    code = "pair_error"


class PairType(Enum):
    WITHIN_TURN = "within_turn"
    CROSS_TURN_SAME_SPEAKER = "cross_same"
    CROSS_TURN_DIFFERENT_SPEAKER = "cross_diff"


@dataclass(frozen=True)
class ContextTurn:
    turn_index: int
    speaker: str
    text: str


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    dialogue_id: str
    pair_type: PairType
    pi1: DiscourseUnit
    pi2: DiscourseUnit
    context_before: tuple[ContextTurn, ...] = ()
    context_after: tuple[ContextTurn, ...] = ()


@dataclass(frozen=True)
class PairPolicy:
    """How many candidates to emit and whether to restrict to adjacent units."""

    max_per_dialogue: int | None = None
    adjacency_only: bool = True


DEFAULT_POLICY = PairPolicy()


def task_id_for(dialogue_id: str, pi1: DiscourseUnit, pi2: DiscourseUnit) -> str:
    key = f"{dialogue_id}|{','.join(unit_ids(pi1))}|{','.join(unit_ids(pi2))}"
    return hashlib.sha1(key.encode("utf-8")).hexdigest()[:12]


def classify_pair(dialogue: Dialogue, pi1: DiscourseUnit, pi2: DiscourseUnit) -> PairType:
    """Recompute the pair type from the units and their dialogue."""
    first1, last1 = unit_turns(pi1)
    first2, last2 = unit_turns(pi2)
    if unit_position(pi2) <= unit_position(pi1):
        raise PairError("first argument must precede the second in document order")
    speaker_of = {t.turn_index: t.speaker for t in dialogue.turns}
    if first1 == last1 == first2 == last2:
        return PairType.WITHIN_TURN
    gap = first2 - last1
    if gap == 1 and speaker_of[last1] != speaker_of[first2]:
        return PairType.CROSS_TURN_DIFFERENT_SPEAKER
    if gap == 2 and speaker_of[last1] == speaker_of[first2]:
        return PairType.CROSS_TURN_SAME_SPEAKER
    raise PairError(
        f"units at turns {last1} and {first2} fit no pair type "
        "(need same turn, adjacent different-speaker turns, or same speaker two apart)"
    )


def generate_pairs(
    dialogue: Dialogue,
    units: Iterable[DiscourseUnit],
    policy: PairPolicy = DEFAULT_POLICY,
) -> list[AnnotationTask]:
    """Emit candidate tasks for one dialogue.

    Within-turn candidates pair consecutive units of a turn. Cross-turn
    candidates link the last unit of the earlier turn to the first unit of
    the later turn (all ordered combinations instead when
    ``policy.adjacency_only`` is off). Units spanning several turns are
    not paired automatically.
    """
    speaker_of = {t.turn_index: t.speaker for t in dialogue.turns}
    by_turn: dict[int, list[DiscourseUnit]] = {}
    for unit in units:
        first, last = unit_turns(unit)
        if first != last:
            continue
        if first not in speaker_of:
            raise UnknownDialogue(f"unit at turn {first} does not belong to {dialogue.dialogue_id}")
        by_turn.setdefault(first, []).append(unit)
    for turn_units in by_turn.values():
        turn_units.sort(key=unit_position)

    candidates: list[tuple[DiscourseUnit, DiscourseUnit, PairType]] = []
    for t in sorted(by_turn):
        turn_units = by_turn[t]
        if policy.adjacency_only:
            candidates.extend(
                (a, b, PairType.WITHIN_TURN) for a, b in zip(turn_units, turn_units[1:])
            )
        else:
            candidates.extend(
                (turn_units[i], turn_units[j], PairType.WITHIN_TURN)
                for i in range(len(turn_units))
                for j in range(i + 1, len(turn_units))
            )
        for gap, pair_type in (
            (1, PairType.CROSS_TURN_DIFFERENT_SPEAKER),
            (2, PairType.CROSS_TURN_SAME_SPEAKER),
        ):
            other = t + gap
            if other not in by_turn:
                continue
            same_speaker = speaker_of[t] == speaker_of[other]
            if (pair_type is PairType.CROSS_TURN_DIFFERENT_SPEAKER) == same_speaker:
                continue
            if policy.adjacency_only:
                candidates.append((turn_units[-1], by_turn[other][0], pair_type))
            else:
                candidates.extend(
                    (a, b, pair_type) for a in turn_units for b in by_turn[other]
                )

    seen: set[tuple[tuple[str, ...], tuple[str, ...]]] = set()
    tasks = []
    for pi1, pi2, pair_type in candidates:
        key = (unit_ids(pi1), unit_ids(pi2))
        if key in seen:
            continue
        seen.add(key)
        tasks.append(
            AnnotationTask(
                task_id=task_id_for(dialogue.dialogue_id, pi1, pi2),
                dialogue_id=dialogue.dialogue_id,
                pair_type=pair_type,
                pi1=pi1,
                pi2=pi2,
            )
        )
    tasks.sort(key=lambda t: (unit_position(t.pi1), unit_position(t.pi2), t.pair_type.value))
    if policy.max_per_dialogue is not None:
        tasks = tasks[: policy.max_per_dialogue]
    return tasks


def attach_context(task: AnnotationTask, dialogue: Dialogue) -> AnnotationTask:
    """Fill in up to two turns of context on each side, truncated at the edges."""
    if task.dialogue_id != dialogue.dialogue_id:
        raise UnknownDialogue(
            f"task {task.task_id} belongs to {task.dialogue_id!r}, not {dialogue.dialogue_id!r}"
        )
    earliest = unit_turns(task.pi1)[0]
    latest = unit_turns(task.pi2)[1]
    if latest >= len(dialogue.turns):
        raise UnknownDialogue(f"task {task.task_id} references turn {latest} beyond the dialogue")
    as_context = lambda t: ContextTurn(t.turn_index, t.speaker, t.raw_text)
    before = tuple(as_context(t) for t in dialogue.turns[max(0, earliest - 2) : earliest])
    after = tuple(as_context(t) for t in dialogue.turns[latest + 1 : latest + 3])
    return replace(task, context_before=before, context_after=after)


def _unit_payload(unit: DiscourseUnit, style: str) -> dict[str, Any]:
    members = [unit] if isinstance(unit, EDU) else list(unit.members)
    payload: dict[str, Any] = {
        "unit_ids": list(unit_ids(unit)),
        "text": unit_text(unit),
        "style": style,
        "units": [edu_record(e) for e in members],
    }
    if isinstance(unit, CDU):
        payload["cdu_id"] = unit.cdu_id
    return payload


def _parse_unit(payload: Mapping[str, Any]) -> DiscourseUnit:
    members = tuple(parse_edu(rec) for rec in payload["units"])
    if "cdu_id" in payload:
        return CDU(cdu_id=str(payload["cdu_id"]), dialogue_id=members[0].dialogue_id, members=members)
    return members[0]


def task_record(task: AnnotationTask) -> dict[str, Any]:
    return {
        "task_id": task.task_id,
        "dialogue_id": task.dialogue_id,
        "pair_type": task.pair_type.value,
        "pi1": _unit_payload(task.pi1, "italic"),
        "pi2": _unit_payload(task.pi2, "bold"),
        "context_before": [
            {"turn_index": c.turn_index, "speaker": c.speaker, "text": c.text}
            for c in task.context_before
        ],
        "context_after": [
            {"turn_index": c.turn_index, "speaker": c.speaker, "text": c.text}
            for c in task.context_after
        ],
    }


def parse_task(record: Mapping[str, Any]) -> AnnotationTask:
    return AnnotationTask(
        task_id=str(record["task_id"]),
        dialogue_id=str(record["dialogue_id"]),
        pair_type=PairType(record["pair_type"]),
        pi1=_parse_unit(record["pi1"]),
        pi2=_parse_unit(record["pi2"]),
        context_before=tuple(
            ContextTurn(int(c["turn_index"]), str(c["speaker"]), str(c["text"]))
            for c in record["context_before"]
        ),
        context_after=tuple(
            ContextTurn(int(c["turn_index"]), str(c["speaker"]), str(c["text"]))
            for c in record["context_after"]
        ),
    )


def export_tasks(tasks: Iterable[AnnotationTask], path: str | Path) -> int:
    ordered = sorted(
        tasks,
        key=lambda t: (t.dialogue_id, unit_position(t.pi1), unit_position(t.pi2)),
    )
    return jsonl.write_records(path, (task_record(t) for t in ordered))


def read_tasks(path: str | Path) -> list[AnnotationTask]:
    return [parse_task(rec) for rec in jsonl.read_records(path)]
