"""The closed set of discourse relation labels used throughout the toolkit.

Eleven relations plus an explicit Other bucket for pairs where none of the
named relations applies.
"""

from __future__ import annotations

from enum import Enum


class RelationLabel(Enum):
    ACKNOWLEDGEMENT = "acknowledgement"
    BACKGROUND = "background"
    CLARIFICATION_QUESTION = "clarification_question"
    COMMENT = "comment"
    CONTINUATION = "continuation"
    CONTRAST = "contrast"
    ELABORATION = "elaboration"
    EXPLANATION = "explanation"
    NARRATION = "narration"
    QUESTION_ANSWER_PAIR = "question_answer_pair"
    RESULT = "result"
    OTHER = "other"

    @property
    def display_name(self) -> str:
        return _DISPLAY[self]


_DISPLAY = {
    RelationLabel.ACKNOWLEDGEMENT: "Acknowledgement",
    RelationLabel.BACKGROUND: "Background",
    RelationLabel.CLARIFICATION_QUESTION: "Clarification Question",
    RelationLabel.COMMENT: "Comment",
    RelationLabel.CONTINUATION: "Continuation",
    RelationLabel.CONTRAST: "Contrast",
    RelationLabel.ELABORATION: "Elaboration",
    RelationLabel.EXPLANATION: "Explanation",
    RelationLabel.NARRATION: "Narration",
    RelationLabel.QUESTION_ANSWER_PAIR: "Question-Answer Pair",
    RelationLabel.RESULT: "Result",
    RelationLabel.OTHER: "Other",
}

#: Canonical ordering used for matrices, vectors and keyboard shortcuts.
LABELS: tuple[RelationLabel, ...] = tuple(RelationLabel)
LABEL_INDEX: dict[RelationLabel, int] = {label: i for i, label in enumerate(LABELS)}


def parse_label(value: str) -> RelationLabel:
    try:
        return RelationLabel(value)
    except ValueError:
        raise ValueError(f"unknown relation label: {value!r}") from None
