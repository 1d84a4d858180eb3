"""Shared test fixtures: a hand-annotated dialogue with known segmentation.

The dialogue mirrors the style of informal dyadic transcripts; every
turn's syntactic flags are supplied here the way an external parser
would, and the expected unit boundaries for the key turns are frozen.
"""

from __future__ import annotations

from dialrel.corpus import Dialogue, ingest_transcripts
from dialrel.segmentation import SyntacticAnnotation

FIXTURE_DIALOGUE_ID = "dyad-01"

FIXTURE_TURNS = [
    ("A", "I don't work, though, but I used to work and,"),
    ("B", "and they discontinued them because people were coming and dumping their trash in them."),
    ("A", "The city brought ought, you know, set tr-, separate trash cans and you separated your stuff"),
    ("B", "No, I just, I noticed it Iowa and other cities like that, it's a nickel per aluminum can."),
    ("A", "Oh."),
    ("B", "So you don't see too many thrown out around the [laughter] streets."),
    ("A", "Okay."),
]


def _flags(n_words: int, verbs: list[int], roots: list[int]) -> SyntacticAnnotation:
    return SyntacticAnnotation(
        is_verb=tuple(i in verbs for i in range(n_words)),
        is_root=tuple(i in roots for i in range(n_words)),
    )


# word counts exclude restart fragments and bracketed events
FIXTURE_SYNTAX = {
    0: _flags(10, verbs=[2, 6, 8], roots=[2, 6]),
    1: _flags(14, verbs=[2, 7, 9], roots=[2]),
    2: _flags(15, verbs=[2, 5, 6, 12], roots=[2]),
    3: _flags(18, verbs=[4], roots=[4, 14]),
    4: _flags(1, verbs=[], roots=[0]),
    5: _flags(11, verbs=[3, 6], roots=[3]),
    6: _flags(1, verbs=[], roots=[0]),
}

EXPECTED_SEGMENTS = {
    0: ["I don't work, though,", "but I used to work and,"],
    1: [
        "and they discontinued them",
        "because people were coming and dumping their trash in them.",
    ],
    2: [
        "The city brought ought,",
        "you know,",
        "set tr-, separate trash cans",
        "and you separated your stuff",
    ],
    5: ["So you don't see too many thrown out around the", "streets."],
}


def fixture_records() -> list[dict]:
    return [
        {
            "dialogue_id": FIXTURE_DIALOGUE_ID,
            "turn_index": i,
            "speaker": speaker,
            "text": text,
            "topic": "recycling",
        }
        for i, (speaker, text) in enumerate(FIXTURE_TURNS)
    ]


def fixture_dialogue() -> Dialogue:
    return ingest_transcripts(fixture_records())[0]


def fixture_syntax_records() -> list[dict]:
    return [
        {
            "dialogue_id": FIXTURE_DIALOGUE_ID,
            "turn_index": idx,
            "is_verb": list(syn.is_verb),
            "is_root": list(syn.is_root),
        }
        for idx, syn in sorted(FIXTURE_SYNTAX.items())
    ]
