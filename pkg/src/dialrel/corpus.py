"""Transcript model for two-party dialogues.

Turns arrive as flat records ({dialogue_id, turn_index, speaker, text});
this module groups them into dialogues and normalizes spoken-language
markup in each turn — bracketed non-speech events, word-final truncations
("so--"), and filler words — into typed tokens.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Iterator, Mapping

from dialrel.errors import DialrelError


class CorpusError(DialrelError):
    code = "corpus_error"


class MalformedRecord(CorpusError):
    code = "malformed_record"


class NonDyadic(CorpusError):
    code = "non_dyadic"


class IndexGap(CorpusError):
    code = "index_gap"


class UnclosedBracket(CorpusError):
    code = "unclosed_bracket"


class TokenKind(Enum):
    WORD = "word"
    LAUGHTER = "laughter"
    NOISE = "noise"
    DISFLUENCY = "disfluency"
    RESTART_FRAGMENT = "restart_fragment"


@dataclass(frozen=True)
class MarkerConfig:
    """Markup conventions of the transcript source.

    Bracketed events whose name is not a laughter marker default to noise.
    Backchannels ("uh-huh", "okay") are deliberately not in the disfluency
    lexicon: they carry discourse function and must stay ordinary words.
    """

    laughter_markers: frozenset[str] = frozenset({"laughter"})
    disfluency_lexicon: frozenset[str] = frozenset({"uh", "um", "er", "ah"})


DEFAULT_MARKERS = MarkerConfig()

_STRIP_CHARS = ".,!?;:\"'`"


@dataclass(frozen=True)
class Token:
    surface: str
    kind: TokenKind
    start: int  # [start, end) char offsets into the turn's raw_text
    end: int


@dataclass(frozen=True)
class Turn:
    turn_index: int
    speaker: str
    raw_text: str
    tokens: tuple[Token, ...]


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    topic: str
    turns: tuple[Turn, ...]

    def speakers(self) -> tuple[str, ...]:
        return tuple(sorted({t.speaker for t in self.turns}))


def word_core(surface: str) -> str:
    """Lexical core used for lexicon lookups: outer punctuation stripped, lowercased."""
    return surface.strip(_STRIP_CHARS).lower()


def _classify_word(surface: str, config: MarkerConfig) -> TokenKind:
    # truncation check first: a trailing hyphen wins over lexicon membership
    if surface.rstrip(_STRIP_CHARS).endswith("-"):
        return TokenKind.RESTART_FRAGMENT
    if word_core(surface) in config.disfluency_lexicon:
        return TokenKind.DISFLUENCY
    return TokenKind.WORD


def normalize_turn(raw_text: str, config: MarkerConfig = DEFAULT_MARKERS) -> tuple[Token, ...]:
    """Tokenize one turn; every non-whitespace character lands in exactly one span."""
    tokens: list[Token] = []
    i, n = 0, len(raw_text)
    while i < n:
        ch = raw_text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "[":
            j = raw_text.find("]", i)
            if j < 0:
                raise UnclosedBracket(f"unmatched '[' at offset {i}: {raw_text!r}")
            surface = raw_text[i : j + 1]
            name = surface[1:-1].strip().lower()
            kind = TokenKind.LAUGHTER if name in config.laughter_markers else TokenKind.NOISE
            tokens.append(Token(surface, kind, i, j + 1))
            i = j + 1
            continue
        j = i
        while j < n and not raw_text[j].isspace() and raw_text[j] != "[":
            j += 1
        surface = raw_text[i:j]
        tokens.append(Token(surface, _classify_word(surface, config), i, j))
        i = j
    return tuple(tokens)


_REQUIRED_FIELDS = ("dialogue_id", "turn_index", "speaker", "text")


def ingest_transcripts(
    records: Iterable[Mapping[str, Any]],
    config: MarkerConfig = DEFAULT_MARKERS,
) -> list[Dialogue]:
    """Group turn records into dialogues, sort, tokenize, and validate.

    Records may arrive in any order. A dialogue is rejected outright if it
    has anything other than two distinct speakers or its turn indices are
    not the consecutive integers 0..n-1.
    """
    by_id: dict[str, list[Mapping[str, Any]]] = {}
    topics: dict[str, str] = {}
    for pos, rec in enumerate(records):
        for field in _REQUIRED_FIELDS:
            if field not in rec:
                raise MalformedRecord(f"record {pos}: missing field {field!r}")
        if not isinstance(rec["turn_index"], int) or isinstance(rec["turn_index"], bool):
            raise MalformedRecord(f"record {pos}: turn_index must be an integer")
        if rec["turn_index"] < 0:
            raise MalformedRecord(f"record {pos}: turn_index must be non-negative")
        did = str(rec["dialogue_id"])
        by_id.setdefault(did, []).append(rec)
        if did not in topics and rec.get("topic"):
            topics[did] = str(rec["topic"])

    dialogues = []
    for did in sorted(by_id):
        recs = sorted(by_id[did], key=lambda r: r["turn_index"])
        indices = [r["turn_index"] for r in recs]
        if indices != list(range(len(recs))):
            raise IndexGap(f"dialogue {did}: turn indices {indices} are not consecutive from 0")
        speakers = {str(r["speaker"]) for r in recs}
        if len(speakers) != 2:
            raise NonDyadic(
                f"dialogue {did}: expected exactly 2 speakers, found {sorted(speakers)}"
            )
        turns = tuple(
            Turn(
                turn_index=r["turn_index"],
                speaker=str(r["speaker"]),
                raw_text=str(r["text"]),
                tokens=normalize_turn(str(r["text"]), config),
            )
            for r in recs
        )
        dialogues.append(Dialogue(did, topics.get(did, ""), turns))
    return dialogues


def dialogue_records(dialogues: Iterable[Dialogue]) -> Iterator[dict[str, Any]]:
    """Serialize dialogues back to the flat turn-record form (canonical order)."""
    for dialogue in dialogues:
        for turn in dialogue.turns:
            rec: dict[str, Any] = {
                "dialogue_id": dialogue.dialogue_id,
                "turn_index": turn.turn_index,
                "speaker": turn.speaker,
                "text": turn.raw_text,
            }
            if dialogue.topic:
                rec["topic"] = dialogue.topic
            yield rec
