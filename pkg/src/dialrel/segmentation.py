"""Eligibility filtering and clause-level segmentation of dialogue turns.

A turn is considered for annotation only when an external syntactic pass
reports enough clausal material (two roots or two verbs). Eligible turns
are split into elementary discourse units (EDUs); runs of adjacent EDUs by
one speaker can then be grouped into a complex discourse unit (CDU) that
acts as a single relation argument.

The syntactic flags are input, not computed here: a sidecar record per
turn supplies one (is_verb, is_root) pair per word token, so any external
tagger or parser can drive the segmenter.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Union

from dialrel.corpus import Dialogue, Token, TokenKind, Turn, word_core
from dialrel.errors import DialrelError


class SegmentationError(DialrelError):
    code = "segmentation_error"


class AlignmentError(SegmentationError):
    code = "alignment_error"


class NotEligible(SegmentationError):
    code = "not_eligible"


class NonContiguous(SegmentationError):
    code = "non_contiguous"


class CrossSpeaker(SegmentationError):
    code = "cross_speaker"


class UnknownEDU(SegmentationError):
    code = "unknown_edu"


@dataclass(frozen=True)
class SyntacticAnnotation:
    """Per-word-token parse flags for one turn (aligned to WORD tokens only)."""

    is_verb: tuple[bool, ...]
    is_root: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.is_verb) != len(self.is_root):
            raise AlignmentError(
                f"is_verb has {len(self.is_verb)} flags but is_root has {len(self.is_root)}"
            )


@dataclass(frozen=True)
class SegmentationRules:
    """Boundary lexicons and the eligibility reading.

    ``eligibility`` picks how "two roots or verbs" is counted:
    "either" requires >=2 roots or >=2 verbs; "combined" requires >=2
    tokens that are a root or a verb.
    """

    connective_lexicon: frozenset[str] = frozenset({"and", "but", "because", "so", "or"})
    parenthetical_lexicon: tuple[tuple[str, ...], ...] = (("you", "know"), ("i", "mean"))
    eligibility: str = "either"


DEFAULT_RULES = SegmentationRules()


@dataclass(frozen=True)
class EDU:
    """An elementary discourse unit: a token range within a single turn."""

    edu_id: str
    dialogue_id: str
    turn_index: int
    start_token: int  # [start_token, end_token) within the turn's token list
    end_token: int
    text: str


@dataclass(frozen=True)
class CDU:
    """Adjacent same-speaker EDUs acting jointly as one relation argument."""

    cdu_id: str
    dialogue_id: str
    members: tuple[EDU, ...]

    def __post_init__(self) -> None:
        if len(self.members) < 2:
            raise NonContiguous("a CDU needs at least two member EDUs")

    @property
    def member_ids(self) -> tuple[str, ...]:
        return tuple(e.edu_id for e in self.members)

    @property
    def text(self) -> str:
        return " || ".join(e.text for e in self.members)


DiscourseUnit = Union[EDU, CDU]


def unit_ids(unit: DiscourseUnit) -> tuple[str, ...]:
    return (unit.edu_id,) if isinstance(unit, EDU) else unit.member_ids


def unit_text(unit: DiscourseUnit) -> str:
    return unit.text


def unit_turns(unit: DiscourseUnit) -> tuple[int, int]:
    """(first, last) turn index covered by the unit."""
    if isinstance(unit, EDU):
        return unit.turn_index, unit.turn_index
    turns = [e.turn_index for e in unit.members]
    return min(turns), max(turns)


def unit_position(unit: DiscourseUnit) -> tuple[int, int]:
    """Document-order sort key (first turn, first token)."""
    if isinstance(unit, EDU):
        return unit.turn_index, unit.start_token
    first = min(unit.members, key=lambda e: (e.turn_index, e.start_token))
    return first.turn_index, first.start_token


def word_token_indices(turn: Turn) -> list[int]:
    return [i for i, tok in enumerate(turn.tokens) if tok.kind is TokenKind.WORD]


def _check_alignment(turn: Turn, syn: SyntacticAnnotation) -> list[int]:
    words = word_token_indices(turn)
    if len(words) != len(syn.is_verb):
        raise AlignmentError(
            f"turn {turn.turn_index}: {len(words)} word tokens but "
            f"{len(syn.is_verb)} syntactic flags"
        )
    return words


def turn_is_eligible(
    turn: Turn, syn: SyntacticAnnotation, rules: SegmentationRules = DEFAULT_RULES
) -> bool:
    _check_alignment(turn, syn)
    n_roots = sum(syn.is_root)
    n_verbs = sum(syn.is_verb)
    if rules.eligibility == "combined":
        return sum(v or r for v, r in zip(syn.is_verb, syn.is_root)) >= 2
    return n_roots >= 2 or n_verbs >= 2


def segment_turn(
    turn: Turn,
    syn: SyntacticAnnotation,
    rules: SegmentationRules = DEFAULT_RULES,
    dialogue_id: str = "",
) -> list[EDU]:
    """Split an eligible turn into EDUs.

    Boundary placement, in order:
      1. non-speech tokens (laughter/noise) are fenced off and excluded
         from every EDU;
      2. parenthetical discourse markers ("you know") become their own unit;
      3. a clause-initial connective opens a new unit when the material up
         to the next connective carries a verb that is not the word
         immediately after the connective — an immediately following verb
         signals a conjoined predicate ("coming and dumping"), not a new
         clause.

    Restart fragments ("set tr-,") ride along inside whichever unit they
    fall into; they never count as unit content (an EDU must keep at least
    one word token) and never trigger boundaries on their own.
    """
    if not turn_is_eligible(turn, syn, rules):
        raise NotEligible(f"turn {turn.turn_index} lacks the required clausal material")
    tokens = turn.tokens
    words = word_token_indices(turn)
    cores = [word_core(tokens[i].surface) for i in words]

    boundaries = {0, len(tokens)}
    excluded = set()
    for i, tok in enumerate(tokens):
        if tok.kind in (TokenKind.LAUGHTER, TokenKind.NOISE):
            excluded.add(i)
            boundaries.add(i)
            boundaries.add(i + 1)

    for phrase in rules.parenthetical_lexicon:
        k = len(phrase)
        w = 0
        while w + k <= len(words):
            if tuple(cores[w : w + k]) == tuple(phrase):
                boundaries.add(words[w])
                boundaries.add(words[w + k - 1] + 1)
                w += k
            else:
                w += 1

    connective_ws = [w for w, core in enumerate(cores) if core in rules.connective_lexicon]
    for pos, w in enumerate(connective_ws):
        nxt = connective_ws[pos + 1] if pos + 1 < len(connective_ws) else len(words)
        span = range(w + 1, nxt)
        if not span:
            continue
        if syn.is_verb[w + 1]:
            continue
        if any(syn.is_verb[p] for p in span):
            boundaries.add(words[w])

    cuts = sorted(boundaries)
    spans = [(a, b) for a, b in zip(cuts, cuts[1:]) if b > a]

    # merge word-less speech spans (stray restarts/disfluencies) into an
    # adjacent EDU; marker runs stay outside every EDU
    merged: list[tuple[int, int]] = []
    carry: tuple[int, int] | None = None
    for a, b in spans:
        if all(i in excluded for i in range(a, b)):
            if carry is not None and merged and merged[-1][1] == carry[0]:
                merged[-1] = (merged[-1][0], carry[1])
            carry = None  # a stranded word-less span is simply excluded
            continue
        if carry is not None:
            a = carry[0]
            carry = None
        if any(tokens[i].kind is TokenKind.WORD for i in range(a, b)):
            merged.append((a, b))
        else:
            carry = (a, b)
    if carry is not None:
        if merged and merged[-1][1] == carry[0]:
            merged[-1] = (merged[-1][0], carry[1])

    edus = []
    for k, (a, b) in enumerate(merged):
        edus.append(
            EDU(
                edu_id=f"{dialogue_id}:{turn.turn_index}:{k}",
                dialogue_id=dialogue_id,
                turn_index=turn.turn_index,
                start_token=a,
                end_token=b,
                text=turn.raw_text[tokens[a].start : tokens[b - 1].end],
            )
        )
    return edus


def segment_dialogue(
    dialogue: Dialogue,
    syntax: Mapping[int, SyntacticAnnotation],
    rules: SegmentationRules = DEFAULT_RULES,
) -> dict[int, list[EDU]]:
    """Segment every eligible turn; turns without a sidecar entry are skipped."""
    out: dict[int, list[EDU]] = {}
    for turn in dialogue.turns:
        syn = syntax.get(turn.turn_index)
        if syn is None:
            continue
        if not turn_is_eligible(turn, syn, rules):
            continue
        out[turn.turn_index] = segment_turn(turn, syn, rules, dialogue.dialogue_id)
    return out


class EDUIndex:
    """Document-ordered EDU lookup, with speaker attribution for CDU checks."""

    def __init__(self, entries: Iterable[tuple[EDU, str]]):
        ordered = sorted(entries, key=lambda e: (e[0].dialogue_id, e[0].turn_index, e[0].start_token))
        self._by_id: dict[str, EDU] = {}
        self._speaker: dict[str, str] = {}
        self._position: dict[str, int] = {}
        per_speaker: dict[tuple[str, str], int] = {}
        for edu, speaker in ordered:
            if edu.edu_id in self._by_id:
                raise SegmentationError(f"duplicate edu_id {edu.edu_id!r}")
            self._by_id[edu.edu_id] = edu
            self._speaker[edu.edu_id] = speaker
            key = (edu.dialogue_id, speaker)
            self._position[edu.edu_id] = per_speaker.get(key, 0)
            per_speaker[key] = self._position[edu.edu_id] + 1

    @classmethod
    def from_dialogue(cls, dialogue: Dialogue, edus: Iterable[EDU]) -> "EDUIndex":
        speaker_of = {t.turn_index: t.speaker for t in dialogue.turns}
        return cls((edu, speaker_of[edu.turn_index]) for edu in edus)

    def get(self, edu_id: str) -> EDU:
        try:
            return self._by_id[edu_id]
        except KeyError:
            raise UnknownEDU(f"no EDU with id {edu_id!r}") from None

    def speaker(self, edu_id: str) -> str:
        return self._speaker[edu_id]

    def speaker_position(self, edu_id: str) -> int:
        return self._position[edu_id]


def build_cdu(member_ids: Iterable[str], index: EDUIndex) -> CDU:
    """Group >=2 known, same-dialogue, same-speaker, contiguous EDUs into a CDU.

    Contiguity is judged within the speaker's own material: the members
    must be consecutive in the document-ordered sequence of that speaker's
    EDUs (another speaker's interleaved turn does not break the run).
    """
    ids = list(member_ids)
    if len(ids) < 2:
        raise NonContiguous("a CDU needs at least two member EDUs")
    members = [index.get(i) for i in ids]
    dialogue_ids = {m.dialogue_id for m in members}
    if len(dialogue_ids) != 1:
        raise NonContiguous(f"members span dialogues {sorted(dialogue_ids)}")
    speakers = {index.speaker(i) for i in ids}
    if len(speakers) != 1:
        raise CrossSpeaker(f"members span speakers {sorted(speakers)}")
    positions = [index.speaker_position(i) for i in ids]
    if positions != list(range(positions[0], positions[0] + len(ids))):
        raise NonContiguous(f"members are not contiguous in document order: {ids}")
    digest = hashlib.sha1("|".join(ids).encode("utf-8")).hexdigest()[:10]
    return CDU(cdu_id=f"cdu-{digest}", dialogue_id=members[0].dialogue_id, members=tuple(members))


def edu_record(edu: EDU) -> dict[str, Any]:
    return {
        "edu_id": edu.edu_id,
        "dialogue_id": edu.dialogue_id,
        "turn_index": edu.turn_index,
        "start_token": edu.start_token,
        "end_token": edu.end_token,
        "text": edu.text,
    }


def parse_edu(record: Mapping[str, Any]) -> EDU:
    return EDU(
        edu_id=str(record["edu_id"]),
        dialogue_id=str(record["dialogue_id"]),
        turn_index=int(record["turn_index"]),
        start_token=int(record["start_token"]),
        end_token=int(record["end_token"]),
        text=str(record["text"]),
    )


def parse_syntax_records(
    records: Iterable[Mapping[str, Any]],
) -> dict[tuple[str, int], SyntacticAnnotation]:
    """Read sidecar records {dialogue_id, turn_index, is_verb[], is_root[]}."""
    out: dict[tuple[str, int], SyntacticAnnotation] = {}
    for rec in records:
        key = (str(rec["dialogue_id"]), int(rec["turn_index"]))
        out[key] = SyntacticAnnotation(
            is_verb=tuple(bool(v) for v in rec["is_verb"]),
            is_root=tuple(bool(v) for v in rec["is_root"]),
        )
    return out
