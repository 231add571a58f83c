"""Transcript schema, tokenization, vocabulary and example construction.

Transcripts persist as JSON lines with a versioned ``format`` field
(``oc-transcript-1``). Every stored event log replays cleanly through the
engine, which is what makes downstream statistics trustworthy.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .engine import Event, Message, Outcome, Timing
from .world import Observation, World, observe, world_from_dict, world_to_dict

TRANSCRIPT_FORMAT = "oc-transcript-1"

UNK = "<unk>"
YOU = "<you>"
THEM = "<them>"
EOD = "<eod>"

MIN_TOKEN_COUNT = 10


# ---------------------------------------------------------------------------
# Tokenization: treebank-style rules (punctuation splitting, clitic handling),
# applied in order, then lowercased. Kept self-contained so tokenization is
# reproducible without external models.

# Double quotes convert to directional quote tokens (`` / ''); a pair of
# bare apostrophes is left alone so that re-tokenizing tokenized output is
# a no-op.
_STARTING_QUOTES = [
    (re.compile(r'^"'), r"``"),
    (re.compile(r"(``)"), r" \1 "),
    (re.compile(r'([ (\[{<])(")'), r"\1 `` "),
]

_PUNCTUATION = [
    # lookahead instead of consuming the follower, so runs of punctuation
    # split completely in one pass
    (re.compile(r"([:,])(?=[^\d])"), r" \1 "),
    (re.compile(r"([:,])$"), r" \1 "),
    (re.compile(r"\.\.\."), r" ... "),
    (re.compile(r"[;@#$%&]"), r" \g<0> "),
    (re.compile(r'([^\.])(\.)([\]\)}>"\']*)\s*$'), r"\1 \2\3 "),
    (re.compile(r"[?!]"), r" \g<0> "),
    (re.compile(r"([^'])' "), r"\1 ' "),
    (re.compile(r"([^'])'$"), r"\1 '"),
]

_PARENS_BRACKETS = [(re.compile(r"[\]\[\(\)\{\}\<\>]"), r" \g<0> ")]

_DOUBLE_DASHES = [(re.compile(r"--"), r" -- ")]

_ENDING_QUOTES = [
    (re.compile(r'"'), " '' "),
    (re.compile(r"(\S)(\'\')"), r"\1 \2 "),
    (re.compile(r"([^' ])('[sS]|'[mM]|'[dD]|') "), r"\1 \2 "),
    (re.compile(r"([^' ])('ll|'LL|'re|'RE|'ve|'VE|n't|N'T) "), r"\1 \2 "),
]

_CONTRACTIONS = [
    re.compile(r"(?i)\b(can)(not)\b"),
    re.compile(r"(?i)\b(d)('ye)\b"),
    re.compile(r"(?i)\b(gim)(me)\b"),
    re.compile(r"(?i)\b(gon)(na)\b"),
    re.compile(r"(?i)\b(got)(ta)\b"),
    re.compile(r"(?i)\b(lem)(me)\b"),
    re.compile(r"(?i)\b(mor)('n)\b"),
    re.compile(r"(?i)\b(wan)(na)\s"),
]

_CONTRACTIONS_LEADING = [
    re.compile(r"(?i) ('t)(is)\b"),
    re.compile(r"(?i) ('t)(was)\b"),
]


def tokenize(text: str) -> list[str]:
    """Split ``text`` into lowercased tokens.

    Punctuation becomes separate tokens and clitics (n't, 's, 'm, 're,
    've, 'll, 'd) split off their host word. Deterministic; the empty
    string yields an empty list.
    """
    for regexp, sub in _STARTING_QUOTES:
        text = regexp.sub(sub, text)
    for regexp, sub in _PUNCTUATION:
        text = regexp.sub(sub, text)
    for regexp, sub in _PARENS_BRACKETS:
        text = regexp.sub(sub, text)
    for regexp, sub in _DOUBLE_DASHES:
        text = regexp.sub(sub, text)
    text = " " + text + " "
    # quote/clitic splits can expose another layer (e.g. x'd'); iterate to
    # a fixpoint so re-tokenizing tokenized output is a no-op
    while True:
        before = text
        for regexp, sub in _ENDING_QUOTES:
            text = regexp.sub(sub, text)
        if text == before:
            break
    for regexp in _CONTRACTIONS:
        text = regexp.sub(r" \1 \2 ", text)
    for regexp in _CONTRACTIONS_LEADING:
        text = regexp.sub(r" \1 \2 ", text)
    return [tok.lower() for tok in text.split()]


# ---------------------------------------------------------------------------
# Transcripts


@dataclass(frozen=True)
class Transcript:
    """One recorded session: the ground-truth world, the event log and the
    outcome. ``started_at``, ``first_speaker`` and ``timing`` make the log
    replayable through the engine."""

    dialogue_id: str
    world: World
    events: tuple[Event, ...]
    outcome: Outcome
    num_shared: int
    started_at: int
    first_speaker: int
    timing: Timing = field(default_factory=Timing)
    extra: dict = field(default_factory=dict, compare=False)


def transcript_to_dict(t: Transcript) -> dict:
    return {
        "format": TRANSCRIPT_FORMAT,
        "dialogue_id": t.dialogue_id,
        "world": world_to_dict(t.world),
        "events": [engine.event_to_dict(ev) for ev in t.events],
        "outcome": {
            "status": t.outcome.status,
            "selections": list(t.outcome.selections),
        },
        "num_shared": t.num_shared,
        "started_at": t.started_at,
        "first_speaker": t.first_speaker,
        "timing": t.timing.to_dict(),
        "extra": t.extra,
    }


def transcript_from_dict(d: dict) -> Transcript:
    fmt = d.get("format")
    if fmt != TRANSCRIPT_FORMAT:
        raise ValueError(f"unsupported transcript format {fmt!r}, expected {TRANSCRIPT_FORMAT!r}")
    sels = d["outcome"]["selections"]
    return Transcript(
        dialogue_id=str(d["dialogue_id"]),
        world=world_from_dict(d["world"]),
        events=tuple(engine.event_from_dict(ev) for ev in d["events"]),
        outcome=Outcome(
            status=str(d["outcome"]["status"]),
            selections=(
                None if sels[0] is None else int(sels[0]),
                None if sels[1] is None else int(sels[1]),
            ),
        ),
        num_shared=int(d["num_shared"]),
        started_at=int(d["started_at"]),
        first_speaker=int(d["first_speaker"]),
        timing=Timing.from_dict(d["timing"]),
        extra=dict(d.get("extra", {})),
    )


def save_transcripts(path, transcripts) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for t in transcripts:
            f.write(json.dumps(transcript_to_dict(t)) + "\n")
            n += 1
    return n


def load_transcripts(path) -> list[Transcript]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(transcript_from_dict(json.loads(line)))
    return out


def replay_transcript(t: Transcript) -> engine.GameState:
    """Replay the event log through the engine and cross-check the stored
    outcome; raises on any divergence."""
    state = engine.replay(t.world, t.started_at, t.first_speaker, t.events, t.timing)
    last_ts = t.events[-1].ts if t.events else t.started_at
    got = engine.outcome(state, max(last_ts, state.active_end))
    if got is None or got.status != t.outcome.status or got.selections != t.outcome.selections:
        raise ValueError(
            f"transcript {t.dialogue_id}: replayed outcome {got} != stored {t.outcome}"
        )
    return state


def messages_of(t: Transcript) -> list[Event]:
    return [ev for ev in t.events if isinstance(ev.kind, Message)]


# ---------------------------------------------------------------------------
# Vocabulary


@dataclass
class Vocabulary:
    """Token-to-index map; index 0 is the unknown token. Tokens below the
    training-set count cutoff all collapse onto index 0."""

    token_to_id: dict[str, int]
    id_to_token: list[str]
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, 0)

    def encode(self, tokens) -> np.ndarray:
        return np.array([self.id_of(t) for t in tokens], dtype=np.int64)

    def to_dict(self) -> dict:
        return {"format": "oc-vocab-1", "id_to_token": self.id_to_token,
                "counts": self.counts}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        id_to_token = list(d["id_to_token"])
        return cls(
            token_to_id={t: i for i, t in enumerate(id_to_token) if i > 0},
            id_to_token=id_to_token,
            counts={k: int(v) for k, v in d.get("counts", {}).items()},
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def build_vocab(transcripts, min_count: int = MIN_TOKEN_COUNT) -> Vocabulary:
    """Count tokens over the given (training) transcripts and keep those
    occurring at least ``min_count`` times. Speaker and dialogue-end
    markers always get indices."""
    if not transcripts:
        raise ValueError("cannot build a vocabulary from an empty training set")
    counts: dict[str, int] = {}
    for t in transcripts:
        for ev in messages_of(t):
            for tok in tokenize(ev.kind.text):
                counts[tok] = counts.get(tok, 0) + 1
    id_to_token = [UNK, YOU, THEM, EOD]
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    id_to_token.extend(kept)
    return Vocabulary(
        token_to_id={t: i for i, t in enumerate(id_to_token) if i > 0},
        id_to_token=id_to_token,
        counts=counts,
    )


# ---------------------------------------------------------------------------
# Target-selection examples


@dataclass
class TargetExample:
    """One classification instance: a player's observation, the dialogue
    seen from that player's perspective, and the slot they selected."""

    observation: Observation
    token_ids: np.ndarray
    label: int
    dialogue_id: str
    agent: int


def dialogue_token_ids(t: Transcript, agent: int, vocab: Vocabulary) -> np.ndarray:
    """Encode the dialogue from one perspective: each utterance opens with
    a relative speaker marker; the stream closes with the end marker."""
    toks: list[str] = []
    for ev in messages_of(t):
        toks.append(YOU if ev.agent == agent else THEM)
        toks.extend(tokenize(ev.kind.text))
    toks.append(EOD)
    return vocab.encode(toks)


def make_examples(transcripts, vocab: Vocabulary) -> tuple[list[TargetExample], int]:
    """Build two examples per dialogue (one per perspective). Perspectives
    without a recorded selection are skipped; the skip count is returned."""
    examples: list[TargetExample] = []
    skipped = 0
    for t in transcripts:
        for agent in (0, 1):
            sel = t.outcome.selections[agent]
            if sel is None:
                skipped += 1
                continue
            obs = observe(t.world, agent)
            label = obs.entity_ids.index(sel)
            examples.append(
                TargetExample(
                    observation=obs,
                    token_ids=dialogue_token_ids(t, agent, vocab),
                    label=label,
                    dialogue_id=t.dialogue_id,
                    agent=agent,
                )
            )
    return examples, skipped


def split_dataset(transcripts, seed: int) -> tuple[list, list, list]:
    """Deterministic 8:1:1 split by dialogue id; the two correlated
    examples of a dialogue always land in the same split."""
    ordered = sorted(transcripts, key=lambda t: t.dialogue_id)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ordered))
    shuffled = [ordered[i] for i in perm]
    n = len(shuffled)
    n_test = int(round(n / 10.0))
    n_valid = int(round(n / 10.0))
    test = shuffled[:n_test]
    valid = shuffled[n_test:n_test + n_valid]
    train = shuffled[n_test + n_valid:]
    return train, valid, test


def make_test_variants(test_examples, successful_ids, seed: int = 0) -> dict:
    """Testset variants: ``full`` keeps everything, ``uncorrelated`` keeps
    one seeded pick per dialogue, ``success_only`` further drops dialogues
    whose players failed to coordinate."""
    by_dialogue: dict[str, list[TargetExample]] = {}
    for ex in test_examples:
        by_dialogue.setdefault(ex.dialogue_id, []).append(ex)
    rng = np.random.default_rng(seed)
    uncorrelated = []
    for did in sorted(by_dialogue):
        group = by_dialogue[did]
        uncorrelated.append(group[int(rng.integers(len(group)))])
    success_only = [ex for ex in uncorrelated if ex.dialogue_id in successful_ids]
    return {
        "full": list(test_examples),
        "uncorrelated": uncorrelated,
        "success_only": success_only,
    }


def successful_dialogue_ids(transcripts) -> set[str]:
    return {t.dialogue_id for t in transcripts if t.outcome.status == engine.STATUS_SUCCESS}
