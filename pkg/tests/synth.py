"""Synthetic corpus helpers: scripted sessions generated through the real
engine, so every synthetic transcript replays cleanly."""
from __future__ import annotations

import numpy as np

from ocref import engine
from ocref.corpus import Transcript
from ocref.engine import Message, Select, Timing
from ocref.world import generate_world

WORDS = [
    "i", "see", "a", "the", "dark", "darker", "darkest", "light", "big", "large",
    "small", "tiny", "dot", "dots", "on", "left", "right", "top", "bottom",
    "middle", "very", "slightly", "maybe", "yes", "no", "pick", "it", "one",
    "two", "three", "black", "gray", "cluster", "line", "near", "under",
]


def synth_transcript(seed: int, k: int | None = None,
                     success_bias: float = 0.75,
                     timing: Timing | None = None) -> Transcript:
    rng = np.random.default_rng(seed)
    k = k if k is not None else int(rng.choice((4, 5, 6)))
    world = generate_world(k, seed=int(rng.integers(2**31)))
    timing = timing or Timing()
    first = int(rng.integers(2))
    state = engine.new_session(world, 0, first, timing)

    now = state.active_start
    speaker = first
    for _ in range(int(rng.integers(2, 8))):
        n_words = int(rng.integers(3, 12))
        text = " ".join(rng.choice(WORDS) for _ in range(n_words)) + "."
        state = engine.apply(state, speaker, Message(text), now)
        speaker = 1 - speaker
        now += int(rng.integers(2_000, 20_000))

    now = max(now, state.select_allowed_at)
    shared = sorted(set(world.views[0].visible_ids) & set(world.views[1].visible_ids))
    if rng.random() < success_bias:
        target = int(shared[rng.integers(len(shared))])
        picks = (target, target)
    else:
        picks = tuple(
            int(world.views[a].visible_ids[rng.integers(7)]) for a in (0, 1)
        )
    for agent in (0, 1):
        state = engine.apply(state, agent, Select(picks[agent]), now)
        now += 1_000

    outcome = engine.outcome(state, now)
    assert outcome is not None
    return Transcript(
        dialogue_id=f"synth-{seed}",
        world=world,
        events=state.events,
        outcome=outcome,
        num_shared=k,
        started_at=0,
        first_speaker=first,
        timing=timing,
    )


def synth_corpus(n: int, seed: int = 0, **kw) -> list[Transcript]:
    return [synth_transcript(seed * 1_000_003 + i, **kw) for i in range(n)]
