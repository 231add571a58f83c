"""Deterministic game-session state machine.

One session runs through three phases driven entirely by caller-supplied
timestamps (integer milliseconds): a reading period, an active period
where the players chat in strict alternation and make one irrevocable
selection each, and done. The engine holds no clock of its own, so any
event log replays bit-exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .world import World, structural_violations

READING_MS = 20_000
ACTIVE_MS = 360_000
SELECT_LOCKOUT_MS = 60_000

PHASE_READING = "reading"
PHASE_ACTIVE = "active"
PHASE_DONE = "done"


@dataclass(frozen=True)
class Timing:
    """Session timing constants; defaults follow the data-collection setup."""

    reading_ms: int = READING_MS
    active_ms: int = ACTIVE_MS
    lockout_ms: int = SELECT_LOCKOUT_MS

    def to_dict(self) -> dict:
        return {"reading_ms": self.reading_ms, "active_ms": self.active_ms,
                "lockout_ms": self.lockout_ms}

    @classmethod
    def from_dict(cls, d: dict) -> "Timing":
        return cls(int(d["reading_ms"]), int(d["active_ms"]), int(d["lockout_ms"]))


@dataclass(frozen=True)
class Message:
    text: str


@dataclass(frozen=True)
class Select:
    entity_id: int


@dataclass(frozen=True)
class Event:
    ts: int
    agent: int
    kind: Message | Select


STATUS_SUCCESS = "success"
STATUS_FAILURE = "failure"
STATUS_EXPIRED = "expired"


@dataclass(frozen=True)
class Outcome:
    status: str
    selections: tuple[int | None, int | None]


class EngineError(Exception):
    """Rejected action; ``code`` is a stable machine-readable identifier."""

    code = "EngineError"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)


class NotYourTurn(EngineError):
    code = "NotYourTurn"


class TooEarlyToSelect(EngineError):
    code = "TooEarlyToSelect"


class AlreadySelected(EngineError):
    code = "AlreadySelected"


class EntityNotVisible(EngineError):
    code = "EntityNotVisible"


class SessionOver(EngineError):
    code = "SessionOver"


class NotActiveYet(EngineError):
    code = "NotActiveYet"


class InvalidWorld(EngineError):
    code = "InvalidWorld"


@dataclass(frozen=True)
class GameState:
    """Immutable session state; ``apply`` returns a new state."""

    world: World
    started_at: int
    timing: Timing
    next_speaker: int
    events: tuple[Event, ...] = ()
    selections: tuple[int | None, int | None] = (None, None)

    @property
    def active_start(self) -> int:
        return self.started_at + self.timing.reading_ms

    @property
    def active_end(self) -> int:
        return self.active_start + self.timing.active_ms

    @property
    def select_allowed_at(self) -> int:
        return self.active_start + self.timing.lockout_ms

    def phase(self, now: int) -> str:
        if all(s is not None for s in self.selections) or now >= self.active_end:
            return PHASE_DONE
        if now >= self.active_start:
            return PHASE_ACTIVE
        return PHASE_READING


def new_session(world: World, started_at: int, first_speaker: int,
                timing: Timing | None = None) -> GameState:
    """Start a session on a valid world. Reading phase runs first.

    Validation covers the structural invariants the rules rely on;
    generator geometry is the world module's contract, so imported
    worlds replay here too.
    """
    violations = structural_violations(world)
    if violations:
        raise InvalidWorld("; ".join(violations[:3]))
    if first_speaker not in (0, 1):
        raise ValueError("first_speaker must be 0 or 1")
    return GameState(
        world=world,
        started_at=int(started_at),
        timing=timing or Timing(),
        next_speaker=first_speaker,
    )


def apply(state: GameState, agent: int, action: Message | Select, now: int) -> GameState:
    """Apply one action at time ``now``; raises an EngineError subclass on
    any rule violation and never mutates the input state.

    Messages alternate speakers; selections are allowed out of message
    turn, gated by the lockout, and are single-shot per agent.

    Session time is monotone: a clock reading earlier than the last
    accepted event is clamped to it, so event timestamps never decrease.
    """
    if agent not in (0, 1):
        raise ValueError("agent must be 0 or 1")
    floor = state.events[-1].ts if state.events else state.started_at
    now = max(int(now), floor)
    phase = state.phase(now)
    if phase == PHASE_DONE:
        raise SessionOver(f"session done at {now}")
    if phase == PHASE_READING:
        raise NotActiveYet(f"active from {state.active_start}, now {now}")

    if isinstance(action, Message):
        if agent != state.next_speaker:
            raise NotYourTurn(f"next speaker is {state.next_speaker}")
        event = Event(ts=int(now), agent=agent, kind=action)
        return replace(state, events=state.events + (event,), next_speaker=1 - agent)

    if isinstance(action, Select):
        if now < state.select_allowed_at:
            raise TooEarlyToSelect(f"selection opens at {state.select_allowed_at}, now {now}")
        if state.selections[agent] is not None:
            raise AlreadySelected(f"agent {agent} already selected {state.selections[agent]}")
        if action.entity_id not in state.world.views[agent].visible_ids:
            raise EntityNotVisible(f"entity {action.entity_id} not in view of agent {agent}")
        event = Event(ts=int(now), agent=agent, kind=action)
        sels = list(state.selections)
        sels[agent] = action.entity_id
        return replace(state, events=state.events + (event,), selections=(sels[0], sels[1]))

    raise TypeError(f"unknown action {action!r}")


def outcome(state: GameState, now: int) -> Outcome | None:
    """Final outcome, or None while the session is still running."""
    s0, s1 = state.selections
    if s0 is not None and s1 is not None:
        status = STATUS_SUCCESS if s0 == s1 else STATUS_FAILURE
        return Outcome(status=status, selections=(s0, s1))
    if now >= state.active_end:
        return Outcome(status=STATUS_EXPIRED, selections=(s0, s1))
    return None


def replay(world: World, started_at: int, first_speaker: int, events: list[Event] | tuple[Event, ...],
           timing: Timing | None = None) -> GameState:
    """Re-run a recorded event log through ``apply``; events carry their
    original timestamps so the result is bit-identical to the live run."""
    state = new_session(world, started_at, first_speaker, timing)
    for ev in events:
        state = apply(state, ev.agent, ev.kind, ev.ts)
    return state


def event_to_dict(ev: Event) -> dict:
    d = {"ts": ev.ts, "agent": ev.agent}
    if isinstance(ev.kind, Message):
        d["type"] = "message"
        d["text"] = ev.kind.text
    else:
        d["type"] = "select"
        d["entity_id"] = ev.kind.entity_id
    return d


def event_from_dict(d: dict) -> Event:
    if d["type"] == "message":
        kind: Message | Select = Message(str(d["text"]))
    elif d["type"] == "select":
        kind = Select(int(d["entity_id"]))
    else:
        raise ValueError(f"unknown event type {d['type']!r}")
    return Event(ts=int(d["ts"]), agent=int(d["agent"]), kind=kind)
