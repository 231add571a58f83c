"""Import externally released dialogue data into the native transcript form.

The importer accepts a JSON array (or JSON lines) of dialogue records with
per-agent entity lists and an event log, reconstructs each world in the
canonical unit-circle frame, and synthesizes engine-compatible timestamps
so every imported log replays cleanly. Field names are matched leniently
(several common spellings per field); anything that cannot be mapped is
preserved in the transcript's ``extra`` bag.

Expected record shape (see docs/formats.md for the full contract):

    {
      "uuid": "...",
      "scenario": {"kbs": [[{"id","x","y","size","color"}, ...7], [...7]]},
      "events": [{"agent": 0, "action": "message"|"select", "data": ...}, ...],
      "outcome": {...}            # optional, preserved verbatim
    }

Coordinates are taken as view-local within a square frame (side inferred
from the data unless ``frame_size`` is given); sizes and colors are
affinely mapped from their observed ranges onto the canonical ranges, so
darker/larger orderings and bin statistics are preserved.
"""
from __future__ import annotations

import json
import math

from . import engine
from .corpus import Transcript
from .engine import Event, Message, Select, Timing
from .world import (
    COLOR_MAX,
    COLOR_MIN,
    EDGE_MARGIN,
    NUM_VISIBLE,
    SIZE_MAX,
    SIZE_MIN,
    AgentView,
    Entity,
    VIEW_RADIUS,
    World,
    structural_violations,
)


class ImportFormatError(Exception):
    """Input does not match the documented release schema."""


_ID_KEYS = ("uuid", "dialogue_id", "id")
_AGENT_KEYS = ("agent", "sender", "speaker", "agent_id")
_ACTION_KEYS = ("action", "type", "kind")
_DATA_KEYS = ("data", "text", "entity_id", "value")
_TIME_KEYS = ("time", "ts", "timestamp")

# Interior margin keeps remapped attributes and positions strictly inside
# their canonical open intervals after normalization.
_ATTR_MARGIN = 0.02
_POS_MARGIN = 1e-3


def _first_key(record: dict, keys, what: str, where: str):
    for k in keys:
        if k in record:
            return record[k]
    raise ImportFormatError(f"{where}: missing {what} (tried keys {keys})")


def _parse_color(raw, where: str) -> float:
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, str) and raw.startswith("#"):
        hexpart = raw[1:]
        if len(hexpart) == 3:
            hexpart = "".join(c * 2 for c in hexpart)
        if len(hexpart) == 6:
            try:
                r = int(hexpart[0:2], 16)
                g = int(hexpart[2:4], 16)
                b = int(hexpart[4:6], 16)
            except ValueError:
                raise ImportFormatError(f"{where}: unparseable color {raw!r}") from None
            return (r + g + b) / 3.0
    raise ImportFormatError(f"{where}: unparseable color {raw!r}")


def _load_records(path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        head = f.read(1)
        f.seek(0)
        if head == "[":
            data = json.load(f)
            if not isinstance(data, list):
                raise ImportFormatError("top-level JSON value is not an array")
            return data
        return [json.loads(line) for line in f if line.strip()]


def _affine(value: float, lo: float, hi: float, out_lo: float, out_hi: float) -> float:
    if hi <= lo:
        return (out_lo + out_hi) / 2.0
    frac = (value - lo) / (hi - lo)
    margin = _ATTR_MARGIN
    frac = margin + frac * (1.0 - 2.0 * margin)
    return out_lo + frac * (out_hi - out_lo)


def import_release(path, frame_size: float | None = None) -> list[Transcript]:
    """Convert a released dialogue file into replayable transcripts.

    Raises ImportFormatError naming the first offending record when the
    file does not match the documented schema.
    """
    records = _load_records(path)
    if not records:
        return []

    # Attribute ranges are global over the file so one affine map serves
    # every dialogue and cross-dialogue comparisons stay meaningful.
    sizes: list[float] = []
    colors: list[float] = []
    max_coord = 0.0
    parsed = []
    for i, rec in enumerate(records):
        where = f"record {i}"
        if not isinstance(rec, dict):
            raise ImportFormatError(f"{where}: not a JSON object")
        did = str(_first_key(rec, _ID_KEYS, "dialogue id", where))
        where = f"record {i} ({did})"
        scenario = rec.get("scenario", rec)
        kbs = scenario.get("kbs")
        if kbs is None or len(kbs) != 2:
            raise ImportFormatError(f"{where}: expected scenario.kbs with 2 agent entity lists")
        for a, kb in enumerate(kbs):
            if len(kb) != NUM_VISIBLE:
                raise ImportFormatError(
                    f"{where}: agent {a} lists {len(kb)} entities, expected {NUM_VISIBLE}"
                )
            for ent in kb:
                try:
                    x, y = float(ent["x"]), float(ent["y"])
                    sizes.append(float(ent["size"]))
                    colors.append(_parse_color(ent["color"], where))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ImportFormatError(f"{where}: bad entity {ent!r}: {exc}") from None
                max_coord = max(max_coord, abs(x), abs(y))
        parsed.append((did, rec, kbs))

    frame = float(frame_size) if frame_size else max_coord
    if frame <= 0:
        raise ImportFormatError("could not infer a positive coordinate frame size")
    size_lo, size_hi = min(sizes), max(sizes)
    color_lo, color_hi = min(colors), max(colors)

    out: list[Transcript] = []
    for i, (did, rec, kbs) in enumerate(parsed):
        where = f"record {i} ({did})"
        out.append(_convert_record(where, did, rec, kbs, frame,
                                   size_lo, size_hi, color_lo, color_hi))
    return out


def _convert_record(where, did, rec, kbs, frame, size_lo, size_hi, color_lo, color_hi):
    half = frame / 2.0
    raw_ids = sorted({str(e["id"]) for kb in kbs for e in kb})
    id_map = {rid: idx for idx, rid in enumerate(raw_ids)}

    # View-local positions, normalized to the unit circle around the
    # local frame center.
    local: list[dict[int, tuple[float, float]]] = [{}, {}]
    attrs: dict[int, tuple[float, float]] = {}
    for a, kb in enumerate(kbs):
        for e in kb:
            eid = id_map[str(e["id"])]
            local[a][eid] = ((float(e["x"]) - half) / half, (float(e["y"]) - half) / half)
            attrs[eid] = (
                _affine(float(e["size"]), size_lo, size_hi, SIZE_MIN, SIZE_MAX),
                _affine(_parse_color(e["color"], where), color_lo, color_hi,
                        COLOR_MIN, COLOR_MAX),
            )

    shared = sorted(set(local[0]) & set(local[1]))
    if not 1 <= len(shared) < NUM_VISIBLE:
        raise ImportFormatError(f"{where}: implausible shared entity count {len(shared)}")

    # Keep every dot strictly inside its view circle; one global scale so
    # both views stay consistent.
    max_norm = max(math.hypot(*p) for side in local for p in side.values())
    scale = (1.0 - EDGE_MARGIN - _POS_MARGIN) / max(1.0, max_norm + _POS_MARGIN)
    for side in local:
        for eid, (x, y) in side.items():
            side[eid] = (x * scale, y * scale)

    # Agent 0's view centers the world; agent 1's center falls out of the
    # shared dots, which appear in both local frames.
    deltas = [
        (local[0][eid][0] - local[1][eid][0], local[0][eid][1] - local[1][eid][1])
        for eid in shared
    ]
    c1x = sum(d[0] for d in deltas) / len(deltas)
    c1y = sum(d[1] for d in deltas) / len(deltas)
    residual = max(
        math.hypot(local[0][eid][0] - (c1x + local[1][eid][0]),
                   local[0][eid][1] - (c1y + local[1][eid][1]))
        for eid in shared
    )

    positions: dict[int, tuple[float, float]] = {}
    for eid, (x, y) in local[0].items():
        positions[eid] = (x, y)
    for eid, (x, y) in local[1].items():
        positions.setdefault(eid, (c1x + x, c1y + y))

    entities = tuple(
        Entity(id=eid, x=positions[eid][0], y=positions[eid][1],
               size=attrs[eid][0], color=attrs[eid][1])
        for eid in sorted(positions)
    )
    views = (
        AgentView(0.0, 0.0, VIEW_RADIUS, tuple(sorted(local[0]))),
        AgentView(c1x, c1y, VIEW_RADIUS, tuple(sorted(local[1]))),
    )
    world = World(world_id=f"import-{did}", num_shared=len(shared),
                  entities=entities, views=views, seed=0)
    problems = structural_violations(world)
    if problems:
        raise ImportFormatError(f"{where}: reconstructed world invalid: {problems[0]}")

    # Synthesized timestamps: original times (if any) are kept in `extra`,
    # while the replayed log uses a canonical clock that respects the
    # selection lockout. Event order is preserved exactly.
    timing = Timing()
    started_at = 0
    base = started_at + timing.reading_ms + timing.lockout_ms
    raw_events = rec.get("events", [])
    # Events are spaced to fit the active window whatever their count.
    span = timing.active_ms - timing.lockout_ms - 1000
    step = max(1, min(1000, span // max(1, len(raw_events))))
    events = []
    original_times = []
    first_speaker = None
    for j, ev in enumerate(raw_events):
        evw = f"{where} event {j}"
        agent = int(_first_key(ev, _AGENT_KEYS, "agent", evw))
        if agent not in (0, 1):
            raise ImportFormatError(f"{evw}: agent must be 0 or 1, got {agent}")
        action = str(_first_key(ev, _ACTION_KEYS, "action", evw)).lower()
        payload = _first_key(ev, _DATA_KEYS, "payload", evw)
        original_times.append(next((ev[k] for k in _TIME_KEYS if k in ev), None))
        if action in ("message", "msg", "chat"):
            kind: Message | Select = Message(str(payload))
            if first_speaker is None:
                first_speaker = agent
        elif action in ("select", "selection", "pick"):
            rid = str(payload)
            if rid not in id_map:
                raise ImportFormatError(f"{evw}: selected unknown entity {payload!r}")
            kind = Select(id_map[rid])
        else:
            raise ImportFormatError(f"{evw}: unknown action {action!r}")
        events.append(Event(ts=base + step * j, agent=agent, kind=kind))
    if first_speaker is None:
        first_speaker = 0

    try:
        state = engine.replay(world, started_at, first_speaker, events, timing)
    except engine.EngineError as exc:
        raise ImportFormatError(f"{where}: event log does not replay: {exc.code}: {exc}") from None
    outcome = engine.outcome(state, state.active_end)

    extra = {
        "source_id": did,
        "id_map": {rid: idx for rid, idx in id_map.items()},
        "frame_size": frame,
        "center_residual": residual,
        "event_times": original_times,
    }
    if "outcome" in rec:
        extra["source_outcome"] = rec["outcome"]

    return Transcript(
        dialogue_id=did,
        world=world,
        events=tuple(events),
        outcome=outcome,
        num_shared=len(shared),
        started_at=started_at,
        first_speaker=first_speaker,
        timing=timing,
        extra=extra,
    )
