"""WebSocket game server: FIFO matchmaking, session relay, persistence.

Protocol (see docs/protocol.md): each WebSocket text frame carries one
JSON object with a ``type`` field. A client never receives anything about
dots outside its own view; the only cross-view datum is the partner's
final selection inside the ``outcome`` frame.

All events of one session are serialized: frames are handled atomically
on the event loop and per-connection writer tasks drain outbound queues
in enqueue order, so both sides observe the same message order.
"""
from __future__ import annotations

import asyncio
import json
import logging
import mimetypes
import os
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine
from .corpus import Transcript, transcript_to_dict
from .engine import GameState, Message, Outcome, Select, Timing
from .world import SHARED_CHOICES, generate_world, observe

log = logging.getLogger("ocref.server")

MAX_STRIKES = 3
PERSIST_RETRIES = 3
PERSIST_BACKOFF_S = 0.2


def real_clock_ms() -> int:
    return int(time.time() * 1000)


class TranscriptStore:
    """Append-only JSON-lines transcript store with fsync durability and
    session-id deduplication on load and append."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.path = self.dir / "transcripts.jsonl"
        self._ids: set[str] = set()
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._ids.add(json.loads(line)["dialogue_id"])

    def __contains__(self, dialogue_id: str) -> bool:
        return dialogue_id in self._ids

    def __len__(self) -> int:
        return len(self._ids)

    def append(self, transcript: Transcript) -> bool:
        """Write one transcript; returns False if its id is already stored."""
        if transcript.dialogue_id in self._ids:
            return False
        line = json.dumps(transcript_to_dict(transcript)) + "\n"
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(line)
            f.flush()
            os.fsync(f.fileno())
        self._ids.add(transcript.dialogue_id)
        return True

    def load(self) -> list[Transcript]:
        from .corpus import load_transcripts

        seen: set[str] = set()
        out = []
        if self.path.exists():
            for t in load_transcripts(self.path):
                if t.dialogue_id not in seen:
                    seen.add(t.dialogue_id)
                    out.append(t)
        return out


@dataclass
class Connection:
    ws: object
    queue: asyncio.Queue = field(default_factory=asyncio.Queue)
    session: "Session | None" = None
    queued: bool = False
    strikes: int = 0
    closed: bool = False

    def send(self, frame: dict) -> None:
        if not self.closed:
            self.queue.put_nowait(frame)


@dataclass
class Session:
    session_id: str
    state: GameState
    conns: tuple[Connection, Connection]
    first_speaker: int
    created_at: int
    finalized: bool = False
    ticker: asyncio.Task | None = None

    def agent_of(self, conn: Connection) -> int:
        return 0 if self.conns[0] is conn else 1


class GameServer:
    """Pairs joined clients, runs sessions through the engine and persists
    one transcript per terminated session."""

    def __init__(self, store_dir, seed: int = 0, timing: Timing | None = None,
                 clock=real_clock_ms, tick_interval: float = 1.0, ui_dir=None):
        self.store = TranscriptStore(store_dir)
        self.rng = np.random.default_rng(seed)
        self.timing = timing or Timing()
        self.clock = clock
        self.tick_interval = tick_interval
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.waiting: deque[Connection] = deque()
        self.sessions: dict[str, Session] = {}
        self._counter = 0

    # -- frame plumbing ----------------------------------------------------

    async def handler(self, ws) -> None:
        conn = Connection(ws=ws)
        writer = asyncio.create_task(self._writer(conn))
        try:
            async for raw in ws:
                if not self._on_raw(conn, raw):
                    break
        except Exception:
            pass
        finally:
            conn.closed = True
            self._on_disconnect(conn)
            # drain queued frames (e.g. strike errors) before closing
            conn.queue.put_nowait(None)
            try:
                await asyncio.wait_for(writer, timeout=2.0)
            except (asyncio.TimeoutError, asyncio.CancelledError):
                writer.cancel()

    async def _writer(self, conn: Connection) -> None:
        while True:
            frame = await conn.queue.get()
            if frame is None:
                return
            try:
                await conn.ws.send(json.dumps(frame))
            except Exception:
                conn.closed = True
                return

    def _error(self, conn: Connection, code: str, message: str) -> None:
        conn.send({"type": "error", "code": code, "message": message})

    def _on_raw(self, conn: Connection, raw) -> bool:
        """Handle one inbound frame; returns False to drop the connection."""
        try:
            frame = json.loads(raw)
            if not isinstance(frame, dict) or "type" not in frame:
                raise ValueError("frame must be an object with a 'type' field")
        except (json.JSONDecodeError, ValueError, UnicodeDecodeError) as exc:
            conn.strikes += 1
            self._error(conn, "MalformedFrame",
                        f"{exc} (strike {conn.strikes}/{MAX_STRIKES})")
            return conn.strikes < MAX_STRIKES
        self._dispatch(conn, frame)
        return True

    def _dispatch(self, conn: Connection, frame: dict) -> None:
        ftype = frame.get("type")
        now = self.clock()
        if ftype == "join":
            self._on_join(conn)
        elif ftype in ("message", "select"):
            session = conn.session
            if session is None:
                self._error(conn, "NotInSession", "join and wait to be paired first")
                return
            self._on_action(session, conn, ftype, frame, now)
        else:
            self._error(conn, "UnknownFrameType", f"unsupported frame type {ftype!r}")

    # -- matchmaking ---------------------------------------------------------

    def _on_join(self, conn: Connection) -> None:
        if conn.queued or conn.session is not None:
            self._error(conn, "AlreadyJoined", "connection is already queued or playing")
            return
        conn.queued = True
        self.waiting.append(conn)
        conn.send({"type": "ack", "of": "join"})
        self._try_pair()

    def _try_pair(self) -> None:
        while len(self.waiting) >= 2:
            a = self.waiting.popleft()
            b = self.waiting.popleft()
            a.queued = b.queued = False
            self._start_session(a, b)

    def _start_session(self, a: Connection, b: Connection) -> None:
        k = int(self.rng.choice(SHARED_CHOICES))
        world_seed = int(self.rng.integers(0, 2**63 - 1))
        world = generate_world(k, world_seed)
        first_speaker = int(self.rng.integers(0, 2))
        now = self.clock()
        state = engine.new_session(world, now, first_speaker, self.timing)
        self._counter += 1
        session = Session(
            session_id=f"g{self._counter:06d}-{uuid.uuid4().hex[:8]}",
            state=state,
            conns=(a, b),
            first_speaker=first_speaker,
            created_at=now,
        )
        a.session = b.session = session
        self.sessions[session.session_id] = session
        for agent, conn in enumerate(session.conns):
            conn.send(self._paired_frame(session, agent))
        session.ticker = asyncio.create_task(self._ticker(session))

    def _paired_frame(self, session: Session, agent: int) -> dict:
        world = session.state.world
        obs = observe(world, agent)
        view = world.views[agent]
        by_id = {e.id: e for e in world.entities}
        dots = [
            {
                "id": eid,
                "x": by_id[eid].x - view.center_x,
                "y": by_id[eid].y - view.center_y,
                "size": by_id[eid].size,
                "color": by_id[eid].color,
            }
            for eid in view.visible_ids
        ]
        return {
            "type": "paired",
            "session_id": session.session_id,
            "agent": agent,
            "observation": obs.to_dict(),
            "dots": dots,
            "view_radius": view.radius,
            "timing": session.state.timing.to_dict(),
            "started_at": session.state.started_at,
            "next_speaker": session.first_speaker,
        }

    # -- gameplay ------------------------------------------------------------

    def _on_action(self, session: Session, conn: Connection, ftype: str,
                   frame: dict, now: int) -> None:
        if session.finalized:
            self._error(conn, engine.SessionOver.code, "session is over")
            return
        agent = session.agent_of(conn)
        try:
            if ftype == "message":
                text = frame.get("text")
                if not isinstance(text, str) or not text.strip():
                    self._error(conn, "BadPayload", "message needs non-empty 'text'")
                    return
                action: Message | Select = Message(text)
            else:
                if "entity_id" not in frame:
                    self._error(conn, "BadPayload", "select needs 'entity_id'")
                    return
                action = Select(int(frame["entity_id"]))
            session.state = engine.apply(session.state, agent, action, now)
        except engine.EngineError as exc:
            self._error(conn, exc.code, str(exc))
            return
        except (TypeError, ValueError) as exc:
            self._error(conn, "BadPayload", str(exc))
            return

        if ftype == "message":
            out = {"type": "message", "from": agent, "text": action.text, "ts": now}
            for c in session.conns:
                c.send(out)
                c.send({"type": "turn", "next_speaker": session.state.next_speaker,
                        "ts": now})
        else:
            conn.send({"type": "ack", "of": "select", "entity_id": action.entity_id,
                       "ts": now})
            if session.state.phase(now) == engine.PHASE_DONE:
                self._finalize(session, now)

    async def _ticker(self, session: Session) -> None:
        try:
            while not session.finalized:
                await asyncio.sleep(self.tick_interval)
                now = self.clock()
                phase = session.state.phase(now)
                if phase == engine.PHASE_DONE:
                    self._finalize(session, now)
                    return
                if phase == engine.PHASE_READING:
                    remaining = session.state.active_start - now
                else:
                    remaining = session.state.active_end - now
                for c in session.conns:
                    c.send({
                        "type": "tick",
                        "phase": phase,
                        "remaining_ms": max(0, remaining),
                        "select_open": now >= session.state.select_allowed_at,
                        "ts": now,
                    })
        except asyncio.CancelledError:
            pass

    # -- termination -----------------------------------------------------------

    def _transcript(self, session: Session, outcome: Outcome) -> Transcript:
        state = session.state
        return Transcript(
            dialogue_id=session.session_id,
            world=state.world,
            events=state.events,
            outcome=outcome,
            num_shared=state.world.num_shared,
            started_at=state.started_at,
            first_speaker=session.first_speaker,
            timing=state.timing,
        )

    def _finalize(self, session: Session, now: int) -> None:
        if session.finalized:
            return
        session.finalized = True
        # outcome() is None only when the session is cut short (disconnect):
        # that counts as expired.
        out = engine.outcome(session.state, now)
        if out is None:
            out = Outcome(status=engine.STATUS_EXPIRED, selections=session.state.selections)
        transcript = self._transcript(session, out)
        persisted = self._persist(transcript)
        frame = {
            "type": "outcome",
            "status": out.status,
            "selections": list(out.selections),
            "ts": now,
        }
        for c in session.conns:
            c.send(frame)
            c.session = None
        if session.ticker is not None:
            session.ticker.cancel()
        self.sessions.pop(session.session_id, None)
        if not persisted:
            # storage hiccup: keep retrying in the background; players have
            # already been notified.
            asyncio.create_task(self._retry_persist(transcript))

    def _persist(self, transcript: Transcript) -> bool:
        try:
            self.store.append(transcript)
            return True
        except OSError as exc:
            log.warning("persist failed for %s: %s", transcript.dialogue_id, exc)
            return False

    async def _retry_persist(self, transcript: Transcript) -> None:
        delay = PERSIST_BACKOFF_S
        for _ in range(PERSIST_RETRIES):
            await asyncio.sleep(delay)
            if self._persist(transcript):
                return
            delay *= 2
        log.error("giving up persisting %s", transcript.dialogue_id)

    def _on_disconnect(self, conn: Connection) -> None:
        if conn.queued:
            try:
                self.waiting.remove(conn)
            except ValueError:
                pass
            conn.queued = False
        session = conn.session
        if session is not None and not session.finalized:
            # No reconnection window: the partner cannot finish alone.
            self._finalize(session, self.clock())

    # -- static UI -------------------------------------------------------------

    def process_request(self, connection, request):
        """Serve the bundled UI over plain HTTP; WebSocket upgrades pass through."""
        if "upgrade" in request.headers.get("Connection", "").lower():
            return None
        path = request.path.split("?", 1)[0]
        if self.ui_dir is None:
            return connection.respond(404, "no UI bundled; connect via WebSocket\n")
        rel = path.lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            return connection.respond(404, "not found\n")
        from websockets.datastructures import Headers
        from websockets.http11 import Response

        body = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        headers = Headers([("Content-Type", ctype), ("Content-Length", str(len(body)))])
        return Response(200, "OK", headers, body)


async def run_server(port: int, store_dir, seed: int = 0, host: str = "127.0.0.1",
                     timing: Timing | None = None, ui_dir=None,
                     tick_interval: float = 1.0,
                     ready: asyncio.Event | None = None) -> None:
    """Run until cancelled."""
    from websockets.asyncio.server import serve

    server = GameServer(store_dir, seed=seed, timing=timing, ui_dir=ui_dir,
                        tick_interval=tick_interval)
    async with serve(server.handler, host, port,
                     process_request=server.process_request):
        log.info("listening on ws://%s:%d", host, port)
        if ready is not None:
            ready.set()
        await asyncio.Future()
