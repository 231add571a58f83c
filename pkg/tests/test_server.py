import asyncio
import json

import pytest
from scipy import stats

from ocref.corpus import replay_transcript
from ocref.server import GameServer, TranscriptStore
from wsbot import recv_frame, recv_until, run_bot, send, start_server

from websockets.asyncio.client import connect


def run(coro):
    return asyncio.run(coro)


def frame_audit(frames, own_ids):
    """No frame may reveal entities outside the receiver's view, except the
    partner's selection inside an outcome frame."""
    own = set(own_ids)
    for f in frames:
        if f["type"] == "paired":
            assert set(f["observation"]["entity_ids"]) <= own
            assert {d["id"] for d in f["dots"]} <= own
            assert len(f["dots"]) == 7
        elif f["type"] == "ack" and f.get("of") == "select":
            assert f["entity_id"] in own
        elif f["type"] == "outcome":
            pass  # partner's selection is the one sanctioned disclosure
        else:
            assert "entity_id" not in f, f
            assert "dots" not in f and "observation" not in f, f


class TestPairing:
    def test_two_joins_one_session(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a, connect(h.url) as b:
                await send(a, type="join")
                await recv_until(a, "ack")
                await send(b, type="join")
                pa = await recv_until(a, "paired")
                pb = await recv_until(b, "paired")
                assert pa["session_id"] == pb["session_id"]
                assert {pa["agent"], pb["agent"]} == {0, 1}
                assert len(pa["dots"]) == 7 and len(pb["dots"]) == 7
                assert len(h.gs.sessions) == 1
            h.ws_server.close()

        run(main())

    def test_three_joins_one_waiting(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a, connect(h.url) as b, connect(h.url) as c:
                for ws in (a, b, c):
                    await send(ws, type="join")
                await recv_until(a, "paired")
                await recv_until(b, "paired")
                await recv_until(c, "ack")
                assert len(h.gs.sessions) == 1
                assert len(h.gs.waiting) == 1
                # ensure no paired frame reached c
                with pytest.raises(asyncio.TimeoutError):
                    await recv_until(c, "paired", timeout=0.3)
            h.ws_server.close()

        run(main())

    def test_duplicate_join_rejected(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a:
                await send(a, type="join")
                await recv_until(a, "ack")
                await send(a, type="join")
                err = await recv_until(a, "error")
                assert err["code"] == "AlreadyJoined"
            h.ws_server.close()

        run(main())

    def test_disconnect_while_queued_dequeues(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            a = await connect(h.url)
            await send(a, type="join")
            await recv_until(a, "ack")
            await a.close()
            await asyncio.sleep(0.1)
            assert len(h.gs.waiting) == 0
            # the next two players still pair with each other
            async with connect(h.url) as b, connect(h.url) as c:
                await send(b, type="join")
                await send(c, type="join")
                await recv_until(b, "paired")
                await recv_until(c, "paired")
            h.ws_server.close()

        run(main())

    def test_k_distribution_uniform(self, tmp_path):
        # DERIVED oracle: chi-square over 3,000 simulated pairings
        from ocref.world import SHARED_CHOICES

        gs = GameServer(tmp_path, seed=123)
        counts = {4: 0, 5: 0, 6: 0}
        for _ in range(3000):
            k = int(gs.rng.choice(SHARED_CHOICES))
            counts[k] += 1
        p = stats.chisquare(list(counts.values())).pvalue
        assert p > 1e-3


class TestGameplay:
    def test_select_before_lockout_rejected(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a, connect(h.url) as b:
                await send(a, type="join")
                await send(b, type="join")
                pa = await recv_until(a, "paired")
                target = pa["dots"][0]["id"]
                await send(a, type="select", entity_id=target)
                err = await recv_until(a, "error")
                assert err["code"] in ("TooEarlyToSelect", "NotActiveYet")
                session = next(iter(h.gs.sessions.values()))
                assert session.state.selections == (None, None)
            h.ws_server.close()

        run(main())

    def test_full_success_flow(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a, connect(h.url) as b:
                await send(a, type="join")
                await send(b, type="join")
                pa = await recv_until(a, "paired")
                pb = await recv_until(b, "paired")
                session = next(iter(h.gs.sessions.values()))
                w = session.state.world
                shared = sorted(set(w.views[0].visible_ids)
                                & set(w.views[1].visible_ids))[0]
                clients = (a, b) if pa["agent"] == 0 else (b, a)
                # alternate one message each once active
                first = pa["next_speaker"]
                while True:
                    f = await recv_frame(clients[first])
                    if f["type"] == "tick" and f["phase"] == "active":
                        break
                await send(clients[first], type="message", text="hello there")
                ma = await recv_until(a, "message")
                await recv_until(b, "message")
                assert ma["from"] == first and ma["text"] == "hello there"
                await send(clients[1 - first], type="message", text="hi back")
                await recv_until(a, "message")
                await recv_until(b, "message")
                # wait for the lockout to open, then both select the shared dot
                for ws in clients:
                    while True:
                        f = await recv_frame(ws)
                        if f["type"] == "tick" and f["select_open"]:
                            break
                await send(a, type="select", entity_id=shared)
                await recv_until(a, "ack")
                await send(b, type="select", entity_id=shared)
                oa = await recv_until(a, "outcome")
                ob = await recv_until(b, "outcome")
                assert oa["status"] == "success" == ob["status"]
                assert oa["selections"] == [shared, shared]
            assert len(h.gs.store) == 1
            t = h.gs.store.load()[0]
            assert t.outcome.status == "success"
            replay_transcript(t)
            h.ws_server.close()

        run(main())

    def test_out_of_turn_message_error_to_sender_only(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a, connect(h.url) as b:
                await send(a, type="join")
                await send(b, type="join")
                pa = await recv_until(a, "paired")
                await recv_until(b, "paired")
                session = next(iter(h.gs.sessions.values()))
                first = session.first_speaker
                wrong = (a, b)[1 - first] if pa["agent"] == 0 else (b, a)[1 - first]
                right = (a, b)[first] if pa["agent"] == 0 else (b, a)[first]
                await recv_until(wrong, "tick")  # active phase reached
                await send(wrong, type="message", text="not my turn")
                err = await recv_until(wrong, "error")
                assert err["code"] in ("NotYourTurn", "NotActiveYet")
                assert len(session.state.events) == 0
            h.ws_server.close()

        run(main())

    def test_relayed_order_identical_and_info_hidden(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            frames_a, frames_b = [], []
            bots = await asyncio.gather(
                run_bot(h.url, n_messages=3, frames_out=frames_a),
                run_bot(h.url, n_messages=3, frames_out=frames_b),
            )
            msgs_a = [(f["from"], f["text"]) for f in frames_a if f["type"] == "message"]
            msgs_b = [(f["from"], f["text"]) for f in frames_b if f["type"] == "message"]
            assert msgs_a == msgs_b and len(msgs_a) == 6
            t = h.gs.store.load()[0]
            ids = {0: None, 1: None}
            for fs in (frames_a, frames_b):
                paired = next(f for f in fs if f["type"] == "paired")
                ids[paired["agent"]] = paired["observation"]["entity_ids"]
            frame_audit(frames_a, ids[next(f for f in frames_a
                                           if f["type"] == "paired")["agent"]])
            frame_audit(frames_b, ids[next(f for f in frames_b
                                           if f["type"] == "paired")["agent"]])
            replay_transcript(t)
            h.ws_server.close()

        run(main())

    def test_partner_disconnect_expires_session(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            a = await connect(h.url)
            b = await connect(h.url)
            await send(a, type="join")
            await send(b, type="join")
            await recv_until(a, "paired")
            await recv_until(b, "paired")
            await b.close()
            out = await recv_until(a, "outcome")
            assert out["status"] == "expired"
            assert len(h.gs.store) == 1
            assert h.gs.store.load()[0].outcome.status == "expired"
            await a.close()
            h.ws_server.close()

        run(main())

    def test_session_expires_on_time_limit(self, tmp_path):
        from ocref.engine import Timing

        async def main():
            h = await start_server(tmp_path,
                                   timing=Timing(reading_ms=50, active_ms=400,
                                                 lockout_ms=100))
            async with connect(h.url) as a, connect(h.url) as b:
                await send(a, type="join")
                await send(b, type="join")
                await recv_until(a, "paired")
                out = await recv_until(a, "outcome", timeout=5)
                assert out["status"] == "expired"
                await recv_until(b, "outcome", timeout=5)
            assert len(h.gs.store) == 1
            h.ws_server.close()

        run(main())


class TestProtocolRobustness:
    def test_malformed_json_three_strikes(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a:
                for i in range(3):
                    await a.send("this is not json{")
                err1 = await recv_until(a, "error")
                assert err1["code"] == "MalformedFrame"
                # connection closes after the third strike
                with pytest.raises(Exception):
                    for _ in range(20):
                        await recv_frame(a, timeout=2)
            h.ws_server.close()

        run(main())

    def test_action_without_session(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a:
                await send(a, type="message", text="into the void")
                err = await recv_until(a, "error")
                assert err["code"] == "NotInSession"
            h.ws_server.close()

        run(main())

    def test_unknown_frame_type(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a:
                await send(a, type="teleport")
                err = await recv_until(a, "error")
                assert err["code"] == "UnknownFrameType"
            h.ws_server.close()

        run(main())

    def test_select_bad_payload(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a, connect(h.url) as b:
                await send(a, type="join")
                await send(b, type="join")
                await recv_until(a, "paired")
                await send(a, type="select")
                err = await recv_until(a, "error")
                assert err["code"] == "BadPayload"
            h.ws_server.close()

        run(main())


class TestStore:
    def test_append_dedups(self, tmp_path, small_corpus):
        store = TranscriptStore(tmp_path)
        assert store.append(small_corpus[0]) is True
        assert store.append(small_corpus[0]) is False
        assert len(store) == 1

    def test_load_dedups_duplicate_lines(self, tmp_path, small_corpus):
        from ocref.corpus import transcript_to_dict

        store = TranscriptStore(tmp_path)
        store.append(small_corpus[0])
        # simulate a crash that wrote the same record twice
        line = json.dumps(transcript_to_dict(small_corpus[0]))
        with open(store.path, "a") as f:
            f.write(line + "\n")
        again = TranscriptStore(tmp_path)
        assert len(again.load()) == 1

    def test_restart_preserves_ids(self, tmp_path, small_corpus):
        store = TranscriptStore(tmp_path)
        for t in small_corpus[:5]:
            store.append(t)
        restarted = TranscriptStore(tmp_path)
        assert len(restarted) == 5
        assert restarted.append(small_corpus[0]) is False
        assert restarted.append(small_corpus[5]) is True


class TestEnginePassthrough:
    def test_select_out_of_view_over_the_wire(self, tmp_path):
        async def main():
            h = await start_server(tmp_path)
            async with connect(h.url) as a, connect(h.url) as b:
                await send(a, type="join")
                await send(b, type="join")
                pa = await recv_until(a, "paired")
                await recv_until(b, "paired")
                session = next(iter(h.gs.sessions.values()))
                my_agent = pa["agent"]
                foreign = next(
                    e.id for e in session.state.world.entities
                    if e.id not in session.state.world.views[my_agent].visible_ids)
                # wait until selection is open, then try the foreign dot
                while True:
                    f = await recv_frame(a)
                    if f["type"] == "tick" and f.get("select_open"):
                        break
                await send(a, type="select", entity_id=foreign)
                err = await recv_until(a, "error")
                assert err["code"] == "EntityNotVisible"
                assert session.state.selections[my_agent] is None
            h.ws_server.close()

        run(main())
