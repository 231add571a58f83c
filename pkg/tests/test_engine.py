import numpy as np
import pytest

from ocref import engine
from ocref.engine import (
    Message,
    Outcome,
    Select,
    Timing,
    apply,
    new_session,
    outcome,
    replay,
)
from ocref.world import World, generate_world

S = 1000  # ms per second


@pytest.fixture
def world():
    return generate_world(5, seed=42)


@pytest.fixture
def state(world):
    return new_session(world, started_at=0, first_speaker=0)


def first_visible(state, agent):
    return state.world.views[agent].visible_ids[0]


def shared_id(state):
    return sorted(set(state.world.views[0].visible_ids)
                  & set(state.world.views[1].visible_ids))[0]


class TestPhases:
    def test_reading_then_active_then_done(self, state):
        assert state.phase(10 * S) == engine.PHASE_READING
        assert state.phase(30 * S) == engine.PHASE_ACTIVE
        assert state.phase(20 * S) == engine.PHASE_ACTIVE  # boundary: reading is over
        assert state.phase((20 + 360) * S + 1) == engine.PHASE_DONE

    def test_done_when_both_selected(self, state):
        sid = shared_id(state)
        state = apply(state, 0, Select(sid), 80 * S)
        state = apply(state, 1, Select(sid), 81 * S)
        assert state.phase(82 * S) == engine.PHASE_DONE

    def test_invalid_world_rejected(self, world):
        bad = World(world.world_id, world.num_shared, world.entities[1:],
                    world.views, world.seed)
        with pytest.raises(engine.InvalidWorld):
            new_session(bad, 0, 0)


class TestMessages:
    def test_alternation_enforced(self, state):
        state = apply(state, 0, Message("hi"), 21 * S)
        with pytest.raises(engine.NotYourTurn):
            apply(state, 0, Message("again"), 22 * S)
        state = apply(state, 1, Message("hello"), 23 * S)
        state = apply(state, 0, Message("ok"), 24 * S)
        assert [e.agent for e in state.events] == [0, 1, 0]

    def test_wrong_first_speaker(self, state):
        with pytest.raises(engine.NotYourTurn):
            apply(state, 1, Message("me first"), 21 * S)

    def test_message_during_reading(self, state):
        with pytest.raises(engine.NotActiveYet):
            apply(state, 0, Message("too soon"), 5 * S)

    def test_message_after_timeout(self, state):
        with pytest.raises(engine.SessionOver):
            apply(state, 0, Message("too late"), 20 * S + 360 * S)


class TestSelections:
    def test_lockout_boundary(self, state):
        # active starts at 20 s; lockout is the first 60 s of activity
        with pytest.raises(engine.TooEarlyToSelect):
            apply(state, 0, Select(first_visible(state, 0)), (20 + 59) * S)
        after = apply(state, 0, Select(first_visible(state, 0)), (20 + 60) * S)
        assert after.selections[0] == first_visible(state, 0)

    def test_select_does_not_consume_turn(self, state):
        state = apply(state, 1, Select(first_visible(state, 1)), 90 * S)
        assert state.next_speaker == 0
        state = apply(state, 0, Message("still me"), 91 * S)
        assert state.next_speaker == 1

    def test_select_out_of_view(self, state):
        foreign = next(e.id for e in state.world.entities
                       if e.id not in state.world.views[0].visible_ids)
        with pytest.raises(engine.EntityNotVisible):
            apply(state, 0, Select(foreign), 90 * S)

    def test_single_shot(self, state):
        state = apply(state, 0, Select(first_visible(state, 0)), 90 * S)
        with pytest.raises(engine.AlreadySelected):
            apply(state, 0, Select(first_visible(state, 0)), 95 * S)

    def test_no_select_during_reading(self, state):
        with pytest.raises(engine.NotActiveYet):
            apply(state, 0, Select(first_visible(state, 0)), 5 * S)

    def test_selection_never_overwritten(self, state):
        sid = first_visible(state, 0)
        state = apply(state, 0, Select(sid), 90 * S)
        other = state.world.views[0].visible_ids[1]
        with pytest.raises(engine.AlreadySelected):
            apply(state, 0, Select(other), 96 * S)
        assert state.selections[0] == sid


class TestOutcome:
    def test_success(self, state):
        sid = shared_id(state)
        state = apply(state, 0, Select(sid), 90 * S)
        state = apply(state, 1, Select(sid), 91 * S)
        assert outcome(state, 92 * S) == Outcome("success", (sid, sid))

    def test_failure(self, state):
        a = first_visible(state, 0)
        b = next(i for i in state.world.views[1].visible_ids if i != a)
        state = apply(state, 0, Select(a), 90 * S)
        state = apply(state, 1, Select(b), 91 * S)
        assert outcome(state, 92 * S).status == "failure"

    def test_expired(self, state):
        state = apply(state, 0, Select(first_visible(state, 0)), 90 * S)
        assert outcome(state, 91 * S) is None
        out = outcome(state, (20 + 360) * S)
        assert out.status == "expired"
        assert out.selections[0] is not None and out.selections[1] is None

    def test_not_done(self, state):
        assert outcome(state, 30 * S) is None


class TestReplay:
    def test_replay_reproduces_state(self, state):
        sid = shared_id(state)
        state = apply(state, 0, Message("one"), 21 * S)
        state = apply(state, 1, Message("two"), 25 * S)
        state = apply(state, 0, Select(sid), 90 * S)
        state = apply(state, 1, Select(sid), 95 * S)
        again = replay(state.world, 0, 0, state.events)
        assert again == state

    @pytest.mark.parametrize("seed", range(12))
    def test_replay_random_logs(self, seed):
        rng = np.random.default_rng(seed)
        w = generate_world(int(rng.choice((4, 5, 6))), seed=seed)
        first = int(rng.integers(2))
        state = new_session(w, 0, first)
        now = state.active_start
        accepted = 0
        for _ in range(30):
            now += int(rng.integers(500, 20_000))
            agent = int(rng.integers(2))
            if rng.random() < 0.3:
                ids = w.views[agent].visible_ids
                action = Select(int(ids[rng.integers(7)]))
            else:
                action = Message(f"t{rng.integers(50)}")
            try:
                state = apply(state, agent, action, now)
                accepted += 1
            except engine.EngineError:
                pass
        assert replay(w, 0, first, state.events) == state
        assert len(state.events) == accepted


class TestInvariantProperties:
    def test_message_speakers_strictly_alternate(self, state):
        rng = np.random.default_rng(0)
        now = state.active_start
        for _ in range(60):
            now += int(rng.integers(100, 5_000))
            agent = int(rng.integers(2))
            try:
                state = apply(state, agent, Message("x"), now)
            except engine.EngineError:
                pass
        speakers = [e.agent for e in state.events]
        assert all(a != b for a, b in zip(speakers, speakers[1:]))

    def test_no_accepted_select_before_lockout(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            w = generate_world(5, seed=trial)
            state = new_session(w, 0, 0)
            now = 0
            for _ in range(40):
                now += int(rng.integers(500, 8_000))
                agent = int(rng.integers(2))
                try:
                    state = apply(state, agent,
                                  Select(int(w.views[agent].visible_ids[rng.integers(7)])),
                                  now)
                except engine.EngineError:
                    pass
            for ev in state.events:
                if isinstance(ev.kind, Select):
                    assert ev.ts >= state.select_allowed_at

    def test_events_timestamp_nondecreasing(self, state):
        sid = shared_id(state)
        state = apply(state, 0, Message("a"), 21 * S)
        state = apply(state, 1, Message("b"), 30 * S)
        state = apply(state, 0, Select(sid), 90 * S)
        ts = [e.ts for e in state.events]
        assert ts == sorted(ts)

    def test_backwards_clock_clamped(self, state):
        # a clock stepping backwards cannot produce out-of-order events
        state = apply(state, 0, Message("a"), 30 * S)
        state = apply(state, 1, Message("b"), 29 * S)
        assert [e.ts for e in state.events] == [30 * S, 30 * S]
        again = replay(state.world, 0, 0, state.events)
        assert again == state

    def test_no_event_after_done(self, state):
        sid = shared_id(state)
        state = apply(state, 0, Select(sid), 90 * S)
        state = apply(state, 1, Select(sid), 91 * S)
        for action in (Message("late"), Select(sid)):
            with pytest.raises(engine.SessionOver):
                apply(state, 0, action, 92 * S)

    def test_custom_timing(self, world):
        timing = Timing(reading_ms=1000, active_ms=5000, lockout_ms=2000)
        st = new_session(world, 0, 0, timing)
        assert st.phase(500) == engine.PHASE_READING
        assert st.phase(1000) == engine.PHASE_ACTIVE
        assert st.phase(6000) == engine.PHASE_DONE
        with pytest.raises(engine.TooEarlyToSelect):
            apply(st, 0, Select(first_visible(st, 0)), 2500)
        assert apply(st, 0, Select(first_visible(st, 0)), 3000).selections[0] is not None
