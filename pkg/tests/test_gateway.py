"""Teaching gateway: protocol, modes, decimation, faults, replay."""

from dataclasses import replace

import numpy as np
import pytest

import safemotion as sm
from safemotion import gateway, learning
from safemotion.barriers import emit_barrier_set
from safemotion.server import bundled_scenario_path

from conftest import make_slab_conflict


def blank_session(**kw) -> gateway.SessionState:
    s = sm.load_scenario(bundled_scenario_path("teach_blank"))
    return gateway.new_session(s, **kw)


def client(kind: str, t: float, **payload) -> dict:
    return {"v": 1, "kind": kind, "t": t, "payload": payload}


def drive(st, ops):
    """Apply (kind, payload) ops stamped with the session clock, one tick apart."""
    log = []
    msgs = []
    for kind, payload in ops:
        msg = {"v": 1, "kind": kind, "t": st.t, "payload": payload}
        log.append(msg)
        st, replies = gateway.handle_message(st, msg)
        msgs.extend(replies)
        st, bcast = gateway.tick(st)
        msgs.append(bcast)
    return st, msgs, log


def test_new_session_defaults():
    st = blank_session()
    assert st.mode == "execute"
    assert st.t == 0.0
    assert len(st.aset) == 0
    assert st.dt == pytest.approx(1.0 / gateway.TICK_HZ)


def test_parse_rejects_malformed_messages():
    good = client("grab", 0.0)
    for bad in (
        "nope",
        {**good, "v": 2},
        {**good, "kind": "fly"},
        {**good, "t": float("nan")},
        {**good, "payload": 3},
    ):
        with pytest.raises(sm.ProtocolError):
            gateway.parse_client_message(bad)


def test_malformed_message_yields_error_reply_not_raise():
    st = blank_session()
    st2, replies = gateway.handle_message(st, {"v": 7, "kind": "grab", "t": 0.0})
    assert st2 is st
    assert replies[0]["kind"] == "error"


def test_grab_release_mode_cycle():
    st = blank_session()
    st, replies = gateway.handle_message(st, client("grab", 0.0))
    assert st.mode == "teach"
    assert replies[0]["payload"]["name"] == "mode_changed"
    st, replies = gateway.handle_message(st, client("grab", 0.01))
    assert st.mode == "teach"
    assert replies[0]["payload"]["name"] == "already_teaching"
    st, replies = gateway.handle_message(st, client("release", 0.02))
    assert st.mode == "execute"
    st, replies = gateway.handle_message(st, client("release", 0.03))
    assert replies[0]["payload"]["name"] == "already_executing"


def test_move_ignored_in_execute_mode():
    st = blank_session()
    x_before = st.x
    st, replies = gateway.handle_message(st, client("move", 0.0, x=[0.0, 0.0]))
    assert st.x == x_before
    assert replies[0]["payload"]["name"] == "move_ignored"


def test_teach_mode_is_position_passthrough():
    st = blank_session()
    st, _ = gateway.handle_message(st, client("grab", 0.0))
    st, _ = gateway.handle_message(st, client("move", 0.001, x=[0.3, 0.25]))
    assert st.x == (0.3, 0.25)
    # Ticks in teach mode advance time but never integrate.
    t0 = st.t
    st, bcast = gateway.tick(st)
    assert st.x == (0.3, 0.25)
    assert st.t == pytest.approx(t0 + st.dt)
    assert bcast["payload"]["mode"] == "teach"


def test_execute_ticks_do_not_learn():
    st = blank_session()
    for _ in range(20):
        st, _ = gateway.tick(st)
    assert len(st.aset) == 0 and len(st.buf) == 0


def test_decimation_at_ten_hz():
    st = blank_session(decimation_hz=10.0)
    st, _ = gateway.handle_message(st, client("grab", 0.0))
    ingested = 0
    t = 0.0
    for k in range(31):
        st, replies = gateway.handle_message(
            st, client("move", t, x=[0.1 + 0.01 * k, 0.3 + 0.005 * k]))
        # A decimated-away move returns no replies; an ingested one always
        # reports at least one learning event.
        ingested += bool(replies)
        t += 0.01
    # 0.0 .. 0.30 s at 10 Hz admits the samples at 0.0, 0.1, 0.2, 0.3.
    assert ingested == 4


def test_decimation_exact_boundary_spacing():
    st = blank_session(decimation_hz=10.0)
    st, _ = gateway.handle_message(st, client("grab", 0.0))
    count = 0
    for k in range(5):
        st, replies = gateway.handle_message(
            st, client("move", 0.1 * k, x=[0.1 + 0.1 * k, 0.4]))
        count += bool(replies)
    assert count == 5


def test_teaching_fits_barriers_and_broadcasts():
    st = blank_session()
    st, _ = gateway.handle_message(st, client("grab", 0.0))
    st, r1 = gateway.handle_message(st, client("move", 0.0, x=[0.0, 1.0]))
    st, r2 = gateway.handle_message(st, client("move", 0.1, x=[1.0, 1.0]))
    kinds = [m["kind"] for m in r1 + r2]
    assert "barrier_added" in kinds
    added = next(m for m in r2 if m["kind"] == "barrier_added")
    b = added["payload"]["barrier"]
    assert b["id"] == "b1"
    assert np.allclose(b["normal"], (0.0, -1.0), atol=1e-10)
    assert b["offset"] == pytest.approx(1.0, abs=1e-10)
    assert len(st.aset) == 1


def test_degenerate_teach_cluster_reports_and_clears():
    st = blank_session()
    st, _ = gateway.handle_message(st, client("grab", 0.0))
    st, _ = gateway.handle_message(st, client("move", 0.0, x=[0.5, 0.5]))
    st, replies = gateway.handle_message(st, client("move", 0.1, x=[0.5, 0.5]))
    assert replies[0]["kind"] == "error"
    assert len(st.buf) == 0
    st, r1 = gateway.handle_message(st, client("move", 0.2, x=[0.0, 1.0]))
    st, r2 = gateway.handle_message(st, client("move", 0.3, x=[1.0, 1.0]))
    assert any(m["kind"] == "barrier_added" for m in r2)


def test_execute_integrates_and_broadcasts_consistent_h():
    st = blank_session()
    st, _ = gateway.handle_message(st, client("grab", 0.0))
    st, _ = gateway.handle_message(st, client("move", 0.0, x=[0.0, 1.0]))
    st, _ = gateway.handle_message(st, client("move", 0.1, x=[1.0, 1.0]))
    st = replace(st, x=(0.6, 0.45))
    st, _ = gateway.handle_message(st, client("release", 0.2))
    for _ in range(200):
        st, bcast = gateway.tick(st)
        assert bcast["kind"] == "state"
        payload = bcast["payload"]
        h_expected = st.aset.evaluate_all(np.array(payload["x"]))
        assert np.array_equal(np.array(payload["h_values"]), h_expected)
        assert min(payload["h_values"]) >= -1e-6
    assert st.captures >= 0


def test_goal_capture_cycles_goals():
    s = sm.load_scenario(bundled_scenario_path("goal_loop_3d"))
    st = gateway.new_session(s, start=np.array([-0.45, 0.05, 0.0]))
    st = replace(st, dt=0.002)
    seen_goal_indices = {st.goal_index}
    for _ in range(4000):
        st, _ = gateway.tick(st)
        seen_goal_indices.add(st.goal_index)
        if st.captures >= 3:
            break
    assert st.captures >= 3
    assert seen_goal_indices == {0, 1}


def test_set_goal_validates():
    st = blank_session()
    st, _ = gateway.handle_message(st, client("grab", 0.0))
    st, _ = gateway.handle_message(st, client("move", 0.0, x=[0.0, 1.0]))
    st, _ = gateway.handle_message(st, client("move", 0.1, x=[1.0, 1.0]))
    st, replies = gateway.handle_message(st, client("set_goal", 0.2, goal=[0.0, 2.0]))
    assert replies[0]["kind"] == "error"
    st, replies = gateway.handle_message(st, client("set_goal", 0.3, goal=[0.2, 0.1]))
    assert replies[0]["kind"] == "event"
    assert st.goals == ((0.2, 0.1),)
    assert np.allclose(st.learner_cfg.goal, (0.2, 0.1))


def test_set_goal_rejected_for_goalless_system():
    s = sm.load_scenario(bundled_scenario_path("unstable_box"))
    st = gateway.new_session(s, start=np.array([0.1, 0.1]))
    st, replies = gateway.handle_message(st, client("set_goal", 0.0, goal=[0.0, 0.0]))
    assert replies[0]["kind"] == "error"
    assert "no goal" in replies[0]["payload"]["message"]


def test_config_updates_and_rejects():
    st = blank_session()
    st, replies = gateway.handle_message(
        st, client("config", 0.0, delta=0.08, gamma=12.0, dt=0.02))
    assert replies[0]["payload"]["name"] == "config_changed"
    assert st.learner_cfg.delta == pytest.approx(0.08)
    assert st.learner_cfg.gain == pytest.approx(12.0)
    assert st.dt == pytest.approx(0.02)
    st2, replies = gateway.handle_message(st, client("config", 0.1, dt=5.0))
    assert replies[0]["kind"] == "error"
    assert st2.dt == st.dt
    st3, replies = gateway.handle_message(st, client("config", 0.2, delta=1e-9))
    assert replies[0]["kind"] == "error"
    assert st3.learner_cfg.delta == st.learner_cfg.delta


def test_reset_restores_start_but_keeps_id_counter():
    st = blank_session()
    st, _ = gateway.handle_message(st, client("grab", 0.0))
    st, _ = gateway.handle_message(st, client("move", 0.0, x=[0.0, 1.0]))
    st, _ = gateway.handle_message(st, client("move", 0.1, x=[1.0, 1.0]))
    st, _ = gateway.handle_message(st, client("release", 0.2))
    fit_count = st.buf.fit_count
    st, replies = gateway.handle_message(st, client("reset", 0.3))
    assert st.mode == "execute"
    assert st.x == st.initial_x
    assert len(st.aset) == 0
    assert st.buf.fit_count == fit_count
    st, _ = gateway.handle_message(st, client("grab", 0.4))
    st, _ = gateway.handle_message(st, client("move", 0.4, x=[0.0, 1.0]))
    st, replies = gateway.handle_message(st, client("move", 0.5, x=[1.0, 1.0]))
    added = next(m for m in replies if m["kind"] == "barrier_added")
    assert added["payload"]["barrier"]["id"] == "b2"


def test_infeasible_filter_freezes_session():
    st = blank_session()
    st = replace(st, aset=make_slab_conflict())
    st, msg = gateway.tick(st)
    assert msg["kind"] == "error"
    assert msg["payload"]["fault"] is True
    assert st.fault
    x_frozen = st.x
    for _ in range(5):
        st, msg = gateway.tick(st)
        assert msg["kind"] == "state"
        assert msg["payload"]["fault"]
    assert st.x == x_frozen


def test_replay_equivalence_bitwise():
    rng = np.random.default_rng(71)
    ops = []
    t = 0.0
    for segment in range(6):
        ops.append(("grab", {}))
        base = rng.uniform(-0.5, 0.5, size=2)
        direction = rng.normal(size=2)
        direction /= np.linalg.norm(direction)
        for k in range(12):
            p = base + 0.08 * k * direction
            ops.append(("move", {"x": [float(p[0]), float(p[1])]}))
        ops.append(("release", {}))

    def run(ops):
        st = blank_session()
        log = []
        for kind, payload in ops:
            msg = {"v": 1, "kind": kind, "t": st.t, "payload": dict(payload)}
            log.append(dict(msg))
            st, _ = gateway.handle_message(st, msg)
            for _ in range(3):
                st, _ = gateway.tick(st)
        return st, log

    st1, log = run(ops)
    st2, _ = run(ops)
    assert emit_barrier_set(st1.aset) == emit_barrier_set(st2.aset)

    # Direct learner replay of the decimated teach points from the log.
    cfg = st1.learner_cfg
    cfg0 = learning.LearnerConfig(goal=cfg.goal, delta=cfg.delta,
                                  decimation_hz=cfg.decimation_hz,
                                  refine=cfg.refine, gain=cfg.gain)
    aset = sm.AdmissibleSet(())
    buf = learning.TrainingBuffer(2)
    stats = None
    mode = "execute"
    last_sample = float("-inf")
    period = 1.0 / cfg.decimation_hz - 1e-9
    for msg in log:
        if msg["kind"] == "grab":
            mode = "teach"
        elif msg["kind"] == "release":
            mode = "execute"
        elif msg["kind"] == "move" and mode == "teach":
            if msg["t"] - last_sample >= period:
                try:
                    aset, buf, _, stats = learning.ingest(
                        np.array(msg["payload"]["x"]), msg["t"], cfg0,
                        aset, buf, stats)
                finally:
                    last_sample = msg["t"]
    assert emit_barrier_set(aset) == emit_barrier_set(st1.aset)


def test_state_broadcast_every_tick_in_all_modes():
    st = blank_session()
    kinds = []
    st, m = gateway.tick(st)
    kinds.append(m["kind"])
    st, _ = gateway.handle_message(st, client("grab", st.t))
    st, m = gateway.tick(st)
    kinds.append(m["kind"])
    assert kinds == ["state", "state"]
    assert m["v"] == 1 and "t" in m
