"""Scenario loading, rollouts, traces, and controller comparison."""

from dataclasses import replace

import numpy as np
import pytest

import safemotion as sm
from safemotion import scenario as scn
from safemotion.server import bundled_scenario_path
from safemotion.traces import emit_trace, make_record, parse_trace, trace_header

BUNDLED = ("stable_box", "unstable_box", "limit_cycle_box", "goal_loop_3d",
           "teach_blank")


def load_bundled(name: str, **overrides) -> sm.Scenario:
    s = sm.load_scenario(bundled_scenario_path(name))
    return replace(s, **overrides) if overrides else s


def small(name: str, count=3, max_steps=400) -> sm.Scenario:
    s = load_bundled(name, max_steps=max_steps)
    if s.starts.kind == "list":
        return s
    return replace(s, starts=replace(s.starts, count=count))


def test_all_bundled_scenarios_load_and_validate():
    for name in BUNDLED:
        s = load_bundled(name)
        scn.validate_scenario(s, check_starts=False)
        assert s.name == name


def test_load_missing_file_raises(tmp_path):
    with pytest.raises(sm.ScenarioError):
        sm.load_scenario(tmp_path / "nope.yaml")


def test_load_rejects_unknown_controller(tmp_path):
    src = bundled_scenario_path("unstable_box").read_text()
    bad = tmp_path / "bad.yaml"
    bad.write_text(src.replace("controller: zcbf", "controller: mpc"))
    with pytest.raises(sm.ScenarioError):
        sm.load_scenario(bad)


def test_validate_rejects_goal_outside_barriers():
    s = load_bundled("stable_box")
    bad = replace(s, goals=((5.0, 0.0),))
    with pytest.raises(sm.ScenarioError):
        scn.validate_scenario(bad, check_starts=False)


def test_validate_rejects_infeasible_barrier_set():
    from conftest import make_slab_conflict

    s = load_bundled("unstable_box")
    bad = replace(s, barriers=make_slab_conflict(), goals=())
    with pytest.raises(sm.ScenarioError):
        scn.validate_scenario(bad, check_starts=False)


def test_validate_rejects_rcbf_with_exterior_starts():
    s = load_bundled("unstable_box", controller="rcbf")
    bad = replace(s, starts=replace(s.starts, kind="sample_exterior"))
    with pytest.raises(sm.ScenarioError):
        scn.validate_scenario(bad)


def test_resolve_starts_deterministic_and_in_range():
    s = small("unstable_box", count=10)
    a = scn.resolve_starts(s)
    b = scn.resolve_starts(s)
    assert all(np.array_equal(p, q) for p, q in zip(a, b))
    for x in a:
        assert s.barriers.evaluate_all(x).min() >= s.starts.margin


def test_resolve_exterior_starts_respect_band():
    s = load_bundled("unstable_box")
    ext = replace(s, starts=replace(s.starts, kind="sample_exterior", count=10))
    for x in scn.resolve_starts(ext):
        hmin = s.barriers.evaluate_all(x).min()
        assert -0.3 <= hmin <= -0.05


def test_run_deterministic_traces_bitwise(tmp_path):
    s = small("unstable_box")
    dims = (2, 2, 4)
    paths = []
    for k in range(2):
        res = scn.run_scenario(s, record_timing=False)
        p = tmp_path / f"run{k}.csv"
        emit_trace(res.records, p, fmt="csv", dims=dims)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]
    jl = []
    for k in range(2):
        res = scn.run_scenario(s, record_timing=False)
        p = tmp_path / f"run{k}.jsonl"
        emit_trace(res.records, p, fmt="jsonl", dims=dims)
        jl.append(p.read_bytes())
    assert jl[0] == jl[1]


def test_timed_runs_identical_except_solve_time():
    s = small("limit_cycle_box")
    r1 = scn.run_scenario(s).records
    r2 = scn.run_scenario(s).records
    assert len(r1) == len(r2)
    for a, b in zip(r1[:500], r2[:500]):
        assert a.x == b.x and a.u_star == b.u_star and a.h == b.h
        assert a.active == b.active and a.step == b.step and a.t == b.t


def test_invariance_quick_all_boxes():
    for name in ("stable_box", "unstable_box", "limit_cycle_box"):
        res = scn.run_scenario(small(name, count=4, max_steps=800))
        assert res.metrics.min_h >= -1e-6, name


def test_fused_and_python_paths_agree(monkeypatch):
    s = small("limit_cycle_box", max_steps=300)
    assert scn._fused_eligible(s)
    fused = scn.run_scenario(s, record_timing=False)
    monkeypatch.setattr(scn, "_fused_eligible", lambda _s: False)
    plain = scn.run_scenario(s, record_timing=False)
    assert len(fused.records) == len(plain.records)
    for a, b in zip(fused.records, plain.records):
        assert np.allclose(a.x, b.x, atol=1e-9)
        assert np.allclose(a.u_star, b.u_star, atol=1e-9)
        assert np.allclose(a.h, b.h, atol=1e-9)
        assert a.active == b.active
        assert a.step == b.step


def test_trace_round_trip_exact(tmp_path):
    s = small("unstable_box", count=2, max_steps=120)
    res = scn.run_scenario(s)
    dims = (2, 2, 4)
    for fmt in ("csv", "jsonl"):
        p1 = tmp_path / f"a.{fmt}"
        p2 = tmp_path / f"b.{fmt}"
        emit_trace(res.records, p1, fmt=fmt, dims=dims)
        records, parsed_dims = parse_trace(p1)
        assert parsed_dims == dims
        assert records == list(res.records)
        emit_trace(records, p2, fmt=fmt, dims=dims)
        assert p1.read_bytes() == p2.read_bytes()


def test_empty_trace_header_only(tmp_path):
    p = tmp_path / "empty.csv"
    emit_trace([], p, fmt="csv", dims=(2, 2, 4))
    lines = p.read_text().splitlines()
    assert len(lines) == 1
    records, dims = parse_trace(p)
    assert records == [] and dims == (2, 2, 4)


def test_trace_column_count_planar():
    header = trace_header(2, 2, 4)
    assert len(header) == 4 + 2 * 2 + 2 * 4 + 2 == 18
    assert header[0] == "step" and header[-1] == "solve_time"


def test_trace_header_matches_record_layout():
    rec = make_record(0, 0.0, (0.1, 0.2), (0.0, 0.0), (0.3, 0.4),
                      (1.0, 2.0, 3.0, 4.0), (0, 1, 0, 0), "execute", 1e-6)
    header = trace_header(2, 2, 4)
    assert len(header) == 4 + 2 + 2 + 4 + 4 + 2


def test_capture_stops_single_goal_run():
    s = small("stable_box", count=2, max_steps=5000)
    res = scn.run_scenario(s)
    for sr in res.start_results:
        assert sr.stop_reason == "captured"
        assert sr.captures == 1
        assert len(sr.records) < s.max_steps


def test_strict_raises_nonstrict_records_failure():
    s = load_bundled("unstable_box", controller="rcbf")
    exterior = replace(s, starts=replace(s.starts, kind="sample_exterior", count=2))
    with pytest.raises(sm.ScenarioError):
        scn.run_scenario(exterior)
    res = scn.run_scenario(exterior, strict=False)
    assert len(res.metrics.failures) == 2
    for sr in res.start_results:
        assert sr.stop_reason == "undefined_barrier"


def test_compare_controllers_interior():
    s = small("stable_box", count=2, max_steps=2500)
    report = scn.compare_controllers(s, controllers=("zcbf", "rcbf"))
    doc = report.to_dict()
    assert set(doc["controllers"]) == {"zcbf", "rcbf"}
    for ctrl in ("zcbf", "rcbf"):
        m = report.metrics[ctrl]
        assert m.min_h >= -1e-6
        assert m.n_captures == 2
        assert not m.failures


def test_compare_controllers_exterior_failure_modes():
    s = load_bundled("unstable_box", max_steps=600)
    s = replace(s, starts=replace(s.starts, kind="sample_exterior", count=3))
    report = scn.compare_controllers(s)
    zcbf, rcbf, co = (report.metrics[c] for c in ("zcbf", "rcbf", "co"))
    assert zcbf.min_h >= -0.3 and not zcbf.failures
    assert len(rcbf.failures) == 3
    assert co.max_step_disp >= 5.0 * zcbf.max_step_disp


def test_metrics_fields_populated():
    res = scn.run_scenario(small("unstable_box", count=2, max_steps=200))
    m = res.metrics
    assert m.controller == "zcbf"
    assert m.n_starts == 2
    assert m.total_steps == 400
    assert m.wall_time > 0.0
    assert m.mean_solve_time >= 0.0
    assert m.max_step_disp > 0.0
    d = m.to_dict()
    assert d["min_h"] == m.min_h


def test_list_starts_run_fused():
    s = load_bundled("unstable_box", max_steps=300)
    s = replace(s, starts=scn.StartSpec(kind="list", points=((0.1, 0.2), (-0.4, 0.0))))
    res = scn.run_scenario(s)
    assert res.metrics.n_starts == 2
    assert res.start_results[0].records[0].x == (0.1, 0.2)
