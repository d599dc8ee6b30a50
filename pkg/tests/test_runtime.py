import dataclasses
import json

import numpy as np
import pytest

from kaware import (Outcome, build_abstraction, build_world, load_scenario,
                    run_closed_loop)
from kaware.audit import audit_ok, audit_trace
from kaware.dynamics import reach_over_approx
from kaware.errors import InitialStateNotWinning, InitialStateOutsideDomain
from kaware.runtime import (SensorState, read_trace_csv, sensor_step,
                            write_trace_csv)

PI = np.pi

MINI_SCENARIO = {
    "name": "mini",
    "system": {
        "model": "dubins_car",
        "tau": 0.5,
        "state_bounds": {"lower": [0, 0, -PI], "upper": [2, 2, PI]},
        "input_bounds": {"lower": [-3.2], "upper": [3.2]},
        "eta_x": [0.5, 0.5, 1.6],
        "eta_u": [1.6],
        "periodic": [False, False, True],
        "disturbance": [0, 0, 0],
    },
    "map": {"regions": {"Target": [{"lower": [0, 0], "upper": [2, 2]}]}},
    "objective": "!Obstacle U Target",
    "initial_state": [1.0, 1.0, 0.0],
    "seed": 0,
    "max_steps": 10,
}


def make_world(tmp_path, overrides=None):
    raw = json.loads(json.dumps(MINI_SCENARIO))
    for key, value in (overrides or {}).items():
        blk = raw
        parts = key.split(".")
        for p in parts[:-1]:
            blk = blk[p]
        blk[parts[-1]] = value
    path = tmp_path / "mini.scn.json"
    path.write_text(json.dumps(raw))
    sc = load_scenario(str(path))
    abs_ = build_abstraction(sc.system(), sc.state_grid(), sc.input_grid())
    return sc, build_world(sc, abs_)


def test_trivial_scenario_reaches_target_immediately(tmp_path):
    sc, world = make_world(tmp_path)
    trace = run_closed_loop(world, seed=0, max_steps=10)
    assert trace.outcome is Outcome.REACHED_TARGET
    assert len(trace.steps) <= 2
    assert trace.resynth_count == 0


def test_initial_state_outside_domain(tmp_path):
    sc, world = make_world(tmp_path, {"initial_state": [-1.0, 0.5, 0.0]})
    with pytest.raises(InitialStateOutsideDomain):
        run_closed_loop(world, seed=0, max_steps=5)


def test_initial_state_not_winning(desk_world, desk_controller,
                                   desk_abstraction):
    controller, objective = desk_controller
    grid = desk_world.grid_x
    dead = ~controller.winning_mask.copy()
    for c in objective.avoid | objective.target:
        dead[c] = False
    cell = int(np.flatnonzero(dead)[0])
    sc2 = dataclasses.replace(desk_world.scenario,
                              initial_state=grid.center(cell))
    world2 = build_world(sc2, desk_abstraction)
    with pytest.raises(InitialStateNotWinning):
        run_closed_loop(world2, seed=0, max_steps=5)


def test_initial_state_in_obstacle_enters_avoid(desk_world, desk_abstraction):
    sc2 = dataclasses.replace(desk_world.scenario,
                              initial_state=np.array([2.4, 5.0, 0.0]))
    world2 = build_world(sc2, desk_abstraction)
    trace = run_closed_loop(world2, seed=0, max_steps=5)
    assert trace.outcome is Outcome.ENTERED_AVOID
    assert len(trace.steps) == 1


def test_desk_run_reaches_target_with_resynthesis(desk_trace):
    assert desk_trace.outcome is Outcome.REACHED_TARGET
    assert desk_trace.resynth_count >= 1
    flagged = [s for s in desk_trace.steps if s.resynthesized]
    assert flagged and all(s.detected for s in flagged)


def test_desk_run_audit_passes(desk_scenario, desk_trace):
    results = audit_trace(desk_scenario, desk_trace)
    assert audit_ok(results), [r for r in results if not r.ok]


def test_audit_catches_inserted_obstacle_visit(desk_scenario, desk_world,
                                               desk_trace):
    obstacle = desk_world.interp.extent("Obstacle")
    bad_cell = sorted(obstacle)[len(obstacle) // 2]
    steps = [dataclasses.replace(s) for s in desk_trace.steps]
    mid = len(steps) // 2
    state = desk_world.grid_x.center(bad_cell)
    steps[mid] = dataclasses.replace(steps[mid], state=state, cell=bad_cell)
    corrupted = dataclasses.replace(desk_trace, steps=steps)
    assert not audit_ok(audit_trace(desk_scenario, corrupted))


def test_same_seed_reproduces_trace(desk_world, desk_scenario, desk_trace,
                                    tmp_path):
    again = run_closed_loop(desk_world, seed=desk_scenario.seed,
                            max_steps=desk_scenario.max_steps)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace_csv(desk_trace, str(p1))
    write_trace_csv(again, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_per_step_soundness_echo(desk_world, desk_trace):
    """With W = {0} the next concrete state stays inside the reach set of
    the current cell and applied input."""
    sys = desk_world.system
    grid = desk_world.grid_x
    assert np.all(sys.dist_halfwidth == 0)
    for prev, nxt in zip(desk_trace.steps, desk_trace.steps[1:]):
        if prev.input_index < 0:
            continue
        c, r = reach_over_approx(sys, grid.center(prev.cell), grid.eta / 2,
                                 desk_world.grid_u.center(prev.input_index))
        d = np.abs(nxt.state - c)
        d[2] = min(d[2], 2 * PI - d[2])
        assert np.all(d <= r + 1e-9)


def test_sensor_step_is_monotone(desk_world, desk_trace):
    interp = desk_world.interp
    signs = interp.extent("NoEntrySign")
    detecting = next(s for s in desk_trace.steps if s.detected)
    sensor = SensorState()
    newly = sensor_step(interp, signs, detecting.cell, sensor, step=0)
    assert newly == detecting.detected
    assert sensor.last_detection_step == 0
    again = sensor_step(interp, signs, detecting.cell, sensor, step=1)
    assert again == ()
    assert sensor.last_detection_step == 0


def test_trace_csv_roundtrip(desk_trace, tmp_path):
    path = tmp_path / "trace.csv"
    write_trace_csv(desk_trace, str(path))
    text = path.read_text()
    assert text.startswith(f"# seed={desk_trace.seed}\n")
    assert "step,time,x1,x2,x3,cell," in text.splitlines()[1]
    back = read_trace_csv(str(path))
    assert back.seed == desk_trace.seed
    assert back.outcome == desk_trace.outcome
    assert back.resynth_count == desk_trace.resynth_count
    assert len(back.steps) == len(desk_trace.steps)
    for a, b in zip(back.steps, desk_trace.steps):
        assert a.step == b.step
        assert a.cell == b.cell
        assert a.input_index == b.input_index
        assert a.detected == b.detected
        assert a.resynthesized == b.resynthesized
        assert np.allclose(a.state, b.state, rtol=1e-8)


def test_trace_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("nonsense\n1,2,3\n")
    with pytest.raises(ValueError):
        read_trace_csv(str(path))


def test_trace_csv_rejects_missing_outcome(desk_trace, tmp_path):
    path = tmp_path / "no_outcome.csv"
    write_trace_csv(desk_trace, str(path))
    lines = path.read_text().splitlines()
    lines[-1] = lines[-1].rsplit(",", 1)[0] + ","
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        read_trace_csv(str(path))
