"""Closed-loop execution: sense, re-synthesize on knowledge change, act.

Each sampling step quantizes the concrete state, runs the detection
relation against the undetected sign cells, enlarges the avoid set and
re-solves the game when something new was detected, then applies the
policy input and integrates the disturbed dynamics for one period.  The
disturbance realization is piecewise constant per period, drawn uniformly
from W by a seeded generator, so runs are bit-reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .dynamics import flow
from .errors import InitialStateNotWinning, InitialStateOutsideDomain
from .ltl import compile_objective
from .synthesis import solve_reach_avoid


class Outcome(enum.Enum):
    REACHED_TARGET = "ReachedTarget"
    ENTERED_AVOID = "EnteredAvoid"
    SYNTHESIS_FAILED = "SynthesisFailed"
    STEP_LIMIT = "StepLimit"


@dataclass
class SensorState:
    known_signs: set[int] = field(default_factory=set)
    last_detection_step: int = -1


@dataclass
class TraceStep:
    step: int
    time: float
    state: np.ndarray
    cell: int
    input_index: int          # -1 on the terminal row
    input_value: float
    detected: tuple[int, ...]
    resynthesized: bool


@dataclass
class Trace:
    seed: int
    steps: list[TraceStep]
    outcome: Outcome
    resynth_count: int


def sensor_step(interp, sign_extent: frozenset[int], cell: int,
                sensor: SensorState, role_name: str = "Proximity",
                step: int = 0) -> tuple[int, ...]:
    """Detect sign cells in proximity of the current cell; knowledge only
    grows.  Returns the newly detected cells, sorted."""
    role = interp.roles[role_name]
    candidates = frozenset(sign_extent) - sensor.known_signs
    newly = tuple(sorted(role.successors_in(cell, candidates)))
    if newly:
        sensor.known_signs.update(newly)
        sensor.last_detection_step = step
    return newly


def run_closed_loop(world, seed: int, max_steps: int) -> Trace:
    """Run the knowledge-aware control loop until target entry, avoid
    entry, synthesis failure, or the step limit.

    ``world`` is a prepared :class:`~kaware.scenario.World` bundling the
    system, grids, abstraction, interpretation, and sign/street links.
    """
    grid_x, grid_u = world.grid_x, world.grid_u
    sys = world.system
    if not grid_x.bounds.contains(grid_x.wrap(world.initial_state), tol=1e-9):
        raise InitialStateOutsideDomain(
            f"initial state {world.initial_state.tolist()} outside the state space")
    rng = np.random.default_rng(seed)
    sensor = SensorState()
    sign_extent = world.interp.extent(world.sign_concept) if world.sign_links else frozenset()
    objective = compile_objective(world.interp, world.sign_links,
                                  sensor.known_signs)
    controller = solve_reach_avoid(world.abstraction, objective)
    target = objective.target
    avoid = objective.avoid
    steps: list[TraceStep] = []
    resynth_count = 0
    x = np.asarray(world.initial_state, dtype=float)
    outcome = Outcome.STEP_LIMIT

    for i in range(max_steps + 1):
        cell = grid_x.quantize(x)
        if cell in avoid:
            steps.append(TraceStep(i, i * sys.tau, x, cell, -1, 0.0, (), False))
            outcome = Outcome.ENTERED_AVOID
            break
        if cell in target:
            steps.append(TraceStep(i, i * sys.tau, x, cell, -1, 0.0, (), False))
            outcome = Outcome.REACHED_TARGET
            break
        newly = sensor_step(world.interp, sign_extent, cell, sensor, step=i)
        resynth = bool(newly)
        if resynth:
            objective = compile_objective(world.interp, world.sign_links,
                                          sensor.known_signs)
            controller = solve_reach_avoid(world.abstraction, objective)
            target = objective.target
            avoid = objective.avoid
            resynth_count += 1
        if not controller.winning_mask[cell]:
            if i == 0:
                raise InitialStateNotWinning(
                    f"initial cell {cell} outside the winning region")
            steps.append(TraceStep(i, i * sys.tau, x, cell, -1, 0.0,
                                   newly, resynth))
            outcome = Outcome.SYNTHESIS_FAILED
            break
        if i == max_steps:
            steps.append(TraceStep(i, i * sys.tau, x, cell, -1, 0.0,
                                   newly, resynth))
            outcome = Outcome.STEP_LIMIT
            break
        u_idx = controller.policy(cell)
        u = grid_u.center(u_idx)
        w = rng.uniform(-sys.dist_halfwidth, sys.dist_halfwidth)
        steps.append(TraceStep(i, i * sys.tau, x, cell, u_idx, float(u[0]),
                               newly, resynth))
        x = flow(sys, x, u, sys.tau, disturbance=w)

    return Trace(seed=seed, steps=steps, outcome=outcome,
                 resynth_count=resynth_count)


# ---------------------------------------------------------------------------
# trace CSV

_COLUMNS = "step,time,x1,x2,x3,cell,input_index,u_value,detected,resynth,outcome_at_end"


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_trace_csv(trace: Trace, path: str):
    lines = [f"# seed={trace.seed}", _COLUMNS]
    last = len(trace.steps) - 1
    for idx, st in enumerate(trace.steps):
        detected = ";".join(str(c) for c in st.detected)
        outcome = trace.outcome.value if idx == last else ""
        lines.append(",".join([
            str(st.step), _fmt(st.time),
            _fmt(st.state[0]), _fmt(st.state[1]), _fmt(st.state[2]),
            str(st.cell), str(st.input_index), _fmt(st.input_value),
            detected, "1" if st.resynthesized else "0", outcome,
        ]))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path: str) -> Trace:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    seed = -1
    if lines and lines[0].startswith("# seed="):
        seed = int(lines[0].split("=", 1)[1])
        lines = lines[1:]
    if not lines or lines[0] != _COLUMNS:
        raise ValueError("missing or unexpected trace header row")
    steps = []
    outcome = None
    for ln in lines[1:]:
        parts = ln.split(",")
        detected = tuple(int(c) for c in parts[8].split(";") if c)
        steps.append(TraceStep(
            step=int(parts[0]), time=float(parts[1]),
            state=np.array([float(parts[2]), float(parts[3]), float(parts[4])]),
            cell=int(parts[5]), input_index=int(parts[6]),
            input_value=float(parts[7]), detected=detected,
            resynthesized=parts[9] == "1"))
        if parts[10]:
            outcome = Outcome(parts[10])
    if outcome is None:
        raise ValueError("trace has no outcome marker")
    return Trace(seed=seed, steps=steps, outcome=outcome,
                 resynth_count=sum(1 for s in steps if s.resynthesized))
