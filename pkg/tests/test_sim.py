import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rubble_probe.sim import (
    CELL_CLASSES,
    FORWARD_SPEED_MPS,
    NOISE_SIGMA,
    TICK_SECONDS,
    TURN_RATE_RADPS,
    Cell,
    DriveCommand,
    MapFormatError,
    ProbeState,
    RubbleMap,
    Simulator,
    apply_drive,
    demo_map,
    load_map,
    replay,
    save_map,
    tick,
)


def flat_map(ambient="silent", **cell_kwargs):
    cell = Cell(ambient=ambient, **cell_kwargs)
    return RubbleMap(4, 4, tuple(tuple(cell for _ in range(4)) for _ in range(4)))


# ------------------------------------------------------------------ map files


def test_demo_map_layout():
    m = demo_map()
    assert (m.width, m.height) == (3, 3)
    voice = m.cell_at(2.5, 0.5)
    assert voice.ambient == "hello_help"
    assert (voice.temp_c, voice.humidity_pct) == (32.67, 52.81)
    assert m.cell_at(2.5, 2.5).gas_raw == 820


def test_map_round_trip(tmp_path):
    path = tmp_path / "m.json"
    save_map(demo_map(), path)
    again = load_map(path)
    assert again.to_dict() == demo_map().to_dict()


def test_map_errors(tmp_path):
    path = tmp_path / "bad.json"
    doc = demo_map().to_dict()
    doc["cells"][0][0]["gas_raw"] = 5000
    path.write_text(json.dumps(doc))
    with pytest.raises(MapFormatError, match=r"cell \(0,0\)"):
        load_map(path)
    doc = demo_map().to_dict()
    del doc["cells"][1][2]["ambient"]
    path.write_text(json.dumps(doc))
    with pytest.raises(MapFormatError, match=r"cell \(2,1\)"):
        load_map(path)
    path.write_text("{not json")
    with pytest.raises(MapFormatError):
        load_map(path)


def test_cell_validation():
    with pytest.raises(ValueError):
        Cell(ambient="whistle")
    with pytest.raises(ValueError):
        Cell(humidity_pct=120.0)
    assert Cell().ambient == "silent"


def test_cell_at_clamps_to_bounds():
    m = demo_map()
    assert m.cell_at(-5.0, -5.0) is m.cell_at(0.0, 0.0)
    assert m.cell_at(99.0, 99.0) is m.cell_at(2.9, 2.9)


# ----------------------------------------------------------------- kinematics


def test_stop_zeroes_speed():
    state = ProbeState(x_m=1.5, y_m=1.5, speed_mps=0.5)
    out = apply_drive(state, DriveCommand("stop"), TICK_SECONDS, flat_map())
    assert out.speed_mps == 0.0 and (out.x_m, out.y_m) == (1.5, 1.5)


def test_forward_moves_one_meter_per_tick():
    state = ProbeState(x_m=0.5, y_m=0.5, heading_rad=0.0)
    out = apply_drive(state, DriveCommand("forward", 1.0), TICK_SECONDS, flat_map())
    assert out.x_m == pytest.approx(0.5 + FORWARD_SPEED_MPS * TICK_SECONDS)
    assert out.y_m == pytest.approx(0.5)


def test_reverse_is_negative_forward():
    state = ProbeState(x_m=2.0, y_m=2.0, heading_rad=math.pi / 2)
    out = apply_drive(state, DriveCommand("reverse", 0.5), TICK_SECONDS, flat_map())
    assert out.y_m == pytest.approx(2.0 - 0.5 * FORWARD_SPEED_MPS * TICK_SECONDS)
    assert out.x_m == pytest.approx(2.0)


def test_left_turn_increases_heading():
    state = ProbeState(x_m=2.0, y_m=2.0, heading_rad=0.0)
    out = apply_drive(state, DriveCommand("left", 1.0), 2.0, flat_map())
    assert out.heading_rad == pytest.approx(TURN_RATE_RADPS * 2.0)
    back = apply_drive(out, DriveCommand("right", 1.0), 2.0, flat_map())
    assert back.heading_rad == pytest.approx(0.0)
    assert (out.x_m, out.y_m) == (2.0, 2.0)


def test_drive_validation():
    with pytest.raises(ValueError):
        DriveCommand("sideways")
    with pytest.raises(ValueError):
        DriveCommand("forward", 1.5)
    with pytest.raises(ValueError):
        apply_drive(ProbeState(), DriveCommand("forward"), 0.0, flat_map())


@settings(max_examples=60)
@given(
    st.lists(
        st.tuples(
            st.sampled_from(["forward", "reverse", "stop", "left", "right"]),
            st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        ),
        max_size=30,
    )
)
def test_drive_never_escapes_map(cmds):
    m = flat_map()
    state = ProbeState(x_m=2.0, y_m=2.0)
    for direction, mag in cmds:
        state = apply_drive(state, DriveCommand(direction, mag), TICK_SECONDS, m)
        assert 0.0 <= state.x_m <= m.width_m
        assert 0.0 <= state.y_m <= m.height_m


# -------------------------------------------------------------------- sensing


def test_tick_deterministic_and_stamped():
    m = demo_map()
    state = ProbeState(x_m=2.5, y_m=0.5, tick_index=3)
    a = tick(state, m, None, seed=9)
    b = tick(state, m, None, seed=9)
    assert a.frame == b.frame
    assert a.frame.timestamp_ms == 3 * int(TICK_SECONDS * 1000)
    assert a.state.tick_index == 4
    c = tick(state, m, None, seed=10)
    assert c.frame != a.frame


def test_tick_noise_magnitude():
    m = flat_map(temp_c=20.0)
    temps = []
    state = ProbeState(x_m=1.0, y_m=1.0)
    for i in range(400):
        result = tick(ProbeState(x_m=1.0, y_m=1.0, tick_index=i), m, None, seed=0)
        temps.append(result.frame.temp_c)
    assert np.std(temps) == pytest.approx(NOISE_SIGMA["temp_c"], rel=0.25)
    assert np.mean(temps) == pytest.approx(20.0, abs=0.05)


def test_tick_gas_clamped_to_counts():
    m = flat_map(gas_raw=1024)
    for i in range(50):
        frame = tick(ProbeState(x_m=1.0, y_m=1.0, tick_index=i), m, None, seed=1).frame
        assert 0 <= frame.gas_raw <= 1024
        assert isinstance(frame.gas_raw, int)


def test_silent_cell_has_no_prediction(trained):
    m = demo_map()
    result = tick(ProbeState(x_m=0.5, y_m=0.5), m, trained.pipeline, seed=2)
    assert result.clip is None and result.prediction is None and result.decision is None


def test_voice_cell_classified(trained):
    m = demo_map()
    result = tick(ProbeState(x_m=2.5, y_m=0.5), m, trained.pipeline, seed=2)
    assert result.clip is not None
    assert result.prediction is not None
    assert abs(sum(result.prediction.probabilities) - 1.0) < 0.02
    assert result.decision in CELL_CLASSES or result.decision == "uncertain"


def test_hello_help_cell_mostly_correct(trained):
    m = demo_map()
    hits = 0
    state = ProbeState(x_m=2.5, y_m=0.5)
    for _ in range(50):
        result = tick(state, m, trained.pipeline, seed=42)
        state = result.state
        hits += result.decision == "hello_help"
    assert hits >= 40, f"only {hits}/50 ticks classified correctly"


# ------------------------------------------------------------------ simulator


def test_simulator_applies_queued_commands():
    sim = Simulator(flat_map(), seed=5)
    x0 = sim.state.x_m
    sim.queue_command(DriveCommand("forward", 1.0))
    sim.step()
    assert sim.state.x_m == pytest.approx(x0 + 1.0)
    sim.step()  # queue drained; no further motion
    assert sim.state.x_m == pytest.approx(x0 + 1.0)


def test_simulator_latest_command_wins():
    sim = Simulator(flat_map(), seed=5)
    x0, y0 = sim.state.x_m, sim.state.y_m
    sim.queue_command(DriveCommand("forward", 1.0))
    sim.queue_command(DriveCommand("reverse", 1.0))
    sim.step()
    assert sim.state.x_m == pytest.approx(x0 - 1.0)
    assert sim.state.y_m == pytest.approx(y0)


def test_simulator_stop_clears_rotation():
    sim = Simulator(flat_map(), seed=5)
    sim.queue_command(DriveCommand("left", 1.0))
    sim.queue_command(DriveCommand("stop"))
    sim.step()
    assert sim.state.heading_rad == pytest.approx(0.0)


def test_replay_matches_live_run():
    m = demo_map()
    drive_log = [(0, DriveCommand("forward", 1.0)), (2, DriveCommand("left", 0.5)), (4, DriveCommand("stop"))]
    sim = Simulator(m, pipeline=None, seed=77)
    live = []
    schedule = dict()
    for tick_i in range(6):
        for at, cmd in drive_log:
            if at == tick_i:
                sim.queue_command(cmd)
                schedule.setdefault(at, []).append(cmd)
        live.append(sim.step())
    replayed = replay(m, None, 77, drive_log, 6)
    assert [r.frame for r in replayed] == [r.frame for r in live]
    assert [r.state for r in replayed] == [r.state for r in live]
