from dataclasses import replace

import numpy as np
import pytest

from modclock.errors import ConfigError, PreconditionError
from modclock.pwframe import build_history
from modclock.scenarios.grid import GridSystem
from modclock.scenarios.piston import (
    PistonConfig,
    displacement_window_check,
    initial_packet,
    particle_period,
    piston_spec,
    run_piston,
    small_piston,
    small_piston_spec,
    wall_mass,
)
from modclock.verify import check_modular_energy_identity


@pytest.fixture(scope="module")
def grid():
    return GridSystem(256, 256.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        PistonConfig(ramp=(0.1, 0.2))
    with pytest.raises(ConfigError):
        PistonConfig(ramp=(0.05, 0.02))
    with pytest.raises(ConfigError):
        PistonConfig(x0=250.0)
    with pytest.raises(ConfigError):
        PistonConfig(delta_ell=-0.1)


def test_offset_ramp():
    cfg = PistonConfig(delta_ell=0.4, ramp=(0.02, 0.06))
    assert cfg.offset(1.0, 100.0) == 0.0
    assert cfg.offset(4.0, 100.0) == pytest.approx(0.2)
    assert cfg.offset(50.0, 100.0) == 0.4


def test_walls_shape():
    cfg = PistonConfig()
    assert cfg.walls(np.array([128.0]))[0] < 1e-20
    assert cfg.v_right(cfg.wall_right) == pytest.approx(cfg.v0 / 2)
    assert cfg.v_left(cfg.wall_left) == pytest.approx(cfg.v0 / 2)


def test_return_period(grid):
    # close to the classical round trip 2 * 224 / pbar, shifted by the soft walls
    assert particle_period(grid, PistonConfig()) == pytest.approx(435.6863, abs=1e-3)
    g, cfg = small_piston()
    assert particle_period(g, cfg) == pytest.approx(28.4829, abs=1e-3)


def test_static_box_gives_zero_shift(grid):
    run = run_piston(grid, PistonConfig(delta_ell=0.0))
    assert run.delta_arg == 0.0
    assert run.relative_error == 0.0
    assert run.wall_mass < 1e-10


def test_phase_shift_converged_in_tick(grid):
    cfg = PistonConfig()
    coarse = run_piston(grid, cfg)
    fine = run_piston(grid, replace(cfg, ticks_per_period=800))
    assert coarse.delta_arg == pytest.approx(-0.392749, abs=1e-5)
    assert abs(coarse.delta_arg - fine.delta_arg) < 1e-9
    assert abs(coarse.static_overlap) == pytest.approx(0.89952, abs=1e-4)
    assert coarse.series.shape == (coarse.q,)


def test_packet_at_wall_is_refused(grid):
    with pytest.raises(PreconditionError, match="moving wall"):
        run_piston(grid, PistonConfig(x0=200.0))
    with pytest.raises(PreconditionError):
        run_piston(grid, PistonConfig(), d_clock=300)


def test_wall_mass_measures_packet_at_wall(grid):
    cfg = PistonConfig()
    period = particle_period(grid, cfg)
    hist = build_history(piston_spec(grid, cfg, 30, period), initial_packet(grid, cfg))
    assert wall_mass(grid, cfg, hist, period) < 1e-10
    near = replace(cfg, x0=220.0)
    hist = build_history(piston_spec(grid, near, 30, period), initial_packet(grid, near))
    assert wall_mass(grid, near, hist, period) > 0.1


def test_small_piston_identities():
    g, cfg, spec = small_piston_spec(64, ticks_per_period=50, centered=False)
    rep = check_modular_energy_identity(spec, 50)
    assert rep.residual < 1e-10 and rep.rhs_norm > 0.1
    window = displacement_window_check(g, cfg, 64)
    assert window.rows == 2 and window.residual < 1e-12
    _, _, centered = small_piston_spec(64)
    assert centered.clock_a.t0 < 0
