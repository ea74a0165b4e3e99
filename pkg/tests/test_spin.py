from dataclasses import replace

import numpy as np
import pytest

from modclock.errors import ConfigError, PreconditionError
from modclock.scenarios.spin import (
    Regime,
    SpinPulseConfig,
    direct_flip_oracle,
    energy_exchange_probe,
    regime_config,
    run_spin,
    spin_modular_energy_rates,
    validate_regime,
)
from modclock.verify import contrast_property


def test_regime_parameters():
    res = regime_config(Regime.RESONANT)
    assert res.period == pytest.approx(2 * np.pi)
    comp = regime_config("detuned_compensated")
    assert comp.tau_prime == pytest.approx(2 * comp.tau / 3)
    assert comp.theta_z == pytest.approx(2 * np.pi / 3)
    assert regime_config("detuned_bare").theta_z == 0
    assert regime_config("resonant", n_pulses=3).n_pulses == 3


@pytest.mark.parametrize("shape", ["rect", "hann"])
def test_pulse_area_gives_rotation_angle(shape):
    cfg = regime_config("detuned_compensated", shape=shape, width_ticks=2)
    t = np.linspace(0, cfg.period, 400001)
    for field, theta in ((cfg.bx, cfg.theta_x), (cfg.bz, cfg.theta_z)):
        area = np.trapezoid(field(t), t)
        assert cfg.mu * area == pytest.approx(theta, rel=2e-3)
    # x and z windows never overlap
    assert not np.any((cfg.bx(t) != 0) & (cfg.bz(t) != 0))


def test_config_validation():
    with pytest.raises(ConfigError):
        SpinPulseConfig(width_ticks=3)  # 3/100 > 0.02
    with pytest.raises(ConfigError):
        SpinPulseConfig(shape="gauss")
    with pytest.raises(ConfigError):
        SpinPulseConfig(b0=-1.0)
    with pytest.raises(PreconditionError):
        validate_regime(regime_config("detuned_bare"), Regime.RESONANT)
    with pytest.raises(PreconditionError):
        validate_regime(regime_config("resonant"), Regime.DETUNED_BARE)
    with pytest.raises(PreconditionError):
        validate_regime(replace(regime_config("detuned_compensated"), theta_z=1.0), "detuned_compensated")
    with pytest.raises(PreconditionError):
        validate_regime(regime_config("detuned_compensated"), "detuned_bare")


@pytest.mark.parametrize("regime", list(Regime))
def test_history_matches_pulse_product(regime):
    cfg = regime_config(regime)
    run = run_spin(cfg, regime)
    ticks = cfg.ticks_per_period * np.arange(1, cfg.n_pulses + 1)
    assert np.max(np.abs(run.p_flip[ticks] - direct_flip_oracle(cfg))) < 1e-11
    assert run.norm_error < 1e-12


def test_regime_outcomes():
    res = run_spin(regime_config("resonant"), "resonant")
    bare = run_spin(regime_config("detuned_bare"), "detuned_bare")
    comp = run_spin(regime_config("detuned_compensated"), "detuned_compensated")
    assert res.max_flip == pytest.approx(0.9999962, abs=1e-6)
    assert bare.max_flip == pytest.approx(0.0063638, abs=1e-6)
    assert comp.max_flip == pytest.approx(0.9999986, abs=1e-6)
    assert bare.sz_retention == pytest.approx(0.99145, abs=1e-4)


def test_energy_exchange():
    # in units of 2 pi hbar / tau': one quantum on resonance, 2/3 with z compensation
    assert energy_exchange_probe(regime_config("resonant"), "resonant") < 1e-5
    comp = run_spin(regime_config("detuned_compensated"), "detuned_compensated")
    assert comp.energy_change == pytest.approx(2 / 3, abs=1e-5)
    assert energy_exchange_probe(regime_config("detuned_bare"), "detuned_bare") == pytest.approx(0.0039306, abs=1e-6)


def test_modular_energy_rates():
    cfg = regime_config("detuned_compensated")
    larmor = spin_modular_energy_rates(cfg, cfg.tau)
    assert larmor.q == 150
    # largest entry: a z kick felt one Larmor period ahead
    assert larmor.rate_norm == pytest.approx(0.5 * cfg.mu * cfg.amplitude(cfg.theta_z), rel=1e-12)
    assert max(larmor.identity_residual, larmor.reduced_residual) < 1e-10
    assert larmor.reduced_ticks > 0 and larmor.skipped_ticks == 0
    pulse = spin_modular_energy_rates(cfg, cfg.period)
    assert pulse.rate_norm < 1e-10
    assert pulse.skipped_ticks > 0
    with pytest.raises(PreconditionError):
        spin_modular_energy_rates(cfg, 0.123)


def test_rect_only_oracle():
    with pytest.raises(PreconditionError):
        direct_flip_oracle(regime_config("resonant", shape="hann"))


@pytest.mark.parametrize("regime", ["resonant", "detuned_compensated"])
def test_future_pulse_changes_quantum_rate_only(regime):
    rep = contrast_property(regime_config(regime))
    assert rep.quantum_change == pytest.approx(rep.rate_scale, rel=1e-12)
    assert rep.classical_change == 0.0
