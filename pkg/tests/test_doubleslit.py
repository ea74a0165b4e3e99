import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from modclock import settings
from modclock.errors import ConfigError, PreconditionError
from modclock.opalg import max_abs, unitary_exp
from modclock.scenarios.doubleslit import (
    DoubleSlitConfig,
    collapse_uncertainty_demo,
    modular_momentum,
    monomial_expectations,
    polynomial_phase_insensitivity,
    two_packet_state,
)
from modclock.modvars import fourier_moments
from modclock.scenarios.grid import GridSystem
from modclock.verify import check_modular_momentum_identity


def test_grid_operators():
    g = GridSystem(32, 16.0)
    assert g.dx == 0.5
    assert np.allclose(np.sort(g.P.eigh[0]), np.sort(g.p))
    assert abs(np.linalg.norm(g.gaussian(3.0, 1.0, 0.5)) - 1) < 1e-14
    with settings.override(hbar=g.hbar):
        u = unitary_exp(g.P, 3 * g.dx)
    assert max_abs(u.mat - g.shift_matrix(3)) < 1e-12
    with pytest.raises(PreconditionError):
        g.lattice_steps(0.3)
    with pytest.raises(PreconditionError):
        GridSystem(1, 1.0)


def test_hbar_enters_momentum_grid():
    with settings.override(hbar=0.25):
        g = GridSystem(16, 8.0)
    assert g.hbar == 0.25
    assert np.isclose(g.p[9] - g.p[8], 2 * np.pi * 0.25 / 8.0)
    with settings.override(hbar=g.hbar):
        assert max_abs(unitary_exp(g.P, 2 * g.dx).mat - g.shift_matrix(2)) < 1e-12


def test_packet_moments():
    g = GridSystem(128, 128.0)
    psi = g.gaussian(40.0, 3.0, momentum=0.3)
    m = monomial_expectations(g, psi, 2)
    assert abs(m[(1, 0)] - 40.0) < 1e-8
    assert abs(m[(0, 1)] - 0.3) < 1e-8
    assert abs(m[(2, 0)] - (40.0**2 + 9.0)) < 1e-6


def test_phase_law_small_grid():
    g = GridSystem(128, 128.0)
    v = modular_momentum(g, 16.0)
    for phi in (0.0, 1.0, np.pi):
        psi = two_packet_state(g, DoubleSlitConfig(1.0, 16.0, phi))
        assert abs(fourier_moments(psi, v, 1).moment(1) - np.exp(1j * phi) / 2) < 1e-10


def test_local_observables_blind_to_phase():
    g = GridSystem(128, 128.0)
    assert polynomial_phase_insensitivity(g, DoubleSlitConfig(1.0, 16.0), 3) < 1e-8


def test_collapse():
    g = GridSystem(128, 128.0)
    res = collapse_uncertainty_demo(g, DoubleSlitConfig(1.0, 16.0, 0.3), 4)
    assert np.max(np.abs(res.after.moments)) < 1e-10
    assert abs(res.before.moment(1) - np.exp(0.3j) / 2) < 1e-10


def test_config_errors():
    with pytest.raises(ConfigError):
        DoubleSlitConfig(5.0, 16.0)
    with pytest.raises(ConfigError):
        DoubleSlitConfig(-1.0, 16.0)
    g = GridSystem(64, 64.0)
    with pytest.raises(ConfigError):  # ell = 60 wraps the second packet onto the first
        two_packet_state(g, DoubleSlitConfig(2.0, 60.0))


def test_momentum_identity_needs_commensurate_length():
    g = GridSystem(64, 32.0)
    assert check_modular_momentum_identity(g, lambda x: np.sin(x), 4.0) < 1e-10
    with pytest.raises(PreconditionError):
        check_modular_momentum_identity(g, lambda x: x, 0.7)


@hsettings(max_examples=30, deadline=None)
@given(n=st.integers(4, 40), m=st.integers(-50, 50), length=st.floats(1.0, 100.0))
def test_momentum_exponential_is_exact_shift(n, m, length):
    g = GridSystem(n, length)
    with settings.override(hbar=g.hbar):
        u = unitary_exp(g.P, m * g.dx)
    assert max_abs(u.mat - g.shift_matrix(m)) < 1e-10
