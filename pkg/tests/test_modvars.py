import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from modclock.errors import PreconditionError
from modclock.modvars import (
    ModularVariable,
    UncertaintyProfile,
    fourier_moments,
    is_completely_uncertain,
    modular_distribution,
    modular_reduce,
    modular_unitary,
    moments_from_distribution,
    weyl_commutation_check,
)
from modclock.opalg import Operator, StateVector, commutator, max_abs
from modclock.scenarios.grid import GridSystem


@pytest.fixture(scope="module")
def grid():
    return GridSystem(64, 64.0)


def test_modular_unitary_is_lattice_shift(grid):
    u = modular_unitary(ModularVariable(grid.P, 5.0))
    assert max_abs(u.mat - grid.shift_matrix(5)) < 1e-12


def test_position_eigenstate_is_completely_uncertain(grid):
    v = ModularVariable(grid.P, 8.0)
    prof = fourier_moments(StateVector.basis(10, 64), v, n_max=7)
    assert is_completely_uncertain(prof, 1e-12)
    # n * ell = 64 is a whole box length: the eighth moment is 1 again
    assert abs(fourier_moments(StateVector.basis(10, 64), v, 8).moment(8) - 1) < 1e-12


def test_momentum_eigenstate_is_sharp(grid):
    psi = StateVector(grid.fourier[:, 40], grid.layout)
    v = ModularVariable(grid.P, 3.0)
    prof = fourier_moments(psi, v, 4)
    phase = grid.p[40] * 3.0
    for n in range(1, 5):
        assert abs(prof.moment(n) - np.exp(1j * n * phase)) < 1e-12
    assert not is_completely_uncertain(prof, 0.5)


def test_profile_accessors():
    prof = UncertaintyProfile(np.array([0.5j, 0.1]), 2)
    assert prof.moment(0) == 1
    assert prof.moment(-1) == -0.5j
    assert prof.coefficient(2) == pytest.approx(0.1 / (2 * np.pi))
    with pytest.raises(IndexError):
        prof.moment(3)
    with pytest.raises(PreconditionError):
        UncertaintyProfile(np.array([1.5]), 1)
    phi = np.linspace(0, 2 * np.pi, 4001)
    dens = prof.density(phi)
    assert abs(np.trapezoid(dens, phi) - 1) < 1e-9


def test_histogram_recovers_moments(grid):
    psi = StateVector(grid.gaussian(20.0, 1.5, momentum=0.4), grid.layout)
    v = ModularVariable(grid.P, 2.0)
    exact = fourier_moments(psi, v, 3).moments
    hist = modular_distribution(psi, v, 4096)
    assert abs(hist.sum() - 1) < 1e-12
    assert np.max(np.abs(moments_from_distribution(hist, 3) - exact)) < 5e-3


def test_modular_reduce():
    op = Operator.diagonal([-0.5, 0.2, 7.3, 2 * np.pi])
    red = np.real(np.diag(modular_reduce(op, 2 * np.pi).mat))
    assert np.allclose(red, [2 * np.pi - 0.5, 0.2, 7.3 - 2 * np.pi, 0.0])
    rng = np.random.default_rng(4)
    a = rng.normal(size=(5, 5))
    h = Operator(a + a.T)
    r = modular_reduce(h, 1.0)
    assert np.all((r.eigh[0] >= 0) & (r.eigh[0] < 1))
    assert max_abs(commutator(h, r)) < 1e-10
    with pytest.raises(PreconditionError):
        modular_reduce(h, 0.0)


def test_weyl_commutation(grid):
    assert weyl_commutation_check(grid.X, grid.P, 4.0, 2 * np.pi / 4.0) < 1e-10
    assert weyl_commutation_check(grid.X, grid.P, 4.0, 2 * 2 * np.pi / 4.0) < 1e-10
    # e^{iXp0} e^{iP l} = e^{-i l p0} e^{iP l} e^{iXp0}: the residual is |1 - e^{-i l p0}|
    assert abs(weyl_commutation_check(grid.X, grid.P, 4.0, np.pi / 4.0) - 2.0) < 1e-10
    assert abs(weyl_commutation_check(grid.X, grid.P, 4.0, np.pi / 8.0) - abs(1 - np.exp(-0.5j * np.pi))) < 1e-10
    with pytest.raises(PreconditionError, match="incommensurate"):
        weyl_commutation_check(grid.X, grid.P, 4.5, 2 * np.pi / 4.5)
    with pytest.raises(PreconditionError):
        weyl_commutation_check(grid.P, grid.P, 4.0, 1.0)


def test_modular_variable_validation(grid):
    with pytest.raises(PreconditionError):
        ModularVariable(Operator(np.array([[0, 1], [0, 0]])), 1.0)
    with pytest.raises(PreconditionError):
        ModularVariable(grid.P, 0.0)


@hsettings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**16), scale=st.floats(0.1, 50), n_max=st.integers(1, 10))
def test_moments_bounded_by_one(seed, scale, n_max):
    rng = np.random.default_rng(seed)
    g = GridSystem(16, 16.0)
    psi = StateVector.normalized(rng.normal(size=16) + 1j * rng.normal(size=16), g.layout)
    prof = fourier_moments(psi, ModularVariable(g.P, scale), n_max)
    assert np.all(np.abs(prof.moments) <= 1 + 1e-12)
    assert np.all(np.isfinite(prof.density(np.linspace(0, 2 * np.pi, 7))))


@hsettings(max_examples=30, deadline=None)
@given(m=st.integers(1, 15), k=st.integers(-15, 15))
def test_weyl_commensurate_pairs_commute(m, k):
    g = GridSystem(16, 16.0)
    ell = float(m)
    p0 = 2 * np.pi * k / 16.0
    expected = abs(1 - np.exp(-1j * ell * p0))
    assert abs(weyl_commutation_check(g.X, g.P, ell, p0) - expected) < 1e-10
