import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st
from scipy.linalg import expm

from modclock import settings
from modclock.errors import DimensionError, LayoutError, NotHermitianError
from modclock.opalg import (
    Operator,
    StateVector,
    anticommutator,
    apply_to_spectrum,
    commutator,
    embed,
    expectation,
    hermitian_eig,
    make_layout,
    max_abs,
    pauli,
    tensor_product,
    tensor_state,
    unitary_exp,
)


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def test_operator_rejects_bad_input():
    with pytest.raises(DimensionError):
        Operator(np.zeros((2, 3)))
    with pytest.raises(LayoutError):
        Operator(np.eye(4), (("A", 3),))
    with pytest.raises(NotHermitianError):
        Operator(np.array([[0, 1], [0, 0]]), hermitian=True)
    with pytest.raises(DimensionError):
        Operator(np.array([[1, 1], [0, 1]]), unitary=True)
    with pytest.raises(LayoutError):
        make_layout([("A", 2), ("A", 3)])


def test_hermitian_detection_and_eigh():
    rng = np.random.default_rng(1)
    h = Operator(random_hermitian(rng, 5))
    assert h.hermitian
    vals, vecs = h.eigh
    assert np.all(np.diff(vals) >= 0)
    assert max_abs(vecs @ np.diag(vals) @ vecs.conj().T - h.mat) < 1e-12
    assert not Operator(np.array([[0, 1], [0, 0]])).hermitian


def test_operator_matrix_is_read_only():
    op = Operator(np.eye(2))
    with pytest.raises(ValueError):
        op.mat[0, 0] = 5


def test_state_normalization():
    with pytest.raises(DimensionError):
        StateVector(np.array([1.0, 1.0]))
    psi = StateVector.normalized([3, 4j])
    assert np.isclose(np.linalg.norm(psi.amps), 1)
    assert StateVector.basis(1, 3).amps[1] == 1


def test_pauli_algebra():
    sx, sy, sz = pauli("x"), pauli("y"), pauli("z")
    assert max_abs(commutator(sx, sy).mat - 2j * sz.mat) == 0
    assert max_abs(anticommutator(sx, sy).mat) == 0
    assert max_abs(anticommutator(sz, sz).mat - 2 * np.eye(2)) == 0


def test_unitary_exp_matches_pade_with_hbar():
    rng = np.random.default_rng(7)
    h = Operator(random_hermitian(rng, 6))
    with settings.override(hbar=0.7):
        u = unitary_exp(h, 1.3, sign=+1)
        v = unitary_exp(h, 1.3, sign=-1)
    assert max_abs(u.mat - expm(1j * h.mat * 1.3 / 0.7)) < 1e-12
    assert max_abs(v.mat - expm(-1j * h.mat * 1.3 / 0.7)) < 1e-12
    with pytest.raises(ValueError):
        unitary_exp(h, 1.0, sign=2)
    with pytest.raises(NotHermitianError):
        unitary_exp(Operator(np.array([[0, 1], [0, 0]])), 1.0)


def test_override_is_scoped():
    before = settings.hbar()
    with settings.override(hbar=2.5):
        assert settings.hbar() == 2.5
    assert settings.hbar() == before
    with pytest.raises(ValueError):
        with settings.override(hbar=-1.0):
            pass


def test_allocation_cap():
    with settings.override(max_dim=4):
        with pytest.raises(DimensionError):
            Operator(np.eye(8))
        with pytest.raises(DimensionError):
            tensor_product(pauli("x"), Operator(np.eye(4)))


def test_embed_and_tensor():
    layout = (("A", 3), ("S", 2))
    op = embed(pauli("x"), layout, "S")
    assert max_abs(op.mat - np.kron(np.eye(3), pauli("x").mat)) == 0
    with pytest.raises(LayoutError):
        embed(pauli("x"), layout, "B")
    with pytest.raises(DimensionError):
        embed(pauli("x"), layout, "A")
    t = tensor_product(Operator(np.eye(3), (("A", 3),)), pauli("z"))
    assert t.layout == layout
    s = tensor_state(StateVector.basis(0, 3, (("A", 3),)), StateVector.basis(1, 2))
    assert expectation(s, t) == -1
    with pytest.raises(LayoutError):
        commutator(t, Operator(np.eye(6)))


def test_apply_to_spectrum_and_eig():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 4))
    h = Operator(a @ a.T + np.eye(4))
    root = apply_to_spectrum(h, np.sqrt)
    assert max_abs(root.mat @ root.mat - h.mat) < 1e-12
    vals, u = hermitian_eig(h)
    assert u.unitary and np.all(vals > 0)
    with pytest.raises(ValueError), np.errstate(invalid="ignore"):
        apply_to_spectrum(Operator(-np.eye(2)), np.log)


@hsettings(max_examples=30, deadline=None)
@given(n=st.integers(1, 6), theta=st.floats(-20, 20), seed=st.integers(0, 2**16))
def test_unitary_exp_is_unitary_and_inverts(n, theta, seed):
    h = Operator(random_hermitian(np.random.default_rng(seed), n))
    u = unitary_exp(h, theta, +1)
    w = unitary_exp(h, theta, -1)
    assert max_abs(u.mat.conj().T @ u.mat - np.eye(n)) < 1e-10
    assert max_abs(u.mat @ w.mat - np.eye(n)) < 1e-10
