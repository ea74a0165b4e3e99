"""Modular variables and the complete-uncertainty machinery.

A modular variable is ``Phi = base * theta / hbar`` read modulo ``2 pi``.  Its
statistics are fully described by the Fourier moments ``<exp(i n Phi)>``; a
state whose moments all vanish is completely uncertain in ``Phi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import settings
from .clock import ClockModel, modular_energy, modular_time_unitary
from .errors import PreconditionError
from .opalg import Operator, StateVector, commutator, max_abs, unitary_exp

DEFAULT_N_MAX = 8
MOMENT_BOUND_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ModularVariable:
    base: Operator
    scale: float
    label: str = "Phi"

    def __post_init__(self) -> None:
        if not self.base.hermitian:
            raise PreconditionError("modular variable base must be Hermitian")
        if not np.isfinite(self.scale) or self.scale == 0:
            raise PreconditionError(f"modular scale must be finite and nonzero, got {self.scale}")

    def phases(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenphases ``lambda*theta/hbar`` (unreduced) and the eigenvectors."""
        vals, vecs = self.base.eigh
        return vals * self.scale / settings.hbar(), vecs


@dataclass(frozen=True)
class UncertaintyProfile:
    moments: np.ndarray  # moments[n-1] = <exp(i n Phi)>
    n_max: int

    def __post_init__(self) -> None:
        if np.any(np.abs(self.moments) > 1 + MOMENT_BOUND_TOL):
            raise PreconditionError("Fourier moment exceeds unit modulus")

    def moment(self, n: int) -> complex:
        if n == 0:
            return 1.0 + 0j
        if abs(n) > self.n_max:
            raise IndexError(f"moment {n} beyond n_max={self.n_max}")
        m = self.moments[abs(n) - 1]
        return complex(m if n > 0 else np.conj(m))

    def coefficient(self, n: int) -> complex:
        return self.moment(n) / (2 * np.pi)

    def density(self, phi: np.ndarray) -> np.ndarray:
        """Truncated Fourier series ``(1/2pi) sum_n <e^{in Phi}> e^{-in phi}``."""
        phi = np.asarray(phi, dtype=float)
        out = np.full(phi.shape, 1.0 / (2 * np.pi))
        for n in range(1, self.n_max + 1):
            out += 2 * np.real(self.moments[n - 1] * np.exp(-1j * n * phi)) / (2 * np.pi)
        return out


def modular_unitary(v: ModularVariable) -> Operator:
    return unitary_exp(v.base, v.scale, sign=+1)


def modular_reduce(op: Operator, modulus: float) -> Operator:
    """Eigenvalue-wise reduction into ``[0, modulus)``."""
    if not modulus > 0:
        raise PreconditionError(f"modulus must be positive, got {modulus}")
    if not op.hermitian:
        raise PreconditionError("modular reduction needs a Hermitian operator")
    label = f"{op.label} mod {modulus:g}"
    if op.is_diagonal:
        return Operator.diagonal(_wrap(np.real(np.diag(op.mat)), modulus), op.layout, label=label)
    vals, vecs = op.eigh
    red = _wrap(vals, modulus)
    out = Operator((vecs * red) @ vecs.conj().T, op.layout, hermitian=True, label=label)
    out.__dict__["eigh"] = (red, vecs)
    return out


def _wrap(vals: np.ndarray, modulus: float) -> np.ndarray:
    red = np.mod(vals, modulus)
    red[red >= modulus] = 0.0  # np.mod can round up to the modulus itself
    return red


def _probs_in_eigenbasis(psi: StateVector, v: ModularVariable) -> tuple[np.ndarray, np.ndarray]:
    if psi.dim != v.base.dim:
        raise PreconditionError("state and modular variable act on different spaces")
    phases, vecs = v.phases()
    weights = np.abs(vecs.conj().T @ psi.amps) ** 2
    return phases, weights


def fourier_moments(psi: StateVector, v: ModularVariable, n_max: int = DEFAULT_N_MAX) -> UncertaintyProfile:
    if n_max < 1:
        raise PreconditionError("n_max must be at least 1")
    phases, weights = _probs_in_eigenbasis(psi, v)
    n = np.arange(1, n_max + 1)[:, None]
    moments = np.exp(1j * n * phases[None, :]) @ weights
    return UncertaintyProfile(moments, n_max)


def is_completely_uncertain(p: UncertaintyProfile, tol: float) -> bool:
    if not tol > 0:
        raise PreconditionError("tolerance must be positive")
    return bool(np.all(np.abs(p.moments) < tol))


def modular_distribution(psi: StateVector, v: ModularVariable, bins: int) -> np.ndarray:
    """Histogram of ``Phi mod 2pi`` over ``bins`` equal bins of ``[0, 2pi)``."""
    if bins < 2:
        raise PreconditionError("need at least 2 bins")
    phases, weights = _probs_in_eigenbasis(psi, v)
    red = np.mod(phases, 2 * np.pi)
    idx = np.minimum((red / (2 * np.pi) * bins).astype(int), bins - 1)
    hist = np.bincount(idx, weights=weights, minlength=bins)
    return hist / hist.sum()


def moments_from_distribution(hist: np.ndarray, n_max: int) -> np.ndarray:
    """Discrete ``sum_b P_b exp(i n phi_b)`` at bin centres."""
    bins = len(hist)
    centres = 2 * np.pi * (np.arange(bins) + 0.5) / bins
    n = np.arange(1, n_max + 1)[:, None]
    return np.exp(1j * n * centres[None, :]) @ hist


def _grid_spacing(x: Operator) -> tuple[float, int]:
    if not x.is_diagonal:
        raise PreconditionError("position operator must be diagonal on a grid")
    xs = np.real(np.diag(x.mat))
    steps = np.diff(xs)
    if len(xs) < 2 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0) or steps[0] <= 0:
        raise PreconditionError("position operator is not a uniform increasing grid")
    return float(steps[0]), len(xs)


def weyl_commutation_check(x: Operator, p: Operator, ell: float, p0: float) -> float:
    """``max|exp(iXp0/hbar) exp(iP ell/hbar) - exp(iP ell/hbar) exp(iXp0/hbar)|``.

    Requires ``ell = m dx`` and ``p0 = k (2 pi hbar / L)`` so that both
    exponentials act as exact lattice operations.  The residual vanishes
    when ``ell*p0`` is a multiple of ``2 pi hbar``.
    """
    dx, n = _grid_spacing(x)
    if p.dim != n:
        raise PreconditionError("position and momentum operators have different dimensions")
    hb = settings.hbar()
    length = n * dx
    m = ell / dx
    k = p0 * length / (2 * np.pi * hb)
    for name, val in (("ell/dx", m), ("p0*L/(2 pi hbar)", k)):
        if abs(val - round(val)) > 1e-9 * max(1.0, abs(val)):
            raise PreconditionError(
                f"incommensurate grid: {name} = {val:.6g} is not an integer "
                f"(dx={dx:g}, L={length:g}); the Weyl pair is only exact on lattice translations"
            )
    a = unitary_exp(x, p0, sign=+1)
    b = unitary_exp(p, ell, sign=+1)
    return max_abs(a.mat @ b.mat - b.mat @ a.mat)


def energy_time_cell_residual(clock: ClockModel, s: int) -> float:
    """Commutator of ``exp(iH tau/hbar)`` and ``exp(2 pi i T/tau)`` at ``tau = d delta_t / s``."""
    if s < 1:
        raise PreconditionError("s must be a positive integer")
    tau = clock.period / s
    return max_abs(commutator(modular_energy(clock, tau), modular_time_unitary(clock, tau)).mat)
