"""Periodic one-dimensional position grid with a spectral momentum operator."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .. import settings
from ..errors import PreconditionError
from ..opalg import Operator

Potential = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class GridSystem:
    """``n`` points on ``[0, length)`` with periodic wrap.

    ``X`` is diagonal with eigenvalues ``j*dx``; ``P`` is the Fourier
    multiplier with centred eigenvalues ``2 pi hbar (j - n//2) / length``, so
    ``exp(i P m dx / hbar)`` is an exact ``m``-site shift.
    """

    n: int
    length: float
    mass: float = 1.0
    label: str = "S"
    hbar: float = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.n < 2:
            raise PreconditionError("grid needs at least 2 points")
        if not self.length > 0 or not self.mass > 0:
            raise PreconditionError("grid length and mass must be positive")
        if self.hbar is None:
            object.__setattr__(self, "hbar", settings.hbar())

    @property
    def layout(self):
        return ((self.label, self.n),)

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(self.n)

    @cached_property
    def p(self) -> np.ndarray:
        return 2 * np.pi * self.hbar * (np.arange(self.n) - self.n // 2) / self.length

    @cached_property
    def fourier(self) -> np.ndarray:
        j = np.arange(self.n)[:, None]
        m = np.arange(self.n)[None, :] - self.n // 2
        return np.exp(2j * np.pi * j * m / self.n) / np.sqrt(self.n)

    def _spectral_op(self, values: np.ndarray, label: str) -> Operator:
        f = self.fourier
        op = Operator((f * values) @ f.conj().T, self.layout, hermitian=True, label=label)
        order = np.argsort(values, kind="stable")
        op.__dict__["eigh"] = (values[order].copy(), f[:, order])
        return op

    @cached_property
    def X(self) -> Operator:
        return Operator.diagonal(self.x, self.layout, label="X")

    @cached_property
    def P(self) -> Operator:
        return self._spectral_op(self.p, "P")

    @cached_property
    def kinetic(self) -> Operator:
        return self._spectral_op(self.p**2 / (2 * self.mass), "P^2/2m")

    def potential(self, v: Potential, shift: float = 0.0) -> Operator:
        """Diagonal ``V(X + shift)`` evaluated pointwise (no wrap)."""
        return Operator.diagonal(np.asarray(v(self.x + shift), dtype=float), self.layout, label="V")

    def wrapped_potential(self, v: Potential, m: int) -> Operator:
        """``V(X + m dx)`` with periodic wrap, i.e. ``V`` sampled at ``x_{(j+m) mod n}``."""
        return Operator.diagonal(np.asarray(v(self.x), dtype=float)[(np.arange(self.n) + m) % self.n],
                                 self.layout, label="V_shift")

    def hamiltonian(self, v: Potential | None = None) -> Operator:
        if v is None:
            return self.kinetic
        return Operator(self.kinetic.mat + np.diag(np.asarray(v(self.x), dtype=complex)), self.layout,
                        hermitian=True, label="H")

    def lattice_steps(self, ell: float, rtol: float = 1e-9) -> int:
        m = ell / self.dx
        mi = int(round(m))
        if abs(m - mi) > rtol * max(1.0, abs(m)):
            raise PreconditionError(f"length {ell} is not a multiple of the grid spacing {self.dx}")
        return mi

    def shift_matrix(self, m: int) -> np.ndarray:
        """Permutation with ``(S psi)_j = psi_{(j+m) mod n}``."""
        s = np.zeros((self.n, self.n), dtype=complex)
        j = np.arange(self.n)
        s[j, (j + m) % self.n] = 1.0
        return s

    def gaussian(self, center: float, width: float, momentum: float = 0.0) -> np.ndarray:
        """Normalized periodic packet ``exp(-(x-c)^2/4w^2 + i p x/hbar)``."""
        half = self.length / 2
        dist = (self.x - center + half) % self.length - half
        amps = np.exp(-(dist**2) / (4 * width**2) + 1j * momentum * dist / self.hbar)
        return amps / np.linalg.norm(amps)
