"""Finite cyclic clocks.

A clock of dimension ``d`` and tick ``delta_t`` has time eigenstates
``|t_k>``, ``t_k = t0 + k*delta_t``, and a Hamiltonian that is the discrete
Fourier conjugate of the time operator, with centred spectrum
``E_n = 2*pi*hbar*(n - d//2) / (d*delta_t)``.  Its defining property is that
``exp(-i H delta_t / hbar)`` maps ``|t_k>`` to ``|t_{k+1 mod d}>`` exactly.

The continuum relation ``[T, H] = i hbar`` only holds on states supported away
from the wrap point (the "seam" between ``t_{d-1}`` and ``t_0``) and
band-limited in energy.  Helpers here report how much probability sits near
the seam so callers can refuse to assert there.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import settings
from .errors import PreconditionError
from .opalg import Operator, StateVector, unitary_exp

SEAM_MARGIN_TICKS = 4
SEAM_MASS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ClockModel:
    d: int
    delta_t: float
    t0: float = 0.0
    label: str = "A"
    hbar: float = None  # type: ignore[assignment]  # captured at construction

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 2:
            raise PreconditionError(f"clock dimension must be an integer >= 2, got {self.d}")
        if not self.delta_t > 0:
            raise PreconditionError(f"clock tick must be positive, got {self.delta_t}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "delta_t", float(self.delta_t))
        object.__setattr__(self, "t0", float(self.t0))
        if self.hbar is None:
            object.__setattr__(self, "hbar", settings.hbar())

    @property
    def layout(self):
        return ((self.label, self.d),)

    @property
    def period(self) -> float:
        return self.d * self.delta_t

    @property
    def energy_quantum(self) -> float:
        return 2 * np.pi * self.hbar / self.period

    @cached_property
    def times(self) -> np.ndarray:
        return self.t0 + self.delta_t * np.arange(self.d)

    @cached_property
    def energies(self) -> np.ndarray:
        return self.energy_quantum * (np.arange(self.d) - self.d // 2)

    @cached_property
    def fourier(self) -> np.ndarray:
        """Unitary with columns ``|E_n>`` in the time basis."""
        k = np.arange(self.d)[:, None]
        n = np.arange(self.d)[None, :] - self.d // 2
        return np.exp(2j * np.pi * k * n / self.d) / np.sqrt(self.d)

    @cached_property
    def T(self) -> Operator:
        return Operator.diagonal(self.times, self.layout, label=f"T_{self.label}")

    @cached_property
    def H(self) -> Operator:
        f = self.fourier
        op = Operator((f * self.energies) @ f.conj().T, self.layout, hermitian=True, label=f"H_{self.label}")
        # the spectral decomposition is known exactly; seed the cache with it
        op.__dict__["eigh"] = (self.energies.copy(), f)
        return op

    def projector(self, k: int) -> np.ndarray:
        p = np.zeros((self.d, self.d), dtype=complex)
        p[k % self.d, k % self.d] = 1.0
        return p

    def steps_for(self, tau: float, rtol: float = 1e-9) -> int | None:
        """Integer number of ticks equal to ``tau``, or None if off-lattice."""
        q = tau / self.delta_t
        qi = int(round(q))
        return qi if abs(q - qi) <= rtol * max(1.0, abs(q)) else None


def make_clock(d: int, delta_t: float, t0: float = 0.0, label: str = "A") -> ClockModel:
    return ClockModel(d, delta_t, t0, label)


def shift_matrix(d: int, steps: int) -> np.ndarray:
    """Permutation ``|k> -> |k + steps mod d>``."""
    s = np.zeros((d, d), dtype=complex)
    k = np.arange(d)
    s[(k + steps) % d, k] = 1.0
    return s


def time_shift(clock: ClockModel, steps: int) -> Operator:
    """``exp(-i H steps*delta_t / hbar)``: cyclic shift of time eigenstates by ``steps``."""
    with settings.override(hbar=clock.hbar):
        return unitary_exp(clock.H, steps * clock.delta_t, sign=-1)


def modular_energy(clock: ClockModel, tau: float) -> Operator:
    """``exp(+i H tau / hbar)``; for ``tau = q*delta_t`` it maps ``|t_k>`` to ``|t_{k-q}>``."""
    with settings.override(hbar=clock.hbar):
        return unitary_exp(clock.H, tau, sign=+1)


def modular_time_unitary(clock: ClockModel, tau: float) -> Operator:
    """``exp(2 pi i T / tau)``.

    When ``d*delta_t/tau`` is an integer ``s`` this is the ``s``-step ladder
    ``|E_n> -> |E_{n+s mod d}>`` (times the phase ``exp(2 pi i t0/tau)``).
    """
    if not tau > 0:
        raise PreconditionError(f"tau must be positive, got {tau}")
    phases = np.exp(2j * np.pi * clock.times / tau)
    return Operator._trusted(np.diag(phases), clock.layout, unitary=True, label="W")


@dataclass(frozen=True)
class ClockState:
    state: StateVector
    mean: float
    variance: float


def time_moments(clock: ClockModel, probs: np.ndarray) -> tuple[float, float]:
    """Mean and variance of ``T`` for a probability vector over ticks."""
    mean = float(np.dot(probs, clock.times))
    var = float(np.dot(probs, (clock.times - mean) ** 2))
    return mean, max(var, 0.0)


def gaussian_clock_state(clock: ClockModel, mean: float, width: float) -> ClockState:
    """Periodically wrapped Gaussian packet with amplitude ``exp(-(t-mean)^2 / 4 width^2)``.

    ``width`` is the standard deviation of the probability density; values
    below ``delta_t/10`` are clamped there, which yields the time eigenstate
    nearest to ``mean``.
    """
    if not width > 0:
        raise PreconditionError(f"width must be positive, got {width}")
    if not clock.t0 <= mean < clock.t0 + clock.period:
        raise PreconditionError(f"mean {mean} outside [{clock.t0}, {clock.t0 + clock.period})")
    width = max(width, clock.delta_t / 10)
    half = clock.period / 2
    dist = (clock.times - mean + half) % clock.period - half
    amps = np.exp(-(dist**2) / (4 * width**2))
    state = StateVector.normalized(amps, clock.layout)
    m, v = time_moments(clock, np.abs(state.amps) ** 2)
    return ClockState(state, m, v)


def seam_mass(clock: ClockModel, probs: np.ndarray, margin_ticks: int = SEAM_MARGIN_TICKS) -> float:
    """Probability within ``margin_ticks`` ticks of the wrap point."""
    probs = np.asarray(probs, dtype=float)
    m = min(margin_ticks, clock.d // 2)
    return float(probs[:m].sum() + probs[clock.d - m:].sum())


def is_interior(clock: ClockModel, probs: np.ndarray, tol: float = SEAM_MASS_TOL) -> bool:
    return seam_mass(clock, probs) <= tol
