"""Timeless (clock + system) machinery.

The total space is ``A (x) S``; the second clock ``B`` is kept only as
bookkeeping because with no B-S coupling and an interaction independent of
``T_B`` it stays in a product state and carries no observable content.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Union

import numpy as np
from scipy.linalg import expm

from . import settings
from .clock import ClockModel, modular_energy
from .errors import DimensionError, LayoutError, NotHermitianError, PreconditionError
from .opalg import (
    HERMITIAN_TOL,
    Operator,
    StateVector,
    _check_alloc,
    as_array,
    expectation,
    hermitian_eig,
    unitary_exp,
)

Interaction = Callable[[float], Union[Operator, np.ndarray]]


class ExpectationVariant(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    SYM = "sym"


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """``H_T = H_A + H_B + H_S + H_int(T_A)`` with no B-S coupling.

    ``h_int`` maps a clock reading to a Hermitian operator on S (``None`` means
    no interaction).  ``breakpoints`` lists times where ``h_int`` or its first
    derivative is discontinuous; finite-difference diagnostics skip ticks next
    to them.
    """

    clock_a: ClockModel
    h_s: Operator
    h_int: Interaction | None = None
    clock_b: ClockModel | None = None
    breakpoints: tuple[float, ...] = ()
    name: str = ""
    h_bs_null: bool = field(default=True, init=False)

    @property
    def n(self) -> int:
        return self.h_s.dim

    @property
    def full_layout(self):
        return self.clock_a.layout + self.h_s.layout

    def interaction(self, t: float) -> np.ndarray:
        if self.h_int is None:
            return np.zeros((self.n, self.n), dtype=complex)
        value = self.h_int(float(t))
        mat = value.mat if isinstance(value, Operator) else np.asarray(value, dtype=complex)
        if mat.shape != (self.n, self.n):
            raise DimensionError(f"h_int({t}) has shape {mat.shape}, expected {(self.n, self.n)}")
        scale = max(1.0, float(np.max(np.abs(mat))))
        if np.max(np.abs(mat - mat.conj().T)) >= HERMITIAN_TOL * scale:
            raise NotHermitianError(f"h_int({t}) is not Hermitian")
        return mat

    def system_hamiltonian(self, t: float) -> np.ndarray:
        """``H_S + H_int(t)``, the effective generator seen from clock A."""
        return self.h_s.mat + self.interaction(t)

    @cached_property
    def interaction_samples(self) -> np.ndarray:
        """``h_int(t_k)`` for every tick, shape ``(d, n, n)``."""
        out = np.stack([self.interaction(t) for t in self.clock_a.times])
        out.setflags(write=False)
        return out

    def near_breakpoint(self, t: float) -> bool:
        return any(abs(t - b) < self.clock_a.delta_t * (1 - 1e-12) for b in self.breakpoints)


# ---------------------------------------------------------------------------
# history states
# ---------------------------------------------------------------------------


class _PropagatorCache:
    """Memoizes ``exp(-i H dt / hbar)`` by the bytes of ``H``."""

    def __init__(self, dt: float, layout):
        self.dt = dt
        self.layout = layout
        self.table: list[np.ndarray] = []
        self._index: dict[bytes, int] = {}

    def index_for(self, h: np.ndarray) -> int:
        key = hashlib.sha1(np.ascontiguousarray(h).tobytes()).digest()
        idx = self._index.get(key)
        if idx is None:
            u = unitary_exp(Operator(h, self.layout, hermitian=True), self.dt, sign=-1)
            idx = len(self.table)
            self.table.append(u.mat)
            self._index[key] = idx
        return idx


@dataclass(frozen=True, eq=False)
class HistoryState:
    """Conditional states ``|psi(t_k)>`` for every tick of clock A.

    ``propagators[propagator_index[k]]`` is the one-step map from tick ``k``
    to ``k + 1`` (``k = 0 .. d-2``).
    """

    clock: ClockModel
    states: np.ndarray
    layout: tuple
    propagator_index: np.ndarray
    propagators: tuple
    integrator: str = "midpoint"

    @property
    def d(self) -> int:
        return self.clock.d

    @property
    def delta_t(self) -> float:
        return self.clock.delta_t

    def state(self, k: int) -> StateVector:
        return StateVector(self.states[k % self.d], self.layout)

    def propagator(self, k: int) -> np.ndarray:
        return self.propagators[self.propagator_index[k]]


def build_history(spec: HamiltonianSpec, psi0: StateVector | np.ndarray, phase0: complex = 1.0) -> HistoryState:
    """Integrate the conditional Schrödinger equation over the ticks of clock A.

    Each step uses the exact exponential of the Hamiltonian sampled at the
    step midpoint, which is second-order accurate for smooth ``h_int``.
    """
    amps = as_array(psi0)
    if amps.size != spec.n:
        raise DimensionError(f"initial state has dim {amps.size}, system has dim {spec.n}")
    if abs(np.linalg.norm(amps) - 1) > 1e-12:
        raise PreconditionError("initial state must be normalized")
    if abs(abs(phase0) - 1) > 1e-12:
        raise PreconditionError("phase0 must have unit modulus")
    clock = spec.clock_a
    cache = _PropagatorCache(clock.delta_t, spec.h_s.layout)
    states = np.empty((clock.d, spec.n), dtype=complex)
    index = np.empty(clock.d - 1, dtype=np.intp)
    states[0] = phase0 * amps
    with settings.override(hbar=clock.hbar):
        for k in range(clock.d - 1):
            mid = clock.times[k] + clock.delta_t / 2
            idx = cache.index_for(spec.system_hamiltonian(mid))
            index[k] = idx
            states[k + 1] = cache.table[idx] @ states[k]
    states.setflags(write=False)
    index.setflags(write=False)
    return HistoryState(clock, states, spec.h_s.layout, index, tuple(cache.table))


@dataclass(frozen=True)
class ResidualReport:
    per_tick: np.ndarray
    interior_max: float
    wrap: tuple[float, float]
    masked: np.ndarray  # ticks skipped because of nearby breakpoints


def constraint_residual(history: HistoryState, spec: HamiltonianSpec) -> ResidualReport:
    """Central-difference residual of the constraint acting on the history state.

    ``r_k = || i hbar (psi_{k+1} - psi_{k-1}) / (2 dt) - [H_S + H_int(t_k)] psi_k ||``.
    The two wrap ticks (0 and d-1) use cyclic neighbours and are reported
    separately; ticks within one tick of a breakpoint are masked.
    """
    d = history.d
    if d < 3:
        raise PreconditionError("constraint residual needs at least 3 ticks")
    hb = history.clock.hbar
    dt = history.delta_t
    psi = history.states
    fwd = np.roll(psi, -1, axis=0)
    bwd = np.roll(psi, 1, axis=0)
    h_s = spec.h_s.mat
    hpsi = psi @ h_s.T
    if spec.h_int is not None:
        for k, t in enumerate(history.clock.times):
            hpsi[k] += spec.interaction(t) @ psi[k]
    res = np.linalg.norm(1j * hb * (fwd - bwd) / (2 * dt) - hpsi, axis=1)
    masked = np.array([k for k in range(1, d - 1) if spec.near_breakpoint(history.clock.times[k])], dtype=int)
    interior = np.ones(d, dtype=bool)
    interior[[0, d - 1]] = False
    interior[masked] = False
    imax = float(res[interior].max()) if interior.any() else 0.0
    return ResidualReport(res, imax, (float(res[0]), float(res[d - 1])), masked)


def assemble_full_state(history: HistoryState) -> StateVector:
    """``(1/sqrt d) sum_k |t_k> (x) |psi(t_k)>``."""
    amps = history.states.reshape(-1) / np.sqrt(history.d)
    return StateVector.normalized(amps, history.clock.layout + history.layout)


class Conditional(NamedTuple):
    state: StateVector
    weight: float


def _blocks(full: StateVector | np.ndarray, layout) -> np.ndarray:
    amps = as_array(full)
    d = layout[0][1]
    return amps.reshape(d, amps.size // d)


def conditional_state(full: StateVector, k: int) -> Conditional:
    """``<t_k|Psi>>`` renormalized, with its pre-normalization weight."""
    layout = full.layout
    if len(layout) < 2:
        raise LayoutError("conditional_state needs a clock factor followed by a system factor")
    blocks = _blocks(full, layout)
    block = blocks[k % blocks.shape[0]]
    weight = float(np.vdot(block, block).real)
    if weight <= 1e-24:
        raise PreconditionError(f"tick {k} carries no weight")
    return Conditional(StateVector(block / np.sqrt(weight), layout[1:]), weight)


def expectation_at(full: StateVector, o: Operator, k: int,
                   variant: ExpectationVariant | str = ExpectationVariant.LEFT) -> complex:
    """Clock-conditioned expectation of ``o`` at tick ``k``, rescaled by ``d``.

    ``left = d <<Psi| Pi_k O |Psi>>``, ``right = d <<Psi| O Pi_k |Psi>>`` and
    ``sym`` their mean; for ``O = I_A (x) O_S`` all three equal the ordinary
    expectation in the conditional state.
    """
    variant = ExpectationVariant(variant)
    if o.layout != full.layout:
        raise LayoutError(f"operator layout {o.layout} does not match state layout {full.layout}")
    d = full.layout[0][1]
    psi = _blocks(full, full.layout)
    k %= d
    left = right = None
    if variant in (ExpectationVariant.LEFT, ExpectationVariant.SYM):
        opsi = _blocks(o.mat @ full.amps, full.layout)
        left = d * complex(np.vdot(psi[k], opsi[k]))
    if variant in (ExpectationVariant.RIGHT, ExpectationVariant.SYM):
        odag_psi = _blocks(o.mat.conj().T @ full.amps, full.layout)
        right = d * complex(np.vdot(odag_psi[k], psi[k]))
    if variant is ExpectationVariant.LEFT:
        return left
    if variant is ExpectationVariant.RIGHT:
        return right
    return 0.5 * (left + right)


class ModularOverlap(NamedTuple):
    value: complex
    wrapped: bool = False
    interpolated: bool = False


def modular_energy_expectation_A(history: HistoryState, k: int, q: int | float) -> ModularOverlap:
    """Left-variant expectation of ``exp(i H_A q dt / hbar)`` at tick ``k``.

    For integer ``q`` this is the overlap ``<psi(t_k)|psi(t_{k+q mod d})>``;
    ``wrapped`` flags results whose partner tick crossed the seam.  A
    non-integer ``q`` is evaluated with the dense clock unitary on the
    assembled history state and flagged ``interpolated``.
    """
    d = history.d
    if float(q).is_integer():
        q = int(q)
        j = k + q
        value = complex(np.vdot(history.states[k % d], history.states[j % d]))
        return ModularOverlap(value, wrapped=not 0 <= j < d)
    full = assemble_full_state(history)
    u = modular_energy(history.clock, q * history.delta_t)
    op = Operator._trusted(np.kron(u.mat, np.eye(history.states.shape[1])), full.layout, unitary=True)
    return ModularOverlap(expectation_at(full, op, k, "left"), wrapped=False, interpolated=True)


def modular_energy_expectation_S(psi: StateVector | np.ndarray, h_s: Operator, tau: float) -> complex:
    """``<psi| exp(i H_S tau / hbar) |psi>``."""
    return expectation(psi, unitary_exp(h_s, tau, sign=+1))


def spectral_modular_expectation(psi: StateVector | np.ndarray, h_s: Operator, tau: float) -> complex:
    """Same quantity from the spectrum: ``sum_n |c_n|^2 exp(i E_n tau / hbar)``."""
    energies, vecs = hermitian_eig(h_s)
    c = vecs.mat.conj().T @ as_array(psi)
    return complex(np.sum(np.abs(c) ** 2 * np.exp(1j * energies * tau / settings.hbar())))


def interaction_operator(spec: HamiltonianSpec, shift: int = 0) -> np.ndarray:
    """``sum_k Pi_k (x) h_int(t_{(k+shift) mod d})`` as a dense matrix."""
    d, n = spec.clock_a.d, spec.n
    samples = spec.interaction_samples[(np.arange(d) + shift) % d]
    out = np.zeros((d * n, d * n), dtype=complex)
    for k in range(d):
        out[k * n:(k + 1) * n, k * n:(k + 1) * n] = samples[k]
    return out


def effective_hamiltonian_B(spec: HamiltonianSpec) -> Operator:
    """``H_A (x) I + I (x) H_S + sum_k Pi_k (x) h_int(t_k)``."""
    d, n = spec.clock_a.d, spec.n
    _check_alloc(d * n)
    mat = np.kron(spec.clock_a.H.mat, np.eye(n)) + np.kron(np.eye(d), spec.h_s.mat)
    mat += interaction_operator(spec)
    return Operator(mat, spec.full_layout, hermitian=True, label="H_eff^B")


@dataclass(frozen=True)
class DriftReport:
    max_drift: float
    values: np.ndarray
    times: np.ndarray


def conserved_modular_energy_check(spec: HamiltonianSpec, full_psi0: StateVector, tau: float,
                                   n_times: int = 32, t_span: float | None = None,
                                   h_eff: Operator | None = None) -> DriftReport:
    """Track ``<exp(i H_eff^B tau / hbar)>`` along ``t_B``.

    The modular-energy operator comes from the eigendecomposition of
    ``H_eff^B``; the state is stepped with an independent Padé exponential so
    the two sides share no factorization.
    """
    h_eff = h_eff or effective_hamiltonian_B(spec)
    if full_psi0.layout != h_eff.layout:
        raise LayoutError("initial state does not live on A (x) S")
    t_span = spec.clock_a.period if t_span is None else t_span
    hb = spec.clock_a.hbar
    with settings.override(hbar=hb):
        m = unitary_exp(h_eff, tau, sign=+1).mat
    step = expm(-1j * h_eff.mat * (t_span / n_times) / hb)
    psi = full_psi0.amps.copy()
    values = np.empty(n_times + 1, dtype=complex)
    for i in range(n_times + 1):
        values[i] = np.vdot(psi, m @ psi)
        psi = step @ psi
    times = np.linspace(0.0, t_span, n_times + 1)
    return DriftReport(float(np.max(np.abs(values - values[0]))), values, times)


def total_modular_phase(history: HistoryState, h_s: Operator, k: int, q: int) -> tuple[complex, complex]:
    """Clock-side and system-side modular energies at tick ``k``.

    For histories with ``psi(t + q dt) = exp(i phi) psi(t)`` under a
    time-independent ``H_S`` these are ``exp(i phi)`` and ``exp(-i phi)``.
    """
    a_side = modular_energy_expectation_A(history, k, q).value
    with settings.override(hbar=history.clock.hbar):
        s_side = modular_energy_expectation_S(history.states[k], h_s, q * history.delta_t)
    return a_side, s_side
