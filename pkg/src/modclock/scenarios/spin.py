"""Spin-1/2 precessing in a static field and kicked by short transverse pulses.

Pulse trains have period ``tau_prime``.  ``x`` pulses start at multiples of
``tau_prime``; optional ``z`` pulses start half a period later, so the two
trains never overlap.  Amplitudes are specified as the rotation angle each
pulse produces (``mu * integral B dt``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property

import numpy as np

from ..clock import ClockModel, modular_energy
from ..errors import ConfigError, PreconditionError
from ..opalg import Operator, StateVector, commutator, max_abs, pauli
from ..pwframe import HamiltonianSpec, HistoryState, build_history, effective_hamiltonian_B, interaction_operator

MAX_WIDTH_RATIO = 0.02
_EDGE = 1e-9


class Regime(str, Enum):
    RESONANT = "resonant"
    DETUNED_BARE = "detuned_bare"
    DETUNED_COMPENSATED = "detuned_compensated"


@dataclass(frozen=True)
class SpinPulseConfig:
    b0: float = 1.0
    mu: float = 1.0
    tau_prime: float | None = None  # defaults to the precession period
    ticks_per_period: int = 100     # clock ticks per tau_prime
    width_ticks: int = 2
    theta_x: float = np.pi / 20
    theta_z: float = 0.0
    n_pulses: int = 20
    shape: str = "rect"             # or "hann"
    hbar: float = 1.0

    def __post_init__(self) -> None:
        if not self.b0 > 0 or not self.mu > 0:
            raise ConfigError("b0 and mu must be positive")
        if self.shape not in ("rect", "hann"):
            raise ConfigError(f"unknown pulse shape {self.shape!r}")
        if self.ticks_per_period < 4 or self.width_ticks < 1 or self.n_pulses < 1:
            raise ConfigError("need ticks_per_period >= 4, width_ticks >= 1 and n_pulses >= 1")
        if self.tau_prime is not None and not self.tau_prime > 0:
            raise ConfigError("tau_prime must be positive")
        # x windows [0, w), z windows [tau'/2, tau'/2 + w): disjoint iff w <= tau'/2
        if self.theta_z and 2 * self.width_ticks > self.ticks_per_period:
            raise ConfigError("x and z pulse supports overlap")
        if self.width_ratio > MAX_WIDTH_RATIO + 1e-12:
            raise ConfigError(f"pulse width ratio {self.width_ratio:.3g} exceeds {MAX_WIDTH_RATIO}")

    @property
    def tau(self) -> float:
        """Larmor period ``2 pi / (mu B0)``."""
        return 2 * np.pi / (self.mu * self.b0)

    @property
    def period(self) -> float:
        return self.tau if self.tau_prime is None else self.tau_prime

    @property
    def delta_t(self) -> float:
        return self.period / self.ticks_per_period

    @property
    def width(self) -> float:
        return self.width_ticks * self.delta_t

    @property
    def width_ratio(self) -> float:
        return self.width_ticks / self.ticks_per_period

    def amplitude(self, theta: float) -> float:
        """Peak field giving rotation ``theta`` per pulse."""
        area = self.width if self.shape == "rect" else self.width / 2
        return theta / (self.mu * area)

    def _train(self, t: np.ndarray | float, offset: float, theta: float):
        if theta == 0:
            return np.zeros_like(np.asarray(t, dtype=float))
        s = np.mod(np.asarray(t, dtype=float) - offset + _EDGE * self.period, self.period) - _EDGE * self.period
        inside = (s >= -_EDGE * self.period) & (s < self.width - _EDGE * self.period)
        amp = self.amplitude(theta)
        if self.shape == "rect":
            return np.where(inside, amp, 0.0)
        return np.where(inside, amp * np.sin(np.pi * np.clip(s, 0, self.width) / self.width) ** 2, 0.0)

    def bx(self, t):
        return self._train(t, 0.0, self.theta_x)

    def bz(self, t):
        return self._train(t, self.period / 2, self.theta_z)

    def breakpoints(self, t_end: float) -> tuple[float, ...]:
        out = []
        for j in range(int(np.ceil(t_end / self.period)) + 1):
            base = j * self.period
            out += [base, base + self.width]
            if self.theta_z:
                out += [base + self.period / 2, base + self.period / 2 + self.width]
        return tuple(out)

    @cached_property
    def h_s(self) -> Operator:
        return Operator(0.5 * self.hbar * self.mu * self.b0 * pauli("z").mat, (("S", 2),), hermitian=True, label="H_S")

    def h_int(self, t: float) -> np.ndarray:
        sx, sz = pauli("x").mat, pauli("z").mat
        return 0.5 * self.hbar * self.mu * (float(self.bx(t)) * sx + float(self.bz(t)) * sz)


def regime_config(regime: Regime | str, **overrides) -> SpinPulseConfig:
    """Reference parameters for each regime.

    Detuned runs use ``tau' = 2 tau / 3``: three kicks per cycle point in
    directions 120 degrees apart in the rotating frame and cancel.  The
    compensating ``z`` kick adds ``2 pi / 3`` so the total precession per
    pulse period is a full turn.
    """
    regime = Regime(regime)
    base = SpinPulseConfig(**{k: v for k, v in overrides.items() if k in ("b0", "mu", "hbar")})
    if regime is Regime.RESONANT:
        cfg = replace(base, tau_prime=base.tau)
    else:
        tp = 2 * base.tau / 3
        tz = 0.0 if regime is Regime.DETUNED_BARE else float(np.mod(-base.mu * base.b0 * tp, 2 * np.pi))
        cfg = replace(base, tau_prime=tp, theta_z=tz)
    rest = {k: v for k, v in overrides.items() if k not in ("b0", "mu", "hbar")}
    return replace(cfg, **rest) if rest else cfg


def validate_regime(cfg: SpinPulseConfig, regime: Regime | str) -> None:
    regime = Regime(regime)
    ratio = cfg.period / cfg.tau
    nearest = max(round(ratio), 1)
    if regime is Regime.RESONANT and abs(ratio - nearest) > 1e-9:
        raise PreconditionError(f"resonant regime needs tau' = n tau, got tau'/tau = {ratio:.6g}")
    if regime is not Regime.RESONANT:
        if abs(cfg.period - nearest * cfg.tau) < 0.1 * cfg.tau:
            raise PreconditionError("detuned regimes need tau' at least 10% of tau away from a multiple of tau")
        if regime is Regime.DETUNED_BARE and cfg.theta_z:
            raise PreconditionError("detuned_bare takes no z pulses")
        if regime is Regime.DETUNED_COMPENSATED:
            total = np.mod(cfg.mu * cfg.b0 * cfg.period + cfg.theta_z, 2 * np.pi)
            if min(total, 2 * np.pi - total) > 1e-9:
                raise PreconditionError("compensating z angle does not close the precession per period")


def spin_spec(cfg: SpinPulseConfig, d: int, name: str = "spin") -> HamiltonianSpec:
    clock = ClockModel(d, cfg.delta_t, hbar=cfg.hbar)
    return HamiltonianSpec(clock, cfg.h_s, cfg.h_int, breakpoints=cfg.breakpoints(clock.period), name=name)


INITIAL_STATE = np.array([0.0, 1.0], dtype=complex)  # |1>, the lower sigma_z eigenstate


def flip_probability(states: np.ndarray) -> np.ndarray:
    return np.abs(states[:, 0]) ** 2


@dataclass(frozen=True)
class SpinRun:
    config: SpinPulseConfig
    regime: Regime
    history: HistoryState
    times: np.ndarray
    p_flip: np.ndarray
    norm_error: float
    energy_change: float  # <H_S>(end) - <H_S>(0) in units of 2 pi hbar / tau'

    @property
    def max_flip(self) -> float:
        return float(self.p_flip.max())

    @property
    def sz_retention(self) -> float:
        """Time-averaged ``<sigma_z>`` relative to its initial value."""
        return float(np.mean(1 - 2 * self.p_flip))


def run_spin(cfg: SpinPulseConfig, regime: Regime | str, d_clock: int | None = None) -> SpinRun:
    regime = Regime(regime)
    validate_regime(cfg, regime)
    d = d_clock or cfg.n_pulses * cfg.ticks_per_period + 1
    spec = spin_spec(cfg, d)
    hist = build_history(spec, StateVector(INITIAL_STATE, cfg.h_s.layout))
    p = flip_probability(hist.states)
    norms = np.linalg.norm(hist.states, axis=1)
    e = np.real(np.einsum("ki,ij,kj->k", hist.states.conj(), cfg.h_s.mat, hist.states))
    quantum = 2 * np.pi * cfg.hbar / cfg.period
    return SpinRun(cfg, regime, hist, spec.clock_a.times, p, float(np.max(np.abs(norms - 1))),
                   float((e[-1] - e[0]) / quantum))


def direct_flip_oracle(cfg: SpinPulseConfig, n_pulses: int | None = None) -> np.ndarray:
    """Flip probability after each pulse period from a product of 2x2 exponentials."""
    from scipy.linalg import expm

    n_pulses = n_pulses or cfg.n_pulses
    hb = cfg.hbar
    sx, sz = pauli("x").mat, pauli("z").mat
    h0 = cfg.h_s.mat
    w = cfg.width
    ax, az = cfg.amplitude(cfg.theta_x), cfg.amplitude(cfg.theta_z)
    if cfg.shape != "rect":
        raise PreconditionError("the product oracle handles rectangular pulses only")
    u_x = expm(-1j * (h0 + 0.5 * hb * cfg.mu * ax * sx) * w / hb)
    u_z = expm(-1j * (h0 + 0.5 * hb * cfg.mu * az * sz) * w / hb)
    free_a = expm(-1j * h0 * (cfg.period / 2 - w) / hb)
    free_b = expm(-1j * h0 * (cfg.period / 2 - (w if cfg.theta_z else 0.0)) / hb)
    one = free_b @ (u_z if cfg.theta_z else np.eye(2)) @ free_a @ u_x
    psi = INITIAL_STATE.copy()
    out = []
    for _ in range(n_pulses):
        psi = one @ psi
        out.append(abs(psi[0]) ** 2)
    return np.array(out)


@dataclass(frozen=True)
class RateReport:
    theta: float
    q: int
    rate_norm: float          # max |-(i/hbar)[U (x) I, H_eff]|
    identity_residual: float  # against the two-time interaction form
    reduced_residual: float   # short-pulse forms on ticks where they apply
    reduced_ticks: int
    skipped_ticks: int        # ticks where a reduced form's dropped field is on


def spin_modular_energy_rates(cfg: SpinPulseConfig, theta: float, d: int | None = None) -> RateReport:
    """Operator-valued rate of ``exp(i H_A theta / hbar)`` in the full clock-plus-spin space."""
    if cfg.width_ratio > MAX_WIDTH_RATIO + 1e-12:
        raise PreconditionError("short-pulse reductions need w/tau' <= 0.02")
    d = d or 2 * cfg.ticks_per_period
    spec = spin_spec(cfg, d)
    clock = spec.clock_a
    q = clock.steps_for(theta)
    if q is None:
        raise PreconditionError("theta must be a whole number of clock ticks")
    hb = cfg.hbar
    u = modular_energy(clock, theta).mat
    big_u = np.kron(u, np.eye(2))
    h_eff = effective_hamiltonian_B(spec)
    rate = (-1j / hb) * commutator(Operator._trusted(big_u, spec.full_layout, unitary=True), h_eff).mat
    rhs = (-1j / hb) * (interaction_operator(spec, q) - interaction_operator(spec)) @ big_u
    identity = max_abs(rate - rhs)

    # reduced forms, checked blockwise: row block k of rate maps column block k+q
    sx, sz = pauli("x").mat, pauli("z").mat
    t = clock.times
    worst, count, skipped = 0.0, 0, 0
    for k in range(d):
        col = (k + q) % d  # U sends |t_j> to |t_{j-q}>, so row block k meets column block k+q
        block = rate[2 * k:2 * k + 2, 2 * col:2 * col + 2]
        tk, tkq = t[k], t[col]
        bx_now, bz_now = float(cfg.bx(tk)), float(cfg.bz(tk))
        bx_next, bz_next = float(cfg.bx(tkq)), float(cfg.bz(tkq))
        # each reduced form drops one field; it applies only where that field is also off
        forms = []
        if bx_now == 0:
            forms.append((bz_next, bx_next * sx - bz_now * sz))
        if bx_next == 0:
            forms.append((bz_now, bz_next * sz - bx_now * sx))
        for dropped, f in forms:
            if dropped != 0:
                skipped += 1
                continue
            worst = max(worst, max_abs(block - (-0.5j * cfg.mu) * f))
            count += 1
    return RateReport(theta, q, max_abs(rate), identity, worst, count, skipped)


def energy_exchange_probe(cfg: SpinPulseConfig, regime: Regime | str) -> float:
    """Distance of the spin energy change over the train from the nearest multiple of ``2 pi hbar / tau'``."""
    change = run_spin(cfg, regime).energy_change
    return float(abs(change - round(change)))
