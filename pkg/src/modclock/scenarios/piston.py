"""Particle bouncing in a box whose right wall is pushed in by ``delta_ell``.

The push is a linear ramp of the wall offset between ``ramp[0]`` and
``ramp[1]`` (fractions of the particle's return period), timed while the
packet is far from the right wall.  The return overlap
``<psi(0)|psi(tau)>`` then picks up an extra phase of about
``-2 pbar delta_ell / hbar`` relative to the undisturbed box.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from ..clock import ClockModel, modular_energy
from ..errors import ConfigError, PreconditionError
from ..opalg import Operator, StateVector, commutator, max_abs
from ..pwframe import (
    HamiltonianSpec,
    HistoryState,
    build_history,
    effective_hamiltonian_B,
    modular_energy_expectation_A,
)
from .grid import GridSystem

MAX_RAMP_RATIO = 0.05
WALL_MASS_TOL = 1e-6
WALL_MARGIN = 6.0  # stiffness lengths in front of the wall counted as "at the wall"


@dataclass(frozen=True)
class PistonConfig:
    delta_ell: float = np.pi / 16
    wall_left: float = 16.0
    wall_right: float = 240.0
    v0: float = 10.0
    stiffness: float = 2.0
    x0: float = 96.0
    pbar: float = 1.0
    sigma: float = 12.0
    ramp: tuple[float, float] = (0.02, 0.06)
    ticks_per_period: int = 400

    def __post_init__(self) -> None:
        lo, hi = self.ramp
        if not 0 <= lo < hi:
            raise ConfigError(f"ramp times must satisfy 0 <= start < end, got {self.ramp}")
        if hi - lo > MAX_RAMP_RATIO + 1e-12:
            raise ConfigError(f"ramp lasts {hi - lo:.3g} periods; at most {MAX_RAMP_RATIO} allowed")
        if not self.wall_left < self.x0 < self.wall_right:
            raise ConfigError("initial packet must start inside the box")
        if self.delta_ell < 0 or self.v0 <= 0 or self.stiffness <= 0 or self.sigma <= 0:
            raise ConfigError("delta_ell must be >= 0; v0, stiffness and sigma must be positive")
        if self.ticks_per_period < 4:
            raise ConfigError("ticks_per_period must be at least 4")

    def v_left(self, x):
        return self.v0 / (1 + np.exp((np.asarray(x) - self.wall_left) / self.stiffness))

    def v_right(self, x):
        return self.v0 / (1 + np.exp(-(np.asarray(x) - self.wall_right) / self.stiffness))

    def walls(self, x):
        return self.v_left(x) + self.v_right(x)

    def offset(self, t: float, period: float) -> float:
        """Piston displacement ``f(t)``: zero, then a linear ramp, then ``delta_ell``."""
        t1, t2 = self.ramp[0] * period, self.ramp[1] * period
        if t <= t1:
            return 0.0
        if t >= t2:
            return self.delta_ell
        return self.delta_ell * (t - t1) / (t2 - t1)


def initial_packet(grid: GridSystem, cfg: PistonConfig) -> StateVector:
    return StateVector(grid.gaussian(cfg.x0, cfg.sigma, cfg.pbar), grid.layout)


@lru_cache(maxsize=16)
def _static_spectrum(grid: GridSystem, cfg: PistonConfig):
    return np.linalg.eigh(grid.hamiltonian(cfg.walls).mat)


def particle_period(grid: GridSystem, cfg: PistonConfig) -> float:
    """Return time of the packet in the fixed box.

    Maximizes ``|<psi0| exp(-i H_S t/hbar) |psi0>|`` near the classical
    round trip ``2 (x_r - x_l) m / pbar``.
    """
    e, u = _static_spectrum(grid, replace(cfg, delta_ell=0.0))
    w = np.abs(u.conj().T @ initial_packet(grid, cfg).amps) ** 2

    def neg_overlap(t):
        return -abs(np.sum(w * np.exp(-1j * e * t / grid.hbar)))

    est = 2 * (cfg.wall_right - cfg.wall_left) * grid.mass / cfg.pbar
    ts = np.linspace(0.8 * est, 1.2 * est, 161)
    i = int(np.argmin([neg_overlap(t) for t in ts]))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
    return float(minimize_scalar(neg_overlap, bounds=(lo, hi), method="bounded",
                                 options={"xatol": 1e-10 * est}).x)


def piston_spec(grid: GridSystem, cfg: PistonConfig, d: int, period: float | None = None,
                moving: bool = True, t0: float = 0.0) -> HamiltonianSpec:
    period = particle_period(grid, cfg) if period is None else period
    clock = ClockModel(d, period / cfg.ticks_per_period, t0=t0, hbar=grid.hbar)
    h_s = grid.hamiltonian(cfg.walls)
    base = np.asarray(cfg.v_right(grid.x), dtype=float)

    def h_int(t: float) -> np.ndarray:
        f = cfg.offset(t, period)
        return np.diag(np.asarray(cfg.v_right(grid.x + f), dtype=float) - base).astype(complex)

    bps = (cfg.ramp[0] * period, cfg.ramp[1] * period)
    return HamiltonianSpec(clock, h_s, h_int if moving and cfg.delta_ell else None,
                           breakpoints=bps, name="piston")


def wall_mass(grid: GridSystem, cfg: PistonConfig, history: HistoryState, period: float) -> float:
    """Largest probability near the right wall while it moves."""
    lo = cfg.wall_right - cfg.delta_ell - WALL_MARGIN * cfg.stiffness
    region = (grid.x >= lo) & (grid.x <= cfg.wall_right + WALL_MARGIN * cfg.stiffness)
    t = history.clock.times
    ticks = np.nonzero((t >= cfg.ramp[0] * period - history.delta_t) & (t <= cfg.ramp[1] * period + history.delta_t))[0]
    if len(ticks) == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(history.states[ticks][:, region]) ** 2, axis=1)))


@dataclass(frozen=True)
class PistonRun:
    period: float
    q: int
    moved: HistoryState
    static: HistoryState
    series: np.ndarray        # <psi(t_k)|psi(t_{k+q})> for the moved history
    static_overlap: complex
    moved_overlap: complex
    delta_arg: float
    predicted: float          # -2 pbar delta_ell / hbar
    wall_mass: float

    @property
    def relative_error(self) -> float:
        if self.predicted == 0:
            return abs(self.delta_arg)
        return abs(self.delta_arg - self.predicted) / abs(self.predicted)


def run_piston(grid: GridSystem, cfg: PistonConfig, d_clock: int | None = None) -> PistonRun:
    period = particle_period(grid, cfg)
    q = cfg.ticks_per_period
    d = d_clock or 2 * q
    if d <= q:
        raise PreconditionError("the clock must run for more than one particle period")
    psi0 = initial_packet(grid, cfg)
    moved = build_history(piston_spec(grid, cfg, d, period), psi0)
    mass = wall_mass(grid, cfg, moved, period)
    if mass > WALL_MASS_TOL:
        raise PreconditionError(f"packet reaches the moving wall during the push (mass {mass:.3g})")
    static = build_history(piston_spec(grid, cfg, d, period, moving=False), psi0)
    ov_m = modular_energy_expectation_A(moved, 0, q).value
    ov_s = modular_energy_expectation_A(static, 0, q).value
    series = np.array([modular_energy_expectation_A(moved, k, q).value for k in range(d - q)])
    return PistonRun(period, q, moved, static, series, ov_s, ov_m, float(np.angle(ov_m / ov_s)),
                     -2 * cfg.pbar * cfg.delta_ell / grid.hbar, mass)


def small_piston(delta_ell: float = 0.5, ticks_per_period: int = 100) -> tuple[GridSystem, PistonConfig]:
    """A 16-site box small enough for dense checks on the full clock-plus-particle space."""
    grid = GridSystem(16, 16.0)
    cfg = PistonConfig(delta_ell=delta_ell, wall_left=2.0, wall_right=14.0, v0=10.0, stiffness=1.0,
                       x0=4.8, pbar=1.0, sigma=16 / 12, ramp=(0.02, 0.06), ticks_per_period=ticks_per_period)
    return grid, cfg


def small_piston_spec(d: int = 64, delta_ell: float = 0.5, ticks_per_period: int = 100,
                      centered: bool = True) -> tuple[GridSystem, PistonConfig, HamiltonianSpec]:
    """Dense-check spec; ``centered`` shifts the clock origin so the push sits mid-lattice."""
    grid, cfg = small_piston(delta_ell, ticks_per_period)
    period = particle_period(grid, cfg)
    dt = period / ticks_per_period
    t0 = -(d // 2 - 4) * dt if centered else 0.0
    return grid, cfg, piston_spec(grid, cfg, d, period, t0=t0)


@dataclass(frozen=True)
class WindowReport:
    rows: int
    residual: float


def displacement_window_check(grid: GridSystem, cfg: PistonConfig, d: int) -> WindowReport:
    """Rate of ``exp(i H_A tau/hbar)`` on ticks before the push whose partner tick is after it.

    There the rate block must equal ``-(i/hbar)[V_r(X + delta_ell) - V_r(X)]``.
    """
    period = particle_period(grid, cfg)
    spec = piston_spec(grid, cfg, d, period)
    clock = spec.clock_a
    q = cfg.ticks_per_period
    n = grid.n
    u = np.kron(modular_energy(clock, q * clock.delta_t).mat, np.eye(n))
    rate = (-1j / grid.hbar) * commutator(Operator._trusted(u, spec.full_layout, unitary=True),
                                          effective_hamiltonian_B(spec)).mat
    target = (-1j / grid.hbar) * np.diag(cfg.v_right(grid.x + cfg.delta_ell) - cfg.v_right(grid.x))
    t = clock.times
    rows = [k for k in range(d - q) if t[k] <= cfg.ramp[0] * period and t[k + q] >= cfg.ramp[1] * period]
    worst = 0.0
    for k in rows:
        block = rate[k * n:(k + 1) * n, (k + q) * n:(k + q + 1) * n]
        worst = max(worst, max_abs(block - target))
    return WindowReport(len(rows), worst)

