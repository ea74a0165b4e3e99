"""Two separated wave packets and their modular momentum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..modvars import ModularVariable, UncertaintyProfile, fourier_moments
from ..opalg import StateVector
from .grid import GridSystem

OVERLAP_TOL = 1e-12


@dataclass(frozen=True)
class DoubleSlitConfig:
    sigma: float
    ell: float
    phi: float = 0.0
    center: float | None = None  # first packet; defaults to a quarter of the box

    def __post_init__(self) -> None:
        if not self.sigma > 0 or not self.ell > 0:
            raise ConfigError("sigma and ell must be positive")
        if self.sigma > self.ell / 4:
            raise ConfigError(f"packet width {self.sigma} is not small against the separation {self.ell}")


def packet(grid: GridSystem, cfg: DoubleSlitConfig) -> np.ndarray:
    center = grid.length / 4 if cfg.center is None else cfg.center
    return grid.gaussian(center, cfg.sigma)


def two_packet_state(grid: GridSystem, cfg: DoubleSlitConfig) -> StateVector:
    """``(xi_1 + e^{i phi} xi_2)/sqrt 2`` with ``xi_2(x) = xi_1(x - ell)``."""
    m = grid.lattice_steps(cfg.ell)
    xi1 = packet(grid, cfg)
    xi2 = np.roll(xi1, m)
    overlap = abs(np.vdot(xi1, xi2))
    if overlap >= OVERLAP_TOL:
        raise ConfigError(f"packets overlap ({overlap:.3g}); increase ell or reduce sigma")
    return StateVector.normalized(xi1 + np.exp(1j * cfg.phi) * xi2, grid.layout)


def modular_momentum(grid: GridSystem, ell: float) -> ModularVariable:
    return ModularVariable(grid.P, ell, label="P ell/hbar")


def _band_scales(grid: GridSystem, psi: np.ndarray, cut: float = 1e-8) -> tuple[float, float]:
    xs = grid.x[np.abs(psi) > cut * np.abs(psi).max()]
    phat = grid.fourier.conj().T @ psi
    ps = grid.p[np.abs(phat) > cut * np.abs(phat).max()]
    return float(np.abs(xs).max()), float(np.abs(ps).max())


def monomial_expectations(grid: GridSystem, psi: np.ndarray, max_degree: int) -> dict[tuple[int, int], complex]:
    """``<psi| X^a P^b |psi>`` for every ``a + b <= max_degree``."""
    f = grid.fourier
    out = {}
    for b in range(max_degree + 1):
        pb = f @ (grid.p**b * (f.conj().T @ psi))
        for a in range(max_degree + 1 - b):
            out[(a, b)] = complex(np.vdot(psi, grid.x**a * pb))
    return out


def polynomial_phase_insensitivity(grid: GridSystem, cfg: DoubleSlitConfig, max_degree: int = 4,
                                   phis=(0.0, np.pi / 3, np.pi)) -> float:
    """Largest scaled change of any ``<X^a P^b>`` as the relative phase varies."""
    ref_cfg = DoubleSlitConfig(cfg.sigma, cfg.ell, 0.0, cfg.center)
    ref_psi = two_packet_state(grid, ref_cfg).amps
    ref = monomial_expectations(grid, ref_psi, max_degree)
    sx, sp = _band_scales(grid, ref_psi)
    worst = 0.0
    for phi in phis:
        psi = two_packet_state(grid, DoubleSlitConfig(cfg.sigma, cfg.ell, phi, cfg.center)).amps
        vals = monomial_expectations(grid, psi, max_degree)
        for (a, b), v in vals.items():
            scale = max(sx**a * sp**b, 1.0)
            worst = max(worst, abs(v - ref[(a, b)]) / scale)
    return worst


@dataclass(frozen=True)
class CollapseResult:
    before: UncertaintyProfile
    after: UncertaintyProfile


def collapse_uncertainty_demo(grid: GridSystem, cfg: DoubleSlitConfig, n_max: int = 5) -> CollapseResult:
    """Moments of ``exp(i n P ell/hbar)`` before and after finding the particle at the first slit."""
    v = modular_momentum(grid, cfg.ell)
    psi = two_packet_state(grid, cfg)
    xi1 = StateVector.normalized(packet(grid, cfg), grid.layout)
    # projecting onto xi_1 and renormalizing leaves exactly xi_1 (up to a phase)
    return CollapseResult(fourier_moments(psi, v, n_max), fourier_moments(xi1, v, n_max))
