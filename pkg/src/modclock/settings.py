"""Numerical settings: reduced Planck constant and allocation cap.

``set_hbar`` changes the process-wide default.  ``override`` changes the value
for the current thread only, so concurrent sweeps over ``hbar`` do not race.
"""

from __future__ import annotations

import os
import threading
from contextlib import contextmanager
from typing import Iterator

DEFAULT_MAX_DIM = 2**16


def _env_max_dim() -> int:
    raw = os.environ.get("MODCLOCK_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_DIM
    value = int(raw)
    if value < 1:
        raise ValueError(f"MODCLOCK_MAX_DIM must be positive, got {raw!r}")
    return value


class Settings(threading.local):
    default_hbar = 1.0
    default_max_dim = _env_max_dim()

    def __init__(self) -> None:
        self._hbar: float | None = None
        self._max_dim: int | None = None

    @property
    def hbar(self) -> float:
        return Settings.default_hbar if self._hbar is None else self._hbar

    @property
    def max_dim(self) -> int:
        return Settings.default_max_dim if self._max_dim is None else self._max_dim


settings = Settings()


def hbar() -> float:
    return settings.hbar


def _positive(value: float) -> float:
    if not value > 0:
        raise ValueError(f"hbar must be positive, got {value}")
    return float(value)


def set_hbar(value: float) -> None:
    Settings.default_hbar = _positive(value)


@contextmanager
def override(*, hbar: float | None = None, max_dim: int | None = None) -> Iterator[Settings]:
    """Temporarily replace settings in the calling thread."""
    saved = (settings._hbar, settings._max_dim)
    try:
        if hbar is not None:
            settings._hbar = _positive(hbar)
        if max_dim is not None:
            if int(max_dim) < 1:
                raise ValueError("max_dim must be positive")
            settings._max_dim = int(max_dim)
        yield settings
    finally:
        settings._hbar, settings._max_dim = saved
