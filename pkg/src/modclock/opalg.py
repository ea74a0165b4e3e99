"""Dense operator algebra on small tensor-product Hilbert spaces.

Everything here works on plain complex numpy arrays wrapped in two immutable
value types, :class:`Operator` and :class:`StateVector`, which carry a tensor
layout (ordered ``(label, dim)`` factors).  Matrix functions are evaluated via
Hermitian eigendecomposition, so unitaries built from Hermitian generators are
unitary to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from . import settings
from .errors import DimensionError, LayoutError, NotHermitianError

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-12

Layout = tuple[tuple[str, int], ...]
ArrayLike = Union[np.ndarray, Sequence]


def make_layout(factors: Iterable[tuple[str, int]]) -> Layout:
    """Validate and freeze a tensor layout as a tuple of ``(label, dim)`` pairs."""
    layout = tuple((str(label), int(dim)) for label, dim in factors)
    labels = [label for label, _ in layout]
    if len(set(labels)) != len(labels):
        raise LayoutError(f"duplicate factor labels in {layout}")
    for label, dim in layout:
        if dim < 1:
            raise LayoutError(f"factor {label!r} has non-positive dim {dim}")
    return layout


def layout_dim(layout: Layout) -> int:
    return int(np.prod([dim for _, dim in layout], dtype=np.int64))


def _check_alloc(dim: int) -> None:
    if dim > settings.settings.max_dim:
        raise DimensionError(
            f"dimension {dim} exceeds the configured maximum {settings.settings.max_dim}"
        )


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


def _herm_residual(mat: np.ndarray) -> float:
    return float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense complex operator with a declared tensor layout.

    ``hermitian=None`` means "detect"; ``hermitian=True`` symmetrizes the
    matrix after checking it is Hermitian to ``1e-12`` relative to its
    max-norm, and raises :class:`NotHermitianError` otherwise.  ``unitary`` is
    verified (to ``1e-10``) only when set.
    """

    mat: np.ndarray
    layout: Layout = None  # type: ignore[assignment]
    hermitian: bool | None = None
    unitary: bool | None = None
    label: str = ""

    def __post_init__(self) -> None:
        mat = np.asarray(self.mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"operator must be square, got shape {mat.shape}")
        dim = mat.shape[0]
        _check_alloc(dim)
        layout = make_layout(self.layout) if self.layout is not None else (("S", dim),)
        if layout_dim(layout) != dim:
            raise LayoutError(f"layout {layout} does not match dimension {dim}")

        scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
        herm_ok = _herm_residual(mat) < HERMITIAN_TOL * scale
        if self.hermitian and not herm_ok:
            raise NotHermitianError(
                f"operator {self.label!r} flagged hermitian but ||A - A^+||_max = {_herm_residual(mat):.3e}"
            )
        hermitian = herm_ok if self.hermitian is None else bool(self.hermitian)
        if hermitian:
            mat = 0.5 * (mat + mat.conj().T)

        # unitarity is only verified when claimed (the check is cubic in dim)
        unitary = bool(self.unitary)
        if unitary:
            gram_res = float(np.max(np.abs(mat.conj().T @ mat - np.eye(dim)))) if dim else 0.0
            if gram_res >= UNITARY_TOL:
                raise DimensionError(
                    f"operator {self.label!r} flagged unitary but ||A^+A - I||_max = {gram_res:.3e}"
                )

        object.__setattr__(self, "mat", _frozen(mat))
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "hermitian", hermitian)
        object.__setattr__(self, "unitary", unitary)

    # -- basic properties -------------------------------------------------
    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def max_norm(self) -> float:
        return float(np.max(np.abs(self.mat))) if self.mat.size else 0.0

    @property
    def dag(self) -> "Operator":
        return Operator(self.mat.conj().T, self.layout, label=f"{self.label}^+" if self.label else "")

    @cached_property
    def is_diagonal(self) -> bool:
        return not np.any(self.mat - np.diag(np.diag(self.mat)))

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending real eigenvalues and unitary eigenvector matrix (cached)."""
        if not self.hermitian:
            raise NotHermitianError(f"operator {self.label!r} is not Hermitian")
        if self.is_diagonal:
            diag = np.real(np.diag(self.mat))
            order = np.argsort(diag, kind="stable")
            vecs = np.eye(self.dim, dtype=complex)[:, order]
            return diag[order], vecs
        vals, vecs = np.linalg.eigh(self.mat)
        return vals, vecs

    # -- arithmetic -------------------------------------------------------
    def _same_space(self, other: "Operator") -> None:
        if self.dim != other.dim:
            raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if self.layout != other.layout:
            raise LayoutError(f"layout mismatch: {self.layout} vs {other.layout}")

    def __add__(self, other: "Operator") -> "Operator":
        self._same_space(other)
        return Operator(self.mat + other.mat, self.layout)

    def __sub__(self, other: "Operator") -> "Operator":
        self._same_space(other)
        return Operator(self.mat - other.mat, self.layout)

    def __neg__(self) -> "Operator":
        return Operator(-self.mat, self.layout)

    def __mul__(self, scalar: complex) -> "Operator":
        if isinstance(scalar, Operator):
            return NotImplemented
        return Operator(scalar * self.mat, self.layout)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._same_space(other)
            return Operator(self.mat @ other.mat, self.layout)
        if isinstance(other, StateVector):
            if other.dim != self.dim:
                raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return self.mat @ other.amps
        return self.mat @ np.asarray(other)

    @classmethod
    def identity(cls, layout: Layout | int) -> "Operator":
        if isinstance(layout, (int, np.integer)):
            layout = (("S", int(layout)),)
        layout = make_layout(layout)
        return cls(np.eye(layout_dim(layout)), layout, hermitian=True, unitary=True, label="I")

    @classmethod
    def diagonal(cls, values: ArrayLike, layout: Layout | None = None, label: str = "") -> "Operator":
        return cls(np.diag(np.asarray(values, dtype=complex)), layout, label=label)

    @classmethod
    def _trusted(cls, mat: np.ndarray, layout: Layout, *, hermitian: bool = False,
                 unitary: bool = False, label: str = "") -> "Operator":
        # skips checks for matrices that hold their flags by construction
        op = cls.__new__(cls)
        for name, value in (("mat", _frozen(mat)), ("layout", make_layout(layout)),
                            ("hermitian", hermitian), ("unitary", unitary), ("label", label)):
            object.__setattr__(op, name, value)
        return op

    def relabel(self, layout: Layout) -> "Operator":
        """Same matrix, new layout of equal total dimension."""
        return Operator(self.mat, layout, hermitian=self.hermitian, label=self.label)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state with a tensor layout."""

    amps: np.ndarray
    layout: Layout = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        amps = np.asarray(self.amps, dtype=complex)
        if amps.ndim != 1:
            raise DimensionError(f"state must be a vector, got shape {amps.shape}")
        _check_alloc(amps.size)
        layout = make_layout(self.layout) if self.layout is not None else (("S", amps.size),)
        if layout_dim(layout) != amps.size:
            raise LayoutError(f"layout {layout} does not match dimension {amps.size}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise DimensionError(f"state is not normalized (norm = {norm!r})")
        object.__setattr__(self, "amps", _frozen(amps))
        object.__setattr__(self, "layout", layout)

    @classmethod
    def normalized(cls, amps: ArrayLike, layout: Layout | None = None) -> "StateVector":
        amps = np.asarray(amps, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise DimensionError("cannot normalize the zero vector")
        return cls(amps / norm, layout)

    @classmethod
    def basis(cls, index: int, dim: int, layout: Layout | None = None) -> "StateVector":
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(amps, layout)

    @property
    def dim(self) -> int:
        return self.amps.size


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def tensor_product(a: Operator, b: Operator) -> Operator:
    dim = a.dim * b.dim
    _check_alloc(dim)
    return Operator(np.kron(a.mat, b.mat), a.layout + b.layout)


def tensor_state(a: StateVector, b: StateVector) -> StateVector:
    _check_alloc(a.dim * b.dim)
    return StateVector(np.kron(a.amps, b.amps), a.layout + b.layout)


def embed(op: Operator, layout: Layout, label: str) -> Operator:
    """Place ``op`` on factor ``label`` of ``layout``, identity elsewhere."""
    layout = make_layout(layout)
    labels = [lab for lab, _ in layout]
    if label not in labels:
        raise LayoutError(f"unknown factor label {label!r}; layout has {labels}")
    pos = labels.index(label)
    if layout[pos][1] != op.dim:
        raise DimensionError(f"factor {label!r} has dim {layout[pos][1]}, operator has dim {op.dim}")
    total = layout_dim(layout)
    _check_alloc(total)
    left = layout_dim(layout[:pos])
    right = layout_dim(layout[pos + 1:])
    mat = np.kron(np.kron(np.eye(left), op.mat), np.eye(right))
    return Operator(mat, layout, hermitian=op.hermitian or None)


def commutator(a: Operator, b: Operator) -> Operator:
    a._same_space(b)
    return Operator(a.mat @ b.mat - b.mat @ a.mat, a.layout)


def anticommutator(a: Operator, b: Operator) -> Operator:
    a._same_space(b)
    return Operator(a.mat @ b.mat + b.mat @ a.mat, a.layout)


def hermitian_eig(h: Operator) -> tuple[np.ndarray, Operator]:
    """Eigenvalues (ascending) and the unitary whose columns are eigenvectors."""
    vals, vecs = h.eigh
    return vals.copy(), Operator._trusted(vecs, h.layout, unitary=True)


def _spectral(h: Operator, phases: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    vals, vecs = h.eigh
    if h.is_diagonal:
        return np.diag(phases(np.real(np.diag(h.mat))))
    return (vecs * phases(vals)) @ vecs.conj().T


def unitary_exp(h: Operator, theta: float, sign: int = +1) -> Operator:
    """``exp(sign * i * h * theta / hbar)`` by eigendecomposition.

    ``theta`` carries whatever units make ``h * theta`` an action; the single
    division by hbar happens here.
    """
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    if not h.hermitian:
        raise NotHermitianError("unitary_exp needs a Hermitian generator")
    factor = sign * 1j * theta / settings.hbar()
    mat = _spectral(h, lambda lam: np.exp(factor * lam))
    return Operator._trusted(mat, h.layout, unitary=True)


def apply_to_spectrum(h: Operator, f: Callable[[np.ndarray], np.ndarray]) -> Operator:
    """``f(h)`` for a real scalar function applied eigenvalue-wise."""
    if not h.hermitian:
        raise NotHermitianError("apply_to_spectrum needs a Hermitian operator")
    vals, _ = h.eigh
    fv = np.asarray(f(vals), dtype=float)
    if not np.all(np.isfinite(fv)):
        raise ValueError("function is not finite on the spectrum")
    mat = _spectral(h, lambda lam: np.asarray(f(lam), dtype=complex))
    return Operator(mat, h.layout, hermitian=True)


def as_array(psi: StateVector | ArrayLike) -> np.ndarray:
    return psi.amps if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)


def expectation(psi: StateVector | ArrayLike, o: Operator) -> complex:
    amps = as_array(psi)
    if amps.size != o.dim:
        raise DimensionError(f"state dim {amps.size} does not match operator dim {o.dim}")
    return complex(np.vdot(amps, o.mat @ amps))


def max_abs(mat: np.ndarray | Operator) -> float:
    """Elementwise max-norm, the default residual measure."""
    arr = mat.mat if isinstance(mat, Operator) else np.asarray(mat)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


# Pauli matrices on a bare spin factor.
def pauli(which: str, label: str = "S") -> Operator:
    mats = {
        "x": [[0, 1], [1, 0]],
        "y": [[0, -1j], [1j, 0]],
        "z": [[1, 0], [0, -1]],
        "i": [[1, 0], [0, 1]],
    }
    return Operator(np.array(mats[which.lower()], dtype=complex), ((label, 2),), label=f"sigma_{which}")
