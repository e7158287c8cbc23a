"""Symmetric tensor fields and scalar fields on a periodic pixel grid.

Kinematics are generalized plane strain: in-plane displacements plus a
uniform axial strain, so every symmetric second-order tensor carries four
independent components, stored in the order (11, 22, 33, 12). The out-of-plane
shears 13 and 23 are identically zero and are not stored. Components are
plain (non-engineering); the off-diagonal multiplicity lives in
:func:`double_contract` and in the stiffness application.

A single tensor is a plain numpy array of shape ``(4,)``; a field stacks the
four components first, shape ``(4, n1, n2)``. All reductions and per-point
maps broadcast over trailing axes, so they work unchanged on single tensors
and on whole fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Component indices in the 4-vector representation.
C11, C22, C33, C12 = 0, 1, 2, 3
N_COMPONENTS = 4

REAL = "real"
FOURIER = "fourier"

# Second-order identity in the 4-component representation.
IDENTITY = np.array([1.0, 1.0, 1.0, 0.0])


@dataclass(frozen=True)
class GridSpec:
    """Regular periodic pixel grid: pixel counts and cell periods.

    Pixel (i1, i2) sits at ((i1-1)*t1/n1, (i2-1)*t2/n2) for 1-based logical
    indices; storage is 0-based row-major over (i1, i2).
    """

    n1: int
    n2: int
    t1: float = 1.0
    t2: float = 1.0

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError("grid requires at least 2 pixels per direction")
        if self.t1 <= 0.0 or self.t2 <= 0.0:
            raise ValueError("cell periods must be positive")

    @property
    def n_pixels(self) -> int:
        return self.n1 * self.n2

    @property
    def dx1(self) -> float:
        return self.t1 / self.n1

    @property
    def dx2(self) -> float:
        return self.t2 / self.n2

    def x1(self) -> np.ndarray:
        """Pixel coordinates along the first axis."""
        return np.arange(self.n1) * self.dx1

    def x2(self) -> np.ndarray:
        return np.arange(self.n2) * self.dx2


def sym_tensor(c11=0.0, c22=0.0, c33=0.0, c12=0.0) -> np.ndarray:
    """Build a single symmetric tensor as a (4,) array."""
    return np.array([c11, c22, c33, c12], dtype=float)


def as_matrix(a) -> np.ndarray:
    """Expand a 4-component tensor to its full 3x3 matrix."""
    a = np.asarray(a)
    return np.array([[a[C11], a[C12], 0.0],
                     [a[C12], a[C22], 0.0],
                     [0.0, 0.0, a[C33]]])


def from_matrix(m) -> np.ndarray:
    """Collapse a 3x3 symmetric matrix (zero 13/23) to 4 components."""
    m = np.asarray(m)
    return np.array([m[0, 0], m[1, 1], m[2, 2], m[0, 1]])


def trace(a) -> np.ndarray:
    return a[C11] + a[C22] + a[C33]


def deviator(a) -> np.ndarray:
    dev = np.array(a, dtype=a.dtype if hasattr(a, "dtype") else float, copy=True)
    dev[:3] -= trace(a) / 3.0
    return dev


def double_contract(a, b):
    """Full contraction a:b with the off-diagonal counted twice."""
    return a[C11] * b[C11] + a[C22] * b[C22] + a[C33] * b[C33] + 2.0 * a[C12] * b[C12]


def norm(a):
    """Frobenius norm induced by :func:`double_contract` (complex-safe)."""
    aa = np.abs(np.asarray(a))
    return np.sqrt(double_contract(aa, aa))


def von_mises(sig):
    """Equivalent stress sqrt(3/2 s:s) of the deviator s of ``sig``."""
    s = deviator(np.asarray(sig, dtype=float))
    return np.sqrt(1.5 * double_contract(s, s))


def equivalent_strain(eps):
    """Equivalent strain sqrt(2/3 e:e) of the strain deviator."""
    e = deviator(np.asarray(eps, dtype=float))
    return np.sqrt(2.0 / 3.0 * double_contract(e, e))


@dataclass
class SymTensorField:
    """Per-pixel symmetric tensor field, in the real or Fourier domain."""

    grid: GridSpec
    data: np.ndarray  # (4, n1, n2); float in real domain, complex in fourier
    domain: str = REAL

    def __post_init__(self):
        expected = (N_COMPONENTS, self.grid.n1, self.grid.n2)
        if self.data.shape != expected:
            raise ValueError(f"field data must have shape {expected}, got {self.data.shape}")
        if self.domain not in (REAL, FOURIER):
            raise ValueError(f"unknown domain tag {self.domain!r}")
        if self.domain == REAL and np.iscomplexobj(self.data):
            raise ValueError("real-domain field holds complex data")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SymTensorField":
        return cls(grid, np.zeros((N_COMPONENTS, grid.n1, grid.n2)))

    @classmethod
    def constant(cls, grid: GridSpec, value) -> "SymTensorField":
        data = np.zeros((N_COMPONENTS, grid.n1, grid.n2))
        data += np.asarray(value, dtype=float).reshape(N_COMPONENTS, 1, 1)
        return cls(grid, data)


@dataclass
class ScalarField:
    """Nonnegative per-pixel scalar field (cumulated plastic strain)."""

    grid: GridSpec
    data: np.ndarray = None

    def __post_init__(self):
        if self.data is None:
            self.data = np.zeros((self.grid.n1, self.grid.n2))
        if self.data.shape != (self.grid.n1, self.grid.n2):
            raise ValueError("scalar data shape does not match grid")
        if np.any(self.data < 0.0):
            raise ValueError("scalar field values must be nonnegative")


def field_average(f: SymTensorField) -> np.ndarray:
    """Volume average of a real-domain tensor field, as a (4,) tensor."""
    if f.domain != REAL:
        raise ValueError("average requires real-domain field")
    return f.data.mean(axis=(1, 2))
