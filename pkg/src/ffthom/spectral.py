"""Discrete Fourier transforms of tensor fields and the frequency grid.

The forward transform divides by the pixel count, so the zero coefficient of
a field is its volume average. For an even axis of n pixels the frequencies
run from (-n/2+1)/t to +n/2/t: the highest frequency appears exactly once,
with a positive sign, which is where the Green operator needs special
handling (see :mod:`ffthom.green_operator`).

The reference transforms are full complex-to-complex. A half-spectrum
(real-to-complex) variant exploiting the Hermitian symmetry of real fields
is provided for the solver hot loop; it halves memory and transform cost and
is exactly equivalent because every spectral multiplier applied by the
solver is even under full frequency negation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from .tensor_field import FOURIER, REAL, GridSpec, SymTensorField


def axis_frequencies(n: int, t: float) -> np.ndarray:
    """Frequencies of one axis in FFT storage order.

    Even n yields {0, 1, ..., n/2, -n/2+1, ..., -1}/t with the highest
    frequency +n/(2t) appearing once; odd n yields the symmetric set.
    """
    k = np.arange(n)
    k = np.where(k <= n // 2, k, k - n)
    return k / t


def positive_axis_frequencies(n: int, t: float) -> np.ndarray:
    """Frequencies kept by the half-spectrum storage: 0 .. floor(n/2), over t."""
    return np.arange(n // 2 + 1) / t


@dataclass(frozen=True)
class FrequencyGrid:
    """Per-axis discrete frequencies matching the FFT storage layout."""

    grid: GridSpec
    xi1: np.ndarray
    xi2: np.ndarray


def frequency_grid(grid: GridSpec) -> FrequencyGrid:
    return FrequencyGrid(
        grid=grid,
        xi1=axis_frequencies(grid.n1, grid.t1),
        xi2=axis_frequencies(grid.n2, grid.t2),
    )


@dataclass(frozen=True)
class HighestFrequencyMask:
    """Flags frequencies where an even axis attains its extreme +n/(2t)."""

    grid: GridSpec
    flags: np.ndarray  # (n1, n2) bool


def highest_frequency_mask(grid: GridSpec) -> HighestFrequencyMask:
    flags = np.zeros((grid.n1, grid.n2), dtype=bool)
    if grid.n1 % 2 == 0:
        flags[grid.n1 // 2, :] = True
    if grid.n2 % 2 == 0:
        flags[:, grid.n2 // 2] = True
    return HighestFrequencyMask(grid=grid, flags=flags)


def forward(f: SymTensorField) -> SymTensorField:
    """Component-wise 2D DFT, normalized so the zero coefficient is the average."""
    if f.domain != REAL:
        raise ValueError("forward transform requires a real-domain field")
    data = _fft.fft2(f.data, axes=(-2, -1)) / f.grid.n_pixels
    return SymTensorField(f.grid, data, domain=FOURIER)


def inverse(f: SymTensorField, imag_tol: float = 1e-8) -> SymTensorField:
    """Inverse DFT of a Hermitian spectrum back to a real field.

    The imaginary residue left by rounding is discarded after checking it
    stays below ``imag_tol`` of the field norm; a larger residue means the
    spectrum was not Hermitian and signals an upstream bug.
    """
    if f.domain != FOURIER:
        raise ValueError("inverse transform requires a fourier-domain field")
    out = _fft.ifft2(f.data * f.grid.n_pixels, axes=(-2, -1))
    total = np.linalg.norm(out)
    if total > 0.0 and np.linalg.norm(out.imag) > imag_tol * total:
        raise ValueError("non-Hermitian spectrum")
    return SymTensorField(f.grid, np.ascontiguousarray(out.real), domain=REAL)


# ---------------------------------------------------------------------------
# Half-spectrum (real-to-complex) variant used by the solver hot loop.
# ---------------------------------------------------------------------------

def hermitian_column_weights(n2: int) -> np.ndarray:
    """Multiplicity of each stored column when summing over the full spectrum.

    Columns 0 and (for even n2) n2/2 are their own mirror images and count
    once; every other stored column stands for itself and its conjugate.
    """
    w = np.full(n2 // 2 + 1, 2.0)
    w[0] = 1.0
    if n2 % 2 == 0:
        w[-1] = 1.0
    return w


def forward_half(data: np.ndarray, n_pixels: int) -> np.ndarray:
    """rfft2 of a (4, n1, n2) real array, average-normalized."""
    return _fft.rfft2(data, axes=(-2, -1)) / n_pixels


def inverse_half(data_hat: np.ndarray, shape: tuple, n_pixels: int) -> np.ndarray:
    """Inverse of :func:`forward_half` back to a (4, n1, n2) real array."""
    return _fft.irfft2(data_hat * n_pixels, s=shape, axes=(-2, -1))
