"""Shared material data and small builders for the test suite."""

import numpy as np

from ffthom import (
    GridSpec,
    HardeningCurve,
    IsotropicModuli,
    MaterialLaw,
    PhaseMap,
)

# Two-phase data used throughout: a compliant elastoplastic matrix and stiff
# elastic fibers. Stress unit is MPa.
MATRIX_YOUNG = 68900.0
MATRIX_POISSON = 0.35
FIBER_YOUNG = 400000.0
FIBER_POISSON = 0.23
YIELD_STRESS = 68.9
HARDENING = 1171.0

MATRIX = IsotropicModuli.from_young_poisson(MATRIX_YOUNG, MATRIX_POISSON)
FIBER = IsotropicModuli.from_young_poisson(FIBER_YOUNG, FIBER_POISSON)

MATRIX_ELASTIC = MaterialLaw(MATRIX)
FIBER_ELASTIC = MaterialLaw(FIBER)
MATRIX_PERFECT = MaterialLaw(MATRIX, HardeningCurve.perfect(YIELD_STRESS))
MATRIX_LINEAR = MaterialLaw(MATRIX, HardeningCurve.linear(YIELD_STRESS, HARDENING))


def lame_from_young(young, poisson):
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    return lam, mu


def laminate_map(n=32):
    """Two equal layers normal to x1."""
    grid = GridSpec(n, n)
    phase = np.zeros((n, n), dtype=np.int64)
    phase[n // 2:, :] = 1
    return PhaseMap(grid, phase)


def checkerboard_map(n=16):
    grid = GridSpec(n, n)
    i = np.arange(n)
    phase = ((i[:, None] // (n // 2) + i[None, :] // (n // 2)) % 2).astype(np.int64)
    return PhaseMap(grid, phase)
