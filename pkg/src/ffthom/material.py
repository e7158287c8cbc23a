"""Per-pixel constitutive laws: linear elasticity and J2 plasticity.

The plastic branch integrates J2 flow theory with isotropic hardening by an
implicit radial return: the trial stress is the elastic predictor from the
converged previous step, and when it exceeds the current yield stress the
deviator is scaled back onto the yield surface. The scheme is exact for
proportional deviatoric loading, so step subdivision does not change the
result under linear hardening.

All operations broadcast over trailing axes: states may hold a single point
(shape ``(4,)`` tensors, scalar p) or whole pixel fields (``(4, n1, n2)``,
``(n1, n2)``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .green_operator import IsotropicModuli, apply_isotropic_stiffness
from .tensor_field import deviator, double_contract, trace

PERFECT = "perfect"
LINEAR = "linear"
TABULATED = "tabulated"


@dataclass(frozen=True)
class HardeningCurve:
    """Yield stress as a function of cumulated plastic strain, sigma_y(p).

    Nondecreasing by construction (no softening), so h(p) = sigma_y(p) + 3 mu p
    is strictly increasing and invertible for any mu > 0.
    """

    kind: str
    sigma0: float
    hardening: float = 0.0
    p_knots: np.ndarray = None
    sigma_knots: np.ndarray = None

    def __post_init__(self):
        if self.kind not in (PERFECT, LINEAR, TABULATED):
            raise ValueError(f"unknown hardening kind {self.kind!r}")
        if self.sigma0 <= 0.0:
            raise ValueError("initial yield stress must be positive")
        if self.kind == LINEAR and self.hardening < 0.0:
            raise ValueError("softening (negative hardening modulus) is not supported")
        if self.kind == TABULATED:
            p = np.asarray(self.p_knots, dtype=float)
            s = np.asarray(self.sigma_knots, dtype=float)
            if p.ndim != 1 or p.shape != s.shape or p.size < 2:
                raise ValueError("hardening table needs matching 1D knot arrays, >= 2 points")
            if p[0] != 0.0:
                raise ValueError("hardening table must start at p = 0")
            if np.any(np.diff(p) <= 0.0):
                raise ValueError("hardening table abscissae must be strictly increasing")
            if np.any(np.diff(s) < 0.0):
                raise ValueError("softening hardening table is not supported")
            object.__setattr__(self, "p_knots", p)
            object.__setattr__(self, "sigma_knots", s)

    @classmethod
    def perfect(cls, sigma0: float) -> "HardeningCurve":
        return cls(PERFECT, sigma0)

    @classmethod
    def linear(cls, sigma0: float, hardening: float) -> "HardeningCurve":
        if hardening == 0.0:
            return cls(PERFECT, sigma0)
        return cls(LINEAR, sigma0, hardening)

    @classmethod
    def tabulated(cls, p_knots, sigma_knots) -> "HardeningCurve":
        s = np.asarray(sigma_knots, dtype=float)
        return cls(TABULATED, float(s[0]), p_knots=np.asarray(p_knots, dtype=float),
                   sigma_knots=s)

    def yield_stress(self, p):
        """sigma_y(p); beyond the last table knot the final segment slope extends."""
        p = np.asarray(p, dtype=float)
        if self.kind == PERFECT:
            return np.broadcast_to(self.sigma0, p.shape).copy() if p.ndim else self.sigma0
        if self.kind == LINEAR:
            return self.sigma0 + self.hardening * p
        pk, sk = self.p_knots, self.sigma_knots
        out = np.interp(p, pk, sk)
        slope = (sk[-1] - sk[-2]) / (pk[-1] - pk[-2])
        out = np.where(p > pk[-1], sk[-1] + slope * (p - pk[-1]), out)
        return out if out.ndim else float(out)


def h_inverse(curve: HardeningCurve, mu: float, target):
    """Invert h(p) = sigma_y(p) + 3 mu p, i.e. return p with h(p) = target.

    Closed form for the perfect and linear kinds; piecewise-linear
    interpolation on the table knots otherwise. Targets beyond the table
    extrapolate along the final segment slope with a warning.
    """
    target = np.asarray(target, dtype=float)
    if np.any(target < curve.sigma0 * (1.0 - 1e-12)):
        raise ValueError("below initial yield")
    if curve.kind == PERFECT:
        p = (target - curve.sigma0) / (3.0 * mu)
    elif curve.kind == LINEAR:
        p = (target - curve.sigma0) / (curve.hardening + 3.0 * mu)
    else:
        pk = curve.p_knots
        hk = curve.sigma_knots + 3.0 * mu * pk
        p = np.interp(target, hk, pk)
        if np.any(target > hk[-1]):
            warnings.warn("hardening table exceeded; extrapolating final segment",
                          stacklevel=2)
            slope = (pk[-1] - pk[-2]) / (hk[-1] - hk[-2])
            p = np.where(target > hk[-1], pk[-1] + slope * (target - hk[-1]), p)
    p = np.maximum(p, 0.0)
    return p if p.ndim else float(p)


@dataclass(frozen=True)
class MaterialLaw:
    """One phase: isotropic elasticity, optionally with a J2 yield curve."""

    elastic: IsotropicModuli
    plastic: HardeningCurve | None = None

    @property
    def is_elastic(self) -> bool:
        return self.plastic is None


@dataclass
class PointState:
    """Converged mechanical state: strain, stress and cumulated plastic strain."""

    strain: np.ndarray
    stress: np.ndarray
    p: np.ndarray

    @classmethod
    def zero(cls, shape=()) -> "PointState":
        return cls(np.zeros((4,) + shape), np.zeros((4,) + shape), np.zeros(shape))


def radial_return(law: MaterialLaw, state_n: PointState, strain_np1) -> PointState:
    """Implicit J2 update from the converged state at step n to strain_np1.

    Elastic trial first; if its equivalent stress exceeds the current yield
    stress, the plastic multiplier comes from inverting h(p), and the stress
    deviator is the trial deviator scaled back onto the yield surface. The
    pressure follows the elastic volumetric response throughout.
    """
    if law.plastic is None:
        raise ValueError("radial return requires a plastic law")
    curve = law.plastic
    mu = law.elastic.mu
    strain_np1 = np.asarray(strain_np1, dtype=float)

    d_eps = strain_np1 - state_n.strain
    trial = state_n.stress + apply_isotropic_stiffness(law.elastic.lam, mu, d_eps)
    tr_trial = trace(trial)
    s_trial = deviator(trial)
    q_trial = np.sqrt(1.5 * double_contract(s_trial, s_trial))

    yield_n = curve.yield_stress(state_n.p)
    plastic = q_trial >= yield_n
    # h_inverse is evaluated on a clipped target so elastic points stay valid;
    # their result is discarded by the select below.
    target = np.maximum(q_trial + 3.0 * mu * state_n.p, curve.sigma0)
    p_new = np.where(plastic, h_inverse(curve, mu, target), state_n.p)
    scale = np.where(plastic,
                     curve.yield_stress(p_new) / np.where(q_trial > 0.0, q_trial, 1.0),
                     1.0)
    stress = scale * s_trial
    stress[:3] += tr_trial / 3.0
    return PointState(strain=strain_np1, stress=stress, p=np.asarray(p_new, dtype=float))


def evaluate_stress(law: MaterialLaw, state_n: PointState, strain_np1) -> PointState:
    """Constitutive update: total linear elasticity, or the radial return."""
    if law.plastic is None:
        strain_np1 = np.asarray(strain_np1, dtype=float)
        stress = apply_isotropic_stiffness(law.elastic.lam, law.elastic.mu, strain_np1)
        return PointState(strain=strain_np1, stress=stress, p=np.asarray(state_n.p).copy())
    return radial_return(law, state_n, strain_np1)
