"""Effective-property extraction, ensemble statistics, verification oracles.

For a uniaxial stress direction S0 (a unit dyad n x n), the natural scalar
measures of a run are t = E : S0, the normal strain along the tension axis,
and k = Sigma : S0 / (S0 : S0), the uniaxial stress level. At zero degrees
these reduce to E11 and Sigma11. The moduli extracted here are slopes in the
(t, k) plane, which makes tension at any in-plane angle directly comparable.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .green_operator import IsotropicModuli
from .solver import STRESS_DIRECTION, CellState, LoadingProgram
from .tensor_field import double_contract


@dataclass
class OverallCurve:
    """Macroscopic response of one run: per-step averages plus the loading."""

    times: np.ndarray        # (n,) loading parameter, strictly increasing
    strains: np.ndarray      # (n, 4)
    stresses: np.ndarray     # (n, 4)
    mode: str
    direction: np.ndarray | None  # stress mode only
    max_p: np.ndarray        # (n,) largest cumulated plastic strain per step

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("curve loading parameter must be strictly increasing")

    @classmethod
    def from_state(cls, state: CellState, program: LoadingProgram) -> "OverallCurve":
        recs = state.history
        return cls(
            times=np.array([r.time for r in recs]),
            strains=np.array([r.macro_strain for r in recs]),
            stresses=np.array([r.macro_stress for r in recs]),
            mode=program.mode,
            direction=None if program.mode != STRESS_DIRECTION else program.direction,
            max_p=np.array([r.max_p for r in recs]),
        )

    def axial_strain(self) -> np.ndarray:
        """Loading-direction strain measure per step (E11 at zero degrees)."""
        s0 = _require_uniaxial(self)
        return self.strains @ np.array([s0[0], s0[1], s0[2], 2.0 * s0[3]])

    def axial_stress(self) -> np.ndarray:
        """Uniaxial stress level per step (Sigma11 at zero degrees)."""
        s0 = _require_uniaxial(self)
        w = np.array([s0[0], s0[1], s0[2], 2.0 * s0[3]])
        return (self.stresses @ w) / double_contract(s0, s0)


def _require_uniaxial(curve: "OverallCurve") -> np.ndarray:
    if curve.mode != STRESS_DIRECTION:
        raise ValueError("extraction requires a uniaxial stress-direction run")
    s0 = curve.direction
    # A uniaxial dyad n x n satisfies S0:S0 = (tr S0)^2.
    tr = s0[0] + s0[1] + s0[2]
    if abs(double_contract(s0, s0) - tr * tr) > 1e-10 * double_contract(s0, s0):
        raise ValueError("loading direction is not uniaxial")
    return s0


def young_modulus(curve: OverallCurve) -> float:
    """Initial slope of the uniaxial response, k1 / t1.

    The first step must still be elastic (no plastic strain accumulated);
    otherwise the slope under-reports the stiffness.
    """
    _require_uniaxial(curve)
    if curve.max_p[0] > 0.0:
        raise ValueError("first loading step is not elastic")
    return float(curve.axial_stress()[0] / curve.axial_strain()[0])


def flow_stress(curve: OverallCurve) -> float:
    """Uniaxial stress at the final step of an ideally plastic run.

    Warns when the curve is still rising faster than a plateau at the end
    (final slope above 2 percent of the initial slope).
    """
    _require_uniaxial(curve)
    k = curve.axial_stress()
    t = curve.axial_strain()
    if k.size >= 2:
        slope_end = (k[-1] - k[-2]) / (t[-1] - t[-2])
        slope_0 = k[0] / t[0]
        if slope_end > 0.02 * slope_0:
            warnings.warn("response has not reached a plateau; flow stress is a lower bound",
                          stacklevel=2)
    return float(k[-1])


def hardening_modulus(curve: OverallCurve) -> float:
    """Least-squares slope dk/dt over the final fifth of the loading range."""
    _require_uniaxial(curve)
    t = curve.axial_strain()
    k = curve.axial_stress()
    window = t >= t[-1] - 0.2 * (t[-1] - t[0])
    if window.sum() < 4:
        raise ValueError("need at least 4 points in the final 20% of the curve")
    return float(np.polyfit(t[window], k[window], 1)[0])


@dataclass(frozen=True)
class EnsembleStats:
    n_samples: int
    mean: float
    std_dev: float
    error_on_mean: float


def ensemble(values) -> EnsembleStats:
    """Sample mean, standard deviation and relative error on the mean."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("ensemble statistics need at least two samples")
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    err = std / (mean * np.sqrt(values.size)) if mean > 0.0 else float("nan")
    return EnsembleStats(n_samples=values.size, mean=mean, std_dev=std, error_on_mean=err)


def laminate_oracle(mu1: float, mu2: float, fractions, e12: float) -> np.ndarray:
    """Exact per-layer shear strain of a two-phase laminate under shear.

    Layers normal to x1 under an average in-plane shear e12: the shear
    stress is uniform and the per-layer strain is inversely proportional to
    the layer shear modulus.
    """
    f1, f2 = fractions
    sig12 = e12 / (f1 / (2.0 * mu1) + f2 / (2.0 * mu2))
    return np.array([sig12 / (2.0 * mu1), sig12 / (2.0 * mu2)])


# ---------------------------------------------------------------------------
# Dilute circular fiber in a matrix shell, in-plane shear (plane strain).
# ---------------------------------------------------------------------------

def _mode2_coeffs(lam: float, mu: float) -> dict:
    """Radial profiles of the four mode-2 displacement solutions r^3, r, 1/r, 1/r^3.

    Each entry maps a power k to (f, g, sig_rr, sig_rt) evaluated per unit
    coefficient at radius r: u_r = f(r) sin 2theta, u_theta = g(r) cos 2theta.
    """
    ka = (2.0 * lam + 3.0 * mu) / lam
    kc = mu / (lam + 2.0 * mu)

    def term_a(r):
        return (r**3, ka * r**3,
                (lam * (4.0 - 2.0 * ka) + 6.0 * mu) * r**2,
                mu * (2.0 + 2.0 * ka) * r**2)

    def term_b(r):
        return (r, r, 2.0 * mu * np.ones_like(r), 2.0 * mu * np.ones_like(r))

    def term_c(r):
        return (1.0 / r, kc / r,
                (-2.0 * lam * kc - 2.0 * mu) / r**2,
                mu * (2.0 - 2.0 * kc) / r**2)

    def term_d(r):
        return (1.0 / r**3, -1.0 / r**3, -6.0 * mu / r**4, 6.0 * mu / r**4)

    return {"a": term_a, "b": term_b, "c": term_c, "d": term_d}


@dataclass
class DiluteFiberSolution:
    """Closed-form shear field of a circular fiber in a finite matrix shell."""

    fiber: IsotropicModuli
    matrix: IsotropicModuli
    a: float
    b: float
    e12: float
    coeffs: np.ndarray  # (A1, B1, A2, B2, C2, D2)

    def _profiles(self, r, inside):
        terms = _mode2_coeffs(*((self.fiber.lam, self.fiber.mu) if inside
                                else (self.matrix.lam, self.matrix.mu)))
        a1, b1, a2, b2, c2, d2 = self.coeffs
        if inside:
            parts = [(a1, terms["a"]), (b1, terms["b"])]
        else:
            parts = [(a2, terms["a"]), (b2, terms["b"]), (c2, terms["c"]), (d2, terms["d"])]
        out = None
        for coeff, fn in parts:
            vals = fn(np.asarray(r, dtype=float))
            scaled = tuple(coeff * v for v in vals)
            out = scaled if out is None else tuple(o + s for o, s in zip(out, scaled))
        return out

    def shear_strain(self, x1, x2) -> np.ndarray:
        """Cartesian strain component eps12 at points relative to the center."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        r = np.hypot(x1, x2)
        theta = np.arctan2(x2, x1)
        out = np.empty(np.broadcast(x1, x2).shape)
        flat_r, flat_t, flat_o = (np.atleast_1d(r).ravel(), np.atleast_1d(theta).ravel(),
                                  out.reshape(-1))
        for i, (ri, ti) in enumerate(zip(flat_r, flat_t)):
            if ri < 1e-12 * self.a:
                flat_o[i] = self.coeffs[1]  # strain is uniform shear at the center
            else:
                flat_o[i] = self._eps12_point(ri, ti, ri <= self.a)
        return out

    def _eps12_point(self, r, theta, inside) -> float:
        lam, mu = ((self.fiber.lam, self.fiber.mu) if inside
                   else (self.matrix.lam, self.matrix.mu))
        ka = (2.0 * lam + 3.0 * mu) / lam
        kc = mu / (lam + 2.0 * mu)
        a1, b1, a2, b2, c2, d2 = self.coeffs
        if inside:
            use = ((a1, 3.0, ka), (b1, 1.0, 1.0))
        else:
            use = ((a2, 3.0, ka), (b2, 1.0, 1.0), (c2, -1.0, kc), (d2, -3.0, -1.0))
        err = ett = ert = 0.0
        for coeff, k, grat in use:
            f = coeff * r**k
            g = grat * coeff * r**k
            fp = k * f / r
            gp = k * g / r
            err += fp
            ett += (f - 2.0 * g) / r
            ert += 0.5 * (2.0 * f / r + gp - g / r)
        s2, c2t = np.sin(2.0 * theta), np.cos(2.0 * theta)
        e_rr = err * s2
        e_tt = ett * s2
        e_rt = ert * c2t
        c, s = np.cos(theta), np.sin(theta)
        # rotate the polar components into cartesian axes
        return float((c * c - s * s) * e_rt + c * s * (e_rr - e_tt))

    def continuity_residuals(self) -> np.ndarray:
        """Jumps of (u_r, u_theta, sigma_rr, sigma_rtheta) across r = a."""
        fin = self._profiles(np.asarray(self.a), True)
        mout = self._profiles(np.asarray(self.a), False)
        return np.array([float(i - o) for i, o in zip(fin, mout)])


def dilute_fiber_oracle(fiber: IsotropicModuli, matrix: IsotropicModuli,
                        a: float, b: float, e12: float) -> DiluteFiberSolution:
    """Solve the fiber-in-shell shear problem for the displacement coefficients.

    The fiber keeps only the regular terms (r^3, r); the matrix carries all
    four. Displacement and traction continuity at r = a plus the affine
    boundary condition u = E . x at r = b close the 6x6 system.
    """
    if not 0.0 < a < b:
        raise ValueError("radii must satisfy 0 < a < b")
    if abs(fiber.lam) < 1e-12 * fiber.mu or abs(matrix.lam) < 1e-12 * matrix.mu:
        raise ValueError("degenerate moduli: the r^3 mode is parameterized by 1/lam")
    tf = _mode2_coeffs(fiber.lam, fiber.mu)
    tm = _mode2_coeffs(matrix.lam, matrix.mu)
    ra = np.asarray(a, dtype=float)
    rb = np.asarray(b, dtype=float)

    fa = {k: fn(ra) for k, fn in tf.items()}
    ma = {k: fn(ra) for k, fn in tm.items()}
    mb = {k: fn(rb) for k, fn in tm.items()}

    sys = np.zeros((6, 6))
    rhs = np.zeros(6)
    # rows: u_r, u_theta, sigma_rr, sigma_rtheta continuity at a
    for row in range(4):
        sys[row, 0] = fa["a"][row]
        sys[row, 1] = fa["b"][row]
        sys[row, 2] = -ma["a"][row]
        sys[row, 3] = -ma["b"][row]
        sys[row, 4] = -ma["c"][row]
        sys[row, 5] = -ma["d"][row]
    # rows: u_r = e12 b, u_theta = e12 b at the shell boundary
    for row, comp in ((4, 0), (5, 1)):
        sys[row, 2] = mb["a"][comp]
        sys[row, 3] = mb["b"][comp]
        sys[row, 4] = mb["c"][comp]
        sys[row, 5] = mb["d"][comp]
        rhs[row] = e12 * b
    try:
        coeffs = np.linalg.solve(sys, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate moduli: fiber-shell system is singular") from exc
    return DiluteFiberSolution(fiber=fiber, matrix=matrix, a=a, b=b, e12=e12,
                               coeffs=coeffs)


def voigt_reuss_young_bounds(laws, fractions) -> tuple[float, float]:
    """Rigorous bracketing of the uniaxial Young's modulus of a mixture.

    Lower bound: harmonic mean of the phase moduli (uniform-stress bound on
    the 1111 compliance). Upper bound: Young's modulus of the arithmetic
    Lame-coefficient mixture (uniform-strain bound).
    """
    fractions = np.asarray(fractions, dtype=float)
    youngs = np.array([law.elastic.young for law in laws])
    lower = 1.0 / np.sum(fractions / youngs)
    mix = IsotropicModuli(
        float(np.sum(fractions * [law.elastic.lam for law in laws])),
        float(np.sum(fractions * [law.elastic.mu for law in laws])),
    )
    return float(lower), mix.young


def write_curve_csv(curve: OverallCurve, path) -> None:
    """Emit the macroscopic curve as CSV, one converged step per row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "E11", "E22", "E33", "E12",
                         "S11", "S22", "S33", "S12"])
        for i in range(curve.times.size):
            row = [i + 1] + [f"{v:.12g}" for v in curve.strains[i]] \
                + [f"{v:.12g}" for v in curve.stresses[i]]
            writer.writerow(row)
