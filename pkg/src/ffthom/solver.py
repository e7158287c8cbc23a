"""Fixed-point solution of the periodic cell problem on the pixel grid.

One iteration alternates between the constitutive law in real space and the
Green operator of the reference medium in Fourier space; the loop stops when
the stress spectrum is in discrete equilibrium. Nonlinear phases are handled
incrementally: the loading path is cut into steps, each solved by the same
iteration with the constitutive update always restarting from the converged
previous step, and the starting strain linearly extrapolated from the two
previous steps.

The macroscopic control is either a prescribed average strain, pinned at the
zero frequency, or a prescribed stress direction, where the average strain
is recomputed each iteration so the average stress converges onto the
prescribed ray.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _fft

from .green_operator import (
    IsotropicModuli,
    compliance_apply,
    green_increment,
    stiffness_apply,
)
from .material import MaterialLaw, PointState, evaluate_stress
from .microstructure import PhaseMap
from .spectral import (
    FrequencyGrid,
    axis_frequencies,
    forward_half,
    hermitian_column_weights,
    inverse_half,
    positive_axis_frequencies,
)
from .tensor_field import (
    C11,
    C12,
    C22,
    FOURIER,
    GridSpec,
    ScalarField,
    SymTensorField,
    double_contract,
    norm,
)

STRAIN = "strain"
STRESS_DIRECTION = "stress_direction"


class ConvergenceError(RuntimeError):
    """Fixed-point iteration failed; carries the last error level."""

    def __init__(self, message, iterations, last_error):
        super().__init__(f"{message} (iterations={iterations}, error={last_error:.3e})")
        self.iterations = iterations
        self.last_error = last_error


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-4
    max_iter: int = 5000
    reference_override: IsotropicModuli | None = None
    # Half-spectrum transforms halve memory and FFT cost; exactly equivalent
    # to the full-complex reference path because every spectral multiplier is
    # even under full frequency negation.
    half_spectrum: bool = True

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("iteration cap must be at least 1")


@dataclass(frozen=True)
class LoadingProgram:
    """Time-discretized loading path.

    Strain mode prescribes the full average strain per step; stress mode
    prescribes a fixed stress direction and steps the loading parameter
    t = E : S0 (the strain component along the direction).
    """

    mode: str
    times: np.ndarray
    strains: np.ndarray | None = None
    direction: np.ndarray | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0.0):
            raise ValueError("loading times must be strictly increasing")
        if times[0] <= 0.0:
            raise ValueError("loading starts from the unloaded state at time 0")
        if self.mode == STRAIN:
            strains = np.asarray(self.strains, dtype=float)
            if strains.shape != (times.size, 4):
                raise ValueError("strain path needs one 4-component strain per time")
            object.__setattr__(self, "strains", strains)
        elif self.mode == STRESS_DIRECTION:
            direction = np.asarray(self.direction, dtype=float)
            if direction.shape != (4,) or not np.any(direction != 0.0):
                raise ValueError("stress direction must be a nonzero 4-component tensor")
            object.__setattr__(self, "direction", direction)
        else:
            raise ValueError(f"unknown loading mode {self.mode!r}")

    @classmethod
    def strain_path(cls, times, strains) -> "LoadingProgram":
        return cls(STRAIN, np.asarray(times, float), strains=np.asarray(strains, float))

    @classmethod
    def stress_path(cls, direction, t_values) -> "LoadingProgram":
        return cls(STRESS_DIRECTION, np.asarray(t_values, float),
                   direction=np.asarray(direction, float))

    def n_steps(self) -> int:
        return self.times.size


def uniaxial_direction(angle_deg: float) -> np.ndarray:
    """Unit uniaxial stress direction n x n for in-plane tension at an angle."""
    a = np.deg2rad(angle_deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([c * c, s * s, 0.0, c * s])


def uniaxial_stress_program(angle_deg: float, t_final: float, n_steps: int) -> LoadingProgram:
    """Transverse uniaxial tension driven by the strain along the tension axis."""
    ts = t_final * np.arange(1, n_steps + 1) / n_steps
    return LoadingProgram.stress_path(uniaxial_direction(angle_deg), ts)


def strain_ramp_program(e_final, n_steps: int) -> LoadingProgram:
    """Proportional strain path from zero to ``e_final`` in uniform steps."""
    fracs = np.arange(1, n_steps + 1) / n_steps
    strains = fracs[:, None] * np.asarray(e_final, dtype=float)[None, :]
    return LoadingProgram.strain_path(fracs, strains)


@dataclass
class StepRecord:
    """Converged macroscopic data of one loading step."""

    time: float
    macro_strain: np.ndarray
    macro_stress: np.ndarray
    iterations: int
    error: float
    max_p: float
    errors: list = field(default_factory=list)


@dataclass
class CellState:
    """Full-field state of the cell after a converged step."""

    strain: SymTensorField
    stress: SymTensorField
    p: ScalarField
    macro_strain: np.ndarray
    macro_stress: np.ndarray
    time: float = 0.0
    prev_strain: np.ndarray | None = None
    prev_time: float | None = None
    history: list = field(default_factory=list)

    @classmethod
    def zero(cls, grid: GridSpec) -> "CellState":
        return cls(
            strain=SymTensorField.zeros(grid),
            stress=SymTensorField.zeros(grid),
            p=ScalarField(grid),
            macro_strain=np.zeros(4),
            macro_stress=np.zeros(4),
        )


def reference_medium(phases) -> IsotropicModuli:
    """Midpoint of the extreme Lame coefficients over the phases.

    This choice gives the best observed convergence rate of the fixed point;
    degenerate phases (voids, rigid inclusions) make the iteration diverge
    and are rejected.
    """
    lams = np.array([law.elastic.lam for law in phases])
    mus = np.array([law.elastic.mu for law in phases])
    if lams.size == 0:
        raise ValueError("need at least one phase")
    if not (np.all(np.isfinite(lams)) and np.all(np.isfinite(mus)) and np.all(mus > 0.0)):
        raise ValueError("contrast infinite: scheme does not converge")
    return IsotropicModuli(0.5 * (lams.min() + lams.max()), 0.5 * (mus.min() + mus.max()))


def macro_strain_update(s0, t, c0: IsotropicModuli, avg_sigma, avg_eps):
    """Average strain consistent with stress-direction control.

    Returns (E, k) with E : S0 = t exactly and Sigma = k S0 the associated
    stress level, from the previous iterate's average stress and strain.
    """
    s0 = np.asarray(s0, dtype=float)
    cs = compliance_apply(c0, s0)
    den = double_contract(cs, s0)
    if den <= 0.0:
        raise ValueError("degenerate loading direction")
    ca = compliance_apply(c0, np.asarray(avg_sigma, dtype=float))
    k = (t + double_contract(ca - avg_eps, s0)) / den
    e_macro = k * cs - ca + avg_eps
    return e_macro, k


def _error_core(sig_hat, x1, x2, weights, n_pixels, denom):
    d1 = x1 * sig_hat[C11] + x2 * sig_hat[C12]
    d2 = x1 * sig_hat[C12] + x2 * sig_hat[C22]
    num = np.sum(weights * (np.abs(d1) ** 2 + np.abs(d2) ** 2))
    return float(np.sqrt(num / n_pixels) / denom)


def convergence_error(sigma_hat: SymTensorField, freq: FrequencyGrid) -> float:
    """Equilibrium error of a stress spectrum.

    Root mean square of the frequency-weighted divergence xi . sigma_hat over
    the grid, normalized by the norm of the average stress.
    """
    if sigma_hat.domain != FOURIER:
        raise ValueError("convergence error expects a fourier-domain field")
    denom = norm(sigma_hat.data[:, 0, 0])
    if denom == 0.0:
        raise ValueError("error metric undefined for zero mean stress")
    x1 = freq.xi1.reshape(-1, 1)
    x2 = freq.xi2.reshape(1, -1)
    return _error_core(sigma_hat.data, x1, x2, 1.0, sigma_hat.grid.n_pixels, denom)


class _SpectralWork:
    """Per-grid transform buffers, frequencies and masks for the hot loop."""

    def __init__(self, grid: GridSpec, half: bool):
        self.grid = grid
        self.half = half
        self.x1 = axis_frequencies(grid.n1, grid.t1).reshape(-1, 1)
        if half:
            self.x2 = positive_axis_frequencies(grid.n2, grid.t2).reshape(1, -1)
            self.weights = hermitian_column_weights(grid.n2).reshape(1, -1)
        else:
            self.x2 = axis_frequencies(grid.n2, grid.t2).reshape(1, -1)
            self.weights = 1.0
        k2 = self.x2.size
        mask = np.zeros((grid.n1, k2), dtype=bool)
        if grid.n1 % 2 == 0:
            mask[grid.n1 // 2, :] = True
        if grid.n2 % 2 == 0:
            mask[:, k2 - 1 if half else grid.n2 // 2] = True
        self.mask = mask

    def fft(self, data):
        if self.half:
            return forward_half(data, self.grid.n_pixels)
        return _fft.fft2(data, axes=(-2, -1)) / self.grid.n_pixels

    def ifft(self, data_hat):
        if self.half:
            return inverse_half(data_hat, (self.grid.n1, self.grid.n2), self.grid.n_pixels)
        return np.ascontiguousarray(
            _fft.ifft2(data_hat * self.grid.n_pixels, axes=(-2, -1)).real)

    def error(self, sig_hat, denom):
        return _error_core(sig_hat, self.x1, self.x2, self.weights,
                           self.grid.n_pixels, denom)

    def green(self, sig_hat, ref: IsotropicModuli):
        return green_increment(sig_hat, self.x1.ravel(), self.x2.ravel(), self.mask, ref)


@dataclass
class CellProblem:
    """Microstructure, phase laws and solver settings bound to one grid."""

    pm: PhaseMap
    laws: tuple
    cfg: SolverConfig
    reference: IsotropicModuli = None
    _masks: list = None
    _work: _SpectralWork = None

    def __post_init__(self):
        if len(self.laws) < self.pm.n_phases:
            raise ValueError(f"{self.pm.n_phases} phases in map but only "
                             f"{len(self.laws)} material laws")
        self.laws = tuple(self.laws[: self.pm.n_phases])
        if self.reference is None:
            self.reference = self.cfg.reference_override or reference_medium(self.laws)
        if self._masks is None:
            if self.pm.n_phases == 1:
                self._masks = [slice(None)]
            else:
                self._masks = [self.pm.phase == pid for pid in range(self.pm.n_phases)]
        if self._work is None:
            self._work = _SpectralWork(self.pm.grid, self.cfg.half_spectrum)

    @property
    def any_plastic(self) -> bool:
        return any(not law.is_elastic for law in self.laws)

    def constitutive(self, state_n: "CellState"):
        """Per-pixel constitutive pass, always restarting from step n."""
        eps_n = state_n.strain.data
        sig_n = state_n.stress.data
        p_n = state_n.p.data

        def stress_of(eps):
            sig = np.empty_like(eps)
            p = p_n.copy()
            for pid, m in enumerate(self._masks):
                law = self.laws[pid]
                if law.is_elastic:
                    sig[:, m] = stiffness_apply(law.elastic, eps[:, m])
                else:
                    sub = evaluate_stress(
                        law,
                        PointState(eps_n[:, m], sig_n[:, m], p_n[m]),
                        eps[:, m],
                    )
                    sig[:, m] = sub.stress
                    p[m] = sub.p
            return sig, p

        return stress_of


def _macro_converged(control, sig_avg, denom, tol):
    if control[0] == STRAIN:
        return True
    s0 = control[1]
    k_par = double_contract(sig_avg, s0) / double_contract(s0, s0)
    resid = sig_avg - k_par * s0
    return norm(resid) <= tol * denom


def _fixed_point(problem: CellProblem, stress_of, eps0, control):
    """Iterate constitutive law and Green operator until equilibrium.

    Returns the state whose stress spectrum passed the convergence test,
    together with the iteration count and the error history.
    """
    work, cfg, ref = problem._work, problem.cfg, problem.reference
    eps = eps0
    sigma, p = stress_of(eps)
    eps_hat = work.fft(eps)
    errors: list[float] = []
    e_min = np.inf
    updates = 0
    while True:
        sig_hat = work.fft(sigma)
        sig_avg = sig_hat[:, 0, 0].real.copy()
        denom = norm(sig_avg)
        if denom > 0.0:
            e = work.error(sig_hat, denom)
            errors.append(e)
            if e <= cfg.tol and _macro_converged(control, sig_avg, denom, cfg.tol):
                break
            if e < e_min:
                e_min = e
            elif updates > 10 and e > 10.0 * e_min:
                raise ConvergenceError("iteration diverging", updates, e)
        if updates >= cfg.max_iter:
            raise ConvergenceError("no convergence within the iteration cap",
                                   updates, errors[-1] if errors else np.inf)
        if control[0] == STRAIN:
            e_macro = control[1]
        else:
            e_macro, _ = macro_strain_update(control[1], control[2], ref,
                                             sig_avg, eps_hat[:, 0, 0].real)
        eps_hat += work.green(sig_hat, ref)
        eps_hat[:, 0, 0] = e_macro
        eps = work.ifft(eps_hat)
        sigma, p = stress_of(eps)
        updates += 1
    macro_eps = eps_hat[:, 0, 0].real.copy() if updates else eps.mean(axis=(1, 2))
    return eps, sigma, p, macro_eps, sig_avg, updates, errors


def solve_step_nonlinear(problem: CellProblem, state_n: CellState, time: float,
                         target) -> CellState:
    """Advance one loading step from the converged state at step n.

    ``target`` is ("strain", E) or ("stress", S0, t). The starting strain is
    extrapolated linearly from the two previous steps when available.
    """
    eps_n = state_n.strain.data
    if state_n.prev_strain is not None:
        ratio = (time - state_n.time) / (state_n.time - state_n.prev_time)
        eps0 = eps_n + ratio * (eps_n - state_n.prev_strain)
    elif target[0] == STRAIN:
        eps0 = eps_n + (np.asarray(target[1], float) - state_n.macro_strain).reshape(4, 1, 1)
    else:
        eps0 = eps_n.copy()

    stress_of = problem.constitutive(state_n)
    eps, sigma, p, macro_eps, macro_sig, n_iter, errors = _fixed_point(
        problem, stress_of, eps0, target)

    grid = problem.pm.grid
    record = StepRecord(time=time, macro_strain=macro_eps, macro_stress=macro_sig,
                        iterations=n_iter, error=errors[-1] if errors else 0.0,
                        max_p=float(p.max()), errors=errors)
    return CellState(
        strain=SymTensorField(grid, eps),
        stress=SymTensorField(grid, sigma),
        p=ScalarField(grid, p),
        macro_strain=macro_eps,
        macro_stress=macro_sig,
        time=time,
        prev_strain=eps_n,
        prev_time=state_n.time,
        history=state_n.history + [record],
    )


def solve_elastic(pm: PhaseMap, laws, e_macro, cfg: SolverConfig | None = None) -> CellState:
    """One-shot strain-controlled solve with purely elastic phases."""
    cfg = cfg or SolverConfig()
    problem = CellProblem(pm, tuple(laws), cfg)
    if problem.any_plastic:
        raise ValueError("solve_elastic requires elastic laws only")
    state0 = CellState.zero(pm.grid)
    return solve_step_nonlinear(problem, state0, 1.0,
                                (STRAIN, np.asarray(e_macro, dtype=float)))


def run_program(pm: PhaseMap, laws, program: LoadingProgram,
                cfg: SolverConfig | None = None) -> CellState:
    """Apply a loading program step by step, accumulating the history."""
    cfg = cfg or SolverConfig()
    problem = CellProblem(pm, tuple(laws), cfg)
    state = CellState.zero(pm.grid)
    for n in range(program.n_steps()):
        if program.mode == STRAIN:
            target = (STRAIN, program.strains[n])
        else:
            target = (STRESS_DIRECTION, program.direction, float(program.times[n]))
        state = solve_step_nonlinear(problem, state, float(program.times[n]), target)
    return state
