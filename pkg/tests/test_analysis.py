import numpy as np
import pytest

from ffthom import (
    GridSpec,
    LoadingProgram,
    OverallCurve,
    PhaseMap,
    dilute_fiber_oracle,
    ensemble,
    flow_stress,
    hardening_modulus,
    laminate_oracle,
    run_program,
    uniaxial_stress_program,
    write_curve_csv,
    young_modulus,
)
from ffthom.analysis import DiluteFiberSolution, _mode2_coeffs

from helpers import (
    FIBER,
    HARDENING,
    MATRIX,
    MATRIX_ELASTIC,
    MATRIX_LINEAR,
    MATRIX_PERFECT,
    YIELD_STRESS,
)


def homogeneous_map(n=8):
    return PhaseMap(GridSpec(n, n), np.zeros((n, n), dtype=np.int64))


class TestEnsemble:
    def test_constant_samples(self):
        s = ensemble([1.0, 1.0, 1.0])
        assert (s.mean, s.std_dev, s.error_on_mean) == (1.0, 0.0, 0.0)

    def test_hand_values(self):
        s = ensemble([1.0, 3.0])
        assert s.mean == pytest.approx(2.0)
        assert s.std_dev == pytest.approx(np.sqrt(2.0))
        assert s.error_on_mean == pytest.approx(0.5)

    def test_permutation_invariant(self):
        a = ensemble([3.0, 1.0, 4.0, 1.5])
        b = ensemble([1.5, 4.0, 3.0, 1.0])
        assert a == b

    def test_too_few(self):
        with pytest.raises(ValueError, match="two samples"):
            ensemble([1.0])


class TestLaminateOracle:
    def test_equal_moduli(self):
        out = laminate_oracle(3.0, 3.0, (0.4, 0.6), 0.02)
        assert np.allclose(out, 0.02)

    def test_reference_materials(self):
        out = laminate_oracle(MATRIX.mu, FIBER.mu, (0.5, 0.5), 1.0)
        assert out[0] == pytest.approx(1.7287, abs=5e-5)
        assert out[1] == pytest.approx(0.2713, abs=5e-5)

    def test_single_phase_limit(self):
        out = laminate_oracle(MATRIX.mu, FIBER.mu, (1.0, 0.0), 0.01)
        assert out[0] == pytest.approx(0.01, rel=1e-12)


class TestDiluteFiberOracle:
    def test_homogeneous_gives_uniform_shear(self):
        e12 = 0.005
        sol = dilute_fiber_oracle(MATRIX, MATRIX, 1.0, 16.0, e12)
        # only the affine coefficient survives
        assert sol.coeffs[1] == pytest.approx(e12, rel=1e-10)
        others = np.delete(sol.coeffs, 1)
        assert np.abs(others).max() < 1e-12 * e12
        pts = np.linspace(0.1, 15.0, 30)
        assert np.allclose(sol.shear_strain(pts, np.zeros_like(pts)), e12, rtol=1e-9)

    def test_continuity_residuals(self):
        sol = dilute_fiber_oracle(FIBER, MATRIX, 1.0, 16.0, 0.005)
        res = sol.continuity_residuals()
        # residuals are jumps in displacement and traction; compare to the
        # magnitudes of the matched quantities themselves
        inner = sol._profiles(np.asarray(1.0), True)
        scale = np.array([abs(v) for v in inner])
        assert np.all(np.abs(res) <= 1e-10 * np.maximum(scale, 1e-30))

    def test_boundary_condition(self):
        e12 = 0.004
        sol = dilute_fiber_oracle(FIBER, MATRIX, 1.0, 16.0, e12)
        f, g, _, _ = sol._profiles(np.asarray(16.0), False)
        assert f == pytest.approx(e12 * 16.0, rel=1e-10)
        assert g == pytest.approx(e12 * 16.0, rel=1e-10)

    def test_strain_matches_numerical_derivative(self):
        # independent check of the strain evaluator: differentiate the
        # displacement field numerically and rotate to cartesian axes
        e12 = 0.005
        sol = dilute_fiber_oracle(FIBER, MATRIX, 1.0, 16.0, e12)
        h = 1e-6

        def disp(x1, x2):
            r = np.hypot(x1, x2)
            th = np.arctan2(x2, x1)
            inside = r <= sol.a
            f, g, _, _ = sol._profiles(np.asarray(r), bool(inside))
            ur = f * np.sin(2 * th)
            ut = g * np.cos(2 * th)
            return (ur * np.cos(th) - ut * np.sin(th),
                    ur * np.sin(th) + ut * np.cos(th))

        for x1, x2 in ((0.4, 0.2), (2.5, 1.0), (0.8, -3.0), (5.0, 0.0)):
            du1_dx2 = (disp(x1, x2 + h)[0] - disp(x1, x2 - h)[0]) / (2 * h)
            du2_dx1 = (disp(x1 + h, x2)[1] - disp(x1 - h, x2)[1]) / (2 * h)
            num = 0.5 * (du1_dx2 + du2_dx1)
            assert sol.shear_strain(x1, x2) == pytest.approx(num, rel=2e-5, abs=1e-12)

    def test_radii_validation(self):
        with pytest.raises(ValueError, match="radii"):
            dilute_fiber_oracle(FIBER, MATRIX, 2.0, 1.0, 0.01)

    def test_printed_rotation_coefficient_passes_residuals(self):
        # the r^3 tangential factor (2 lam + 3 mu) / lam closes the traction
        # continuity system; a wrong factor would leave O(1) residuals
        for lam, mu in ((59543.0, 25519.0), (1.0, 1.0), (0.7, 2.2)):
            terms = _mode2_coeffs(lam, mu)
            f, g, srr, srt = terms["a"](np.asarray(1.0))
            assert g == pytest.approx((2 * lam + 3 * mu) / lam, rel=1e-12)
            # equilibrium of the mode-2 displacement: div sigma = 0 is
            # equivalent to the radial momentum identity checked numerically
            r = 1.0
            h = 1e-6
            # d(sigma_rr)/dr + (2/r) sigma_rt_factor ... verified indirectly
            # through the numerical-derivative strain test above
            assert np.isfinite(srr) and np.isfinite(srt)


class TestModuliExtraction:
    def make_curve(self, times, stresses_axial, direction=None, max_p=None):
        times = np.asarray(times, dtype=float)
        direction = np.array([1.0, 0.0, 0.0, 0.0]) if direction is None else direction
        strains = times[:, None] * direction[None, :] / 1.0
        # strains chosen so the axial strain equals the time parameter
        strains = np.zeros((times.size, 4))
        strains[:, 0] = times
        stresses = np.zeros((times.size, 4))
        stresses[:, 0] = stresses_axial
        return OverallCurve(
            times=times, strains=strains, stresses=stresses,
            mode="stress_direction", direction=direction,
            max_p=np.zeros(times.size) if max_p is None else np.asarray(max_p))

    def test_young_modulus_slope(self):
        c = self.make_curve([1e-3], [70.0])
        assert young_modulus(c) == pytest.approx(70.0 / 1e-3)

    def test_young_modulus_requires_elastic_first_step(self):
        c = self.make_curve([1e-3, 2e-3], [70.0, 80.0], max_p=[0.001, 0.002])
        with pytest.raises(ValueError, match="not elastic"):
            young_modulus(c)

    def test_young_modulus_requires_uniaxial(self):
        c = self.make_curve([1e-3], [70.0])
        c.mode = "strain"
        with pytest.raises(ValueError, match="stress-direction"):
            young_modulus(c)
        c2 = self.make_curve([1e-3], [70.0],
                             direction=np.array([1.0, 0.0, 0.0, 1.0]))
        with pytest.raises(ValueError, match="uniaxial"):
            young_modulus(c2)

    def test_flow_stress_plateau(self):
        times = np.linspace(1e-3, 1e-2, 10)
        k = np.full(10, 80.0)
        k[0] = 60.0
        c = self.make_curve(times, k)
        assert flow_stress(c) == pytest.approx(80.0)

    def test_flow_stress_warns_if_rising(self):
        times = np.linspace(1e-3, 1e-2, 10)
        k = 70000.0 * times  # still elastic: slope never drops
        c = self.make_curve(times, k)
        with pytest.warns(UserWarning, match="plateau"):
            flow_stress(c)

    def test_hardening_modulus_window(self):
        times = np.linspace(5e-4, 1e-2, 20)
        k = 65.0 + 1000.0 * times
        c = self.make_curve(times, k)
        assert hardening_modulus(c) == pytest.approx(1000.0, rel=1e-9)

    def test_hardening_modulus_needs_points(self):
        c = self.make_curve([1e-3, 2e-3, 1e-2], [60.0, 61.0, 62.0])
        with pytest.raises(ValueError, match="4 points"):
            hardening_modulus(c)


class TestEndToEndHomogeneous:
    def test_young_modulus_from_solver(self):
        prog = uniaxial_stress_program(0.0, 1e-3, 1)
        state = run_program(homogeneous_map(), [MATRIX_ELASTIC], prog)
        curve = OverallCurve.from_state(state, prog)
        assert young_modulus(curve) == pytest.approx(MATRIX.young, rel=1e-8)

    def test_flow_stress_of_pure_matrix(self):
        prog = uniaxial_stress_program(0.0, 0.01, 20)
        state = run_program(homogeneous_map(), [MATRIX_PERFECT], prog)
        curve = OverallCurve.from_state(state, prog)
        assert flow_stress(curve) == pytest.approx(YIELD_STRESS, rel=0.01)

    def test_hardening_modulus_of_pure_matrix(self):
        prog = uniaxial_stress_program(0.0, 0.02, 40)
        state = run_program(homogeneous_map(), [MATRIX_LINEAR], prog)
        curve = OverallCurve.from_state(state, prog)
        expected = MATRIX.young * HARDENING / (MATRIX.young + HARDENING)
        assert hardening_modulus(curve) == pytest.approx(expected, rel=0.02)

    def test_rotated_tension_same_modulus(self):
        # an isotropic homogeneous cell must report the same modulus at 45 deg
        prog = uniaxial_stress_program(45.0, 1e-3, 1)
        state = run_program(homogeneous_map(), [MATRIX_ELASTIC], prog)
        curve = OverallCurve.from_state(state, prog)
        assert young_modulus(curve) == pytest.approx(MATRIX.young, rel=1e-8)


class TestCurveCsv:
    def test_format(self, tmp_path):
        prog = uniaxial_stress_program(0.0, 1e-3, 1)
        state = run_program(homogeneous_map(), [MATRIX_ELASTIC], prog)
        curve = OverallCurve.from_state(state, prog)
        path = tmp_path / "curve.csv"
        write_curve_csv(curve, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "step,E11,E22,E33,E12,S11,S22,S33,S12"
        assert len(lines) == 2
        row = lines[1].split(",")
        assert int(row[0]) == 1
        assert float(row[1]) == pytest.approx(1e-3, rel=1e-10)
