import numpy as np
import pytest
from scipy.special import erfc

from raf.bayes import bo_gen_error, solve_bo
from raf.channel import HingeLoss, SquareLoss
from raf.kernels import KernelGeometry, geometry_from_angle, kernel_family
from raf.numerics import FixedPointConfig
from raf.state_eqs import (ErmSpec, RfSpec, gen_error,
                           hinge_channel_integrals, hinge_interp_threshold,
                           hinge_lambda_opt, infinite_lambda_errors,
                           kernel_residual, krr_closed_solution,
                           krr_lambda_opt, krr_large_alpha_coeff,
                           krr_opt_errors, mem_error, mem_error_proximal,
                           mp_stieltjes, quadrature_channel_integrals,
                           ridgeless_errors, ridgeless_hinge_errors,
                           ridgeless_perceptron_square,
                           solve_kernel_state_eqs, solve_rf_state_eqs,
                           square_channel_integrals)

PERCEPTRON = KernelGeometry(0.0, 1.0, 0.0)
FIG1 = dict(alpha=2.0 / 0.9, eps=0.1)


def random_settings(n, seed=0, eps_max=0.6):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield dict(alpha=float(rng.uniform(0.3, 8.0)),
                   eps=float(rng.uniform(0.0, eps_max)),
                   mu1=float(rng.uniform(0.2, 2.0)),
                   mus=float(rng.uniform(0.05, 2.0)),
                   lam=float(10 ** rng.uniform(-3.0, 1.0)))


class TestErrorFunctionals:
    def test_gen_error_endpoints(self):
        assert gen_error(0.0, 1.0) == pytest.approx(0.5)
        assert gen_error(1.0, 1.0) == pytest.approx(0.0)

    def test_gen_error_domain(self):
        with pytest.raises(ValueError):
            gen_error(0.0, 0.0)

    def test_mem_error_limits(self):
        assert mem_error(1.0, 0.0) == pytest.approx(0.5)
        assert mem_error(1.0, 100.0) == pytest.approx(0.0, abs=1e-12)

    def test_mem_error_proximal_matches_erfc(self):
        # generic sign-test path vs the closed erfc form on a (q, V) grid
        for loss in (SquareLoss, HingeLoss):
            for q in np.geomspace(0.05, 5.0, 10):
                for V in np.geomspace(0.01, 10.0, 10):
                    assert mem_error_proximal(loss, q, V) == pytest.approx(
                        mem_error(q, V), abs=1e-6)


class TestChannelIntegrals:
    def test_square_closed_form_vs_quadrature(self):
        for s in random_settings(10, seed=1):
            m, q, V = 0.3 * np.sqrt(0.8), 0.8, 1.0 + s["lam"]
            want = quadrature_channel_integrals("square", m, q, V, s["eps"])
            got = square_channel_integrals(m, q, V, s["eps"])
            assert np.allclose(got, want, atol=1e-9)

    @staticmethod
    def _adaptive_hinge_integrals(m, q, V, eps):
        # independent oracle: adaptive quadrature with breakpoints at the
        # proximal branch boundaries, where the integrands kink or jump
        from scipy import integrate
        from scipy.special import erf as _erf

        sq = np.sqrt(q)
        eta = m * m / q
        s = np.sqrt(q * (1.0 - eta))
        c = np.sqrt(eta / (2.0 * (1.0 - eta)))
        phi = lambda x: np.exp(-x * x / 2.0) / np.sqrt(2.0 * np.pi)
        kinks = sorted({(1.0 - V) / sq, 1.0 / sq, -(1.0 - V) / sq,
                        -1.0 / sq, (1.0 - V) / s, 1.0 / s,
                        -(1.0 - V) / s, -1.0 / s})
        pts = [k for k in kinks if -13 < k < 13]

        def quad(f):
            val, _ = integrate.quad(f, -13.0, 13.0, points=pts, limit=400)
            return val

        fp = lambda x, sc: HingeLoss.f_out(+1, sc * x, V)
        fm = lambda x, sc: HingeLoss.f_out(-1, sc * x, V)
        dp = lambda x: HingeLoss.d_f_out_d_omega(+1, sq * x, V)
        dm = lambda x: HingeLoss.d_f_out_d_omega(-1, sq * x, V)
        Im = (1.0 - eps) / np.sqrt(2.0 * np.pi) * quad(
            lambda x: phi(x) * (fp(x, s) - fm(x, s)))
        Iq = quad(lambda x: phi(x) * (
            0.5 * (fp(x, sq) ** 2 + fm(x, sq) ** 2)
            + 0.5 * (1 - eps) * _erf(c * x)
            * (fp(x, sq) ** 2 - fm(x, sq) ** 2)))
        Iv = -quad(lambda x: phi(x) * (
            0.5 * (dp(x) + dm(x))
            + 0.5 * (1 - eps) * _erf(c * x) * (dp(x) - dm(x))))
        return Im, Iq, Iv

    def test_hinge_semi_analytic_vs_quadrature(self):
        rng = np.random.default_rng(3)
        for _ in range(15):
            q = float(rng.uniform(0.2, 3.0))
            m = float(rng.uniform(0.1, 0.95) * np.sqrt(q))
            V = float(10 ** rng.uniform(-1.5, 1.0))
            eps = float(rng.uniform(0.0, 0.5))
            want = self._adaptive_hinge_integrals(m, q, V, eps)
            got = hinge_channel_integrals(m, q, V, eps)
            assert np.allclose(got, want, atol=1e-7), (m, q, V, eps)


class TestSquareClosedForm:
    def test_matches_fixed_point_on_random_settings(self):
        for s in random_settings(50, seed=2):
            geom = KernelGeometry(0.0, s["mu1"], s["mus"])
            spec = ErmSpec("square", geom, s["lam"], s["alpha"], s["eps"])
            closed = krr_closed_solution(spec)
            fp = solve_kernel_state_eqs(spec)
            assert fp.converged
            assert abs(closed.m - fp.m) < 1e-8
            assert abs(closed.q - fp.q) < 1e-8
            assert abs(closed.V - fp.V) < 1e-8

    def test_residual_certification(self):
        for s in random_settings(10, seed=4):
            geom = KernelGeometry(0.0, s["mu1"], s["mus"])
            spec = ErmSpec("square", geom, s["lam"], s["alpha"], s["eps"])
            assert kernel_residual(spec, krr_closed_solution(spec)) < 1e-8

    def test_wrong_loss_rejected(self):
        with pytest.raises(ValueError):
            krr_closed_solution(ErmSpec("hinge", PERCEPTRON, 0.1, 2.0, 0.1))


class TestKrrOptimum:
    def test_lambda_opt_perceptron_eps0(self):
        assert krr_lambda_opt(0.0, PERCEPTRON) == pytest.approx(
            np.pi / 2 - 1.0, abs=1e-12)

    def test_lambda_opt_clips_at_sign_kernel(self):
        geom = kernel_family("sign-arcsine").geometry()
        assert krr_lambda_opt(0.0, geom) == pytest.approx(0.0, abs=1e-10)

    def test_lambda_opt_clips_below_optimal_angle(self):
        geom = geometry_from_angle(0.5)  # well below gamma_mem_opt
        assert krr_lambda_opt(0.1, geom) == 0.0

    def test_fig1_value_three_geometries(self):
        for tag in ("linear", "erf-arcsine", "relu-arccos"):
            geom = kernel_family(tag).geometry()
            _, e_gen, _ = krr_opt_errors(FIG1["alpha"], FIG1["eps"], geom)
            assert e_gen == pytest.approx(0.2084, abs=5e-4), tag


class TestHingeSolver:
    def test_residual_certification(self):
        for s in random_settings(8, seed=5):
            geom = KernelGeometry(0.0, s["mu1"], s["mus"])
            spec = ErmSpec("hinge", geom, max(s["lam"], 1e-2), s["alpha"],
                           s["eps"])
            op = solve_kernel_state_eqs(spec)
            assert op.converged
            assert kernel_residual(spec, op) < 1e-8

    def test_fig1_relu_optimum(self):
        geom = kernel_family("relu-arccos").geometry()
        _, e_gen, _ = hinge_lambda_opt(FIG1["alpha"], FIG1["eps"], geom)
        assert e_gen == pytest.approx(0.2031, abs=1e-3)


class TestAngularInvariance:
    def test_rescaling_leaves_order_params_fixed(self):
        settings = list(random_settings(20, seed=6))
        for s in settings:
            loss = "square" if s["alpha"] > 4 else "hinge"
            geom = KernelGeometry(0.0, s["mu1"], s["mus"])
            base = solve_kernel_state_eqs(
                ErmSpec(loss, geom, s["lam"], s["alpha"], s["eps"]))
            for r in (0.5, 2.0, 5.0):
                scaled = solve_kernel_state_eqs(ErmSpec(
                    loss, KernelGeometry(0.0, r * s["mu1"], r * s["mus"]),
                    r * r * s["lam"], s["alpha"], s["eps"]))
                for attr in ("m", "q", "V"):
                    assert abs(getattr(scaled, attr)
                               - getattr(base, attr)) < 1e-8


class TestPerceptronReduction:
    def test_kernel_solver_reduces_to_linear_model(self):
        # mu_star = 0 must reproduce the dedicated linear-model closed form
        for s in random_settings(50, seed=7):
            spec = ErmSpec("square", PERCEPTRON, s["lam"], s["alpha"],
                           s["eps"])
            fp = solve_kernel_state_eqs(spec)
            lam, alpha, eps = s["lam"], s["alpha"], s["eps"]
            # linear perceptron V from its scalar quadratic
            V = ((1.0 - alpha - lam
                  + np.sqrt((alpha - 1.0 - lam) ** 2 + 4.0 * alpha * lam))
                 / (2.0 * lam))
            assert abs(fp.V - V) < 1e-8

    def test_lambda_monotonicity_fig1(self):
        lams = np.geomspace(1e-4, 1e2, 25)
        mems, gens = [], []
        for lam in lams:
            op = solve_kernel_state_eqs(
                ErmSpec("square", PERCEPTRON, lam, **FIG1))
            mems.append(mem_error(op.q, op.V))
            gens.append(gen_error(op.m, op.q))
        assert all(b >= a - 1e-12 for a, b in zip(mems, mems[1:]))
        # E_gen is unimodal: decreasing then increasing
        d = np.sign(np.diff(gens))
        switch = np.nonzero(np.diff(d) != 0)[0]
        assert len(switch) <= 1


class TestBoDominance:
    def test_erm_never_beats_bayes(self):
        for alpha in np.geomspace(0.5, 20, 10):
            bo = bo_gen_error(solve_bo(float(alpha), 0.2).q_b)
            for s in random_settings(2, seed=int(alpha * 100)):
                geom = KernelGeometry(0.0, s["mu1"], s["mus"])
                op = solve_kernel_state_eqs(
                    ErmSpec("square", geom, s["lam"], float(alpha), 0.2))
                assert gen_error(op.m, op.q) >= bo - 1e-6


class TestRidgeless:
    def test_perceptron_square_interpolating_branch(self):
        for alpha in (0.2, 0.6, 0.99):
            e_gen, e_mem = ridgeless_perceptron_square(alpha, 0.3)
            assert e_mem == 0.0
            assert 0.0 < e_gen < 0.5

    def test_perceptron_square_pure_facts(self):
        e_gen, e_mem = ridgeless_perceptron_square(2.0, 1.0)
        assert e_mem == pytest.approx(0.5 * erfc(np.sqrt(0.5)), abs=1e-12)
        assert e_gen == pytest.approx(0.5)

    def test_perceptron_square_large_alpha_mem_half(self):
        _, e_mem = ridgeless_perceptron_square(1e6, 0.3)
        assert e_mem == pytest.approx(0.5, abs=1e-2)

    def test_cusp_rejected(self):
        with pytest.raises(ValueError):
            ridgeless_perceptron_square(1.0, 0.1)

    def test_square_branch_matches_small_lambda_solver(self):
        geom = KernelGeometry(0.0, 0.8, 0.7)
        e_gen, e_mem = ridgeless_errors("square", 2.0, 0.2, geom)
        assert e_mem == 0.0
        op = solve_kernel_state_eqs(ErmSpec("square", geom, 1e-7, 2.0, 0.2))
        assert e_gen == pytest.approx(gen_error(op.m, op.q), abs=1e-4)

    def test_hinge_branch_matches_small_lambda_solver(self):
        geom = KernelGeometry(0.0, 0.8, 0.7)
        e_gen, e_mem = ridgeless_hinge_errors(2.0, 0.2, geom)
        assert e_mem == 0.0
        op = solve_kernel_state_eqs(ErmSpec("hinge", geom, 1e-6, 2.0, 0.2),
                                    FixedPointConfig(damping=0.3,
                                                     max_iter=200000))
        assert e_gen == pytest.approx(gen_error(op.m, op.q), abs=1e-3)


class TestThreshold:
    def test_pure_facts_threshold_two(self):
        assert hinge_interp_threshold(1.0) == pytest.approx(2.0, abs=1e-9)

    def test_small_eps_asymptote(self):
        eps = 1e-4
        ratio = hinge_interp_threshold(eps) / (2 * np.pi ** 2 / (3 * eps)) ** (1 / 3)
        assert ratio == pytest.approx(1.0, abs=0.02)

    def test_eps_zero_diverges(self):
        assert hinge_interp_threshold(0.0) == np.inf

    def test_monotone_decreasing_in_eps(self):
        vals = [hinge_interp_threshold(e) for e in np.linspace(0.05, 1.0, 12)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


class TestInfiniteLambda:
    def test_pure_facts_gen_half(self):
        e_gen, _ = infinite_lambda_errors(2.0, 1.0, PERCEPTRON)
        assert e_gen == pytest.approx(0.5)

    def test_small_alpha_gen_half(self):
        e_gen, _ = infinite_lambda_errors(1e-9, 0.1, PERCEPTRON)
        assert e_gen == pytest.approx(0.5, abs=1e-3)

    def test_matches_large_lambda_solver(self):
        geom = KernelGeometry(0.0, 0.9, 0.5)
        want = infinite_lambda_errors(2.0, 0.2, geom)
        op = solve_kernel_state_eqs(ErmSpec("square", geom, 1e3, 2.0, 0.2))
        assert gen_error(op.m, op.q) == pytest.approx(want[0], abs=1e-3)
        assert mem_error(op.q, op.V) == pytest.approx(want[1], abs=1e-3)


class TestRates:
    def test_coefficient_at_zero_eps(self):
        a = np.sqrt(2 / np.pi)
        assert krr_large_alpha_coeff(0.0) == pytest.approx(
            np.sqrt(1 - a * a) / (np.pi * a), abs=1e-12)
        assert krr_large_alpha_coeff(0.0) == pytest.approx(0.2405, abs=1e-4)

    def test_closed_form_reaches_coefficient(self):
        coeff = krr_large_alpha_coeff(0.5)
        geom = KernelGeometry(0.0, 0.8, 0.6)
        op = krr_closed_solution(ErmSpec("square", geom, 0.3, 1e6, 0.5))
        assert gen_error(op.m, op.q) * np.sqrt(1e6) == pytest.approx(
            coeff, rel=5e-3)


class TestRandomFeatures:
    def test_stieltjes_identity(self):
        for z in (-0.05, -1.0, -7.0):
            for g in (0.2, 1.0, 5.0):
                s = mp_stieltjes(z, g)
                assert abs(g * z * s * s + (z + g - 1.0) * s + 1.0) < 1e-10

    def test_monotone_convergence_to_kernel(self):
        geom = kernel_family("relu-arccos").geometry()
        spec = ErmSpec("square", geom, 1e-3, **FIG1)
        ek = gen_error(*[getattr(solve_kernel_state_eqs(spec), a)
                         for a in ("m", "q")])
        gaps = []
        for kappa in (1.0, 4.0, 16.0, 1e4):
            sol = solve_rf_state_eqs(
                RfSpec("square", geom, 1e-3, FIG1["alpha"], FIG1["eps"],
                       kappa))
            assert sol.params.converged
            gaps.append(abs(gen_error(sol.params.m, sol.params.q) - ek))
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-3

    def test_composite_overlaps_consistent(self):
        geom = kernel_family("erf-arcsine").geometry()
        sol = solve_rf_state_eqs(RfSpec("square", geom, 0.1, 2.0, 0.2, 4.0))
        assert sol.params.m == pytest.approx(geom.mu1 * sol.m_s, abs=1e-10)
        assert sol.params.q == pytest.approx(
            geom.mu1 ** 2 * sol.q_s + geom.mu_star ** 2 * sol.q_w, abs=1e-10)

    def test_invalid_kappa(self):
        with pytest.raises(ValueError):
            RfSpec("square", PERCEPTRON, 0.1, 2.0, 0.1, kappa=0.0)
