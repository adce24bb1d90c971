import numpy as np
import pytest

from csepsolve import (
    AffineOperator,
    ArmijoParams,
    BlackBoxBifunction,
    Box,
    CallableOperator,
    CsepInstance,
    HybridParams,
    LinesearchFailed,
    LipschitzData,
    ParameterViolation,
    SingletonSolution,
    ViInducedBifunction,
    armijo_linesearch,
    armijo_step_size,
    run_armijo_hybrid,
    run_hybrid_extragradient,
    run_single,
)

from conftest import csep2_instance, halfline_instance, scalar_1d_instance


class TestExtragradient:
    def test_scalar_problem(self):
        inst = scalar_1d_instance()
        out = run_hybrid_extragradient(inst, lam=0.3,
                                       known_point=inst.reference_point())
        assert out.stop_reason == "tolerance"
        assert abs(out.final_x[0]) < 1e-6
        assert out.total_violations == 0
        assert out.counters.prox_solves == 2 * out.iterations

    def test_zero_bifunction_stops_at_anchor(self):
        op = AffineOperator(np.zeros((2, 2)), np.zeros(2), lipschitz_L=1.0)
        inst = CsepInstance(2, Box([-1.0, -1.0], [1.0, 1.0]),
                            [ViInducedBifunction(op)], [0.4, -0.2])
        out = run_hybrid_extragradient(inst, lam=0.3)
        assert out.stop_reason == "tolerance"
        assert out.iterations == 1
        assert np.allclose(out.final_x, [0.4, -0.2])

    def test_halfline_agrees_with_extra_step_free(self):
        inst = halfline_instance()
        ref = inst.reference_point()
        base = run_hybrid_extragradient(inst, lam=0.3, known_point=ref)
        ours = run_single(inst, HybridParams(lam=0.4, k=6.0), known_point=ref)
        assert np.linalg.norm(base.final_x - np.array([0.0, 0.3])) < 1e-4
        assert np.linalg.norm(base.final_x - ours.final_x) < 1e-4

    def test_lam_range_enforced(self):
        inst = scalar_1d_instance()  # c1 = c2 = 0.5 so lam must stay below 1
        with pytest.raises(ParameterViolation):
            run_hybrid_extragradient(inst, lam=1.0)

    def test_requires_anchor_in_set(self):
        op = AffineOperator(np.eye(1), np.zeros(1))
        inst = CsepInstance(1, Box([-1.0], [1.0]), [ViInducedBifunction(op)], [2.0])
        with pytest.raises(ParameterViolation):
            run_hybrid_extragradient(inst, lam=0.3)

    def test_requires_single_problem(self):
        with pytest.raises(ParameterViolation):
            run_hybrid_extragradient(csep2_instance(), lam=0.1)


class TestLinesearch:
    def test_accepts_first_trial(self):
        op = CallableOperator(lambda x: np.array([-4.0]), 4.0, 1)
        f = ViInducedBifunction(op, LipschitzData(2.0, 2.0))
        m, z = armijo_linesearch(f, np.array([0.0]), np.array([1.0]), 0.5,
                                 ArmijoParams(eta=0.5, lam=0.5))
        assert m == 1
        assert np.allclose(z, [0.5])

    def test_equal_points_rejected(self):
        op = AffineOperator(np.eye(1), np.zeros(1))
        f = ViInducedBifunction(op)
        x = np.array([0.3])
        with pytest.raises(LinesearchFailed):
            armijo_linesearch(f, x, x.copy(), 0.5, ArmijoParams(eta=0.5, lam=0.5))

    def test_third_trial_mixing(self):
        # value drops below the threshold only once the mixing point passes 0.2
        def evaluate(x, y):
            slope = -2.0 if x[0] <= 0.2 else 0.0
            return slope * (y[0] - x[0])

        f = BlackBoxBifunction(
            evaluate,
            lambda x, y: np.array([-2.0 if x[0] <= 0.2 else 0.0]),
            LipschitzData(1.0, 1.0),
        )
        m, z = armijo_linesearch(f, np.array([0.0]), np.array([1.0]), 0.5,
                                 ArmijoParams(eta=0.5, lam=0.5))
        assert m == 3
        assert np.allclose(z, [0.875 * 0.0 + 0.125 * 1.0])

    def test_exhaustion_raises(self):
        f = BlackBoxBifunction(lambda x, y: 1.0, lambda x, y: np.zeros_like(x),
                               LipschitzData(1.0, 1.0))
        with pytest.raises(LinesearchFailed):
            armijo_linesearch(f, np.array([0.0]), np.array([1.0]), 0.5,
                              ArmijoParams(eta=0.5, lam=0.5, max_linesearch=10))

    def test_eta_validated(self):
        with pytest.raises(ParameterViolation):
            ArmijoParams(eta=1.0, lam=0.5)
        with pytest.raises(ParameterViolation):
            ArmijoParams(eta=0.5, lam=-1.0)


class TestArmijoHybrid:
    def test_scalar_problem(self):
        inst = scalar_1d_instance()
        out = run_armijo_hybrid(inst, ArmijoParams(eta=0.5, lam=0.3),
                                known_point=inst.reference_point())
        assert out.stop_reason == "tolerance"
        assert abs(out.final_x[0]) < 1e-6
        assert out.total_violations == 0

    def test_starts_converged(self):
        op = AffineOperator([[1.0, 0.0], [0.0, 0.0]], [0.0, 0.0], lipschitz_L=1.0)
        inst = CsepInstance(2, Box([-1.0, -1.0], [1.0, 1.0]),
                            [ViInducedBifunction(op)], [0.0, 0.2])
        out = run_armijo_hybrid(inst, ArmijoParams(eta=0.5, lam=0.3))
        assert out.stop_reason == "tolerance"
        assert out.iterations == 1
        assert np.allclose(out.final_x, [0.0, 0.2])

    def test_halfline_matches_other_methods(self):
        inst = halfline_instance()
        ref = inst.reference_point()
        out = run_armijo_hybrid(inst, ArmijoParams(eta=0.5, lam=0.3), known_point=ref)
        assert np.linalg.norm(out.final_x - np.array([0.0, 0.3])) < 1e-4
        assert out.total_violations == 0

    def test_step_size_zero_when_subgradient_vanishes(self):
        f = BlackBoxBifunction(lambda x, y: -1.0, lambda x, y: np.zeros_like(x),
                               LipschitzData(1.0, 1.0))
        sigma, g = armijo_step_size(f, np.array([0.1]), np.array([0.9]), 2, 0.5)
        assert sigma == 0.0
        assert np.allclose(g, [0.0])

    def test_step_size_formula(self):
        op = CallableOperator(lambda x: np.array([2.0]), 2.0, 1)
        f = ViInducedBifunction(op, LipschitzData(1.0, 1.0))
        z = np.array([0.25])
        y = np.array([1.0])
        sigma, g = armijo_step_size(f, z, y, 2, 0.5)
        # -eta^m f(z, y) / ((1 - eta^m) ||g||^2) with f(z, y) = 2*(1 - 0.25)
        assert np.allclose(g, [2.0])
        assert abs(sigma - (-0.25 * 1.5 / (0.75 * 4.0))) < 1e-15

    def test_flat_slope_region_runs_clean(self):
        def evaluate(x, y):
            slope = -2.0 if abs(x[0]) <= 0.2 else 0.0
            return slope * (y[0] - x[0])

        f = BlackBoxBifunction(
            evaluate,
            lambda x, y: np.array([-2.0 if abs(x[0]) <= 0.2 else 0.0]),
            LipschitzData(1.0, 1.0),
        )
        inst = CsepInstance(1, Box([-1.0], [1.0]), [f], [0.0])
        out = run_armijo_hybrid(inst, ArmijoParams(eta=0.5, lam=0.5), max_outer=3)
        assert out.error is None

    def test_requires_anchor_in_set(self):
        op = AffineOperator(np.eye(1), np.zeros(1))
        inst = CsepInstance(1, Box([-1.0], [1.0]), [ViInducedBifunction(op)], [2.0])
        with pytest.raises(ParameterViolation):
            run_armijo_hybrid(inst, ArmijoParams(eta=0.5, lam=0.3))


class TestBallSet:
    def ball_instance(self):
        from csepsolve import Ball

        # A(x) = x - (2, 0): the solution sits on the boundary at (1, 0)
        op = AffineOperator(np.eye(2), np.array([-2.0, 0.0]), lipschitz_L=1.0)
        return CsepInstance(2, Ball([0.0, 0.0], 1.0), [ViInducedBifunction(op)],
                            [0.2, 0.6], SingletonSolution([1.0, 0.0]))

    def test_cut_only_solver_handles_ball(self):
        inst = self.ball_instance()
        out = run_single(inst, HybridParams(lam=0.3, k=4.0, max_outer=8000),
                         known_point=inst.reference_point())
        assert out.error is None
        assert out.total_violations == 0
        assert np.linalg.norm(out.final_x - np.array([1.0, 0.0])) < 1e-3

    def test_baseline_on_ball_errs_cleanly_or_converges(self):
        # the baselines project onto C intersected with their cuts; on
        # non-polyhedral sets that inner problem can stall near convergence,
        # which must surface as a diagnosed error outcome, not a crash
        inst = self.ball_instance()
        out = run_hybrid_extragradient(inst, lam=0.4, max_outer=8000,
                                       known_point=inst.reference_point())
        assert out.stop_reason in ("tolerance", "max_outer", "error")
        if out.stop_reason == "error":
            assert "anchor projection" in out.error
            assert out.trace[-1].dist_to_known < 1e-3


class TestThreeMethodAgreement:
    def test_scalar_limits_agree(self):
        inst = scalar_1d_instance()
        ref = inst.reference_point()
        a = run_single(inst, HybridParams(lam=0.3, k=4.0), known_point=ref)
        b = run_hybrid_extragradient(inst, lam=0.3, known_point=ref)
        c = run_armijo_hybrid(inst, ArmijoParams(eta=0.5, lam=0.3), known_point=ref)
        for out in (a, b, c):
            assert np.linalg.norm(out.final_x - ref) < 1e-4
        assert np.linalg.norm(a.final_x - b.final_x) < 1e-4
        assert np.linalg.norm(a.final_x - c.final_x) < 1e-4
