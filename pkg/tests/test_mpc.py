"""Tests for QP condensation, the box QP solver and the receding-horizon loop"""

import itertools
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.optimize import lsq_linear

from dkmpc.data import NormalizationStats
from dkmpc.exceptions import ConfigurationError, NonConvexQpError, NumericError, PlantError, ShapeError
from dkmpc.koopman import EdmdModel, IdentityLifting
from dkmpc.mpc import (
    CondensedQp,
    MpcConfig,
    MpcController,
    build_condensed_qp,
    lookahead,
    mpc_step,
    run_tracking,
    solve_box_qp,
)
from dkmpc.plant import LinearPlant


def random_psd(rng, dim, floor=0.0):
    m = rng.normal(size=(dim, dim))
    return m @ m.T + floor * np.eye(dim)


def identity_stats(state_dim, control_dim, control_range=(-1.0, 1.0)):
    """Stats under which normalized states equal raw states."""
    return NormalizationStats(
        -np.ones(state_dim), np.ones(state_dim),
        np.full(control_dim, control_range[0]), np.full(control_dim, control_range[1]),
    )


def linear_model(a, b, stats):
    return EdmdModel(IdentityLifting(a.shape[0]), a, b, stats)


def rollout_cost(A, B, Q, R, z_t, z_ref, u):
    """Tracking cost by explicit latent simulation."""
    c = B.shape[1]
    blocks = u.reshape(-1, c)
    z = z_t.copy()
    cost = 0.0
    for k, u_k in enumerate(blocks):
        e = z - z_ref[k]
        cost += e @ Q @ e + u_k @ R @ u_k
        z = A @ z + B @ u_k
    return cost


def enumerate_box_qp(qp: CondensedQp) -> float:
    """Best objective over all lower/free/upper activity patterns."""
    best = np.inf
    for pattern in itertools.product((0, 1, 2), repeat=qp.dim):
        pattern = np.array(pattern)
        u = np.where(pattern == 0, qp.lower, qp.upper).astype(float)
        free = pattern == 1
        if free.any():
            fixed = ~free
            rhs = -(qp.gradient[free] + qp.hessian[np.ix_(free, fixed)] @ u[fixed])
            try:
                u[free] = np.linalg.solve(qp.hessian[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                continue
        if np.all(u >= qp.lower - 1e-12) and np.all(u <= qp.upper + 1e-12):
            best = min(best, qp.objective(u))
    return best


class TestMpcConfig:
    """Test MPC configuration validation"""

    def test_diagonal(self):
        """Test the diagonal-weight constructor"""
        config = MpcConfig.diagonal(12, 9)
        assert np.array_equal(config.Q, 10.0 * np.eye(12))
        assert np.array_equal(config.R, 0.1 * np.eye(9))
        assert config.horizon == 10

    def test_rejects_asymmetric_weight(self):
        """Test that an asymmetric Q is rejected"""
        Q = np.eye(2)
        Q[0, 1] = 1e-6
        with pytest.raises(ConfigurationError):
            MpcConfig(2, Q, np.eye(1), [-1.0], [1.0])

    def test_rejects_indefinite_weight(self):
        """Test that an indefinite Q is rejected"""
        with pytest.raises(ConfigurationError):
            MpcConfig(2, np.diag([1.0, -1.0]), np.eye(1), [-1.0], [1.0])

    def test_rejects_empty_box(self):
        """Test that u_min equal to u_max is rejected"""
        with pytest.raises(ConfigurationError):
            MpcConfig(2, np.eye(2), np.eye(1), [1.0], [1.0])


class TestCondensation:
    """Test the condensed QP"""

    def test_matches_rollout_cost(self):
        """Test that the condensed objective equals the simulated tracking cost"""
        rng = np.random.default_rng(0)
        n, c, H = 4, 2, 3
        A = rng.normal(scale=0.5, size=(n, n))
        B = rng.normal(size=(n, c))
        config = MpcConfig(H, random_psd(rng, n), random_psd(rng, c), -np.ones(c), np.ones(c))
        z_t = rng.normal(size=n)
        z_ref = rng.normal(size=(H + 1, n))
        qp = build_condensed_qp(SimpleNamespace(A=A, B=B), z_t, z_ref, config)
        for _ in range(100):
            u = rng.uniform(-1, 1, size=(H + 1) * c)
            expected = rollout_cost(A, B, config.Q, config.R, z_t, z_ref, u)
            assert qp.objective(u) == pytest.approx(expected, abs=1e-9 * max(1.0, abs(expected)))

    def test_zero_horizon(self):
        """Test the condensed QP with a single input block"""
        rng = np.random.default_rng(1)
        R = random_psd(rng, 3, 0.1)
        config = MpcConfig(0, np.eye(2), R, -np.ones(3), np.ones(3))
        qp = build_condensed_qp(SimpleNamespace(A=np.eye(2), B=np.ones((2, 3))), np.ones(2), np.zeros((1, 2)), config)
        assert np.allclose(qp.hessian, 2.0 * R)
        assert np.array_equal(qp.gradient, np.zeros(3))
        assert qp.constant == pytest.approx(2.0)

    def test_scalar_case(self):
        """Test a scalar integrator against its hand-derived cost"""
        config = MpcConfig(1, np.eye(1), np.zeros((1, 1)), [-2.0], [2.0])
        model = SimpleNamespace(A=np.eye(1), B=np.eye(1))
        qp = build_condensed_qp(model, np.zeros(1), np.array([[0.0], [1.0]]), config)
        for u0 in (-1.0, 0.0, 0.5, 1.0, 1.7):
            assert qp.objective(np.array([u0, 0.3])) == pytest.approx((u0 - 1.0) ** 2)
        solution = solve_box_qp(qp, config)
        assert solution.first_input[0] == pytest.approx(1.0, abs=1e-6)

    def test_shape_errors(self):
        """Test that mismatched state and reference shapes are rejected"""
        config = MpcConfig.diagonal(2, 1, horizon=2)
        model = SimpleNamespace(A=np.eye(2), B=np.ones((2, 1)))
        with pytest.raises(ShapeError):
            build_condensed_qp(model, np.zeros(2), np.zeros((2, 2)), config)
        with pytest.raises(ShapeError):
            build_condensed_qp(model, np.zeros(3), np.zeros((3, 2)), config)


class TestBoxQpSolver:
    """Test the accelerated projected-gradient solver"""

    def qp(self, hessian, gradient, lower, upper, constant=0.0, control_dim=None):
        gradient = np.asarray(gradient, dtype=float)
        return CondensedQp(
            np.asarray(hessian, dtype=float), gradient,
            np.asarray(lower, dtype=float), np.asarray(upper, dtype=float),
            constant, control_dim or gradient.size,
        )

    def test_interior_optimum(self):
        """Test an unconstrained optimum inside the box"""
        solution = solve_box_qp(self.qp(2 * np.eye(3), np.zeros(3), -np.ones(3), np.ones(3)))
        assert np.allclose(solution.u_star, 0.0, atol=1e-9)
        assert solution.converged

    def test_active_bound(self):
        """Test an optimum clamped to the upper bound"""
        # (u - 2)^2 = u^2 - 4u + 4
        solution = solve_box_qp(self.qp([[2.0]], [-4.0], [0.0], [0.5], constant=4.0))
        assert solution.u_star[0] == pytest.approx(0.5)
        assert solution.objective_value == pytest.approx(2.25)

    @pytest.mark.parametrize("seed", range(200))
    def test_matches_enumeration_oracle(self, seed):
        """Test the solver against enumeration of all activity patterns"""
        rng = np.random.default_rng(seed)
        dim = 3 + seed % 4
        qp = self.qp(
            random_psd(rng, dim, 0.05), rng.normal(scale=3.0, size=dim),
            rng.uniform(-2.0, -0.1, size=dim), rng.uniform(0.1, 2.0, size=dim),
        )
        solution = solve_box_qp(qp, tol=1e-10, max_iters=20000)
        assert solution.objective_value == pytest.approx(enumerate_box_qp(qp), abs=1e-6)
        assert np.all(solution.u_star >= qp.lower) and np.all(solution.u_star <= qp.upper)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_bounded_least_squares_at_dim_12(self, seed):
        """Test the solver against bounded least squares at full size"""
        rng = np.random.default_rng(100 + seed)
        dim = 12
        hessian = random_psd(rng, dim, 0.1)
        gradient = rng.normal(scale=5.0, size=dim)
        qp = self.qp(hessian, gradient, -np.ones(dim), np.ones(dim))
        # 1/2 u^T P u + q^T u = 1/2 ||L^T u + L^-1 q||^2 - const, P = L L^T
        chol = np.linalg.cholesky(hessian)
        reference = lsq_linear(chol.T, -np.linalg.solve(chol, gradient), bounds=(-1.0, 1.0), method="bvls")
        solution = solve_box_qp(qp, tol=1e-10, max_iters=20000)
        assert solution.objective_value == pytest.approx(qp.objective(reference.x), abs=1e-6)

    def test_never_worse_than_start(self):
        """Test that an iteration-capped solve never loses to its projected start"""
        rng = np.random.default_rng(3)
        qp = self.qp(random_psd(rng, 8), rng.normal(size=8), -np.ones(8), np.ones(8))
        start = rng.uniform(-3, 3, size=8)
        solution = solve_box_qp(qp, initial=start, max_iters=5)
        assert solution.objective_value <= qp.objective(qp.project(start))
        assert solution.iterations <= 5
        assert np.all(np.abs(solution.u_star) <= 1.0)

    def test_negative_curvature(self):
        """Test that a non-convex Hessian raises"""
        with pytest.raises(NonConvexQpError) as exc:
            solve_box_qp(self.qp(np.diag([-1.0, 1.0]), [1.0, 0.0], -np.ones(2), np.ones(2)))
        assert isinstance(exc.value, NumericError)

    def test_first_input_is_first_block(self):
        """Test that the first input is the leading control block"""
        rng = np.random.default_rng(4)
        qp = self.qp(random_psd(rng, 6, 0.1), rng.normal(size=6), -np.ones(6), np.ones(6), control_dim=2)
        solution = solve_box_qp(qp)
        assert np.array_equal(solution.first_input, solution.u_star[:2])


class TestMpcStep:
    """Test a single receding-horizon step"""

    def test_free_response_needs_no_input(self):
        """Test that a reference on the free response needs zero input"""
        rng = np.random.default_rng(0)
        n, c, H = 3, 2, 4
        a = rng.normal(scale=0.4, size=(n, n))
        model = linear_model(a, rng.normal(size=(n, c)), identity_stats(n, c))
        config = MpcConfig(H, 10.0 * np.eye(n), 0.1 * np.eye(c), -np.ones(c), 2.0 * np.ones(c), solver_tol=1e-10,
                           solver_max_iters=5000)
        x_t = rng.uniform(-0.5, 0.5, size=n)
        x_ref = np.stack([np.linalg.matrix_power(a, k) @ x_t for k in range(H + 1)])
        _, solution = mpc_step(model, x_t, x_ref, config)
        assert np.allclose(solution.u_star, 0.0, atol=1e-6)

    def test_scalar_chain_denormalizes(self):
        """Test that the first input comes back in raw units"""
        model = linear_model(np.eye(1), np.eye(1), identity_stats(1, 1, (0.0, 40.0)))
        config = MpcConfig(1, np.eye(1), np.zeros((1, 1)), [-1.0], [1.0], solver_tol=1e-10, solver_max_iters=5000)
        u_raw, solution = mpc_step(model, np.zeros(1), np.array([[0.0], [0.5]]), config)
        assert solution.first_input[0] == pytest.approx(0.5, abs=1e-6)
        assert u_raw[0] == pytest.approx(30.0, abs=1e-4)

    def test_command_clamped_to_plant_range(self):
        """Test that a normalized box wider than the plant range cannot command past it"""
        model = linear_model(np.eye(1), np.eye(1), identity_stats(1, 1, (0.0, 40.0)))
        reference = np.array([[0.0], [50.0]])
        # normalized 2.0 is 60 kPa raw
        wide = MpcConfig(1, np.eye(1), np.zeros((1, 1)), [-1.0], [2.0], solver_tol=1e-10, solver_max_iters=5000)
        u_raw, _ = mpc_step(model, np.zeros(1), reference, wide)
        assert u_raw[0] == pytest.approx(60.0, abs=1e-4)

        clamped = MpcConfig(1, np.eye(1), np.zeros((1, 1)), [-1.0], [2.0], solver_tol=1e-10, solver_max_iters=5000,
                            command_min=0.0, command_max=40.0)
        u_raw, solution = mpc_step(model, np.zeros(1), reference, clamped)
        assert solution.first_input[0] == pytest.approx(2.0)
        assert u_raw[0] == 40.0

    def test_rejects_inverted_command_range(self):
        """Test that command_min must be below command_max"""
        with pytest.raises(ConfigurationError):
            MpcConfig.diagonal(2, 1, command_min=40.0, command_max=0.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_grid_search(self, seed):
        """Test the first input against a dense grid over the two channels that move the state"""
        rng = np.random.default_rng(seed)
        n, c = 2, 3
        A = rng.normal(scale=0.5, size=(n, n))
        B = np.zeros((n, c))
        B[:, :2] = rng.normal(size=(n, 2))
        model = linear_model(A, B, identity_stats(n, c))
        config = MpcConfig(1, 5.0 * np.eye(n), 0.1 * np.eye(c), -np.ones(c), np.ones(c), solver_tol=1e-10,
                           solver_max_iters=20000)
        x_t = rng.uniform(-1, 1, size=n)
        x_ref = rng.uniform(-2, 2, size=(2, n))
        _, solution = mpc_step(model, x_t, x_ref, config)

        # the last block and the idle channel only add input cost, so zero is optimal for them
        grid = np.linspace(-1.0, 1.0, 41)
        best = min(
            rollout_cost(A, B, config.Q, config.R, x_t, x_ref, np.array([g0, g1, 0.0, 0.0, 0.0, 0.0]))
            for g0 in grid for g1 in grid
        )
        assert solution.objective_value <= best + 1e-8
        assert np.allclose(solution.u_star[2:], 0.0, atol=1e-6)
        # the nearest grid point is at most half a cell away from the optimum
        u0 = solution.first_input[:2]
        b2 = B[:, :2]
        gradient = 2.0 * (b2.T @ config.Q @ (A @ x_t + b2 @ u0 - x_ref[1]) + config.R[:2, :2] @ u0)
        curvature = np.linalg.eigvalsh(2.0 * (b2.T @ config.Q @ b2 + config.R[:2, :2]))[-1]
        step = np.sqrt(2.0) * 0.025
        assert best - solution.objective_value <= np.linalg.norm(gradient) * step + 0.5 * curvature * step**2 + 1e-8

    def test_reference_shape(self):
        """Test that a reference of the wrong length is rejected"""
        model = linear_model(np.eye(2), np.eye(2), identity_stats(2, 2))
        with pytest.raises(ShapeError):
            mpc_step(model, np.zeros(2), np.zeros((3, 2)), MpcConfig.diagonal(2, 2, horizon=3))

    def test_controller_warm_start_shifts_blocks(self):
        """Test that warm starts shift the previous solution by one block"""
        model = linear_model(0.5 * np.eye(2), np.eye(2), identity_stats(2, 2))
        controller = MpcController(model, MpcConfig.diagonal(2, 2, horizon=2))
        assert controller.warm_start() is None
        controller.step(np.zeros(2), np.full((3, 2), 0.3))
        blocks = controller.previous.u_star.reshape(3, 2)
        assert np.array_equal(controller.warm_start(), np.concatenate([blocks[1], blocks[2], blocks[2]]))
        controller.reset()
        assert controller.warm_start() is None

    def test_controller_checks_dimensions(self):
        """Test that weights must match the model dimensions"""
        model = linear_model(np.eye(2), np.eye(2), identity_stats(2, 2))
        with pytest.raises(ConfigurationError):
            MpcController(model, MpcConfig.diagonal(3, 2))


class FailingPlant(LinearPlant):
    """Linear plant that fails on its fourth command."""

    def step(self, u):
        if getattr(self, "ticks", 0) >= 3:
            raise NumericError("valve fault")
        self.ticks = getattr(self, "ticks", 0) + 1
        return super().step(u)


class TestRunTracking:
    """Test the closed loop against a linear plant"""

    def setup_method(self):
        self.a = np.array([[0.9, 0.1], [0.0, 0.8]])
        self.b = 0.01 * np.eye(2)
        # raw commands in [0, 40] centred at 20 map to normalized [-1, 1]
        self.model = linear_model(self.a, 20.0 * self.b, identity_stats(2, 2, (0.0, 40.0)))
        self.config = MpcConfig(10, 10.0 * np.eye(2), 1e-4 * np.eye(2), -np.ones(2), np.ones(2),
                                solver_tol=1e-8, solver_max_iters=2000)

    def reference(self):
        k = np.arange(100)
        circle = 0.5 * np.column_stack([np.cos(2 * np.pi * k / 100), np.sin(2 * np.pi * k / 100)])
        return np.vstack([circle, np.repeat(circle[-1:], 40, axis=0)])

    def test_empty_path(self):
        """Test that an empty reference yields an empty log"""
        log = run_tracking(MpcController(self.model, self.config), LinearPlant(self.a, self.b), np.zeros((0, 2)))
        assert len(log) == 0

    def test_tracks_linear_plant(self):
        """Test closed-loop tracking of a circle on a linear plant"""
        reference = self.reference()
        plant = LinearPlant(self.a, self.b, x0=reference[0])
        log = run_tracking(self.model, plant, reference, self.config)
        assert len(log) == len(reference)
        assert np.all((log.u >= 0.0) & (log.u <= 40.0))
        assert log.errors()[-1] < 0.01 * 0.5

    def test_plant_failure_keeps_partial_log(self):
        """Test that a plant fault carries the partial log"""
        plant = FailingPlant(self.a, self.b)
        with pytest.raises(PlantError) as exc:
            run_tracking(self.model, plant, self.reference(), self.config)
        assert exc.value.details["step"] == 3
        assert len(exc.value.partial_log) == 4

    def test_log_csv(self, tmp_path):
        """Test the tracking log CSV layout"""
        log = run_tracking(self.model, LinearPlant(self.a, self.b), self.reference()[:5], self.config)
        lines = log.save_csv(tmp_path / "track.csv").read_text().splitlines()
        assert lines[0] == "t,x0,x1,r0,r1,u0,u1,objective,converged"
        assert len(lines) == 6

    def test_lookahead_pads_with_last_point(self):
        """Test that the lookahead window repeats the final point"""
        points = np.arange(5.0)[:, None]
        assert lookahead(points, 3, 3)[:, 0].tolist() == [3.0, 4.0, 4.0, 4.0]
