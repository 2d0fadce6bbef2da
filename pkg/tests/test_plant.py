"""Tests for the soft arm simulator and the linear plant"""

from dataclasses import replace

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.spatial.transform import Rotation

from dkmpc.exceptions import NumericError, ShapeError
from dkmpc.plant import (
    LinearPlant,
    PlantConfig,
    SoftArmPlant,
    pcc_forward_kinematics,
    plant_step,
    reset,
    segment_curvature,
    solve_static_pressures,
    static_tip,
)
from dkmpc.plant.kinematics import SMALL_ANGLE, segment_transform

LENGTHS = (170.0, 150.0, 130.0)


def integrate_frames(curvatures, lengths, substeps=1000):
    """Tip position by stepping the arc's moving frame with the midpoint rule."""
    orientation = np.eye(3)
    position = np.zeros(3)
    for (kx, ky), length in zip(curvatures, lengths):
        h = length / substeps
        omega = np.array([-ky, kx, 0.0])
        half = Rotation.from_rotvec(0.5 * h * omega).as_matrix()
        full = Rotation.from_rotvec(h * omega).as_matrix()
        for _ in range(substeps):
            position = position + h * (orientation @ half)[:, 2]
            orientation = orientation @ full
    return position


class TestCurvature:
    """Test the pressure-to-curvature map"""

    def test_equal_pressures_cancel(self):
        """Test that equal chamber pressures produce no bending"""
        kappa = segment_curvature(np.full(3, 25.0), 1.4e-4, 150.0, 0.08)
        assert np.allclose(kappa, 0.0, atol=1e-15)

    def test_single_chamber_bends_in_x_plane(self):
        """Test that the first chamber alone bends about the y axis"""
        kappa = segment_curvature(np.array([30.0, 0.0, 0.0]), 1.1e-4, 170.0, 0.0)
        assert kappa[0] == pytest.approx(1.1e-4 * 30.0, rel=1e-15)
        assert kappa[1] == 0.0

    def test_softening_scalar_formula(self):
        """Test the softened curvature magnitude against its scalar form"""
        gain, length, beta, p = 1.8e-4, 130.0, 0.08, 35.0
        raw = gain * p
        expected = raw / (1.0 + beta * (raw * length) ** 2)
        kappa = segment_curvature(np.array([p, 0.0, 0.0]), gain, length, beta)
        assert np.linalg.norm(kappa) == pytest.approx(expected, rel=1e-12)
        assert np.linalg.norm(kappa) < raw


class TestForwardKinematics:
    """Test PCC forward kinematics"""

    def test_straight_arm(self):
        """Test that zero curvature gives a straight arm along z"""
        assert np.allclose(pcc_forward_kinematics(np.zeros((3, 2)), LENGTHS), [0.0, 0.0, 450.0], atol=1e-12)

    def test_quarter_circle(self):
        """Test a single segment bent through a quarter turn"""
        length = 200.0
        tip = pcc_forward_kinematics(np.array([[np.pi / (2 * length), 0.0]]), [length])
        assert np.allclose(tip, [2 * length / np.pi, 0.0, 2 * length / np.pi], atol=1e-10)

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_frame_integration(self, seed):
        """Test closed-form kinematics against numerically integrated frames"""
        curvatures = np.random.default_rng(seed).uniform(-6e-3, 6e-3, size=(3, 2))
        tip = pcc_forward_kinematics(curvatures, LENGTHS)
        assert np.linalg.norm(tip - integrate_frames(curvatures, LENGTHS)) < 0.01

    def test_rotational_equivariance(self):
        """Test that rotating curvatures about z rotates the tip"""
        rng = np.random.default_rng(2)
        curvatures = rng.normal(scale=3e-3, size=(3, 2))
        for gamma in (0.3, 1.7, -2.4):
            planar = Rotation.from_euler("z", gamma).as_matrix()[:2, :2]
            rotated = pcc_forward_kinematics(curvatures @ planar.T, LENGTHS)
            expected = Rotation.from_euler("z", gamma).apply(pcc_forward_kinematics(curvatures, LENGTHS))
            assert np.allclose(rotated, expected, atol=1e-9)

    def test_small_angle_branch_continuity(self):
        """Test continuity across the small-angle series switch"""
        length = 170.0
        below = np.array([SMALL_ANGLE * (1 - 1e-9) / length, 0.0])
        above = np.array([SMALL_ANGLE * (1 + 1e-9) / length, 0.0])
        (r_below, d_below), (r_above, d_above) = segment_transform(below, length), segment_transform(above, length)
        assert np.max(np.abs(d_below - d_above)) < 1e-6
        assert np.max(np.abs(r_below - r_above)) < 1e-12

    def test_workspace_bound(self):
        """Test that the tip never leaves the sphere of the arm length"""
        config = PlantConfig()
        rng = np.random.default_rng(0)
        for _ in range(200):
            tip = static_tip(rng.uniform(0, 40, size=9), config)
            assert np.linalg.norm(tip) <= config.total_length + 1e-9


class TestPlantStep:
    """Test the lagged plant dynamics"""

    def setup_method(self):
        self.config = PlantConfig()

    def test_reset(self):
        """Test the rest pose after reset and a zero command"""
        state = reset(self.config)
        assert state.tick_count == 0
        assert np.allclose(state.observation, [0.0, 0.0, 450.0])
        state, obs = plant_step(state, np.zeros(9), self.config)
        assert np.allclose(obs, [0.0, 0.0, 450.0])
        assert state.tick_count == 1

    def test_resets_identical(self):
        """Test that two resets give the same state"""
        a, b = reset(self.config), reset(self.config)
        assert np.array_equal(a.q, b.q)
        assert np.array_equal(a.observation, b.observation)

    def test_lag_fixed_point(self):
        """Test that a held command at the current pressure is a fixed point"""
        q = np.linspace(0, 40, 9)
        state = replace(reset(self.config), q=q.copy())
        state, obs = plant_step(state, q, self.config)
        assert np.array_equal(state.q, q)
        assert np.array_equal(obs, static_tip(q, self.config))

    def test_lag_recurrence(self):
        """Test the first-order pressure lag against its closed form"""
        u = np.full(9, 12.0)
        state = reset(self.config)
        factor = 1.0 - self.config.dt / self.config.tau
        for t in range(1, 30):
            state, _ = plant_step(state, u, self.config)
            assert np.allclose(state.q, 12.0 * (1.0 - factor ** t), rtol=1e-12)

    def test_commands_are_clamped(self):
        """Test that commands above the actuator range are clamped"""
        state, _ = plant_step(reset(self.config), np.full(9, 100.0), self.config)
        assert np.allclose(state.q, self.config.lag_factor * 40.0)
        assert np.all(state.q <= 40.0)

    def test_deterministic_with_noise(self):
        """Test that a seeded noisy plant is reproducible"""
        config = PlantConfig(noise_sigma=0.2, seed=11)
        u = np.random.default_rng(0).uniform(0, 40, size=(20, 9))

        def run():
            state, out = reset(config), []
            for k in range(20):
                state, obs = plant_step(state, u[k], config)
                out.append(obs)
            return np.array(out)

        first, second = run(), run()
        assert np.array_equal(first, second)
        noiseless = static_tip(reset(config).q, config)
        assert not np.allclose(reset(config).observation, noiseless, atol=1e-6)

    def test_bad_commands(self):
        """Test that wrong-sized and non-finite commands are rejected"""
        state = reset(self.config)
        with pytest.raises(ShapeError):
            plant_step(state, np.zeros(8), self.config)
        with pytest.raises(NumericError):
            plant_step(state, np.full(9, np.nan), self.config)

    def test_jacobian_rank_at_bent_pose(self):
        """Test that pressures span all three tip directions at a bent pose"""
        q = np.array([20.0, 5.0, 0.0, 0.0, 25.0, 5.0, 10.0, 0.0, 30.0])
        h = 1e-4
        jac = np.column_stack([
            (static_tip(q + h * e, self.config) - static_tip(q - h * e, self.config)) / (2 * h)
            for e in np.eye(9)
        ])
        assert np.linalg.matrix_rank(jac, tol=1e-6) == 3

    def test_static_solve_recovers_reachable_point(self):
        """Test the static pressure solve on a reachable tip"""
        q_true = np.array([15.0, 0.0, 5.0, 0.0, 20.0, 0.0, 10.0, 10.0, 0.0])
        target = static_tip(q_true, self.config)
        _, residual = solve_static_pressures(target, self.config, initial=np.clip(q_true + 2.0, 0, 40))
        assert residual < 1e-4


class TestPlantConfig:
    """Test plant configuration validation"""

    def test_defaults(self):
        """Test the default plant constants"""
        config = PlantConfig()
        assert config.total_length == 450.0
        assert config.lag_factor == pytest.approx(0.2)

    def test_rejects_bad_values(self):
        """Test that invalid plant settings are rejected"""
        with pytest.raises(ValidationError):
            PlantConfig(tau=0.01)
        with pytest.raises(ValidationError):
            PlantConfig(segment_lengths=(170.0, -1.0, 130.0))
        with pytest.raises(ValidationError):
            PlantConfig(unknown=1)


class TestPlants:
    """Test the stateful plant wrappers"""

    def test_soft_arm_wrapper(self):
        """Test the stateful soft arm wrapper"""
        plant = SoftArmPlant()
        assert (plant.state_dim, plant.control_dim) == (3, 9)
        first = plant.step(np.full(9, 40.0))
        assert np.array_equal(plant.observe(), first)
        assert np.allclose(plant.reset(), [0.0, 0.0, 450.0])

    def test_linear_plant(self):
        """Test the linear plant with an offset actuator range"""
        a = np.array([[0.9, 0.1], [0.0, 0.8]])
        b = np.array([[1.0], [0.5]])
        plant = LinearPlant(a, b, x0=np.array([1.0, -1.0]), u_min=0.0, u_max=40.0)
        x = plant.step(np.array([25.0]))
        assert np.allclose(x, a @ np.array([1.0, -1.0]) + b @ np.array([5.0]))
        assert np.array_equal(plant.reset(), np.array([1.0, -1.0]))
