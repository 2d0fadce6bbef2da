"""Tests for the RBF lifting and the EDMD baseline"""

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from dkmpc.data import Episode, EpisodeDataset, split_dataset
from dkmpc.exceptions import ArgumentError, ConfigurationError, EdmdFitError
from dkmpc.koopman import (
    EdmdModel,
    IdentityLifting,
    RbfLifting,
    edmd_fit,
    edmd_fit_arrays,
    kmpc_controller,
    load_checkpoint,
    make_rbf_lifting,
    rbf_lift,
    save_checkpoint,
)
from dkmpc.mpc import MpcConfig, build_condensed_qp, solve_box_qp


def linear_transitions(n_samples=200, seed=0):
    rng = np.random.default_rng(seed)
    a = np.array([[0.9, 0.1, 0.0], [-0.2, 0.7, 0.05], [0.0, 0.3, 0.5]])
    b = rng.normal(size=(3, 4))
    x = rng.uniform(-1, 1, size=(n_samples, 3))
    u = rng.uniform(-1, 1, size=(n_samples, 4))
    return a, b, x, u, x @ a.T + u @ b.T


def residual(k_a, k_b, lifting, x, u, x_next):
    err = lifting.lift(x_next) - lifting.lift(x) @ k_a.T - u @ k_b.T
    return float(np.sum(err * err))


class TestRbfLift:
    """Test the Gaussian RBF dictionary"""

    def setup_method(self):
        self.lifting = RbfLifting(np.array([[0.0, 0.0, 0.0], [0.5, -0.5, 0.2]]), gamma=0.4)

    def test_peak_at_center(self):
        """Test that a state at a center lifts to 1 there"""
        psi = rbf_lift(np.array([0.5, -0.5, 0.2]), self.lifting)
        assert psi[4] == 1.0

    def test_decay(self):
        """Test that features vanish far from their center"""
        far = np.array([0.0, 0.0, 10.5 * self.lifting.gamma])
        assert rbf_lift(far, self.lifting)[3] < 1e-10

    def test_state_passthrough(self):
        """Test that the lift keeps the state and bounds the features"""
        x = np.random.default_rng(0).uniform(-1, 1, size=(7, 3))
        psi = rbf_lift(x, self.lifting)
        assert psi.shape == (7, 5)
        assert np.array_equal(psi[:, :3], x)
        assert np.all((psi[:, 3:] > 0.0) & (psi[:, 3:] <= 1.0))

    def test_make_lifting(self):
        """Test center sampling, the median width and reproducibility"""
        states = np.random.default_rng(1).uniform([-1, -0.5, 0], [1, 0.5, 1], size=(300, 3))
        lifting = make_rbf_lifting(states, n_rbf=20, seed=3)
        assert lifting.n_rbf == 20
        assert np.all(lifting.centers >= states.min(axis=0)) and np.all(lifting.centers <= states.max(axis=0))
        assert lifting.gamma == pytest.approx(np.median(pdist(lifting.centers)))
        again = make_rbf_lifting(states, n_rbf=20, seed=3)
        assert np.array_equal(again.centers, lifting.centers)

    def test_single_center(self):
        """Test the width fallback for a single center"""
        lifting = make_rbf_lifting(np.random.default_rng(0).normal(size=(10, 3)), n_rbf=1)
        assert lifting.gamma == 1.0

    def test_invalid(self):
        """Test that a zero width or no centers is rejected"""
        with pytest.raises(ConfigurationError):
            RbfLifting(np.zeros((1, 3)), gamma=0.0)
        with pytest.raises(ConfigurationError):
            make_rbf_lifting(np.zeros((4, 3)), n_rbf=0)


class TestEdmdFit:
    """Test the least-squares fit"""

    def test_recovers_linear_system(self):
        """Test exact recovery of a linear system with the identity lift"""
        a, b, x, u, xn = linear_transitions()
        k_a, k_b = edmd_fit_arrays(x, u, xn, IdentityLifting(3), damping=1e-14)
        assert np.max(np.abs(k_a - a)) < 1e-8
        assert np.max(np.abs(k_b - b)) < 1e-8

    def test_duplicate_samples_change_nothing(self):
        """Test that duplicating every sample leaves the fit unchanged"""
        _, _, x, u, xn = linear_transitions(seed=1)
        lifting = RbfLifting(np.random.default_rng(2).uniform(-1, 1, size=(10, 3)), 0.7)
        xn = xn + np.random.default_rng(3).normal(scale=0.05, size=xn.shape)
        once = edmd_fit_arrays(x, u, xn, lifting)
        twice = edmd_fit_arrays(np.vstack([x, x]), np.vstack([u, u]), np.vstack([xn, xn]), lifting)
        assert np.allclose(once[0], twice[0], atol=1e-9)
        assert np.allclose(once[1], twice[1], atol=1e-9)

    def test_matches_pseudo_inverse(self):
        """Test the fit residual against the pseudo-inverse solution"""
        _, _, x, u, xn = linear_transitions(n_samples=40, seed=4)
        xn = np.tanh(xn)
        lifting = RbfLifting(np.random.default_rng(5).uniform(-1, 1, size=(4, 3)), 0.9)
        k_a, k_b = edmd_fit_arrays(x, u, xn, lifting, damping=1e-13)
        theta = np.hstack([lifting.lift(x), u])
        k = lifting.lift(xn).T @ np.linalg.pinv(theta.T)
        assert residual(k_a, k_b, lifting, x, u, xn) == pytest.approx(
            residual(k[:, :7], k[:, 7:], lifting, x, u, xn), rel=1e-6
        )

    def test_perturbation_never_lowers_residual(self):
        """Test that the fit is a least-squares minimum"""
        _, _, x, u, xn = linear_transitions(seed=6)
        xn = xn + 0.1 * np.sin(3 * x)
        lifting = RbfLifting(np.random.default_rng(7).uniform(-1, 1, size=(8, 3)), 0.6)
        k_a, k_b = edmd_fit_arrays(x, u, xn, lifting, damping=1e-14)
        best = residual(k_a, k_b, lifting, x, u, xn)
        rng = np.random.default_rng(8)
        for _ in range(20):
            da = rng.normal(size=k_a.shape)
            db = rng.normal(size=k_b.shape)
            scale = 1e-3 / np.sqrt(np.sum(da * da) + np.sum(db * db))
            assert residual(k_a + scale * da, k_b + scale * db, lifting, x, u, xn) >= best

    def test_rank_deficient(self):
        """Test that an undamped rank-deficient fit raises"""
        _, _, x, u, xn = linear_transitions()
        with pytest.raises(EdmdFitError):
            edmd_fit_arrays(x, np.zeros_like(u), xn, IdentityLifting(3), damping=0.0)

    def test_too_few_samples(self):
        """Test that fewer samples than unknowns is rejected"""
        _, _, x, u, xn = linear_transitions(n_samples=5)
        with pytest.raises(ArgumentError):
            edmd_fit_arrays(x, u, xn, IdentityLifting(3))

    def test_fit_uses_train_split(self):
        """Test that stats and fit come from the training split"""
        rng = np.random.default_rng(9)
        episodes = [Episode(i, rng.normal(size=(30, 3)), rng.uniform(0, 40, size=(29, 4))) for i in range(5)]
        dataset = split_dataset(EpisodeDataset(episodes), (0.6, 0.2, 0.2), seed=0)
        model = edmd_fit(dataset, RbfLifting(rng.uniform(-1, 1, size=(6, 3)), 0.8))
        train_states = np.concatenate([ep.states for ep in dataset.split("train")])
        assert np.array_equal(model.norm_stats.state_min, train_states.min(axis=0))
        assert model.A.shape == (9, 9) and model.B.shape == (9, 4)


class TestEdmdModel:
    """Test the baseline model and its controller"""

    def setup_method(self):
        rng = np.random.default_rng(0)
        self.lifting = RbfLifting(rng.uniform(-1, 1, size=(5, 3)), 0.5)
        self.model = EdmdModel(self.lifting, 0.3 * rng.normal(size=(8, 8)), rng.normal(size=(8, 9)))

    def test_projection_inverts_lift(self):
        """Test that decode recovers the state from the lift"""
        x = np.random.default_rng(1).uniform(-1, 1, size=(10, 3))
        assert np.array_equal(self.model.decode(self.model.encode(x)), x)

    def test_tracking_weight_on_state_block(self):
        """Test that the tracking weight covers only the state block"""
        weight = self.model.tracking_weight(10.0)
        assert np.array_equal(np.diag(weight), [10.0, 10.0, 10.0, 0, 0, 0, 0, 0])
        assert np.count_nonzero(weight) == 3

    def test_controller_checks_dimensions(self):
        """Test that the controller checks weights against the model"""
        with pytest.raises(ConfigurationError):
            kmpc_controller(self.model, MpcConfig.diagonal(12, 9))
        with pytest.raises(ConfigurationError):
            kmpc_controller(self.model, MpcConfig.diagonal(8, 4))

    def test_free_response_needs_no_input(self):
        """Test that a free-response reference needs zero input"""
        config = MpcConfig(5, self.model.tracking_weight(10.0), 0.1 * np.eye(9), -np.ones(9), np.ones(9),
                           solver_tol=1e-10, solver_max_iters=5000)
        z_t = self.model.encode(np.array([0.2, -0.1, 0.4]))
        z_ref = np.stack([np.linalg.matrix_power(self.model.A, k) @ z_t for k in range(6)])
        solution = solve_box_qp(build_condensed_qp(self.model, z_t, z_ref, config), config)
        assert np.allclose(solution.u_star, 0.0, atol=1e-6)

    def test_checkpoint_round_trip(self, tmp_path):
        """Test that an RBF model checkpoint round-trips byte for byte"""
        first = save_checkpoint(self.model, tmp_path / "rbf.bin")
        loaded = load_checkpoint(first)
        assert isinstance(loaded.lifting, RbfLifting)
        assert loaded.lifting.gamma == self.lifting.gamma
        assert save_checkpoint(loaded, tmp_path / "again.bin").read_bytes() == first.read_bytes()

    def test_identity_lifting_checkpoint(self, tmp_path):
        """Test a checkpoint of an identity-lifted model"""
        model = EdmdModel(IdentityLifting(3), np.eye(3), np.ones((3, 2)))
        loaded = load_checkpoint(save_checkpoint(model, tmp_path / "dmd.bin"))
        assert isinstance(loaded.lifting, IdentityLifting)
        assert np.array_equal(loaded.B, model.B)
