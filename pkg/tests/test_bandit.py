import numpy as np
import pytest
from _oracles import DensePilot
from conftest import unit_rows
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from bandit_router.bandit import DegenerateEstimateError, PilotRouter, init_pilot
from bandit_router.pretrain import ArmEmbeddings, Projection


def _router(rng, k=3, d=4, alpha=1.0, **kw):
    theta = rng.standard_normal((k, d))
    acc = rng.uniform(0.0, 1.0, size=k)
    return PilotRouter(theta_prior=theta, accuracy=acc, alpha=alpha, **kw), theta, acc


instances = st.tuples(
    st.integers(0, 2**31 - 1),  # seed
    st.integers(1, 5),  # arms
    st.integers(1, 8),  # dim
    st.integers(0, 200),  # updates
)


class TestPrior:
    def test_prior_recovery(self, rng):
        router, theta, _ = _router(rng, k=5, d=8)
        unit = theta / np.linalg.norm(theta, axis=1, keepdims=True)
        for a in range(5):
            np.testing.assert_allclose(router.point_estimate(a), unit[a], atol=1e-10, rtol=0)

    def test_lambda_from_accuracy(self):
        router = PilotRouter(theta_prior=np.eye(3), accuracy=[0.0, 0.25, 1.0])
        assert router.lambda_.tolist() == [20.0, 4.0, 1.0]
        np.testing.assert_allclose(router.arm_state(1).A, 4.0 * np.eye(3))
        np.testing.assert_allclose(router.arm_state(1).b, [0.0, 4.0, 0.0])

    def test_fixed_rule(self):
        router = PilotRouter(theta_prior=np.eye(2), lambda_rule="fixed", lambda_value=3.0)
        assert router.lambda_.tolist() == [3.0, 3.0]

    def test_missing_accuracy(self):
        with pytest.raises(ValueError, match="accuracy"):
            PilotRouter(theta_prior=np.eye(2))

    def test_negative_alpha(self):
        with pytest.raises(ValueError, match="alpha"):
            PilotRouter(theta_prior=np.eye(2), accuracy=[1, 1], alpha=-1)


class TestEstimates:
    def test_zero_prior_reward_is_zero(self):
        router = PilotRouter(theta_prior=np.zeros((2, 3)), lambda_rule="fixed")
        psi = np.array([1.0, 0.0, 0.0])
        assert router.reward_estimates(psi).tolist() == [0.0, 0.0]
        with pytest.raises(DegenerateEstimateError):
            router.expected_reward(0, psi)

    def test_fresh_ucb_is_alpha_over_sqrt_lambda(self):
        # DERIVED: A = lam*I and |psi| = 1 give width 1/sqrt(lam); theta = psi gives mean 1
        router = PilotRouter(theta_prior=np.array([[1.0, 0.0]]), accuracy=[0.25], alpha=2.0)
        assert router.ucb_scores(np.array([1.0, 0.0]))[0] == pytest.approx(1.0 + 2.0 / 2.0)

    def test_batched_estimates_match_rows(self, rng):
        router, _, _ = _router(rng)
        psi = unit_rows(rng, 6, 4)
        batch = router.reward_estimates(psi)
        for i in range(6):
            np.testing.assert_allclose(batch[i], router.reward_estimates(psi[i]))

    def test_rejects_non_unit_context(self, rng):
        router, _, _ = _router(rng)
        with pytest.raises(ValueError, match="unit-normalized"):
            router.select(np.ones(4))

    def test_rejects_out_of_range_reward(self, rng):
        router, _, _ = _router(rng)
        with pytest.raises(ValueError, match="outside"):
            router.update(0, unit_rows(rng, 1, 4)[0], 1.5)

    def test_tie_goes_to_lowest_index(self):
        router = PilotRouter(theta_prior=np.ones((3, 2)), accuracy=[1, 1, 1])
        assert router.select(np.array([1.0, 0.0])) == 0


class TestProperties:
    @settings(max_examples=30, deadline=None)
    @given(instances)
    def test_matches_dense_oracle(self, inst):
        seed, k, d, n = inst
        rng = np.random.default_rng(seed)
        router, theta, acc = _router(rng, k, d, alpha=float(rng.uniform(0, 2)))
        oracle = DensePilot(theta, 1.0 / np.clip(acc, 0.05, 1.0), router.alpha)
        for psi in unit_rows(rng, n, d):
            arm = router.select(psi)
            assert arm == oracle.select(psi)
            r = float(rng.uniform())
            router.update(arm, psi, r)
            oracle.update(arm, psi, r)

    @settings(max_examples=30, deadline=None)
    @given(instances)
    def test_spd_preserved(self, inst):
        seed, k, d, n = inst
        rng = np.random.default_rng(seed)
        router, _, _ = _router(rng, k, d)
        for psi in unit_rows(rng, n, d):
            router.update(int(rng.integers(k)), psi, float(rng.uniform()))
        for a in range(k):
            A = router.arm_state(a).A
            assert np.max(np.abs(A - A.T)) <= 1e-10
            np.linalg.cholesky(A)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 8))
    def test_width_shrinks_monotonically(self, seed, d):
        rng = np.random.default_rng(seed)
        router, _, _ = _router(rng, 2, d)
        probe = unit_rows(rng, 1, d)[0]
        last = router.widths(probe)[0]
        for psi in unit_rows(rng, 50, d):
            router.update(0, psi, float(rng.uniform()))
            w = router.widths(probe)[0]
            assert w <= last + 1e-12
            last = w

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.lists(st.floats(0, 10), min_size=2, max_size=8))
    def test_alpha_never_favors_narrower_arm(self, seed, alphas):
        # equal means (shared prior), arm 0 narrower (lam 20) than arm 1 (lam 1)
        rng = np.random.default_rng(seed)
        prior = rng.standard_normal(3)
        psi = unit_rows(rng, 1, 3)[0]
        picked_wide = False
        for alpha in sorted(alphas):
            router = PilotRouter(theta_prior=np.vstack([prior, prior]), accuracy=[0.0, 1.0], alpha=alpha)
            arm = router.select(psi)
            if picked_wide:
                assert arm == 1
            picked_wide = arm == 1

    def test_inverse_drift_bounded(self, rng):
        router, _, _ = _router(rng, 2, 8)
        for psi in unit_rows(rng, 1000, 8):
            router.update(0, psi, float(rng.uniform()))
        s = router.arm_state(0)
        assert np.linalg.norm(s.A_inv - np.linalg.inv(s.A), "fro") <= 1e-6


class TestEstimatorAPI:
    def test_fit_predict(self, rng):
        router, _, _ = _router(rng)
        X = unit_rows(rng, 40, 4)
        arms = rng.integers(3, size=40)
        router.fit(X, arms, rng.uniform(size=40))
        assert router.t_updates_.sum() == 40
        assert router.decision_function(X).shape == (40, 3)
        assert router.predict(X).shape == (40,)

    def test_fit_resets(self, rng):
        router, _, _ = _router(rng)
        X = unit_rows(rng, 10, 4)
        router.fit(X, np.zeros(10, int), np.ones(10))
        router.fit(X[:2], [1, 1], [0.0, 0.0])
        assert router.t_updates_.tolist() == [0, 2, 0]

    def test_projection_applied(self, rng):
        W = rng.standard_normal((4, 6))
        router = PilotRouter(theta_prior=np.eye(4)[:3], accuracy=[1, 1, 1], projection=Projection(W, np.zeros(4)))
        X = rng.standard_normal((5, 6))
        psi = Projection(W, np.zeros(4)).project_many(X)
        np.testing.assert_allclose(router.decision_function(X), psi @ np.eye(4)[:3].T)

    def test_clone_and_set_params(self, rng):
        router, _, _ = _router(rng)
        router.update(0, unit_rows(rng, 1, 4)[0], 1.0)
        c = clone(router)
        assert c.t_updates_.sum() == 0
        router.set_params(alpha=3.0)
        assert router.alpha == 3.0 and router.t_updates_.sum() == 0

    def test_checkpoint_round_trip(self, rng, tmp_path):
        router, _, _ = _router(rng, 3, 4)
        for psi in unit_rows(rng, 30, 4):
            router.update(router.select(psi), psi, float(rng.uniform()))
        router.save_checkpoint(tmp_path / "c.json")
        back = PilotRouter.load_checkpoint(tmp_path / "c.json")
        probe = unit_rows(rng, 20, 4)
        for psi in probe:
            np.testing.assert_allclose(back.ucb_scores(psi), router.ucb_scores(psi), atol=1e-12)
        assert back.t_updates_.tolist() == router.t_updates_.tolist()

    def test_init_pilot(self):
        emb = ArmEmbeddings(np.eye(3), np.array([0.5, 1.0, 0.1]))
        router = init_pilot(emb, alpha=0.5)
        assert router.alpha == 0.5 and router.lambda_.tolist() == pytest.approx([2.0, 1.0, 10.0])


class TestSpecExamples:
    def test_colinear_update_keeps_prior(self):
        # DERIVED: (I + x x')^-1 (theta + x) with x = theta unit gives 2 theta / 2
        theta = np.array([0.6, 0.8, 0.0])
        router = PilotRouter(theta_prior=theta[None], lambda_rule="fixed", lambda_value=1.0)
        router.update(0, theta, 1.0)
        np.testing.assert_allclose(router.point_estimate(0), theta, atol=1e-12)

    def test_strong_prior_barely_moves(self, rng):
        theta = unit_rows(rng, 1, 5)
        router = PilotRouter(theta_prior=theta, lambda_rule="fixed", lambda_value=1e6)
        router.update(0, unit_rows(rng, 1, 5)[0], 1.0)
        assert np.linalg.norm(router.point_estimate(0) - theta[0]) <= 1e-5

    def test_hand_set_state_matches_dense(self):
        A = np.array([[2.0, 0.3, 0.0], [0.3, 1.5, 0.2], [0.0, 0.2, 1.0]])
        b = np.array([0.4, -0.2, 0.9])
        payload = {"alpha": 0.5, "arms": [
            {"A": A.tolist(), "b": b.tolist(), "lambda": 1.0, "theta_prior": [1, 0, 0], "t_updates": 3},
            {"A": (2 * np.eye(3)).tolist(), "b": [0.0, 1.0, 0.0], "lambda": 2.0, "theta_prior": [0, 1, 0], "t_updates": 0},
            {"A": (np.eye(3) + 0.5).tolist(), "b": [0.1, 0.1, 0.1], "lambda": 1.0, "theta_prior": [0, 0, 1], "t_updates": 1},
        ]}
        router = PilotRouter.from_checkpoint(payload)
        psi = np.array([0.48, 0.6, 0.64])
        est = np.linalg.solve(A, b)
        assert router.expected_reward(0, psi) == pytest.approx(psi @ est / np.linalg.norm(est), abs=1e-12)
        ucb = []
        for arm in payload["arms"]:
            Ai = np.linalg.inv(np.array(arm["A"]))
            e = Ai @ np.array(arm["b"])
            ucb.append(psi @ e / np.linalg.norm(e) + 0.5 * np.sqrt(psi @ Ai @ psi))
        assert router.select(psi) == int(np.argmax(ucb))
        np.testing.assert_allclose(router.ucb_scores(psi), ucb, atol=1e-12)

    def test_covariance_trace_non_increasing_for_repeated_context(self, rng):
        router, _, _ = _router(rng, 1, 6)
        x = unit_rows(rng, 1, 6)[0]
        last = np.trace(router.arm_state(0).A_inv)
        for _ in range(100):
            router.update(0, x, 0.5)
            tr = np.trace(router.arm_state(0).A_inv)
            assert tr <= last + 1e-12
            last = tr
