import numpy as np
import pytest

from suppalign.oracles import joint_objective, projected_gradient_lsqi, projected_subgradient_joint

from conftest import crandn


class TestOracles:
    def test_lsqi_interior_solution(self, rng):
        # budget large enough: the oracle must reach the least-squares residual
        A = crandn(rng, 8, 3)
        b = crandn(rng, 8)
        ls = np.linalg.lstsq(A, -b, rcond=None)[0]
        val, s = projected_gradient_lsqi(b, A, 10 * np.linalg.norm(ls) ** 2, iters=5000)
        assert val == pytest.approx(np.linalg.norm(b + A @ ls), rel=1e-8)

    def test_lsqi_respects_ball(self, rng):
        A, b = crandn(rng, 8, 3), crandn(rng, 8)
        _, s = projected_gradient_lsqi(b, A, 1e-4, iters=500)
        assert np.linalg.norm(s) ** 2 <= 1e-4 * (1 + 1e-12)

    def test_joint_objective_endpoints(self, rng):
        Fd, Fs = crandn(rng, 2, 5), crandn(rng, 2, 5, 3)
        x, Q = crandn(rng, 2, 7), crandn(rng, 2, 7, 3)
        s = np.zeros((2, 3), dtype=complex)
        np.testing.assert_allclose(joint_objective(s, Fd, Fs, x, Q, 0.0), np.linalg.norm(Fd, axis=1))
        np.testing.assert_allclose(joint_objective(s, Fd, Fs, x, Q, 1.0), np.abs(x).max(axis=1))

    def test_subgradient_on_separable_problem(self):
        # min |1 + s| over |s|^2 <= 0.25 has value 0.5 at s = -0.5
        Fd = np.ones((1, 1), dtype=complex)
        Fs = np.ones((1, 1, 1), dtype=complex)
        best, s = projected_subgradient_joint(Fd, Fs, np.ones((1, 1)), np.ones((1, 1, 1)),
                                              np.array([0.25]), 0.5, epochs=10, steps=500)
        assert best[0] == pytest.approx(0.5, abs=1e-6)
        assert s[0, 0] == pytest.approx(-0.5, abs=1e-5)
