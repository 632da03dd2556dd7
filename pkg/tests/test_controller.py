import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gvebarrier import (ConstraintConfig, ConvexProjection, InfNormBox, OrbitalElements,
                        TwoNormBall, Weights, barrier_terms, feedback, gve_matrix, lyapunov_value,
                        min_weights, nominal_control, nominal_value, reset_weights, saturate)
from gvebarrier.controller import check_projection, sized_weights
from gvebarrier.errors import ResetNotPermitted

CFG = ConstraintConfig()
P_DIAG = (5e-11, 0.01, 0.005, 0.0075, 5e-4)
X14 = OrbitalElements(21378.0, 0.65, math.pi / 10, 0.0, math.pi)
X15 = OrbitalElements(6878.0, 0.02, math.pi / 2, 3 * math.pi / 2, math.pi)
V0_14 = 0.0944633788946272  # 1/2 dX^T P dX, evaluated by hand


def weights(q1=1.0, q2=1.0):
    return Weights.diagonal(P_DIAG, q1, q2)


vec3 = st.lists(st.floats(-5e-3, 5e-3), min_size=3, max_size=3).map(np.array)


class TestWeights:
    def test_validation(self):
        with pytest.raises(ValueError):
            Weights(np.eye(4), 1.0, 1.0)
        with pytest.raises(ValueError):
            Weights(-np.eye(5), 1.0, 1.0)
        with pytest.raises(ValueError):
            Weights(np.eye(5), -1.0, 1.0)
        bad = np.eye(5)
        bad[0, 1] = 0.5
        with pytest.raises(ValueError):
            Weights(bad, 1.0, 1.0)

    def test_immutable(self):
        w = weights()
        with pytest.raises(ValueError):
            w.P[0, 0] = 1.0
        assert weights(0.0, 0.0).barriers_enabled is False


class TestSaturation:
    def test_ball(self):
        u = saturate([2e-3, 0.0, 0.0], TwoNormBall(1e-3))
        assert u.as_array().tolist() == [1e-3, 0.0, 0.0]

    def test_box(self):
        u = saturate([2e-3, 5e-4, -2e-3], InfNormBox((1e-3, 1e-3, 1e-3)))
        assert u.as_array().tolist() == [1e-3, 5e-4, -1e-3]

    @settings(max_examples=300, deadline=None)
    @given(u=vec3)
    def test_ball_never_exceeds(self, u):
        out = saturate(u, TwoNormBall(1e-3)).as_array()
        assert math.sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2]) <= 1e-3
        if np.linalg.norm(u) <= 1e-3:
            assert np.array_equal(out, u)

    @settings(max_examples=300, deadline=None)
    @given(u=vec3)
    def test_projection_inequality(self, u):
        # minimum-norm projection onto a convex set containing 0
        for mode in (TwoNormBall(1e-3), InfNormBox((1e-3, 2e-3, 5e-4)),
                     ConvexProjection.ball(1e-3), ConvexProjection.box((1e-3, 2e-3, 5e-4))):
            out = saturate(u, mode).as_array()
            assert -u @ out <= -out @ out + 1e-18
            assert mode.contains(out)

    def test_projection_ball_matches_two_norm(self):
        rng = np.random.default_rng(3)
        proj = ConvexProjection.ball(1e-3)
        custom = ConvexProjection.custom(lambda u: saturate(u, TwoNormBall(1e-3)).as_array())
        for u in rng.normal(scale=2e-3, size=(100, 3)):
            ref = saturate(u, TwoNormBall(1e-3)).as_array()
            np.testing.assert_allclose(saturate(u, proj).as_array(), ref, rtol=0, atol=1e-12)
            np.testing.assert_allclose(saturate(u, custom).as_array(), ref, rtol=0, atol=1e-12)

    def test_custom_rejects_non_projection(self):
        with pytest.raises(ValueError, match="idempotent"):
            ConvexProjection.custom(lambda u: 0.5 * np.asarray(u))
        with pytest.raises(ValueError, match="origin"):
            ConvexProjection.custom(lambda u: np.asarray(u) + 1e-4)
        check_projection(lambda u: np.clip(u, -1e-3, 1e-3))

    def test_invalid_modes(self):
        with pytest.raises(ValueError):
            TwoNormBall(0.0)
        with pytest.raises(ValueError):
            InfNormBox((1e-3, 1e-3))


class TestBarriers:
    def test_inactive_at_initial_state(self):
        t = barrier_terms(X14, CFG, weights())
        assert (t.b1, t.b2) == (0.0, 0.0)
        assert not np.any(t.grad_b1) and not np.any(t.grad_b2)

    def test_periapsis_barrier_value(self):
        x = OrbitalElements(6650.0, 0.0, 1.0, 0.0, 0.0)
        # 1/2 * (6650 - 6653)^2
        assert barrier_terms(x, CFG, weights(1.0, 0.0)).b1 == pytest.approx(4.5, rel=1e-12)

    def test_eccentricity_barrier_continuous(self):
        edge = X14.replace(e=CFG.e_min + CFG.eps2)
        assert barrier_terms(edge, CFG, weights()).b2 == 0.0
        below = X14.replace(e=CFG.e_min + CFG.eps2 - 1e-6)
        b2 = barrier_terms(below, CFG, weights(1.0, 2.0)).b2
        assert b2 == pytest.approx(0.5 * 2.0 * 1e-12, rel=1e-6)

    def test_gradient_matches_finite_difference(self):
        x = np.array([6660.0, 0.0012, 1.0, 0.5, 0.3])
        w = weights(2e-3, 5e3)
        t = barrier_terms(x, CFG, w)
        for k, h in ((0, 1e-3), (1, 1e-9)):
            dx = np.zeros(5)
            dx[k] = h
            fd = (sum(barrier_terms(x + dx, CFG, w)[:2]) - sum(barrier_terms(x - dx, CFG, w)[:2])) / (2 * h)
            assert (t.grad_b1 + t.grad_b2)[k] == pytest.approx(fd, rel=1e-6)


class TestLyapunov:
    def test_zero_at_target(self):
        assert lyapunov_value(X15, X15, CFG, weights()) == 0.0

    def test_initial_value(self):
        v = lyapunov_value(X14, X15, CFG, weights())
        assert v == pytest.approx(V0_14, rel=1e-12)
        assert v == pytest.approx(0.09445, rel=1e-3)

    def test_angle_differences_are_raw(self):
        far = X15.replace(raan=X15.raan + 2 * math.pi)
        assert nominal_value(far, X15, weights().P) == pytest.approx(0.5 * 0.0075 * (2 * math.pi) ** 2)

    @settings(max_examples=100, deadline=None)
    @given(a=st.floats(6700.0, 40000.0), e=st.floats(1e-3, 0.8), i=st.floats(0.1, 3.0))
    def test_bounded_below_by_quadratic(self, a, e, i):
        x = OrbitalElements(a, e, i, 1.0, 2.0)
        w = weights(1e-3, 1e5)
        assert lyapunov_value(x, X15, CFG, w) >= nominal_value(x, X15, w.P)


class TestNominalControl:
    def test_zero_at_target(self):
        u = nominal_control(X15, 0.7, X15, CFG, weights()).as_array()
        assert np.all(u == 0.0)

    def test_linear_in_p(self):
        w1 = weights()
        w2 = Weights(2.0 * w1.P, 1.0, 1.0)
        u1 = nominal_control(X14, 0.7, X15, CFG, w1).as_array()
        u2 = nominal_control(X14, 0.7, X15, CFG, w2).as_array()
        np.testing.assert_allclose(u2, 2.0 * u1, rtol=1e-14)

    @pytest.mark.parametrize("x", [X14, OrbitalElements(6668.0, 0.0013, 1.0, 0.4, 2.0)])
    def test_descent_direction(self, x):
        """grad V . (G U_nom) = -|U_nom|^2, with grad V by central differences."""
        w = weights(3e-4, 7.5e5)
        theta = 0.9
        u = nominal_control(x, theta, X15, CFG, w).as_array()
        xv = x.as_array()
        grad = np.empty(5)
        for k, h in enumerate((1e-2, 1e-8, 1e-6, 1e-6, 1e-6)):
            dx = np.zeros(5)
            dx[k] = h
            grad[k] = (lyapunov_value(xv + dx, X15, CFG, w)
                       - lyapunov_value(xv - dx, X15, CFG, w)) / (2 * h)
        lhs = grad @ gve_matrix(x, theta) @ u
        assert lhs == pytest.approx(-(u @ u), rel=1e-8)

    def test_feedback_saturates(self):
        u = feedback(X14, 0.7, X15, CFG, weights(), TwoNormBall(1e-3))
        assert u.norm() == pytest.approx(1e-3, rel=1e-15)
        assert u.norm() <= 1e-3


class TestWeightSizing:
    def test_min_weights(self):
        q1, q2 = min_weights(V0_14, CFG)
        assert q1 == pytest.approx(3.022e-4, rel=1e-3)
        assert q2 == pytest.approx(7.556e5, rel=1e-3)
        assert min_weights(0.0, CFG) == (0.0, 0.0)
        with pytest.raises(ValueError):
            min_weights(-1.0, CFG)

    def test_floor_at_target(self):
        w = sized_weights(X15, X15, CFG, weights().P)
        assert w.q1 > 0.0 and w.q2 > 0.0

    def test_reset_keeps_v(self):
        w = weights(1.0, 1.0)
        new = reset_weights(X14, X15, CFG, w)
        assert lyapunov_value(X14, X15, CFG, new) == lyapunov_value(X14, X15, CFG, w)
        assert new.q1 == pytest.approx(2 * V0_14 / 625.0, rel=1e-12)

    def test_reset_refused_with_active_barrier(self):
        with pytest.raises(ResetNotPermitted):
            reset_weights(OrbitalElements(6650.0, 0.002, 1.0, 0.0, 0.0), X15, CFG, weights())

    def test_resets_non_increasing_on_scenario(self, fig1_log):
        q1 = fig1_log.q1
        changes = np.flatnonzero(np.diff(q1))
        assert changes.size > 10
        assert np.all(np.diff(q1[np.r_[0, changes + 1]]) <= 0.0)
        q2 = fig1_log.q2
        assert np.all(np.diff(q2[np.r_[0, changes + 1]]) <= 0.0)
