import math

import numpy as np
import pytest
from scipy.optimize import minimize

from gvebarrier import (ConstraintConfig, GovernorConfig, GovernorState, InfeasibleInitialState,
                        InfeasibleTerminalSet, OrbitalElements, TwoNormBall, Weights,
                        governor_update, in_terminal_set, initialize_governor, predict_terminal,
                        terminal_level)
from gvebarrier.controller import nominal_value, sized_weights
from gvebarrier.governor import min_eccentricity_on_level, min_periapsis_on_level
from gvebarrier.propagation import ClosedLoop

CFG = ConstraintConfig()
P_DIAG = (5e-11, 0.01, 0.005, 0.0075, 5e-4)
P = np.diag(P_DIAG)
W0 = Weights(P, 0.0, 0.0)
X14 = OrbitalElements(21378.0, 0.65, math.pi / 10, 0.0, math.pi)
X15 = OrbitalElements(6878.0, 0.02, math.pi / 2, 3 * math.pi / 2, math.pi)
LOOP = ClosedLoop(CFG, TwoNormBall(1e-3))


def ellipsoid_surface(center, P, c0, n, rng):
    """Uniform directions on {x : 1/2 dx^T P dx = c0}."""
    L = np.linalg.cholesky(P)
    z = rng.normal(size=(n, 5))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return center + math.sqrt(2.0 * c0) * np.linalg.solve(L.T, z.T).T


def random_target(rng):
    while True:
        a = rng.uniform(6800.0, 12000.0)
        e = rng.uniform(0.003, 0.3)
        if a * (1 - e) > 6700.0:
            return np.array([a, e, rng.uniform(0.2, 3.0), rng.uniform(0, 6), rng.uniform(0, 6)])


class TestTerminalLevel:
    def test_positive_at_initial_state(self):
        assert terminal_level(X14, W0, CFG) > 0.0

    def test_target_on_margin_raises(self):
        e = 0.02
        a = (CFG.r_min + CFG.eps1) / (1 - e)
        with pytest.raises(InfeasibleTerminalSet):
            terminal_level(X15.replace(a=a, e=e), W0, CFG)

    def test_reduced_method_matches_monte_carlo(self):
        rng = np.random.default_rng(5)
        for _ in range(3):
            xt = random_target(rng)
            c0 = terminal_level(xt, W0, CFG)
            # projected surface samples approach the shadow edge slowly, so
            # 10^7 samples are needed for 10^-3 agreement
            rp_mc, e_mc = np.inf, np.inf
            for _ in range(10):
                pts = ellipsoid_surface(xt, P, c0, 1_000_000, rng)
                rp_mc = min(rp_mc, np.min(pts[:, 0] * (1 - pts[:, 1])))
                e_mc = min(e_mc, np.min(pts[:, 1]))
            rp_t = xt[0] * (1 - xt[1])
            rp = min_periapsis_on_level(xt, P, c0)
            e_min = min_eccentricity_on_level(xt, P, c0)
            # depth of the excursion below the center, compared relatively
            assert rp_t - rp == pytest.approx(rp_t - rp_mc, rel=1e-3)
            assert xt[1] - e_min == pytest.approx(xt[1] - e_mc, rel=1e-3)
            # margins hold on the whole set, and one of them is tight
            assert rp_mc >= CFG.r_min + CFG.eps1 - 1e-9
            assert e_mc >= CFG.e_min + CFG.eps2 - 1e-12
            tight = min(rp - CFG.r_min - CFG.eps1, (e_min - CFG.e_min - CFG.eps2) * 1e5)
            assert abs(tight) < 1e-6

    def test_reduced_method_matches_constrained_optimum(self):
        rng = np.random.default_rng(8)
        for _ in range(3):
            xt = random_target(rng)
            c0 = terminal_level(xt, W0, CFG)
            scale = np.sqrt(2 * c0 / np.array(P_DIAG))
            best = np.inf
            for sign in (1.0, -1.0):
                z0 = np.zeros(5)
                z0[0], z0[1] = -0.7 * sign, 0.7
                level = {"type": "eq",
                         "fun": lambda z: nominal_value(xt + z * scale, xt, P) / c0 - 1.0}
                res = minimize(lambda z: (xt[0] + z[0] * scale[0]) * (1 - xt[1] - z[1] * scale[1]),
                               z0, constraints=[level], method="SLSQP",
                               options={"ftol": 1e-14, "maxiter": 500})
                best = min(best, res.fun)
            assert min_periapsis_on_level(xt, P, c0) == pytest.approx(best, rel=1e-9)

    def test_membership(self):
        c0 = terminal_level(X15, W0, CFG)
        assert in_terminal_set(X15, X15, W0, c0)
        da = math.sqrt(2 * c0 / P_DIAG[0])
        assert not in_terminal_set(X15.replace(a=X15.a + 1.01 * da), X15, W0, c0)
        assert in_terminal_set(X15.replace(a=X15.a + 0.99 * da), X15, W0, c0)
        edge = X15.as_array()
        edge[3] += math.sqrt(2 * c0 / P_DIAG[3])
        assert nominal_value(edge, X15, P) == pytest.approx(c0, rel=1e-14)


class TestPrediction:
    def test_empty_horizon(self):
        w = sized_weights(X14, X15, CFG, P)
        assert predict_terminal(X14, math.pi, X15, LOOP, w, 0.0) == X14

    def test_equilibrium(self):
        w = sized_weights(X15, X15, CFG, P)
        assert predict_terminal(X15, 0.3, X15, LOOP, w, 3600.0) == X15

    def test_matches_logged_propagation(self):
        target = X14.as_array() + 0.25 * (X15.as_array() - X14.as_array())
        w = sized_weights(X14, target, CFG, P)
        t_hor = 4 * 3600.0
        pred = predict_terminal(X14, math.pi, target, LOOP, w, t_hor)
        y0 = np.r_[X14.as_array(), math.pi]
        grid, states = LOOP.integrate(y0, t_hor, target, w, offsets=np.arange(60.0, t_hor, 60.0))
        assert grid[-1] == t_hor
        assert np.array_equal(states[-1, :5], pred.as_array())

    def test_barrier_grazing_prediction_completes(self):
        # LSODA alone locks into tiny non-stiff steps here as the state
        # leaves the periapsis margin around t = 9200 s
        x = OrbitalElements(21348.622686125487, 0.6518710831507725, 0.34160747276470005,
                            0.0038781751583036148, 3.1399842992535776)
        w = Weights(P, 0.00030126822274111395, 753170.5568527849)
        end = predict_terminal(x, 3.241448309078356, X15, LOOP, w, 4 * 3600.0)
        assert end.a * (1.0 - end.e) > CFG.r_min
        assert end.a < x.a


class TestGovernorUpdate:
    def gcfg(self, **kw):
        return GovernorConfig(t_hor=kw.pop("t_hor", 4 * 3600.0), **kw)

    def test_initialize(self):
        gs = initialize_governor(X14, CFG)
        assert gs.x_des_virtual == X14 and gs.kappa_last == 0.0
        with pytest.raises(InfeasibleInitialState):
            initialize_governor(OrbitalElements(6600.0, 0.01, 1.0, 0.0, 0.0), CFG)
        a = CFG.r_min / (1 - 0.01)
        assert initialize_governor(OrbitalElements(a, 0.01, 1.0, 0.0, 0.0), CFG) is not None

    def test_fixed_point_at_final_target(self):
        gs = GovernorState(X15, 0.0, sized_weights(X14, X15, CFG, P), terminal_level(X15, W0, CFG))
        new, info = governor_update(gs, X14, math.pi, X15, self.gcfg(), LOOP)
        assert new.x_des_virtual == X15
        assert info.skipped == "at final target"

    def test_update_law(self):
        gs = GovernorState(X14, 0.0, sized_weights(X14, X14, CFG, P), terminal_level(X14, W0, CFG))
        new, info = governor_update(gs, X14, math.pi, X15, self.gcfg(), LOOP)
        assert 0.0 < info.kappa <= 1.0
        assert info.terminal_ok is True
        before = np.linalg.norm(X14.as_array() - X15.as_array())
        after = np.linalg.norm(new.x_des_virtual.as_array() - X15.as_array())
        assert after == pytest.approx((1 - info.kappa) * before, rel=1e-12)
        # the accepted candidate lands in its terminal set
        pred = predict_terminal(X14, math.pi, new.x_des_virtual, LOOP, new.weights, 4 * 3600.0)
        assert in_terminal_set(pred, new.x_des_virtual, new.weights, new.c0)

    def test_kappa_zero_stays_feasible(self):
        gs = GovernorState(X14, 0.0, sized_weights(X14, X14, CFG, P), terminal_level(X14, W0, CFG))
        new, info = governor_update(gs, X14, math.pi, X15, self.gcfg(bisection_iters=3,
                                                                     t_hor=600.0), LOOP)
        assert info.kappa == 0.0 or info.terminal_ok
        if info.kappa == 0.0:
            assert new.x_des_virtual == X14

    def test_final_step_never_rejected_as_small(self):
        near = X15.as_array().copy()
        near[4] += 1e-9
        gs = GovernorState(OrbitalElements.from_array(near), 0.0,
                           sized_weights(near, near, CFG, P), terminal_level(near, W0, CFG))
        new, info = governor_update(gs, near, 0.0, X15, self.gcfg(t_hor=600.0), LOOP)
        assert info.kappa == 1.0 and new.x_des_virtual == X15

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GovernorConfig(t_hor=0.0)
        with pytest.raises(ValueError):
            GovernorConfig(t_hor=1.0, bisection_iters=0)
        with pytest.raises(ValueError):
            GovernorState(X14, 1.5)
