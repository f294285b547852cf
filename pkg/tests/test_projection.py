import math

import numpy as np
import pytest

from obd.costs import make_composite, make_norm_tracking, make_quadratic
from obd.geometry import (
    FeasibleSet, Norm, bregman_divergence, entropy_map, euclidean_map,
    mahalanobis_map,
)
from obd.projection import (
    InfeasibleLevel, project_set, project_sublevel, solve_regularized,
)

EMAP = euclidean_map()


def golden_section(f, lo, hi, iters=200):
    phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    for _ in range(iters):
        c, d = b - phi * (b - a), a + phi * (b - a)
        if f(c) < f(d):
            b = d
        else:
            a = c
    return 0.5 * (a + b)


class TestSolveRegularized:
    def test_zero_eta_projects_only(self):
        f = make_quadratic(np.eye(2), np.ones(2))
        x = solve_regularized(EMAP, f, 0.0, [0.3, -0.2],
                              FeasibleSet.whole_space(2))
        np.testing.assert_allclose(x, [0.3, -0.2])

    def test_scalar_quadratic(self):
        # argmin 0.5*(x-3)^2 + x^2 = 1, cross-checked by golden section
        f = make_quadratic(np.eye(1), np.zeros(1))
        x = solve_regularized(EMAP, f, 1.0, [3.0], FeasibleSet.whole_space(1))
        assert x[0] == pytest.approx(1.0, abs=1e-10)
        ref = golden_section(lambda u: 0.5 * (u - 3) ** 2 + u * u, -5, 5)
        assert x[0] == pytest.approx(ref, abs=1e-7)

    def test_level_monotone_in_eta(self):
        rng = np.random.default_rng(20)
        f = make_quadratic(rng.standard_normal((2, 2)) + 2 * np.eye(2),
                           rng.standard_normal(2))
        x_prev = rng.standard_normal(2) * 3
        vals = [f(solve_regularized(EMAP, f, eta, x_prev,
                                    FeasibleSet.whole_space(2)))
                for eta in (0.0, 0.5, 1.0, 2.0, 4.0)]
        assert all(a >= b - 1e-10 for a, b in zip(vals, vals[1:]))

    def test_respects_feasible_set(self):
        f = make_quadratic(np.eye(2), np.array([2.0, 2.0]))
        box = FeasibleSet.box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        x = solve_regularized(EMAP, f, 50.0, np.zeros(2), box)
        assert box.contains(x, tol=1e-9)
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-6)


class TestProjectSet:
    def test_hyperplane_from_origin(self):
        s = FeasibleSet.hyperplane(np.array([1.0, 0.0, 0.0]), -1.0)
        p = project_set(EMAP, s, np.zeros(3))
        np.testing.assert_allclose(p, [-1.0, 0.0, 0.0])
        assert np.linalg.norm(p) == 1.0

    def test_inside_unchanged(self):
        ball = FeasibleSet.ball(np.zeros(2), 5.0)
        x = np.array([1.0, -2.0])
        np.testing.assert_array_equal(project_set(EMAP, ball, x), x)

    def test_simplex_projection_against_sampling(self):
        s = FeasibleSet.simplex(3, 0.01)
        x = np.array([0.9, 0.2, -0.1])
        p = project_set(EMAP, s, x)
        assert s.contains(p, tol=1e-9)
        assert p.min() >= 0.01 - 1e-12
        # grid over the simplex at ~1e-3 resolution cannot beat the projection
        best = np.inf
        for a in np.arange(0.01, 0.99, 1e-3):
            for b in np.arange(0.01, 1.0 - a - 0.01 + 1e-12, 4e-3):
                c = 1.0 - a - b
                if c < 0.01:
                    continue
                d2 = (a - 0.9) ** 2 + (b - 0.2) ** 2 + (c + 0.1) ** 2
                best = min(best, d2)
        assert float((p - x) @ (p - x)) <= best + 1e-7

    def test_mahalanobis_affine(self):
        Q = np.array([[2.0, 0.5], [0.5, 1.0]])
        mmap = mahalanobis_map(Q)
        s = FeasibleSet.hyperplane(np.array([1.0, 1.0]), 1.0)
        x = np.array([2.0, 2.0])
        p = project_set(mmap, s, x)
        assert s.contains(p, tol=1e-9)
        # optimality among sampled feasible points in the Q geometry
        rng = np.random.default_rng(21)
        dp = bregman_divergence(mmap, p, x)
        for _ in range(500):
            tvec = rng.standard_normal() * np.array([1.0, -1.0])
            y = p + tvec
            assert bregman_divergence(mmap, y, x) >= dp - 1e-10

    def test_entropy_simplex_scaled_renormalization(self):
        ent = entropy_map(0.01)
        s = FeasibleSet.simplex(4, 0.01)
        y = np.array([0.4, 0.3, 0.2, 0.1]) * 2.3
        p = project_set(ent, s, y)
        assert s.contains(p, tol=1e-10)
        np.testing.assert_allclose(p, y / y.sum(), atol=1e-12)
        # clamped case: tiny coordinate pinned at delta
        y2 = np.array([1.0, 1.0, 1.0, 1e-6])
        p2 = project_set(ent, s, y2)
        assert p2[3] == pytest.approx(0.01, abs=1e-12)
        assert p2.sum() == pytest.approx(1.0, abs=1e-12)

    def test_l1_and_linf_balls(self):
        b1 = FeasibleSet.ball(np.zeros(3), 1.0, Norm.l1())
        p1 = project_set(EMAP, b1, np.array([2.0, 0.5, -0.5]))
        assert np.abs(p1).sum() == pytest.approx(1.0, abs=1e-9)
        binf = FeasibleSet.ball(np.zeros(3), 1.0, Norm.linf())
        pinf = project_set(EMAP, binf, np.array([2.0, 0.5, -3.0]))
        np.testing.assert_allclose(pinf, [1.0, 0.5, -1.0])


class TestProjectSublevel:
    def test_scalar_parabola(self):
        f = make_quadratic(np.eye(1), np.zeros(1))
        res = project_sublevel(EMAP, f, 1.0, [3.0])
        assert res.x[0] == pytest.approx(1.0, abs=1e-9)
        assert res.eta == pytest.approx(1.0, abs=1e-8)
        assert res.active

    def test_inactive_level(self):
        f = make_quadratic(np.eye(1), np.zeros(1))
        res = project_sublevel(EMAP, f, 10.0, [2.0])
        assert not res.active and res.eta == 0.0
        assert res.x[0] == 2.0

    def test_norm_ball_level_set(self):
        f = make_norm_tracking(np.zeros(2), Norm.l2())
        res = project_sublevel(EMAP, f, 1.0, [3.0, 4.0])
        np.testing.assert_allclose(res.x, [0.6, 0.8], atol=1e-12)
        assert np.linalg.norm(res.x - [3.0, 4.0]) == pytest.approx(4.0)
        assert res.eta == pytest.approx(4.0)
        # optimality against points sampled inside the level set
        rng = np.random.default_rng(22)
        for _ in range(2000):
            u = rng.standard_normal(2)
            y = u / np.linalg.norm(u) * rng.random()
            assert np.sum((y - [3.0, 4.0]) ** 2) >= 16.0 - 1e-9

    def test_infeasible_level(self):
        f = make_quadratic(np.eye(1), np.zeros(1))
        with pytest.raises(InfeasibleLevel):
            project_sublevel(EMAP, f, -0.5, [3.0])

    def test_indicator_rejected(self):
        from obd.costs import adversary_step
        f = adversary_step(np.zeros(2), 1)
        with pytest.raises(ValueError):
            project_sublevel(EMAP, f, 0.0, np.zeros(2))

    def test_pythagorean_inequality(self):
        rng = np.random.default_rng(23)
        for trial in range(20):
            d = int(rng.integers(2, 5))
            A = rng.standard_normal((d, d)) + (1 + trial % 3) * np.eye(d)
            f = make_quadratic(A, rng.standard_normal(d))
            x_prev = f.minimizer + rng.standard_normal(d)
            l = f.min_value + 0.4 * (f(x_prev) - f.min_value)
            res = project_sublevel(EMAP, f, l, x_prev)
            w, W = np.linalg.eigh(f.AtA)
            for _ in range(100):
                u = rng.standard_normal(d)
                u *= rng.random() / np.linalg.norm(u)
                y = f.minimizer + W @ (u * np.sqrt(max(l - f.min_value, 0) / np.maximum(w, 1e-12)))
                assert f(y) <= l + 1e-8
                lhs = (bregman_divergence(EMAP, res.x, x_prev)
                       + bregman_divergence(EMAP, y, res.x))
                assert lhs <= bregman_divergence(EMAP, y, x_prev) + 1e-7

    def test_kkt_and_idempotence(self):
        rng = np.random.default_rng(24)
        for _ in range(20):
            A = rng.standard_normal((3, 3)) + 2.5 * np.eye(3)
            f = make_quadratic(A, rng.standard_normal(3))
            x_prev = f.minimizer + rng.standard_normal(3)
            l = f.min_value + 0.5 * (f(x_prev) - f.min_value)
            res = project_sublevel(EMAP, f, l, x_prev)
            # stationarity, complementarity, idempotence
            stat = res.x - x_prev + res.eta * f.grad(res.x)
            assert np.linalg.norm(stat) <= 1e-6
            assert abs(res.eta * (f(res.x) - l)) <= 1e-6
            again = project_sublevel(EMAP, f, l, res.x)
            assert np.linalg.norm(again.x - res.x) <= 1e-7

    def test_composite_generic_path(self):
        g = make_norm_tracking(np.zeros(2), Norm.l1())
        h = make_quadratic(np.eye(2), np.zeros(2))
        f = make_composite(g, h)
        x_prev = np.array([2.0, 1.0])
        l = 0.4 * f(x_prev)
        res = project_sublevel(EMAP, f, l, x_prev)
        assert abs(f(res.x) - l) <= 1e-8 * max(1.0, l)
        # optimal among sampled level-set points
        rng = np.random.default_rng(25)
        d2 = float((res.x - x_prev) @ (res.x - x_prev))
        hits = 0
        for _ in range(4000):
            y = rng.standard_normal(2) * 1.5
            if f(y) <= l:
                hits += 1
                assert float((y - x_prev) @ (y - x_prev)) >= d2 - 1e-6
        assert hits > 50

    def test_mirror_update_forms(self):
        rng = np.random.default_rng(26)
        A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        f = make_quadratic(A, rng.standard_normal(3))
        x_prev = f.minimizer + rng.standard_normal(3)
        l = f.min_value + 0.3 * (f(x_prev) - f.min_value)

        res = project_sublevel(EMAP, f, l, x_prev)
        np.testing.assert_allclose(res.x, x_prev - res.eta * f.grad(res.x),
                                   atol=1e-6)

        Q = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.0], [0.0, 0.0, 0.5]])
        mmap = mahalanobis_map(Q)
        res2 = project_sublevel(mmap, f, l, x_prev)
        np.testing.assert_allclose(
            res2.x, x_prev - res2.eta * np.linalg.solve(Q, f.grad(res2.x)),
            atol=1e-6)

    def test_entropy_multiplicative_form(self):
        d, delta = 4, 0.01
        ent = entropy_map(delta)
        simplex = FeasibleSet.simplex(d, delta)
        rng = np.random.default_rng(27)
        v = np.array([0.4, 0.3, 0.2, 0.1])
        A = np.eye(d) + 0.2 * rng.standard_normal((d, d))
        f = make_quadratic(A, A @ v)
        x_prev = np.array([0.1, 0.2, 0.3, 0.4])
        l = f.min_value + 0.4 * (f(x_prev) - f.min_value)
        res = project_sublevel(ent, f, l, x_prev, simplex)
        assert abs(f(res.x) - l) <= 1e-7 * max(1.0, l)
        # componentwise multiplicative update, renormalized onto the simplex
        mult = x_prev * np.exp(-res.eta * f.grad(res.x))
        mult /= mult.sum()
        np.testing.assert_allclose(res.x, mult, atol=1e-6)
