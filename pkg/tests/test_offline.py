import math

import numpy as np
import pytest

from obd.costs import InstanceSpec, generate_instance, make_norm_tracking, make_quadratic
from obd.geometry import Norm
from obd.offline import (
    GridSpec, auto_grid, grid_dp_oracle, offline_opt, offline_opt_constrained,
    static_opt,
)


def abs_cost(target):
    return make_norm_tracking([float(target)], Norm.l2())


class TestOfflineOpt:
    def test_two_round_absolute(self):
        # f1 = f2 = |x - 1| from 0: move to 1 once, objective 1
        sol = offline_opt([abs_cost(1.0), abs_cost(1.0)], [0.0])
        np.testing.assert_allclose(sol.trajectory.ravel(), [1.0, 1.0], atol=1e-4)
        assert sol.objective == pytest.approx(1.0, abs=1e-5)
        dp = grid_dp_oracle([abs_cost(1.0), abs_cost(1.0)], [0.0],
                            GridSpec([-2.0], [3.0], 41))
        assert sol.objective == pytest.approx(dp.objective, rel=1e-3)

    def test_stay_put_when_free(self):
        f = make_quadratic(np.eye(2), np.zeros(2))
        sol = offline_opt([f, f, f], np.zeros(2))
        assert sol.objective == pytest.approx(0.0, abs=1e-9)
        assert sol.total_move == pytest.approx(0.0, abs=1e-9)

    def test_matches_dp_on_seeded_quadratic(self):
        spec = InstanceSpec(d=2, T=5, family="quadratic", seed=42)
        inst = generate_instance(spec)
        sol = offline_opt(inst.costs, inst.x0)
        dp = grid_dp_oracle(inst.costs, inst.x0)
        assert sol.objective == pytest.approx(dp.objective, rel=1e-3)

    def test_lower_bounds_any_algorithm(self):
        from obd.algorithms import Greedy, PrimalConfig, PrimalOBD
        from obd.geometry import euclidean_map
        from obd.harness import run
        spec = InstanceSpec(d=3, T=20, family="norm_tracking", seed=43)
        inst = generate_instance(spec)
        opt = offline_opt(inst.costs, inst.x0)
        for algo in (Greedy(), PrimalOBD(PrimalConfig(0.5, euclidean_map()))):
            rep = run(algo, inst, comparators=())
            assert opt.objective <= rep.total_cost * (1 + 1e-5)

    def test_first_order_residual_flag(self):
        spec = InstanceSpec(d=2, T=10, family="quadratic", seed=44)
        inst = generate_instance(spec)
        sol = offline_opt(inst.costs, inst.x0)
        assert sol.converged


class TestConstrained:
    def test_slack_budget_equals_opt(self):
        costs = [abs_cost(1.0), abs_cost(1.0)]
        free = offline_opt(costs, [0.0])
        sol = offline_opt_constrained(costs, [0.0], 10.0)
        assert sol.lam == 0.0
        assert sol.objective == pytest.approx(free.objective)

    def test_zero_budget_pins_start(self):
        costs = [abs_cost(1.0), abs_cost(1.0)]
        sol = offline_opt_constrained(costs, [0.0], 0.0)
        np.testing.assert_array_equal(sol.trajectory, [[0.0], [0.0]])
        assert sol.objective == pytest.approx(2.0)
        assert sol.total_move == 0.0

    def test_half_budget_scalar(self):
        # best movement-0.5 play: go to 0.5 and stay -> 0.5 + 0.5 + 0.5
        costs = [abs_cost(1.0), abs_cost(1.0)]
        sol = offline_opt_constrained(costs, [0.0], 0.5)
        assert sol.total_move <= 0.5 + 1e-9
        assert sol.total_move >= 0.5 * (1 - 1e-4)
        assert sol.objective == pytest.approx(1.5, abs=2e-4)
        # 1-d enumeration over stopping points p in [0, 0.5]
        best = min(p + 2 * (1 - p) for p in np.linspace(0, 0.5, 2001))
        assert sol.objective == pytest.approx(best, abs=2e-4)

    def test_objective_monotone_in_budget(self):
        spec = InstanceSpec(d=2, T=8, family="quadratic", seed=45)
        inst = generate_instance(spec)
        opt = offline_opt(inst.costs, inst.x0)
        budgets = [0.0, 0.25 * opt.total_move, 0.5 * opt.total_move,
                   opt.total_move, 2 * opt.total_move]
        objs = [offline_opt_constrained(inst.costs, inst.x0, L,
                                        base=opt).objective for L in budgets]
        for a, b in zip(objs, objs[1:]):
            assert a >= b - 1e-6 * max(1.0, abs(b))
        assert objs[-1] == pytest.approx(opt.objective)

    def test_binding_budget_movement_window(self):
        spec = InstanceSpec(d=2, T=8, family="quadratic", seed=46)
        inst = generate_instance(spec)
        opt = offline_opt(inst.costs, inst.x0)
        L = 0.4 * opt.total_move
        sol = offline_opt_constrained(inst.costs, inst.x0, L, base=opt)
        assert sol.converged
        assert L * (1 - 1e-4) <= sol.total_move <= L * (1 + 1e-12)
        assert sol.lam > 0

    def test_penalized_optimality_certificate(self):
        # at the recovered multiplier the trajectory minimizes the penalized
        # objective, checked against a weighted DP oracle
        spec = InstanceSpec(d=1, T=6, family="norm_tracking", seed=47)
        inst = generate_instance(spec)
        opt = offline_opt(inst.costs, inst.x0)
        L = 0.5 * opt.total_move
        sol = offline_opt_constrained(inst.costs, inst.x0, L, base=opt)
        w = 1.0 + sol.lam
        penalized = sol.total_hit + w * sol.total_move
        dp = grid_dp_oracle(inst.costs, inst.x0, move_weight=w, refine=3)
        assert penalized <= dp.objective * (1 + 1e-3)

    def test_negative_budget_rejected(self):
        with pytest.raises(ValueError):
            offline_opt_constrained([abs_cost(0.0)], [0.0], -1.0)


class TestStatic:
    def test_three_targets(self):
        costs = [abs_cost(t) for t in (1.0, 2.0, 3.0)]
        sol = static_opt(costs, [0.0])
        assert sol.objective == pytest.approx(4.0, abs=1e-4)
        xs = np.linspace(-1, 4, 2001)
        best = min(abs(x) + sum(abs(x - t) for t in (1, 2, 3)) for x in xs)
        assert sol.objective == pytest.approx(best, abs=1e-4)

    def test_single_round_matches_opt(self):
        f = make_quadratic(np.diag([2.0, 1.0]), np.array([1.0, 1.0]))
        a = static_opt([f], np.zeros(2))
        b = offline_opt([f], np.zeros(2))
        assert a.objective == pytest.approx(b.objective, rel=1e-6)

    def test_moves_to_shared_minimizer(self):
        v = np.array([0.5, -0.25])
        costs = [make_norm_tracking(v, Norm.l2()) for _ in range(10)]
        sol = static_opt(costs, np.zeros(2))
        # scanning the segment x0 -> v confirms the endpoint is optimal
        vals = []
        for lam in np.linspace(0, 1, 501):
            x = lam * v
            vals.append(np.linalg.norm(x) + 10 * np.linalg.norm(x - v))
        assert sol.objective == pytest.approx(min(vals), abs=1e-6)
        np.testing.assert_allclose(sol.trajectory[0], v, atol=1e-6)


class TestGridOracle:
    def test_single_round(self):
        f = abs_cost(1.0)
        dp = grid_dp_oracle([f], [0.0], GridSpec([-2.0], [3.0], 101))
        assert dp.objective == pytest.approx(1.0, abs=1e-6)

    def test_monotone_under_resolution(self):
        spec = InstanceSpec(d=2, T=4, family="norm_tracking", seed=48)
        inst = generate_instance(spec)
        grid = auto_grid(inst.costs, inst.x0)
        objs = []
        for pts in (9, 17, 33):
            g = GridSpec(grid.lo, grid.hi, pts)
            objs.append(grid_dp_oracle(inst.costs, inst.x0, g, refine=0).objective)
        for a, b in zip(objs, objs[1:]):
            assert a >= b - 1e-12

    def test_refinement_improves(self):
        spec = InstanceSpec(d=2, T=4, family="quadratic", seed=49)
        inst = generate_instance(spec)
        coarse = grid_dp_oracle(inst.costs, inst.x0, refine=0)
        fine = grid_dp_oracle(inst.costs, inst.x0, refine=2)
        assert fine.objective <= coarse.objective + 1e-12
        assert fine.uncertainty < coarse.uncertainty

    def test_size_limits(self):
        f = abs_cost(0.0)
        with pytest.raises(ValueError):
            grid_dp_oracle([f] * 9, [0.0])
        spec = InstanceSpec(d=2, T=2, family="quadratic", seed=50)
        inst = generate_instance(spec)
        with pytest.raises(ValueError):
            grid_dp_oracle(inst.costs, inst.x0,
                           GridSpec([-1.0, -1.0], [1.0, 1.0], 700))

    def test_indicator_costs_supported(self):
        # the adversary run: offline optimum moves once to the intersection
        from obd.costs import adversary_step
        fs = [adversary_step(np.zeros(2), 1)]
        fs.append(adversary_step(np.array([-1.0, 0.0]), 2))
        grid = GridSpec([-1.5, -1.5], [1.5, 1.5], 7)
        dp = grid_dp_oracle(fs, np.zeros(2), grid, refine=0)
        assert dp.objective == pytest.approx(math.sqrt(2.0), abs=1e-12)
