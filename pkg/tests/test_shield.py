import math

import numpy as np
import pytest

import helpers
from safenav import world as wd
from safenav.shield import (CONVERGED, HARD, INFEASIBLE, MpcShield, SOFT,
                            SectorObstacle, ShieldParams, ShieldWeights,
                            make_problem, mpc_tuned_weights, rollout,
                            select_sector_obstacles, soft_cost, soft_cost_grad,
                            solve_hard, solve_soft)

PARAMS = ShieldParams()
WP = wd.WorldParams()


def scan_of(ranges):
    return wd.LidarScan(ranges=np.asarray(ranges, dtype=np.float64),
                        max_range=WP.lidar_max_range)


def plain_problem(obstacles=None, a_rl=(0.3, 0.2), weights=None, mode=SOFT,
                  x0=(0.0, 0.0, 0.0)):
    if obstacles is None:
        obstacles = [SectorObstacle(5.0, a, (5 * math.cos(a), 5 * math.sin(a)))
                     for a in (0.0, math.pi / 2, math.pi, -math.pi / 2)]
    if weights is None:
        weights = ShieldWeights(1.0, 1.0, np.zeros(4))
    return make_problem(PARAMS, np.array(x0, dtype=float), np.array(a_rl), weights,
                        obstacles, mode)


# -- sector extraction -------------------------------------------------------

def test_sectors_all_max_range_tie_break():
    robot = wd.Pose(0.0, 0.0, 0.0)
    sectors = select_sector_obstacles(scan_of(np.full(100, 5.0)), robot, 4)
    assert len(sectors) == 4
    for i, s in enumerate(sectors):
        assert s.distance == 5.0
        beam = 2 * math.pi * (i * 25) / 100
        assert s.angle == pytest.approx(wd.wrap_angle(beam))


def test_sectors_single_dip():
    ranges = np.full(100, 5.0)
    ranges[10] = 0.8
    sectors = select_sector_obstacles(scan_of(ranges), wd.Pose(1.0, 2.0, 0.3), 4)
    assert sectors[0].distance == 0.8
    assert sectors[0].angle == pytest.approx(2 * math.pi * 10 / 100)
    ang = 0.3 + 2 * math.pi * 10 / 100
    assert sectors[0].world_point == pytest.approx((1.0 + 0.8 * math.cos(ang),
                                                    2.0 + 0.8 * math.sin(ang)))
    assert all(s.distance == 5.0 for s in sectors[1:])


def test_sector_width_for_m4():
    sectors = select_sector_obstacles(scan_of(np.arange(1, 101)), wd.Pose(0, 0, 0), 4)
    # minimum of each 25-beam block is its first beam for increasing ranges
    assert [s.distance for s in sectors] == [1.0, 26.0, 51.0, 76.0]


def test_sectors_requires_equal_split():
    with pytest.raises(ValueError):
        select_sector_obstacles(scan_of(np.full(100, 5.0)), wd.Pose(0, 0, 0), 3)


def test_sectors_match_bruteforce_oracle_with_ties():
    rng = np.random.default_rng(7)
    for _ in range(100):
        ranges = rng.choice([0.5, 1.0, 2.0, 3.5, 5.0], size=100)
        robot = wd.Pose(*rng.uniform(-3, 3, size=2), rng.uniform(-math.pi, math.pi))
        got = select_sector_obstacles(scan_of(ranges), robot, 4)
        want = helpers.sector_oracle(scan_of(ranges), robot, 4)
        for g, w in zip(got, want):
            assert g.distance == w.distance
            assert g.angle == w.angle
            assert g.world_point == w.world_point


# -- cost -----------------------------------------------------------------------

def test_soft_cost_zero_case():
    p = plain_problem(a_rl=(0.3, 0.2))
    actions = np.zeros((PARAMS.horizon, 2))
    actions[0] = (0.3, 0.2)
    assert soft_cost(p, actions) == 0.0


def test_soft_cost_linear_in_omega():
    obstacles = [SectorObstacle(1.5, 0.0, (1.5, 0.0)),
                 SectorObstacle(5.0, math.pi / 2, (0.0, 5.0)),
                 SectorObstacle(5.0, math.pi, (-5.0, 0.0)),
                 SectorObstacle(5.0, -math.pi / 2, (0.0, -5.0))]
    w1 = ShieldWeights(1.0, 1.0, np.array([0.7, 0.0, 0.0, 0.0]))
    w2 = ShieldWeights(1.0, 1.0, np.array([1.4, 0.0, 0.0, 0.0]))
    rng = np.random.default_rng(0)
    actions = rng.uniform(PARAMS.action_low, PARAMS.action_high,
                          size=(PARAMS.horizon, 2))
    c1 = soft_cost(plain_problem(obstacles, weights=w1), actions)
    c2 = soft_cost(plain_problem(obstacles, weights=w2), actions)
    # doubling one omega adds exactly omega * sum_k 1/dist_k
    states = rollout(np.zeros(3), actions, PARAMS.dt)
    dists = np.maximum(np.hypot(states[1:PARAMS.horizon, 0] - 1.5,
                                states[1:PARAMS.horizon, 1]) - PARAMS.robot_radius,
                       PARAMS.d_floor)
    assert c2 - c1 == pytest.approx(0.7 * float(np.sum(1.0 / dists)), rel=1e-12)


def test_soft_cost_hand_trajectory():
    # stationary robot, one obstacle with surface distance exactly 1 m, T=5:
    # obstacle term = 0.5 * 4 / 1.0 = 2.0, all other terms vanish
    obstacles = [SectorObstacle(1.25, 0.0, (1.25, 0.0)),
                 SectorObstacle(5.0, math.pi / 2, (0.0, 5.0)),
                 SectorObstacle(5.0, math.pi, (-5.0, 0.0)),
                 SectorObstacle(5.0, -math.pi / 2, (0.0, -5.0))]
    weights = ShieldWeights(1.0, 1.0, np.array([0.5, 0.0, 0.0, 0.0]))
    p = plain_problem(obstacles, a_rl=(0.0, 0.0), weights=weights)
    p.horizon = 5
    p.__post_init__()
    assert soft_cost(p, np.zeros((5, 2))) == pytest.approx(2.0, abs=1e-12)


def test_soft_cost_monotone_in_weights():
    rng = np.random.default_rng(1)
    params = PARAMS
    for _ in range(50):
        p = helpers.random_soft_problem(rng, params)
        actions = rng.uniform(params.action_low, params.action_high,
                              size=(params.horizon, 2))
        base = soft_cost(p, actions)
        bumped = ShieldWeights(p.weights.r0_v + 0.5, p.weights.r0_w,
                               p.weights.omega.copy())
        p2 = plain_problem(p.obstacles, a_rl=p.a_rl, weights=bumped, x0=p.x0)
        assert soft_cost(p2, actions) >= base - 1e-12
        j = int(rng.integers(0, 4))
        omega = p.weights.omega.copy()
        omega[j] += 0.5
        p3 = plain_problem(p.obstacles, a_rl=p.a_rl,
                           weights=ShieldWeights(p.weights.r0_v, p.weights.r0_w, omega),
                           x0=p.x0)
        assert soft_cost(p3, actions) >= base - 1e-12


def test_soft_cost_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(25):
        p = helpers.random_soft_problem(rng, PARAMS)
        actions = rng.uniform(PARAMS.action_low, PARAMS.action_high,
                              size=(PARAMS.horizon, 2))
        g = soft_cost_grad(p, actions)
        fd = helpers.fd_gradient(lambda a: soft_cost(p, a), actions)
        rel = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)
        assert rel < 1e-4


def test_rollout_matches_kinematic_step_exactly():
    rng = np.random.default_rng(3)
    actions = rng.uniform(PARAMS.action_low, PARAMS.action_high, size=(10, 2))
    x0 = np.array([0.4, -1.2, 2.5])
    states = rollout(x0, actions, PARAMS.dt)
    pose = wd.Pose(*x0)
    for k in range(10):
        pose = wd.kinematic_step(pose, wd.RobotAction(*actions[k]), PARAMS.dt)
        assert abs(pose.x - states[k + 1, 0]) == 0.0
        assert abs(pose.y - states[k + 1, 1]) == 0.0
        assert abs(pose.theta - states[k + 1, 2]) == 0.0


# -- soft solver ------------------------------------------------------------------

def test_solve_soft_pass_through():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a_rl = rng.uniform(PARAMS.action_low + 0.01, PARAMS.action_high - 0.01)
        res = solve_soft(plain_problem(a_rl=a_rl), PARAMS)
        assert np.abs(res.actions[0] - a_rl).max() < 1e-3
        assert res.status == CONVERGED


def test_solve_soft_projects_out_of_range_proposal():
    res = solve_soft(plain_problem(a_rl=(1.0, 0.0)), PARAMS)
    assert res.actions[0] == pytest.approx([PARAMS.v_max, 0.0], abs=1e-6)


def test_solve_soft_result_invariants():
    rng = np.random.default_rng(5)
    for _ in range(30):
        p = helpers.random_soft_problem(rng, PARAMS, min_obstacle_dist=0.4)
        res = solve_soft(p, PARAMS)
        # box feasibility is exact post-projection
        assert np.all(res.actions >= PARAMS.action_low - 0.0)
        assert np.all(res.actions <= PARAMS.action_high + 0.0)
        # states satisfy the prediction model exactly
        assert np.array_equal(res.states, rollout(p.x0, res.actions, p.dt))
        assert np.isfinite(res.cost)


def test_solve_soft_monotone_descent():
    rng = np.random.default_rng(6)
    for _ in range(20):
        p = helpers.random_soft_problem(rng, PARAMS, min_obstacle_dist=0.3)
        res = solve_soft(p, PARAMS, record_trace=True)
        trace = np.array(res.cost_trace)
        assert np.all(np.diff(trace) <= 1e-12)


def test_solve_soft_avoids_close_obstacle():
    # obstacle 0.6 m dead ahead with a heavy weight: the shield must slow down
    # and/or steer, and do no worse than passing the proposal through
    obstacles = [SectorObstacle(0.6, 0.0, (0.6, 0.0)),
                 SectorObstacle(5.0, math.pi / 2, (0.0, 5.0)),
                 SectorObstacle(5.0, math.pi, (-5.0, 0.0)),
                 SectorObstacle(5.0, -math.pi / 2, (0.0, -5.0))]
    weights = ShieldWeights(1.0, 1.0, np.array([4.0, 0.01, 0.01, 0.01]))
    a_rl = np.array([PARAMS.v_max, 0.0])
    p = plain_problem(obstacles, a_rl=a_rl, weights=weights)
    res = solve_soft(p, PARAMS)
    deviated = res.actions[0, 0] < PARAMS.v_max - 1e-3 or abs(res.actions[0, 1]) > 1e-3
    assert deviated
    through = np.zeros((PARAMS.horizon, 2))
    through[0] = a_rl
    assert res.cost <= soft_cost(p, through) + 1e-9


def test_solve_soft_first_action_within_grid_oracle_gap():
    rng = np.random.default_rng(7)
    for _ in range(30):
        p = helpers.random_soft_problem(rng, PARAMS, horizon=5, min_obstacle_dist=0.3)
        res = solve_soft(p, PARAMS)
        achieved = soft_cost(p, res.actions)
        best, _ = helpers.grid_search_first_action(p)
        assert achieved <= 1.05 * best + 1e-9


def test_warm_start_shifts_previous_solution():
    w = helpers.empty_world()
    scan = wd.lidar_scan(w, WP)
    shield = MpcShield(PARAMS, SOFT)
    weights = ShieldWeights(1.0, 1.0, np.zeros(4))
    _, res1, _ = shield.filter(scan, w.robot, np.array([0.4, 0.3]), weights)
    expected = np.vstack([res1.actions[1:], res1.actions[-1:]])
    assert np.array_equal(shield._warm, expected)


# -- hard solver ---------------------------------------------------------------------

def test_solve_hard_pass_through_when_clear():
    p = plain_problem(a_rl=(0.3, -0.4), weights=mpc_tuned_weights(4), mode=HARD)
    res = solve_hard(p, PARAMS)
    assert res.status == CONVERGED
    assert np.abs(res.actions[0] - p.a_rl).max() < 1e-3


def test_solve_hard_converged_respects_clearance():
    rng = np.random.default_rng(8)
    for _ in range(30):
        p = helpers.random_soft_problem(rng, PARAMS, min_obstacle_dist=0.5)
        p.mode = HARD
        p.weights = mpc_tuned_weights(4)
        res = solve_hard(p, PARAMS)
        if res.status == CONVERGED:
            pos = res.states[1:PARAMS.horizon, :2]
            d = np.hypot(pos[:, None, 0] - p.obs_points[None, :, 0],
                         pos[:, None, 1] - p.obs_points[None, :, 1]) - PARAMS.robot_radius
            assert np.min(d) > PARAMS.delta


def test_solve_hard_boxed_in_returns_fallback():
    # obstacle points closer than delta on all four sides: no feasible motion
    d = 0.26
    obstacles = [SectorObstacle(d, a, (d * math.cos(a), d * math.sin(a)))
                 for a in (0.0, math.pi / 2, math.pi, -math.pi / 2)]
    p = plain_problem(obstacles, a_rl=(0.5, 0.0), weights=mpc_tuned_weights(4),
                      mode=HARD)
    res = solve_hard(p, PARAMS)
    assert res.status == INFEASIBLE
    assert res.actions[0] == pytest.approx([0.0, PARAMS.w_max / 2])


def test_shield_filter_pass_through_empty_arena():
    w = helpers.empty_world()
    scan = wd.lidar_scan(w, WP)
    shield = MpcShield(PARAMS, SOFT)
    rng = np.random.default_rng(9)
    for _ in range(20):
        a_rl = rng.uniform(PARAMS.action_low, PARAMS.action_high)
        out, res, sectors = shield.filter(scan, w.robot, a_rl,
                                          ShieldWeights(1.0, 1.0, np.zeros(4)))
        assert np.abs(out - a_rl).max() < 1e-3
        assert len(sectors) == 4
        assert res.status == CONVERGED
