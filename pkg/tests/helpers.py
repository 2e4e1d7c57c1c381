"""Shared independent oracles used by the unit and acceptance tests.

These deliberately avoid the library's own computation paths: the lidar oracle
walks each beam at millimeter resolution with point-inside tests, the sector
oracle is a plain per-sector scan, and the OCP oracle is a brute-force grid
over the first action.
"""

from __future__ import annotations

import math

import numpy as np

from safenav.shield import OcpProblem, SectorObstacle, ShieldParams, ShieldWeights, \
    make_problem, soft_cost
from safenav.world import LidarScan, Pose, WorldState, wrap_angle


def point_inside_world(world: WorldState, px: float, py: float) -> bool:
    """Point-in-shape test over all obstacles and outside-arena space."""
    if max(abs(px), abs(py)) > world.arena_half:
        return True
    for cx, cy, r in world.circles:
        if (px - cx) ** 2 + (py - cy) ** 2 <= r * r:
            return True
    for cx, cy, hx, hy, ang in world.rects:
        c, s = math.cos(ang), math.sin(ang)
        dx, dy = px - cx, py - cy
        if abs(c * dx + s * dy) <= hx and abs(-s * dx + c * dy) <= hy:
            return True
    return False


def lidar_oracle(world: WorldState, n_beams: int, max_range: float,
                 resolution: float = 1e-3) -> np.ndarray:
    """Dense sampling along each beam; first inside-sample gives the range.

    Walks all beams together in chunks of the ray parameter, dropping beams
    once they have hit, so typical worlds resolve long before max_range.
    """
    ox, oy = world.robot.x, world.robot.y
    angles = world.robot.theta + 2.0 * math.pi * np.arange(n_beams) / n_beams
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    ts = np.arange(resolution, max_range + resolution / 2, resolution)
    out = np.full(n_beams, max_range)
    alive = np.arange(n_beams)
    chunk = 400
    for start in range(0, len(ts), chunk):
        if not len(alive):
            break
        tc = ts[start:start + chunk]
        px = ox + tc[None, :] * dirs[alive, 0:1]       # (alive, chunk)
        py = oy + tc[None, :] * dirs[alive, 1:2]
        inside = np.maximum(np.abs(px), np.abs(py)) > world.arena_half
        for cx, cy, r in world.circles:
            inside |= (px - cx) ** 2 + (py - cy) ** 2 <= r * r
        for cx, cy, hx, hy, ang in world.rects:
            c, s = math.cos(ang), math.sin(ang)
            dx, dy = px - cx, py - cy
            inside |= (np.abs(c * dx + s * dy) <= hx) & (np.abs(-s * dx + c * dy) <= hy)
        hit_any = inside.any(axis=1)
        if hit_any.any():
            first = np.argmax(inside[hit_any], axis=1)
            out[alive[hit_any]] = tc[first]
            alive = alive[~hit_any]
    return out


def sector_oracle(scan: LidarScan, robot: Pose, m: int) -> list[SectorObstacle]:
    """Per-sector minimum by explicit scan, ties to the lowest beam index."""
    n = len(scan.ranges)
    width = n // m
    out = []
    for s in range(m):
        best_idx = s * width
        for i in range(s * width, (s + 1) * width):
            if scan.ranges[i] < scan.ranges[best_idx]:
                best_idx = i
        dist = float(scan.ranges[best_idx])
        beam = 2.0 * math.pi * best_idx / n
        out.append(SectorObstacle(
            distance=dist, angle=wrap_angle(beam),
            world_point=(robot.x + dist * math.cos(robot.theta + beam),
                         robot.y + dist * math.sin(robot.theta + beam))))
    return out


def grid_search_first_action(problem: OcpProblem, n: int = 50) -> tuple[float, np.ndarray]:
    """Best soft cost over an n x n grid of first actions, later actions zero."""
    vs = np.linspace(problem.action_low[0], problem.action_high[0], n)
    ws = np.linspace(problem.action_low[1], problem.action_high[1], n)
    actions = np.zeros((problem.horizon, 2))
    best, best_a = math.inf, None
    for v in vs:
        for w in ws:
            actions[0] = (v, w)
            c = soft_cost(problem, actions)
            if c < best:
                best, best_a = c, np.array([v, w])
    return best, best_a


def fd_gradient(fun, actions: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of the action matrix."""
    g = np.zeros_like(actions)
    for i in range(actions.shape[0]):
        for j in range(actions.shape[1]):
            ap, am = actions.copy(), actions.copy()
            ap[i, j] += h
            am[i, j] -= h
            g[i, j] = (fun(ap) - fun(am)) / (2.0 * h)
    return g


def random_soft_problem(rng: np.random.Generator, params: ShieldParams,
                        horizon: int | None = None,
                        min_obstacle_dist: float = 0.8) -> OcpProblem:
    """Interior problem (no state-box activity) with random weights/obstacles."""
    x0 = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2),
                   rng.uniform(-math.pi, math.pi)])
    a_rl = rng.uniform(params.action_low, params.action_high)
    weights = ShieldWeights(rng.uniform(0.01, 5.0), rng.uniform(0.01, 5.0),
                            rng.uniform(0.01, 5.0, size=params.m_sectors))
    obstacles = []
    for _ in range(params.m_sectors):
        ang = rng.uniform(-math.pi, math.pi)
        d = rng.uniform(min_obstacle_dist, 4.0)
        obstacles.append(SectorObstacle(d, ang,
                                        (x0[0] + d * math.cos(x0[2] + ang),
                                         x0[1] + d * math.sin(x0[2] + ang))))
    problem = make_problem(params, x0, a_rl, weights, obstacles, "soft")
    if horizon is not None:
        problem.horizon = horizon
        problem.__post_init__()
    return problem


def empty_world(arena_half: float = 30.0, seed: int = 0) -> WorldState:
    """Obstacle-free world with walls far outside lidar range."""
    return WorldState(robot=Pose(0.0, 0.0, 0.0), obstacles=[], goal=(1.0, 1.0),
                      arena_half=arena_half, step_count=0, no_motion_count=0,
                      rng_seed=seed, rng=np.random.default_rng(seed),
                      circles=np.zeros((0, 3)), rects=np.zeros((0, 5)))
