"""2D kinematic navigation world: randomized obstacle courses, ray-cast lidar,
goal management and episode termination logic.

All geometry is exact (ray/circle, ray/rectangle intersections); the robot is a
disc driven by unicycle kinematics. A world is a self-contained value carrying
its own random stream, so identical (seed, env_id) always reproduce the same
world and the same goal-respawn sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class PlacementError(RuntimeError):
    """Rejection sampling could not place an entity (arena too crowded)."""


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = (a + math.pi) % TWO_PI - math.pi
    if a == -math.pi:
        a = math.pi
    return a


@dataclass
class WorldParams:
    """Environment geometry, robot limits and episode rules."""

    dt: float = 0.2                 # 5 Hz control rate
    arena_half: float = 5.0         # square arena half-extent [m]
    pillar_radius: float = 0.3
    lwall_arm_len: float = 1.2
    lwall_arm_width: float = 0.15
    robot_radius: float = 0.25
    v_min: float = 0.0
    v_max: float = 0.5
    w_max: float = 1.0
    goal_radius: float = 0.3
    eps_motion: float = 0.005       # displacement below this counts as "not moving"
    stuck_steps: int = 30
    max_episode_steps: int = 500
    lidar_beams: int = 100
    lidar_max_range: float = 5.0
    min_clearance: float = 0.8      # obstacle surface to spawn/goal points
    obstacle_clearance: float = 0.6  # obstacle-obstacle and obstacle-wall gap
    place_attempts: int = 1000

    @property
    def goal_dist_norm(self) -> float:
        """Arena diagonal, used to normalize goal distances."""
        return 2.0 * self.arena_half * math.sqrt(2.0)


@dataclass
class Pose:
    x: float
    y: float
    theta: float  # always in (-pi, pi]


@dataclass
class RobotAction:
    v: float
    w: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.w], dtype=np.float64)


@dataclass(frozen=True)
class Pillar:
    cx: float
    cy: float
    radius: float


@dataclass(frozen=True)
class LWall:
    """Two perpendicular rectangular arms sharing the corner point."""

    corner: tuple[float, float]
    phi: float  # orientation of the first arm
    arm_len: float
    arm_width: float

    def rects(self) -> list[tuple[float, float, float, float, float]]:
        """Both arms as (cx, cy, half_len, half_width, angle)."""
        cx, cy = self.corner
        out = []
        for ang in (self.phi, self.phi + 0.5 * math.pi):
            dx, dy = math.cos(ang), math.sin(ang)
            out.append((cx + 0.5 * self.arm_len * dx,
                        cy + 0.5 * self.arm_len * dy,
                        0.5 * self.arm_len, 0.5 * self.arm_width, ang))
        return out


Obstacle = Pillar | LWall


@dataclass
class LidarScan:
    """Ranges of `lidar_beams` equidistant beams; beam i points at
    robot heading + 2*pi*i/n in the world frame."""

    ranges: np.ndarray
    max_range: float


@dataclass(eq=False)
class WorldState:
    robot: Pose
    obstacles: list[Obstacle]
    goal: tuple[float, float]
    arena_half: float
    step_count: int
    no_motion_count: int
    rng_seed: int
    rng: np.random.Generator
    # flattened geometry caches used by raycasting / collision tests
    circles: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    rects: np.ndarray = field(default_factory=lambda: np.zeros((0, 5)))


@dataclass
class StepOutcome:
    goal_reached: bool
    collision: bool
    stuck: bool
    max_steps: bool
    task_obs: np.ndarray | None = None
    sup_obs: np.ndarray | None = None

    @property
    def terminal(self) -> bool:
        return self.collision or self.stuck


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------

def _rect_signed_distance(px: float, py: float, rect) -> float:
    """Signed distance from a point to an oriented rectangle (negative inside)."""
    cx, cy, hx, hy, ang = rect
    c, s = math.cos(ang), math.sin(ang)
    dx, dy = px - cx, py - cy
    qx = abs(c * dx + s * dy) - hx
    qy = abs(-s * dx + c * dy) - hy
    ox, oy = max(qx, 0.0), max(qy, 0.0)
    outside = math.hypot(ox, oy)
    inside = min(max(qx, qy), 0.0)
    return outside + inside


def _rect_corners(rect) -> np.ndarray:
    cx, cy, hx, hy, ang = rect
    c, s = math.cos(ang), math.sin(ang)
    local = np.array([[hx, hy], [hx, -hy], [-hx, -hy], [-hx, hy]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([cx, cy])


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    t = float(np.dot(p - a, ab) / max(float(np.dot(ab, ab)), 1e-12))
    t = min(max(t, 0.0), 1.0)
    proj = a + t * ab
    return float(np.hypot(*(p - proj)))


def _rects_overlap(ra, rb) -> bool:
    """Separating-axis test for two oriented rectangles."""
    ca, cb = _rect_corners(ra), _rect_corners(rb)
    for rect in (ra, rb):
        ang = rect[4]
        for axis_ang in (ang, ang + 0.5 * math.pi):
            axis = np.array([math.cos(axis_ang), math.sin(axis_ang)])
            pa, pb = ca @ axis, cb @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def _rect_rect_distance(ra, rb) -> float:
    """Distance between two oriented rectangles (0 if they overlap)."""
    if _rects_overlap(ra, rb):
        return 0.0
    ca, cb = _rect_corners(ra), _rect_corners(rb)
    best = math.inf
    for corners, other in ((ca, cb), (cb, ca)):
        for p in corners:
            for i in range(4):
                best = min(best, _point_segment_distance(p, other[i], other[(i + 1) % 4]))
    return best


def obstacle_clearance(world: WorldState, px: float, py: float) -> float:
    """Distance from a point to the nearest obstacle surface (negative inside)."""
    best = math.inf
    for row in world.circles:
        best = min(best, math.hypot(px - row[0], py - row[1]) - row[2])
    for rect in world.rects:
        best = min(best, _rect_signed_distance(px, py, rect))
    return best


def wall_clearance(world: WorldState, px: float, py: float) -> float:
    """Distance from a point to the nearest arena wall (negative outside)."""
    return world.arena_half - max(abs(px), abs(py))


def check_collision(world: WorldState, params: WorldParams) -> bool:
    p = world.robot
    if wall_clearance(world, p.x, p.y) < params.robot_radius:
        return True
    return obstacle_clearance(world, p.x, p.y) < params.robot_radius


# ---------------------------------------------------------------------------
# world construction
# ---------------------------------------------------------------------------

ENV_CENSUS = {1: (5, 0), 2: (6, 6), 3: (8, 8)}


def _geometry_arrays(obstacles: list[Obstacle]) -> tuple[np.ndarray, np.ndarray]:
    circles, rects = [], []
    for ob in obstacles:
        if isinstance(ob, Pillar):
            circles.append((ob.cx, ob.cy, ob.radius))
        else:
            rects.extend(ob.rects())
    return (np.array(circles, dtype=np.float64).reshape(-1, 3),
            np.array(rects, dtype=np.float64).reshape(-1, 5))


def _obstacle_obstacle_clearance(a: Obstacle, b: Obstacle) -> float:
    if isinstance(a, Pillar) and isinstance(b, Pillar):
        return math.hypot(a.cx - b.cx, a.cy - b.cy) - a.radius - b.radius
    if isinstance(a, Pillar):
        return min(_rect_signed_distance(a.cx, a.cy, r) for r in b.rects()) - a.radius
    if isinstance(b, Pillar):
        return min(_rect_signed_distance(b.cx, b.cy, r) for r in a.rects()) - b.radius
    return min(_rect_rect_distance(ra, rb) for ra in a.rects() for rb in b.rects())


def _obstacle_wall_clearance(ob: Obstacle, arena_half: float) -> float:
    if isinstance(ob, Pillar):
        return arena_half - max(abs(ob.cx), abs(ob.cy)) - ob.radius
    best = math.inf
    for rect in ob.rects():
        for corner in _rect_corners(rect):
            best = min(best, arena_half - max(abs(corner[0]), abs(corner[1])))
    return best


def _point_clear(obstacles: list[Obstacle], arena_half: float, px: float, py: float,
                 clearance: float) -> bool:
    if arena_half - max(abs(px), abs(py)) < clearance:
        return False
    for ob in obstacles:
        if isinstance(ob, Pillar):
            if math.hypot(px - ob.cx, py - ob.cy) - ob.radius < clearance:
                return False
        else:
            for rect in ob.rects():
                if _rect_signed_distance(px, py, rect) < clearance:
                    return False
    return True


def _sample_point(rng: np.random.Generator, half: float) -> tuple[float, float]:
    return (float(rng.uniform(-half, half)), float(rng.uniform(-half, half)))


def reset(seed: int, env_id: int, params: WorldParams | None = None) -> WorldState:
    """Build a randomized world for the given environment.

    env 1: 5 pillars; env 2: 6 pillars + 6 L-walls; env 3: 8 pillars + 8 L-walls.
    Obstacles, robot spawn and goal are rejection-sampled with a minimum
    clearance between obstacle surfaces, arena walls and spawn/goal points.

    Raises PlacementError if any placement exceeds the attempt budget.
    """
    params = params or WorldParams()
    if env_id not in ENV_CENSUS:
        raise ValueError(f"env_id must be 1, 2 or 3, got {env_id}")
    n_pillars, n_lwalls = ENV_CENSUS[env_id]
    rng = np.random.default_rng(seed)
    ob_clear = params.obstacle_clearance
    obstacles: list[Obstacle] = []

    def place(make) -> Obstacle:
        for _ in range(params.place_attempts):
            ob = make()
            if _obstacle_wall_clearance(ob, params.arena_half) < ob_clear:
                continue
            if all(_obstacle_obstacle_clearance(ob, other) >= ob_clear
                   for other in obstacles):
                return ob
        raise PlacementError(
            f"could not place obstacle after {params.place_attempts} attempts "
            f"(env {env_id}, seed {seed}); arena too small for the requested census")

    for _ in range(n_pillars):
        obstacles.append(place(lambda: Pillar(*_sample_point(rng, params.arena_half),
                                              params.pillar_radius)))
    for _ in range(n_lwalls):
        obstacles.append(place(lambda: LWall(_sample_point(rng, params.arena_half),
                                             float(rng.uniform(0.0, TWO_PI)),
                                             params.lwall_arm_len, params.lwall_arm_width)))

    def place_point() -> tuple[float, float]:
        for _ in range(params.place_attempts):
            px, py = _sample_point(rng, params.arena_half)
            if _point_clear(obstacles, params.arena_half, px, py, params.min_clearance):
                return px, py
        raise PlacementError(f"could not place a free point (env {env_id}, seed {seed})")

    sx, sy = place_point()
    theta = wrap_angle(float(rng.uniform(-math.pi, math.pi)))
    while True:
        gx, gy = place_point()
        if math.hypot(gx - sx, gy - sy) > params.goal_radius:
            break

    circles, rects = _geometry_arrays(obstacles)
    return WorldState(robot=Pose(sx, sy, theta), obstacles=obstacles, goal=(gx, gy),
                      arena_half=params.arena_half, step_count=0, no_motion_count=0,
                      rng_seed=int(seed), rng=rng, circles=circles, rects=rects)


def respawn_goal(world: WorldState, params: WorldParams) -> None:
    """Sample a fresh goal in place, clear of obstacles, walls and the robot."""
    for _ in range(params.place_attempts):
        gx, gy = _sample_point(world.rng, params.arena_half)
        if not _point_clear(world.obstacles, params.arena_half, gx, gy,
                            params.min_clearance):
            continue
        if math.hypot(gx - world.robot.x, gy - world.robot.y) > params.goal_radius:
            world.goal = (gx, gy)
            return
    raise PlacementError("could not respawn a goal")


# ---------------------------------------------------------------------------
# dynamics and sensing
# ---------------------------------------------------------------------------

def kinematic_step(pose: Pose, action: RobotAction, dt: float) -> Pose:
    """Euler step of the unicycle model with heading wrapped to (-pi, pi]."""
    x = pose.x + action.v * math.cos(pose.theta) * dt
    y = pose.y + action.v * math.sin(pose.theta) * dt
    return Pose(x, y, wrap_angle(pose.theta + action.w * dt))


def lidar_scan(world: WorldState, params: WorldParams) -> LidarScan:
    """Exact ray-cast scan over all obstacles and arena walls.

    Beam i leaves the robot center at angle robot.theta + 2*pi*i/n; ranges are
    clipped to (0, max_range].
    """
    n = params.lidar_beams
    max_range = params.lidar_max_range
    ox, oy = world.robot.x, world.robot.y
    angles = world.robot.theta + TWO_PI * np.arange(n) / n
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    best = np.full(n, np.inf)

    if len(world.circles):
        m = np.array([ox, oy]) - world.circles[:, :2]          # (nc, 2)
        b = dirs @ m.T                                         # (n, nc)
        c2 = np.einsum("ij,ij->i", m, m) - world.circles[:, 2] ** 2
        disc = b * b - c2[None, :]
        with np.errstate(invalid="ignore"):
            sq = np.sqrt(np.maximum(disc, 0.0))
            t1 = -b - sq
            t2 = -b + sq
        t = np.where(t1 > 1e-12, t1, np.where(t2 > 1e-12, t2, np.inf))
        t[disc < 0.0] = np.inf
        best = np.minimum(best, t.min(axis=1))

    for rect in world.rects:
        cx, cy, hx, hy, ang = rect
        c, s = math.cos(ang), math.sin(ang)
        rot = np.array([[c, s], [-s, c]])
        o_loc = rot @ np.array([ox - cx, oy - cy])
        d_loc = dirs @ rot.T                                   # (n, 2)
        h = np.array([hx, hy])
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-h - o_loc) / d_loc
            t2 = (h - o_loc) / d_loc
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        par = np.abs(d_loc) < 1e-12
        inside_slab = np.abs(o_loc) <= h
        lo[par] = np.where(inside_slab[np.nonzero(par)[1]], -np.inf, np.inf)
        hi[par] = np.where(inside_slab[np.nonzero(par)[1]], np.inf, -np.inf)
        t_enter = lo.max(axis=1)
        t_exit = hi.min(axis=1)
        hit = (t_enter <= t_exit) & (t_exit > 0.0)
        t = np.where(hit, np.where(t_enter > 1e-12, t_enter, 1e-12), np.inf)
        best = np.minimum(best, t)

    half = world.arena_half
    with np.errstate(divide="ignore"):
        tx = np.where(dirs[:, 0] > 0, (half - ox) / dirs[:, 0],
                      np.where(dirs[:, 0] < 0, (-half - ox) / dirs[:, 0], np.inf))
        ty = np.where(dirs[:, 1] > 0, (half - oy) / dirs[:, 1],
                      np.where(dirs[:, 1] < 0, (-half - oy) / dirs[:, 1], np.inf))
    best = np.minimum(best, np.minimum(tx, ty))

    ranges = np.clip(best, 1e-6, max_range)
    return LidarScan(ranges=ranges, max_range=max_range)


def step(world: WorldState, action: RobotAction,
         params: WorldParams) -> tuple[WorldState, StepOutcome]:
    """Advance the world one control period.

    Collision is checked before the goal so the two flags are mutually
    exclusive; reaching the goal respawns a new one in place. The stuck flag
    fires after `stuck_steps` consecutive steps with displacement below
    `eps_motion`.
    """
    old = world.robot
    new = kinematic_step(old, action, params.dt)
    world.robot = new
    world.step_count += 1

    collision = check_collision(world, params)
    goal_reached = False
    if not collision:
        if math.hypot(new.x - world.goal[0], new.y - world.goal[1]) < params.goal_radius:
            goal_reached = True
            respawn_goal(world, params)

    displacement = math.hypot(new.x - old.x, new.y - old.y)
    if displacement < params.eps_motion:
        world.no_motion_count += 1
    else:
        world.no_motion_count = 0
    stuck = (not collision) and world.no_motion_count >= params.stuck_steps

    outcome = StepOutcome(goal_reached=goal_reached, collision=collision, stuck=stuck,
                          max_steps=world.step_count >= params.max_episode_steps)
    return world, outcome


# ---------------------------------------------------------------------------
# observations
# ---------------------------------------------------------------------------

def goal_polar(world: WorldState) -> tuple[float, float]:
    """Distance and robot-frame bearing of the current goal."""
    dx = world.goal[0] - world.robot.x
    dy = world.goal[1] - world.robot.y
    dist = math.hypot(dx, dy)
    angle = wrap_angle(math.atan2(dy, dx) - world.robot.theta)
    return dist, angle


def build_task_obs(world: WorldState, prev_shield_action: RobotAction,
                   params: WorldParams, scan: LidarScan | None = None) -> np.ndarray:
    """Task-agent observation: [lidar/max_range, prev applied action, goal polar]."""
    scan = scan or lidar_scan(world, params)
    dist, angle = goal_polar(world)
    extras = np.array([prev_shield_action.v / params.v_max,
                       prev_shield_action.w / params.w_max,
                       dist / params.goal_dist_norm,
                       angle], dtype=np.float64)
    return np.concatenate([scan.ranges / scan.max_range, extras]).astype(np.float32)


def build_supervisor_obs(world: WorldState, task_action: RobotAction,
                         prev_shield_action: RobotAction, sector_obstacles,
                         params: WorldParams, scan: LidarScan | None = None,
                         include_goal: bool = False) -> np.ndarray:
    """Supervisor observation: lidar, task action, previous shield action and
    the per-sector nearest obstacles. Goal terms are appended only for the
    goal-informed ablation."""
    scan = scan or lidar_scan(world, params)
    parts = [scan.ranges / scan.max_range,
             np.array([task_action.v / params.v_max,
                       task_action.w / params.w_max,
                       prev_shield_action.v / params.v_max,
                       prev_shield_action.w / params.w_max], dtype=np.float64)]
    sect = np.empty(2 * len(sector_obstacles), dtype=np.float64)
    for i, ob in enumerate(sector_obstacles):
        sect[2 * i] = ob.distance / scan.max_range
        sect[2 * i + 1] = ob.angle
    parts.append(sect)
    if include_goal:
        dist, angle = goal_polar(world)
        parts.append(np.array([dist / params.goal_dist_norm, angle], dtype=np.float64))
    return np.concatenate(parts).astype(np.float32)


def task_obs_dim(params: WorldParams) -> int:
    return params.lidar_beams + 4


def supervisor_obs_dim(params: WorldParams, m_sectors: int, include_goal: bool) -> int:
    return params.lidar_beams + 4 + 2 * m_sectors + (2 if include_goal else 0)
