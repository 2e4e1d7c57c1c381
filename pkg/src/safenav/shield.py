"""MPC safety filter over the unicycle model.

Two flavors of the same finite-horizon optimal control problem:

* soft mode: deviation-from-proposal cost plus inverse-distance obstacle
  penalties whose weights are supplied online (by the supervisor agent);
* hard mode: deviation cost with obstacle clearance enforced as a constraint
  via an escalating exact penalty, used by the pre-tuned static shield.

The solver is a single-shooting projected gradient method with analytic
gradients through the kinematic rollout, Armijo backtracking, and a Jacobi
scaling taken from the quadratic cost block (the action weights span more
than two orders of magnitude, which stalls the unscaled iteration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .world import LidarScan, Pose, TWO_PI, wrap_angle

SOFT = "soft"
HARD = "hard"

CONVERGED = "converged"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"


@dataclass
class ShieldParams:
    """Horizon, bounds and solver settings for the OCP."""

    horizon: int = 10
    dt: float = 0.2
    m_sectors: int = 4
    r_effort: float = 0.1           # fixed diagonal effort weight on future actions
    robot_radius: float = 0.25
    d_floor: float = 0.05           # lower clamp on obstacle distances in the soft cost
    v_min: float = 0.0
    v_max: float = 0.5
    w_max: float = 1.0
    state_box_half: float = 4.75    # arena half-extent minus robot radius
    state_penalty: float = 50.0     # quadratic penalty outside the state box
    delta: float = 0.30             # hard-mode safety distance
    hard_mu: tuple[float, ...] = (10.0, 100.0, 1000.0)
    max_iters: int = 60
    g_tol: float = 1e-4
    c_tol: float = 1e-8
    armijo_c: float = 1e-4
    backtrack: float = 0.5

    @property
    def action_low(self) -> np.ndarray:
        return np.array([self.v_min, -self.w_max])

    @property
    def action_high(self) -> np.ndarray:
        return np.array([self.v_max, self.w_max])

    @property
    def fallback_action(self) -> np.ndarray:
        # rotate in place: collision-free for a disc robot
        return np.array([0.0, 0.5 * self.w_max])


@dataclass
class SectorObstacle:
    """Closest lidar return within one angular sector, frozen in world frame."""

    distance: float
    angle: float                    # robot-frame bearing of the beam
    world_point: tuple[float, float]


@dataclass
class ShieldWeights:
    """Online-tuned weights: action-matching diagonal plus per-sector obstacle
    weights."""

    r0_v: float
    r0_w: float
    omega: np.ndarray

    def r0(self) -> np.ndarray:
        return np.array([self.r0_v, self.r0_w])


def mpc_tuned_weights(m_sectors: int, r0: float = 1.0) -> ShieldWeights:
    """Fixed weights of the pre-tuned hard shield (no obstacle cost terms)."""
    return ShieldWeights(r0, r0, np.zeros(m_sectors))


@dataclass
class OcpProblem:
    x0: np.ndarray                  # (3,) current pose
    a_rl: np.ndarray                # (2,) proposed action
    weights: ShieldWeights
    obstacles: list[SectorObstacle]
    mode: str = SOFT
    horizon: int = 10
    dt: float = 0.2
    r_effort: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.1]))
    action_low: np.ndarray = field(default_factory=lambda: np.array([0.0, -1.0]))
    action_high: np.ndarray = field(default_factory=lambda: np.array([0.5, 1.0]))
    robot_radius: float = 0.25
    d_floor: float = 0.05
    state_box_half: float = 4.75
    delta: float = 0.30

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=np.float64)
        self.a_rl = np.asarray(self.a_rl, dtype=np.float64)
        self.obs_points = np.array([ob.world_point for ob in self.obstacles],
                                   dtype=np.float64).reshape(-1, 2)
        if self.mode == HARD and not self.delta > 0.0:
            raise ValueError("hard mode requires a positive safety distance")
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")


def make_problem(params: ShieldParams, x0: np.ndarray, a_rl: np.ndarray,
                 weights: ShieldWeights, obstacles: list[SectorObstacle],
                 mode: str) -> OcpProblem:
    return OcpProblem(x0=x0, a_rl=a_rl, weights=weights, obstacles=obstacles,
                      mode=mode, horizon=params.horizon, dt=params.dt,
                      r_effort=np.array([params.r_effort, params.r_effort]),
                      action_low=params.action_low, action_high=params.action_high,
                      robot_radius=params.robot_radius, d_floor=params.d_floor,
                      state_box_half=params.state_box_half, delta=params.delta)


@dataclass
class OcpResult:
    actions: np.ndarray             # (T, 2)
    states: np.ndarray              # (T+1, 3)
    cost: float
    status: str
    iterations: int = 0
    cost_trace: list[float] | None = None


# ---------------------------------------------------------------------------
# sector extraction
# ---------------------------------------------------------------------------

def select_sector_obstacles(scan: LidarScan, robot: Pose,
                            m_sectors: int) -> list[SectorObstacle]:
    """Split the scan into equal sectors and keep the closest beam of each.

    Ties go to the lowest beam index (np.argmin convention). The beam endpoint
    is converted to a world-frame point that stays fixed over the horizon.
    """
    n = len(scan.ranges)
    if n % m_sectors != 0:
        raise ValueError(f"{n} beams cannot be split into {m_sectors} equal sectors")
    width = n // m_sectors
    out = []
    for s in range(m_sectors):
        idx = s * width + int(np.argmin(scan.ranges[s * width:(s + 1) * width]))
        dist = float(scan.ranges[idx])
        beam = TWO_PI * idx / n
        ang_world = robot.theta + beam
        out.append(SectorObstacle(
            distance=dist,
            angle=wrap_angle(beam),
            world_point=(robot.x + dist * math.cos(ang_world),
                         robot.y + dist * math.sin(ang_world))))
    return out


# ---------------------------------------------------------------------------
# rollout and cost
# ---------------------------------------------------------------------------

def rollout(x0: np.ndarray, actions: np.ndarray, dt: float) -> np.ndarray:
    """Roll the unicycle model forward; arithmetic matches world.kinematic_step
    bit for bit so predicted and applied states coincide exactly."""
    T = len(actions)
    states = np.empty((T + 1, 3))
    x, y, th = float(x0[0]), float(x0[1]), float(x0[2])
    states[0] = (x, y, th)
    for k in range(T):
        v, w = float(actions[k, 0]), float(actions[k, 1])
        x = x + v * math.cos(th) * dt
        y = y + v * math.sin(th) * dt
        th = wrap_angle(th + w * dt)
        states[k + 1] = (x, y, th)
    return states


def _cost_and_grad(problem: OcpProblem, actions: np.ndarray, box_mu: float,
                   hard_mu: float, want_grad: bool):
    """Objective (and optionally its analytic gradient) of the shooting problem.

    cost = ||a_rl - a_0||^2_R0 + sum_{k=1}^{T-1} ||a_k||^2_R
         + sum_{k=1}^{T-1} sum_m omega_m / dist_{m,k}          (soft obstacle terms)
         + box_mu  * sum_{k=1}^{T-1} max(0, |p_k| - box)^2      (state bounds)
         + hard_mu * sum_{k=1}^{T-1} sum_m max(0, delta - raw_{m,k})^2

    with dist = max(||p_k - q_m|| - robot_radius, d_floor) and raw the
    unclamped surface distance.
    """
    T = problem.horizon
    dt = problem.dt
    states = rollout(problem.x0, actions, dt)
    r0 = problem.weights.r0()
    omega = np.asarray(problem.weights.omega, dtype=np.float64)

    d0 = actions[0] - problem.a_rl
    cost = float(np.dot(r0, d0 * d0))
    cost += float(np.sum(actions[1:] * actions[1:] @ problem.r_effort))

    pos = states[1:T, :2]                                   # stages 1 .. T-1
    g_pos = np.zeros_like(pos) if want_grad else None

    if len(problem.obs_points) and (omega != 0.0).any():
        diffs = pos[:, None, :] - problem.obs_points[None, :, :]
        norms = np.sqrt(np.sum(diffs * diffs, axis=2))
        raw = norms - problem.robot_radius
        dist = np.maximum(raw, problem.d_floor)
        cost += float(np.sum(omega[None, :] / dist))
        if want_grad:
            coef = np.where(raw > problem.d_floor,
                            -omega[None, :] / (dist * dist * np.maximum(norms, 1e-12)),
                            0.0)
            g_pos += np.einsum("km,kmi->ki", coef, diffs)

    if box_mu > 0.0:
        over = np.abs(pos) - problem.state_box_half
        viol = np.maximum(over, 0.0)
        cost += box_mu * float(np.sum(viol * viol))
        if want_grad:
            g_pos += 2.0 * box_mu * viol * np.sign(pos)

    if hard_mu > 0.0 and len(problem.obs_points):
        diffs = pos[:, None, :] - problem.obs_points[None, :, :]
        norms = np.sqrt(np.sum(diffs * diffs, axis=2))
        raw = norms - problem.robot_radius
        pen = np.maximum(problem.delta - raw, 0.0)
        cost += hard_mu * float(np.sum(pen * pen))
        if want_grad:
            coef = -2.0 * hard_mu * pen / np.maximum(norms, 1e-12)
            g_pos += np.einsum("km,kmi->ki", coef, diffs)

    if not want_grad:
        return cost, None

    # adjoint sweep: lam_k = g_state_k + A_k^T lam_{k+1};
    # grad_k = direct_k + B_k^T lam_{k+1}
    grads = np.empty((T, 2))
    lam = np.zeros(3)
    for k in range(T - 1, -1, -1):
        th = states[k, 2]
        v = actions[k, 0]
        c, s = math.cos(th), math.sin(th)
        grads[k, 0] = dt * (c * lam[0] + s * lam[1])
        grads[k, 1] = dt * lam[2]
        lam_theta = lam[2] + v * dt * (c * lam[1] - s * lam[0])
        gx, gy = (g_pos[k - 1] if 1 <= k <= T - 1 else (0.0, 0.0))
        lam = np.array([lam[0] + gx, lam[1] + gy, lam_theta])

    grads[0] += 2.0 * r0 * d0
    grads[1:] += 2.0 * problem.r_effort * actions[1:]
    return cost, grads


def soft_cost(problem: OcpProblem, actions: np.ndarray) -> float:
    """The soft OCP objective itself (no state-box or constraint penalties)."""
    return _cost_and_grad(problem, np.asarray(actions, dtype=np.float64),
                          box_mu=0.0, hard_mu=0.0, want_grad=False)[0]


def soft_cost_grad(problem: OcpProblem, actions: np.ndarray) -> np.ndarray:
    """Analytic gradient of soft_cost w.r.t. the control sequence."""
    return _cost_and_grad(problem, np.asarray(actions, dtype=np.float64),
                          box_mu=0.0, hard_mu=0.0, want_grad=True)[1]


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def _fallback_result(problem: OcpProblem, params: ShieldParams) -> OcpResult:
    actions = np.tile(params.fallback_action, (problem.horizon, 1))
    return OcpResult(actions=actions, states=rollout(problem.x0, actions, problem.dt),
                     cost=math.inf, status=INFEASIBLE)


def _minimize(problem: OcpProblem, params: ShieldParams, warm: np.ndarray | None,
              box_mu: float, hard_mu: float, record_trace: bool):
    T = problem.horizon
    lo, hi = problem.action_low, problem.action_high
    a = np.zeros((T, 2)) if warm is None else np.array(warm, dtype=np.float64)
    a = np.clip(a, lo, hi)

    # Jacobi scaling from the quadratic block; floored so near-zero matching
    # weights cannot produce explosive steps.
    precond = np.empty((T, 2))
    precond[0] = np.maximum(2.0 * problem.weights.r0(), 0.02)
    precond[1:] = np.maximum(2.0 * problem.r_effort, 0.02)

    f, g = _cost_and_grad(problem, a, box_mu, hard_mu, True)
    if not (math.isfinite(f) and np.isfinite(g).all()):
        return None
    trace = [f] if record_trace else None
    status = MAX_ITER
    step = 1.0
    iters = 0
    for iters in range(1, params.max_iters + 1):
        dirn = g / precond
        accepted = False
        while step >= 1e-10:
            a_new = np.clip(a - step * dirn, lo, hi)
            delta = a_new - a
            if not delta.any():
                break
            f_new, _ = _cost_and_grad(problem, a_new, box_mu, hard_mu, False)
            if f_new <= f + params.armijo_c * float(np.sum(g * delta)):
                accepted = True
                break
            step *= params.backtrack
        if not accepted:
            status = CONVERGED     # no feasible descent direction remains
            break
        decrease = f - f_new
        a, f = a_new, f_new
        if record_trace:
            trace.append(f)
        f, g = _cost_and_grad(problem, a, box_mu, hard_mu, True)
        if not (math.isfinite(f) and np.isfinite(g).all()):
            return None
        pg = a - np.clip(a - g, lo, hi)
        if float(np.linalg.norm(pg)) < params.g_tol or decrease < params.c_tol:
            status = CONVERGED
            break
        step = min(step * 2.0, 16.0)
    return a, f, status, iters, trace


def _hard_feasible(problem: OcpProblem, states: np.ndarray) -> bool:
    """Post-hoc constraint check: every stage 1..T-1 clears delta around all
    obstacle points and stays inside the state box."""
    pos = states[1:problem.horizon, :2]
    if np.max(np.abs(pos)) > problem.state_box_half + 1e-12:
        return False
    if len(problem.obs_points):
        diffs = pos[:, None, :] - problem.obs_points[None, :, :]
        raw = np.sqrt(np.sum(diffs * diffs, axis=2)) - problem.robot_radius
        if np.min(raw) <= problem.delta:
            return False
    return True


def solve_soft(problem: OcpProblem, params: ShieldParams,
               warm: np.ndarray | None = None, record_trace: bool = False) -> OcpResult:
    """Minimize the soft OCP over box-bounded control sequences."""
    out = _minimize(problem, params, warm, box_mu=params.state_penalty,
                    hard_mu=0.0, record_trace=record_trace)
    if out is None:
        return _fallback_result(problem, params)
    a, f, status, iters, trace = out
    return OcpResult(actions=a, states=rollout(problem.x0, a, problem.dt), cost=f,
                     status=status, iterations=iters, cost_trace=trace)


def solve_hard(problem: OcpProblem, params: ShieldParams,
               warm: np.ndarray | None = None, record_trace: bool = False) -> OcpResult:
    """Exact-penalty treatment of the hard-constraint OCP.

    The penalty weight escalates over restarts; the result counts as converged
    only if the returned trajectory actually satisfies the clearance and state
    constraints, otherwise the rotate-in-place fallback is reported.
    """
    prev = warm
    trace = [] if record_trace else None
    iters = 0
    for mu in problem_mu_schedule(params):
        out = _minimize(problem, params, prev, box_mu=params.state_penalty,
                        hard_mu=mu, record_trace=record_trace)
        if out is None:
            break
        a, f, _, it, tr = out
        iters += it
        if record_trace:
            trace.extend(tr)
        prev = a
        states = rollout(problem.x0, a, problem.dt)
        if _hard_feasible(problem, states):
            return OcpResult(actions=a, states=states, cost=f, status=CONVERGED,
                             iterations=iters, cost_trace=trace)
    res = _fallback_result(problem, params)
    res.iterations = iters
    res.cost_trace = trace
    return res


def problem_mu_schedule(params: ShieldParams) -> tuple[float, ...]:
    return params.hard_mu


# ---------------------------------------------------------------------------
# the filter
# ---------------------------------------------------------------------------

class MpcShield:
    """Stateful safety filter: sector extraction + OCP solve + warm starting.

    One instance per environment; the only state is the previous solution,
    shifted by one stage for the next warm start.
    """

    def __init__(self, params: ShieldParams, mode: str = SOFT):
        if mode not in (SOFT, HARD):
            raise ValueError(f"unknown shield mode {mode!r}")
        self.params = params
        self.mode = mode
        self._warm: np.ndarray | None = None

    def reset(self) -> None:
        self._warm = None

    def filter(self, scan: LidarScan, robot: Pose, a_rl: np.ndarray,
               weights: ShieldWeights) -> tuple[np.ndarray, OcpResult, list[SectorObstacle]]:
        """Return the safe first action for a proposed action, plus the full
        solver result and the sector obstacles fed to the OCP."""
        sectors = select_sector_obstacles(scan, robot, self.params.m_sectors)
        problem = make_problem(self.params, np.array([robot.x, robot.y, robot.theta]),
                               np.asarray(a_rl, dtype=np.float64), weights, sectors,
                               self.mode)
        solve = solve_soft if self.mode == SOFT else solve_hard
        result = solve(problem, self.params, warm=self._warm)
        if result.status == INFEASIBLE:
            self._warm = None
        else:
            self._warm = np.vstack([result.actions[1:], result.actions[-1:]])
        return result.actions[0].copy(), result, sectors
