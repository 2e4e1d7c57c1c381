"""Soft actor-critic agents and the constrained-RL baselines.

One SacAgent class serves both the task agent (navigation commands) and the
supervisor agent (shield weights); squashed-Gaussian policies map to each
agent's physical action box. The Lagrangian variants add a pair of cost
critics and a multiplier state updated per episode, either by plain dual
ascent or via a PID rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .neural import Mlp, adam_init, adam_step, polyak_update
from .shield import ShieldWeights

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_SQUASH_EPS = 1e-6
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool
    cost: float = 0.0
    collision: bool = False


class ReplayBuffer:
    """Uniform-sampling FIFO ring buffer with its own random stream.

    Storage grows geometrically up to `capacity` so idle runs do not pay for
    the full allocation up front.
    """

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, seed,
                 init_size: int = 4096):
        self.capacity = int(capacity)
        self.rng = np.random.default_rng(seed)
        self._alloc = min(init_size, self.capacity)
        self._obs = np.zeros((self._alloc, obs_dim), dtype=np.float32)
        self._next_obs = np.zeros((self._alloc, obs_dim), dtype=np.float32)
        self._act = np.zeros((self._alloc, act_dim), dtype=np.float32)
        self._rew = np.zeros(self._alloc, dtype=np.float32)
        self._done = np.zeros(self._alloc, dtype=np.float32)
        self._cost = np.zeros(self._alloc, dtype=np.float32)
        self._collision = np.zeros(self._alloc, dtype=bool)
        self._size = 0
        self._head = 0  # next write position (FIFO once full)

    def __len__(self) -> int:
        return self._size

    def _grow(self) -> None:
        new_alloc = min(self._alloc * 2, self.capacity)
        for name in ("_obs", "_next_obs", "_act", "_rew", "_done", "_cost", "_collision"):
            old = getattr(self, name)
            fresh = np.zeros((new_alloc,) + old.shape[1:], dtype=old.dtype)
            fresh[:self._alloc] = old
            setattr(self, name, fresh)
        self._alloc = new_alloc

    def add(self, tr: Transition) -> None:
        if self._size == self._alloc and self._alloc < self.capacity:
            self._grow()
        i = self._head
        self._obs[i] = tr.obs
        self._next_obs[i] = tr.next_obs
        self._act[i] = tr.action
        self._rew[i] = tr.reward
        self._done[i] = 1.0 if tr.done else 0.0
        self._cost[i] = tr.cost
        self._collision[i] = tr.collision
        self._head = (i + 1) % self._alloc if self._alloc == self.capacity else i + 1
        if self._head == self._alloc and self._alloc < self.capacity:
            pass  # next add grows first
        self._size = min(self._size + 1, self._alloc)

    def sample(self, batch_size: int) -> dict[str, np.ndarray]:
        if self._size < batch_size:
            raise ValueError("not enough transitions to sample a batch")
        idx = self.rng.integers(0, self._size, size=batch_size)
        return {"obs": self._obs[idx], "act": self._act[idx], "rew": self._rew[idx],
                "next_obs": self._next_obs[idx], "done": self._done[idx],
                "cost": self._cost[idx]}

    def collision_fraction(self) -> float:
        if self._size == 0:
            return 0.0
        return float(np.mean(self._collision[:self._size]))


def store_with_duplication(buffer: ReplayBuffer, tr: Transition) -> None:
    """Insert a transition, three times over if it ended in a collision."""
    for _ in range(3 if tr.collision else 1):
        buffer.add(tr)


# ---------------------------------------------------------------------------
# SAC
# ---------------------------------------------------------------------------

class SacAgent:
    """Soft actor-critic with clipped double-Q targets and auto-tuned entropy
    temperature. Optional cost critics support the Lagrangian baselines."""

    def __init__(self, obs_dim: int, act_dim: int, act_low, act_high, seed,
                 hidden: tuple[int, ...] = (128, 128), lr: float = 3e-4,
                 gamma: float = 0.99, tau: float = 0.005, alpha_init: float = 0.2,
                 with_cost_critics: bool = False):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.gamma = gamma
        self.tau = tau
        self.target_entropy = -float(act_dim)
        low = np.asarray(act_low, dtype=np.float32)
        high = np.asarray(act_high, dtype=np.float32)
        self.scale = (high - low) / 2.0
        self.offset = (high + low) / 2.0

        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        init_rng, self.rng = (np.random.default_rng(c) for c in ss.spawn(2))
        self.actor = Mlp([obs_dim, *hidden, 2 * act_dim], init_rng, final_scale=0.01)
        self.q1 = Mlp([obs_dim + act_dim, *hidden, 1], init_rng)
        self.q2 = Mlp([obs_dim + act_dim, *hidden, 1], init_rng)
        self.tq1 = self.q1.copy()
        self.tq2 = self.q2.copy()
        self.log_alpha = np.array([math.log(alpha_init)], dtype=np.float32)
        self.opt_actor = adam_init(self.actor.params(), lr)
        self.opt_q1 = adam_init(self.q1.params(), lr)
        self.opt_q2 = adam_init(self.q2.params(), lr)
        self.opt_alpha = adam_init([self.log_alpha], lr)
        self._opts = [self.opt_actor, self.opt_q1, self.opt_q2, self.opt_alpha]

        self.with_cost_critics = with_cost_critics
        if with_cost_critics:
            self.qc1 = Mlp([obs_dim + act_dim, *hidden, 1], init_rng)
            self.qc2 = Mlp([obs_dim + act_dim, *hidden, 1], init_rng)
            self.tqc1 = self.qc1.copy()
            self.tqc2 = self.qc2.copy()
            self.opt_qc1 = adam_init(self.qc1.params(), lr)
            self.opt_qc2 = adam_init(self.qc2.params(), lr)
            self._opts += [self.opt_qc1, self.opt_qc2]

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def set_lr(self, lr: float) -> None:
        for opt in self._opts:
            opt.lr = lr

    # -- acting ------------------------------------------------------------

    def act(self, obs: np.ndarray, stochastic: bool) -> np.ndarray:
        """Action in the physical range; the squashing bounds it exactly."""
        out = self.actor.forward(np.asarray(obs, dtype=np.float32))
        mu = out[..., :self.act_dim]
        if stochastic:
            log_std = np.clip(out[..., self.act_dim:], LOG_STD_MIN, LOG_STD_MAX)
            eps = self.rng.standard_normal(mu.shape, dtype=np.float32)
            z = mu + np.exp(log_std) * eps
        else:
            z = mu
        return self.offset + self.scale * np.tanh(z)

    def _policy_sample(self, obs: np.ndarray):
        """Reparameterized sample with log-probability and backward context."""
        out = self.actor.forward(obs)
        mu = out[:, :self.act_dim]
        log_std_raw = out[:, self.act_dim:]
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        sigma = np.exp(log_std)
        eps = self.rng.standard_normal(mu.shape, dtype=np.float32)
        z = mu + sigma * eps
        t = np.tanh(z.astype(np.float64))
        a_phys = (self.offset + self.scale * t).astype(np.float32)
        u = self.scale * (1.0 - t * t) + _SQUASH_EPS
        log_prob = np.sum(-0.5 * eps.astype(np.float64) ** 2
                          - log_std.astype(np.float64) - _HALF_LOG_2PI
                          - np.log(u), axis=1)
        aux = {"eps": eps, "sigma": sigma, "t": t, "u": u,
               "std_mask": (log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)}
        return a_phys, log_prob, aux

    # -- learning ----------------------------------------------------------

    def compute_targets(self, batch: dict[str, np.ndarray]) -> np.ndarray:
        """Clipped double-Q Bellman targets with the entropy bonus, in float64."""
        a2, logp2, _ = self._policy_sample(batch["next_obs"])
        tin = np.concatenate([batch["next_obs"], a2], axis=1)
        t1 = self.tq1.forward(tin)[:, 0].astype(np.float64)
        t2 = self.tq2.forward(tin)[:, 0].astype(np.float64)
        soft_v = np.minimum(t1, t2) - self.alpha * logp2
        y = batch["rew"].astype(np.float64) + self.gamma * (1.0 - batch["done"].astype(np.float64)) * soft_v
        self._last_next_action = a2  # reused by the cost-critic targets
        return y

    def _update_critic(self, net: Mlp, opt, q_in: np.ndarray, y: np.ndarray) -> float:
        q = net.forward(q_in)
        err = q - y[:, None].astype(np.float32)
        grads, _ = net.backward((2.0 / len(y)) * err)
        adam_step(opt, net.params(), grads)
        return float(np.mean(err.astype(np.float64) ** 2))

    def update(self, batch: dict[str, np.ndarray], lam: float = 0.0) -> dict[str, float]:
        """One gradient step on critics, actor and temperature, then Polyak.

        `lam` is the Lagrange multiplier; with cost critics enabled the actor
        objective becomes (alpha*logp - min Q + lam * Q_cost) / (1 + lam).
        """
        y = self.compute_targets(batch)
        if not np.isfinite(y).all():
            return {"skipped": 1.0}
        q_in = np.concatenate([batch["obs"], batch["act"]], axis=1)
        loss1 = self._update_critic(self.q1, self.opt_q1, q_in, y)
        loss2 = self._update_critic(self.q2, self.opt_q2, q_in, y)

        if self.with_cost_critics:
            tcin = np.concatenate([batch["next_obs"], self._last_next_action], axis=1)
            tc = np.maximum(self.tqc1.forward(tcin)[:, 0], self.tqc2.forward(tcin)[:, 0])
            yc = batch["cost"].astype(np.float64) + self.gamma \
                * (1.0 - batch["done"].astype(np.float64)) * tc.astype(np.float64)
            self._update_critic(self.qc1, self.opt_qc1, q_in, yc)
            self._update_critic(self.qc2, self.opt_qc2, q_in, yc)

        # actor
        obs = batch["obs"]
        n = len(obs)
        w = 1.0 / (n * (1.0 + lam))
        a_new, logp, aux = self._policy_sample(obs)
        qin = np.concatenate([obs, a_new], axis=1)
        q1o = self.q1.forward(qin)
        q2o = self.q2.forward(qin)
        take1 = q1o <= q2o
        din1 = self.q1.backward_input(np.where(take1, -w, 0.0).astype(np.float32))
        din2 = self.q2.backward_input(np.where(~take1, -w, 0.0).astype(np.float32))
        da = (din1 + din2)[:, self.obs_dim:].astype(np.float64)
        qc_mean = 0.0
        if self.with_cost_critics and lam != 0.0:
            qc1o = self.qc1.forward(qin)
            qc2o = self.qc2.forward(qin)
            takec = qc1o >= qc2o
            dinc1 = self.qc1.backward_input(np.where(takec, lam * w, 0.0).astype(np.float32))
            dinc2 = self.qc2.backward_input(np.where(~takec, lam * w, 0.0).astype(np.float32))
            da += (dinc1 + dinc2)[:, self.obs_dim:].astype(np.float64)
            qc_mean = float(np.mean(np.maximum(qc1o, qc2o)))

        alpha = self.alpha
        t, u, sigma, eps = aux["t"], aux["u"], aux["sigma"], aux["eps"]
        one_m_t2 = 1.0 - t * t
        s_term = 2.0 * self.scale * t * one_m_t2 / u          # dlogp/dz
        dz_common = alpha * w * s_term + da * self.scale * one_m_t2
        d_mu = dz_common
        d_logstd = (-alpha * w + dz_common * sigma * eps) * aux["std_mask"]
        dout = np.concatenate([d_mu, d_logstd], axis=1).astype(np.float32)
        grads_actor, _ = self.actor.backward(dout)
        adam_step(self.opt_actor, self.actor.params(), grads_actor)

        # temperature: move alpha toward the target policy entropy
        g_alpha = -float(np.mean(logp + self.target_entropy))
        adam_step(self.opt_alpha, [self.log_alpha],
                  [np.array([g_alpha], dtype=np.float32)])

        polyak_update(self.tq1, self.q1, self.tau)
        polyak_update(self.tq2, self.q2, self.tau)
        if self.with_cost_critics:
            polyak_update(self.tqc1, self.qc1, self.tau)
            polyak_update(self.tqc2, self.qc2, self.tau)

        qmin = np.where(take1, q1o, q2o).astype(np.float64)
        actor_loss = float(np.mean(alpha * logp - qmin[:, 0] + lam * qc_mean) / (1.0 + lam))
        return {"critic_loss": 0.5 * (loss1 + loss2), "actor_loss": actor_loss,
                "alpha": alpha, "entropy": -float(np.mean(logp))}

    # -- persistence ---------------------------------------------------------

    def named_tensors(self, prefix: str) -> dict[str, np.ndarray]:
        nets = {"actor": self.actor, "q1": self.q1, "q2": self.q2,
                "tq1": self.tq1, "tq2": self.tq2}
        if self.with_cost_critics:
            nets.update({"qc1": self.qc1, "qc2": self.qc2,
                         "tqc1": self.tqc1, "tqc2": self.tqc2})
        out: dict[str, np.ndarray] = {}
        for name, net in nets.items():
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                out[f"{prefix}/{name}/w{i}"] = w
                out[f"{prefix}/{name}/b{i}"] = b
        out[f"{prefix}/log_alpha"] = self.log_alpha
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray], prefix: str) -> None:
        """Load parameters saved by named_tensors; shapes must match."""
        from .neural import CheckpointError

        own = self.named_tensors(prefix)
        for name, arr in own.items():
            if name not in tensors:
                raise CheckpointError(f"checkpoint is missing tensor {name}")
            src = tensors[name]
            if tuple(src.shape) != tuple(arr.shape):
                raise CheckpointError(
                    f"shape mismatch for {name}: checkpoint {src.shape}, model {arr.shape}")
            arr[...] = src


# ---------------------------------------------------------------------------
# rewards and action mapping
# ---------------------------------------------------------------------------

def supervisor_reward(collision_or_stuck: bool, min_dist: float, a_rl: np.ndarray,
                      a_mpc: np.ndarray, r_collision: float = 10.0) -> float:
    """Large penalty on collision/stuck, otherwise a deviation penalty scaled
    by the distance to the single nearest lidar return (never positive)."""
    if collision_or_stuck:
        return -r_collision
    dev = np.asarray(a_rl, dtype=np.float64) - np.asarray(a_mpc, dtype=np.float64)
    return -min_dist * float(np.dot(dev, dev))


def task_reward(goal_reached: bool, dist_prev: float, dist_now: float,
                r_goal: float = 20.0) -> float:
    """Goal bonus or progress made toward the goal; collisions carry no
    penalty here by design."""
    return r_goal if goal_reached else dist_prev - dist_now


def map_supervisor_action(raw: np.ndarray, w_min: float = 0.01,
                          w_max: float = 5.0) -> ShieldWeights:
    """Affine map of a [-1, 1] policy output onto the weight range."""
    w = w_min + (np.asarray(raw, dtype=np.float64) + 1.0) * 0.5 * (w_max - w_min)
    return ShieldWeights(r0_v=float(w[0]), r0_w=float(w[1]), omega=w[2:].copy())


# ---------------------------------------------------------------------------
# Lagrangian machinery
# ---------------------------------------------------------------------------

@dataclass
class LagrangeState:
    """Multiplier state for the constrained baselines (plain or PID update)."""

    limit: float = 0.0025           # tolerated cost rate (~1 collision / 400 steps)
    lr: float = 0.05
    kp: float = 0.1
    ki: float = 0.01
    kd: float = 0.0
    lam: float = 0.0
    integral: float = 0.0
    prev_err: float = 0.0
    integral_max: float = 100.0


def lagrangian_update(state: LagrangeState, episode_cost_rate: float,
                      pid: bool = False) -> float:
    """Move the multiplier against the constraint violation; lam stays >= 0."""
    err = episode_cost_rate - state.limit
    if pid:
        state.integral = min(max(state.integral + err, 0.0), state.integral_max)
        lam = state.kp * err + state.ki * state.integral + state.kd * (err - state.prev_err)
        state.prev_err = err
        state.lam = max(0.0, lam)
    else:
        state.lam = max(0.0, state.lam + state.lr * err)
    return state.lam


@dataclass
class LrSchedule:
    lr0: float
    lr_final: float
    total_steps: int


def anneal_lr(schedule: LrSchedule, step: int) -> float:
    """Linear decay from lr0 to lr_final, clamped past the end."""
    if step >= schedule.total_steps:
        return schedule.lr_final
    frac = step / schedule.total_steps
    return schedule.lr0 + (schedule.lr_final - schedule.lr0) * frac
