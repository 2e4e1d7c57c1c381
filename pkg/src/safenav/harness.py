"""Training and evaluation orchestration for all five method variants.

A run wires task agent -> shield -> environment (per method), accumulates the
goals/collisions metrics, and writes line-oriented logs plus checkpoints. Runs
are deterministic functions of (config, seed): identical inputs produce
byte-identical metrics logs.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import agents as ag
from . import world as wd
from .config import config_hash, canonical_text, METHODS
from .neural import CheckpointError, load_checkpoint, save_checkpoint
from .shield import (HARD, INFEASIBLE, MpcShield, ShieldParams, SOFT,
                     mpc_tuned_weights, select_sector_obstacles)


@dataclass
class MetricsAccumulator:
    """Run counters; the ratio guard substitutes one collision when there are
    none so the headline metric stays finite."""

    goals: int = 0
    collisions: int = 0
    stuck: int = 0
    solver_infeasible: int = 0

    @property
    def ratio(self) -> float:
        return self.goals / max(self.collisions, 1)


def update_metrics(acc: MetricsAccumulator, outcome: wd.StepOutcome,
                   solver_infeasible: bool = False) -> MetricsAccumulator:
    acc.goals += int(outcome.goal_reached)
    acc.collisions += int(outcome.collision)
    acc.stuck += int(outcome.stuck)
    acc.solver_infeasible += int(solver_infeasible)
    return acc


def _reset_with_retries(ep_rng: np.random.Generator, env_id: int,
                        wp: wd.WorldParams, tries: int = 16) -> wd.WorldState:
    """Draw episode seeds until placement succeeds (deterministic given the
    generator state); placement failures are vanishingly rare but must not
    kill a long run."""
    err = None
    for _ in range(tries):
        seed = int(ep_rng.integers(0, 2**63))
        try:
            return wd.reset(seed, env_id, wp)
        except wd.PlacementError as exc:
            err = exc
    raise err


def world_params_from(cfg) -> wd.WorldParams:
    return wd.WorldParams(
        dt=cfg["world.dt"], arena_half=cfg["world.arena_half"],
        pillar_radius=cfg["world.pillar_radius"],
        lwall_arm_len=cfg["world.lwall_arm_len"],
        lwall_arm_width=cfg["world.lwall_arm_width"],
        robot_radius=cfg["world.robot_radius"], v_min=cfg["world.v_min"],
        v_max=cfg["world.v_max"], w_max=cfg["world.w_max"],
        goal_radius=cfg["world.goal_radius"], eps_motion=cfg["world.eps_motion"],
        stuck_steps=cfg["world.stuck_steps"],
        max_episode_steps=cfg["world.max_episode_steps"],
        lidar_beams=cfg["world.lidar_beams"],
        lidar_max_range=cfg["world.lidar_max_range"],
        min_clearance=cfg["world.min_clearance"],
        place_attempts=cfg["world.place_attempts"])


def shield_params_from(cfg) -> ShieldParams:
    return ShieldParams(
        horizon=cfg["shield.horizon"], dt=cfg["world.dt"],
        m_sectors=cfg["shield.m_sectors"], r_effort=cfg["shield.r_effort"],
        robot_radius=cfg["world.robot_radius"], d_floor=cfg["shield.d_floor"],
        v_min=cfg["world.v_min"], v_max=cfg["world.v_max"], w_max=cfg["world.w_max"],
        state_box_half=cfg["world.arena_half"] - cfg["world.robot_radius"],
        state_penalty=cfg["shield.state_penalty"], delta=cfg["shield.delta"],
        max_iters=cfg["shield.max_iters"], g_tol=cfg["shield.g_tol"],
        c_tol=cfg["shield.c_tol"], armijo_c=cfg["shield.armijo_c"],
        backtrack=cfg["shield.backtrack"])


def _make_task_agent(cfg, seed) -> ag.SacAgent:
    hidden = (cfg["sac.hidden"], cfg["sac.hidden"])
    return ag.SacAgent(
        obs_dim=cfg["world.lidar_beams"] + 4, act_dim=2,
        act_low=[cfg["world.v_min"], -cfg["world.w_max"]],
        act_high=[cfg["world.v_max"], cfg["world.w_max"]], seed=seed,
        hidden=hidden, lr=cfg["sac.lr"], gamma=cfg["sac.gamma"],
        tau=cfg["sac.tau"], alpha_init=cfg["sac.alpha_init"],
        with_cost_critics=cfg["run.method"] in ("sac_lag", "sac_pid"))


def _make_supervisor(cfg, seed) -> ag.SacAgent:
    m = cfg["shield.m_sectors"]
    obs_dim = cfg["world.lidar_beams"] + 4 + 2 * m \
        + (2 if cfg["run.ablation_goal_info"] else 0)
    hidden = (cfg["sac.hidden"], cfg["sac.hidden"])
    return ag.SacAgent(obs_dim=obs_dim, act_dim=2 + m, act_low=-np.ones(2 + m),
                       act_high=np.ones(2 + m), seed=seed, hidden=hidden,
                       lr=cfg["sac.lr"], gamma=cfg["sac.gamma"], tau=cfg["sac.tau"],
                       alpha_init=cfg["sac.alpha_init"])


class TrainRun:
    """One training run of a single method; single-threaded end to end."""

    def __init__(self, cfg: dict, out_dir):
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.method = cfg["run.method"]
        self.wp = world_params_from(cfg)
        self.sp = shield_params_from(cfg)
        self.m_sectors = cfg["shield.m_sectors"]
        self.ablation = cfg["run.ablation_goal_info"]

        ss = np.random.SeedSequence(cfg["run.seed"])
        (ep_ss, task_ss, sup_ss, tbuf_ss, sbuf_ss, warm_ss) = ss.spawn(6)
        self._ep_rng = np.random.default_rng(ep_ss)
        self._warm_rng = np.random.default_rng(warm_ss)

        self.task_agent = _make_task_agent(cfg, task_ss)
        self.task_buf = ag.ReplayBuffer(cfg["sac.buffer_capacity"],
                                        self.task_agent.obs_dim, 2, tbuf_ss)
        self.supervisor = None
        self.sup_buf = None
        self.shield = None
        self.lagrange = None
        if self.method == "ours":
            self.supervisor = _make_supervisor(cfg, sup_ss)
            self.sup_buf = ag.ReplayBuffer(cfg["sac.buffer_capacity"],
                                           self.supervisor.obs_dim,
                                           2 + self.m_sectors, sbuf_ss)
            self.shield = MpcShield(self.sp, SOFT)
            self.sup_lr_schedule = ag.LrSchedule(cfg["sac.lr"], cfg["sac.sup_lr_final"],
                                                 cfg["run.total_steps"])
        elif self.method == "mpc_tuned":
            self.shield = MpcShield(self.sp, HARD)
            self.fixed_weights = mpc_tuned_weights(self.m_sectors,
                                                   cfg["shield.mpc_tuned_r0"])
        elif self.method in ("sac_lag", "sac_pid"):
            self.lagrange = ag.LagrangeState(limit=cfg["lag.cost_limit"],
                                             lr=cfg["lag.lr"], kp=cfg["lag.kp"],
                                             ki=cfg["lag.ki"], kd=cfg["lag.kd"])

        self.metrics = MetricsAccumulator()
        self.episode = 0
        self.shield_calls = 0
        self._weight_sum = np.zeros(2 + self.m_sectors)
        self._weight_count = 0
        self._begin_episode()

    # -- episode management --------------------------------------------------

    def _begin_episode(self) -> None:
        self.world = _reset_with_retries(self._ep_rng, self.cfg["run.env_id"], self.wp)
        self.scan = wd.lidar_scan(self.world, self.wp)
        self.prev_action = np.zeros(2)
        self.pending_sup: ag.Transition | None = None
        if self.shield is not None:
            self.shield.reset()
        self.episode += 1
        self._ep_cost = 0.0
        self._ep_steps = 0

    def _random_task_action(self) -> np.ndarray:
        return self._warm_rng.uniform([self.wp.v_min, -self.wp.w_max],
                                      [self.wp.v_max, self.wp.w_max])

    def _task_action(self, task_obs: np.ndarray, warmup: bool) -> np.ndarray:
        if warmup:
            return self._random_task_action().astype(np.float32)
        return self.task_agent.act(task_obs, stochastic=True)

    # -- per-step logic --------------------------------------------------------

    def _step_ours(self, warmup: bool) -> tuple[wd.StepOutcome, bool]:
        cfg = self.cfg
        prev = wd.RobotAction(*self.prev_action)
        task_obs = wd.build_task_obs(self.world, prev, self.wp, self.scan)
        a_rl = self._task_action(task_obs, warmup)
        sectors = select_sector_obstacles(self.scan, self.world.robot, self.m_sectors)
        sup_obs = wd.build_supervisor_obs(self.world, wd.RobotAction(*a_rl), prev,
                                          sectors, self.wp, self.scan,
                                          include_goal=self.ablation)
        if self.pending_sup is not None:
            self.pending_sup.next_obs = sup_obs
            ag.store_with_duplication(self.sup_buf, self.pending_sup)
            self.pending_sup = None
        if warmup:
            raw = self._warm_rng.uniform(-1.0, 1.0,
                                         size=2 + self.m_sectors).astype(np.float32)
        else:
            raw = self.supervisor.act(sup_obs, stochastic=True)
        weights = ag.map_supervisor_action(raw, cfg["agents.w_min"], cfg["agents.w_max"])
        a_mpc, ocp, _ = self.shield.filter(self.scan, self.world.robot, a_rl, weights)
        self.shield_calls += 1
        infeasible = ocp.status == INFEASIBLE
        self._weight_sum += np.concatenate([[weights.r0_v, weights.r0_w], weights.omega])
        self._weight_count += 1

        goal_before = self.world.goal
        dist_prev = math.hypot(goal_before[0] - self.world.robot.x,
                               goal_before[1] - self.world.robot.y)
        min_dist = float(self.scan.ranges.min())
        self.world, outcome = wd.step(self.world, wd.RobotAction(*a_mpc), self.wp)
        dist_now = math.hypot(goal_before[0] - self.world.robot.x,
                              goal_before[1] - self.world.robot.y)
        r_task = ag.task_reward(outcome.goal_reached, dist_prev, dist_now,
                                cfg["agents.r_goal"])
        r_sup = ag.supervisor_reward(outcome.terminal, min_dist, a_rl, a_mpc,
                                     cfg["agents.r_collision"])
        if self.ablation and outcome.goal_reached:
            r_sup += cfg["agents.r_goal"]

        scan_next = wd.lidar_scan(self.world, self.wp)
        task_next = wd.build_task_obs(self.world, wd.RobotAction(*a_mpc), self.wp,
                                      scan_next)
        outcome.task_obs = task_next
        self.task_buf.add(ag.Transition(task_obs, a_rl, r_task, task_next,
                                        done=outcome.terminal,
                                        collision=outcome.collision))
        pending = ag.Transition(sup_obs, raw, r_sup, np.zeros_like(sup_obs),
                                done=outcome.terminal, collision=outcome.collision)
        if outcome.terminal:
            ag.store_with_duplication(self.sup_buf, pending)
            self._begin_episode()
        elif outcome.max_steps:
            # truncation: finish the supervisor transition against the post-step
            # state before starting a fresh episode (done stays false so the
            # value bootstraps through the time limit)
            a_next = self._task_action(task_next, warmup)
            sectors_next = select_sector_obstacles(scan_next, self.world.robot,
                                                   self.m_sectors)
            pending.next_obs = wd.build_supervisor_obs(
                self.world, wd.RobotAction(*a_next), wd.RobotAction(*a_mpc),
                sectors_next, self.wp, scan_next, include_goal=self.ablation)
            ag.store_with_duplication(self.sup_buf, pending)
            self._begin_episode()
        else:
            self.pending_sup = pending
            self.prev_action = a_mpc
            self.scan = scan_next
        return outcome, infeasible

    def _step_baseline(self, warmup: bool) -> tuple[wd.StepOutcome, bool]:
        cfg = self.cfg
        prev = wd.RobotAction(*self.prev_action)
        task_obs = wd.build_task_obs(self.world, prev, self.wp, self.scan)
        a_rl = self._task_action(task_obs, warmup)
        infeasible = False
        if self.method == "mpc_tuned":
            a_apply, ocp, _ = self.shield.filter(self.scan, self.world.robot, a_rl,
                                                 self.fixed_weights)
            self.shield_calls += 1
            infeasible = ocp.status == INFEASIBLE
        else:
            a_apply = a_rl

        goal_before = self.world.goal
        dist_prev = math.hypot(goal_before[0] - self.world.robot.x,
                               goal_before[1] - self.world.robot.y)
        self.world, outcome = wd.step(self.world, wd.RobotAction(*a_apply), self.wp)
        dist_now = math.hypot(goal_before[0] - self.world.robot.x,
                              goal_before[1] - self.world.robot.y)
        r_task = ag.task_reward(outcome.goal_reached, dist_prev, dist_now,
                                cfg["agents.r_goal"])
        cost = 1.0 if outcome.collision else 0.0
        self._ep_cost += cost
        self._ep_steps += 1

        scan_next = wd.lidar_scan(self.world, self.wp)
        task_next = wd.build_task_obs(self.world, wd.RobotAction(*a_apply), self.wp,
                                      scan_next)
        outcome.task_obs = task_next
        self.task_buf.add(ag.Transition(task_obs, a_rl, r_task, task_next,
                                        done=outcome.terminal, cost=cost,
                                        collision=outcome.collision))
        if outcome.terminal or outcome.max_steps:
            if self.lagrange is not None and self._ep_steps > 0:
                ag.lagrangian_update(self.lagrange, self._ep_cost / self._ep_steps,
                                     pid=self.method == "sac_pid")
            self._begin_episode()
        else:
            self.prev_action = a_apply
            self.scan = scan_next
        return outcome, infeasible

    def _gradient_updates(self, step: int) -> None:
        cfg = self.cfg
        batch_size = cfg["sac.batch_size"]
        lam = self.lagrange.lam if self.lagrange is not None else 0.0
        if len(self.task_buf) >= batch_size:
            for _ in range(cfg["sac.task_updates"]):
                self.task_agent.update(self.task_buf.sample(batch_size), lam=lam)
        if self.supervisor is not None and len(self.sup_buf) >= batch_size:
            self.supervisor.set_lr(ag.anneal_lr(self.sup_lr_schedule, step))
            for _ in range(cfg["sac.sup_updates"]):
                self.supervisor.update(self.sup_buf.sample(batch_size))

    # -- logging / checkpoints -------------------------------------------------

    def _log_record(self, step: int) -> dict:
        rec = {"step": step, "episode": self.episode,
               "goals_total": self.metrics.goals,
               "collisions_total": self.metrics.collisions,
               "ratio": self.metrics.ratio,
               "stuck_total": self.metrics.stuck,
               "solver_infeasible_total": self.metrics.solver_infeasible}
        if self.method == "ours":
            denom = max(self._weight_count, 1)
            rec["mean_weight"] = [v / denom for v in self._weight_sum]
            self._weight_sum[:] = 0.0
            self._weight_count = 0
        return rec

    def checkpoint_tensors(self) -> dict[str, np.ndarray]:
        tensors = {"meta/method_id": np.array([float(METHODS.index(self.method))]),
                   "meta/env_id": np.array([float(self.cfg["run.env_id"])]),
                   "meta/m_sectors": np.array([float(self.m_sectors)]),
                   "meta/ablation": np.array([1.0 if self.ablation else 0.0]),
                   "meta/hidden": np.array([float(self.cfg["sac.hidden"])])}
        tensors.update(self.task_agent.named_tensors("task"))
        if self.supervisor is not None:
            tensors.update(self.supervisor.named_tensors("sup"))
        return tensors

    def execute(self) -> dict:
        cfg = self.cfg
        out = self.out_dir
        out.mkdir(parents=True, exist_ok=True)
        (out / "checkpoints").mkdir(exist_ok=True)
        (out / "config.txt").write_text(canonical_text(cfg), encoding="utf-8")
        total = cfg["run.total_steps"]
        warmup_steps = cfg["run.warmup_steps"]
        log_every = cfg["harness.log_every"]
        ckpt_every = cfg["harness.checkpoint_every"]
        step_fn = self._step_ours if self.method == "ours" else self._step_baseline
        t0 = time.monotonic()

        with open(out / "metrics.jsonl", "w", encoding="utf-8") as log:
            for step in range(1, total + 1):
                warmup = step <= warmup_steps
                outcome, infeasible = step_fn(warmup)
                update_metrics(self.metrics, outcome, infeasible)
                if not warmup:
                    self._gradient_updates(step)
                if step % log_every == 0 or step == total:
                    log.write(json.dumps(self._log_record(step)) + "\n")
                if ckpt_every > 0 and step % ckpt_every == 0:
                    save_checkpoint(self.checkpoint_tensors(),
                                    out / "checkpoints" / f"step_{step:08d}.ckpt")

        save_checkpoint(self.checkpoint_tensors(), out / "checkpoints" / "final.ckpt")
        summary = {"method": self.method, "env_id": cfg["run.env_id"],
                   "seed": cfg["run.seed"], "steps": total,
                   "episodes": self.episode,
                   "goals_total": self.metrics.goals,
                   "collisions_total": self.metrics.collisions,
                   "stuck_total": self.metrics.stuck,
                   "solver_infeasible_total": self.metrics.solver_infeasible,
                   "ratio": self.metrics.ratio,
                   "shield_calls": self.shield_calls,
                   "task_buffer_size": len(self.task_buf),
                   "sup_buffer_size": len(self.sup_buf) if self.sup_buf else 0,
                   "config_hash": config_hash(cfg),
                   "wall_clock_sec": time.monotonic() - t0}
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                          encoding="utf-8")
        return summary


def run(cfg: dict, out_dir) -> dict:
    """Train per config and write metrics log, config snapshot, checkpoints and
    a final summary under out_dir."""
    return TrainRun(cfg, out_dir).execute()


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(cfg: dict, checkpoint, env_id: int, episodes: int, seed: int,
             out_dir=None, method: str | None = None,
             max_total_steps: int | None = None) -> dict:
    """Deterministic-policy rollouts from a checkpoint (or a random policy when
    no checkpoint is given). Writes a summary plus, for shielded methods, a
    per-step trace of the shield weights."""
    wp = world_params_from(cfg)
    sp = shield_params_from(cfg)
    m = cfg["shield.m_sectors"]

    tensors = None
    if checkpoint is not None:
        tensors = load_checkpoint(checkpoint)
        method = METHODS[int(tensors["meta/method_id"][0])]
        ablation = bool(tensors["meta/ablation"][0])
    else:
        if method is None:
            raise ValueError("evaluation without a checkpoint requires a method")
        ablation = cfg["run.ablation_goal_info"]
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")

    cfg = dict(cfg)
    cfg["run.method"] = method
    cfg["run.ablation_goal_info"] = ablation
    if tensors is not None:
        # the checkpoint's architecture wins over whatever config is active
        cfg["sac.hidden"] = int(tensors["meta/hidden"][0])
        cfg["shield.m_sectors"] = int(tensors["meta/m_sectors"][0])
        m = cfg["shield.m_sectors"]
        sp = shield_params_from(cfg)
    ss = np.random.SeedSequence(seed)
    ep_ss, task_ss, sup_ss, rand_ss = ss.spawn(4)
    ep_rng = np.random.default_rng(ep_ss)
    rand_rng = np.random.default_rng(rand_ss)

    task_agent = supervisor = None
    if tensors is not None:
        task_agent = _make_task_agent(cfg, task_ss)
        task_agent.load_tensors(tensors, "task")
        if method == "ours":
            supervisor = _make_supervisor(cfg, sup_ss)
            supervisor.load_tensors(tensors, "sup")

    shield = None
    if method == "ours":
        shield = MpcShield(sp, SOFT)
    elif method == "mpc_tuned":
        shield = MpcShield(sp, HARD)
        fixed_weights = mpc_tuned_weights(m, cfg["shield.mpc_tuned_r0"])

    metrics = MetricsAccumulator()
    trace: list[list[float]] = []
    episode_lengths: list[int] = []
    total_steps = 0
    ep = 0
    while ep < episodes and (max_total_steps is None or total_steps < max_total_steps):
        ep += 1
        world = _reset_with_retries(ep_rng, env_id, wp)
        scan = wd.lidar_scan(world, wp)
        prev = np.zeros(2)
        if shield is not None:
            shield.reset()
        ep_len = 0
        while True:
            task_obs = wd.build_task_obs(world, wd.RobotAction(*prev), wp, scan)
            if task_agent is not None:
                a_rl = task_agent.act(task_obs, stochastic=False)
            else:
                a_rl = rand_rng.uniform([wp.v_min, -wp.w_max],
                                        [wp.v_max, wp.w_max]).astype(np.float32)
            infeasible = False
            if method == "ours":
                sectors = select_sector_obstacles(scan, world.robot, m)
                sup_obs = wd.build_supervisor_obs(world, wd.RobotAction(*a_rl),
                                                  wd.RobotAction(*prev), sectors, wp,
                                                  scan, include_goal=ablation)
                raw = supervisor.act(sup_obs, stochastic=False)
                weights = ag.map_supervisor_action(raw, cfg["agents.w_min"],
                                                   cfg["agents.w_max"])
                a_apply, ocp, _ = shield.filter(scan, world.robot, a_rl, weights)
                infeasible = ocp.status == INFEASIBLE
                trace.append([float(total_steps), float(ep), weights.r0_v,
                              weights.r0_w, *map(float, weights.omega)])
            elif method == "mpc_tuned":
                a_apply, ocp, _ = shield.filter(scan, world.robot, a_rl, fixed_weights)
                infeasible = ocp.status == INFEASIBLE
                trace.append([float(total_steps), float(ep), fixed_weights.r0_v,
                              fixed_weights.r0_w, *map(float, fixed_weights.omega)])
            else:
                a_apply = a_rl
            world, outcome = wd.step(world, wd.RobotAction(*a_apply), wp)
            update_metrics(metrics, outcome, infeasible)
            scan = wd.lidar_scan(world, wp)
            prev = np.asarray(a_apply, dtype=np.float64)
            ep_len += 1
            total_steps += 1
            if outcome.terminal or outcome.max_steps or \
                    (max_total_steps is not None and total_steps >= max_total_steps):
                break
        episode_lengths.append(ep_len)

    summary = {"method": method, "env_id": env_id, "seed": seed,
               "episodes": ep, "steps": total_steps,
               "goals_total": metrics.goals, "collisions_total": metrics.collisions,
               "stuck_total": metrics.stuck,
               "solver_infeasible_total": metrics.solver_infeasible,
               "ratio": metrics.ratio,
               "mean_episode_len": float(np.mean(episode_lengths)) if episode_lengths else 0.0}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval_summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                               encoding="utf-8")
        if shield is not None:
            with open(out / "weights_trace.csv", "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["step", "episode", "r0_v", "r0_w",
                                 *(f"omega_{i}" for i in range(m))])
                writer.writerows(trace)
    return summary


# ---------------------------------------------------------------------------
# plot data
# ---------------------------------------------------------------------------

def plot_data(run_dirs, out_file) -> None:
    """Merge several runs' metrics logs into one mean/stddev table per step."""
    runs = []
    for d in run_dirs:
        path = Path(d) / "metrics.jsonl"
        records = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                flat = {}
                for key, value in rec.items():
                    if isinstance(value, list):
                        for i, item in enumerate(value):
                            flat[f"{key}_{i}"] = item
                    elif key != "step":
                        flat[key] = value
                records[rec["step"]] = flat
        runs.append(records)

    steps = sorted(set().union(*(r.keys() for r in runs)))
    metrics = sorted(set().union(*(set(rec) for r in runs for rec in r.values())))
    header = ["step"]
    for name in metrics:
        header += [f"{name}_mean", f"{name}_std"]
    with open(out_file, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for step in steps:
            row = [step]
            for name in metrics:
                vals = [r[step][name] for r in runs if step in r and name in r[step]]
                if vals:
                    row += [float(np.mean(vals)), float(np.std(vals))]
                else:
                    row += ["", ""]
            writer.writerow(row)
