"""Safe navigation RL with a dynamically tuned MPC safety shield."""

from .agents import (LagrangeState, LrSchedule, ReplayBuffer, SacAgent, Transition,
                     anneal_lr, lagrangian_update, map_supervisor_action,
                     store_with_duplication, supervisor_reward, task_reward)
from .config import ConfigError, default_config, load_config
from .harness import MetricsAccumulator, evaluate, plot_data, run, update_metrics
from .neural import (AdamState, CheckpointError, Mlp, adam_init, adam_step,
                     load_checkpoint, polyak_update, save_checkpoint)
from .shield import (MpcShield, OcpProblem, OcpResult, SectorObstacle, ShieldParams,
                     ShieldWeights, select_sector_obstacles, solve_hard, solve_soft,
                     soft_cost, soft_cost_grad)
from .world import (LidarScan, Pose, RobotAction, StepOutcome, WorldParams,
                    WorldState, build_supervisor_obs, build_task_obs, kinematic_step,
                    lidar_scan, reset, step, wrap_angle)

__version__ = "0.1.0"
