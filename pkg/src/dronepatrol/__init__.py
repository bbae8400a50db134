"""Grid-world simulator and Q-learning toolkit for drone-swarm patrolling of a dynamic city map."""
from .config import RunConfig, load_config, make_env
from .environment import DemandEnv, SyntheticEnv, demand_map, test_map, training_map
from .gridmap import Action, Cell, GridSpec
from .harness import MetricsRecord, TrajectoryLog, compare, export, replay_scores, run_episode
from .idleness import IdlenessMap, coverage_score, init_idleness, step_idleness
from .kernels import BACKEND
from .learner import ReplayBuffer, SwarmAgent, TrainConfig, collect_random_rollouts, online_step, pretrain
from .policies import joint_action_solve
from .qnet import QParams, forward, init_params, load_checkpoint, save_checkpoint
from .statereward import ScoreWeights, build_state, drone_reward, swarm_score
from .world import World

__version__ = "0.1.0"

__all__ = [
    "Action", "BACKEND", "Cell", "DemandEnv", "GridSpec", "IdlenessMap", "MetricsRecord", "QParams",
    "ReplayBuffer", "RunConfig", "ScoreWeights", "SwarmAgent", "SyntheticEnv", "TrainConfig",
    "TrajectoryLog", "World", "build_state", "collect_random_rollouts", "compare", "coverage_score",
    "demand_map", "drone_reward", "export", "forward", "init_idleness", "init_params",
    "joint_action_solve", "load_checkpoint", "load_config", "make_env", "online_step", "pretrain",
    "replay_scores", "run_episode", "save_checkpoint", "step_idleness", "swarm_score", "test_map",
    "training_map",
]
