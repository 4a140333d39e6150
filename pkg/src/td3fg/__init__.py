"""Generator-guided TD3 on a small continuous-control task, in pure NumPy."""

from .agent import ReplayBuffer, TrainCfg, make_agent_nets, preload_demos, train_step
from .demos import DemoSet, generate_demo_set, load_demos, pretrain_generator, save_demos
from .env import CorridorWalker, EnvSpec, make_spec, rollout
from .errors import TD3fGError
from .estimators import BehaviorCloningRegressor, TD3fGAgent
from .explore import OUState, exploration_action, ou_step
from .harness import ExperimentConfig, RunLog, evaluate, preset, run_experiment, run_sweep
from .nn import MlpNet, adam_step, backward, forward, grad_check, load_net, mlp_init, save_net
from .schedules import ScheduleSet, linear_decay

__version__ = "0.1.0"

__all__ = [
    "BehaviorCloningRegressor",
    "CorridorWalker",
    "DemoSet",
    "EnvSpec",
    "ExperimentConfig",
    "MlpNet",
    "OUState",
    "ReplayBuffer",
    "RunLog",
    "ScheduleSet",
    "TD3fGAgent",
    "TD3fGError",
    "TrainCfg",
    "adam_step",
    "backward",
    "evaluate",
    "exploration_action",
    "forward",
    "generate_demo_set",
    "grad_check",
    "linear_decay",
    "load_demos",
    "load_net",
    "make_agent_nets",
    "make_spec",
    "mlp_init",
    "ou_step",
    "preload_demos",
    "preset",
    "pretrain_generator",
    "rollout",
    "run_experiment",
    "run_sweep",
    "save_demos",
    "save_net",
    "train_step",
]
