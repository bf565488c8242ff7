"""Vectorized quadruped-on-skateboard simulator with a staged PPO trainer."""
from .env import SimParams, VecEnv
from .ppo import GaussianPolicy, PpoConfig
from .quadruped import QuadrupedParams
from .skateboard import SkateboardParams
from .stages import StageConfig, default_stages
from .trainer import train_stage

__all__ = ["GaussianPolicy", "PpoConfig", "QuadrupedParams", "SimParams", "SkateboardParams", "StageConfig",
           "VecEnv", "default_stages", "train_stage"]
__version__ = "0.1.0"
