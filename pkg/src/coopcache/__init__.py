"""Reinforcement-learning driven cooperative coded caching at small base stations."""
from .core import (CachingAction, EnvObservation, SystemParams, action_to_fractions,
                   complementary_fraction, compute_popularity, compute_reward, mds_parity_bits)
from .actions import ActionSpace, count_actions, enumerate_actions, lmax, sample_uniform, validate
from .env import CachingEnv, EnvConfig, SnmParams, build, zipf_profile
from .serving import SlotTraffic, account_mds, account_uncoded, direct_ratio

__version__ = "0.1.0"

__all__ = [
    "CachingAction", "EnvObservation", "SystemParams", "action_to_fractions",
    "complementary_fraction", "compute_popularity", "compute_reward", "mds_parity_bits",
    "ActionSpace", "count_actions", "enumerate_actions", "lmax", "sample_uniform", "validate",
    "CachingEnv", "EnvConfig", "SnmParams", "build", "zipf_profile",
    "SlotTraffic", "account_mds", "account_uncoded", "direct_ratio",
]
