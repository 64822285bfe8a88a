"""Experiment orchestration: configuration, seeded runs, sweeps and comparison."""
from .config import (AgentSpec, ConfigError, ExperimentConfig, InfeasibleScenario,
                     default_switch_slot, dump_config, load_config, parse_agent_label,
                     parse_config)
from .runner import (METRIC_FIELDS, MetricRow, RunResult, compare, compare_policies,
                     cosine_similarity, make_agent, run, run_seed, summarize_sweep, sweep,
                     write_metrics)

__all__ = [
    "AgentSpec", "ConfigError", "ExperimentConfig", "InfeasibleScenario",
    "default_switch_slot", "dump_config", "load_config", "parse_agent_label", "parse_config",
    "METRIC_FIELDS", "MetricRow", "RunResult", "compare", "compare_policies",
    "cosine_similarity", "make_agent", "run", "run_seed", "summarize_sweep", "sweep",
    "write_metrics",
]
