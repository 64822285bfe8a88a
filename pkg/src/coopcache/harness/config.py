"""Experiment configuration read from INI-style files.

Sections and keys (all optional unless noted)::

    [env]
    p = 20                # number of SBSs (required)
    C = 10                # catalog size (required)
    K = 1                 # cache size in contents (required)
    d = 2                 # cooperative serving-set size (required)
    L = 3                 # cache levels per content (required)
    B = 1.0
    M = 100               # requests per slot
    skewness = 1.36, 2.3  # one Zipf exponent per popularity candidate
    transition_seed = 0
    request_mode = zipf_multinomial | deterministic_expected | snm
    permute_ranks = false # shuffle content ranks of candidates 2..n
    white_box = true
    action_dependent = auto | true | false
    snm_bursts = 3
    snm_lifespan = 20
    snm_boost = 5

    [agent]
    name = qlearning      # value_iteration | qlearning | vfa | mpcc | rl
    discipline = mds      # mds | uncoded
    cooperative = true    # false: d = 1 with full contents only
    gamma = 0.9
    lambda = 0.6
    lambda_decay = 0
    delta = 0.01
    omega1 = 1.0
    omega2 = 0.01
    qtable_cap = 20000000 # largest |Theta|*|A|^2 for which "rl" picks tabular Q

    [schedule]
    horizon = 200000
    switch_slot = 100000
    epsilon = 0.1
    seeds = 0, 1, 2, 3, 4

    [output]
    path = results
    metrics_window = 0    # trailing window for per-slot rho; 0 = exploitation length
    record_every = 1
    similarity = auto     # per-slot cosine similarity to the oracle policy

    [sweep]
    K = 1, 2, 3, 4
    agents = qlearning, qlearning-ucc, qlearning-nc, mpcc

    [compare]
    agents = qlearning, mpcc
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from ..actions import DEFAULT_SIZE_CAP, count_actions
from ..core import EmptyActionSpace, SystemParams
from ..env import EnvConfig, RequestMode, SnmParams

__all__ = [
    "AgentSpec",
    "ExperimentConfig",
    "ConfigError",
    "InfeasibleScenario",
    "AGENT_NAMES",
    "load_config",
    "parse_config",
    "parse_agent_label",
    "default_switch_slot",
]

AGENT_NAMES = ("value_iteration", "qlearning", "vfa", "mpcc", "rl")


class ConfigError(ValueError):
    pass


class InfeasibleScenario(ValueError):
    pass


@dataclass(frozen=True)
class AgentSpec:
    name: str = "qlearning"
    discipline: str = "mds"
    cooperative: bool = True
    gamma: float = 0.9
    lam: float = 0.6
    lambda_decay: float = 0.0
    delta: float = 0.01
    omega1: float = 1.0
    omega2: float = 0.01

    def __post_init__(self):
        if self.name not in AGENT_NAMES:
            raise ConfigError(f"unknown agent {self.name!r}; choose from {AGENT_NAMES}")
        if self.discipline not in ("mds", "uncoded"):
            raise ConfigError(f"unknown discipline {self.discipline!r}")
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must lie in [0, 1)")
        if not self.omega1 > self.omega2 > 0:
            raise ConfigError("need omega1 > omega2 > 0")

    @property
    def label(self) -> str:
        suffix = "" if self.cooperative else "-nc"
        if self.discipline == "uncoded":
            suffix += "-ucc"
        return self.name + suffix


def parse_agent_label(label: str, base: AgentSpec) -> AgentSpec:
    """``qlearning-ucc`` -> uncoded discipline, ``qlearning-nc`` -> non-cooperative."""
    parts = label.strip().split("-")
    name, flags = parts[0], set(parts[1:])
    unknown = flags - {"ucc", "nc", "mds"}
    if unknown:
        raise ConfigError(f"unknown agent variant(s) {sorted(unknown)} in {label!r}")
    return replace(base, name=name,
                   discipline="uncoded" if "ucc" in flags else "mds",
                   cooperative="nc" not in flags)


def default_switch_slot(K: int) -> int:
    return 100_000 if K == 1 else 300_000


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig
    agent: AgentSpec = field(default_factory=AgentSpec)
    horizon: int = 200_000
    switch_slot: int = 100_000
    epsilon: float = 0.1
    seeds: tuple = (0,)
    output_path: str = "results"
    metrics_window: int = 0
    record_every: int = 1
    similarity: Optional[bool] = None
    sweep_K: tuple = ()
    sweep_agents: tuple = ()
    compare_agents: tuple = ()
    qtable_cap: int = 20_000_000

    def __post_init__(self):
        if not self.horizon > self.switch_slot >= 0:
            raise ConfigError("need horizon > switch_slot >= 0")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.metrics_window < 0 or self.record_every < 1:
            raise ConfigError("metrics_window must be >= 0 and record_every >= 1")
        if self.qtable_cap < 0:
            raise ConfigError("qtable_cap must be >= 0")

    @property
    def params(self) -> SystemParams:
        return self.env.params

    @property
    def window(self) -> int:
        return self.metrics_window or (self.horizon - self.switch_slot)

    def with_K(self, K: int) -> "ExperimentConfig":
        params = replace(self.params, K=K)
        return replace(self, env=self.env.with_params(params))


def _get(section, key, conv, default):
    if section is None or key not in section:
        return default
    raw = section[key].strip()
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} = {raw!r}: {exc}") from None


def _bool(raw: str) -> bool:
    v = raw.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _opt_bool(raw: str):
    return None if raw.lower() == "auto" else _bool(raw)


def _floats(raw: str) -> tuple:
    return tuple(float(v) for v in raw.replace(";", ",").split(",") if v.strip())


def _ints(raw: str) -> tuple:
    return tuple(int(v) for v in raw.replace(";", ",").split(",") if v.strip())


def _names(raw: str) -> tuple:
    return tuple(v.strip() for v in raw.split(",") if v.strip())


def parse_config(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from INI text.

    Raises :class:`ConfigError` for malformed input and
    :class:`InfeasibleScenario` when no valid caching action exists.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keys like C, K, L are case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(cp.sections()) - {"env", "agent", "schedule", "output", "sweep", "compare"}
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    if "env" not in cp:
        raise ConfigError("missing [env] section")
    env = cp["env"]
    for key in ("p", "C", "K", "d", "L"):
        if key not in env:
            raise ConfigError(f"[env] {key} is required")

    try:
        params = SystemParams(
            p=_get(env, "p", int, None), C=_get(env, "C", int, None),
            K=_get(env, "K", int, None), d=_get(env, "d", int, None),
            L=_get(env, "L", int, None), B=_get(env, "B", float, 1.0),
            M=_get(env, "M", int, 100))
    except EmptyActionSpace as exc:
        raise InfeasibleScenario(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    action_dep = _get(env, "action_dependent", _opt_bool, None)
    if action_dep is None:
        action_dep = count_actions(params) <= DEFAULT_SIZE_CAP
    try:
        env_cfg = EnvConfig(
            params=params,
            skewness=_get(env, "skewness", _floats, (1.36, 2.3)),
            transition_seed=_get(env, "transition_seed", int, 0),
            request_mode=RequestMode(_get(env, "request_mode", str, "zipf_multinomial")),
            snm=SnmParams(_get(env, "snm_bursts", int, 3), _get(env, "snm_lifespan", float, 20.0),
                          _get(env, "snm_boost", float, 5.0)),
            permute_ranks=_get(env, "permute_ranks", _bool, False),
            white_box=_get(env, "white_box", _bool, True),
            action_dependent=action_dep,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    ag = cp["agent"] if "agent" in cp else None
    agent = AgentSpec(
        name=_get(ag, "name", str, "qlearning"),
        discipline=_get(ag, "discipline", str, "mds"),
        cooperative=_get(ag, "cooperative", _bool, True),
        gamma=_get(ag, "gamma", float, 0.9),
        lam=_get(ag, "lambda", float, 0.6),
        lambda_decay=_get(ag, "lambda_decay", float, 0.0),
        delta=_get(ag, "delta", float, 0.01),
        omega1=_get(ag, "omega1", float, 1.0),
        omega2=_get(ag, "omega2", float, 0.01),
    )

    sc = cp["schedule"] if "schedule" in cp else None
    switch = _get(sc, "switch_slot", int, default_switch_slot(params.K))
    out = cp["output"] if "output" in cp else None
    path = _get(out, "path", str, "results")
    if base_dir is not None and not Path(path).is_absolute():
        path = str(Path(base_dir) / path)
    sw = cp["sweep"] if "sweep" in cp else None
    cmp_ = cp["compare"] if "compare" in cp else None
    return ExperimentConfig(
        env=env_cfg,
        agent=agent,
        horizon=_get(sc, "horizon", int, switch + 100_000),
        switch_slot=switch,
        epsilon=_get(sc, "epsilon", float, 0.1),
        seeds=_get(sc, "seeds", _ints, (0,)),
        output_path=path,
        metrics_window=_get(out, "metrics_window", int, 0),
        record_every=_get(out, "record_every", int, 1),
        similarity=_get(out, "similarity", _opt_bool, None),
        sweep_K=_get(sw, "K", _ints, ()),
        sweep_agents=_get(sw, "agents", _names, ()),
        compare_agents=_get(cmp_, "agents", _names, ()),
        qtable_cap=_get(ag, "qtable_cap", int, 20_000_000),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)


def dump_config(config: ExperimentConfig) -> str:
    """Resolved configuration in the same INI layout (used for run manifests)."""
    p, e, a = config.params, config.env, config.agent
    lines = [
        "[env]",
        f"p = {p.p}", f"C = {p.C}", f"K = {p.K}", f"d = {p.d}", f"L = {p.L}",
        f"B = {p.B!r}", f"M = {p.M}",
        "skewness = " + ", ".join(repr(s) for s in e.skewness),
        f"transition_seed = {e.transition_seed}",
        f"request_mode = {e.request_mode.value}",
        f"permute_ranks = {str(e.permute_ranks).lower()}",
        f"white_box = {str(e.white_box).lower()}",
        f"action_dependent = {str(e.action_dependent).lower()}",
        f"snm_bursts = {e.snm.n_bursts}", f"snm_lifespan = {e.snm.mean_lifespan!r}",
        f"snm_boost = {e.snm.boost!r}",
        "", "[agent]",
        f"name = {a.name}", f"discipline = {a.discipline}",
        f"cooperative = {str(a.cooperative).lower()}",
        f"gamma = {a.gamma!r}", f"lambda = {a.lam!r}", f"lambda_decay = {a.lambda_decay!r}",
        f"delta = {a.delta!r}", f"omega1 = {a.omega1!r}", f"omega2 = {a.omega2!r}",
        f"qtable_cap = {config.qtable_cap}",
        "", "[schedule]",
        f"horizon = {config.horizon}", f"switch_slot = {config.switch_slot}",
        f"epsilon = {config.epsilon!r}",
        "seeds = " + ", ".join(str(s) for s in config.seeds),
        "", "[output]",
        f"path = {config.output_path}", f"metrics_window = {config.metrics_window}",
        f"record_every = {config.record_every}",
        "similarity = " + ("auto" if config.similarity is None else str(config.similarity).lower()),
    ]
    if config.sweep_K or config.sweep_agents:
        lines += ["", "[sweep]", "K = " + ", ".join(map(str, config.sweep_K)),
                  "agents = " + ", ".join(config.sweep_agents)]
    if config.compare_agents:
        lines += ["", "[compare]", "agents = " + ", ".join(config.compare_agents)]
    return "\n".join(lines) + "\n"
