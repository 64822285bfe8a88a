"""Seeded experiment runs, sweeps over the cache size and policy comparison."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .. import __version__
from ..actions import DEFAULT_SIZE_CAP, ActionSpace, ActionSpaceTooLarge, count_actions
from ..agents import (LearningSchedule, MpccAgent, OracleAgent, QLearningAgent, VfaAgent,
                      VfaParams, value_iteration)
from ..core import CachingAction, EmptyActionSpace
from ..env import CachingEnv, ModelHiddenError, RequestMode
from ..serving import SlotTraffic, direct_ratio
from .config import (AgentSpec, ExperimentConfig, default_switch_slot,
                     dump_config, parse_agent_label)

__all__ = [
    "MetricRow",
    "RunResult",
    "METRIC_FIELDS",
    "cosine_similarity",
    "agent_params",
    "make_agent",
    "solve_oracle",
    "run_seed",
    "run",
    "sweep",
    "summarize_sweep",
    "compare_policies",
    "write_metrics",
    "compare",
]

METRIC_FIELDS = ("slot", "rho", "cumulative_reward", "cosine_similarity", "epsilon")
AGENT_STREAM = 0xA6E7  # second entropy word of the agent's rng stream
SIMILARITY_AUTO_LIMIT = 2_000_000  # |X|·|A| above which value iteration is skipped by default


@dataclass(frozen=True)
class MetricRow:
    slot: int
    rho: float
    cumulative_reward: float
    cosine_similarity: Optional[float]
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho out of range: {self.rho}")


@dataclass
class RunResult:
    """Everything one (agent, seed) run produced.

    ``traffic`` holds every slot's accounting; ``states`` the visited
    ``(candidate, previous action)`` pairs and ``greedy`` the agent's greedy
    action there (recorded only when similarity tracking is on).
    """

    label: str
    seed: int
    rows: List[MetricRow]
    traffic: List[SlotTraffic]
    rewards: np.ndarray
    epsilons: np.ndarray
    converged_window: int
    agent: object = None
    states: list = field(default_factory=list)
    greedy: list = field(default_factory=list)
    oracle_policy: Optional[np.ndarray] = None
    space: Optional[ActionSpace] = None

    @property
    def converged_rho(self) -> float:
        return direct_ratio(self.traffic[-self.converged_window:])


def cosine_similarity(a: CachingAction, a_opt: CachingAction, L: int = 1) -> float:
    """Cosine of the angle between two caching decisions' fraction vectors."""
    x = np.asarray(a.levels, dtype=float) / L
    y = np.asarray(a_opt.levels, dtype=float) / L
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ValueError("cosine similarity of a zero vector")
    return float(x @ y / (nx * ny))


def agent_params(config: ExperimentConfig, spec: AgentSpec):
    """System parameters the agent acts in; non-cooperative means d = 1, whole contents."""
    if spec.cooperative:
        return config.params
    return replace(config.params, d=1, full_content=True)


def _qtable_fits(config: ExperimentConfig, params) -> bool:
    n = count_actions(params)
    return (n <= DEFAULT_SIZE_CAP
            and config.env.n_candidates * n * n <= config.qtable_cap)


def _resolve_name(config: ExperimentConfig, spec: AgentSpec, params) -> str:
    if spec.name != "rl":
        return spec.name
    tabular = config.env.white_box and _qtable_fits(config, params)
    return "qlearning" if tabular else "vfa"


def _tabular_space(config: ExperimentConfig, params, who: str) -> ActionSpace:
    space = ActionSpace(params)
    if config.env.n_candidates * len(space) ** 2 > config.qtable_cap:
        raise ActionSpaceTooLarge(
            f"{who}: Q-table with {config.env.n_candidates * len(space) ** 2} entries exceeds "
            f"the cap {config.qtable_cap}; use the value-function-approximation agent (vfa)")
    return space


def solve_oracle(env: CachingEnv, space: ActionSpace, gamma: float):
    """Optimal policy of the environment's exact model by value iteration."""
    V, policy = value_iteration(env.exact_model(space), gamma)
    return policy


def make_agent(config: ExperimentConfig, spec: AgentSpec, env: CachingEnv):
    """Instantiate the agent ``spec`` describes for ``env``.

    Raises
    ------
    ActionSpaceTooLarge
        A tabular agent was asked for on a space that cannot be enumerated.
    ModelHiddenError
        The oracle was asked for without a white-box model.
    """
    params = env.params
    name = _resolve_name(config, spec, params)
    if name == "value_iteration":
        space = _tabular_space(config, params, "value_iteration")
        return OracleAgent(solve_oracle(env, space, spec.gamma), space)
    if name == "qlearning":
        space = _tabular_space(config, params, "qlearning")
        schedule = LearningSchedule(config.epsilon, config.switch_slot, spec.lam, spec.gamma)
        return QLearningAgent(space, env.n_candidates, schedule, spec.lambda_decay)
    if name == "vfa":
        vp = VfaParams(C=params.C, omega1=spec.omega1, omega2=spec.omega2,
                       delta=spec.delta, gamma=spec.gamma)
        return VfaAgent(params, vp, epsilon=config.epsilon)
    if name == "mpcc":
        return MpccAgent(params)
    raise ValueError(f"unknown agent {name!r}")


def _similarity_wanted(config: ExperimentConfig, env: CachingEnv) -> bool:
    if config.similarity is False:
        return False
    available = (config.env.white_box and config.env.request_mode is not RequestMode.SNM)
    if config.similarity is True:
        if not available:
            raise ModelHiddenError("cosine similarity needs a white-box oracle")
        return True
    if not available:
        return False
    n = count_actions(env.params)
    return n <= DEFAULT_SIZE_CAP and env.n_candidates * n * n <= SIMILARITY_AUTO_LIMIT


def _trailing_rho(direct: np.ndarray, total: np.ndarray, window: int) -> np.ndarray:
    cd = np.concatenate([[0.0], np.cumsum(direct)])
    ct = np.concatenate([[0.0], np.cumsum(total)])
    hi = np.arange(1, len(direct) + 1)
    lo = np.maximum(hi - window, 0)
    num, den = cd[hi] - cd[lo], ct[hi] - ct[lo]
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return np.clip(rho, 0.0, 1.0)


def run_seed(config: ExperimentConfig, seed: int, spec: Optional[AgentSpec] = None,
             track_greedy: Optional[bool] = None) -> RunResult:
    """Run one agent for ``config.horizon`` slots on the environment seeded by ``seed``.

    The environment draws from ``default_rng(seed)`` and the agent from
    ``default_rng([seed, AGENT_STREAM])``, so two agents on the same seed see
    the same popularity chain until their actions diverge.
    """
    spec = spec or config.agent
    params = agent_params(config, spec)
    env = CachingEnv(config.env.with_params(params), discipline=spec.discipline)
    agent = make_agent(config, spec, env)
    rng = np.random.default_rng([seed, AGENT_STREAM])

    oracle_policy, oracle_space = None, None
    if track_greedy is None:
        track_greedy = _similarity_wanted(config, env)
    if track_greedy:
        oracle_space = getattr(agent, "space", None) or _tabular_space(config, params, "oracle")
        if isinstance(agent, OracleAgent):
            oracle_policy = agent.policy
        else:
            oracle_policy = solve_oracle(env, oracle_space, spec.gamma)

    H = config.horizon
    traffic: List[SlotTraffic] = []
    rewards = np.empty(H)
    epsilons = np.empty(H)
    states, greedy = [], []
    obs = env.reset(seed)
    for t in range(H):
        if hasattr(agent, "schedule"):
            agent.epsilon = agent.schedule.epsilon_at(t)
        elif isinstance(agent, VfaAgent):
            agent.epsilon = config.epsilon if t < config.switch_slot else 0.0
        if track_greedy:
            states.append((obs.candidate_index, obs.prev_action))
            greedy.append(agent.greedy(obs))
        epsilons[t] = agent.epsilon
        action = agent.select(obs, rng)
        next_obs, reward = env.step(action)
        agent.update(obs, action, reward, next_obs)
        traffic.append(env.last_traffic)
        rewards[t] = reward
        obs = next_obs

    window = max(1, (H - config.switch_slot) // 5)
    result = RunResult(label=spec.label, seed=seed, rows=[], traffic=traffic, rewards=rewards,
                       epsilons=epsilons, converged_window=window, agent=agent, states=states,
                       greedy=greedy, oracle_policy=oracle_policy, space=oracle_space)
    similarity = compare_policies(result, oracle_policy) if track_greedy else None
    result.rows = _metric_rows(config, result, similarity)
    return result


def _metric_rows(config: ExperimentConfig, result: RunResult, similarity) -> List[MetricRow]:
    direct = np.array([h.sbs_direct for h in result.traffic])
    total = np.array([h.total for h in result.traffic])
    rho = _trailing_rho(direct, total, config.window)
    cum = np.cumsum(result.rewards)
    H = len(result.traffic)
    slots = list(range(0, H, config.record_every))
    if slots[-1] != H - 1:
        slots.append(H - 1)
    rows = []
    for t in slots:
        sim = None if similarity is None or similarity[t] is None else float(similarity[t])
        rows.append(MetricRow(t, float(rho[t]), float(cum[t]), sim, float(result.epsilons[t])))
    return rows


def compare_policies(run_output: RunResult, oracle_policy) -> list:
    """Per-slot cosine between the greedy action at the visited state and ``pi*``.

    Slots whose state lies outside the oracle's action space (e.g. a
    non-cooperative agent's whole-content placements) give ``None``.
    """
    if oracle_policy is None:
        raise ModelHiddenError("no oracle policy available for comparison")
    if not run_output.greedy:
        raise ValueError("run was executed without greedy-action tracking")
    space = run_output.space
    n = len(space)
    L = space.params.L
    out = []
    for (candidate, prev), a in zip(run_output.states, run_output.greedy):
        if candidate is None or prev not in space:
            out.append(None)
            continue
        best = space[int(oracle_policy[candidate * n + space.index(prev)])]
        out.append(cosine_similarity(a, best, L))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics(rows: Sequence[MetricRow], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_FIELDS)
    for r in rows:
        w.writerow([_fmt(getattr(r, f)) for f in METRIC_FIELDS])
    Path(path).write_text(buf.getvalue())


def _write_manifest(config: ExperimentConfig, out: Path, files: Sequence[str], extra=()) -> None:
    lines = [f"coopcache {__version__}", "files:"] + [f"  {f}" for f in files]
    lines += list(extra)
    lines += ["resolved config:", dump_config(config)]
    (out / "manifest.txt").write_text("\n".join(lines))


def run(config: ExperimentConfig, out_dir=None, agents: Optional[Sequence[str]] = None,
        log=None) -> List[RunResult]:
    """Run every (agent, seed) pair and write one CSV per pair plus a manifest."""
    specs = [parse_agent_label(a, config.agent) for a in agents] if agents else [config.agent]
    out = Path(out_dir or config.output_path)
    out.mkdir(parents=True, exist_ok=True)
    results, files = [], []
    for spec in specs:
        for seed in config.seeds:
            res = run_seed(config, seed, spec)
            name = f"{spec.label}_seed{seed}.csv"
            write_metrics(res.rows, out / name)
            files.append(name)
            results.append(res)
            if log:
                log(f"{spec.label} seed {seed}: converged rho {res.converged_rho:.4f}")
    _write_manifest(config, out, files)
    return results


SWEEP_FIELDS = ("agent", "K", "seed", "rho", "note")
SUMMARY_FIELDS = ("agent", "K", "n", "mean", "std")


def _config_for_K(base: ExperimentConfig, K: int, auto_schedule: bool) -> ExperimentConfig:
    cfg = base.with_K(K)
    if auto_schedule:
        switch = default_switch_slot(K)
        cfg = replace(cfg, switch_slot=switch,
                      horizon=switch + (base.horizon - base.switch_slot))
    return cfg


def sweep(base: ExperimentConfig, K_values: Sequence[int], agents: Sequence[str],
          out_dir=None, auto_schedule: bool = False, log=None) -> list:
    """Converged rho for every (agent, K, seed); infeasible K yields a warning row.

    Returns a list of dicts with keys ``SWEEP_FIELDS``. With ``out_dir`` the
    long table goes to ``sweep.csv`` and the per-(agent, K) mean and standard
    deviation to ``sweep_summary.csv``.
    """
    rows = []
    for K in K_values:
        try:
            cfg = _config_for_K(base, K, auto_schedule)
        except EmptyActionSpace as exc:
            warnings.warn(f"K={K} skipped: {exc}")
            rows.append(dict(agent="*", K=K, seed="", rho=None, note=f"infeasible: {exc}"))
            continue
        for label in agents:
            spec = parse_agent_label(label, cfg.agent)
            for seed in cfg.seeds:
                try:
                    res = run_seed(cfg, seed, spec, track_greedy=False)
                except EmptyActionSpace as exc:
                    rows.append(dict(agent=label, K=K, seed=seed, rho=None,
                                     note=f"infeasible: {exc}"))
                    continue
                rows.append(dict(agent=label, K=K, seed=seed, rho=res.converged_rho,
                                 note=_resolve_name(cfg, spec, agent_params(cfg, spec))))
                if log:
                    log(f"K={K} {label} seed {seed}: rho {res.converged_rho:.4f}")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_table(rows, SWEEP_FIELDS, out / "sweep.csv")
        _write_table(summarize_sweep(rows), SUMMARY_FIELDS, out / "sweep_summary.csv")
        _write_manifest(base, out, ["sweep.csv", "sweep_summary.csv"],
                        ["K values: " + ", ".join(map(str, K_values)),
                         "agents: " + ", ".join(agents)])
    return rows


def summarize_sweep(rows) -> list:
    groups: dict = {}
    for r in rows:
        if r["rho"] is not None:
            groups.setdefault((r["agent"], r["K"]), []).append(r["rho"])
    out = []
    for (agent, K), vals in groups.items():
        v = np.array(vals)
        out.append(dict(agent=agent, K=K, n=len(v), mean=float(v.mean()),
                        std=float(v.std(ddof=1)) if len(v) > 1 else 0.0))
    return out


def _write_table(rows, fields, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r[f]) for f in fields])
    Path(path).write_text(buf.getvalue())


def compare(config: ExperimentConfig, agents: Sequence[str], out_dir=None, log=None) -> list:
    """Run each agent with similarity tracking; long-format trace per (agent, seed, slot)."""
    config = replace(config, similarity=True)
    rows = []
    for label in agents:
        spec = parse_agent_label(label, config.agent)
        for seed in config.seeds:
            res = run_seed(config, seed, spec, track_greedy=True)
            for r in res.rows:
                rows.append(dict(agent=label, seed=seed, slot=r.slot, rho=r.rho,
                                 cosine_similarity=r.cosine_similarity))
            if log:
                sims = [r.cosine_similarity for r in res.rows[-res.converged_window:]
                        if r.cosine_similarity is not None]
                mean = float(np.mean(sims)) if sims else math.nan
                log(f"{label} seed {seed}: converged rho {res.converged_rho:.4f}, "
                    f"final similarity {mean:.4f}")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_table(rows, ("agent", "seed", "slot", "rho", "cosine_similarity"),
                     out / "compare.csv")
        _write_manifest(config, out, ["compare.csv"], ["agents: " + ", ".join(agents)])
    return rows
