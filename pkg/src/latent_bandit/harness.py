"""Experiment configuration, sweep execution, metrics, and result files.

A sweep is a grid of cells (the default setting plus one-at-a-time parameter
variations), each holding freshly sampled problem instances.  Every
(cell, instance, run, algorithm) combination is an independent episode whose
seed is derived from the root seed and those four identifiers, so any single
episode can be replayed in isolation and results are identical no matter how
many workers execute them.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (
    UCB1,
    DiscountedUCB,
    Exp3,
    Exp3S,
    GaussianTS,
    OptimalSingleArmPolicy,
    SlidingWindowUCB,
)
from .env import Instance, make_environment, make_instance, stationary_distribution
from .latent import LCTS, LCUCB, AdaRPUCB, AdaSPUCB, GateConfig, RPUCB, SPUCB
from .rng import substream, substream_seed

WORKERS_ENV_VAR = "LATENT_BANDIT_WORKERS"


class ConfigError(ValueError):
    """Invalid sweep configuration."""


class IncompleteCellError(ValueError):
    """A per-cell metric was requested with episodes missing."""


# ---------------------------------------------------------------------------
# Algorithm registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpisodeContext:
    num_arms: int
    horizon: int
    sigma: float
    rng: np.random.Generator
    instance: Instance


def _take(params: dict, defaults: dict, algorithm: str) -> dict:
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"{algorithm}: unknown parameter(s) {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(params)
    return merged


def _require_two_arms(ctx: EpisodeContext, algorithm: str):
    if ctx.num_arms != 2:
        raise ConfigError(f"{algorithm} requires exactly 2 arms, got {ctx.num_arms}")


def _gate_config(p: dict, sigma: float) -> GateConfig:
    sigma0 = p["sigma0"] if p["sigma0"] is not None else max(sigma, 0.05)
    return GateConfig(
        z_thresh=p["z_thresh"],
        sigma0=sigma0,
        m_thresh=p["m_thresh"],
        lambda_h=p["lambda_h"],
        delta_h=p["delta_h"],
        tau_min=p["tau_min"],
    )


_GATE_DEFAULTS = {
    "alpha": 1.0,
    "reg": 1.0,
    "z_thresh": 2.0,
    "sigma0": None,
    "m_thresh": 0.05,
    "lambda_h": 0.1,
    "delta_h": 0.5,
    "tau_min": 5,
}


def _build_ucb1(params, ctx):
    _take(params, {}, "UCB1")
    return UCB1(ctx.num_arms)


def _build_ts(params, ctx):
    p = _take(params, {"mu0": 0.5, "kappa0": 1.0, "a0": 1.0, "b0": 0.01}, "TS")
    return GaussianTS(ctx.num_arms, ctx.rng, **p)


def _build_exp3(params, ctx):
    p = _take(params, {"gamma": 0.1}, "EXP3")
    return Exp3(ctx.num_arms, p["gamma"], ctx.rng)


def _build_exp3s(params, ctx):
    p = _take(params, {"gamma": 0.1, "alpha_s": None}, "EXP3-S")
    alpha_s = p["alpha_s"] if p["alpha_s"] is not None else 1.0 / ctx.horizon
    return Exp3S(ctx.num_arms, p["gamma"], alpha_s, ctx.rng)


def _build_swucb(params, ctx):
    p = _take(params, {"window": 200}, "SW-UCB")
    return SlidingWindowUCB(ctx.num_arms, p["window"])


def _build_ducb(params, ctx):
    p = _take(params, {"discount": 0.99}, "D-UCB")
    return DiscountedUCB(ctx.num_arms, p["discount"])


def _build_lcucb(params, ctx):
    p = _take(params, {"alpha": 1.0, "reg": 1.0}, "LC-UCB")
    return LCUCB(ctx.num_arms, **p)


def _build_lcts(params, ctx):
    p = _take(params, {"noise_scale": 1.0, "reg": 1.0}, "LC-TS")
    return LCTS(ctx.num_arms, ctx.rng, **p)


def _build_spucb(params, ctx):
    _require_two_arms(ctx, "SP-UCB")
    p = _take(params, {"tau": 10, "alpha": 1.0, "reg": 1.0}, "SP-UCB")
    return SPUCB(**p)


def _build_rpucb(params, ctx):
    _require_two_arms(ctx, "RP-UCB")
    p = _take(params, {"tau": 10, "alpha": 1.0, "reg": 1.0}, "RP-UCB")
    return RPUCB(**p)


def _build_adasp(params, ctx):
    _require_two_arms(ctx, "AdaSP-UCB")
    p = _take(params, _GATE_DEFAULTS, "AdaSP-UCB")
    return AdaSPUCB(gates=_gate_config(p, ctx.sigma), alpha=p["alpha"], reg=p["reg"])


def _build_adarp(params, ctx):
    _require_two_arms(ctx, "AdaRP-UCB")
    p = _take(params, _GATE_DEFAULTS, "AdaRP-UCB")
    return AdaRPUCB(gates=_gate_config(p, ctx.sigma), alpha=p["alpha"], reg=p["reg"])


def _build_opt_single(params, ctx):
    _take(params, {}, "OptSingleArm")
    pi = stationary_distribution(ctx.instance.transition_matrix())
    return OptimalSingleArmPolicy(ctx.instance.rewards, pi)


# mode: "single" policies observe (arm, reward); "latent" policies observe
# (reward); "dual" policies pick and observe pairs; the state oracle needs no
# policy object at all.
ALGORITHMS: dict[str, tuple[str, object]] = {
    "UCB1": ("single", _build_ucb1),
    "TS": ("single", _build_ts),
    "EXP3": ("single", _build_exp3),
    "EXP3-S": ("single", _build_exp3s),
    "SW-UCB": ("single", _build_swucb),
    "D-UCB": ("single", _build_ducb),
    "LC-UCB": ("latent", _build_lcucb),
    "LC-TS": ("latent", _build_lcts),
    "SP-UCB": ("latent", _build_spucb),
    "AdaSP-UCB": ("latent", _build_adasp),
    "RP-UCB": ("dual", _build_rpucb),
    "AdaRP-UCB": ("dual", _build_adarp),
    "OptSingleArm": ("single", _build_opt_single),
    "StateOracle": ("oracle_state", None),
}

ORACLE_IDS = ("OptSingleArm", "StateOracle")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlgorithmSpec:
    id: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.id not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm id {self.id!r}")
        if not self.label:
            object.__setattr__(self, "label", self.id)


@dataclass(frozen=True)
class SweepConfig:
    state_counts: tuple = (2, 10, 20, 50)
    stay_probs: tuple = (0.5, 0.8, 0.9, 0.95, 0.99)
    noise_sds: tuple = (0.01, 0.05, 0.1, 0.5)
    horizons: tuple = (500, 1000, 5000, 20000)
    default_states: int = 10
    default_stay: float = 0.99
    default_sigma: float = 0.01
    default_horizon: int = 20000
    num_instances: int = 128
    runs_per_instance: int = 5
    num_arms: int = 2
    algorithms: tuple = ()
    root_seed: int = 20260810
    smoothing_window: int = 50
    dual_regret: str = "mean"
    dual_noise: str = "double"

    def __post_init__(self):
        for name in ("state_counts", "stay_probs", "noise_sds", "horizons"):
            values = getattr(self, name)
            if len(values) == 0:
                raise ConfigError(f"{name} must be nonempty")
        if self.num_instances < 1 or self.runs_per_instance < 1:
            raise ConfigError("instance and run counts must be >= 1")
        if self.num_arms < 2:
            raise ConfigError("num_arms must be >= 2")
        if self.smoothing_window < 1:
            raise ConfigError("smoothing_window must be >= 1")
        if self.dual_regret not in ("mean", "sum"):
            raise ConfigError("dual_regret must be 'mean' or 'sum'")
        if self.dual_noise not in ("double", "split"):
            raise ConfigError("dual_noise must be 'double' or 'split'")
        labels = [spec.label for spec in self.algorithms]
        if len(labels) != len(set(labels)):
            raise ConfigError("algorithm labels must be unique")


_CONFIG_FIELDS = {
    "state_counts", "stay_probs", "noise_sds", "horizons",
    "default_states", "default_stay", "default_sigma", "default_horizon",
    "num_instances", "runs_per_instance", "num_arms", "algorithms",
    "root_seed", "smoothing_window", "dual_regret", "dual_noise",
}

PRESETS = {
    "desk": {"num_instances": 32, "runs_per_instance": 3, "default_horizon": 5000},
    "paper": {"num_instances": 128, "runs_per_instance": 5, "default_horizon": 20000},
}


def _parse_algorithms(raw, add_oracles: bool) -> tuple:
    specs = []
    for entry in raw:
        if isinstance(entry, str):
            specs.append(AlgorithmSpec(entry))
        elif isinstance(entry, dict):
            unknown = set(entry) - {"id", "params", "label"}
            if unknown:
                raise ConfigError(f"algorithm entry has unknown key(s) {sorted(unknown)}")
            if "id" not in entry:
                raise ConfigError("algorithm entry missing 'id'")
            specs.append(AlgorithmSpec(entry["id"], dict(entry.get("params", {})),
                                       entry.get("label", "")))
        else:
            raise ConfigError("algorithm entries must be strings or objects")
    if add_oracles:
        present = {s.id for s in specs}
        for oracle in ORACLE_IDS:
            if oracle not in present:
                specs.append(AlgorithmSpec(oracle))
    return tuple(specs)


def config_from_dict(data: dict, preset: str | None = None, add_oracles: bool = True) -> SweepConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config field(s) {sorted(unknown)}")
    merged = dict(data)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        merged.update(PRESETS[preset])
        merged["horizons"] = [merged.get("default_horizon")]
    kwargs: dict = {}
    for name in ("state_counts", "stay_probs", "noise_sds", "horizons"):
        if name in merged:
            kwargs[name] = tuple(merged[name])
    for name in _CONFIG_FIELDS - {"state_counts", "stay_probs", "noise_sds", "horizons", "algorithms"}:
        if name in merged:
            kwargs[name] = merged[name]
    raw_algorithms = merged.get("algorithms", [aid for aid in ALGORITHMS])
    kwargs["algorithms"] = _parse_algorithms(raw_algorithms, add_oracles)
    try:
        return SweepConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_to_dict(config: SweepConfig) -> dict:
    return {
        "state_counts": list(config.state_counts),
        "stay_probs": list(config.stay_probs),
        "noise_sds": list(config.noise_sds),
        "horizons": list(config.horizons),
        "default_states": config.default_states,
        "default_stay": config.default_stay,
        "default_sigma": config.default_sigma,
        "default_horizon": config.default_horizon,
        "num_instances": config.num_instances,
        "runs_per_instance": config.runs_per_instance,
        "num_arms": config.num_arms,
        "algorithms": [
            {"id": s.id, "params": s.params, "label": s.label} for s in config.algorithms
        ],
        "root_seed": config.root_seed,
        "smoothing_window": config.smoothing_window,
        "dual_regret": config.dual_regret,
        "dual_noise": config.dual_noise,
    }


# ---------------------------------------------------------------------------
# Cells and episode enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    index: int
    param: str
    value: str
    num_states: int
    p_stay: float
    sigma: float
    horizon: int

    @property
    def label(self) -> str:
        return f"{self.param}={self.value}" if self.value else self.param


def build_cells(config: SweepConfig) -> list[Cell]:
    cells = [Cell(0, "Default", "", config.default_states, config.default_stay,
                  config.default_sigma, config.default_horizon)]

    def add(param, value_str, **overrides):
        base = {
            "num_states": config.default_states,
            "p_stay": config.default_stay,
            "sigma": config.default_sigma,
            "horizon": config.default_horizon,
        }
        base.update(overrides)
        cells.append(Cell(len(cells), param, value_str, **base))

    for s in config.state_counts:
        if s != config.default_states:
            add("Number of States", str(s), num_states=int(s))
    for p in config.stay_probs:
        if p != config.default_stay:
            add("Self-transition Prob.", str(p), p_stay=float(p))
    for sd in config.noise_sds:
        if sd != config.default_sigma:
            add("Reward Noise SD.", str(sd), sigma=float(sd))
    for t in config.horizons:
        if t != config.default_horizon:
            add("Number of Rounds", str(t), horizon=int(t))
    return cells


def instance_seed_for(config: SweepConfig, cell_index: int, instance_index: int) -> int:
    return substream_seed(config.root_seed, "instance", cell_index, instance_index)


def run_seed_for(config: SweepConfig, cell_index: int, instance_index: int,
                 run_index: int, label: str) -> int:
    return substream_seed(config.root_seed, "episode", cell_index, instance_index,
                          run_index, label)


def episode_id(cell_index: int, instance_index: int, run_index: int, label: str) -> str:
    return f"{cell_index}:{instance_index}:{run_index}:{label}"


def parse_episode_id(eid: str) -> tuple[int, int, int, str]:
    parts = eid.split(":", 3)
    if len(parts) != 4:
        raise ConfigError(f"bad episode id {eid!r}; expected cell:instance:run:algorithm")
    try:
        return int(parts[0]), int(parts[1]), int(parts[2]), parts[3]
    except ValueError:
        raise ConfigError(f"bad episode id {eid!r}") from None


def iter_tasks(config: SweepConfig, cells: list[Cell], keep_traces: bool = False):
    for cell in cells:
        for i in range(config.num_instances):
            inst_seed = instance_seed_for(config, cell.index, i)
            for r in range(config.runs_per_instance):
                for spec in config.algorithms:
                    yield {
                        "algorithm_id": spec.id,
                        "label": spec.label,
                        "params": spec.params,
                        "cell_index": cell.index,
                        "instance_index": i,
                        "run_index": r,
                        "num_states": cell.num_states,
                        "num_arms": config.num_arms,
                        "p_stay": cell.p_stay,
                        "sigma": cell.sigma,
                        "horizon": cell.horizon,
                        "instance_seed": inst_seed,
                        "run_seed": run_seed_for(config, cell.index, i, r, spec.label),
                        "dual_regret": config.dual_regret,
                        "dual_noise": config.dual_noise,
                        "keep_trace": keep_traces,
                    }


# ---------------------------------------------------------------------------
# Episode execution
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    """Full per-round trace of one episode."""

    algorithm: str
    cell_index: int
    instance_index: int
    run_index: int
    instance_seed: int
    run_seed: int
    params: dict
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    regrets: np.ndarray
    probes: np.ndarray
    actions_c: np.ndarray | None = None
    actions_t: np.ndarray | None = None
    rewards_c: np.ndarray | None = None
    rewards_t: np.ndarray | None = None

    @property
    def cum_regret(self) -> float:
        return float(self.regrets.sum())

    def to_dict(self) -> dict:
        d = {
            "algorithm": self.algorithm,
            "cell_index": self.cell_index,
            "instance_index": self.instance_index,
            "run_index": self.run_index,
            "instance_seed": self.instance_seed,
            "run_seed": self.run_seed,
            "params": self.params,
            "states": self.states.tolist(),
            "actions": self.actions.tolist(),
            "rewards": self.rewards.tolist(),
            "regrets": self.regrets.tolist(),
            "probes": self.probes.astype(int).tolist(),
        }
        for name in ("actions_c", "actions_t", "rewards_c", "rewards_t"):
            value = getattr(self, name)
            if value is not None:
                d[name] = value.tolist()
        return d


def records_equal(a: RunRecord, b: RunRecord) -> bool:
    def same(x, y):
        if x is None or y is None:
            return x is None and y is None
        return np.array_equal(x, y)

    return (
        a.algorithm == b.algorithm
        and a.cell_index == b.cell_index
        and a.instance_index == b.instance_index
        and a.run_index == b.run_index
        and a.instance_seed == b.instance_seed
        and a.run_seed == b.run_seed
        and all(
            same(getattr(a, name), getattr(b, name))
            for name in ("states", "actions", "rewards", "regrets", "probes",
                         "actions_c", "actions_t", "rewards_c", "rewards_t")
        )
    )


def run_episode(
    algorithm_id: str,
    params: dict,
    instance: Instance,
    horizon: int,
    run_seed: int,
    dual_regret: str = "mean",
    dual_noise: str = "double",
    cell_index: int = 0,
    instance_index: int = 0,
    run_index: int = 0,
    label: str | None = None,
) -> RunRecord:
    if algorithm_id not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm id {algorithm_id!r}")
    mode, builder = ALGORITHMS[algorithm_id]
    env = make_environment(
        instance,
        substream_seed(run_seed, "env"),
        dual_noise_factor=2.0 if dual_noise == "double" else 1.0,
    )
    ctx = EpisodeContext(
        num_arms=instance.num_arms,
        horizon=horizon,
        sigma=instance.sigma,
        rng=substream(run_seed, "policy"),
        instance=instance,
    )
    policy = builder(dict(params), ctx) if builder is not None else None

    states = np.empty(horizon, dtype=np.int64)
    actions = np.empty(horizon, dtype=np.int64)
    rewards = np.empty(horizon)
    regrets = np.empty(horizon)
    probes = np.zeros(horizon, dtype=bool)
    actions_c = actions_t = rewards_c = rewards_t = None

    if mode == "oracle_state":
        for t in range(1, horizon + 1):
            arm = instance.rewards.optimal_arm(env.current_state)
            out = env.step_single(arm)
            i = t - 1
            states[i], actions[i] = out.true_state, arm
            rewards[i], regrets[i] = out.reward, out.gap_of_played
    elif mode == "single":
        for t in range(1, horizon + 1):
            arm = policy.select(t)
            out = env.step_single(arm)
            policy.observe(arm, out.reward)
            i = t - 1
            states[i], actions[i] = out.true_state, arm
            rewards[i], regrets[i] = out.reward, out.gap_of_played
    elif mode == "latent":
        for t in range(1, horizon + 1):
            arm = policy.select(t)
            out = env.step_single(arm)
            policy.observe(out.reward)
            i = t - 1
            states[i], actions[i] = out.true_state, arm
            rewards[i], regrets[i] = out.reward, out.gap_of_played
            probes[i] = policy.last_mode == "probe"
    elif mode == "dual":
        actions_c = np.empty(horizon, dtype=np.int64)
        actions_t = np.empty(horizon, dtype=np.int64)
        rewards_c = np.empty(horizon)
        rewards_t = np.empty(horizon)
        half = 0.5 if dual_regret == "mean" else 1.0
        for t in range(1, horizon + 1):
            arm_c, arm_t = policy.select(t)
            out = env.step_dual(arm_c, arm_t)
            policy.observe(out.reward_c, out.reward_t)
            i = t - 1
            states[i] = out.true_state
            actions_c[i], actions_t[i] = arm_c, arm_t
            rewards_c[i], rewards_t[i] = out.reward_c, out.reward_t
            actions[i] = policy.last_recorded_action
            rewards[i] = policy.last_recorded_reward
            regrets[i] = half * (out.gap_c + out.gap_t)
            probes[i] = policy.last_mode == "probe"
    else:  # pragma: no cover
        raise AssertionError(f"unhandled mode {mode}")

    return RunRecord(
        algorithm=label if label is not None else algorithm_id,
        cell_index=cell_index,
        instance_index=instance_index,
        run_index=run_index,
        instance_seed=instance.seed,
        run_seed=run_seed,
        params=dict(params),
        states=states,
        actions=actions,
        rewards=rewards,
        regrets=regrets,
        probes=probes,
        actions_c=actions_c,
        actions_t=actions_t,
        rewards_c=rewards_c,
        rewards_t=rewards_t,
    )


@dataclass
class EpisodeResult:
    """Compact episode summary kept for aggregation."""

    algorithm: str
    cell_index: int
    instance_index: int
    run_index: int
    cum_regret: float
    opt_hits: np.ndarray
    probe_rounds: int


def summarize_record(record: RunRecord, instance: Instance) -> EpisodeResult:
    opt_per_state = np.argmax(instance.rewards.means, axis=1)
    hits = (record.actions == opt_per_state[record.states]).astype(np.uint8)
    return EpisodeResult(
        algorithm=record.algorithm,
        cell_index=record.cell_index,
        instance_index=record.instance_index,
        run_index=record.run_index,
        cum_regret=record.cum_regret,
        opt_hits=hits,
        probe_rounds=int(record.probes.sum()),
    )


def _run_task(task: dict):
    try:
        instance = make_instance(
            task["num_states"], task["num_arms"], task["p_stay"], task["sigma"],
            task["instance_seed"],
        )
        record = run_episode(
            task["algorithm_id"],
            task["params"],
            instance,
            task["horizon"],
            task["run_seed"],
            dual_regret=task["dual_regret"],
            dual_noise=task["dual_noise"],
            cell_index=task["cell_index"],
            instance_index=task["instance_index"],
            run_index=task["run_index"],
            label=task["label"],
        )
        result = summarize_record(record, instance)
        return ("ok", result, record if task["keep_trace"] else None)
    except Exception as exc:  # noqa: BLE001 - cell marked incomplete downstream
        eid = episode_id(task["cell_index"], task["instance_index"],
                         task["run_index"], task["label"])
        return ("error", f"{eid}: {type(exc).__name__}: {exc}", task["cell_index"])


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def winning_rates(episodes: list[EpisodeResult]) -> dict[str, float]:
    """Fraction of instances each algorithm wins (ties split evenly).

    The compared quantity is the per-instance mean regret over runs; every
    algorithm must be present for every instance.
    """
    if not episodes:
        raise IncompleteCellError("no episodes")
    algorithms = sorted({e.algorithm for e in episodes})
    instances = sorted({e.instance_index for e in episodes})
    sums: dict[tuple[str, int], list] = {}
    for e in episodes:
        sums.setdefault((e.algorithm, e.instance_index), []).append(e.cum_regret)
    rates = {a: 0.0 for a in algorithms}
    for i in instances:
        means = {}
        for a in algorithms:
            runs = sums.get((a, i))
            if not runs:
                raise IncompleteCellError(f"algorithm {a!r} missing for instance {i}")
            means[a] = sum(runs) / len(runs)
        best = min(means.values())
        tied = [a for a, m in means.items() if m == best]
        for a in tied:
            rates[a] += 1.0 / len(tied)
    n = len(instances)
    return {a: rates[a] / n for a in algorithms}


def trailing_moving_average(values: np.ndarray, window: int) -> np.ndarray:
    if window < 1:
        raise ValueError("window must be >= 1")
    c = np.cumsum(values, dtype=float)
    out = np.empty_like(c)
    head = min(window, len(values))
    out[:head] = c[:head] / np.arange(1, head + 1)
    if len(values) > window:
        out[window:] = (c[window:] - c[:-window]) / window
    return out


def optimal_arm_frequency(episodes: list[EpisodeResult], window: int) -> dict[str, np.ndarray]:
    """Mean optimal-arm indicator per round, smoothed by a trailing window."""
    if window < 1:
        raise ValueError("window must be >= 1")
    grouped: dict[str, list] = {}
    for e in episodes:
        grouped.setdefault(e.algorithm, []).append(e.opt_hits)
    out = {}
    for algorithm in sorted(grouped):
        raw = np.mean(np.stack(grouped[algorithm]).astype(float), axis=0)
        out[algorithm] = trailing_moving_average(raw, window)
    return out


@dataclass
class AlgorithmCellStats:
    mean_regret: float
    stderr: float
    win_rate: float
    win_count: float


@dataclass
class CellSummary:
    cell: Cell
    stats: dict[str, AlgorithmCellStats]
    num_instances: int
    complete: bool


def summarize_cell(cell: Cell, episodes: list[EpisodeResult], num_instances: int,
                   complete: bool, oracle_labels: tuple[str, ...] = ()) -> CellSummary:
    """Per-algorithm regret stats and winning rates for one cell.

    Oracle baselines are excluded from the winning-rate contest (the
    state-aware oracle would trivially win every instance); their win rate
    is reported as 0.
    """
    stats: dict[str, AlgorithmCellStats] = {}
    if complete:
        contenders = [e for e in episodes if e.algorithm not in oracle_labels]
        rates = winning_rates(contenders) if contenders else {}
        by_alg: dict[str, dict[int, list]] = {}
        for e in episodes:
            by_alg.setdefault(e.algorithm, {}).setdefault(e.instance_index, []).append(e.cum_regret)
        for algorithm, per_instance in by_alg.items():
            means = np.array([np.mean(per_instance[i]) for i in sorted(per_instance)])
            stderr = float(means.std(ddof=1) / np.sqrt(len(means))) if len(means) > 1 else 0.0
            rate = rates.get(algorithm, 0.0)
            stats[algorithm] = AlgorithmCellStats(
                mean_regret=float(means.mean()),
                stderr=stderr,
                win_rate=rate,
                win_count=rate * num_instances,
            )
    return CellSummary(cell=cell, stats=stats, num_instances=num_instances, complete=complete)


# ---------------------------------------------------------------------------
# Sweep execution
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    config: SweepConfig
    cells: list[Cell]
    summaries: list[CellSummary]
    episodes: list[EpisodeResult]
    records: list[RunRecord] | None
    errors: list[str]


def resolve_workers(requested: int | None) -> int:
    env_value = os.environ.get(WORKERS_ENV_VAR)
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got {env_value!r}") from None
    return max(1, requested if requested is not None else 1)


def run_sweep(config: SweepConfig, workers: int = 1, keep_traces: bool = False) -> SweepResult:
    cells = build_cells(config)
    tasks = list(iter_tasks(config, cells, keep_traces))
    if workers <= 1:
        outcomes = [_run_task(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_task, tasks, chunksize=chunk))

    episodes: list[EpisodeResult] = []
    records: list[RunRecord] = []
    errors: list[str] = []
    failed_cells: set[int] = set()
    for outcome in outcomes:
        if outcome[0] == "ok":
            episodes.append(outcome[1])
            if outcome[2] is not None:
                records.append(outcome[2])
        else:
            errors.append(outcome[1])
            failed_cells.add(outcome[2])

    oracle_labels = tuple(s.label for s in config.algorithms if s.id in ORACLE_IDS)
    summaries = []
    for cell in cells:
        cell_eps = [e for e in episodes if e.cell_index == cell.index]
        complete = cell.index not in failed_cells
        summaries.append(
            summarize_cell(cell, cell_eps, config.num_instances, complete, oracle_labels)
        )
    return SweepResult(
        config=config,
        cells=cells,
        summaries=summaries,
        episodes=episodes,
        records=records if keep_traces else None,
        errors=errors,
    )


# ---------------------------------------------------------------------------
# Result files
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def emit_results(result: SweepResult, out_dir: str | Path, traces: bool = False) -> list[Path]:
    """Write summary.csv, wins.csv, freq.csv, manifest.json (and trace.jsonl)."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    labels = [spec.label for spec in result.config.algorithms]
    written: list[Path] = []

    def open_csv(name):
        path = out / name
        written.append(path)
        return path.open("w", newline="")

    with open_csv("summary.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "value", *labels])
        for summary in result.summaries:
            row = [summary.cell.param, summary.cell.value]
            for label in labels:
                stat = summary.stats.get(label)
                row.append(_fmt(stat.mean_regret) if stat is not None else "")
            writer.writerow(row)

    with open_csv("wins.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "value", "algorithm", "win_rate"])
        for summary in result.summaries:
            for label in labels:
                stat = summary.stats.get(label)
                if stat is not None:
                    writer.writerow([summary.cell.param, summary.cell.value, label,
                                     _fmt(stat.win_rate)])

    with open_csv("freq.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "value", "algorithm", "t", "frequency"])
        for cell in result.cells:
            cell_eps = [e for e in result.episodes if e.cell_index == cell.index]
            if not cell_eps:
                continue
            freq = optimal_arm_frequency(cell_eps, result.config.smoothing_window)
            for label in labels:
                if label not in freq:
                    continue
                series = freq[label]
                for t, value in enumerate(series, start=1):
                    writer.writerow([cell.param, cell.value, label, t, _fmt(value)])

    manifest_path = out / "manifest.json"
    manifest = {
        "version": __version__,
        "root_seed": result.config.root_seed,
        "config": config_to_dict(result.config),
        "cells": [
            {"index": c.index, "param": c.param, "value": c.value,
             "num_states": c.num_states, "p_stay": c.p_stay,
             "sigma": c.sigma, "horizon": c.horizon}
            for c in result.cells
        ],
        "episode_id_format": "cell_index:instance_index:run_index:algorithm_label",
        "errors": result.errors,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(manifest_path)

    if traces:
        if result.records is None:
            raise ValueError("traces requested but the sweep did not keep records")
        trace_path = out / "trace.jsonl"
        with trace_path.open("w") as fh:
            for record in result.records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        written.append(trace_path)
    return written


def replay_episode(manifest: dict, eid: str) -> RunRecord:
    """Re-run a single episode identified by its id, bit-for-bit."""
    config = config_from_dict(manifest["config"], add_oracles=False)
    cells = build_cells(config)
    cell_index, instance_index, run_index, label = parse_episode_id(eid)
    if not 0 <= cell_index < len(cells):
        raise ConfigError(f"cell index {cell_index} out of range")
    if not 0 <= instance_index < config.num_instances:
        raise ConfigError(f"instance index {instance_index} out of range")
    if not 0 <= run_index < config.runs_per_instance:
        raise ConfigError(f"run index {run_index} out of range")
    spec = next((s for s in config.algorithms if s.label == label), None)
    if spec is None:
        raise ConfigError(f"algorithm label {label!r} not in manifest config")
    cell = cells[cell_index]
    instance = make_instance(
        cell.num_states, config.num_arms, cell.p_stay, cell.sigma,
        instance_seed_for(config, cell_index, instance_index),
    )
    return run_episode(
        spec.id,
        spec.params,
        instance,
        cell.horizon,
        run_seed_for(config, cell_index, instance_index, run_index, label),
        dual_regret=config.dual_regret,
        dual_noise=config.dual_noise,
        cell_index=cell_index,
        instance_index=instance_index,
        run_index=run_index,
        label=label,
    )
