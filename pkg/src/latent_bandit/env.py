"""Latent-state bandit environments.

A hidden state evolves as a Markov chain; each round the agent picks an arm
and observes a noisy reward whose mean depends on the current hidden state.
The state itself is never revealed to policies; step outcomes carry it only
so the harness can compute per-round regret against the state-aware oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import substream


class NonErgodicChainError(ValueError):
    """Raised when a chain has no unique stationary distribution."""


@dataclass(frozen=True)
class RewardMatrix:
    """Per-(state, arm) mean rewards, entries in [0, 1]."""

    means: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        if means.ndim != 2 or means.shape[0] < 1 or means.shape[1] < 1:
            raise ValueError("means must be a nonempty 2D array")
        if not np.all(np.isfinite(means)) or means.min() < 0.0 or means.max() > 1.0:
            raise ValueError("mean rewards must lie in [0, 1]")
        object.__setattr__(self, "means", means)

    @property
    def num_states(self) -> int:
        return self.means.shape[0]

    @property
    def num_arms(self) -> int:
        return self.means.shape[1]

    def optimal_arm(self, state: int) -> int:
        # ties broken toward the lowest index
        return int(np.argmax(self.means[state]))

    def gap(self, state: int, arm: int) -> float:
        return float(self.means[state].max() - self.means[state, arm])

    @property
    def max_gap(self) -> float:
        return float((self.means.max(axis=1)[:, None] - self.means).max())


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic S x S Markov kernel."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1] or probs.shape[0] < 1:
            raise ValueError("transition matrix must be square and nonempty")
        if probs.min() < 0.0:
            raise ValueError("transition probabilities must be nonnegative")
        if np.abs(probs.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("each transition-matrix row must sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]


def make_transition_matrix(num_states: int, p_stay: float) -> TransitionMatrix:
    """Kernel with diagonal p_stay and the leftover mass spread uniformly.

    For a single state the chain is trivially absorbing and p_stay is ignored.
    """
    if num_states < 1:
        raise ValueError("num_states must be >= 1")
    if not 0.0 <= p_stay <= 1.0:
        raise ValueError("p_stay must lie in [0, 1]")
    if num_states == 1:
        return TransitionMatrix(np.ones((1, 1)))
    off = (1.0 - p_stay) / (num_states - 1)
    probs = np.full((num_states, num_states), off)
    np.fill_diagonal(probs, p_stay)
    return TransitionMatrix(probs)


def stationary_distribution(transitions: TransitionMatrix, tol: float = 1e-12) -> np.ndarray:
    """Stationary distribution via repeated squaring of the lazy kernel.

    Squaring (P + I)/2 converges for every irreducible chain, including
    periodic ones; failure to converge means the chain is reducible and has
    no unique stationary distribution.
    """
    p = transitions.probs
    if transitions.num_states == 1:
        return np.ones(1)
    m = 0.5 * (p + np.eye(transitions.num_states))
    for _ in range(80):
        m = m @ m
        # renormalize rows to counter drift from repeated multiplication
        m /= m.sum(axis=1, keepdims=True)
        if (m.max(axis=0) - m.min(axis=0)).max() < tol:
            pi = m.mean(axis=0)
            pi = pi / pi.sum()
            if np.abs(pi @ p - pi).max() > 1e-10:
                raise NonErgodicChainError("no unique stationary distribution")
            return pi
    raise NonErgodicChainError("no unique stationary distribution")


def sample_instance(num_states: int, num_arms: int, seed: int) -> RewardMatrix:
    """Reward means drawn i.i.d. Uniform[0, 1] from the seeded stream."""
    if num_states < 1 or num_arms < 1:
        raise ValueError("num_states and num_arms must be >= 1")
    rng = np.random.default_rng(seed)
    return RewardMatrix(rng.uniform(0.0, 1.0, size=(num_states, num_arms)))


@dataclass(frozen=True)
class StepOutcome:
    """Single-unit step result; true_state is for harness accounting only."""

    reward: float
    true_state: int
    optimal_arm: int
    gap_of_played: float


@dataclass(frozen=True)
class DualStepOutcome:
    """Dual-unit step result: both units saw the same hidden state."""

    reward_c: float
    reward_t: float
    true_state: int
    optimal_arm: int
    gap_c: float
    gap_t: float


class Environment:
    """Mutable simulator: hidden Markov state plus noisy reward emission.

    Rewards are generated from the pre-transition state; the state then
    advances once per round.  Noise and state transitions draw from separate
    substreams, so the state trajectory under a fixed seed is identical no
    matter which arms are played (actions never influence transitions).
    """

    def __init__(
        self,
        rewards: RewardMatrix,
        transitions: TransitionMatrix,
        noise_sd: float,
        seed: int,
        dual_noise_factor: float = 2.0,
        initial_state: int | None = None,
    ):
        if rewards.num_states != transitions.num_states:
            raise ValueError("rewards and transitions disagree on the number of states")
        if noise_sd < 0.0:
            raise ValueError("noise_sd must be nonnegative")
        if dual_noise_factor <= 0.0:
            raise ValueError("dual_noise_factor must be positive")
        self.rewards = rewards
        self.transitions = transitions
        self.noise_sd = float(noise_sd)
        self.dual_noise_sd = float(noise_sd) * float(dual_noise_factor) ** 0.5
        self._state_rng = substream(seed, "state")
        self._noise_rng = substream(seed, "noise")
        self._cum_rows = np.cumsum(transitions.probs, axis=1)
        self._opt_arms = np.argmax(rewards.means, axis=1)
        self._row_max = rewards.means.max(axis=1)
        if initial_state is None:
            self.current_state = int(self._state_rng.integers(rewards.num_states))
        else:
            if not 0 <= initial_state < rewards.num_states:
                raise ValueError("initial_state out of range")
            self.current_state = int(initial_state)

    @property
    def num_arms(self) -> int:
        return self.rewards.num_arms

    @property
    def num_states(self) -> int:
        return self.rewards.num_states

    def _check_arm(self, arm: int):
        if not 0 <= arm < self.num_arms:
            raise ValueError(f"arm {arm} out of range [0, {self.num_arms})")

    def _advance(self):
        u = self._state_rng.random()
        nxt = int(np.searchsorted(self._cum_rows[self.current_state], u, side="right"))
        self.current_state = min(nxt, self.num_states - 1)

    def step_single(self, arm: int) -> StepOutcome:
        self._check_arm(arm)
        s = self.current_state
        reward = float(self.rewards.means[s, arm] + self._noise_rng.normal(0.0, self.noise_sd))
        out = StepOutcome(
            reward=reward,
            true_state=s,
            optimal_arm=int(self._opt_arms[s]),
            gap_of_played=float(self._row_max[s] - self.rewards.means[s, arm]),
        )
        self._advance()
        return out

    def step_dual(self, arm_c: int, arm_t: int) -> DualStepOutcome:
        self._check_arm(arm_c)
        self._check_arm(arm_t)
        s = self.current_state
        mean_c = self.rewards.means[s, arm_c]
        mean_t = self.rewards.means[s, arm_t]
        reward_c = float(mean_c + self._noise_rng.normal(0.0, self.dual_noise_sd))
        reward_t = float(mean_t + self._noise_rng.normal(0.0, self.dual_noise_sd))
        out = DualStepOutcome(
            reward_c=reward_c,
            reward_t=reward_t,
            true_state=s,
            optimal_arm=int(self._opt_arms[s]),
            gap_c=float(self._row_max[s] - mean_c),
            gap_t=float(self._row_max[s] - mean_t),
        )
        self._advance()
        return out


@dataclass(frozen=True)
class Instance:
    """A fully specified problem: dimensions, dynamics, noise, and means.

    The seed is the one the means were sampled from, kept so a failing case
    can be written to disk and replayed exactly.
    """

    num_states: int
    num_arms: int
    p_stay: float
    sigma: float
    seed: int
    rewards: RewardMatrix

    def transition_matrix(self) -> TransitionMatrix:
        return make_transition_matrix(self.num_states, self.p_stay)


def make_instance(num_states: int, num_arms: int, p_stay: float, sigma: float, seed: int) -> Instance:
    return Instance(
        num_states=num_states,
        num_arms=num_arms,
        p_stay=p_stay,
        sigma=sigma,
        seed=seed,
        rewards=sample_instance(num_states, num_arms, seed),
    )


def make_environment(
    instance: Instance,
    env_seed: int,
    dual_noise_factor: float = 2.0,
    initial_state: int | None = None,
) -> Environment:
    return Environment(
        rewards=instance.rewards,
        transitions=instance.transition_matrix(),
        noise_sd=instance.sigma,
        seed=env_seed,
        dual_noise_factor=dual_noise_factor,
        initial_state=initial_state,
    )


def instance_to_dict(instance: Instance) -> dict:
    return {
        "S": instance.num_states,
        "K": instance.num_arms,
        "p_stay": instance.p_stay,
        "sigma": instance.sigma,
        "seed": instance.seed,
        "means": [float(x) for x in instance.rewards.means.ravel()],
    }


def instance_from_dict(data: dict) -> Instance:
    s, k = int(data["S"]), int(data["K"])
    means = np.asarray(data["means"], dtype=float).reshape(s, k)
    return Instance(
        num_states=s,
        num_arms=k,
        p_stay=float(data["p_stay"]),
        sigma=float(data["sigma"]),
        seed=int(data["seed"]),
        rewards=RewardMatrix(means),
    )


def save_instance(instance: Instance, path: str | Path):
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=2) + "\n")


def load_instance(path: str | Path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))
