"""Classical, adversarial, non-stationary, and oracle comparison policies.

All single-unit policies share the same contract: select(t) returns an arm
for 1-based round t, observe(arm, reward) feeds the outcome back.  Ties in
every argmax break toward the lowest arm index.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .env import RewardMatrix


def _argmax_lowest(values) -> int:
    # np.argmax already returns the first maximizer
    return int(np.argmax(values))


class UCB1:
    """Empirical mean plus a sqrt(2 ln t / N_a) bonus; untried arms first."""

    def __init__(self, num_arms: int):
        self.num_arms = num_arms
        self.counts = np.zeros(num_arms, dtype=np.int64)
        self.sums = np.zeros(num_arms)

    def select(self, t: int) -> int:
        for a in range(self.num_arms):
            if self.counts[a] == 0:
                return a
        index = self.sums / self.counts + np.sqrt(2.0 * math.log(t) / self.counts)
        return _argmax_lowest(index)

    def observe(self, arm: int, reward: float):
        self.counts[arm] += 1
        self.sums[arm] += reward


class GaussianTS:
    """Thompson sampling with an independent Normal-Gamma posterior per arm.

    select() draws a mean for each arm from its posterior (precision from the
    Gamma marginal, then the mean conditionally) and plays the argmax.
    """

    def __init__(
        self,
        num_arms: int,
        rng: np.random.Generator,
        mu0: float = 0.5,
        kappa0: float = 1.0,
        a0: float = 1.0,
        b0: float = 0.01,
    ):
        self.num_arms = num_arms
        self.rng = rng
        self.mu0, self.kappa0, self.a0, self.b0 = mu0, kappa0, a0, b0
        self.counts = np.zeros(num_arms, dtype=np.int64)
        self.sums = np.zeros(num_arms)
        self.sumsq = np.zeros(num_arms)

    def posterior_params(self, arm: int) -> tuple[float, float, float, float]:
        n = int(self.counts[arm])
        if n == 0:
            return self.mu0, self.kappa0, self.a0, self.b0
        mean = self.sums[arm] / n
        ss = self.sumsq[arm] - n * mean * mean
        ss = max(ss, 0.0)
        kappa_n = self.kappa0 + n
        mu_n = (self.kappa0 * self.mu0 + n * mean) / kappa_n
        a_n = self.a0 + 0.5 * n
        b_n = self.b0 + 0.5 * ss + 0.5 * self.kappa0 * n * (mean - self.mu0) ** 2 / kappa_n
        return mu_n, kappa_n, a_n, b_n

    def select(self, t: int) -> int:
        draws = np.empty(self.num_arms)
        for a in range(self.num_arms):
            mu_n, kappa_n, a_n, b_n = self.posterior_params(a)
            lam = self.rng.gamma(shape=a_n, scale=1.0 / b_n)
            draws[a] = self.rng.normal(mu_n, math.sqrt(1.0 / (kappa_n * lam)))
        return _argmax_lowest(draws)

    def observe(self, arm: int, reward: float):
        self.counts[arm] += 1
        self.sums[arm] += reward
        self.sumsq[arm] += reward * reward


class Exp3:
    """Exponential weights with uniform exploration mixing.

    Rewards are clipped to [0, 1] before importance weighting; weights are
    renormalized when they grow past 1e100 to avoid overflow.
    """

    def __init__(self, num_arms: int, gamma: float, rng: np.random.Generator):
        if not 0.0 < gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        self.num_arms = num_arms
        self.gamma = gamma
        self.rng = rng
        self.weights = np.ones(num_arms)

    def probabilities(self) -> np.ndarray:
        w = self.weights / self.weights.sum()
        return (1.0 - self.gamma) * w + self.gamma / self.num_arms

    def select(self, t: int) -> int:
        p = self.probabilities()
        u = self.rng.random()
        return min(int(np.searchsorted(np.cumsum(p), u, side="right")), self.num_arms - 1)

    def observe(self, arm: int, reward: float):
        reward = min(max(reward, 0.0), 1.0)
        p = self.probabilities()
        self.weights[arm] *= math.exp(self.gamma * (reward / p[arm]) / self.num_arms)
        self._smooth()
        if self.weights.max() > 1e100:
            self.weights /= self.weights.max()

    def _smooth(self):
        pass


class Exp3S(Exp3):
    """Exp3 with an additive smoothing floor after each weight update."""

    def __init__(self, num_arms: int, gamma: float, alpha_s: float, rng: np.random.Generator):
        super().__init__(num_arms, gamma, rng)
        if alpha_s < 0.0:
            raise ValueError("alpha_s must be nonnegative")
        self.alpha_s = alpha_s

    def _smooth(self):
        if self.alpha_s > 0.0:
            self.weights += (math.e * self.alpha_s / self.num_arms) * self.weights.sum()


class SlidingWindowUCB:
    """UCB1 on a per-arm FIFO of the most recent observations."""

    def __init__(self, num_arms: int, window: int):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.num_arms = num_arms
        self.window = window
        self.rounds_seen = 0
        self.history: list[deque] = [deque(maxlen=window) for _ in range(num_arms)]

    def select(self, t: int) -> int:
        for a in range(self.num_arms):
            if not self.history[a]:
                return a
        index = np.empty(self.num_arms)
        for a in range(self.num_arms):
            rewards = [r for _, r in self.history[a]]
            n = len(rewards)
            index[a] = sum(rewards) / n + math.sqrt(2.0 * math.log(t) / n)
        return _argmax_lowest(index)

    def observe(self, arm: int, reward: float):
        self.rounds_seen += 1
        self.history[arm].append((self.rounds_seen, reward))


class DiscountedUCB:
    """UCB1 with exponentially decayed counts and sums.

    The log term uses 1 + the discounted total observation count, which is
    the discounted analogue of UCB1's round counter: as the discount
    approaches 1 the index reduces to UCB1's exactly.
    """

    def __init__(self, num_arms: int, discount: float):
        if not 0.0 < discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        self.num_arms = num_arms
        self.discount = discount
        self.counts = np.zeros(num_arms)
        self.sums = np.zeros(num_arms)

    def select(self, t: int) -> int:
        for a in range(self.num_arms):
            if self.counts[a] == 0.0:
                return a
        total = 1.0 + self.counts.sum()
        index = self.sums / self.counts + np.sqrt(2.0 * math.log(total) / self.counts)
        return _argmax_lowest(index)

    def observe(self, arm: int, reward: float):
        self.counts *= self.discount
        self.sums *= self.discount
        self.counts[arm] += 1.0
        self.sums[arm] += reward


def oracle_single_arm(rewards: RewardMatrix, stationary: np.ndarray) -> int:
    """Best fixed arm under the stationary state distribution."""
    stationary = np.asarray(stationary, dtype=float)
    if stationary.shape != (rewards.num_states,):
        raise ValueError("stationary distribution has the wrong length")
    return _argmax_lowest(stationary @ rewards.means)


def state_aware_oracle(rewards: RewardMatrix, state: int) -> int:
    """Best arm for the (normally hidden) current state."""
    return rewards.optimal_arm(state)


class OptimalSingleArmPolicy:
    """Plays the stationary-best arm every round (oracle baseline)."""

    def __init__(self, rewards: RewardMatrix, stationary: np.ndarray):
        self.arm = oracle_single_arm(rewards, stationary)

    def select(self, t: int) -> int:
        return self.arm

    def observe(self, arm: int, reward: float):
        pass
