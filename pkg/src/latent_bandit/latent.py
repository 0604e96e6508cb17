"""State-model-free policies for latent-state bandits.

The policies here never estimate the hidden state directly.  Instead they
feed proxies of it into per-arm linear models:

* LC-UCB / LC-TS use the previous action-reward pair as context ("lagged
  context"): with a slowly mixing hidden chain, the last reward carries most
  of the information about the current state.
* RP-UCB / SP-UCB additionally "probe": they occasionally collect a joint
  reward pair from both arms (simultaneously on two units, or on two
  consecutive rounds) and keep it as a fingerprint feature.  A fingerprint
  disambiguates states whose rewards coincide on a single arm.
* AdaRP-UCB / AdaSP-UCB replace the fixed probing schedule with three
  data-driven gates (residual, uncertainty, staleness).

Probing policies are implemented for two arms only; lagged-context policies
accept any number of arms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linmodel import ArmLinearModel


class ProtocolError(RuntimeError):
    """A policy method was called out of the select/observe order."""


@dataclass
class LaggedContext:
    """Previous action and reward, the short-term state proxy."""

    prev_action: int = 0
    prev_reward: float = 0.0


@dataclass
class Fingerprint:
    """Most recent joint reward pair from probing both arms."""

    r0: float = 0.0
    r1: float = 0.0
    captured_at: int = 0


@dataclass
class ProbePhase:
    """Two-round probe state machine for sequential probing."""

    mode: str = "exploit"
    probe_arm: int = 0


def lagged_features(ctx: LaggedContext, num_arms: int) -> np.ndarray:
    """[1, onehot(prev action), prev reward, onehot * prev reward].

    Dimension 2K + 2.  The interaction block lets each arm's model learn a
    different response to the lagged reward depending on which arm produced
    it.
    """
    if not 0 <= ctx.prev_action < num_arms:
        raise ValueError("prev_action out of range")
    phi = np.zeros(2 * num_arms + 2)
    phi[0] = 1.0
    phi[1 + ctx.prev_action] = 1.0
    phi[1 + num_arms] = ctx.prev_reward
    phi[2 + num_arms + ctx.prev_action] = ctx.prev_reward
    return phi


def combined_features(fp: Fingerprint, ctx: LaggedContext, num_arms: int) -> np.ndarray:
    """Fingerprint pair prepended to the lagged features (dimension 2K + 4)."""
    return np.concatenate(([fp.r0, fp.r1], lagged_features(ctx, num_arms)))


@dataclass(frozen=True)
class GateConfig:
    """Thresholds for the adaptive probing trigger.

    sigma0 is a standard-deviation floor added (in quadrature) to the model
    variance when studentizing residuals, so that a near-deterministic model
    does not fire the residual gate on harmless noise.
    """

    z_thresh: float = 2.0
    sigma0: float = 0.05
    m_thresh: float = 0.05
    lambda_h: float = 0.1
    delta_h: float = 0.5
    tau_min: int = 5

    def __post_init__(self):
        if min(self.z_thresh, self.sigma0, self.m_thresh, self.lambda_h, self.tau_min) <= 0:
            raise ValueError("gate thresholds must be positive")
        if not 0.0 < self.delta_h < 1.0:
            raise ValueError("delta_h must lie in (0, 1)")


@dataclass(frozen=True)
class GateDecision:
    probe: bool
    g_res: bool
    g_unc: bool
    g_haz: bool
    margin: float
    residual: float | None


def compute_gates(
    config: GateConfig,
    t: int,
    t_probe: int,
    ucb_scores: tuple[float, float],
    residual: float | None,
) -> GateDecision:
    """Decide whether to probe at round t.

    residual is the studentized prediction error of the previous round, or
    None when there is no history yet (then the residual gate stays silent).
    All comparisons are inclusive.  Whatever the gates say, probing is
    suppressed until at least tau_min rounds have passed since the last
    probe.
    """
    g_res = residual is not None and abs(residual) >= config.z_thresh
    margin = abs(ucb_scores[0] - ucb_scores[1])
    g_unc = margin <= config.m_thresh
    hazard = 1.0 - math.exp(-config.lambda_h * (t - t_probe))
    g_haz = hazard >= config.delta_h
    probe = (g_res or g_unc or g_haz) and (t - t_probe >= config.tau_min)
    return GateDecision(probe, g_res, g_unc, g_haz, margin, residual)


def studentized_residual(model: ArmLinearModel, phi, reward: float, sigma0: float) -> float:
    """(observed - predicted) / sqrt(model variance + sigma0^2)."""
    pred, var = model.predict(phi)
    return (reward - pred) / math.sqrt(var + sigma0 * sigma0)


class LCUCB:
    """LinUCB on lagged action-reward context."""

    def __init__(self, num_arms: int, alpha: float = 1.0, reg: float = 1.0):
        if num_arms < 2:
            raise ValueError("need at least 2 arms")
        self.num_arms = num_arms
        self.alpha = alpha
        self.dim = 2 * num_arms + 2
        self.models = [ArmLinearModel(self.dim, reg) for _ in range(num_arms)]
        self.ctx = LaggedContext()
        self.last_mode = "exploit"
        self._pending: tuple[np.ndarray, int] | None = None

    def _scores(self, phi) -> np.ndarray:
        return np.array([m.ucb_score(phi, self.alpha) for m in self.models])

    def select(self, t: int) -> int:
        phi = lagged_features(self.ctx, self.num_arms)
        arm = int(np.argmax(self._scores(phi)))
        self._pending = (phi, arm)
        return arm

    def observe(self, reward: float):
        if self._pending is None:
            raise ProtocolError("observe() called before select()")
        phi, arm = self._pending
        self._pending = None
        self.models[arm].update(phi, reward)
        self.ctx = LaggedContext(arm, reward)

    def diagnostics(self) -> dict:
        return {"mode": "exploit"}


class LCTS(LCUCB):
    """Thompson-style variant: play the argmax of sampled linear models."""

    def __init__(self, num_arms: int, rng: np.random.Generator,
                 noise_scale: float = 1.0, reg: float = 1.0):
        super().__init__(num_arms, alpha=0.0, reg=reg)
        self.rng = rng
        self.noise_scale = noise_scale

    def select(self, t: int) -> int:
        phi = lagged_features(self.ctx, self.num_arms)
        draws = np.array(
            [phi @ m.sample_parameters(self.noise_scale, self.rng) for m in self.models]
        )
        arm = int(np.argmax(draws))
        self._pending = (phi, arm)
        return arm


class _ProbingBase:
    """Shared plumbing for the two-arm probing policies."""

    def __init__(self, alpha: float, reg: float):
        self.num_arms = 2
        self.alpha = alpha
        self.dim = 2 * self.num_arms + 4
        self.models = [ArmLinearModel(self.dim, reg) for _ in range(2)]
        self.ctx = LaggedContext()
        self.fingerprint = Fingerprint()
        # previous round's (features, recorded arm, recorded reward), for the
        # residual gate and for diagnostics
        self._last: tuple[np.ndarray, int, float] | None = None
        self.last_mode = "exploit"
        self.last_gates: GateDecision | None = None

    def _features(self) -> np.ndarray:
        return combined_features(self.fingerprint, self.ctx, self.num_arms)

    def _scores(self, phi) -> tuple[float, float]:
        return (self.models[0].ucb_score(phi, self.alpha),
                self.models[1].ucb_score(phi, self.alpha))

    def _residual(self, sigma0: float) -> float | None:
        if self._last is None:
            return None
        phi, arm, reward = self._last
        return studentized_residual(self.models[arm], phi, reward, sigma0)

    def diagnostics(self) -> dict:
        d = {
            "mode": self.last_mode,
            "fingerprint": (self.fingerprint.r0, self.fingerprint.r1),
        }
        if self.last_gates is not None:
            d.update(
                g_res=self.last_gates.g_res,
                g_unc=self.last_gates.g_unc,
                g_haz=self.last_gates.g_haz,
                margin=self.last_gates.margin,
                residual=self.last_gates.residual,
            )
        return d


class _DualBase(_ProbingBase):
    """Observe-side bookkeeping shared by the dual-unit policies.

    In probe mode the observed pair becomes the fingerprint and the lagged
    context takes the better of the two (arm, reward) outcomes; in exploit
    mode both unit rewards update the played arm's model and the lagged
    reward is their average.
    """

    def __init__(self, alpha: float, reg: float):
        super().__init__(alpha, reg)
        self._pending: tuple[np.ndarray, str, int, int, int] | None = None
        self.last_recorded_action = 0
        self.last_recorded_reward = 0.0

    def observe(self, reward_c: float, reward_t: float):
        if self._pending is None:
            raise ProtocolError("observe() called before select()")
        phi, mode, arm_c, arm_t, t = self._pending
        self._pending = None
        self.models[arm_c].update(phi, reward_c)
        self.models[arm_t].update(phi, reward_t)
        if mode == "probe":
            self.fingerprint = Fingerprint(reward_c, reward_t, captured_at=t)
            if reward_t > reward_c:
                recorded = (arm_t, reward_t)
            else:
                recorded = (arm_c, reward_c)
        else:
            recorded = (arm_c, 0.5 * (reward_c + reward_t))
        self.ctx = LaggedContext(*recorded)
        self._last = (phi, recorded[0], recorded[1])
        self.last_mode = mode
        self.last_recorded_action = recorded[0]
        self.last_recorded_reward = recorded[1]


class RPUCB(_DualBase):
    """Dual-unit probing on a fixed schedule: split the units every tau rounds."""

    def __init__(self, tau: int = 10, alpha: float = 1.0, reg: float = 1.0):
        if tau < 2:
            raise ValueError("tau must be >= 2")
        super().__init__(alpha, reg)
        self.tau = tau

    def select(self, t: int) -> tuple[int, int]:
        phi = self._features()
        if t % self.tau == 0:
            mode, arms = "probe", (0, 1)
        else:
            scores = self._scores(phi)
            best = int(np.argmax(scores))
            mode, arms = "exploit", (best, best)
        self._pending = (phi, mode, arms[0], arms[1], t)
        return arms


class AdaRPUCB(_DualBase):
    """RP-UCB with the probe trigger replaced by the adaptive gates."""

    def __init__(self, gates: GateConfig | None = None, alpha: float = 1.0, reg: float = 1.0):
        super().__init__(alpha, reg)
        self.gates = gates if gates is not None else GateConfig()
        self.t_probe = 0

    def select(self, t: int) -> tuple[int, int]:
        phi = self._features()
        scores = self._scores(phi)
        decision = compute_gates(
            self.gates, t, self.t_probe, scores, self._residual(self.gates.sigma0)
        )
        self.last_gates = decision
        if decision.probe:
            mode, arms = "probe", (0, 1)
            self.t_probe = t
        else:
            best = int(np.argmax(scores))
            mode, arms = "exploit", (best, best)
        self._pending = (phi, mode, arms[0], arms[1], t)
        return arms


class SPUCB(_ProbingBase):
    """Single-unit probing: arms 0 and 1 on consecutive scheduled rounds.

    The pair (r from arm 0, r from arm 1) becomes the fingerprint once the
    second half of the probe completes; with a sticky hidden state the two
    rounds approximate a same-state joint observation.
    """

    def __init__(self, tau: int = 10, alpha: float = 1.0, reg: float = 1.0):
        if tau < 3:
            raise ValueError("tau must be >= 3")
        super().__init__(alpha, reg)
        self.tau = tau
        self._pending: tuple[np.ndarray, str, int, int] | None = None

    def select(self, t: int) -> int:
        phi = self._features()
        r = t % self.tau
        if r in (0, 1):
            mode, arm = "probe", r
        else:
            mode, arm = "exploit", int(np.argmax(self._scores(phi)))
        self._pending = (phi, mode, arm, t)
        return arm

    def observe(self, reward: float):
        if self._pending is None:
            raise ProtocolError("observe() called before select()")
        phi, mode, arm, t = self._pending
        self._pending = None
        if mode == "probe" and arm == 1:
            # previous round's reward is still in the lagged context
            self.fingerprint = Fingerprint(self.ctx.prev_reward, reward, captured_at=t)
        self.models[arm].update(phi, reward)
        self.ctx = LaggedContext(arm, reward)
        self._last = (phi, arm, reward)
        self.last_mode = mode


class AdaSPUCB(_ProbingBase):
    """SP-UCB with gate-triggered two-round probes.

    The gate is consulted only in exploit mode; once it fires the policy
    commits to the full (arm 0, arm 1) pair on consecutive rounds, then sets
    the fingerprint and the probe timestamp at completion.
    """

    def __init__(self, gates: GateConfig | None = None, alpha: float = 1.0, reg: float = 1.0):
        super().__init__(alpha, reg)
        self.gates = gates if gates is not None else GateConfig()
        self.phase = ProbePhase()
        self.t_probe = 0
        self._pending: tuple[np.ndarray, str, int, int] | None = None

    def select(self, t: int) -> int:
        phi = self._features()
        scores = self._scores(phi)
        decision = compute_gates(
            self.gates, t, self.t_probe, scores, self._residual(self.gates.sigma0)
        )
        self.last_gates = decision
        if self.phase.mode == "exploit" and decision.probe:
            self.phase = ProbePhase(mode="probe", probe_arm=0)
        if self.phase.mode == "probe":
            arm = self.phase.probe_arm
            self.phase.probe_arm += 1
            mode = "probe"
        else:
            arm = int(np.argmax(scores))
            mode = "exploit"
        self._pending = (phi, mode, arm, t)
        return arm

    def observe(self, reward: float):
        if self._pending is None:
            raise ProtocolError("observe() called before select()")
        phi, mode, arm, t = self._pending
        self._pending = None
        if mode == "probe" and self.phase.probe_arm == 2:
            self.phase = ProbePhase(mode="exploit", probe_arm=0)
            self.fingerprint = Fingerprint(self.ctx.prev_reward, reward, captured_at=t)
            self.t_probe = t
        self.models[arm].update(phi, reward)
        self.ctx = LaggedContext(arm, reward)
        self._last = (phi, arm, reward)
        self.last_mode = mode
