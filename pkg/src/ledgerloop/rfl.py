"""Reflexive Formal Learning: softmax tactic policy driven by verifier outcomes.

The policy is a weight vector over tactics. Each verified event nudges the
weight of the tactic that produced it: up on PASS, down on FAIL, and down by
a smaller amount on ABSTAIN. Nothing about the failed artifact's content
reaches the update, only ``(outcome, tactic, step size)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .hashcore import fixed_float
from .verifier import Outcome, VerifierConfig

ABSTAIN_PENALTY = 0.5
WEIGHT_CLIP = 10.0
UPDATE_BOUND = 1.0


@dataclass(frozen=True)
class Policy:
    weights: tuple[float, ...]
    version: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not all(math.isfinite(w) for w in self.weights):
            raise ValueError("policy weights must be finite")

    @classmethod
    def zeros(cls, k: int) -> "Policy":
        return cls((0.0,) * k)

    @property
    def k(self) -> int:
        return len(self.weights)

    def probabilities(self) -> tuple[float, ...]:
        return softmax(self.weights)

    def to_doc(self) -> dict:
        return {"version": self.version, "weights": [fixed_float(w) for w in self.weights]}


def softmax(weights: Sequence[float]) -> tuple[float, ...]:
    top = max(weights)
    exps = [math.exp(w - top) for w in weights]
    total = math.fsum(exps)
    return tuple(e / total for e in exps)


def select_tactic(policy: Policy, u: float) -> tuple[int, tuple[float, ...]]:
    """Inverse-CDF sample of a tactic from ``softmax(weights)`` using draw ``u``.

    Returns the tactic index and the probability vector that was used.
    """
    if policy.k < 2:
        raise ValueError("need at least two tactics")
    probs = policy.probabilities()
    acc = 0.0
    for k, p in enumerate(probs):
        acc += p
        if u < acc:
            return k, probs
    # u landed in the rounding gap above the float cumulative sum
    return max(k for k, p in enumerate(probs) if p > 0), probs


def phi(outcome: Outcome, k: int, policy: Policy, beta: float = ABSTAIN_PENALTY) -> tuple[float, ...]:
    if not 0 <= k < policy.k:
        raise ValueError(f"tactic {k} out of range")
    if not 0.0 <= beta <= UPDATE_BOUND:
        raise ValueError("abstain penalty must lie in [0, 1]")
    step = {Outcome.PASS: 1.0, Outcome.FAIL: -1.0, Outcome.ABSTAIN: -beta}[outcome]
    delta = [0.0] * policy.k
    delta[k] = step
    return tuple(delta)


def update(policy: Policy, eta: float, delta: Sequence[float], clip: float = WEIGHT_CLIP) -> Policy:
    """Apply one step ``weights + eta * delta``, clipped to ``[-clip, clip]``.

    ``eta == 0`` means learning is off: the policy comes back untouched,
    version included.
    """
    if eta < 0 or not math.isfinite(eta):
        raise ValueError(f"step size must be a finite non-negative number, got {eta}")
    if eta == 0:
        return policy
    if len(delta) != policy.k:
        raise ValueError("delta length does not match policy")
    weights = tuple(min(clip, max(-clip, w + eta * d)) + 0.0 for w, d in zip(policy.weights, delta))
    if not all(math.isfinite(w) for w in weights):
        raise FloatingPointError("policy update produced a non-finite weight")
    return replace(policy, weights=weights, version=policy.version + 1)


def epistemic_risk(outcomes: Sequence[Outcome]) -> float:
    """Fraction of the window that did not verify (FAIL or ABSTAIN)."""
    if not outcomes:
        raise ValueError("epistemic risk needs a non-empty window")
    return sum(o is not Outcome.PASS for o in outcomes) / len(outcomes)


# -- stochastic-approximation diagnostics ------------------------------------


def expected_delta(policy: Policy, config: VerifierConfig, beta: float = ABSTAIN_PENALTY) -> np.ndarray:
    """Closed-form mean update h(pi) for the Bernoulli-with-abstention verifier."""
    probs = np.asarray(policy.probabilities())
    per_tactic = np.array(
        [t.success_prob - t.fail_prob - beta * t.abstain_prob for t in config.tactics]
    )
    return probs * per_tactic


def sample_deltas(
    policy: Policy,
    config: VerifierConfig,
    n: int,
    rng: np.random.Generator,
    beta: float = ABSTAIN_PENALTY,
) -> np.ndarray:
    """Draw ``n`` update vectors at frozen ``policy``; shape ``(n, K)``."""
    probs = np.asarray(policy.probabilities())
    tactics = rng.choice(policy.k, size=n, p=probs / probs.sum())
    u = rng.random(n)
    abstain = np.array([t.abstain_prob for t in config.tactics])[tactics]
    success = np.array([t.success_prob for t in config.tactics])[tactics]
    step = np.where(u < abstain, -beta, np.where(u < abstain + success, 1.0, -1.0))
    out = np.zeros((n, policy.k))
    out[np.arange(n), tactics] = step
    return out


def estimate_mean_delta(
    policy: Policy,
    config: VerifierConfig,
    n_oracle: int,
    rng: np.random.Generator,
    beta: float = ABSTAIN_PENALTY,
) -> np.ndarray:
    return sample_deltas(policy, config, n_oracle, rng, beta).mean(axis=0)


def martingale_residual(
    policy: Policy,
    config: VerifierConfig,
    observed_delta: Sequence[float] | np.ndarray,
    n_oracle: int,
    rng: np.random.Generator,
    beta: float = ABSTAIN_PENALTY,
) -> np.ndarray:
    """``observed_delta - h_hat(policy)`` with ``h_hat`` from Monte Carlo.

    Diagnostic only. ``observed_delta`` may be a single vector or a batch
    of shape ``(n, K)``; the same estimate of h is subtracted from each.
    """
    if n_oracle < 1000:
        raise ValueError("n_oracle must be at least 1000")
    h_hat = estimate_mean_delta(policy, config, n_oracle, rng, beta)
    return np.asarray(observed_delta, dtype=float) - h_hat


# -- step-size schedules -----------------------------------------------------


class ScheduleKind(enum.Enum):
    CONSTANT = "CONSTANT"
    ROBBINS_MONRO = "ROBBINS_MONRO"


@dataclass(frozen=True)
class StepSchedule:
    """``CONSTANT``: eta_t = eta0. ``ROBBINS_MONRO``: eta_t = eta0 / (t + 1) ** alpha."""

    kind: ScheduleKind
    eta0: float
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if not (self.eta0 > 0 and math.isfinite(self.eta0)):
            raise ValueError("eta0 must be positive")
        if self.kind is ScheduleKind.ROBBINS_MONRO and not 0.5 < self.alpha <= 1.0:
            raise ValueError(f"Robbins-Monro decay exponent must lie in (0.5, 1], got {self.alpha}")

    @classmethod
    def constant(cls, eta: float) -> "StepSchedule":
        return cls(ScheduleKind.CONSTANT, eta)

    @classmethod
    def robbins_monro(cls, eta0: float, alpha: float = 1.0) -> "StepSchedule":
        return cls(ScheduleKind.ROBBINS_MONRO, eta0, alpha)

    def eta(self, t: int) -> float:
        if self.kind is ScheduleKind.CONSTANT:
            return self.eta0
        return self.eta0 / (t + 1) ** self.alpha


@dataclass(frozen=True)
class ScheduleReport:
    horizon: int
    sum_eta: float
    sum_eta_sq: float
    sum_diverges: bool
    square_summable: bool

    @property
    def robbins_monro(self) -> bool:
        return self.sum_diverges and self.square_summable


def schedule_check(schedule: StepSchedule, horizon: int) -> ScheduleReport:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    etas = [schedule.eta(t) for t in range(horizon)]
    if schedule.kind is ScheduleKind.CONSTANT:
        diverges, summable = True, False
    else:
        # p-series: sum t^-a diverges for a <= 1, sum t^-2a converges for 2a > 1
        diverges, summable = schedule.alpha <= 1.0, 2 * schedule.alpha > 1.0
    return ScheduleReport(
        horizon=horizon,
        sum_eta=math.fsum(etas),
        sum_eta_sq=math.fsum(e * e for e in etas),
        sum_diverges=diverges,
        square_summable=summable,
    )
