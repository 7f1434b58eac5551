"""Phase-I synthetic verifier: maps a reasoning event to PASS/FAIL/ABSTAIN."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Sequence

from .streams import Stream


class Outcome(enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    ABSTAIN = "ABSTAIN"

    @property
    def symbol(self) -> int | None:
        """1 / 0 / None (bottom), the ternary verification value."""
        return {"PASS": 1, "FAIL": 0, "ABSTAIN": None}[self.value]


@dataclass(frozen=True)
class Tactic:
    success_prob: float
    abstain_prob: float

    def __post_init__(self) -> None:
        for name in ("success_prob", "abstain_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.success_prob + self.abstain_prob > 1.0 + 1e-12:
            raise ValueError("success_prob + abstain_prob must not exceed 1")

    @property
    def fail_prob(self) -> float:
        return max(0.0, 1.0 - self.success_prob - self.abstain_prob)


@dataclass(frozen=True)
class VerifierConfig:
    tactics: tuple[Tactic, ...]
    budget: int = 64
    stream: str = "verifier"

    def __post_init__(self) -> None:
        object.__setattr__(self, "tactics", tuple(self.tactics))
        if len(self.tactics) < 2:
            raise ValueError("need at least two tactics")
        if self.budget < 1:
            raise ValueError("budget must be positive")

    @property
    def k(self) -> int:
        return len(self.tactics)

    @classmethod
    def from_probs(
        cls, success: Sequence[float], abstain: Sequence[float], **kw: Any
    ) -> "VerifierConfig":
        if len(success) != len(abstain):
            raise ValueError("success and abstain lists differ in length")
        return cls(tuple(Tactic(p, a) for p, a in zip(success, abstain)), **kw)

    def to_doc(self) -> dict:
        return {
            "budget": self.budget,
            "stream": self.stream,
            # stored as repr strings so the document stays integer/string only
            "tactics": [
                {"abstain_prob": repr(t.abstain_prob), "success_prob": repr(t.success_prob)}
                for t in self.tactics
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "VerifierConfig":
        return cls(
            tuple(Tactic(float(t["success_prob"]), float(t["abstain_prob"])) for t in doc["tactics"]),
            budget=int(doc["budget"]),
            stream=doc["stream"],
        )


DEFAULT_VERIFIER = VerifierConfig.from_probs(
    success=(0.40, 0.47, 0.53, 0.60),
    abstain=(0.10, 0.10, 0.10, 0.10),
)


@dataclass(frozen=True)
class ReasoningEvent:
    cycle: int
    index: int
    tactic: int
    statement_hash: bytes
    descriptor: dict = field(default_factory=dict, compare=False)


def outcome_for_draw(u: float, tactic: Tactic) -> Outcome:
    if u < tactic.abstain_prob:
        return Outcome.ABSTAIN
    if u < tactic.abstain_prob + tactic.success_prob:
        return Outcome.PASS
    return Outcome.FAIL


def verify(event: ReasoningEvent, config: VerifierConfig, stream: Stream) -> Outcome:
    """Consume exactly one draw keyed by ``(event.cycle, event.index)``."""
    if not 0 <= event.tactic < config.k:
        raise ValueError(f"tactic {event.tactic} out of range [0, {config.k})")
    u = stream.uniform(event.cycle, event.index)
    return outcome_for_draw(u, config.tactics[event.tactic])


def admissible(outcome: Outcome) -> bool:
    return outcome is Outcome.PASS
