"""Frozen commitment registry, fail-closed predicates, claim capping.

Two predicates guard a run:

* ``F5.2`` variance ratio: population variance of each treatment arm's
  delta-p series over the baseline's must stay within ``[1/rho, rho]``.
* ``F5.3`` windowed drift: means of adjacent disjoint windows of ``W``
  cycles must not differ by more than ``delta``.

Both fire on insufficient evidence. Any firing caps the claim level at L0.
All arithmetic is exact (``Fraction``).
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .hashcore import canonicalize, fixed, parse_fixed, sha256, to_hex
from .verifier import Outcome

F52 = "F5.2"
F53 = "F5.3"
PREDICATES = (F52, F53)

L0 = "L0"
L1 = "L1"
CLAIM_LEVELS = (L0, L1)


class ArtifactKind(enum.Enum):
    VERIFIED = "VERIFIED"
    REFUTED = "REFUTED"
    ABSTAINED = "ABSTAINED"
    INADMISSIBLE_UPDATE = "INADMISSIBLE_UPDATE"


ARTIFACT_KINDS = frozenset(k.value for k in ArtifactKind)


def classify_artifact(outcome: Outcome, blocked_update: bool = False) -> ArtifactKind:
    if blocked_update:
        return ArtifactKind.INADMISSIBLE_UPDATE
    return {
        Outcome.PASS: ArtifactKind.VERIFIED,
        Outcome.FAIL: ArtifactKind.REFUTED,
        Outcome.ABSTAIN: ArtifactKind.ABSTAINED,
    }[outcome]


# -- registry -----------------------------------------------------------------

DEFAULT_CONSTRAINTS: dict[str, Any] = {
    "abstain_penalty": "0.500000",
    "claim_ceiling": L1,
    "decision_threshold": "0.500000",
    "drift_tolerance": "0.150000",
    "drift_window": 10,
    "lr": {"baseline": "0.000000", "treatment": "0.100000"},
    "lr_ceiling": "0.100000",
    "variance_ratio_max": "4.000000",
    "weight_clip": 10,
}

REQUIRED_CONSTRAINTS = frozenset(DEFAULT_CONSTRAINTS)


class RegistryError(ValueError):
    pass


@dataclass(frozen=True)
class CommitmentRegistry:
    version: str
    constraints: Mapping[str, Any]

    def __post_init__(self) -> None:
        missing = REQUIRED_CONSTRAINTS - set(self.constraints)
        if missing:
            raise RegistryError(f"registry missing constraints: {sorted(missing)}")
        if self.constraints["claim_ceiling"] not in CLAIM_LEVELS:
            raise RegistryError(f"bad claim_ceiling {self.constraints['claim_ceiling']!r}")
        if self.variance_ratio_max <= 1:
            raise RegistryError("variance_ratio_max must exceed 1")
        if self.drift_window < 2:
            raise RegistryError("drift_window must be at least 2")
        # freeze a private copy; canonical bytes double as the identity
        object.__setattr__(self, "constraints", json.loads(canonicalize(dict(self.constraints))))

    @classmethod
    def default(cls) -> "CommitmentRegistry":
        return cls("gcr-1.0", DEFAULT_CONSTRAINTS)

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "CommitmentRegistry":
        try:
            return cls(str(doc["version"]), doc["constraints"])
        except (KeyError, TypeError) as exc:
            raise RegistryError(f"malformed registry: {exc}") from None

    @classmethod
    def load(cls, path: str | os.PathLike) -> "CommitmentRegistry":
        p = Path(path)
        if not p.is_file():
            raise RegistryError(f"registry not found: {p}")
        return cls.from_doc(json.loads(p.read_bytes()))

    def to_doc(self) -> dict:
        return {"constraints": dict(self.constraints), "version": self.version}

    def to_bytes(self) -> bytes:
        return canonicalize(self.to_doc())

    def _num(self, key: str) -> Fraction:
        return parse_fixed(self.constraints[key])

    @property
    def variance_ratio_max(self) -> Fraction:
        return self._num("variance_ratio_max")

    @property
    def drift_window(self) -> int:
        return int(self.constraints["drift_window"])

    @property
    def drift_tolerance(self) -> Fraction:
        return self._num("drift_tolerance")

    @property
    def decision_threshold(self) -> Fraction:
        return self._num("decision_threshold")

    @property
    def abstain_penalty(self) -> Fraction:
        return self._num("abstain_penalty")

    @property
    def lr_ceiling(self) -> Fraction:
        return self._num("lr_ceiling")

    @property
    def weight_clip(self) -> int:
        return int(self.constraints["weight_clip"])

    @property
    def claim_ceiling(self) -> str:
        return self.constraints["claim_ceiling"]

    def lr(self, arm: str) -> Fraction:
        return parse_fixed(self.constraints["lr"][arm])


def registry_hash(registry: CommitmentRegistry | Mapping[str, Any]) -> bytes:
    doc = registry.to_doc() if isinstance(registry, CommitmentRegistry) else registry
    return sha256(canonicalize(doc))


# -- predicates ---------------------------------------------------------------


def _exact(xs: Iterable[Any]) -> list[Fraction]:
    out = []
    for x in xs:
        if isinstance(x, str):
            out.append(parse_fixed(x))
        elif isinstance(x, float):
            out.append(Fraction(repr(x)))
        else:
            out.append(Fraction(x))
    return out


def mean(xs: Sequence[Fraction]) -> Fraction:
    return sum(xs, Fraction(0)) / len(xs)


def population_variance(xs: Sequence[Any]) -> Fraction:
    vals = _exact(xs)
    if not vals:
        raise ValueError("variance of an empty series")
    m = mean(vals)
    return sum(((x - m) ** 2 for x in vals), Fraction(0)) / len(vals)


def variance_ratio(baseline: Sequence[Any], treatment: Sequence[Any]) -> Fraction | None:
    """Var(treatment) / Var(baseline); None when the baseline variance is zero."""
    vb = population_variance(baseline)
    vt = population_variance(treatment)
    if vb == 0:
        return None if vt else Fraction(1)
    return vt / vb


def f52_variance_ratio(baseline: Sequence[Any], treatment: Sequence[Any], rho_max: Any) -> bool:
    rho_max = _exact([rho_max])[0]
    if rho_max <= 1:
        raise ValueError("rho_max must exceed 1")
    if len(baseline) < 2 or len(treatment) < 2:
        return True
    rho = variance_ratio(baseline, treatment)
    if rho is None:
        return True
    return rho > rho_max or rho < 1 / rho_max


def window_drifts(dp: Sequence[Any], window: int) -> list[Fraction]:
    vals = _exact(dp)
    means = [mean(vals[i : i + window]) for i in range(0, len(vals) - window + 1, window)]
    return [abs(b - a) for a, b in zip(means, means[1:])]


def f53_windowed_drift(dp: Sequence[Any], window: int, tolerance: Any) -> bool:
    if window < 2:
        raise ValueError("window must be at least 2")
    if len(dp) < 2 * window:
        return True
    tol = _exact([tolerance])[0]
    return any(d > tol for d in window_drifts(dp, window))


# -- verdict ------------------------------------------------------------------


@dataclass(frozen=True)
class GovernanceVerdict:
    fired: frozenset[str]
    claim_level: str
    details: dict = field(default_factory=dict, compare=False)

    def to_doc(self, registry_sha256: bytes) -> dict:
        return {
            "claim_level": self.claim_level,
            "details": self.details,
            "fired": sorted(self.fired),
            "registry_sha256": to_hex(registry_sha256),
        }


def evaluate(fired: Iterable[str], ceiling: str = L1, details: dict | None = None) -> GovernanceVerdict:
    fired = frozenset(fired)
    unknown = fired - set(PREDICATES)
    if unknown:
        raise ValueError(f"unknown predicate ids: {sorted(unknown)}")
    level = L0 if fired or ceiling == L0 else L1
    return GovernanceVerdict(fired, level, details or {})


def evaluate_series(
    dp_by_arm: Mapping[str, Sequence[Any]], registry: CommitmentRegistry
) -> GovernanceVerdict:
    """Run F5.2 (each arm vs the first arm) and F5.3 (every arm)."""
    arms = list(dp_by_arm)
    if not arms:
        return evaluate(PREDICATES, registry.claim_ceiling, {"reason": "no arms"})
    base = arms[0]
    fired: set[str] = set()
    details: dict[str, Any] = {F52: {}, F53: {}}
    for arm in arms[1:]:
        hit = f52_variance_ratio(dp_by_arm[base], dp_by_arm[arm], registry.variance_ratio_max)
        ratio = None
        if len(dp_by_arm[base]) >= 1 and len(dp_by_arm[arm]) >= 1:
            ratio = variance_ratio(dp_by_arm[base], dp_by_arm[arm])
        details[F52][arm] = {"fired": hit, "ratio": None if ratio is None else fixed(ratio)}
        fired |= {F52} if hit else set()
    if len(arms) < 2:
        # nothing to compare against
        fired.add(F52)
        details[F52]["reason"] = "single arm"
    for arm in arms:
        series = dp_by_arm[arm]
        hit = f53_windowed_drift(series, registry.drift_window, registry.drift_tolerance)
        drifts = window_drifts(series, registry.drift_window) if len(series) >= 2 * registry.drift_window else []
        details[F53][arm] = {
            "fired": hit,
            "max_drift": fixed(max(drifts)) if drifts else None,
        }
        fired |= {F53} if hit else set()
    return evaluate(fired, registry.claim_ceiling, details)
