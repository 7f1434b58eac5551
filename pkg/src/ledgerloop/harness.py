"""Two-arm feedback-cycle runner.

Per arm and cycle: sample tactics from the policy, pass each event through
the curriculum gate and the verifier, seal PASS artifacts into a block,
attest the epoch, then (lr > 0) apply one policy update per event. After
all arms finish, the governance predicates produce the run verdict.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Mapping, Sequence

from . import rfl
from .attestation import EpochAttestation, attest, reasoning_root, ui_root
from .governance import (
    CommitmentRegistry,
    GovernanceVerdict,
    RegistryError,
    classify_artifact,
    evaluate_series,
    population_variance,
)
from .hashcore import canonicalize, fixed, sha256, to_hex
from .ledger import Ledger, ProofArtifact
from .streams import Stream
from .verifier import DEFAULT_VERIFIER, Outcome, ReasoningEvent, VerifierConfig, verify

log = logging.getLogger(__name__)

RUN_FORMAT = "1"


class Mode(enum.Enum):
    SHADOW = "SHADOW"
    ENFORCE = "ENFORCE"


@dataclass(frozen=True)
class Arm:
    name: str
    lr: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "lr", Fraction(self.lr))
        if self.lr < 0:
            raise ValueError(f"arm {self.name}: lr must be non-negative")
        if not self.name or not self.name.isascii() or "/" in self.name:
            raise ValueError(f"bad arm name {self.name!r}")


DEFAULT_ARMS = (Arm("baseline", Fraction(0)), Arm("treatment", Fraction(1, 10)))


class CurriculumGate:
    """Selects the verifier config for the active slice; otherwise pass-through.

    ``admit`` is a hook: an event it refuses never reaches the verifier and
    is recorded as an abstention.
    """

    def __init__(
        self,
        slices: Mapping[str, VerifierConfig] | None = None,
        active: str = "pl-default",
        admit: Callable[[ReasoningEvent], bool] | None = None,
    ) -> None:
        self.slices = dict(slices or {"pl-default": DEFAULT_VERIFIER})
        if active not in self.slices:
            raise KeyError(f"unknown curriculum slice {active!r}")
        self.active = active
        self.admit = admit or (lambda event: True)

    @property
    def config(self) -> VerifierConfig:
        return self.slices[self.active]


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    cycles: int = 100
    events_per_cycle: int = 20
    arms: tuple[Arm, ...] = DEFAULT_ARMS
    mode: Mode = Mode.SHADOW

    def __post_init__(self) -> None:
        object.__setattr__(self, "arms", tuple(self.arms))
        if self.cycles < 1 or self.events_per_cycle < 1:
            raise ValueError("cycles and events_per_cycle must be at least 1")
        names = [a.name for a in self.arms]
        if not names or len(set(names)) != len(names):
            raise ValueError("arm names must be unique and non-empty")


@dataclass
class RunState:
    config: RunConfig
    registry: CommitmentRegistry
    verifier: VerifierConfig
    slice: str
    ledgers: dict[str, Ledger] = field(default_factory=dict)
    attestations: list[EpochAttestation] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    policy_trace: list[dict] = field(default_factory=list)
    metrics: list[dict] = field(default_factory=list)
    verdict: GovernanceVerdict | None = None

    def dp_series(self) -> dict[str, list[Fraction]]:
        return dp_series_from_metrics(
            self.metrics, [a.name for a in self.config.arms], self.config.events_per_cycle,
            self.registry.decision_threshold,
        )

    def run_doc(self) -> dict:
        return {
            "arms": [{"lr": fixed(a.lr), "name": a.name} for a in self.config.arms],
            "cycles": self.config.cycles,
            "events_per_cycle": self.config.events_per_cycle,
            "format": RUN_FORMAT,
            "mode": self.config.mode.value,
            "seed": self.config.seed,
            "slice": self.slice,
            "verifier": self.verifier.to_doc(),
        }

    def summary(self) -> dict:
        series = self.dp_series()
        arms = {}
        for arm in self.config.arms:
            rows = [r for r in self.metrics if r["arm"] == arm.name]
            total = len(rows) * self.config.events_per_cycle
            counts = {
                k: sum(r[f"{k}_count"] for r in rows) for k in ("pass", "fail", "abstain")
            }
            arms[arm.name] = {
                "abstention_rate": fixed(Fraction(counts["abstain"], total)),
                "cycles": len(rows),
                "delta_p_variance": arm_variance(series[arm.name]),
                "lr": fixed(arm.lr),
                "mean_delta_p": fixed(sum(series[arm.name], Fraction(0)) / len(rows)),
                "pass_rate": fixed(Fraction(counts["pass"], total)),
            }
        verdict = self.verdict
        return {
            "arms": arms,
            "claim_level": verdict.claim_level if verdict else None,
            "fired": sorted(verdict.fired) if verdict else [],
        }


def delta_p(pass_count: int, m: int, theta: Fraction | str) -> str:
    """``pass_count / m - theta`` as a six-digit fixed-point string."""
    return fixed(exact_delta_p(pass_count, m, theta))


def exact_delta_p(pass_count: int, m: int, theta: Fraction | str) -> Fraction:
    if m < 1 or not 0 <= pass_count <= m:
        raise ValueError(f"need 0 <= pass_count <= m and m >= 1, got {pass_count}/{m}")
    theta = Fraction(theta)
    return Fraction(pass_count, m) - theta


def arm_variance(dp: Sequence[Any]) -> str:
    if len(dp) < 1:
        raise ValueError("variance needs at least one value")
    return fixed(population_variance(dp))


def dp_series_from_metrics(
    metrics: Sequence[Mapping[str, Any]], arms: Sequence[str], m: int, theta: Fraction
) -> dict[str, list[Fraction]]:
    out: dict[str, list[Fraction]] = {a: [] for a in arms}
    for row in sorted(metrics, key=lambda r: (arms.index(r["arm"]), r["cycle"])):
        out[row["arm"]].append(exact_delta_p(row["pass_count"], m, theta))
    return out


def event_id(arm: str, cycle: int, index: int) -> str:
    return f"{arm}:{cycle:06d}:{index:04d}"


def _check_registry(config: RunConfig, registry: CommitmentRegistry) -> None:
    for arm in config.arms:
        try:
            committed = registry.lr(arm.name)
        except KeyError:
            raise RegistryError(f"registry has no lr commitment for arm {arm.name!r}") from None
        if committed != arm.lr:
            raise RegistryError(
                f"arm {arm.name!r} lr {fixed(arm.lr)} differs from registry {fixed(committed)}"
            )


def _run_arm(state: RunState, arm: Arm, gate: CurriculumGate) -> None:
    cfg, reg, run = state.verifier, state.registry, state.config
    policy_stream = Stream(run.seed, f"policy/{arm.name}")
    verifier_stream = Stream(run.seed, cfg.stream)
    eta = float(arm.lr)
    beta = float(reg.abstain_penalty)
    clip = float(reg.weight_clip)
    blocked = arm.lr > 0 and arm.lr > reg.lr_ceiling
    ledger = state.ledgers.setdefault(arm.name, Ledger())
    policy = rfl.Policy.zeros(cfg.k)
    m = run.events_per_cycle

    for cycle in range(1, run.cycles + 1):
        records: list[dict] = []
        admitted: list[ProofArtifact] = []
        steps: list[tuple[Outcome, int]] = []
        for i in range(m):
            k, _ = rfl.select_tactic(policy, policy_stream.uniform(cycle, i))
            descriptor = {"arm": arm.name, "cycle": cycle, "event": i, "slice": gate.active, "tactic": k}
            statement = sha256(canonicalize(descriptor))
            event = ReasoningEvent(cycle, i, k, statement, descriptor)
            gated = not gate.admit(event)
            outcome = Outcome.ABSTAIN if gated else verify(event, cfg, verifier_stream)
            eid = event_id(arm.name, cycle, i)
            record = {
                "arm": arm.name,
                "artifact_kind": classify_artifact(outcome).value,
                "cycle": cycle,
                "event": i,
                "id": eid,
                "outcome": outcome.value,
                "statement_hash": to_hex(statement),
                "tactic": k,
                "type": "event",
            }
            if gated:
                record["gated"] = True
            records.append(record)
            steps.append((outcome, k))
            if outcome is Outcome.PASS:
                admitted.append(ProofArtifact(eid, statement, outcome, "events.jsonl"))

        block, _ = ledger.append(admitted)

        if eta > 0 and blocked:
            for (outcome, k), rec in zip(steps, list(records)):
                base = {"arm": arm.name, "constraint": "lr_ceiling", "cycle": cycle, "event": rec["event"],
                        "registry_version": reg.version}
                if run.mode is Mode.ENFORCE:
                    records.append(base | {
                        "artifact_kind": classify_artifact(outcome, blocked_update=True).value,
                        "id": f"{rec['id']}:update",
                        "type": "update",
                    })
                else:
                    records.append(base | {"id": f"{rec['id']}:notice", "type": "would_block"})

        att = attest(reasoning_root([block]), ui_root(records), cycle, arm.name)
        state.attestations.append(att)
        state.events.extend(records)

        if eta > 0 and not (blocked and run.mode is Mode.ENFORCE):
            for outcome, k in steps:
                policy = rfl.update(policy, eta, rfl.phi(outcome, k, policy, beta), clip)

        counts = {o: sum(1 for out, _ in steps if out is o) for o in Outcome}
        state.metrics.append({
            "abstain_count": counts[Outcome.ABSTAIN],
            "arm": arm.name,
            "attestation": to_hex(att.commitment),
            "cycle": cycle,
            "delta_p": delta_p(counts[Outcome.PASS], m, reg.decision_threshold),
            "epistemic_risk": fixed(Fraction(m - counts[Outcome.PASS], m)),
            "fail_count": counts[Outcome.FAIL],
            "pass_count": counts[Outcome.PASS],
        })
        state.policy_trace.append({"arm": arm.name, "cycle": cycle} | policy.to_doc())


def run(
    config: RunConfig,
    registry: CommitmentRegistry | None,
    gate: CurriculumGate | None = None,
) -> RunState:
    """Execute every arm for ``config.cycles`` cycles and evaluate governance.

    A missing registry aborts before any cycle. In SHADOW mode a fired
    predicate never shortens the run.
    """
    if registry is None:
        raise RegistryError("no commitment registry loaded; refusing to run")
    _check_registry(config, registry)
    gate = gate or CurriculumGate()
    state = RunState(config, registry, gate.config, gate.active)
    for arm in config.arms:
        log.info("arm %s: lr=%s, %d cycles x %d events", arm.name, fixed(arm.lr),
                 config.cycles, config.events_per_cycle)
        _run_arm(state, arm, gate)
    state.verdict = evaluate_series(state.dp_series(), registry)
    log.info("verdict %s fired=%s", state.verdict.claim_level, sorted(state.verdict.fired))
    return state


def registry_for(arms: Sequence[Arm], base: CommitmentRegistry | None = None) -> CommitmentRegistry:
    """Copy of ``base`` whose lr commitments match ``arms``."""
    base = base or CommitmentRegistry.default()
    constraints = dict(base.constraints)
    constraints["lr"] = {a.name: fixed(a.lr) for a in arms}
    return CommitmentRegistry(base.version, constraints)
