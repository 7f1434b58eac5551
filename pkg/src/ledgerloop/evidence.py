"""Evidence pack emission and the fail-closed replay verifier.

Pack layout (all JSON canonical, JSONL = one canonical document per line)::

    manifest.json            written last, not listed in itself
    registry.json            commitment registry
    run.json                 run configuration
    governance_verdict.json
    summary.json
    blocks/<arm>/NNNNNN.json, blocks/<arm>/head.json
    attestations.jsonl  events.jsonl  metrics.jsonl  policy_trace.jsonl

``replay_verify`` runs eight ordered checks and stops at the first failure.
It only reads the pack.
"""

from __future__ import annotations

import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .attestation import EpochAttestation, ui_root
from .governance import (
    ARTIFACT_KINDS,
    CLAIM_LEVELS,
    L0,
    PREDICATES,
    ArtifactKind,
    CommitmentRegistry,
    evaluate_series,
)
from .harness import RunState, dp_series_from_metrics
from .hashcore import ZERO_DIGEST, canonicalize, from_hex, parse_canonical, sha256, to_hex
from .ledger import (
    AuditReport,
    Block,
    LedgerHead,
    audit,
    block_filename,
    read_ledger,
    verify_chain,
)

MANIFEST_VERSION = "1"
MANIFEST = "manifest.json"
REGISTRY = "registry.json"
RUN = "run.json"
VERDICT = "governance_verdict.json"
SUMMARY = "summary.json"
ATTESTATIONS = "attestations.jsonl"
EVENTS = "events.jsonl"
METRICS = "metrics.jsonl"
POLICY_TRACE = "policy_trace.jsonl"
REQUIRED_FILES = (REGISTRY, RUN, VERDICT, SUMMARY, ATTESTATIONS, EVENTS, METRICS, POLICY_TRACE)

SCOPE_DISCLAIMER = (
    "Replay verification covers artifact integrity, determinism, and governance "
    "binding only. It does not validate correctness, safety, alignment, or legal "
    "compliance."
)

CHECKS = (
    (1, "manifest"),
    (2, "artifact_kind"),
    (3, "registry_field"),
    (4, "registry_hash"),
    (5, "file_hashes"),
    (6, "ledger_chain"),
    (7, "attestations"),
    (8, "governance"),
)
CHECK_NAMES = dict(CHECKS)

# stands in for a block file that does not parse; index 0 never matches a position
_UNREADABLE = Block(0, (), ZERO_DIGEST)


class PackError(Exception):
    pass


def _jsonl(records: list[dict]) -> bytes:
    return b"".join(canonicalize(r) + b"\n" for r in records)


def _read_jsonl(path: Path) -> list[Any]:
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        raise PackError(f"{path.name}: missing trailing newline")
    return [parse_canonical(line) for line in data.split(b"\n")[:-1]]


def _sha256_file(path: Path) -> str:
    return sha256(path.read_bytes()).hex()


# -- emission -----------------------------------------------------------------


def emit_pack(state: RunState, out_dir: str | os.PathLike) -> dict:
    """Write the evidence pack for a completed run; returns the manifest."""
    if state.verdict is None:
        raise PackError("run has no governance verdict; was it completed?")
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()):
        raise PackError(f"output directory {out} is not empty")
    out.mkdir(parents=True, exist_ok=True)

    registry_bytes = state.registry.to_bytes()
    registry_digest = sha256(registry_bytes)
    arms = [a.name for a in state.config.arms]

    docs: dict[str, bytes] = {
        REGISTRY: registry_bytes,
        RUN: canonicalize(state.run_doc()),
        VERDICT: canonicalize(state.verdict.to_doc(registry_digest)),
        SUMMARY: canonicalize(state.summary()),
        ATTESTATIONS: _jsonl([a.to_doc() for a in state.attestations]),
        EVENTS: _jsonl(state.events),
        METRICS: _jsonl(state.metrics),
        POLICY_TRACE: _jsonl(state.policy_trace),
    }
    kinds: dict[str, str] = {}
    empty_blocks: list[str] = []
    heads: dict[str, str] = {}
    for arm in arms:
        ledger = state.ledgers[arm]
        for block in ledger.blocks:
            rel = f"blocks/{arm}/{block_filename(block.index)}"
            docs[rel] = canonicalize(block.to_doc())
            kinds[rel] = ArtifactKind.VERIFIED.value
            if block.empty:
                empty_blocks.append(rel)
        docs[f"blocks/{arm}/head.json"] = canonicalize(ledger.head.to_doc())
        heads[arm] = to_hex(ledger.head.head)

    files = []
    for rel in sorted(docs):
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(docs[rel])
        entry = {"path": rel, "sha256": sha256(docs[rel]).hex()}
        if rel in kinds:
            entry["artifact_kind"] = kinds[rel]
        files.append(entry)

    artifacts = [
        {"arm": r["arm"], "artifact_kind": r["artifact_kind"], "cycle": r["cycle"], "id": r["id"]}
        for r in state.events
        if "artifact_kind" in r
    ]
    manifest = {
        "artifacts": artifacts,
        "attestation_count": len(state.attestations),
        "commitment_registry_sha256": registry_digest.hex(),
        "empty_blocks": empty_blocks,
        "files": files,
        "governance_verdict_path": VERDICT,
        "ledger_head": heads,
        "seed": state.config.seed,
        "version": MANIFEST_VERSION,
    }
    (out / MANIFEST).write_bytes(canonicalize(manifest))
    return manifest


# -- replay verification --------------------------------------------------------


@dataclass
class CheckResult:
    number: int
    name: str
    ok: bool
    detail: str = ""


@dataclass
class VerifyReport:
    pack: str
    results: list[CheckResult] = field(default_factory=list)
    disclaimer: str = SCOPE_DISCLAIMER

    @property
    def ok(self) -> bool:
        return len(self.results) == len(CHECKS) and all(r.ok for r in self.results)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    @property
    def failed(self) -> CheckResult | None:
        return next((r for r in self.results if not r.ok), None)

    def to_doc(self) -> dict:
        failed = self.failed
        return {
            "checks": [
                {"check": r.number, "detail": r.detail, "name": r.name, "ok": r.ok} for r in self.results
            ],
            "disclaimer": self.disclaimer,
            "exit_code": self.exit_code,
            "failed_check": failed.name if failed else None,
            "pack": self.pack,
        }


class _Replay:
    """Holds what earlier checks established so later ones can use it."""

    def __init__(self, root: Path) -> None:
        self.root = root
        self.manifest: dict = {}
        self.run: dict = {}
        self.registry: CommitmentRegistry | None = None
        self.blocks: dict[str, list] = {}
        self.events: list[dict] = []
        self.metrics: list[dict] = []

    def _fail(self, msg: str) -> None:
        raise PackError(msg)

    # 1
    def manifest_schema(self) -> str:
        path = self.root / MANIFEST
        if not path.is_file():
            self._fail("manifest.json missing")
        m = parse_canonical(path.read_bytes())
        if not isinstance(m, dict):
            self._fail("manifest is not an object")
        expected = {
            "artifacts": list, "attestation_count": int, "empty_blocks": list, "files": list,
            "governance_verdict_path": str, "ledger_head": dict, "seed": int, "version": str,
        }
        for key, typ in expected.items():
            if key not in m:
                self._fail(f"manifest field {key!r} missing")
            if not isinstance(m[key], typ) or isinstance(m[key], bool):
                self._fail(f"manifest field {key!r} has wrong type")
        if m["version"] != MANIFEST_VERSION:
            self._fail(f"unsupported manifest version {m['version']!r}")
        paths = []
        for entry in m["files"]:
            if not isinstance(entry, dict) or not isinstance(entry.get("path"), str) or not isinstance(entry.get("sha256"), str):
                self._fail("malformed files entry")
            p = entry["path"]
            if p.startswith("/") or ".." in p.split("/") or p == MANIFEST:
                self._fail(f"illegal path {p!r}")
            paths.append(p)
        if len(set(paths)) != len(paths):
            self._fail("duplicate file paths")
        for entry in m["artifacts"]:
            if not isinstance(entry, dict) or not all(isinstance(entry.get(k), str) for k in ("id", "arm")):
                self._fail("malformed artifacts entry")
        self.manifest = m
        return f"{len(paths)} files, {len(m['artifacts'])} artifacts"

    # 2
    def artifact_kinds(self) -> str:
        for entry in self.manifest["artifacts"]:
            kind = entry.get("artifact_kind")
            if kind is None:
                self._fail(f"artifact {entry['id']} missing artifact_kind")
            if kind not in ARTIFACT_KINDS:
                self._fail(f"artifact {entry['id']} has invalid artifact_kind {kind!r}")
        for entry in self.manifest["files"]:
            if "artifact_kind" in entry and entry["artifact_kind"] not in ARTIFACT_KINDS:
                self._fail(f"file {entry['path']} has invalid artifact_kind {entry['artifact_kind']!r}")
        return "all artifact_kind values valid"

    # 3
    def registry_field(self) -> str:
        value = self.manifest.get("commitment_registry_sha256")
        if value is None:
            self._fail("commitment_registry_sha256 missing")
        from_hex(value)
        return value

    # 4
    def registry_hash(self) -> str:
        path = self.root / REGISTRY
        if not path.is_file():
            self._fail("registry.json missing")
        data = path.read_bytes()
        if sha256(data).hex() != self.manifest["commitment_registry_sha256"]:
            self._fail("registry file hash does not match commitment_registry_sha256")
        self.registry = CommitmentRegistry.from_doc(parse_canonical(data))
        return "registry bound"

    # 5
    def file_hashes(self) -> str:
        listed = {e["path"]: e["sha256"] for e in self.manifest["files"]}
        for req in REQUIRED_FILES:
            if req not in listed:
                self._fail(f"required file {req} not listed")
        for rel, digest in listed.items():
            path = self.root / rel
            if not path.is_file():
                self._fail(f"listed file {rel} missing")
            if _sha256_file(path) != digest:
                self._fail(f"hash mismatch for {rel}")
        on_disk = {
            p.relative_to(self.root).as_posix() for p in self.root.rglob("*") if p.is_file()
        } - {MANIFEST}
        extra = sorted(on_disk - set(listed))
        if extra:
            self._fail(f"unlisted file(s) in pack: {extra[:3]}")
        kinds = {e["path"]: e.get("artifact_kind") for e in self.manifest["files"]}
        for rel, kind in kinds.items():
            if rel.startswith("blocks/") and not rel.endswith("head.json") and kind != ArtifactKind.VERIFIED.value:
                self._fail(f"block file {rel} not tagged VERIFIED")
        return f"{len(listed)} file hashes match"

    # 6
    def ledger_chain(self) -> str:
        self.run = parse_canonical((self.root / RUN).read_bytes())
        self.events = _read_jsonl(self.root / EVENTS)
        arms = [a["name"] for a in self.run["arms"]]
        if set(self.manifest["ledger_head"]) != set(arms):
            self._fail("ledger_head arms differ from run arms")
        verified: dict[str, set[str]] = defaultdict(set)
        others: dict[str, set[str]] = defaultdict(set)
        for a in self.manifest["artifacts"]:
            (verified if a["artifact_kind"] == "VERIFIED" else others)[a["arm"]].add(a["id"])
        event_kinds = {(r["id"], r["artifact_kind"]) for r in self.events if "artifact_kind" in r}
        manifest_kinds = {(a["id"], a["artifact_kind"]) for a in self.manifest["artifacts"]}
        if event_kinds != manifest_kinds:
            self._fail("manifest artifacts differ from events.jsonl")
        empty = []
        for arm in arms:
            blocks, head = read_ledger(self.root / "blocks" / arm)
            report = verify_chain(blocks, head)
            if not report.match:
                self._fail(f"arm {arm}: chain diverges at block {report.divergence} ({report.reason})")
            if to_hex(head.head) != self.manifest["ledger_head"][arm]:
                self._fail(f"arm {arm}: head differs from manifest ledger_head")
            if len(blocks) != self.run["cycles"]:
                self._fail(f"arm {arm}: {len(blocks)} blocks for {self.run['cycles']} cycles")
            in_blocks = {i for b in blocks for i in b.artifact_ids}
            if in_blocks & others[arm]:
                self._fail(f"arm {arm}: non-VERIFIED artifact inside a block")
            if in_blocks != verified[arm]:
                self._fail(f"arm {arm}: block contents differ from VERIFIED artifacts")
            empty += [f"blocks/{arm}/{block_filename(b.index)}" for b in blocks if b.empty]
            self.blocks[arm] = blocks
        if sorted(empty) != sorted(self.manifest["empty_blocks"]):
            self._fail("empty_blocks flag list does not match ledger")
        return f"{len(arms)} chain(s) replay to recorded heads"

    # 7
    def attestations(self) -> str:
        records = [EpochAttestation.from_doc(d) for d in _read_jsonl(self.root / ATTESTATIONS)]
        if len(records) != self.manifest["attestation_count"]:
            self._fail("attestation_count does not match attestations.jsonl")
        by_epoch = defaultdict(list)
        for r in self.events:
            by_epoch[(r["arm"], r["cycle"])].append(r)
        expected = [(arm, t + 1) for arm, blocks in self.blocks.items() for t in range(len(blocks))]
        if [(a.arm, a.epoch) for a in records] != expected:
            self._fail("attestations do not cover exactly one epoch per (arm, cycle)")
        self.metrics = _read_jsonl(self.root / METRICS)
        h_by_epoch = {(m["arm"], m["cycle"]): m["attestation"] for m in self.metrics}
        for att in records:
            if not att.recomputes():
                self._fail(f"H_t does not recompute for {att.arm} epoch {att.epoch}")
            if att.reasoning_root != self.blocks[att.arm][att.epoch - 1].merkle_root:
                self._fail(f"r_t differs from block root for {att.arm} epoch {att.epoch}")
            if att.ui_root != ui_root(by_epoch[(att.arm, att.epoch)]):
                self._fail(f"u_t does not recompute for {att.arm} epoch {att.epoch}")
            if h_by_epoch.get((att.arm, att.epoch)) != to_hex(att.commitment):
                self._fail(f"metrics attestation differs for {att.arm} epoch {att.epoch}")
        return f"{len(records)} attestations recompute"

    # 8
    def governance(self) -> str:
        rel = self.manifest["governance_verdict_path"]
        listed = {e["path"] for e in self.manifest["files"]}
        if rel not in listed:
            self._fail(f"verdict {rel} not hash-listed")
        verdict = parse_canonical((self.root / rel).read_bytes())
        fired = verdict["fired"]
        if not set(fired) <= set(PREDICATES) or fired != sorted(set(fired)):
            self._fail(f"invalid fired predicate set {fired!r}")
        if verdict["claim_level"] not in CLAIM_LEVELS:
            self._fail(f"invalid claim level {verdict['claim_level']!r}")
        if fired and verdict["claim_level"] != L0:
            self._fail("predicates fired but claim level is not L0")
        if verdict["registry_sha256"] != self.manifest["commitment_registry_sha256"]:
            self._fail("verdict bound to a different registry")
        if self.run["seed"] != self.manifest["seed"]:
            self._fail("manifest seed differs from run.json")
        arms = [a["name"] for a in self.run["arms"]]
        m = self.run["events_per_cycle"]
        counts = defaultdict(lambda: [0, 0, 0])
        slot = {"PASS": 0, "FAIL": 1, "ABSTAIN": 2}
        for r in self.events:
            if r["type"] == "event":
                counts[(r["arm"], r["cycle"])][slot[r["outcome"]]] += 1
        for row in self.metrics:
            got = [row["pass_count"], row["fail_count"], row["abstain_count"]]
            if counts[(row["arm"], row["cycle"])] != got or sum(got) != m:
                self._fail(f"metrics counts disagree with events for {row['arm']} cycle {row['cycle']}")
        series = dp_series_from_metrics(self.metrics, arms, m, self.registry.decision_threshold)
        replayed = evaluate_series(series, self.registry)
        if set(fired) != replayed.fired or verdict["claim_level"] != replayed.claim_level:
            self._fail(
                f"verdict {fired}/{verdict['claim_level']} does not replay "
                f"(expected {sorted(replayed.fired)}/{replayed.claim_level})"
            )
        return f"claim level {verdict['claim_level']}, fired {fired}"


def replay_verify(pack_dir: str | os.PathLike) -> VerifyReport:
    root = Path(pack_dir)
    report = VerifyReport(pack=str(root))
    replay = _Replay(root)
    steps: list[Callable[[], str]] = [
        replay.manifest_schema,
        replay.artifact_kinds,
        replay.registry_field,
        replay.registry_hash,
        replay.file_hashes,
        replay.ledger_chain,
        replay.attestations,
        replay.governance,
    ]
    for (number, name), step in zip(CHECKS, steps):
        try:
            detail = step()
        except Exception as exc:  # fail closed on anything unexpected
            report.results.append(CheckResult(number, name, False, f"{type(exc).__name__}: {exc}"))
            break
        report.results.append(CheckResult(number, name, True, detail))
    return report


def directory_digest(root: str | os.PathLike) -> str:
    """Hash of every file path and content under ``root``, order-independent."""
    root = Path(root)
    listing = [
        [p.relative_to(root).as_posix(), _sha256_file(p)]
        for p in sorted(root.rglob("*"))
        if p.is_file()
    ]
    return sha256(canonicalize(listing)).hex()


def audit_pack(pack_dir: str | os.PathLike) -> dict[str, AuditReport]:
    """Mirror audit of every arm's ledger in a pack.

    An unreadable block file counts as an unverified block; an unreadable
    head never matches.
    """
    reports = {}
    base = Path(pack_dir) / "blocks"
    if not base.is_dir():
        raise PackError(f"no blocks/ directory in {pack_dir}")
    for arm_dir in sorted(p for p in base.iterdir() if p.is_dir()):
        blocks = []
        for path in sorted(p for p in arm_dir.glob("*.json") if p.name != "head.json"):
            try:
                blocks.append(Block.from_doc(parse_canonical(path.read_bytes())))
            except Exception:
                blocks.append(_UNREADABLE)
        try:
            head = LedgerHead.from_doc(parse_canonical((arm_dir / "head.json").read_bytes()))
        except Exception:
            head = LedgerHead(-1, ZERO_DIGEST)
        reports[arm_dir.name] = audit(blocks, head)
    return reports
