"""Append-only, hash-chained block ledger of verifier-accepted artifacts.

Each block carries a Merkle root over its sorted artifact ids; the head
folds block roots into a chain ``L_t = H("CHAIN:" || L_{t-1} || R_t)``
starting from 32 zero bytes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .hashcore import (
    CHAIN,
    LEAF,
    NODE,
    ZERO_DIGEST,
    canonicalize,
    check_digest,
    domain_hash,
    from_hex,
    parse_canonical,
    sha256,
    to_hex,
)
from .verifier import Outcome

EMPTY_ROOT = sha256(b"")


class LedgerError(ValueError):
    def __init__(self, reason: str, detail: str) -> None:
        super().__init__(f"{reason}: {detail}")
        self.reason = reason


@dataclass(frozen=True)
class ProofArtifact:
    id: str
    statement_hash: bytes
    status: Outcome
    payload_path: str = ""

    def __post_init__(self) -> None:
        if not self.id or not self.id.isascii():
            raise ValueError(f"artifact id must be non-empty ASCII: {self.id!r}")
        check_digest(self.statement_hash, "statement_hash")


@dataclass(frozen=True)
class Block:
    index: int
    artifact_ids: tuple[str, ...]
    merkle_root: bytes

    @property
    def empty(self) -> bool:
        return not self.artifact_ids

    def to_doc(self) -> dict:
        return {
            "artifact_ids": list(self.artifact_ids),
            "index": self.index,
            "merkle_root": to_hex(self.merkle_root),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Block":
        return cls(int(doc["index"]), tuple(doc["artifact_ids"]), from_hex(doc["merkle_root"]))


@dataclass(frozen=True)
class LedgerHead:
    index: int
    head: bytes

    def to_doc(self) -> dict:
        return {"head": to_hex(self.head), "index": self.index}

    @classmethod
    def from_doc(cls, doc: dict) -> "LedgerHead":
        return cls(int(doc["index"]), from_hex(doc["head"]))


GENESIS = LedgerHead(0, ZERO_DIGEST)


def leaf_hash(artifact_id: str) -> bytes:
    return domain_hash(LEAF, [sha256(artifact_id.encode("ascii"))])


def merkle_root(ids: Iterable[str]) -> bytes:
    """Root over the sorted ids; an unpaired node is promoted unchanged.

    An empty list yields ``sha256(b"")``, the empty-block sentinel.
    """
    ordered = sorted(ids)
    if len(set(ordered)) != len(ordered):
        raise LedgerError("DUPLICATE_ID", "artifact ids must be unique")
    if not ordered:
        return EMPTY_ROOT
    level = [leaf_hash(i) for i in ordered]
    while len(level) > 1:
        nxt = [domain_hash(NODE, level[i : i + 2]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def chain(prior: bytes, root: bytes) -> bytes:
    return domain_hash(CHAIN, [prior, root])


def append_block(artifacts: Sequence[ProofArtifact], prior: LedgerHead) -> tuple[Block, LedgerHead]:
    """Seal ``artifacts`` into the next block after ``prior``."""
    for a in artifacts:
        if a.status is not Outcome.PASS:
            raise LedgerError("NOT_ADMISSIBLE", f"{a.id} has status {a.status.value}")
    ids = tuple(sorted(a.id for a in artifacts))
    root = merkle_root(ids)
    block = Block(prior.index + 1, ids, root)
    return block, LedgerHead(block.index, chain(prior.head, root))


class Ledger:
    """Single-writer append-only ledger. No operation removes or edits a block."""

    def __init__(self) -> None:
        self._blocks: list[Block] = []
        self._statements: list[frozenset[bytes]] = []
        self._ids: set[str] = set()
        self._head = GENESIS

    @property
    def head(self) -> LedgerHead:
        return self._head

    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(self._blocks)

    def __len__(self) -> int:
        return len(self._blocks)

    def knowledge(self, t: int | None = None) -> frozenset[bytes]:
        """K_t: statement hashes admitted through block ``t`` (default: all)."""
        t = len(self._blocks) if t is None else t
        out: set[bytes] = set()
        for s in self._statements[:t]:
            out |= s
        return frozenset(out)

    def append(self, artifacts: Sequence[ProofArtifact]) -> tuple[Block, LedgerHead]:
        seen = [a.id for a in artifacts]
        dup = self._ids.intersection(seen) or (len(set(seen)) != len(seen))
        if dup:
            raise LedgerError("DUPLICATE_ID", f"artifact id already present: {dup}")
        block, head = append_block(artifacts, self._head)
        self._blocks.append(block)
        self._statements.append(frozenset(a.statement_hash for a in artifacts))
        self._ids.update(seen)
        self._head = head
        return block, head


# -- verification -------------------------------------------------------------


def _block_problem(block: Block, position: int) -> str | None:
    if block.index != position:
        return f"index {block.index} at position {position}"
    ids = list(block.artifact_ids)
    if not all(isinstance(i, str) and i and i.isascii() for i in ids):
        return "artifact id not ASCII"
    if ids != sorted(set(ids)):
        return "artifact ids not strictly ascending"
    if merkle_root(ids) != block.merkle_root:
        return "merkle root mismatch"
    return None


@dataclass
class ChainReport:
    match: bool
    recomputed: LedgerHead
    divergence: int | None = None
    reason: str = ""


def verify_chain(blocks: Sequence[Block], claimed: LedgerHead) -> ChainReport:
    head = GENESIS.head
    first_bad: tuple[int, str] | None = None
    for pos, block in enumerate(blocks, start=1):
        problem = _block_problem(block, pos)
        if problem and first_bad is None:
            first_bad = (pos, problem)
        head = chain(head, block.merkle_root)
    recomputed = LedgerHead(len(blocks), head)
    if first_bad is not None:
        return ChainReport(False, recomputed, *first_bad)
    if recomputed != claimed:
        return ChainReport(False, recomputed, len(blocks), "head")
    return ChainReport(True, recomputed)


@dataclass
class AuditReport:
    total: int
    verified: int
    head_match: bool
    divergences: list[dict] = field(default_factory=list)

    @property
    def coverage_pct(self) -> str:
        if self.total == 0:
            return "100.0"
        return f"{100 * self.verified / self.total:.1f}"

    @property
    def empty(self) -> bool:
        return self.total == 0

    @property
    def ok(self) -> bool:
        return self.verified == self.total and self.head_match

    def to_doc(self) -> dict:
        return {
            "coverage_pct": self.coverage_pct,
            "divergences": self.divergences,
            "flags": ["EMPTY"] if self.empty else [],
            "head_match": self.head_match,
            "total": self.total,
            "verified": self.verified,
        }


def audit(blocks: Sequence[Block], head: LedgerHead) -> AuditReport:
    """Mirror audit: re-verify every block on its own, then the chain fold."""
    report = AuditReport(total=len(blocks), verified=0, head_match=False)
    for pos, block in enumerate(blocks, start=1):
        problem = _block_problem(block, pos)
        if problem:
            report.divergences.append({"index": pos, "reason": problem})
        else:
            report.verified += 1
    fold = GENESIS.head
    for block in blocks:
        fold = chain(fold, block.merkle_root)
    report.head_match = LedgerHead(len(blocks), fold) == head
    if not report.head_match:
        report.divergences.append({"index": len(blocks), "reason": "head"})
    return report


# -- storage ------------------------------------------------------------------


def block_filename(index: int) -> str:
    return f"{index:06d}.json"


def write_ledger(directory: str | os.PathLike, ledger: Ledger) -> list[Path]:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for block in ledger.blocks:
        path = root / block_filename(block.index)
        path.write_bytes(canonicalize(block.to_doc()))
        written.append(path)
    head_path = root / "head.json"
    head_path.write_bytes(canonicalize(ledger.head.to_doc()))
    written.append(head_path)
    return written


def read_ledger(directory: str | os.PathLike) -> tuple[list[Block], LedgerHead]:
    """Load blocks in filename order. Malformed files raise ValueError."""
    root = Path(directory)
    names = sorted(p.name for p in root.glob("*.json") if p.name != "head.json")
    blocks = [Block.from_doc(parse_canonical((root / n).read_bytes())) for n in names]
    head = LedgerHead.from_doc(parse_canonical((root / "head.json").read_bytes()))
    return blocks, head
