"""Per-epoch dual-root commitment ``H_t = H("EPOCH:" || r_t || u_t)``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from .hashcore import (
    DIGEST_SIZE,
    EPOCH,
    UIROOT,
    canonicalize,
    check_digest,
    domain_hash,
    from_hex,
    sha256,
    to_hex,
)
from .ledger import Block, merkle_root


@dataclass(frozen=True)
class EpochAttestation:
    epoch: int
    reasoning_root: bytes
    ui_root: bytes
    commitment: bytes
    arm: str = ""

    def preimage(self) -> bytes:
        return EPOCH + self.reasoning_root + self.ui_root

    def recomputes(self) -> bool:
        return domain_hash(EPOCH, [self.reasoning_root, self.ui_root]) == self.commitment

    def to_doc(self) -> dict:
        return {
            "arm": self.arm,
            "epoch": self.epoch,
            "h": to_hex(self.commitment),
            "r": to_hex(self.reasoning_root),
            "u": to_hex(self.ui_root),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "EpochAttestation":
        return cls(
            epoch=int(doc["epoch"]),
            reasoning_root=from_hex(doc["r"]),
            ui_root=from_hex(doc["u"]),
            commitment=from_hex(doc["h"]),
            arm=doc["arm"],
        )


def split_preimage(data: bytes) -> tuple[bytes, bytes]:
    """Inverse of :meth:`EpochAttestation.preimage`."""
    if len(data) != len(EPOCH) + 2 * DIGEST_SIZE or not data.startswith(EPOCH):
        raise ValueError("not an EPOCH preimage")
    body = data[len(EPOCH) :]
    return body[:DIGEST_SIZE], body[DIGEST_SIZE:]


def reasoning_root(epoch_blocks: Sequence[Block]) -> bytes:
    ids = [i for b in epoch_blocks for i in b.artifact_ids]
    return merkle_root(ids)


def ui_root(event_log: Sequence[Any]) -> bytes:
    return domain_hash(UIROOT, [sha256(canonicalize(list(event_log)))])


def attest(r: bytes, u: bytes, epoch: int, arm: str = "") -> EpochAttestation:
    r = check_digest(r, "reasoning root")
    u = check_digest(u, "ui root")
    return EpochAttestation(epoch, r, u, domain_hash(EPOCH, [r, u]), arm)
