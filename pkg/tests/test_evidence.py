import json
import random

import pytest

import tamper
from ledgerloop.evidence import (
    CHECK_NAMES,
    SCOPE_DISCLAIMER,
    PackError,
    audit_pack,
    directory_digest,
    emit_pack,
    replay_verify,
)
from ledgerloop.governance import CommitmentRegistry
from ledgerloop.hashcore import canonicalize
from ledgerloop.harness import RunConfig, run


def _first_failure(pack):
    report = replay_verify(pack)
    assert report.exit_code == 1
    return report.failed.name


def test_clean_pack_verifies(default_pack):
    report = replay_verify(default_pack)
    assert report.ok and report.exit_code == 0
    assert [r.name for r in report.results] == list(CHECK_NAMES.values())
    assert report.to_doc()["disclaimer"] == SCOPE_DISCLAIMER


def test_verify_does_not_write(default_pack):
    before = directory_digest(default_pack)
    replay_verify(default_pack)
    audit_pack(default_pack)
    assert directory_digest(default_pack) == before


def test_emit_refuses_non_empty_dir(default_state, tmp_path):
    (tmp_path / "junk").write_text("x")
    with pytest.raises(PackError):
        emit_pack(default_state, tmp_path)


def test_packs_are_byte_identical(tmp_path):
    cfg = RunConfig(seed=5, cycles=12, events_per_cycle=6)
    for name in ("a", "b"):
        emit_pack(run(cfg, CommitmentRegistry.default()), tmp_path / name)
    assert directory_digest(tmp_path / "a") == directory_digest(tmp_path / "b")


def test_manifest_contents(default_pack):
    m = json.loads((default_pack / "manifest.json").read_bytes())
    assert m["attestation_count"] == 200
    assert len(m["artifacts"]) == 2 * 100 * 20
    assert set(m["ledger_head"]) == {"baseline", "treatment"}
    assert (default_pack / "manifest.json").read_bytes() == canonicalize(m)


@pytest.mark.parametrize("corrupt", [tamper.block_flip, tamper.block_drop, tamper.block_reorder,
                                     tamper.registry_edit] + tamper.MANIFEST_CORRUPTIONS,
                         ids=lambda f: f.__name__)
def test_each_corruption_names_its_check(pack_copy, corrupt):
    expected, _ = corrupt(pack_copy, random.Random(1))
    assert _first_failure(pack_copy) == expected


def test_missing_manifest(pack_copy):
    (pack_copy / "manifest.json").unlink()
    assert _first_failure(pack_copy) == "manifest"


def test_unlisted_file(pack_copy):
    (pack_copy / "extra.txt").write_text("hello")
    assert _first_failure(pack_copy) == "file_hashes"


def _edit_block(pack, arm, index, fn):
    rel = f"blocks/{arm}/{index:06d}.json"
    doc = json.loads((pack / rel).read_bytes())
    fn(doc)
    (pack / rel).write_bytes(canonicalize(doc))
    tamper.rehash(pack, rel)


def test_rehashed_block_edit_breaks_chain(pack_copy):
    _edit_block(pack_copy, "treatment", 7, lambda d: d["artifact_ids"].pop())
    assert _first_failure(pack_copy) == "ledger_chain"


def test_rehashed_attestation_edit(pack_copy):
    path = pack_copy / "attestations.jsonl"
    lines = path.read_bytes().split(b"\n")
    doc = json.loads(lines[3])
    doc["u"] = "0" * 64
    lines[3] = canonicalize(doc)
    path.write_bytes(b"\n".join(lines))
    tamper.rehash(pack_copy, "attestations.jsonl")
    assert _first_failure(pack_copy) == "attestations"


def test_rehashed_event_edit_breaks_ui_root(pack_copy):
    path = pack_copy / "events.jsonl"
    lines = path.read_bytes().split(b"\n")
    doc = json.loads(lines[0])
    doc["tactic"] = (doc["tactic"] + 1) % 4
    lines[0] = canonicalize(doc)
    path.write_bytes(b"\n".join(lines))
    tamper.rehash(pack_copy, "events.jsonl")
    assert _first_failure(pack_copy) == "attestations"


def test_rehashed_verdict_edit(pack_copy):
    path = pack_copy / "governance_verdict.json"
    doc = json.loads(path.read_bytes())
    doc["claim_level"] = "L0"
    path.write_bytes(canonicalize(doc))
    tamper.rehash(pack_copy, "governance_verdict.json")
    assert _first_failure(pack_copy) == "governance"


def test_rehashed_metrics_edit(pack_copy):
    path = pack_copy / "metrics.jsonl"
    lines = path.read_bytes().split(b"\n")
    doc = json.loads(lines[0])
    doc["pass_count"] += 1
    doc["fail_count"] -= 1 if doc["fail_count"] else 0
    lines[0] = canonicalize(doc)
    path.write_bytes(b"\n".join(lines))
    tamper.rehash(pack_copy, "metrics.jsonl")
    assert _first_failure(pack_copy) == "governance"


def test_audit_clean(default_pack):
    reports = audit_pack(default_pack)
    assert set(reports) == {"baseline", "treatment"}
    for r in reports.values():
        assert r.ok and r.coverage_pct == "100.0" and r.total == 100


def test_audit_localizes_damage(pack_copy):
    path = pack_copy / "blocks/baseline/000042.json"
    path.write_bytes(path.read_bytes().replace(b'"merkle_root":"', b'"merkle_root":"f', 1)[:-2] + b'"}')
    r = audit_pack(pack_copy)["baseline"]
    assert not r.ok and r.coverage_pct == "99.0"
    assert r.divergences[0]["index"] == 42
    assert audit_pack(pack_copy)["treatment"].ok
