from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from ledgerloop.evidence import emit_pack
from ledgerloop.governance import CommitmentRegistry
from ledgerloop.harness import RunConfig, run


@pytest.fixture(scope="session")
def default_state():
    return run(RunConfig(), CommitmentRegistry.default())


@pytest.fixture(scope="session")
def default_pack(tmp_path_factory, default_state) -> Path:
    out = tmp_path_factory.mktemp("packs") / "seed42"
    emit_pack(default_state, out)
    return out


@pytest.fixture()
def pack_copy(default_pack, tmp_path) -> Path:
    dst = tmp_path / "pack"
    shutil.copytree(default_pack, dst)
    return dst


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture()
def criterion(request, capsys):
    """Context manager that prints one PASS/FAIL line for an acceptance criterion."""
    import contextlib

    results = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    @contextlib.contextmanager
    def check(number: int, title: str):
        detail: dict = {}
        try:
            yield detail
        except BaseException as exc:
            line = f"[FAIL] criterion {number:2d} {title}: {type(exc).__name__}: {exc}".splitlines()[0]
            raise
        else:
            line = f"[PASS] criterion {number:2d} {title}: {detail.get('note', '')}"
        finally:
            results.append(line)
            with capsys.disabled():
                print(f"\n{line}")

    return check


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE_KEY, [])
    if results:
        terminalreporter.section("acceptance criteria")
        for line in sorted(results, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
