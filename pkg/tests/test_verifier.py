import math

import pytest

from ledgerloop.streams import Stream
from ledgerloop.verifier import (
    DEFAULT_VERIFIER,
    Outcome,
    ReasoningEvent,
    Tactic,
    VerifierConfig,
    admissible,
    verify,
)

N = 10_000


def _event(cycle, index, tactic=0):
    return ReasoningEvent(cycle, index, tactic, bytes(32))


def _run(cfg, n=N, seed=5, tactic=0):
    stream = Stream(seed, "verifier")
    return [verify(_event(1 + i // 100, i % 100, tactic), cfg, stream) for i in range(n)]


def test_degenerate_configs():
    always_pass = VerifierConfig.from_probs([1.0, 0.0], [0.0, 1.0])
    assert set(_run(always_pass, 500, tactic=0)) == {Outcome.PASS}
    assert set(_run(always_pass, 500, tactic=1)) == {Outcome.ABSTAIN}


def test_distribution_fidelity():
    cfg = VerifierConfig.from_probs([0.6, 0.5], [0.2, 0.1])
    outs = _run(cfg)
    for outcome, p in ((Outcome.PASS, 0.6), (Outcome.FAIL, 0.2), (Outcome.ABSTAIN, 0.2)):
        freq = outs.count(outcome) / N
        sigma = math.sqrt(p * (1 - p) / N)
        assert abs(freq - p) <= 3 * sigma
    assert abs(outs.count(Outcome.PASS) / N - 0.60) <= 0.015


def test_ternary_totality_and_determinism():
    a = _run(DEFAULT_VERIFIER, 2000, seed=9, tactic=2)
    b = _run(DEFAULT_VERIFIER, 2000, seed=9, tactic=2)
    assert a == b
    assert set(a) <= set(Outcome)
    assert a != _run(DEFAULT_VERIFIER, 2000, seed=10, tactic=2)


def test_draw_keyed_by_cycle_and_index():
    s = Stream(1, "verifier")
    # order of evaluation does not matter
    forward = [s.uniform(c, i) for c in range(3) for i in range(3)]
    backward = [s.uniform(c, i) for c in reversed(range(3)) for i in reversed(range(3))][::-1]
    assert forward == backward
    assert s.uniform(1, 2) != Stream(1, "policy/a").uniform(1, 2)
    assert all(0.0 <= x < 1.0 for x in forward)


def test_tactic_out_of_range():
    with pytest.raises(ValueError):
        verify(_event(1, 0, tactic=4), DEFAULT_VERIFIER, Stream(0, "verifier"))


@pytest.mark.parametrize("p,a", [(0.7, 0.4), (-0.1, 0.0), (0.5, 1.2)])
def test_invalid_tactic(p, a):
    with pytest.raises(ValueError):
        Tactic(p, a)


def test_needs_two_tactics():
    with pytest.raises(ValueError):
        VerifierConfig((Tactic(0.5, 0.1),))


def test_admissible():
    assert admissible(Outcome.PASS)
    assert not admissible(Outcome.FAIL)
    assert not admissible(Outcome.ABSTAIN)
    assert [o.symbol for o in Outcome] == [1, 0, None]


def test_config_doc_roundtrip():
    assert VerifierConfig.from_doc(DEFAULT_VERIFIER.to_doc()) == DEFAULT_VERIFIER
