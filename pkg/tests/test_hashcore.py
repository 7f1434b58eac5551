import hashlib
import json
import math

import pytest
import rfc8785
from hypothesis import given, settings
from hypothesis import strategies as st

from ledgerloop.hashcore import (
    CHAIN,
    DOMAIN_LABELS,
    EPOCH,
    LEAF,
    NODE,
    CanonicalizationError,
    canonicalize,
    domain_hash,
    fixed,
    from_hex,
    parse_canonical,
    parse_fixed,
    sha256,
    to_hex,
)

# confirmed with coreutils sha256sum
EMPTY_SHA = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
ABC_SHA = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
EPOCH_ZEROS_SHA = "af587c4450a28e7d669fe06f96ff95e5090a3e81ae1d851349ce45ac638ba4d3"


def test_sha256_vectors():
    assert sha256(b"").hex() == EMPTY_SHA
    assert sha256(b"abc").hex() == ABC_SHA


@given(st.binary(max_size=256))
def test_sha256_is_32_bytes(data):
    assert len(sha256(data)) == 32


def test_canonicalize_sorts_keys():
    assert canonicalize({"b": 1, "a": 2}) == b'{"a":2,"b":1}'
    assert canonicalize({}) == b"{}"


def test_canonicalize_escapes_non_ascii():
    assert canonicalize({"k": "é"}) == b'{"k":"\\u00e9"}'
    assert canonicalize("\U0001f600") == b'"\\ud83d\\ude00"'


def test_canonicalize_integers_plain():
    assert canonicalize([1, -0, 10**30, 2.0, -3.0]) == b"[1,0,1000000000000000000000000000000,2,-3]"


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf, {1: "x"}, {"a": b"bytes"}, {"s": {1, 2}}])
def test_canonicalize_rejects(bad):
    with pytest.raises(CanonicalizationError):
        canonicalize(bad)


json_values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**53) + 1, max_value=2**53 - 1)
    | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(),
    lambda children: st.lists(children, max_size=4) | st.dictionaries(st.text(), children, max_size=4),
    max_leaves=12,
)

ascii_text = st.text(alphabet=st.characters(min_codepoint=0, max_codepoint=127))
ascii_values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**53) + 1, max_value=2**53 - 1)
    | st.floats(allow_nan=False, allow_infinity=False)
    | ascii_text,
    lambda children: st.lists(children, max_size=4) | st.dictionaries(ascii_text, children, max_size=4),
    max_leaves=12,
)


@settings(max_examples=300)
@given(ascii_values)
def test_matches_rfc8785_on_ascii_documents(value):
    # on ASCII-only input the escaping policies coincide
    assert canonicalize(value) == rfc8785.dumps(value)


@settings(max_examples=300)
@given(json_values)
def test_canonical_idempotence(value):
    once = canonicalize(value)
    assert canonicalize(json.loads(once)) == once
    assert canonicalize(parse_canonical(once)) == once
    assert once.isascii()


def test_parse_canonical_rejects_whitespace():
    with pytest.raises(CanonicalizationError):
        parse_canonical(b'{"a": 1}')
    with pytest.raises(CanonicalizationError):
        parse_canonical(b'{"b":1,"a":2}')


def test_domain_hash_expansion():
    z = bytes(32)
    assert domain_hash(EPOCH, [z, z]).hex() == EPOCH_ZEROS_SHA
    assert domain_hash(EPOCH, [z, z]) == hashlib.sha256(b"EPOCH:" + z + z).digest()


def test_domain_hash_order_and_labels():
    r, u = sha256(b"r"), sha256(b"u")
    assert domain_hash(EPOCH, [r, u]) != domain_hash(EPOCH, [u, r])
    for x in (bytes(32), sha256(b"x"), b"\xff" * 32):
        leaf = hashlib.sha256(b"LEAF:" + x).digest()
        node = hashlib.sha256(b"NODE:" + x).digest()
        assert domain_hash(LEAF, [x]) == leaf
        assert domain_hash(NODE, [x]) == node
        assert leaf != node


def test_domain_hash_rejects_bad_parts():
    with pytest.raises(ValueError):
        domain_hash(EPOCH, [b"short", bytes(32)])
    with pytest.raises(ValueError):
        domain_hash(b"OTHER:", [bytes(32)])


def test_domain_labels_prefix_free():
    for a in DOMAIN_LABELS:
        assert a.isascii() and a.endswith(b":")
        for b in DOMAIN_LABELS:
            assert a == b or not b.startswith(a)


@given(st.lists(st.binary(min_size=32, max_size=32), min_size=1, max_size=4),
       st.lists(st.binary(min_size=32, max_size=32), min_size=1, max_size=4))
def test_fixed_width_encoding_injective(xs, ys):
    if len(xs) == len(ys) and xs != ys:
        assert CHAIN + b"".join(xs) != CHAIN + b"".join(ys)


def test_hex_roundtrip():
    d = sha256(b"abc")
    assert from_hex(to_hex(d)) == d
    assert to_hex(d) == ABC_SHA
    with pytest.raises(ValueError):
        from_hex(ABC_SHA.upper())


@pytest.mark.parametrize(
    "value, text",
    [("0.5", "0.500000"), ("-0.2", "-0.200000"), ("0.0000005", "0.000000"), ("0.0000015", "0.000002"),
     ("-0.0000001", "0.000000"), (3, "3.000000")],
)
def test_fixed(value, text):
    from fractions import Fraction
    assert fixed(Fraction(value) if isinstance(value, str) else value) == text
    assert fixed(value) == text


def test_parse_fixed_rejects_garbage():
    with pytest.raises(ValueError):
        parse_fixed("abc")
    with pytest.raises(ValueError):
        parse_fixed("NaN")


_plain_docs = st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(),
    lambda children: st.lists(children, max_size=4) | st.dictionaries(st.text(), children, max_size=4),
    max_leaves=20,
)


@settings(max_examples=300)
@given(_plain_docs)
def test_fast_path_matches_reference_encoder(doc):
    from ledgerloop.hashcore import _encode

    out: list[str] = []
    _encode(doc, out)
    assert canonicalize(doc) == "".join(out).encode("ascii")
