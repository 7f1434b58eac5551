"""Byte-level primitives: SHA-256, canonical JSON, domain-separated hashing.

Everything here is pure and deterministic. Digests are plain 32-byte
``bytes`` objects; hex renderings are lowercase with no prefix.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from fractions import Fraction
from typing import Any, Iterable

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)

EPOCH = b"EPOCH:"
LEAF = b"LEAF:"
NODE = b"NODE:"
CHAIN = b"CHAIN:"
UIROOT = b"UIROOT:"

# No label is a prefix of another, so tagged preimages never alias.
DOMAIN_LABELS = frozenset({EPOCH, LEAF, NODE, CHAIN, UIROOT})

FIXED_DIGITS = 6


class CanonicalizationError(ValueError):
    """Value cannot be rendered as canonical JSON."""


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def check_digest(value: bytes, what: str = "digest") -> bytes:
    if not isinstance(value, (bytes, bytearray)) or len(value) != DIGEST_SIZE:
        size = len(value) if isinstance(value, (bytes, bytearray)) else type(value).__name__
        raise ValueError(f"{what} must be exactly {DIGEST_SIZE} bytes, got {size}")
    return bytes(value)


def to_hex(digest: bytes) -> str:
    return check_digest(digest).hex()


def from_hex(text: str) -> bytes:
    if not isinstance(text, str) or len(text) != 2 * DIGEST_SIZE or text != text.lower():
        raise ValueError(f"expected 64 lowercase hex chars, got {text!r}")
    return bytes.fromhex(text)


def domain_hash(prefix: bytes, parts: Iterable[bytes]) -> bytes:
    """Hash ``prefix || part_1 || ... || part_n`` over fixed-width digests."""
    if prefix not in DOMAIN_LABELS:
        raise ValueError(f"unregistered domain label {prefix!r}")
    h = hashlib.sha256(prefix)
    for i, part in enumerate(parts):
        h.update(check_digest(part, f"part {i}"))
    return h.digest()


def _format_float(x: float) -> str:
    # ECMAScript Number::toString, which RFC 8785 mandates for numbers.
    if x == 0:
        return "0"
    sign = "-" if x < 0 else ""
    t = Decimal(repr(abs(x))).normalize().as_tuple()
    digits = "".join(map(str, t.digits))
    k = len(digits)
    n = t.exponent + k
    if k <= n <= 21:
        out = digits + "0" * (n - k)
    elif 0 < n <= 21:
        out = digits[:n] + "." + digits[n:]
    elif -6 < n <= 0:
        out = "0." + "0" * (-n) + digits
    else:
        e = n - 1
        head = digits[0] + ("." + digits[1:] if k > 1 else "")
        out = f"{head}e{'+' if e >= 0 else '-'}{abs(e)}"
    return sign + out


_SHORT_ESCAPES = {'"': '\\"', "\\": "\\\\", "\b": "\\b", "\f": "\\f", "\n": "\\n", "\r": "\\r", "\t": "\\t"}


_NEEDS_ESCAPE = re.compile(r'[\x00-\x1f"\\\x80-\U0010ffff]')


def _escape(match: re.Match) -> str:
    ch = match.group()
    if ch in _SHORT_ESCAPES:
        return _SHORT_ESCAPES[ch]
    c = ord(ch)
    if c < 0x10000:
        return f"\\u{c:04x}"
    c -= 0x10000
    return f"\\u{0xD800 | (c >> 10):04x}\\u{0xDC00 | (c & 0x3FF):04x}"


def _encode_str(s: str) -> str:
    # RFC 8785 string escaping, plus \uXXXX for everything above 0x7f
    return '"' + _NEEDS_ESCAPE.sub(_escape, s) + '"'


def _encode(value: Any, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, int):
        out.append(str(int(value)))
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise CanonicalizationError(f"non-finite number {value!r}")
        out.append(_format_float(value))
    elif isinstance(value, str):
        out.append(_encode_str(value))
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    elif isinstance(value, dict):
        for key in value:
            if not isinstance(key, str):
                raise CanonicalizationError(f"non-string object key {key!r}")
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if i:
                out.append(",")
            out.append(_encode_str(key))
            out.append(":")
            _encode(value[key], out)
        out.append("}")
    else:
        raise CanonicalizationError(f"unsupported type {type(value).__name__}")


_NON_ASCII = re.compile(r"[\x80-\U0010ffff]")


def _plain(value: Any) -> bool:
    t = type(value)
    if t is str or t is int or t is bool or value is None:
        return True
    if t is list:
        return all(_plain(v) for v in value)
    if t is dict:
        return all(type(k) is str and _plain(v) for k, v in value.items())
    return False


def canonicalize(value: Any) -> bytes:
    """Serialize ``value`` to canonical, ASCII-only JSON bytes.

    Object keys are sorted by code point, there is no insignificant
    whitespace, and non-ASCII characters are escaped as ``\\uXXXX``.
    Raises :class:`CanonicalizationError` for NaN/inf, non-string keys,
    or types outside the JSON data model.
    """
    if _plain(value):
        # no floats, tuples or subclasses: the C encoder agrees byte for byte
        text = json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        if not text.isascii():
            text = _NON_ASCII.sub(_escape, text)
        return text.encode("ascii")
    out: list[str] = []
    _encode(value, out)
    return "".join(out).encode("ascii")


def parse_canonical(data: bytes) -> Any:
    """Parse ``data`` and require that it is already in canonical form."""
    try:
        value = json.loads(data.decode("ascii"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise CanonicalizationError(f"not valid ASCII JSON: {exc}") from None
    if canonicalize(value) != data:
        raise CanonicalizationError("document is not in canonical form")
    return value


def hash_document(value: Any) -> bytes:
    return sha256(canonicalize(value))


def fixed(value: Fraction | Decimal | int | str, digits: int = FIXED_DIGITS) -> str:
    """Render an exact number as a fixed-point string, rounding half-even.

    >>> fixed(Fraction(-1, 5))
    '-0.200000'
    """
    if isinstance(value, float):
        raise TypeError("pass an exact value (Fraction/Decimal/int/str), not float")
    if isinstance(value, Fraction):
        scaled = value * 10**digits
        q, r = divmod(scaled.numerator, scaled.denominator)
        if 2 * r > scaled.denominator or (2 * r == scaled.denominator and q % 2):
            q += 1
        d = Decimal(q).scaleb(-digits)
    else:
        d = Decimal(value).quantize(Decimal(1).scaleb(-digits), rounding=ROUND_HALF_EVEN)
    return _drop_negative_zero(format(d, "f"))


def _drop_negative_zero(text: str) -> str:
    if text.startswith("-") and not text.strip("-0."):
        return text[1:]
    return text


def fixed_float(x: float, digits: int = FIXED_DIGITS) -> str:
    """Fixed-point rendering of a float (correctly rounded by the runtime)."""
    return _drop_negative_zero(format(x, f".{digits}f"))


def parse_fixed(text: str) -> Fraction:
    if not isinstance(text, str):
        raise ValueError(f"expected fixed-point string, got {text!r}")
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise ValueError(f"malformed fixed-point string {text!r}") from None
    if not value.is_finite():
        raise ValueError(f"non-finite fixed-point string {text!r}")
    return Fraction(value)
