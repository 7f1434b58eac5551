"""Counter-based deterministic random streams.

A draw is a pure function of ``(seed, stream name, counters...)``, so two
consumers keyed by the same counters see the same number regardless of
how many other draws happened in between.
"""

from __future__ import annotations

from dataclasses import dataclass

from .hashcore import canonicalize, sha256

_SCALE = 2.0**-53


@dataclass(frozen=True)
class Stream:
    seed: int
    name: str

    def uniform(self, *counter: int) -> float:
        """Uniform draw in [0, 1) with 53 bits of resolution."""
        digest = sha256(canonicalize(["stream", self.seed, self.name, list(counter)]))
        return (int.from_bytes(digest[:8], "big") >> 11) * _SCALE

    def child(self, suffix: str) -> "Stream":
        return Stream(self.seed, f"{self.name}/{suffix}")
