"""Ledger-attested learning loop with fail-closed governance and replayable evidence packs."""

__version__ = "0.1.0"
