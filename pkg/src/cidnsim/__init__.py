"""Deterministic simulator and protocol library for a trust-based
collaborative intrusion detection network backed by a hybrid PoW/PoS
trust-chain."""

__version__ = "0.1.0"
