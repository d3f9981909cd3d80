"""Deterministic seed derivation for independent trials and workers."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts) -> int:
    """A 64-bit seed derived from a master seed and a label tuple.

    Counter-based so trial seeds are independent of execution order.
    """
    payload = repr((master,) + parts).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")
