"""Deterministic derivation of child seeds from a root seed and string labels."""

from __future__ import annotations

import hashlib

_SEP = b"\x1f"


def derive_seed(root: int, *labels: object) -> int:
    """Derive a stable 64-bit seed from a root seed and a label path.

    The same (root, labels) pair always yields the same seed, across
    processes and platforms. Distinct label paths yield independent
    streams for all practical purposes.
    """
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(int(root)).encode("utf-8"))
    for label in labels:
        digest.update(_SEP)
        digest.update(str(label).encode("utf-8"))
    return int.from_bytes(digest.digest(), "big")
