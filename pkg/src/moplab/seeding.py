"""Deterministic RNG streams derived from a base seed plus a label path.

Every random draw in the package comes from a stream created here, so runs
are reproducible and parallel workers can generate their share of the work
independently (stream identity depends only on the label path, never on
draw order or worker count). Training and test streams live in different
namespaces by construction.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "stream"]


def derive_seed(*parts) -> int:
    """Map a label path (ints / strings) to a stable 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, (bool, np.bool_)):
            raise TypeError("ambiguous seed part: bool")
        if isinstance(part, (int, np.integer)):
            token = b"i" + int(part).to_bytes(16, "little", signed=True)
        elif isinstance(part, str):
            token = b"s" + part.encode("utf-8")
        else:
            raise TypeError(f"unsupported seed part: {type(part).__name__}")
        h.update(len(token).to_bytes(4, "little"))
        h.update(token)
    return int.from_bytes(h.digest(), "little")


def stream(*parts) -> np.random.Generator:
    """PCG64 generator for the given label path."""
    return np.random.default_rng(derive_seed(*parts))
