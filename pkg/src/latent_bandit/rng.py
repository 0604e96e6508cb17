"""Deterministic seed derivation.

Every stochastic component (environment noise, state transitions, policy
randomization, instance sampling) pulls from its own substream so that the
number of draws one component consumes can never shift another component's
sequence.  Substreams are derived by hashing a root seed together with
string/int labels, which makes any single episode replayable in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK_63 = (1 << 63) - 1


def substream_seed(*parts: int | str) -> int:
    """Map labelled parts to a 63-bit seed via SHA-256.

    Parts are type-tagged before hashing so that e.g. (1, "x") and ("1x",)
    cannot collide.  Only ints and strings are accepted; floats are rejected
    because their text form is not a stable identifier.
    """
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        tag = f"i:{part}" if isinstance(part, int) else f"s:{part}"
        h.update(tag.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big") & _MASK_63


def substream(*parts: int | str) -> np.random.Generator:
    """A fresh PCG64 generator seeded from the given labelled parts."""
    return np.random.default_rng(substream_seed(*parts))
