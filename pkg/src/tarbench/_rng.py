"""Deterministic random stream derivation.

Every random decision draws from a Philox counter-based generator whose
key is derived from the experiment seed plus string context (topic id,
method, purpose) and integer context (iteration). String parts are mapped
to 64-bit integers with BLAKE2b, never with the interpreter's salted
hash(), so streams are stable across processes and machines. Distinct
contexts give statistically independent streams, which keeps runs
reproducible under any parallel execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _to_entropy(part: int | str) -> int:
    if isinstance(part, bool):
        raise TypeError("bool is not a valid stream context part")
    if isinstance(part, int):
        return part & _MASK64
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big")
    raise TypeError(f"unsupported stream context part: {part!r}")


def derive_rng(*parts: int | str) -> np.random.Generator:
    """Return an independent Generator keyed by the given context parts."""
    if not parts:
        raise ValueError("at least one context part is required")
    entropy = [_to_entropy(p) for p in parts]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
