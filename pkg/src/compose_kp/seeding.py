"""Deterministic seed derivation for independent RNG streams.

Every stochastic step in the package draws from a ``random.Random``
seeded through :func:`derive_seed`, never from the global RNG.  The
derivation hashes the structural identity of the step (run seed plus
component id, skill name, query index, and so on) so outcomes do not
depend on the order in which steps execute.  ``hash()`` is unusable
here because string hashing is salted per process.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts: object) -> int:
    """Map a tuple of identifying parts to a stable 64-bit seed."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derived_rng(*parts: object) -> random.Random:
    """A fresh ``random.Random`` seeded from the given parts."""
    return random.Random(derive_seed(*parts))
