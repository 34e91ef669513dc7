"""Permutation helpers.

Permutations are tuples p with p[x] = image of x.  Products compose left
to right: perm_mul(p, q) applies p first, then q.  Word images built with
this convention are multiplicative, and the matching matrix convention
(row i carries a 1 in column p[i]) turns products into matrix products.
"""

from __future__ import annotations

from typing import Sequence

from .words import Word

Perm = tuple[int, ...]


def identity_perm(n: int) -> Perm:
    return tuple(range(n))


def perm_mul(p: Perm, q: Perm) -> Perm:
    """Apply p, then q."""
    return tuple(q[x] for x in p)


def perm_inverse(p: Perm) -> Perm:
    inv = [0] * len(p)
    for i, x in enumerate(p):
        inv[x] = i
    return tuple(inv)


def perm_fixed_points(p: Perm) -> int:
    return sum(1 for i, x in enumerate(p) if i == x)


def is_perm(p: Sequence[int]) -> bool:
    n = len(p)
    return sorted(p) == list(range(n))


def word_perm(images: Sequence[Perm], w: Word) -> Perm:
    """Image of a word under generator -> permutation, multiplicatively."""
    n = len(images[0]) if images else 0
    out = identity_perm(n)
    inverses = {}
    for le in w:
        if le.sign == 1:
            g = images[le.gen]
        else:
            if le.gen not in inverses:
                inverses[le.gen] = perm_inverse(images[le.gen])
            g = inverses[le.gen]
        out = perm_mul(out, g)
    return out
