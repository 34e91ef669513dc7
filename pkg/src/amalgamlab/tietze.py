"""Presentation simplification by Tietze transformations.

Moves used: free and cyclic reduction of relators, duplicate removal,
elimination of a generator that occurs exactly once in some relator, and
a cyclic-subword replacement that shortens a long relator against a short
one.  Every eliminated generator keeps a tracked expression over the
surviving generators, so homomorphisms defined on the simplified
presentation pull back to the original one.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .presentations import Presentation
from .words import Word

Signed = tuple[int, ...]  # letters as nonzero 1-based signed ints


def _to_signed(w: Word) -> Signed:
    return w.to_signed()


def _from_signed(s: Signed) -> Word:
    return Word.from_signed(s)


def _free_reduce(s: Signed) -> Signed:
    out: list[int] = []
    for v in s:
        if out and out[-1] == -v:
            out.pop()
        else:
            out.append(v)
    return tuple(out)


def _cyclic_reduce(s: Signed) -> Signed:
    s = _free_reduce(s)
    while len(s) >= 2 and s[0] == -s[-1]:
        s = s[1:-1]
    return s


def _inverse(s: Signed) -> Signed:
    return tuple(-v for v in reversed(s))


def _canonical_cyclic(s: Signed) -> Signed:
    if not s:
        return s
    candidates = []
    for t in (s, _inverse(s)):
        for i in range(len(t)):
            candidates.append(t[i:] + t[:i])
    return min(candidates)


def _substitute(s: Signed, g: int, v: Signed) -> Signed:
    out: list[int] = []
    vinv = _inverse(v)
    for L in s:
        if L == g:
            out.extend(v)
        elif L == -g:
            out.extend(vinv)
        else:
            out.append(L)
    return _free_reduce(tuple(out))


def _normalize(rels: list[Signed]) -> list[Signed]:
    seen = set()
    out = []
    for r in rels:
        r = _cyclic_reduce(r)
        if not r:
            continue
        key = _canonical_cyclic(r)
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def _find_elimination(rels: list[Signed]) -> tuple[int, int] | None:
    """(relator position, generator id) minimizing (relator length, gen id)."""
    best = None
    for pos, r in enumerate(rels):
        counts = Counter(abs(L) for L in r)
        for g, cnt in sorted(counts.items()):
            if cnt == 1:
                key = (len(r), g)
                if best is None or key < best[0]:
                    best = (key, pos, g)
    if best is None:
        return None
    return best[1], best[2]


def _subword_pass(rels: list[Signed]) -> bool:
    """Shorten some relator by replacing a long cyclic chunk of another.

    Returns True if anything changed.  Replacing a subword u of r' by w
    where u w^-1 is a cyclic conjugate of a relator (or its inverse) keeps
    the normal closure unchanged.
    """
    order = sorted(range(len(rels)), key=lambda i: len(rels[i]))
    for si in order:
        r = rels[si]
        m = len(r)
        if m < 2:
            continue
        h = m // 2 + 1
        pieces = []
        for t in (r, _inverse(r)):
            for i in range(m):
                rot = t[i:] + t[:i]
                pieces.append((rot[:h], _inverse(rot[h:])))
        for ti in range(len(rels)):
            if ti == si:
                continue
            target = rels[ti]
            for piece, repl in pieces:
                for j in range(len(target) - h + 1):
                    if target[j : j + h] == piece:
                        cand = _cyclic_reduce(target[:j] + repl + target[j + h :])
                        if len(cand) < len(target):
                            rels[ti] = cand
                            return True
    return False


@dataclass(frozen=True)
class SimplificationResult:
    presentation: Presentation
    # expressions[i]: the i-th original generator as a word over the
    # simplified presentation's generators
    expressions: tuple[Word, ...]


def simplify_presentation(p: Presentation, max_rounds: int = 10_000) -> SimplificationResult:
    k = p.rank
    rels = _normalize([_to_signed(r) for r in p.relators])
    expr: dict[int, Signed] = {g: (g,) for g in range(1, k + 1)}
    alive = set(range(1, k + 1))

    for _ in range(max_rounds):
        rels = _normalize(rels)
        found = _find_elimination(rels)
        if found is None:
            if _subword_pass(rels):
                continue
            break
        pos, g = found
        r = rels[pos]
        i = next(idx for idx, L in enumerate(r) if abs(L) == g)
        rot = r[i:] + r[:i]
        u = rot[1:]
        v = _inverse(u) if rot[0] > 0 else u
        del rels[pos]
        rels = [_substitute(rr, g, v) for rr in rels]
        expr = {orig: _substitute(w, g, v) for orig, w in expr.items()}
        alive.discard(g)

    survivors = sorted(alive)
    remap = {g: i + 1 for i, g in enumerate(survivors)}

    def remap_signed(s: Signed) -> Word:
        return _from_signed(
            tuple(remap[abs(L)] * (1 if L > 0 else -1) for L in s)
        )

    names = tuple(p.generator_names[g - 1] for g in survivors)
    out = Presentation(names, tuple(remap_signed(r) for r in rels))
    expressions = tuple(remap_signed(expr[g]) for g in range(1, k + 1))
    return SimplificationResult(out, expressions)
