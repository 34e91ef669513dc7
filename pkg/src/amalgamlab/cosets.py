"""Coset enumeration and finite quotients.

todd_coxeter runs an HLT-style enumeration: relators (plus the inverse
consistency relators x x^-1 and x^-1 x) are traced at every live coset,
missing edges are filled on the fly, and coincidences are processed
immediately through a union-find with path compression.  Rows are
renumbered densely on completion.  Cosets are right cosets, so the action
reads words left to right and coset 0 is the subgroup itself.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import BudgetExceeded, EnumerationTooLarge, SchreierElementOutsideSubgroup
from .perms import Perm, identity_perm, is_perm, perm_inverse, perm_mul, word_perm
from .presentations import Presentation, parse_word, word_to_text
from .tietze import simplify_presentation
from .words import Letter, Word

DEFAULT_MAX_COSETS = 10_000
DEFAULT_ENUM_BUDGET = 100_000


def _letter_col(le: Letter) -> int:
    return 2 * le.gen + (0 if le.sign == 1 else 1)


def _cols(w: Word) -> tuple[int, ...]:
    return tuple(_letter_col(le) for le in w.letters)


@dataclass(frozen=True)
class CosetTable:
    """Completed right-coset table.

    `generator_actions[g][c]` is the coset reached from c by generator g;
    inverse letters act by the inverse permutation.  transversal[j] reads
    from coset 0 to coset j and transversal[0] is the empty word.
    """

    num_cosets: int
    generator_actions: tuple[Perm, ...]
    subgroup_generators: tuple[Word, ...]
    transversal: tuple[Word, ...]
    _inverse_actions: tuple[Perm, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for p in self.generator_actions:
            if len(p) != self.num_cosets or not is_perm(p):
                raise SchreierElementOutsideSubgroup(
                    "generator column is not a permutation of the cosets"
                )
        object.__setattr__(
            self, "_inverse_actions", tuple(perm_inverse(p) for p in self.generator_actions)
        )
        if len(self.transversal) != self.num_cosets or (
            self.transversal and self.transversal[0].letters
        ):
            raise SchreierElementOutsideSubgroup("transversal is inconsistent with the table")
        for j, w in enumerate(self.transversal):
            if self.trace(0, w) != j:
                raise SchreierElementOutsideSubgroup(
                    f"transversal word {j} does not reach its coset"
                )

    @property
    def rank(self) -> int:
        return len(self.generator_actions)

    def apply(self, coset: int, letter: Letter) -> int:
        if letter.sign == 1:
            return self.generator_actions[letter.gen][coset]
        return self._inverse_actions[letter.gen][coset]

    def trace(self, coset: int, w: Word) -> int:
        for le in w:
            coset = self.apply(coset, le)
        return coset

    def word_action(self, w: Word) -> Perm:
        return word_perm(self.generator_actions, w)

    # --- Schreier structure -------------------------------------------------

    def tree_edges(self) -> set[tuple[int, int]]:
        """Geometric edges (coset, generator) used by the BFS spanning tree."""
        cached = getattr(self, "_tree_cache", None)
        if cached is not None:
            return cached
        edges = set()
        seen = [False] * self.num_cosets
        seen[0] = True
        queue = deque([0])
        while queue:
            c = queue.popleft()
            for g in range(self.rank):
                for sign in (1, -1):
                    d = self.apply(c, Letter(g, sign))
                    if not seen[d]:
                        seen[d] = True
                        queue.append(d)
                        edges.add((c, g) if sign == 1 else (d, g))
        object.__setattr__(self, "_tree_cache", edges)
        return edges

    def schreier_generator_edges(self) -> tuple[tuple[int, int], ...]:
        """Non-tree geometric edges, sorted; one free generator of the
        subgroup per edge."""
        tree = self.tree_edges()
        return tuple(
            (c, g)
            for c in range(self.num_cosets)
            for g in range(self.rank)
            if (c, g) not in tree
        )

    def schreier_word(self, coset: int, gen: int) -> Word:
        """The subgroup element transversal[coset] * gen * transversal[target]^-1."""
        target = self.apply(coset, Letter(gen, 1))
        return (self.transversal[coset].concat(Word.gen(gen))).free_reduce() * self.transversal[
            target
        ].inverse()

    def rewrite(self, w: Word, start: int = 0) -> tuple[tuple[int, int, int], ...]:
        """Rewrite a word tracing from `start` into Schreier letters.

        Returns (coset, gen, sign) triples, one per non-tree step; the word
        must return to `start`, otherwise it does not lie in the subgroup.
        """
        tree = self.tree_edges()
        out = []
        c = start
        for le in w:
            if le.sign == 1:
                if (c, le.gen) not in tree:
                    out.append((c, le.gen, 1))
                c = self.apply(c, le)
            else:
                d = self.apply(c, le)
                if (d, le.gen) not in tree:
                    out.append((d, le.gen, -1))
                c = d
        if c != start:
            raise SchreierElementOutsideSubgroup(
                "word does not return to its start coset; it is outside the subgroup"
            )
        return tuple(out)

    # --- serialization ------------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "degree": self.num_cosets,
            "generators": [list(p) for p in self.generator_actions],
            "transversal": [word_to_text(w, _index_names(self.rank)) for w in self.transversal],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _index_names(rank: int) -> tuple[str, ...]:
    return tuple(f"g{i}" for i in range(rank))


def coset_table_from_json(text: str, generator_names: Sequence[str] | None = None) -> CosetTable:
    """Rebuild a table from its JSON form.

    The wire format stores words against positional names g0, g1, ...;
    passing the real generator names just validates the rank.
    """
    payload = json.loads(text)
    degree = payload["degree"]
    actions = tuple(tuple(p) for p in payload["generators"])
    if generator_names is not None and len(generator_names) != len(actions):
        raise ValueError("generator name count does not match the table rank")
    names = _index_names(len(actions))
    transversal = tuple(
        parse_word(t, names) if t else Word.identity() for t in payload["transversal"]
    )
    return CosetTable(degree, actions, (), transversal)


def _bfs_transversal(
    rank: int, num: int, apply: Callable[[int, Letter], int]
) -> tuple[Word, ...]:
    """ShortLex transversal: BFS from 0, letters ordered g0 < g0^-1 < g1 < ..."""
    words: list[Word | None] = [None] * num
    words[0] = Word.identity()
    queue = deque([0])
    while queue:
        c = queue.popleft()
        for g in range(rank):
            for sign in (1, -1):
                d = apply(c, Letter(g, sign))
                if words[d] is None:
                    words[d] = words[c].concat(Word.gen(g, sign))
                    queue.append(d)
    if any(w is None for w in words):
        raise SchreierElementOutsideSubgroup("coset graph is not connected")
    return tuple(words)  # type: ignore[arg-type]


def todd_coxeter(
    p: Presentation,
    subgroup_generators: Iterable[Word] = (),
    max_cosets: int = DEFAULT_MAX_COSETS,
) -> CosetTable:
    """Enumerate cosets of the subgroup generated by the given words.

    Raises BudgetExceeded when the live coset count would pass max_cosets,
    which is the signal for a possibly-infinite index.
    """
    if max_cosets < 1:
        raise ValueError("max_cosets must be at least 1")
    k = p.rank
    ncols = 2 * k
    subgroup_generators = tuple(p.check_word(w) for w in subgroup_generators)
    rel_paths = [_cols(r) for r in p.relators]
    for g in range(k):
        rel_paths.append((2 * g, 2 * g + 1))
        rel_paths.append((2 * g + 1, 2 * g))
    sub_paths = [_cols(w.free_reduce()) for w in subgroup_generators]

    neighbors: list[list[int | None]] = [[None] * ncols]
    parent = [0]
    live = 1

    def rep(v: int) -> int:
        r = v
        while parent[r] != r:
            r = parent[r]
        while parent[v] != r:
            parent[v], v = r, parent[v]
        return r

    def follow(v: int, col: int) -> int:
        nonlocal live
        v = rep(v)
        w = neighbors[v][col]
        if w is None:
            if live >= max_cosets:
                raise BudgetExceeded(
                    f"coset budget {max_cosets} exhausted; index may be infinite"
                )
            w = len(neighbors)
            neighbors.append([None] * ncols)
            parent.append(w)
            live += 1
            neighbors[v][col] = w
            return w
        return rep(w)

    def follow_path(v: int, path: Sequence[int]) -> int:
        for col in path:
            v = follow(v, col)
        return v

    def unify(a: int, b: int) -> None:
        nonlocal live
        stack = [(a, b)]
        while stack:
            x, y = stack.pop()
            x, y = rep(x), rep(y)
            if x == y:
                continue
            if y < x:
                x, y = y, x
            parent[y] = x
            live -= 1
            row_y, row_x = neighbors[y], neighbors[x]
            for col in range(ncols):
                w = row_y[col]
                if w is None:
                    continue
                if row_x[col] is None:
                    row_x[col] = w
                else:
                    # both classes step somewhere along col: same target
                    stack.append((row_x[col], w))

    for path in sub_paths:
        unify(follow_path(0, path), 0)
    v = 0
    while v < len(neighbors):
        if rep(v) == v:
            for path in rel_paths:
                unify(follow_path(v, path), v)
                if rep(v) != v:
                    break  # died mid-scan; its surviving representative covers it
        v += 1

    live_reps = [v for v in range(len(neighbors)) if rep(v) == v]
    renum = {v: i for i, v in enumerate(live_reps)}
    n = len(live_reps)
    actions = []
    for g in range(k):
        col = [0] * n
        for v in live_reps:
            w = neighbors[v][2 * g]
            assert w is not None, "table left incomplete"
            col[renum[v]] = renum[rep(w)]
        actions.append(tuple(col))

    inv_actions = [perm_inverse(a) for a in actions]

    def apply_fast(c: int, le: Letter) -> int:
        return actions[le.gen][c] if le.sign == 1 else inv_actions[le.gen][c]

    transversal = _bfs_transversal(k, n, apply_fast)
    table = CosetTable(n, tuple(actions), subgroup_generators, transversal)
    _validate_table(table, p)
    return table


def _validate_table(t: CosetTable, p: Presentation) -> None:
    for r in p.relators:
        if t.word_action(r) != identity_perm(t.num_cosets):
            raise SchreierElementOutsideSubgroup("a relator does not fix every coset")
    for w in t.subgroup_generators:
        if t.trace(0, w) != 0:
            raise SchreierElementOutsideSubgroup("a subgroup generator moves coset 0")


@dataclass
class FiniteQuotient:
    """A homomorphism to permutations of a finite set, one image per generator.

    The enumeration of the image group (elements, ShortLex words, and the
    index lookup for products) is computed lazily and cached.
    """

    degree: int
    generator_names: tuple[str, ...]
    generator_images: tuple[Perm, ...]

    def __post_init__(self):
        self.generator_images = tuple(tuple(p) for p in self.generator_images)
        for p in self.generator_images:
            if len(p) != self.degree or not is_perm(p):
                raise ValueError("generator image is not a permutation of the right degree")
        self._enum: _Enumeration | None = None

    @property
    def rank(self) -> int:
        return len(self.generator_images)

    def word_image(self, w: Word) -> Perm:
        return word_perm(self.generator_images, w)

    def enumeration(self, budget: int = DEFAULT_ENUM_BUDGET) -> "_Enumeration":
        if self._enum is None:
            self._enum = _enumerate_image(self, budget)
        return self._enum

    @property
    def order(self) -> int:
        return len(self.enumeration().elements)


@dataclass
class _Enumeration:
    """BFS enumeration of the image group of a FiniteQuotient."""

    elements: tuple[Perm, ...]
    index: dict[Perm, int]
    words: tuple[Word, ...]
    tree: set[tuple[int, int]]  # geometric tree edges (element, generator)

    def mul(self, i: int, j: int) -> int:
        return self.index[perm_mul(self.elements[i], self.elements[j])]

    def inv(self, i: int) -> int:
        return self.index[perm_inverse(self.elements[i])]

    def element_of_word(self, w: Word, images: Sequence[Perm]) -> int:
        return self.index[word_perm(tuple(images), w)]


def _enumerate_image(q: FiniteQuotient, budget: int) -> _Enumeration:
    ident = identity_perm(q.degree)
    elements = [ident]
    index = {ident: 0}
    words = [Word.identity()]
    tree: set[tuple[int, int]] = set()
    inv_images = [perm_inverse(p) for p in q.generator_images]
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for g in range(q.rank):
            for sign, img in ((1, q.generator_images[g]), (-1, inv_images[g])):
                p = perm_mul(elements[i], img)
                if p not in index:
                    if len(elements) >= budget:
                        raise EnumerationTooLarge(
                            f"image group exceeds the enumeration budget {budget}"
                        )
                    j = len(elements)
                    index[p] = j
                    elements.append(p)
                    words.append(words[i].concat(Word.gen(g, sign)))
                    tree.add((i, g) if sign == 1 else (j, g))
                    queue.append(j)
    return _Enumeration(tuple(elements), index, tuple(words), tree)


def normal_core(t: CosetTable, p: Presentation) -> FiniteQuotient:
    """The permutation action of the group on the cosets of the table's
    subgroup.  Its kernel is the intersection of all conjugates of that
    subgroup."""
    q = FiniteQuotient(t.num_cosets, p.generator_names, t.generator_actions)
    for r in p.relators:
        if q.word_image(r) != identity_perm(t.num_cosets):
            raise SchreierElementOutsideSubgroup("table does not satisfy the relators")
    return q


def quotient_word_image(q: FiniteQuotient, w: Word) -> Perm:
    return q.word_image(w)


@dataclass(frozen=True)
class SubgroupPresentationData:
    """Everything the Reidemeister-Schreier rewriting produces.

    raw: presentation on one generator per non-tree edge (named x0, x1, ...)
    generator_words: the same generators as words in the ambient group
    presentation: the Tietze-simplified presentation
    expressions: raw generator -> word over the simplified generators
    """

    raw: Presentation
    schreier_edges: tuple[tuple[int, int], ...]
    generator_words: tuple[Word, ...]
    presentation: Presentation
    expressions: tuple[Word, ...]


def reidemeister_schreier_data(p: Presentation, t: CosetTable) -> SubgroupPresentationData:
    edges = t.schreier_generator_edges()
    edge_index = {e: i for i, e in enumerate(edges)}
    names = tuple(f"x{i}" for i in range(len(edges)))
    relators = []
    for j in range(t.num_cosets):
        for r in p.relators:
            # conjugating by transversal[j] walks tree edges only, so the
            # rewrite of transversal[j] r transversal[j]^-1 is the rewrite
            # of r traced from coset j
            trip = t.rewrite(r, start=j)
            w = Word(tuple(Letter(edge_index[(c, g)], s) for (c, g, s) in trip))
            relators.append(w.free_reduce())
    raw = Presentation(names, tuple(relators))
    result = simplify_presentation(raw)
    final = Presentation(
        tuple(f"x{i}" for i in range(result.presentation.rank)),
        result.presentation.relators,
    )
    words = tuple(t.schreier_word(c, g) for (c, g) in edges)
    return SubgroupPresentationData(raw, edges, words, final, result.expressions)


def reidemeister_schreier(p: Presentation, t: CosetTable) -> Presentation:
    """Present the subgroup of the coset table on its Schreier generators,
    Tietze-simplified."""
    return reidemeister_schreier_data(p, t).presentation


def cayley_presentation(q: FiniteQuotient, budget: int = DEFAULT_ENUM_BUDGET) -> Presentation:
    """Present the image group of q on q's generators.

    Relators are the non-tree Schreier words of the Cayley graph
    (word[e] * g * word[e*g]^-1); redundant but complete, since these
    generate the kernel of free group -> image group.
    """
    enum = q.enumeration(budget)
    relators = []
    seen = set()
    for i in range(len(enum.elements)):
        for g in range(q.rank):
            if (i, g) in enum.tree:
                continue
            j = enum.index[perm_mul(enum.elements[i], q.generator_images[g])]
            r = (enum.words[i].concat(Word.gen(g)) * enum.words[j].inverse()).free_reduce()
            if r.letters and r not in seen:
                seen.add(r)
                relators.append(r)
    return Presentation(q.generator_names, tuple(relators))
