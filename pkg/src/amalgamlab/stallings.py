"""Folded subgroup graphs for free groups and separating chains of
finite-index overgroups.

A graph is a partial deterministic action of free-group generators on a
finite vertex set with base vertex 0: forward[g][v] is the vertex reached
by generator g, or -1 when the edge is absent.  Folding keeps at most one
g-edge out of and into every vertex, so reduced words read deterministic
paths and membership is loop reading at the base.

A chain stage attaches the radius-i ball at the base (every reduced word
of length <= i becomes readable), completes each generator to a
permutation, and intersects with the previous stage.  Words of length at
most i that read past the original folded graph cannot return to the
base, so stage i agrees with the subgroup on all words up to that length.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .cosets import CosetTable, _bfs_transversal
from .perms import perm_inverse
from .words import Letter, Word

MISSING = -1


class _Folder:
    """Mutable fold engine: vertices under union-find, one forward and one
    backward slot per generator; conflicting edges merge their endpoints."""

    def __init__(self, rank: int):
        self.rank = rank
        self.parent: list[int] = []
        self.fwd: list[dict[int, int]] = [dict() for _ in range(rank)]
        self.bwd: list[dict[int, int]] = [dict() for _ in range(rank)]

    def vertex(self) -> int:
        v = len(self.parent)
        self.parent.append(v)
        return v

    def find(self, v: int) -> int:
        r = v
        while self.parent[r] != r:
            r = self.parent[r]
        while self.parent[v] != r:
            self.parent[v], v = r, self.parent[v]
        return r

    def add_edge(self, u: int, g: int, v: int) -> None:
        pending = [(u, g, v)]
        while pending:
            u, g, v = pending.pop()
            u, v = self.find(u), self.find(v)
            t = self.fwd[g].get(u)
            if t is not None and (t := self.find(t)) != v:
                self.fwd[g][u] = t
                pending.append((u, g, v))
                pending.extend(self._merge(t, v))
                continue
            s = self.bwd[g].get(v)
            if s is not None and (s := self.find(s)) != u:
                self.bwd[g][v] = s
                pending.append((u, g, v))
                pending.extend(self._merge(s, u))
                continue
            self.fwd[g][u] = v
            self.bwd[g][v] = u

    def _merge(self, a: int, b: int) -> list[tuple[int, int, int]]:
        a, b = self.find(a), self.find(b)
        if a == b:
            return []
        if b < a:
            a, b = b, a
        self.parent[b] = a
        moved = []
        for g in range(self.rank):
            t = self.fwd[g].pop(b, None)
            if t is not None:
                moved.append((a, g, t))
            s = self.bwd[g].pop(b, None)
            if s is not None:
                moved.append((s, g, a))
        return moved

    def trace_loop(self, base: int, w: Word) -> None:
        """Lay the word down as a loop at base: fresh intermediate vertices,
        last letter closing back onto the base."""
        c = base
        letters = w.letters
        for i, le in enumerate(letters):
            d = self.find(base) if i == len(letters) - 1 else self.vertex()
            if le.sign == 1:
                self.add_edge(self.find(c), le.gen, d)
            else:
                self.add_edge(d, le.gen, self.find(c))
            c = d


@dataclass(frozen=True)
class StallingsGraph:
    """Canonically numbered folded graph with base vertex 0.

    Vertices are BFS-ordered from the base (letters in order g0, g0^-1,
    g1, ...), so equal subgroup data gives equal graphs.
    """

    rank: int
    forward: tuple[tuple[int, ...], ...]
    backward: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.rank < 1 or len(self.forward) != self.rank:
            raise ValueError("rank must be positive and match the edge table")
        n = self.num_vertices
        back = [[MISSING] * n for _ in range(self.rank)]
        for g, col in enumerate(self.forward):
            for v, w in enumerate(col):
                if w != MISSING:
                    if back[g][w] != MISSING:
                        raise ValueError("two edges with one label enter a vertex")
                    back[g][w] = v
        object.__setattr__(self, "backward", tuple(tuple(c) for c in back))

    @property
    def num_vertices(self) -> int:
        return len(self.forward[0])

    @property
    def is_complete(self) -> bool:
        return all(MISSING not in col for col in self.forward)

    @property
    def index(self) -> int:
        if not self.is_complete:
            raise ValueError("index is defined for complete covers only")
        return self.num_vertices

    def step(self, v: int, le: Letter) -> int:
        table = self.forward[le.gen] if le.sign == 1 else self.backward[le.gen]
        return table[v]

    def read(self, w: Word, start: int = 0) -> int:
        """End vertex of the reduced word, or MISSING if it leaves the graph."""
        c = start
        for le in w.free_reduce():
            c = self.step(c, le)
            if c == MISSING:
                return MISSING
        return c

    def contains(self, w: Word) -> bool:
        return self.read(w) == 0

    # --- constructions -------------------------------------------------------

    def with_ball(self, radius: int) -> "StallingsGraph":
        """Attach missing edges as fresh leaves, level by level, so every
        vertex within distance radius-1 of the base has full valence."""
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        fwd = [list(col) for col in self.forward]
        bwd = [list(col) for col in self.backward]
        n = self.num_vertices
        level = [0]
        seen = {0}
        for _ in range(radius):
            nxt = []
            for v in level:
                for g in range(self.rank):
                    if fwd[g][v] == MISSING:
                        for col in fwd + bwd:
                            col.append(MISSING)
                        fwd[g][v] = n
                        bwd[g][n] = v
                        n += 1
                    if bwd[g][v] == MISSING:
                        for col in fwd + bwd:
                            col.append(MISSING)
                        bwd[g][v] = n
                        fwd[g][n] = v
                        n += 1
                    for d in (fwd[g][v], bwd[g][v]):
                        if d not in seen:
                            seen.add(d)
                            nxt.append(d)
            level = nxt
        return _canonical(self.rank, [tuple(c) for c in fwd])

    def completed(self) -> "StallingsGraph":
        """Smallest-first completion: per generator, vertices missing an
        outgoing edge are matched in order to vertices missing an incoming
        one, making each generator a permutation."""
        fwd = [list(col) for col in self.forward]
        for g in range(self.rank):
            no_out = [v for v in range(self.num_vertices) if fwd[g][v] == MISSING]
            no_in = [v for v in range(self.num_vertices) if self.backward[g][v] == MISSING]
            for v, w in zip(no_out, no_in):
                fwd[g][v] = w
        return _canonical(self.rank, [tuple(c) for c in fwd])

    def intersect(self, other: "StallingsGraph") -> "StallingsGraph":
        """Cover of the intersection subgroup: orbit of the base pair under
        the product action.  Both graphs must be complete."""
        if self.rank != other.rank:
            raise ValueError("ranks differ")
        if not (self.is_complete and other.is_complete):
            raise ValueError("intersection needs complete covers")
        pairs = {(0, 0): 0}
        order = [(0, 0)]
        queue = deque([(0, 0)])
        while queue:
            u, v = queue.popleft()
            for g in range(self.rank):
                for (p, q) in (
                    (self.forward[g], other.forward[g]),
                    (self.backward[g], other.backward[g]),
                ):
                    d = (p[u], q[v])
                    if d not in pairs:
                        pairs[d] = len(order)
                        order.append(d)
                        queue.append(d)
        fwd = tuple(
            tuple(pairs[(self.forward[g][u], other.forward[g][v])] for (u, v) in order)
            for g in range(self.rank)
        )
        return StallingsGraph(self.rank, fwd)

    def core(self) -> "StallingsGraph":
        """Drop non-base vertices of degree at most one until none remain."""
        n = self.num_vertices
        alive = [True] * n
        changed = True
        while changed:
            changed = False
            for v in range(1, n):
                if not alive[v]:
                    continue
                deg = 0
                for g in range(self.rank):
                    w = self.forward[g][v]
                    if w != MISSING and alive[w]:
                        deg += 1
                    u = self.backward[g][v]
                    if u != MISSING and alive[u]:
                        deg += 1
                if deg <= 1:
                    alive[v] = False
                    changed = True
        fwd = [
            tuple(
                self.forward[g][v] if self.forward[g][v] != MISSING and alive[self.forward[g][v]] else MISSING
                for v in range(n)
                if alive[v]
            )
            for g in range(self.rank)
        ]
        # renumber against the surviving vertex order
        remap = {}
        for v in range(n):
            if alive[v]:
                remap[v] = len(remap)
        fwd = [
            tuple(remap[w] if w != MISSING else MISSING for w in col) for col in fwd
        ]
        return _canonical(self.rank, fwd)

    # --- subgroup structure ---------------------------------------------------

    def tree_edges(self) -> set[tuple[int, int]]:
        """Geometric spanning-tree edges (positive-direction source, gen)."""
        edges = set()
        seen = [False] * self.num_vertices
        seen[0] = True
        queue = deque([0])
        while queue:
            c = queue.popleft()
            for g in range(self.rank):
                for sign in (1, -1):
                    d = self.step(c, Letter(g, sign))
                    if d != MISSING and not seen[d]:
                        seen[d] = True
                        queue.append(d)
                        edges.add((c, g) if sign == 1 else (d, g))
        if not all(seen):
            raise ValueError("graph is not connected from the base")
        return edges

    def _tree_words(self) -> tuple[Word, ...]:
        words: list[Word | None] = [None] * self.num_vertices
        words[0] = Word.identity()
        queue = deque([0])
        while queue:
            c = queue.popleft()
            for g in range(self.rank):
                for sign in (1, -1):
                    d = self.step(c, Letter(g, sign))
                    if d != MISSING and words[d] is None:
                        words[d] = words[c].concat(Word.gen(g, sign))
                        queue.append(d)
        return tuple(w for w in words if w is not None)

    def schreier_basis(self) -> tuple[Word, ...]:
        """Free basis of the subgroup the graph reads: one word per
        non-tree edge."""
        tree = self.tree_edges()
        words = self._tree_words()
        out = []
        for v in range(self.num_vertices):
            for g in range(self.rank):
                w = self.forward[g][v]
                if w == MISSING or (v, g) in tree:
                    continue
                b = (words[v].concat(Word.gen(g)) * words[w].inverse()).free_reduce()
                out.append(b)
        return tuple(out)

    def to_coset_table(self) -> CosetTable:
        if not self.is_complete:
            raise ValueError("only complete covers are coset tables")
        actions = tuple(tuple(col) for col in self.forward)
        inv = [perm_inverse(a) for a in actions]

        def apply(c: int, le: Letter) -> int:
            return actions[le.gen][c] if le.sign == 1 else inv[le.gen][c]

        transversal = _bfs_transversal(self.rank, self.num_vertices, apply)
        return CosetTable(self.num_vertices, actions, self.schreier_basis(), transversal)


def _canonical(rank: int, fwd: list[tuple[int, ...]]) -> StallingsGraph:
    """BFS renumbering from the base, letters ordered g0, g0^-1, g1, ..."""
    n = len(fwd[0])
    bwd = [[MISSING] * n for _ in range(rank)]
    for g in range(rank):
        for v, w in enumerate(fwd[g]):
            if w != MISSING:
                bwd[g][w] = v
    order = [0]
    number = {0: 0}
    queue = deque([0])
    while queue:
        c = queue.popleft()
        for g in range(rank):
            for table in (fwd[g], bwd[g]):
                d = table[c]
                if d != MISSING and d not in number:
                    number[d] = len(order)
                    order.append(d)
                    queue.append(d)
    if len(order) != n:
        raise ValueError("graph is not connected from the base")
    new_fwd = tuple(
        tuple(
            number[fwd[g][v]] if fwd[g][v] != MISSING else MISSING for v in order
        )
        for g in range(rank)
    )
    return StallingsGraph(rank, new_fwd)


def stallings_graph_from_words(rank: int, words: tuple[Word, ...] | list[Word]) -> StallingsGraph:
    """Fold the wedge of loops reading the given words at the base, then
    trim hanging trees; the result reads exactly the subgroup they generate."""
    if rank < 1:
        raise ValueError("rank must be positive")
    folder = _Folder(rank)
    base = folder.vertex()
    for w in words:
        w = w.free_reduce()
        if w.max_gen() >= rank:
            raise ValueError("word uses a generator outside the rank")
        if not w.letters:
            continue
        folder.trace_loop(base, w)
    # extract reachable quotient
    base = folder.find(base)
    number = {base: 0}
    order = [base]
    queue = deque([base])
    while queue:
        c = queue.popleft()
        for g in range(rank):
            for table in (folder.fwd[g], folder.bwd[g]):
                d = table.get(c)
                if d is None:
                    continue
                d = folder.find(d)
                if d not in number:
                    number[d] = len(order)
                    order.append(d)
                    queue.append(d)
    fwd = []
    for g in range(rank):
        col = [MISSING] * len(order)
        for v, i in number.items():
            w = folder.fwd[g].get(v)
            if w is not None:
                col[i] = number[folder.find(w)]
        fwd.append(tuple(col))
    return StallingsGraph(rank, tuple(fwd)).core()


def stallings_chain(
    rank: int, words: tuple[Word, ...] | list[Word], depth: int
) -> tuple[StallingsGraph, ...]:
    """Nested finite-index covers shrinking toward the subgroup.

    Stage i agrees with the subgroup on every reduced word of length at
    most i, and each stage refines the previous one by intersection.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    core = stallings_graph_from_words(rank, words)
    stages: list[StallingsGraph] = []
    current: StallingsGraph | None = None
    for i in range(1, depth + 1):
        cover = core.with_ball(i).completed()
        current = cover if current is None else current.intersect(cover)
        stages.append(current)
    return tuple(stages)
