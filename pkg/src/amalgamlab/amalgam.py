"""Stage groups: a finite group amalgamated with the direct product of a
subgroup and the integers, over that subgroup.

An AmalgamSpec fixes the finite left factor with a full multiplication
enumeration, the amalgamated subgroup inside it, and a transversal of the
subgroup's right cosets.  Elements of the amalgam reduce to a unique
normal form

    h t^m (u_1 t^{m_1}) (u_2 t^{m_2}) ... (u_k t^{m_k}) [u_tail]

with h in the subgroup, u_j non-identity transversal representatives, and
all middle exponents nonzero; the stable letter commutes with the
subgroup, which is what drives every rewrite here.  All arithmetic in the
left factor is exact table lookup.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .cosets import (
    DEFAULT_ENUM_BUDGET,
    CosetTable,
    FiniteQuotient,
    cayley_presentation,
    normal_core,
    todd_coxeter,
)
from .errors import (
    RelationViolated,
    SchreierElementOutsideSubgroup,
    SubgroupNotContained,
)
from .presentations import Presentation
from .words import Letter, Word

Token = tuple[str, int]

_FULL_CLOSURE_CHECK_LIMIT = 2000


@dataclass(frozen=True)
class AmalgamSpec:
    """Data of (left factor) amalgamated with (subgroup x Z) over the subgroup.

    amalgam_subgroup holds element indices into the left factor's
    enumeration; left_transversal holds one element per right coset of the
    subgroup, identity first, each representative the earliest element of
    its coset in enumeration order.  subgroup_words optionally records
    generating words for the subgroup (used to present the amalgam with
    fewer commutation relators); separated_words records the generators of
    the smaller subgroup whose double is being embedded, and is only
    checked when a homomorphism is built from it.
    """

    left_factor: FiniteQuotient
    amalgam_subgroup: frozenset[int]
    left_transversal: tuple[int, ...]
    stable_letter: str = "t"
    subgroup_words: tuple[Word, ...] = ()
    separated_words: tuple[Word, ...] = ()
    _slot_of: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _hpart: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        enum = self.left_factor.enumeration()
        n = len(enum.elements)
        sub = self.amalgam_subgroup
        if 0 not in sub or not sub <= set(range(n)):
            raise ValueError("subgroup must contain the identity and index into the factor")
        for h in sub:
            if enum.inv(h) not in sub:
                raise ValueError("subgroup is not closed under inverses")
        if len(sub) <= _FULL_CLOSURE_CHECK_LIMIT:
            for a in sub:
                for b in sub:
                    if enum.mul(a, b) not in sub:
                        raise ValueError("subgroup is not closed under products")
        if n % len(sub) or len(self.left_transversal) != n // len(sub):
            raise ValueError("transversal size must be the subgroup index")
        slot_of = [-1] * n
        hpart = [-1] * n
        for j, u in enumerate(self.left_transversal):
            for h in sub:
                g = enum.mul(h, u)
                if slot_of[g] != -1:
                    raise ValueError("transversal entries share a coset")
                slot_of[g] = j
                hpart[g] = h
        if self.left_transversal[0] != 0:
            raise ValueError("transversal must start with the identity")
        object.__setattr__(self, "_slot_of", tuple(slot_of))
        object.__setattr__(self, "_hpart", tuple(hpart))
        for w in self.subgroup_words:
            if self.element_of_word(w) not in sub:
                raise SubgroupNotContained("a subgroup word maps outside the subgroup")

    # --- left factor helpers --------------------------------------------------

    @property
    def factor_order(self) -> int:
        return len(self.left_factor.enumeration().elements)

    @property
    def subgroup_order(self) -> int:
        return len(self.amalgam_subgroup)

    @property
    def amalgam_index(self) -> int:
        return len(self.left_transversal)

    def element_of_word(self, w: Word) -> int:
        enum = self.left_factor.enumeration()
        return enum.index[self.left_factor.word_image(w)]

    def factor_word(self, element: int) -> Word:
        return self.left_factor.enumeration().words[element]

    def coset_slot(self, element: int) -> int:
        return self._slot_of[element]

    def subgroup_part(self, element: int) -> int:
        return self._hpart[element]

    def stable_name(self) -> str:
        name = self.stable_letter
        while name in self.left_factor.generator_names:
            name += "_"
        return name


@dataclass(frozen=True)
class AmalgamNormalForm:
    """head (h, m) then (representative, exponent) syllables, then an
    optional trailing representative; tail 0 means no trailing part."""

    head: tuple[int, int]
    syllables: tuple[tuple[int, int], ...] = ()
    tail: int = 0

    @property
    def is_identity(self) -> bool:
        return self.head == (0, 0) and not self.syllables and self.tail == 0

    @property
    def syllable_count(self) -> int:
        return len(self.syllables) + (1 if self.tail else 0)

    def tokens(self, spec: AmalgamSpec) -> list[Token]:
        out: list[Token] = []
        h, m = self.head
        if h:
            out.append(("g", h))
        if m:
            out.append(("t", m))
        for slot, exp in self.syllables:
            out.append(("g", spec.left_transversal[slot]))
            out.append(("t", exp))
        if self.tail:
            out.append(("g", spec.left_transversal[self.tail]))
        return out

    def to_json(self) -> str:
        pairs = [list(p) for p in self.syllables]
        if self.tail:
            pairs.append([self.tail, 0])
        payload = {"head": {"h": self.head[0], "m": self.head[1]}, "syllables": pairs}
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def normal_form_from_json(text: str) -> AmalgamNormalForm:
    payload = json.loads(text)
    pairs = [tuple(p) for p in payload["syllables"]]
    tail = 0
    if pairs and pairs[-1][1] == 0:
        tail = pairs[-1][0]
        pairs = pairs[:-1]
    return AmalgamNormalForm(
        (payload["head"]["h"], payload["head"]["m"]), tuple(pairs), tail
    )


def amalgam_identity() -> AmalgamNormalForm:
    return AmalgamNormalForm((0, 0))


def amalgam_reduce(spec: AmalgamSpec, w: Iterable[Token]) -> AmalgamNormalForm:
    """Reduce a token word (("g", element) and ("t", exponent) entries) to
    its normal form.  Subgroup letters migrate left through stable-letter
    powers; each remaining factor splits into subgroup part times
    representative."""
    enum = spec.left_factor.enumeration()
    sub = spec.amalgam_subgroup

    elems = [0]
    exps: list[int] = []
    for kind, val in w:
        if kind == "g":
            if not 0 <= val < spec.factor_order:
                raise ValueError("token names no element of the left factor")
            elems[-1] = enum.mul(elems[-1], val)
        elif kind == "t":
            if val:
                exps.append(val)
                elems.append(0)
        else:
            raise ValueError(f"unknown token kind {kind!r}")

    changed = True
    while changed:
        changed = False
        for j in range(len(exps)):
            if exps[j] == 0:
                elems[j] = enum.mul(elems[j], elems[j + 1])
                del exps[j]
                del elems[j + 1]
                changed = True
                break
        if changed:
            continue
        for i in range(1, len(exps)):
            if elems[i] in sub:
                # commutes with the power on its left
                elems[i - 1] = enum.mul(elems[i - 1], elems[i])
                exps[i - 1] += exps[i]
                del elems[i]
                del exps[i]
                changed = True
                break
        if changed:
            continue
        last = len(exps)
        if last >= 1 and elems[last] in sub and elems[last] != 0:
            elems[last - 1] = enum.mul(elems[last - 1], elems[last])
            elems[last] = 0
            changed = True

    for i in range(len(exps), 0, -1):
        g = elems[i]
        h = spec.subgroup_part(g)
        elems[i] = spec.left_transversal[spec.coset_slot(g)]
        elems[i - 1] = enum.mul(elems[i - 1], h)

    head_h = spec.subgroup_part(elems[0])
    s0 = spec.coset_slot(elems[0])
    slots = [s0] + [spec.coset_slot(g) for g in elems[1:]]
    if not exps:
        return AmalgamNormalForm((head_h, 0), (), s0)
    if s0 != 0:
        pairs = tuple((slots[i], exps[i]) for i in range(len(exps)))
        return AmalgamNormalForm((head_h, 0), pairs, slots[-1])
    pairs = tuple((slots[i], exps[i]) for i in range(1, len(exps)))
    return AmalgamNormalForm((head_h, exps[0]), pairs, slots[-1])


def amalgam_mul(
    spec: AmalgamSpec, a: AmalgamNormalForm, b: AmalgamNormalForm
) -> AmalgamNormalForm:
    return amalgam_reduce(spec, a.tokens(spec) + b.tokens(spec))


def amalgam_inverse(spec: AmalgamSpec, a: AmalgamNormalForm) -> AmalgamNormalForm:
    enum = spec.left_factor.enumeration()
    inv_tokens: list[Token] = []
    for kind, val in reversed(a.tokens(spec)):
        inv_tokens.append((kind, enum.inv(val) if kind == "g" else -val))
    return amalgam_reduce(spec, inv_tokens)


def stage_word_tokens(spec: AmalgamSpec, w: Word) -> list[Token]:
    """Tokens of a word over the induced alphabet: the left factor's
    generators followed by the stable letter at index rank."""
    enum = spec.left_factor.enumeration()
    k = len(spec.left_factor.generator_names)
    out: list[Token] = []
    for le in w:
        if le.gen == k:
            out.append(("t", le.sign))
        elif le.gen < k:
            g = enum.index[spec.left_factor.word_image(Word((le,)))]
            out.append(("g", g))
        else:
            raise ValueError("word uses a generator outside the amalgam's alphabet")
    return out


def reduce_stage_word(spec: AmalgamSpec, w: Word) -> AmalgamNormalForm:
    return amalgam_reduce(spec, stage_word_tokens(spec, w))


def retraction_image(spec: AmalgamSpec, a: AmalgamNormalForm) -> int:
    """Element of the left factor obtained by deleting the stable letter."""
    enum = spec.left_factor.enumeration()
    out = a.head[0]
    for slot, _ in a.syllables:
        out = enum.mul(out, spec.left_transversal[slot])
    if a.tail:
        out = enum.mul(out, spec.left_transversal[a.tail])
    return out


# --- building specs -----------------------------------------------------------


def _shortlex_transversal(enum, sub: frozenset[int]) -> tuple[int, ...]:
    n = len(enum.elements)
    taken = [False] * n
    reps = []
    for g in range(n):  # enumeration order is shortlex
        if taken[g]:
            continue
        reps.append(g)
        for h in sub:
            taken[enum.mul(h, g)] = True
    return tuple(reps)


def build_stage_group(
    p: Presentation,
    subgens: Sequence[Word],
    chain_table: CosetTable,
    budget: int = DEFAULT_ENUM_BUDGET,
) -> AmalgamSpec:
    """Stage amalgam from one finite-index step of a chain.

    The left factor is the quotient of the presented group by the normal
    core of the chain subgroup; the amalgamated subgroup is the image of
    the chain subgroup, read off as the stabilizer of coset 0.
    """
    q = normal_core(chain_table, p)
    enum = q.enumeration(budget)
    sub = frozenset(i for i, perm in enumerate(enum.elements) if perm[0] == 0)
    for w in subgens:
        img = enum.index[q.word_image(w)]
        if img not in sub:
            raise SubgroupNotContained(
                "a subgroup generator lands outside the chain subgroup's image"
            )
    words = tuple(
        chain_table.schreier_word(c, g) for (c, g) in chain_table.schreier_generator_edges()
    )
    return AmalgamSpec(
        left_factor=q,
        amalgam_subgroup=sub,
        left_transversal=_shortlex_transversal(enum, sub),
        subgroup_words=words,
        separated_words=tuple(subgens),
    )


def exact_amalgam_spec(
    p: Presentation, subgens: Sequence[Word], budget: int = DEFAULT_ENUM_BUDGET
) -> AmalgamSpec:
    """Amalgam over the subgroup itself, for finite presented groups: the
    left factor is the group acting on itself, so nothing is quotiented."""
    table = todd_coxeter(p, (), max_cosets=budget)
    q = normal_core(table, p)
    enum = q.enumeration(budget)
    images = [enum.index[q.word_image(w)] for w in subgens]
    sub = {0}
    frontier = [0]
    while frontier:
        x = frontier.pop()
        for g in images:
            for y in (enum.mul(x, g), enum.mul(x, enum.inv(g))):
                if y not in sub:
                    sub.add(y)
                    frontier.append(y)
    subf = frozenset(sub)
    return AmalgamSpec(
        left_factor=q,
        amalgam_subgroup=subf,
        left_transversal=_shortlex_transversal(enum, subf),
        subgroup_words=tuple(subgens),
        separated_words=tuple(subgens),
    )


# --- presentations and homomorphisms ------------------------------------------


def _commutator(w: Word, t_index: int) -> Word:
    t = Word.gen(t_index)
    return (w.concat(t).concat(w.inverse()).concat(t.inverse())).free_reduce()


def induced_presentation(spec: AmalgamSpec) -> Presentation:
    """Finite presentation of the amalgam: the left factor's permutation
    presentation plus commutation of the stable letter with the subgroup."""
    base = cayley_presentation(spec.left_factor)
    k = len(base.generator_names)
    names = base.generator_names + (spec.stable_name(),)
    if spec.subgroup_words:
        commuting = spec.subgroup_words
    else:
        commuting = tuple(
            spec.factor_word(h) for h in sorted(spec.amalgam_subgroup) if h != 0
        )
    relators = tuple(base.relators) + tuple(_commutator(w, k) for w in commuting)
    return Presentation(names, relators)


def stage_group_presentation(p: Presentation, subgens: Sequence[Word], stable: str = "t") -> Presentation:
    """Presentation of the (usually infinite) amalgam of the presented
    group with subgroup x Z: add the stable letter and make it commute
    with every subgroup generator."""
    name = stable
    while name in p.generator_names:
        name += "_"
    k = p.rank
    relators = tuple(p.relators) + tuple(_commutator(w, k) for w in subgens)
    return Presentation(p.generator_names + (name,), relators)


@dataclass(frozen=True)
class GroupHom:
    """Generator images into an arbitrary target with explicit operations.

    Every relator of the source is checked at construction; the optional
    identity test decides identity in the target (defaults to equality
    with the supplied identity element).
    """

    source: Presentation
    generator_images: tuple[Any, ...]
    target_mul: Callable[[Any, Any], Any]
    target_inverse: Callable[[Any], Any]
    target_identity: Any
    identity_test: Callable[[Any], bool] | None = None

    def __post_init__(self):
        if len(self.generator_images) != self.source.rank:
            raise ValueError("one image per generator is required")
        for r in self.source.relators:
            if not self._is_identity(self.word_image(r)):
                raise RelationViolated("a defining relation does not map to the identity")

    def _is_identity(self, x: Any) -> bool:
        if self.identity_test is not None:
            return self.identity_test(x)
        return x == self.target_identity

    def word_image(self, w: Word) -> Any:
        out = self.target_identity
        for le in w:
            img = self.generator_images[le.gen]
            if le.sign == -1:
                img = self.target_inverse(img)
            out = self.target_mul(out, img)
        return out


@dataclass(frozen=True)
class StagePair:
    """Element of (amalgam) x (ambient group word); the second coordinate
    is only defined up to the ambient group's relations."""

    nf: AmalgamNormalForm
    word: Word


def retraction_hom(spec: AmalgamSpec) -> GroupHom:
    """The retraction of the amalgam onto its left factor: factor
    generators map to themselves, the stable letter to the identity.
    Images are element indices of the left factor's enumeration."""
    pres = induced_presentation(spec)
    enum = spec.left_factor.enumeration()
    images = tuple(
        enum.index[img] for img in spec.left_factor.generator_images
    ) + (0,)
    return GroupHom(
        source=pres,
        generator_images=images,
        target_mul=enum.mul,
        target_inverse=enum.inv,
        target_identity=0,
    )


def stage_homomorphism(p: Presentation, spec: AmalgamSpec) -> GroupHom:
    """The embedding data for one stage: a generator of the presented
    group maps to (its image in the amalgam, itself); the stable letter
    maps to (the stable letter, identity).

    Raises RelationViolated when some separated-subgroup generator's image
    fails to commute with the stable letter, which means that subgroup
    does not sit inside the amalgamated subgroup at this stage.
    """
    source = stage_group_presentation(p, spec.separated_words, spec.stable_letter)
    t_nf = AmalgamNormalForm((0, 1))
    images = tuple(
        StagePair(
            amalgam_reduce(spec, [("g", spec.element_of_word(Word.gen(g)))]),
            Word.gen(g),
        )
        for g in range(p.rank)
    ) + (StagePair(t_nf, Word.identity()),)

    def mul(a: StagePair, b: StagePair) -> StagePair:
        return StagePair(amalgam_mul(spec, a.nf, b.nf), a.word * b.word)

    def inv(a: StagePair) -> StagePair:
        return StagePair(amalgam_inverse(spec, a.nf), a.word.inverse())

    def is_ident(a: StagePair) -> bool:
        # first coordinate is exact; the second is checked in the finite
        # quotient, since the ambient word problem is not decidable here
        if not a.nf.is_identity:
            return False
        img = spec.left_factor.word_image(a.word)
        return spec.left_factor.enumeration().index[img] == 0

    return GroupHom(
        source=source,
        generator_images=images,
        target_mul=mul,
        target_inverse=inv,
        target_identity=StagePair(amalgam_identity(), Word.identity()),
        identity_test=is_ident,
    )


def free_kernel(
    spec: AmalgamSpec, certify: bool = True, budget: int = DEFAULT_ENUM_BUDGET
) -> tuple[int, tuple[Word, ...]]:
    """Free basis of the kernel of the retraction killing the stable letter.

    One conjugate of the stable letter per transversal representative;
    rank equals the subgroup index in the left factor.  With certify, a
    coset enumeration over the induced presentation confirms the basis
    generates a subgroup of index equal to the left factor's order.
    """
    k = len(spec.left_factor.generator_names)
    t = Word.gen(k)
    basis = tuple(
        (spec.factor_word(u).inverse().concat(t).concat(spec.factor_word(u))).free_reduce()
        for u in spec.left_transversal
    )
    if certify:
        pres = induced_presentation(spec)
        order = spec.factor_order
        table = todd_coxeter(pres, basis, max_cosets=budget)
        if table.num_cosets != order:
            raise RelationViolated(
                "kernel basis does not have the expected index in the amalgam"
            )
    return len(spec.left_transversal), basis


def kernel_basis_word(spec: AmalgamSpec, w: Word) -> Word:
    """Express a retraction-kernel element as a word in the free basis.

    Walks the word over the induced alphabet; each stable-letter step
    contributes the basis conjugate indexed by the coset of the inverse
    of the running factor prefix.  Raises if the retraction image is not
    the identity, since then the word is outside the kernel.
    """
    enum = spec.left_factor.enumeration()
    prefix = 0
    out: list[Letter] = []
    for kind, val in stage_word_tokens(spec, w):
        if kind == "g":
            prefix = enum.mul(prefix, val)
        else:
            out.append(Letter(spec.coset_slot(enum.inv(prefix)), val))
    if prefix != 0:
        raise SchreierElementOutsideSubgroup(
            "word has a nontrivial retraction image; it is outside the kernel"
        )
    return Word(tuple(out)).free_reduce()


def double_embed(p: Presentation, copy: int, w: Word) -> Word:
    """Words of the two-sided double inside the amalgam: copy 0 is the
    group itself, copy 1 is its conjugate by the stable letter."""
    if copy not in (0, 1):
        raise ValueError("copy must be 0 or 1")
    if w.letters and w.max_gen() >= p.rank:
        raise ValueError("word uses a generator outside the presentation")
    if copy == 0:
        return w
    t = Word.gen(p.rank)
    return (t.concat(w).concat(t.inverse())).free_reduce()


# --- graph products -----------------------------------------------------------


@dataclass(frozen=True)
class SimpleGraph:
    """Finite simple undirected graph on vertices 0..n-1."""

    num_vertices: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        norm = set()
        for (a, b) in self.edges:
            if a == b or not (0 <= a < self.num_vertices and 0 <= b < self.num_vertices):
                raise ValueError("edges must join two distinct valid vertices")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    def link(self, v: int) -> tuple[int, ...]:
        return tuple(
            sorted(b if a == v else a for (a, b) in self.edges if v in (a, b))
        )


@dataclass(frozen=True)
class GraphStep:
    """One vertex peeled off a graph product: the remaining vertices, the
    link of the removed vertex (the amalgamated part), and the vertex."""

    remaining: tuple[int, ...]
    link: tuple[int, ...]
    vertex: int

    @property
    def is_free_product(self) -> bool:
        return not self.link

    @property
    def is_direct_product(self) -> bool:
        return set(self.link) == set(self.remaining)


def graph_product_step(graph: SimpleGraph, vertex: int) -> GraphStep:
    if not 0 <= vertex < graph.num_vertices:
        raise ValueError("vertex outside the graph")
    remaining = tuple(v for v in range(graph.num_vertices) if v != vertex)
    return GraphStep(remaining, graph.link(vertex), vertex)
