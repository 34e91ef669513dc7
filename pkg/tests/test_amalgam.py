"""Stage amalgams: normal forms, kernels, and homomorphism checks.

The independent referee throughout is a Reidemeister-Schreier readout for
the retraction kernel: an element with trivial retraction rewrites to a
word in the conjugates u^-1 t u by tracking the factor-element prefix at
each stable letter.  Retraction plus readout decides equality exactly, so
normal-form uniqueness is tested against a full word-problem oracle
rather than spot quotients.
"""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amalgamlab.amalgam import (
    AmalgamNormalForm,
    AmalgamSpec,
    SimpleGraph,
    amalgam_identity,
    amalgam_inverse,
    amalgam_mul,
    amalgam_reduce,
    build_stage_group,
    double_embed,
    exact_amalgam_spec,
    free_kernel,
    graph_product_step,
    induced_presentation,
    normal_form_from_json,
    reduce_stage_word,
    retraction_hom,
    retraction_image,
    stage_group_presentation,
    stage_homomorphism,
    stage_word_tokens,
)
from amalgamlab.cosets import reidemeister_schreier, todd_coxeter
from amalgamlab.errors import (
    BudgetExceeded,
    EnumerationTooLarge,
    RelationViolated,
    SubgroupNotContained,
)
from amalgamlab.presentations import parse_presentation, parse_subgroup_words
from amalgamlab.words import Letter, Word

S3 = parse_presentation("<a, b | a^2, b^3, (a b)^2>")
S3_SUBS = parse_subgroup_words("[ a ]", S3.generator_names)
S3_SPEC = build_stage_group(S3, S3_SUBS, todd_coxeter(S3, S3_SUBS))

Z2 = parse_presentation("<a | a^2>")
Z2_SPEC = build_stage_group(Z2, (), todd_coxeter(Z2, ()))


# --- independent word-problem oracle -------------------------------------------


def inverse_tokens(spec, tokens):
    enum = spec.left_factor.enumeration()
    return [
        ("g", enum.inv(v)) if k == "g" else ("t", -v) for (k, v) in reversed(tokens)
    ]


def kernel_readout(spec, tokens):
    """Rewrite a token word to a word in the kernel basis, or None when the
    retraction image is nontrivial.  At each stable letter the running
    factor prefix c contributes the basis letter indexed by the coset of
    c^-1."""
    enum = spec.left_factor.enumeration()
    c = 0
    letters = []
    for kind, val in tokens:
        if kind == "g":
            c = enum.mul(c, val)
        else:
            j = spec.coset_slot(enum.inv(c))
            letters.extend([Letter(j, 1 if val > 0 else -1)] * abs(val))
    if c != 0:
        return None
    return Word(letters).free_reduce()


def equal_in_amalgam(spec, t1, t2):
    readout = kernel_readout(spec, list(t1) + inverse_tokens(spec, t2))
    return readout is not None and readout.is_identity


def s3_tokens():
    return st.lists(
        st.one_of(
            st.tuples(st.just("g"), st.integers(0, 5)),
            st.tuples(st.just("t"), st.integers(-2, 2)),
        ),
        max_size=8,
    )


# --- building specs -------------------------------------------------------------


def test_order_two_group_with_trivial_subgroup():
    assert Z2_SPEC.factor_order == 2
    assert Z2_SPEC.amalgam_subgroup == frozenset({0})
    assert Z2_SPEC.left_transversal == (0, 1)


def test_symmetric_group_stage_matches_permutation_oracle():
    from oracles import oracle_by_name

    oracle = oracle_by_name("s3-a")
    assert oracle.core_order() == 1
    assert S3_SPEC.factor_order == oracle.quotient_order() == 6
    assert S3_SPEC.subgroup_order == 2
    assert S3_SPEC.amalgam_index == 3
    # the subgroup is exactly the stabilizer of the base coset
    enum = S3_SPEC.left_factor.enumeration()
    for h in S3_SPEC.amalgam_subgroup:
        assert enum.elements[h][0] == 0


def test_whole_group_as_subgroup_gives_direct_product():
    table = todd_coxeter(Z2, parse_subgroup_words("[ a ]", Z2.generator_names))
    spec = build_stage_group(Z2, parse_subgroup_words("[ a ]", Z2.generator_names), table)
    assert spec.left_transversal == (0,)
    assert spec.subgroup_order == spec.factor_order

    full = exact_amalgam_spec(S3, [S3.gen_word("a"), S3.gen_word("b")])
    assert full.factor_order == 6
    assert full.left_transversal == (0,)
    rank, basis = free_kernel(full)
    assert rank == 1
    assert basis == (Word.gen(2),)


def test_exact_spec_keeps_the_whole_group():
    spec = exact_amalgam_spec(S3, [S3.gen_word("a")])
    assert spec.factor_order == 6
    assert spec.subgroup_order == 2
    assert spec.amalgam_index == 3


def test_build_rejects_generators_outside_subgroup():
    table = todd_coxeter(S3, S3_SUBS)
    with pytest.raises(SubgroupNotContained):
        build_stage_group(S3, [S3.gen_word("b")], table)


def test_build_respects_enumeration_budget():
    table = todd_coxeter(S3, S3_SUBS)
    with pytest.raises(EnumerationTooLarge):
        build_stage_group(S3, S3_SUBS, table, budget=3)


def test_spec_validation_rejects_broken_subgroups():
    enum = S3_SPEC.left_factor.enumeration()
    some_b = next(i for i in range(6) if i not in S3_SPEC.amalgam_subgroup)
    with pytest.raises(ValueError):
        AmalgamSpec(S3_SPEC.left_factor, frozenset({0, some_b}), (0, 1, 2))
    with pytest.raises(ValueError):
        AmalgamSpec(S3_SPEC.left_factor, S3_SPEC.amalgam_subgroup, (0, 1))
    h = next(x for x in S3_SPEC.amalgam_subgroup if x)
    u1, u2 = S3_SPEC.left_transversal[1], S3_SPEC.left_transversal[2]
    with pytest.raises(ValueError):
        # last two entries lie in one coset
        AmalgamSpec(
            S3_SPEC.left_factor,
            S3_SPEC.amalgam_subgroup,
            (0, u1, enum.mul(h, u1)),
        )
    del u2


# --- normal forms ---------------------------------------------------------------


def test_single_factor_element_normal_form():
    enum = S3_SPEC.left_factor.enumeration()
    for g in range(6):
        nf = amalgam_reduce(S3_SPEC, [("g", g)])
        assert nf.syllables == ()
        assert nf.head[1] == 0
        rebuilt = enum.mul(nf.head[0], S3_SPEC.left_transversal[nf.tail])
        assert rebuilt == g


def test_head_commutes_with_stable_letter():
    for h in S3_SPEC.amalgam_subgroup:
        left = amalgam_reduce(S3_SPEC, [("g", h), ("t", 1)])
        right = amalgam_reduce(S3_SPEC, [("t", 1), ("g", h)])
        assert left == right == AmalgamNormalForm((h, 1))


def test_two_syllable_reduced_form():
    reps = [S3_SPEC.left_transversal[1], S3_SPEC.left_transversal[2]]
    enum = S3_SPEC.left_factor.enumeration()
    for g in reps:
        for g2 in reps:
            tokens = [("g", g), ("t", 1), ("g", g2), ("t", -1)]
            nf = amalgam_reduce(S3_SPEC, tokens)
            assert nf.syllable_count == 2
            # non-identity: either the retraction sees it, or the kernel
            # readout produces a nonempty basis word
            assert retraction_image(S3_SPEC, nf) == enum.mul(g, g2)
            if enum.mul(g, g2) == 0:
                readout = kernel_readout(S3_SPEC, tokens)
                assert readout is not None and not readout.is_identity
            assert not nf.is_identity


def test_reduce_handles_empty_and_cancelling_words():
    assert amalgam_reduce(S3_SPEC, []).is_identity
    assert amalgam_reduce(S3_SPEC, [("t", 2), ("t", -2)]).is_identity
    enum = S3_SPEC.left_factor.enumeration()
    g = S3_SPEC.left_transversal[1]
    assert amalgam_reduce(S3_SPEC, [("g", g), ("g", enum.inv(g))]).is_identity


@settings(max_examples=300, deadline=None)
@given(s3_tokens())
def test_reduce_is_idempotent(tokens):
    nf = amalgam_reduce(S3_SPEC, tokens)
    assert amalgam_reduce(S3_SPEC, nf.tokens(S3_SPEC)) == nf


@settings(max_examples=300, deadline=None)
@given(s3_tokens(), s3_tokens())
def test_normal_forms_decide_equality(t1, t2):
    same_nf = amalgam_reduce(S3_SPEC, t1) == amalgam_reduce(S3_SPEC, t2)
    assert same_nf == equal_in_amalgam(S3_SPEC, t1, t2)


@settings(max_examples=200, deadline=None)
@given(
    s3_tokens(),
    st.integers(0, 8),
    st.sampled_from(sorted(S3_SPEC.amalgam_subgroup)),
    st.sampled_from([-1, 1]),
)
def test_commuting_padding_leaves_normal_form_fixed(tokens, pos, h, sign):
    enum = S3_SPEC.left_factor.enumeration()
    pad = [("g", h), ("t", sign), ("g", enum.inv(h)), ("t", -sign)]
    pos = min(pos, len(tokens))
    padded = tokens[:pos] + pad + tokens[pos:]
    assert amalgam_reduce(S3_SPEC, padded) == amalgam_reduce(S3_SPEC, tokens)


@settings(max_examples=200, deadline=None)
@given(s3_tokens(), st.integers(0, 5))
def test_splitting_factor_tokens_leaves_normal_form_fixed(tokens, x):
    enum = S3_SPEC.left_factor.enumeration()
    split = []
    for kind, val in tokens:
        if kind == "g":
            split.append(("g", x))
            split.append(("g", enum.mul(enum.inv(x), val)))
        else:
            split.append((kind, val))
    assert amalgam_reduce(S3_SPEC, split) == amalgam_reduce(S3_SPEC, tokens)


@settings(max_examples=200, deadline=None)
@given(s3_tokens(), s3_tokens())
def test_product_and_inverse_of_normal_forms(t1, t2):
    a = amalgam_reduce(S3_SPEC, t1)
    b = amalgam_reduce(S3_SPEC, t2)
    assert amalgam_mul(S3_SPEC, a, b) == amalgam_reduce(S3_SPEC, list(t1) + list(t2))
    assert amalgam_mul(S3_SPEC, a, amalgam_inverse(S3_SPEC, a)).is_identity


@settings(max_examples=200, deadline=None)
@given(s3_tokens())
def test_retraction_matches_token_walk(tokens):
    enum = S3_SPEC.left_factor.enumeration()
    c = 0
    for kind, val in tokens:
        if kind == "g":
            c = enum.mul(c, val)
    nf = amalgam_reduce(S3_SPEC, tokens)
    assert retraction_image(S3_SPEC, nf) == c


def test_normal_form_serialization_round_trip():
    samples = [
        amalgam_identity(),
        amalgam_reduce(S3_SPEC, [("g", 2), ("t", 3)]),
        amalgam_reduce(S3_SPEC, [("t", 1), ("g", S3_SPEC.left_transversal[1])]),
        amalgam_reduce(
            S3_SPEC,
            [("g", 2), ("t", 1), ("g", 3), ("t", -2), ("g", S3_SPEC.left_transversal[2])],
        ),
    ]
    for nf in samples:
        text = nf.to_json()
        assert normal_form_from_json(text) == nf
    assert amalgam_identity().to_json() == '{"head":{"h":0,"m":0},"syllables":[]}'


# --- presentations and homomorphisms --------------------------------------------


def test_induced_presentation_relations_reduce_to_identity():
    pres = induced_presentation(S3_SPEC)
    assert pres.generator_names == ("a", "b", "t")
    for r in pres.relators:
        assert reduce_stage_word(S3_SPEC, r).is_identity


def test_retraction_hom_validates_and_matches():
    hom = retraction_hom(S3_SPEC)
    enum = S3_SPEC.left_factor.enumeration()
    for tokens in ([("g", 2), ("t", 5)], [("t", -1), ("g", 4), ("g", 1)]):
        nf = amalgam_reduce(S3_SPEC, tokens)
        word = Word(
            [le for (k, v) in tokens for le in (
                enum.words[v].letters if k == "g"
                else (Letter(2, 1 if v > 0 else -1),) * abs(v)
            )]
        )
        assert hom.word_image(word) == retraction_image(S3_SPEC, nf)


def test_stage_homomorphism_images_for_order_two_group():
    hom = stage_homomorphism(Z2, Z2_SPEC)
    a_img, t_img = hom.generator_images
    assert a_img.nf == AmalgamNormalForm((0, 0), (), 1)
    assert a_img.word == Word.gen(0)
    assert t_img.nf == AmalgamNormalForm((0, 1))
    assert t_img.word.is_identity

    image = hom.word_image(Word.from_signed([1, 2, 1, 2]))
    assert image.nf.syllable_count == 2
    assert retraction_image(Z2_SPEC, image.nf) == 0
    readout = kernel_readout(Z2_SPEC, [("g", 1), ("t", 1), ("g", 1), ("t", 1)])
    assert readout == Word.from_signed([2, 1])


def test_stage_homomorphism_checks_every_relation():
    hom = stage_homomorphism(S3, S3_SPEC)
    assert hom.source.generator_names == ("a", "b", "t")
    assert len(hom.source.relators) == len(S3.relators) + len(S3_SPEC.separated_words)
    for r in hom.source.relators:
        image = hom.word_image(r)
        assert image.nf.is_identity
        q = S3_SPEC.left_factor
        assert q.enumeration().index[q.word_image(image.word)] == 0


def test_stage_homomorphism_rejects_uncontained_subgroup():
    bad = replace(S3_SPEC, separated_words=(S3.gen_word("b"),))
    with pytest.raises(RelationViolated):
        stage_homomorphism(S3, bad)


def test_stage_presentation_avoids_name_collisions():
    p = parse_presentation("<t | t^2>")
    pres = stage_group_presentation(p, (), "t")
    assert pres.generator_names == ("t", "t_")


# --- retraction kernel ----------------------------------------------------------


def euler_rank(spec):
    chi = Fraction(1, spec.factor_order) - Fraction(1, spec.subgroup_order)
    return 1 - spec.factor_order * chi


def test_free_kernel_for_order_two_factor():
    rank, basis = free_kernel(Z2_SPEC)
    assert rank == euler_rank(Z2_SPEC) == 2
    got = {reduce_stage_word(Z2_SPEC, w) for w in basis}
    stated = {
        reduce_stage_word(Z2_SPEC, Word.from_signed([2])),
        reduce_stage_word(Z2_SPEC, Word.from_signed([1, 2, -1])),
    }
    assert got == stated


def test_free_kernel_for_symmetric_group_stage():
    rank, basis = free_kernel(S3_SPEC)
    assert rank == euler_rank(S3_SPEC) == 3
    for w in basis:
        nf = reduce_stage_word(S3_SPEC, w)
        assert retraction_image(S3_SPEC, nf) == 0
        assert not nf.is_identity


def test_free_kernel_presentation_is_relator_free():
    pres = induced_presentation(S3_SPEC)
    rank, basis = free_kernel(S3_SPEC)
    table = todd_coxeter(pres, basis, max_cosets=256)
    assert table.num_cosets == S3_SPEC.factor_order
    sub = reidemeister_schreier(pres, table)
    assert sub.relators == ()
    assert sub.rank == rank


def test_free_kernel_certification_rejects_wrong_basis():
    # dropping a conjugate leaves an infinite-index subgroup, so the
    # certifying enumeration must exhaust any finite budget
    pres = induced_presentation(S3_SPEC)
    short = free_kernel(S3_SPEC)[1][:2]
    with pytest.raises(BudgetExceeded):
        todd_coxeter(pres, short, max_cosets=512)


def test_free_kernel_local_basis_products_stay_nontrivial():
    rank, basis = free_kernel(S3_SPEC)
    for i in range(rank):
        for si in (1, -1):
            for j in range(rank):
                for sj in (1, -1):
                    wi = basis[i] if si == 1 else basis[i].inverse()
                    wj = basis[j] if sj == 1 else basis[j].inverse()
                    nf = reduce_stage_word(S3_SPEC, wi * wj)
                    expected = Word([Letter(i, si), Letter(j, sj)]).free_reduce()
                    tokens = stage_word_tokens(S3_SPEC, wi * wj)
                    assert kernel_readout(S3_SPEC, tokens) == expected
                    assert nf.is_identity == expected.is_identity


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.sampled_from([-1, 1])), max_size=4))
def test_kernel_words_reduce_like_free_words(letters):
    _, basis = free_kernel(S3_SPEC)
    word = Word.identity()
    for idx, sign in letters:
        word = word * (basis[idx] if sign == 1 else basis[idx].inverse())
    expected = Word([Letter(i, s) for (i, s) in letters]).free_reduce()
    tokens = stage_word_tokens(S3_SPEC, word)
    assert kernel_readout(S3_SPEC, tokens) == expected
    nf = reduce_stage_word(S3_SPEC, word)
    assert nf.is_identity == expected.is_identity


# --- doubles and graph products --------------------------------------------------


def test_double_embed_words():
    w = Word.from_signed([1, 2])
    assert double_embed(S3, 0, w) == w
    assert double_embed(S3, 1, w) == Word.from_signed([3, 1, 2, -3])
    assert double_embed(S3, 1, Word.identity()).is_identity
    with pytest.raises(ValueError):
        double_embed(S3, 2, w)
    with pytest.raises(ValueError):
        double_embed(S3, 0, Word.gen(5))


def test_double_copies_agree_on_the_subgroup():
    for h_word in (S3_SUBS[0], S3_SUBS[0] * S3_SUBS[0]):
        img0 = reduce_stage_word(S3_SPEC, double_embed(S3, 0, h_word))
        img1 = reduce_stage_word(S3_SPEC, double_embed(S3, 1, h_word))
        assert img0 == img1


def test_double_copies_differ_outside_the_subgroup():
    b = S3.gen_word("b")
    img0 = reduce_stage_word(S3_SPEC, double_embed(S3, 0, b))
    img1 = reduce_stage_word(S3_SPEC, double_embed(S3, 1, b))
    assert img0 != img1
    product = double_embed(S3, 0, b) * double_embed(S3, 1, b)
    nf = reduce_stage_word(S3_SPEC, product)
    assert nf.syllable_count == 2


def test_graph_step_extremes():
    no_edge = SimpleGraph(2, frozenset())
    step = graph_product_step(no_edge, 0)
    assert step.is_free_product and not step.is_direct_product
    assert step.remaining == (1,)

    one_edge = SimpleGraph(2, frozenset({(0, 1)}))
    step = graph_product_step(one_edge, 1)
    assert step.is_direct_product
    assert step.link == (0,)


def test_graph_validation():
    with pytest.raises(ValueError):
        SimpleGraph(2, frozenset({(0, 0)}))
    with pytest.raises(ValueError):
        SimpleGraph(2, frozenset({(0, 5)}))
    with pytest.raises(ValueError):
        graph_product_step(SimpleGraph(2, frozenset()), 7)
    # undirected: both orientations collapse to one edge
    g = SimpleGraph(3, frozenset({(1, 0), (0, 1)}))
    assert g.edges == frozenset({(0, 1)})


def _affine_flip_ball(radius):
    """Concrete model of the path-graph product of three order-two groups:
    the ends generate all integer isometries, the middle commutes with
    both.  Elements are (sign, offset, flag) triples."""
    gens = [(-1, 0, 0), (-1, 1, 0), (1, 0, 1)]

    def mul(x, y):
        return (x[0] * y[0], x[1] + x[0] * y[1], x[2] ^ y[2])

    seen = {(1, 0, 0)}
    frontier = [(1, 0, 0)]
    sizes = [1]
    for _ in range(radius):
        frontier = [
            z for x in frontier for g in gens
            if (z := mul(x, g)) not in seen and not seen.add(z)
        ]
        sizes.append(len(seen))
    return sizes


def test_path_graph_step_factors_match_enumeration():
    path = SimpleGraph(3, frozenset({(0, 1), (1, 2)}))
    step = graph_product_step(path, 1)
    assert step.remaining == (0, 2)
    assert step.link == (0, 2)
    assert step.is_direct_product

    # remaining factor is a free product: no edge joins the ends
    rest = graph_product_step(SimpleGraph(2, frozenset()), 0)
    assert rest.is_free_product

    # normal-form count from the decomposition: (alternating end-words) x
    # (middle flag); alternating words of length l >= 1 come in two kinds
    def decomposition_count(radius):
        def alt(upto):
            return 1 + 2 * upto

        return sum(alt(radius - flag) for flag in (0, 1) if radius >= flag)

    sizes = _affine_flip_ball(4)
    assert sizes == [decomposition_count(r) for r in range(5)]
    assert sizes == [1, 4, 8, 12, 16]
