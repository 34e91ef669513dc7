"""Walk through the centralizer extension construction on F2.

The centralizer of a basis letter inside a rank-2 free group is the
cyclic group it generates.  A Stallings cover of that subgroup gives a
finite-index chain step; the stage group glues the induced finite
quotient to (subgroup x Z), and the retraction kernel is free of rank
equal to the subgroup's index in the quotient.

The second half shows the budget wall: depth-2 covers already have
normal cores too large to enumerate, and the tool refuses loudly rather
than silently truncating.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from amalgamlab.amalgam import build_stage_group, free_kernel, reduce_stage_word
from amalgamlab.errors import AmalgamLabError
from amalgamlab.presentations import parse_presentation, parse_subgroup_words, word_to_text
from amalgamlab.reps import ModelSchedule, regular_rep, stage_model
from amalgamlab.spectral import AmalgamBallSource, ball_lower_bound, mf_report
from amalgamlab.stallings import stallings_chain
from amalgamlab.words import GroupPolynomial, Letter, Word


def main() -> None:
    p = parse_presentation("<a, b |>")
    subgens = parse_subgroup_words("[ a ]", p.generator_names)
    print("group: free of rank 2; subgroup: the centralizer of a, <a>")

    chain = stallings_chain(p.rank, subgens, 1)
    table = chain[0].to_coset_table()
    spec = build_stage_group(p, subgens, table)
    rank, basis = free_kernel(spec)
    print(f"depth-1 cover: index {table.num_cosets}, finite factor of order "
          f"{spec.factor_order}, amalgam subgroup of order {spec.subgroup_order}")
    print(f"retraction kernel: free of rank {rank}")
    names = p.generator_names + (spec.stable_letter,)
    for w in basis:
        print("  basis:", word_to_text(w, names))

    poly = GroupPolynomial(
        {Word((Letter(g, s),)): 1.0 for g in (0, p.rank) for s in (1, -1)}
    )
    ref = ball_lower_bound(AmalgamBallSource(spec), poly, 4)
    print(f"ball lower bound at radius 4: {ref.value:.6f} ({ref.kind})")

    g_model = regular_rep(spec.left_factor)
    for n in (8, 32, 128):
        rep = stage_model(p, subgens, spec, ModelSchedule(1, n, 0), g_model)
        words = [Word.identity()] + [Word.gen(g, s) for g in range(len(names)) for s in (1, -1)]
        rpt = mf_report(
            rep, words, [poly], [ref],
            identity_filter=lambda w: reduce_stage_word(spec, w).is_identity,
        )
        print(f"  n={n:4d}: dim {rep.dimension:5d}  eps1={rpt.eps1:.1e}  "
              f"eps2={rpt.eps2:.4f}  norm={rpt.gaps[0].model.value:.4f}  "
              f"gap={rpt.gaps[0].gap:+.4f}")

    print("\ndepth-2 cover: the normal core explodes combinatorially")
    deeper = stallings_chain(p.rank, subgens, 2)[1].to_coset_table()
    print(f"  cover index: {deeper.num_cosets}")
    try:
        build_stage_group(p, subgens, deeper)
        print("  unexpectedly enumerable")
    except AmalgamLabError as exc:
        print(f"  refused: {exc}")


if __name__ == "__main__":
    main()
