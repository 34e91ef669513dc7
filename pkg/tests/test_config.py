"""Config loading: schema enforcement, field-path errors, chain kinds."""

import json
from pathlib import Path

import pytest

import amalgamlab
from amalgamlab.config import load_config, _point_stabilizer_table
from amalgamlab.cosets import FiniteQuotient, todd_coxeter
from amalgamlab.errors import ConfigError
from amalgamlab.presentations import parse_presentation

CONFIG_DIR = Path(amalgamlab.__file__).parent / "configs"


def base_doc() -> dict:
    return {
        "name": "probe",
        "construction": "stage",
        "group": {"presentation": "<a | a^2>"},
        "subgroup": {"generators": "[ ]"},
        "chain": {"kind": "explicit", "words": "[ ]"},
        "schedule": {"stages": [0], "dimensions": [8], "seeds": [0]},
        "polynomials": [
            {"terms": [{"word": "a", "coeff": 1}, {"word": "t^-1", "coeff": 1}]}
        ],
        "radii": [2],
    }


def write(tmp_path: Path, doc: dict, name: str = "cfg.json") -> Path:
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def load_mutated(tmp_path, mutate):
    doc = base_doc()
    mutate(doc)
    return load_config(write(tmp_path, doc))


def expect_error(tmp_path, mutate, fragment: str):
    with pytest.raises(ConfigError) as exc:
        load_mutated(tmp_path, mutate)
    assert fragment in str(exc.value)


def test_bundled_configs_all_load():
    paths = sorted(CONFIG_DIR.glob("*.json"))
    assert len(paths) == 7
    for p in paths:
        cfg = load_config(p)
        assert cfg.name == p.stem


def test_loaded_fields_round_trip(tmp_path):
    cfg = load_mutated(tmp_path, lambda d: None)
    assert cfg.construction == "stage"
    assert cfg.alphabet == ("a", "t")
    assert cfg.chain.kind == "explicit"
    assert cfg.stages == (0,)
    assert cfg.polynomials[0].name == "p0"
    assert cfg.results_name == "probe-results.json"
    assert len(cfg.sha256) == 64
    assert json.loads(cfg.text) == base_doc()


def test_missing_file_is_a_config_error():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/nope.json")


def test_invalid_json_is_a_config_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert "not valid JSON" in str(exc.value)


def test_schema_errors_carry_field_paths(tmp_path):
    expect_error(tmp_path, lambda d: d.pop("subgroup"), "$.subgroup")
    expect_error(
        tmp_path, lambda d: d["schedule"].update(dimensions=[]), "$.schedule.dimensions"
    )
    expect_error(
        tmp_path,
        lambda d: d["schedule"].update(seeds=["zero"]),
        "$.schedule.seeds[0]",
    )
    expect_error(tmp_path, lambda d: d.update(construction="torus"), "$.construction")


def test_sections_must_match_the_construction(tmp_path):
    expect_error(
        tmp_path,
        lambda d: d.update(
            factors=[{"presentation": "<x |>"}, {"presentation": "<y |>"}]
        ),
        "$.factors: not allowed",
    )
    expect_error(
        tmp_path,
        lambda d: (d.update(construction="free-product"), d.pop("group"),
                   d.pop("subgroup"), d.pop("chain")),
        "$.factors: required",
    )


def test_duplicate_grid_entries_are_rejected(tmp_path):
    expect_error(
        tmp_path, lambda d: d["schedule"].update(dimensions=[8, 8]), "duplicate"
    )
    expect_error(tmp_path, lambda d: d.update(radii=[2, 2]), "duplicate")


def test_polynomial_validation(tmp_path):
    expect_error(
        tmp_path,
        lambda d: d["polynomials"][0]["terms"][0].update(coeff=1.5),
        "coefficient modulus",
    )
    expect_error(
        tmp_path,
        lambda d: d["polynomials"][0]["terms"][0].update(word="zz"),
        "$.polynomials[0].terms[0].word",
    )
    expect_error(
        tmp_path,
        lambda d: d["polynomials"].append(
            {"terms": [{"word": "a", "coeff": 1}, {"word": "a", "coeff": -1}]}
        ),
        "zero polynomial",
    )
    expect_error(
        tmp_path,
        lambda d: d["polynomials"].append(
            {"name": "p0", "terms": [{"word": "a", "coeff": 1}]}
        ),
        "distinct",
    )


def test_empty_word_means_identity(tmp_path):
    cfg = load_mutated(
        tmp_path,
        lambda d: d["polynomials"].__setitem__(
            0,
            {"terms": [{"word": "  ", "coeff": 0.5}, {"word": "a", "coeff": [0, 0.5]}]},
        ),
    )
    poly = cfg.polynomials[0].poly
    words = {w.to_signed() for w in poly.support()}
    assert () in words
    assert poly.max_abs_coeff() == pytest.approx(0.5)


def test_radii_must_cover_the_polynomial_support(tmp_path):
    expect_error(
        tmp_path,
        lambda d: d["polynomials"][0]["terms"].append({"word": "a t a", "coeff": 0.5}),
        "$.radii",
    )


def test_stable_letter_collision(tmp_path):
    expect_error(
        tmp_path,
        lambda d: d.update(group={"presentation": "<t | t^2>"}),
        "stable letter",
    )


def test_imaginary_coefficients_parse(tmp_path):
    cfg = load_mutated(
        tmp_path,
        lambda d: d["polynomials"][0]["terms"][0].update(coeff=[0.0, 1.0]),
    )
    assert cfg.polynomials[0].poly.max_abs_coeff() == pytest.approx(1.0)


# --- chain kinds ---------------------------------------------------------------


def test_stallings_chain_needs_a_free_group(tmp_path):
    expect_error(
        tmp_path,
        lambda d: d["chain"].update(kind="stallings", depth=2) or d["chain"].pop("words"),
        "relator-free",
    )


def test_stallings_stage_range(tmp_path):
    def mutate(d):
        d["group"] = {"presentation": "<a, b |>"}
        d["subgroup"] = {"generators": "[ a ]"}
        d["chain"] = {"kind": "stallings", "depth": 2}
        d["schedule"]["stages"] = [3]

    expect_error(tmp_path, mutate, "$.schedule.stages")


def test_single_step_chains_pin_stage_zero(tmp_path):
    expect_error(
        tmp_path,
        lambda d: d["schedule"].update(stages=[1]),
        "stages must be [0]",
    )


def test_chain_field_cross_rules(tmp_path):
    expect_error(
        tmp_path, lambda d: d["chain"].pop("words"), "$.chain.words: required"
    )
    expect_error(
        tmp_path,
        lambda d: d["chain"].update(depth=2),
        "$.chain.depth: not allowed",
    )


def test_quotient_chain_accepts_a_valid_action(tmp_path):
    def mutate(d):
        d["group"] = {"presentation": "<a | a^3>"}
        d["chain"] = {"kind": "quotient", "degree": 3, "images": [[1, 2, 0]]}
        d["polynomials"] = [{"terms": [{"word": "a", "coeff": 1}]}]
        d["radii"] = [2]

    cfg = load_mutated(tmp_path, mutate)
    assert cfg.chain.kind == "quotient"
    assert cfg.chain.table.num_cosets == 3


def test_quotient_chain_rejects_non_permutations(tmp_path):
    def mutate(d):
        d["chain"] = {"kind": "quotient", "degree": 2, "images": [[0, 0]]}

    expect_error(tmp_path, mutate, "$.chain.images[0]")


def test_quotient_chain_rejects_relator_violations(tmp_path):
    def mutate(d):
        # a has order 2 in the group but the image is a 3-cycle
        d["chain"] = {"kind": "quotient", "degree": 3, "images": [[1, 2, 0]]}

    expect_error(tmp_path, mutate, "relator")


def test_quotient_chain_rejects_intransitive_actions(tmp_path):
    def mutate(d):
        d["group"] = {"presentation": "<a |>"}
        d["chain"] = {"kind": "quotient", "degree": 3, "images": [[1, 0, 2]]}

    expect_error(tmp_path, mutate, "transitive")


def test_table_json_chain_round_trips(tmp_path):
    p = parse_presentation("<a | a^4>")
    table = todd_coxeter(p, ())
    table_path = tmp_path / "chain.json"
    table_path.write_text(table.to_json())

    def mutate(d):
        d["group"] = {"presentation": "<a | a^4>"}
        d["chain"] = {"kind": "table-json", "path": "chain.json"}

    cfg = load_mutated(tmp_path, mutate)
    assert cfg.chain.table.num_cosets == 4


def test_table_json_missing_file(tmp_path):
    def mutate(d):
        d["chain"] = {"kind": "table-json", "path": "absent.json"}

    expect_error(tmp_path, mutate, "$.chain.path")


# --- construction-specific sections --------------------------------------------


def test_free_product_generator_names_must_be_disjoint(tmp_path):
    def mutate(d):
        d["construction"] = "free-product"
        for key in ("group", "subgroup", "chain"):
            d.pop(key)
        d["factors"] = [{"presentation": "<a |>"}, {"presentation": "<a |>"}]
        d["polynomials"] = [{"terms": [{"word": "a", "coeff": 1}]}]

    expect_error(tmp_path, mutate, "disjoint")


def test_free_product_rejects_mixed_factors(tmp_path):
    def mutate(d):
        d["construction"] = "free-product"
        for key in ("group", "subgroup", "chain"):
            d.pop(key)
        d["factors"] = [{"presentation": "<a | a^2>"}, {"presentation": "<b |>"}]
        d["polynomials"] = [{"terms": [{"word": "a", "coeff": 1}]}]

    expect_error(tmp_path, mutate, "mixing")


def test_graph_step_validation(tmp_path):
    def ok(d):
        d["construction"] = "graph-step"
        for key in ("group", "subgroup", "chain"):
            d.pop(key)
        d["graph"] = {"vertices": 2, "edges": [[0, 1]], "step_vertex": 0}
        d["polynomials"] = [{"terms": [{"word": "v0", "coeff": 1}]}]

    cfg = load_mutated(tmp_path, ok)
    assert cfg.alphabet == ("v0", "v1")
    assert cfg.step_vertex == 0

    def bad_vertex(d):
        ok(d)
        d["graph"]["step_vertex"] = 5

    expect_error(tmp_path, bad_vertex, "$.graph.step_vertex")

    def bad_edge(d):
        ok(d)
        d["graph"]["edges"] = [[0, 0]]

    expect_error(tmp_path, bad_edge, "$.graph.edges")

    def bad_names(d):
        ok(d)
        d["graph"]["names"] = ["x"]

    expect_error(tmp_path, bad_names, "$.graph.names")


# --- the quotient stabilizer table ----------------------------------------------


def test_point_stabilizer_table_of_a_regular_action():
    q = FiniteQuotient(4, ("a",), ((1, 2, 3, 0),))
    t = _point_stabilizer_table(q)
    assert t.num_cosets == 4
    # the only Schreier generator is the cycle-closing power
    assert [w.to_signed() for w in t.subgroup_generators] == [(1, 1, 1, 1)]


def test_point_stabilizer_table_of_a_proper_action():
    # S3 on 3 points: the stabilizer of 0 has index 3
    q = FiniteQuotient(3, ("a", "b"), ((1, 0, 2), (1, 2, 0)))
    t = _point_stabilizer_table(q)
    assert t.num_cosets == 3
    for w in t.subgroup_generators:
        assert t.trace(0, w) == 0
