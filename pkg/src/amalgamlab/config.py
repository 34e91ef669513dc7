"""Experiment configs: a JSON file names a construction, a group datum,
a grid of (stage, dimension, seed) cells, and the polynomials whose norms
the run certifies.

Validation happens in two passes.  A JSON schema shipped with the package
catches structural problems; every remaining cross-field rule (which
sections a construction needs, chain-kind requirements, alphabet checks,
coefficient bounds) is enforced here so that each failure names the
offending field by its path.  A config that survives loading can be run
without further user-facing errors of the "you wrote the file wrong" kind;
whatever fails later is a computation problem.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .amalgam import SimpleGraph
from .cosets import CosetTable, FiniteQuotient, coset_table_from_json
from .errors import ConfigError, ParseError
from .presentations import (
    Presentation,
    parse_presentation,
    parse_subgroup_words,
    parse_word,
    word_to_text,
)
from .words import GroupPolynomial, Word

STABLE_LETTER = "t"

_CHAIN_FIELDS = {
    "explicit": ("words",),
    "stallings": ("depth",),
    "quotient": ("degree", "images"),
    "table-json": ("path",),
}

_SECTIONS = {
    "stage": ("group", "subgroup", "chain"),
    "double": ("group", "subgroup", "chain"),
    "centralizer-extension": ("group", "subgroup", "chain"),
    "free-product": ("factors",),
    "graph-step": ("graph",),
}


@dataclass(frozen=True)
class PolynomialSpec:
    """One certified polynomial: a display name, the parsed terms, and a
    canonical text rendering (used in result tables)."""

    name: str
    poly: GroupPolynomial
    text: str


@dataclass(frozen=True)
class ChainSpec:
    kind: str
    words: tuple[Word, ...] = ()
    depth: int = 0
    table: CosetTable | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    construction: str
    group: Presentation | None
    subgroup_words: tuple[Word, ...]
    chain: ChainSpec | None
    factors: tuple[Presentation, ...]
    graph: SimpleGraph | None
    graph_names: tuple[str, ...]
    step_vertex: int
    stages: tuple[int, ...]
    dimensions: tuple[int, ...]
    seeds: tuple[int, ...]
    polynomials: tuple[PolynomialSpec, ...]
    radii: tuple[int, ...]
    ball_budget: int
    results_name: str
    table_name: str
    text: str = field(repr=False)
    sha256: str
    alphabet: tuple[str, ...]

    @property
    def max_radius(self) -> int:
        return max(self.radii)


def _schema() -> dict:
    data = resources.files("amalgamlab").joinpath("schema/experiment.schema.json")
    return json.loads(data.read_text())


def _validate_schema(doc: dict) -> None:
    validator = jsonschema.Draft7Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: str(e.json_path))
    if errors:
        lines = [f"{e.json_path}: {e.message}" for e in errors[:8]]
        raise ConfigError("; ".join(lines))


def _parse(fn, path: str, *args):
    try:
        return fn(*args)
    except ParseError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _model_alphabet(construction: str, doc: dict) -> tuple[str, ...]:
    if construction in ("stage", "double", "centralizer-extension"):
        p = _parse(parse_presentation, "$.group.presentation", doc["group"]["presentation"])
        if STABLE_LETTER in p.generator_names:
            raise ConfigError(
                f"$.group.presentation: generator {STABLE_LETTER!r} collides with the stable letter"
            )
        return p.generator_names + (STABLE_LETTER,)
    if construction == "free-product":
        names: list[str] = []
        for i, entry in enumerate(doc["factors"]):
            p = _parse(
                parse_presentation, f"$.factors[{i}].presentation", entry["presentation"]
            )
            names.extend(p.generator_names)
        if len(set(names)) != len(names):
            raise ConfigError("$.factors: factor generator names must be disjoint")
        return tuple(names)
    g = doc["graph"]
    n = g["vertices"]
    names = tuple(g.get("names") or (f"v{i}" for i in range(n)))
    if len(names) != n:
        raise ConfigError("$.graph.names: need exactly one name per vertex")
    if len(set(names)) != n:
        raise ConfigError("$.graph.names: vertex names must be distinct")
    return names


def _parse_polynomials(doc: dict, alphabet: tuple[str, ...]) -> tuple[PolynomialSpec, ...]:
    out = []
    for i, entry in enumerate(doc["polynomials"]):
        terms: list[tuple[Word, complex]] = []
        for j, term in enumerate(entry["terms"]):
            text = term["word"].strip()
            path = f"$.polynomials[{i}].terms[{j}].word"
            w = Word.identity() if not text else _parse(parse_word, path, text, alphabet)
            c = term["coeff"]
            coeff = complex(c[0], c[1]) if isinstance(c, list) else complex(c)
            terms.append((w, coeff))
        poly = GroupPolynomial(terms)
        if not poly.terms:
            raise ConfigError(f"$.polynomials[{i}]: terms cancel to the zero polynomial")
        if poly.max_abs_coeff() > 1 + 1e-12:
            raise ConfigError(
                f"$.polynomials[{i}]: coefficient modulus exceeds the certification bound 1"
            )
        name = entry.get("name") or f"p{i}"
        rendered = " + ".join(
            f"({c.real:g}{c.imag:+g}i)*{word_to_text(w, alphabet)}"
            if c.imag
            else f"{c.real:g}*{word_to_text(w, alphabet)}"
            for w, c in sorted(poly.terms.items(), key=lambda kv: kv[0].to_signed())
        )
        out.append(PolynomialSpec(name, poly, rendered))
    names = [p.name for p in out]
    if len(set(names)) != len(names):
        raise ConfigError("$.polynomials: polynomial names must be distinct")
    return tuple(out)


def _require_distinct(values, path: str) -> tuple:
    vals = tuple(values)
    if len(set(vals)) != len(vals):
        raise ConfigError(f"{path}: duplicate entries")
    return vals


def _parse_chain(doc: dict, group: Presentation, config_dir: Path) -> ChainSpec:
    chain = doc["chain"]
    kind = chain["kind"]
    required = _CHAIN_FIELDS[kind]
    for fld in required:
        if fld not in chain:
            raise ConfigError(f"$.chain.{fld}: required for chain kind {kind!r}")
    for fld in set().union(*(_CHAIN_FIELDS[k] for k in _CHAIN_FIELDS)) - set(required):
        if fld in chain:
            raise ConfigError(f"$.chain.{fld}: not allowed for chain kind {kind!r}")
    if kind == "explicit":
        words = _parse(
            parse_subgroup_words, "$.chain.words", chain["words"], group.generator_names
        )
        return ChainSpec("explicit", words=words)
    if kind == "stallings":
        if group.relators:
            raise ConfigError(
                "$.chain.kind: 'stallings' chains need a relator-free group presentation"
            )
        return ChainSpec("stallings", depth=chain["depth"])
    if kind == "quotient":
        degree = chain["degree"]
        images = chain["images"]
        if len(images) != group.rank:
            raise ConfigError("$.chain.images: need one image per group generator")
        perms = []
        for i, img in enumerate(images):
            if sorted(img) != list(range(degree)):
                raise ConfigError(
                    f"$.chain.images[{i}]: not a permutation of 0..{degree - 1}"
                )
            perms.append(tuple(img))
        q = FiniteQuotient(degree, group.generator_names, tuple(perms))
        ident = tuple(range(degree))
        for i, r in enumerate(group.relators):
            if q.word_image(r) != ident:
                raise ConfigError(f"$.chain.images: relator {i} does not map to the identity")
        return ChainSpec("quotient", table=_point_stabilizer_table(q))
    path = (config_dir / chain["path"]).resolve()
    if not path.is_file():
        raise ConfigError(f"$.chain.path: no such file: {path}")
    try:
        table = coset_table_from_json(path.read_text(), group.generator_names)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"$.chain.path: {exc}") from exc
    if len(table.generator_actions) != group.rank:
        raise ConfigError("$.chain.path: table generator count disagrees with the group")
    return ChainSpec("table-json", table=table)


def _point_stabilizer_table(q: FiniteQuotient) -> CosetTable:
    """Coset table of the stabilizer of point 0 under a finite quotient
    action: the chain subgroup is the full preimage of that stabilizer."""
    degree = q.degree
    parent = [-1] * degree
    via = [0] * degree
    order = [0]
    for x in order:
        for g, img in enumerate(q.generator_images):
            y = img[x]
            if y != 0 and parent[y] == -1:
                parent[y] = x
                via[y] = g
                order.append(y)
    if len(order) != degree:
        raise ConfigError("$.chain.images: the action is not transitive")
    words = [Word.identity()] * degree
    for y in order[1:]:
        words[y] = words[parent[y]].concat(Word.gen(via[y])).free_reduce()
    subgens = []
    for c in range(degree):
        for g, img in enumerate(q.generator_images):
            w = words[c].concat(Word.gen(g)).concat(words[img[c]].inverse()).free_reduce()
            if not w.is_identity:
                subgens.append(w)
    return CosetTable(
        num_cosets=degree,
        generator_actions=tuple(q.generator_images),
        subgroup_generators=tuple(subgens),
        transversal=tuple(words),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Read, schema-check, and cross-validate an experiment config."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _validate_schema(doc)

    construction = doc["construction"]
    needed = _SECTIONS[construction]
    for section in ("group", "subgroup", "chain", "factors", "graph"):
        if section in needed and section not in doc:
            raise ConfigError(f"$.{section}: required for construction {construction!r}")
        if section not in needed and section in doc:
            raise ConfigError(f"$.{section}: not allowed for construction {construction!r}")

    group = None
    subgroup_words: tuple[Word, ...] = ()
    chain = None
    factors: tuple[Presentation, ...] = ()
    graph = None
    graph_names: tuple[str, ...] = ()
    step_vertex = -1

    alphabet = _model_alphabet(construction, doc)

    if "group" in needed:
        group = parse_presentation(doc["group"]["presentation"])
        subgroup_words = _parse(
            parse_subgroup_words,
            "$.subgroup.generators",
            doc["subgroup"]["generators"],
            group.generator_names,
        )
        chain = _parse_chain(doc, group, path.parent)
        if construction == "centralizer-extension":
            if chain.kind != "stallings":
                raise ConfigError(
                    "$.chain.kind: centralizer-extension runs need a 'stallings' chain"
                )
            if not subgroup_words:
                raise ConfigError("$.subgroup.generators: at least one word is required")
        if chain.kind == "stallings" and not subgroup_words:
            raise ConfigError("$.subgroup.generators: a stallings chain needs subgroup words")

    if construction == "free-product":
        factors = tuple(
            parse_presentation(entry["presentation"]) for entry in doc["factors"]
        )
        free = [not f.relators for f in factors]
        if any(free) and not all(free):
            raise ConfigError(
                "$.factors: mixing a free factor with a presented finite factor is unsupported"
            )

    if construction == "graph-step":
        g = doc["graph"]
        graph_names = alphabet
        step_vertex = g["step_vertex"]
        if step_vertex >= g["vertices"]:
            raise ConfigError("$.graph.step_vertex: vertex outside the graph")
        try:
            graph = SimpleGraph(g["vertices"], frozenset(tuple(e) for e in g["edges"]))
        except ValueError as exc:
            raise ConfigError(f"$.graph.edges: {exc}") from exc

    sched = doc["schedule"]
    stages = _require_distinct(sched["stages"], "$.schedule.stages")
    dims = _require_distinct(sched["dimensions"], "$.schedule.dimensions")
    seeds = _require_distinct(sched["seeds"], "$.schedule.seeds")
    if chain is not None and chain.kind == "stallings":
        bad = [s for s in stages if not 1 <= s <= chain.depth]
        if bad:
            raise ConfigError(
                f"$.schedule.stages: stage {bad[0]} outside the chain depth range 1..{chain.depth}"
            )
    elif stages != (0,):
        raise ConfigError(
            "$.schedule.stages: this construction has a single step; stages must be [0]"
        )

    polynomials = _parse_polynomials(doc, alphabet)
    radii = _require_distinct(sorted(doc["radii"]), "$.radii")
    longest = max(p.poly.max_support_length() for p in polynomials)
    if min(radii) < longest:
        raise ConfigError(
            f"$.radii: smallest radius {min(radii)} is below the longest "
            f"polynomial support length {longest}"
        )

    output = doc.get("output", {})
    name = doc["name"]
    return ExperimentConfig(
        name=name,
        construction=construction,
        group=group,
        subgroup_words=subgroup_words,
        chain=chain,
        factors=factors,
        graph=graph,
        graph_names=graph_names,
        step_vertex=step_vertex,
        stages=stages,
        dimensions=dims,
        seeds=seeds,
        polynomials=polynomials,
        radii=radii,
        ball_budget=doc.get("ball_budget", 200_000),
        results_name=output.get("results", f"{name}-results.json"),
        table_name=output.get("table", f"{name}-table.csv"),
        text=text,
        sha256=hashlib.sha256(text.encode()).hexdigest(),
        alphabet=alphabet,
    )
