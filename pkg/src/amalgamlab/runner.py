"""Grid runner and report generator for experiment configs.

A run expands the schedule into (stage, dimension, seed) cells, builds
one model per cell, measures its defects against ball lower bounds, and
writes three files: a JSON result, a CSV table, and a timing sidecar.
The JSON and CSV are byte-identical across re-runs of the same config on
one platform; timings are wall-clock and live in their own file so they
never break that guarantee.  Every result embeds the config text it was
produced from, so a result file alone suffices to reproduce itself.

Cells may execute concurrently; assembly order is fixed by sorting on
the cell coordinates, never by completion order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .amalgam import (
    AmalgamSpec,
    build_stage_group,
    double_embed,
    graph_product_step,
    reduce_stage_word,
)
from .config import ExperimentConfig, load_config
from .cosets import DEFAULT_MAX_COSETS, FiniteQuotient, normal_core, todd_coxeter
from .errors import AmalgamLabError, ComputationError
from .reps import (
    IdentityOp,
    ModelSchedule,
    PermOp,
    TensorOp,
    UnitaryRep,
    compose,
    random_permutation_model,
    regular_rep,
    stage_model,
)
from .rng import SplitMix64
from .spectral import (
    AmalgamBallSource,
    FiniteBallSource,
    FreeBallSource,
    FreeProductBallSource,
    NormEstimate,
    ball_lower_bound,
    mf_report,
    norm_estimate_from_json,
)
from .stallings import stallings_chain
from .words import Letter, Word

RESULT_FORMAT = 1


@dataclass(frozen=True)
class StageContext:
    """Everything a cell needs that depends only on the stage index."""

    stage: int
    builder: Callable[[int, int], UnitaryRep]
    ball_source: object
    identity_filter: Callable[[Word], bool]
    test_words: tuple[Word, ...]
    notes: dict


def _short_words(rank: int) -> tuple[Word, ...]:
    """Identity, single letters, and reduced two-letter words."""
    out = [Word.identity()]
    letters = [Letter(g, s) for g in range(rank) for s in (1, -1)]
    out.extend(Word((le,)) for le in letters)
    for a in letters:
        for b in letters:
            if a.gen == b.gen and a.sign == -b.sign:
                continue
            out.append(Word((a, b)))
    return tuple(out)


def _dedupe(words) -> tuple[Word, ...]:
    seen = set()
    out = []
    for w in words:
        key = w.to_signed()
        if key not in seen:
            seen.add(key)
            out.append(w)
    return tuple(out)


def _chain_table(cfg: ExperimentConfig, stage: int):
    chain = cfg.chain
    if chain.kind == "explicit":
        return todd_coxeter(cfg.group, chain.words, max_cosets=DEFAULT_MAX_COSETS)
    if chain.kind == "stallings":
        graphs = stallings_chain(cfg.group.rank, cfg.subgroup_words, chain.depth)
        return graphs[stage - 1].to_coset_table()
    return chain.table


def _amalgam_context(cfg: ExperimentConfig, stage: int) -> StageContext:
    p = cfg.group
    spec = build_stage_group(p, cfg.subgroup_words, _chain_table(cfg, stage))
    g_model = regular_rep(spec.left_factor)

    def builder(n: int, seed: int) -> UnitaryRep:
        return stage_model(p, cfg.subgroup_words, spec, ModelSchedule(stage, n, seed), g_model)

    if cfg.construction == "double":
        base = _short_words(p.rank)
        words = [double_embed(p, c, w) for c in (0, 1) for w in base]
        singles = [Word.gen(g, s) for g in range(p.rank) for s in (1, -1)]
        words.extend(
            double_embed(p, 0, a) * double_embed(p, 1, b) for a in singles for b in singles
        )
        test_words = _dedupe(words)
    else:
        test_words = _short_words(p.rank + 1)

    return StageContext(
        stage=stage,
        builder=builder,
        ball_source=AmalgamBallSource(spec),
        identity_filter=lambda w: reduce_stage_word(spec, w).is_identity,
        test_words=test_words,
        notes={
            "factor_order": spec.factor_order,
            "subgroup_order": spec.subgroup_order,
            "kernel_rank": len(spec.left_transversal),
        },
    )


def _finite_quotient(p) -> FiniteQuotient:
    table = todd_coxeter(p, (), max_cosets=DEFAULT_MAX_COSETS)
    return normal_core(table, p)


def _fold(source, w: Word):
    key = source.identity()
    for le in reversed(tuple(w)):
        key = source.left_apply(key, le)
    return key


def _free_product_context(cfg: ExperimentConfig) -> StageContext:
    ranks = [f.rank for f in cfg.factors]
    total = sum(ranks)
    if not any(f.relators for f in cfg.factors):

        def free_builder(n: int, seed: int) -> UnitaryRep:
            rpm = random_permutation_model(total, n, seed)
            return UnitaryRep(rpm.dimension, cfg.alphabet, rpm.images, rpm.kind, rpm.source, seed)

        return StageContext(
            stage=0,
            builder=free_builder,
            ball_source=FreeBallSource(total),
            identity_filter=lambda w: w.is_identity,
            test_words=_short_words(total),
            notes={"factors": "free", "total_rank": total},
        )

    q1 = _finite_quotient(cfg.factors[0])
    q2 = _finite_quotient(cfg.factors[1])
    d1, d2 = q1.degree, q2.degree
    base = d1 * d2
    reg1 = regular_rep(q1)
    reg2 = regular_rep(q2)
    source = FreeProductBallSource(q1, q2)

    def builder(n: int, seed: int) -> UnitaryRep:
        k = max(1, n // base)
        dim = base * k
        # a shared random conjugation decouples the two factor embeddings;
        # factor relators still collapse exactly on their own side
        wperm = PermOp(SplitMix64(seed).permutation(dim))
        wadj = wperm.adjoint()
        images = [TensorOp(reg1.images[g], IdentityOp(d2 * k)) for g in range(q1.rank)]
        for g in range(q2.rank):
            inner = TensorOp(IdentityOp(d1 * k), reg2.images[g])
            images.append(compose(wperm, compose(inner, wadj)))
        return UnitaryRep(
            dim, cfg.alphabet, tuple(images), "composed", f"free-product({d1},{d2})", seed
        )

    return StageContext(
        stage=0,
        builder=builder,
        ball_source=source,
        identity_filter=lambda w: _fold(source, w) == (),
        test_words=_short_words(total),
        notes={"factors": "finite", "factor_orders": [d1, d2]},
    )


def _xor_quotient(names: Sequence[str]) -> FiniteQuotient:
    v = len(names)
    deg = 1 << v
    perms = tuple(tuple(x ^ (1 << g) for x in range(deg)) for g in range(v))
    return FiniteQuotient(deg, tuple(names), perms)


def _graph_context(cfg: ExperimentConfig) -> StageContext:
    step = graph_product_step(cfg.graph, cfg.step_vertex)
    q = _xor_quotient(cfg.graph_names)
    model = regular_rep(q)
    ident = tuple(range(q.degree))
    return StageContext(
        stage=0,
        builder=lambda n, seed: model,
        ball_source=FiniteBallSource(q),
        identity_filter=lambda w: q.word_image(w) == ident,
        test_words=_short_words(len(cfg.graph_names)),
        notes={
            "vertex": step.vertex,
            "link": list(step.link),
            "remaining": list(step.remaining),
            "is_free_product": step.is_free_product,
            "is_direct_product": step.is_direct_product,
            "quotient_order": q.degree,
        },
    )


def stage_context(cfg: ExperimentConfig, stage: int) -> StageContext:
    if cfg.construction in ("stage", "double", "centralizer-extension"):
        return _amalgam_context(cfg, stage)
    if cfg.construction == "free-product":
        return _free_product_context(cfg)
    return _graph_context(cfg)


def _cached(cfg: ExperimentConfig, stage: int, i: int, r: int, compute):
    """Ball bounds are pure functions of the config bytes and cell, so the
    optional AMALGAMLAB_CACHE directory can memoize them across runs."""
    cache_dir = os.environ.get("AMALGAMLAB_CACHE")
    if not cache_dir:
        return compute()
    key = hashlib.sha256(
        f"{cfg.sha256}:{stage}:{i}:{r}:{cfg.ball_budget}".encode()
    ).hexdigest()
    path = Path(cache_dir) / f"ball-{key}.json"
    if path.is_file():
        return norm_estimate_from_json(json.loads(path.read_text()))
    est = compute()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(est.to_json_dict(), sort_keys=True))
    return est


def _stage_references(
    cfg: ExperimentConfig, ctx: StageContext
) -> dict[tuple[int, int], NormEstimate]:
    refs = {}
    for i, pspec in enumerate(cfg.polynomials):
        for r in cfg.radii:
            try:
                refs[(i, r)] = _cached(
                    cfg,
                    ctx.stage,
                    i,
                    r,
                    lambda: ball_lower_bound(
                        ctx.ball_source, pspec.poly, r, budget=cfg.ball_budget
                    ),
                )
            except AmalgamLabError as exc:
                raise ComputationError(
                    f"reference stage={ctx.stage} polynomial={pspec.name} radius={r}: {exc}"
                ) from exc
    return refs


def _run_cell(cfg: ExperimentConfig, ctx: StageContext, refs, n: int, seed: int) -> dict:
    try:
        rep = ctx.builder(n, seed)
        max_r = cfg.max_radius
        report = mf_report(
            rep,
            ctx.test_words,
            [p.poly for p in cfg.polynomials],
            [refs[(i, max_r)] for i in range(len(cfg.polynomials))],
            identity_filter=ctx.identity_filter,
        )
    except AmalgamLabError as exc:
        raise ComputationError(f"cell stage={ctx.stage} n={n} seed={seed}: {exc}") from exc
    return {
        "stage": ctx.stage,
        "n": n,
        "seed": seed,
        "model": {"dimension": rep.dimension, "kind": rep.kind, "source": rep.source},
        "report": report.to_json_dict(),
    }


def run(config_path: str | Path, workers: int = 1, out_dir: str | Path = ".") -> dict:
    """Execute one config; returns the paths of the files written."""
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    started = time.monotonic()
    contexts = {}
    references = {}
    for stage in sorted(cfg.stages):
        try:
            ctx = stage_context(cfg, stage)
        except AmalgamLabError as exc:
            raise ComputationError(f"stage {stage}: {exc}") from exc
        contexts[stage] = ctx
        references[stage] = _stage_references(cfg, ctx)

    coords = sorted(
        (stage, n, seed) for stage in cfg.stages for n in cfg.dimensions for seed in cfg.seeds
    )
    cells = {}
    timings = {}

    def work(coord):
        stage, n, seed = coord
        t0 = time.monotonic()
        payload = _run_cell(cfg, contexts[stage], references[stage], n, seed)
        return coord, payload, time.monotonic() - t0

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for coord, payload, dt in pool.map(work, coords):
                cells[coord] = payload
                timings[coord] = dt
    else:
        for coord in coords:
            coord, payload, dt = work(coord)
            cells[coord] = payload
            timings[coord] = dt

    ref_rows = [
        {
            "stage": stage,
            "polynomial": cfg.polynomials[i].name,
            "radius": r,
            "estimate": est.to_json_dict(),
        }
        for stage in sorted(references)
        for (i, r), est in sorted(references[stage].items())
    ]
    payload = {
        "name": cfg.name,
        "versions": {"amalgamlab": __version__, "result_format": RESULT_FORMAT},
        "config_sha256": cfg.sha256,
        "config_text": cfg.text,
        "construction": cfg.construction,
        "alphabet": list(cfg.alphabet),
        "polynomials": [{"name": p.name, "text": p.text} for p in cfg.polynomials],
        "radii": list(cfg.radii),
        "stage_notes": [
            {"stage": s, **contexts[s].notes} for s in sorted(contexts)
        ],
        "references": ref_rows,
        "cells": [cells[c] for c in coords],
    }

    results_path = out / cfg.results_name
    results_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")

    table_path = out / cfg.table_name
    table_path.write_text(_csv_table(payload))

    timings_path = out / f"{Path(cfg.results_name).stem}-timings.json"
    timings_payload = {
        "total_seconds": time.monotonic() - started,
        "cells": [
            {"stage": s, "n": n, "seed": sd, "seconds": timings[(s, n, sd)]}
            for (s, n, sd) in coords
        ],
    }
    timings_path.write_text(json.dumps(timings_payload, indent=2) + "\n")

    return {"results": results_path, "table": table_path, "timings": timings_path}


def _reference_lookup(payload: dict) -> dict:
    return {
        (row["stage"], row["polynomial"], row["radius"]): row["estimate"]
        for row in payload["references"]
    }


def _csv_table(payload: dict) -> str:
    radii = payload["radii"]
    refs = _reference_lookup(payload)
    names = [p["name"] for p in payload["polynomials"]]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["stage", "n", "seed", "polynomial", "eps1", "eps2", "eps3", "model_norm",
         "model_kind", "gap", "one_sided"]
        + [f"ball_R{r}" for r in radii]
    )
    for cell in payload["cells"]:
        rep = cell["report"]
        for i, gap in enumerate(rep["gaps"]):
            writer.writerow(
                [
                    cell["stage"],
                    cell["n"],
                    cell["seed"],
                    names[i],
                    repr(rep["eps1"]),
                    repr(rep["eps2"]),
                    repr(rep["eps3"]),
                    repr(gap["model"]["value"]),
                    gap["model"]["kind"],
                    repr(gap["gap"]),
                    str(gap["one_sided"]).lower(),
                ]
                + [repr(refs[(cell["stage"], names[i], r)]["value"]) for r in radii]
            )
    return buf.getvalue()


# --- reporting ----------------------------------------------------------------


_REPORT_COLUMNS = (
    "config", "stage", "n", "seed", "polynomial", "eps1", "eps2", "eps3",
    "model_norm", "ball_radius", "ball_lower", "gap",
)


def _load_results(path: Path) -> dict:
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ComputationError(f"corrupt results file {path}: {exc}") from exc
    missing = {"name", "versions", "polynomials", "radii", "references", "cells"} - set(payload)
    if missing:
        raise ComputationError(
            f"corrupt results file {path}: missing keys {sorted(missing)}"
        )
    return payload


def _report_rows(payloads: Sequence[dict]) -> list[dict]:
    rows = []
    for payload in payloads:
        refs = _reference_lookup(payload)
        names = [p["name"] for p in payload["polynomials"]]
        max_r = max(payload["radii"])
        for cell in payload["cells"]:
            rep = cell["report"]
            for i, gap in enumerate(rep["gaps"]):
                ball = refs[(cell["stage"], names[i], max_r)]
                rows.append(
                    {
                        "config": payload["name"],
                        "stage": cell["stage"],
                        "n": cell["n"],
                        "seed": cell["seed"],
                        "polynomial": names[i],
                        "eps1": rep["eps1"],
                        "eps2": rep["eps2"],
                        "eps3": rep["eps3"],
                        "model_norm": gap["model"]["value"],
                        "ball_radius": max_r,
                        "ball_lower": ball["value"],
                        "gap": gap["gap"],
                    }
                )
    rows.sort(
        key=lambda r: (r["stage"], r["n"], r["config"], r["seed"], r["polynomial"])
    )
    return rows


def _format_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def render_report(paths: Sequence[str | Path], fmt: str = "md") -> str:
    """Merge result files into one table sorted by (stage, n)."""
    payloads = [_load_results(Path(p)) for p in paths]
    seen = {}
    for path, payload in zip(paths, payloads):
        key = json.dumps(payload["versions"], sort_keys=True)
        if seen and key not in seen:
            (other_key, other_path) = next(iter(seen.items()))
            raise ComputationError(
                f"result files disagree on versions: {other_path} has {other_key} "
                f"but {path} has {key}"
            )
        seen.setdefault(key, path)
    rows = _report_rows(payloads)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_REPORT_COLUMNS)
        for row in rows:
            writer.writerow(
                [repr(row[c]) if isinstance(row[c], float) else row[c] for c in _REPORT_COLUMNS]
            )
        return buf.getvalue()
    header = "| " + " | ".join(_REPORT_COLUMNS) + " |"
    rule = "|" + "|".join(" --- " for _ in _REPORT_COLUMNS) + "|"
    lines = [header, rule]
    for row in rows:
        lines.append("| " + " | ".join(_format_value(row[c]) for c in _REPORT_COLUMNS) + " |")
    return "\n".join(lines) + "\n"


def render_plots(paths: Sequence[str | Path], out_dir: str | Path = ".") -> list[Path]:
    """Static plots of recorded data: norm vs n and trace defect vs n."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for path in paths:
        payload = _load_results(Path(path))
        rows = _report_rows([payload])
        name = payload["name"]

        groups: dict[tuple, list] = {}
        for row in rows:
            groups.setdefault((row["stage"], row["polynomial"]), []).append(row)

        fig, ax = plt.subplots(figsize=(6, 4))
        for (stage, poly), grp in sorted(groups.items()):
            xs = [r["n"] for r in grp]
            ys = [r["model_norm"] for r in grp]
            ax.plot(xs, ys, "o", label=f"stage {stage}, {poly}")
            ax.axhline(grp[0]["ball_lower"], linestyle="--", linewidth=0.8)
        ax.set_xlabel("model dimension parameter")
        ax.set_ylabel("operator norm")
        ax.legend(fontsize=7)
        fig.tight_layout()
        norm_path = out / f"{name}-norms.png"
        fig.savefig(norm_path, dpi=120)
        plt.close(fig)
        written.append(norm_path)

        fig, ax = plt.subplots(figsize=(6, 4))
        for (stage, poly), grp in sorted(groups.items()):
            xs = [r["n"] for r in grp]
            ys = [r["eps2"] for r in grp]
            ax.plot(xs, ys, "o", label=f"stage {stage}, {poly}")
        ax.set_xlabel("model dimension parameter")
        ax.set_ylabel("worst normalized trace magnitude")
        ax.legend(fontsize=7)
        fig.tight_layout()
        trace_path = out / f"{name}-traces.png"
        fig.savefig(trace_path, dpi=120)
        plt.close(fig)
        written.append(trace_path)
    return written
