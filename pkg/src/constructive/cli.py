"""Command-line entry point.

    constructive validate  --corpus games.jsonl --out out/
    constructive score     --corpus games.jsonl --out out/
    constructive analyze   --corpus games.jsonl --out out/ [--svg]
    constructive featurize --corpus games.jsonl --out out/ [--mode early20]
    constructive train     --corpus games.jsonl --out out/ --objective p
    constructive evaluate  --corpus games.jsonl --out out/ --objective p --mode full
    constructive report    --reports out/eval_*.json --out out/
    constructive synth     --out out/ --n-games 400

Exit status: 0 on success, 1 on validation failure, 2 on usage errors.
Diagnostics go to stderr; results are written under ``--out`` only.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import FilterConfig, GameRecord, filter_corpus, iter_corpus, parse_game_record, write_corpus
from .errors import MalformedDocument, PipelineError, ValidationError
from .geo import convergence_profile, game_label, score_profile
from .ideaflow import extract_ideas
from .lingfeat import (
    GROUP_OF,
    SCALAR_NAMES,
    analyze_text,
    early_window,
    featurize_game,
    fit_pos_vocabulary,
    pos_ngram_counts,
    PosVocabulary,
)
from .model import (
    FEATURE_SETS,
    EvalReport,
    evaluate_protocol,
    fit_final_models,
    grid_search,
    puzzle_aware_splits,
    registry_hash,
)
from .pipeline import MODES, config_hash, prepare
from .synth import generate_with_manifest, manifest_to_dicts
from .text import load_resources

log = logging.getLogger("constructive")

OBJECTIVES = {"pp": "PP", "p": "P", "mm": "MM"}
SCORE_COLUMNS = ("game_id", "team_score", "mean_solo", "best_solo", "worst_solo",
                 "c_avg", "c_best", "c_worst", "obj_pp", "obj_p", "obj_mm")


class UsageError(Exception):
    pass


# -- helpers -----------------------------------------------------------------


def _provenance(args: argparse.Namespace, resources=None) -> dict:
    skip = {"out", "jobs", "func", "verbose"}
    config = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    prov = {"config": config, "config_hash": config_hash(config), "version": __version__}
    if resources is not None:
        prov["lexicon_checksums"] = resources.checksums()
    return prov


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=False, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(type(o))


def _write_csv(path: Path, header, rows, provenance: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# provenance: " + json.dumps(
            {"config_hash": provenance["config_hash"],
             "lexicon_checksums": provenance.get("lexicon_checksums", {})},
            sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(round(v, 10))
    return str(v)


def _require_corpus(args) -> Path:
    if not args.corpus:
        raise UsageError("--corpus is required")
    path = Path(args.corpus)
    if not path.exists():
        raise UsageError(f"corpus not found: {path}")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resources(args):
    if args.lexicons and not Path(args.lexicons).is_dir():
        raise UsageError(f"lexicon directory not found: {args.lexicons}")
    return load_resources(args.lexicons)


def _filter_config(args) -> FilterConfig:
    return FilterConfig(
        min_chatters=args.min_chatters,
        min_games_per_puzzle=args.min_games_per_puzzle,
        cheat_radius_km=args.cheat_radius_km,
        dev_player_ids=frozenset(args.dev_players or ()),
        strict_cheat=args.strict_cheat,
    )


def _load_filtered(args) -> list[GameRecord]:
    games = [g for _, g in iter_corpus(_require_corpus(args))]
    kept, report = filter_corpus(games, _filter_config(args))
    log.info("filtered corpus: kept %d of %d %s", report.kept, len(games), report.reason_counts())
    return kept


# -- subcommands -------------------------------------------------------------


def cmd_validate(args) -> int:
    path = _require_corpus(args)
    out = _out_dir(args)
    games, errors = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                games.append(parse_game_record(line))
            except ValidationError as exc:
                errors.append({"line": lineno, "code": exc.code, "violations": exc.violations})
                print(f"line {lineno}: {exc}", file=sys.stderr)
            except MalformedDocument as exc:
                errors.append({"line": lineno, "code": exc.code, "message": str(exc)})
                print(f"line {lineno}: {exc}", file=sys.stderr)
    kept, report = filter_corpus(games, _filter_config(args))
    _write_json(out / "validation.json", {
        "valid_records": len(games),
        "invalid_records": errors,
        "filter": {"kept": report.kept, "rejected": report.rejected, "reasons": report.reason_counts()},
        "provenance": _provenance(args),
    })
    print(f"{len(games)} valid, {len(errors)} invalid, {report.kept} kept after filters", file=sys.stderr)
    return 1 if errors else 0


def cmd_score(args) -> int:
    out = _out_dir(args)
    rows = []
    for _, g in iter_corpus(_require_corpus(args)):
        if g.final_guess is None or not g.solo_guesses:
            log.warning("%s: no team guess or no solo guesses; skipped", g.game_id)
            continue
        lab = game_label(g)
        rows.append([g.game_id] + [_fmt(v) for v in (
            lab.team_score, lab.mean_solo, lab.best_solo, lab.worst_solo,
            lab.c_avg, lab.c_best, lab.c_worst, lab.obj_best, lab.obj_constructive, lab.obj_worst)])
    _write_csv(out / "scores.csv", SCORE_COLUMNS, rows, _provenance(args))
    return 0


def _histogram_svg(edges, counts, title: str) -> str:
    w, h, pad = 640, 320, 40
    top = max(counts) if counts else 1
    bw = (w - 2 * pad) / max(len(counts), 1)
    bars = []
    for i, c in enumerate(counts):
        bh = (h - 2 * pad) * c / top if top else 0
        x = pad + i * bw
        fill = "#3b7dd8" if edges[i] >= 0 else "#d8663b"
        bars.append(f'<rect x="{x:.1f}" y="{h - pad - bh:.1f}" width="{bw * 0.9:.1f}" height="{bh:.1f}" fill="{fill}"/>')
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">'
            f'<text x="{pad}" y="20" font-size="14">{title}</text>'
            f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>'
            + "".join(bars)
            + f'<text x="{pad}" y="{h - 10}" font-size="11">{edges[0]:.0f} km</text>'
            f'<text x="{w - pad - 60}" y="{h - 10}" font-size="11">{edges[-1]:.0f} km</text></svg>\n')


def cmd_analyze(args) -> int:
    out = _out_dir(args)
    resources = _resources(args)
    prov = _provenance(args, resources)
    games = _load_filtered(args) if args.filter else [g for _, g in iter_corpus(_require_corpus(args))]
    ideas_out, conv_rows, prof_rows, c_avgs = [], [], [], []
    k = args.k
    for g in games:
        gt = analyze_text(g, resources)
        ideas = extract_ideas([m.player for m in g.messages], gt.message_tokens,
                              resources.stopwords, resources.hedges)
        ideas_out.append({
            "game_id": g.game_id,
            "ideas": [e.to_dict() for e in ideas],
            "edges": [[e.introducer, a.player, e.term] for e in ideas for a in e.adoptions],
        })
        if g.final_guess is None or not g.solo_guesses:
            continue
        lab = game_label(g)
        c_avgs.append(lab.c_avg)
        tags = [_fmt(lab.obj_best), _fmt(lab.obj_constructive), _fmt(lab.obj_worst)]
        try:
            conv_rows.append([g.game_id, *[_fmt(d) for d in convergence_profile(g, k)], *tags])
            sp = score_profile(g, k)
            prof_rows.append([g.game_id, *[_fmt(s) for s in sp.scores], _fmt(sp.mean_solo), _fmt(sp.final), *tags])
        except PipelineError:
            log.debug("%s: fewer than %d marker moves", g.game_id, k)
    _write_json(out / "ideas.json", {"games": ideas_out, "provenance": prov})
    labels = ["obj_pp", "obj_p", "obj_mm"]
    _write_csv(out / "convergence.csv",
               ["game_id", *[f"dist_last_{k - i}" for i in range(k)], *labels], conv_rows, prov)
    _write_csv(out / "score_profiles.csv",
               ["game_id", *[f"score_move_{i + 1}" for i in range(k)], "mean_solo", "final", *labels],
               prof_rows, prov)
    if c_avgs:
        counts, edges = np.histogram(c_avgs, bins=args.bins)
        rows = [[_fmt(float(edges[i])), _fmt(float(edges[i + 1])), int(counts[i])] for i in range(len(counts))]
        _write_csv(out / "constructiveness_hist.csv", ["bin_lo_km", "bin_hi_km", "count"], rows, prov)
        if args.svg:
            (out / "constructiveness_hist.svg").write_text(
                _histogram_svg(edges.tolist(), counts.tolist(), "Team constructiveness (c_avg)"), encoding="utf-8")
    return 0


def _featurize_one(payload):
    game, lexdir, vocab = payload
    return featurize_game(game, load_resources(lexdir), vocab)


def cmd_featurize(args) -> int:
    out = _out_dir(args)
    resources = _resources(args)
    prov = _provenance(args, resources)
    games = _load_filtered(args)
    excluded = []
    if args.mode == "early20":
        windows = [early_window(g) for g in games]
        excluded = [w.game.game_id for w in windows if not w.eligible]
        games = [w.game for w in windows if w.eligible]
    if args.pos_vocab:
        vocab = PosVocabulary.from_dict(json.loads(Path(args.pos_vocab).read_text())["pos_vocabulary"])
    else:
        counts = [pos_ngram_counts(analyze_text(g, resources), args.pos_n) for g in games]
        vocab = fit_pos_vocabulary(counts, args.pos_n, args.min_df)
    payload = [(g, args.lexicons, vocab) for g in games]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            vectors = list(pool.map(_featurize_one, payload, chunksize=16))
    else:
        vectors = [featurize_game(g, resources, vocab) for g in games]
    names = vectors[0].names if vectors else list(SCALAR_NAMES) + vocab.names()
    rows = [[g.game_id] + [_fmt(None if m else v) for v, m in zip(fv.values, fv.mask)]
            for g, fv in zip(games, vectors)]
    _write_csv(out / "features.csv", ["game_id", *names], rows, prov)
    groups = {n: GROUP_OF.get(n, "pos") for n in names}
    _write_json(out / "features.json", {
        "registry": names,
        "groups": groups,
        "registry_hash": registry_hash(),
        "lexicon_checksums": resources.checksums(),
        "pos_vocabulary": vocab.to_dict(),
        "excluded_by_early_window": excluded,
        "provenance": prov,
    })
    return 0


def _grids(args) -> dict:
    grids = {}
    if args.c_grid:
        grids["C"] = tuple(args.c_grid)
    if args.pos_n_grid:
        grids["n"] = tuple(args.pos_n_grid)
    if args.min_df_grid:
        grids["min_df"] = tuple(args.min_df_grid)
    return grids


def cmd_train(args) -> int:
    out = _out_dir(args)
    resources = _resources(args)
    prov = _provenance(args, resources)
    pc = prepare(_load_filtered(args), args.mode, resources)
    objective = OBJECTIVES[args.objective]
    y = pc.labels(objective)
    splits = puzzle_aware_splits(pc.table.puzzle_ids, y, args.n_iter, args.train_frac, args.seed)
    grid = grid_search(pc.table, y, splits, _grids(args), seed=args.seed)
    trained = fit_final_models(pc.table, y, grid, args.seed)
    _write_json(out / f"model_{args.objective}_{args.mode}.json", {
        "objective": objective,
        "mode": args.mode,
        "registry_hash": registry_hash(),
        "lexicon_checksums": resources.checksums(),
        "ensemble_weights": dict(zip(grid.group_order, grid.weights)),
        "validation_mean_auc": {g: r.mean_auc for g, r in grid.groups.items()} | {"All": grid.ensemble_mean_auc},
        "groups": [t.to_dict() for t in trained],
        "seed": args.seed,
        "provenance": prov,
    })
    return 0


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    resources = _resources(args)
    prov = _provenance(args, resources)
    pc = prepare(_load_filtered(args), args.mode, resources)
    objective = OBJECTIVES[args.objective]
    y = pc.labels(objective)
    report, _ = evaluate_protocol(
        pc.table, y, objective, args.mode, args.n_iter, args.train_frac, args.n_perm,
        args.seed, _grids(args), args.bootstrap_splits, args.jobs,
    )
    report.provenance = prov | {"n_games": len(pc.games), "excluded_by_early_window": pc.excluded,
                                "positives": int(y.sum())}
    stem = f"eval_{args.objective}_{args.mode}"
    _write_json(out / f"{stem}.json", report.to_dict())
    rows = []
    for name in FEATURE_SETS:
        for i, a in enumerate(report.results[name]["aucs"]):
            rows.append([name, i, _fmt(a)])
    _write_csv(out / f"{stem}_aucs.csv", ["feature_set", "iteration", "auc"], rows, prov)
    all_res = report.results["All"]
    print(f"{objective} {args.mode}: All mean AUC {all_res['mean_auc']:.3f} p={all_res['p_value']}", file=sys.stderr)
    return 0


def _stars(p) -> str:
    if p is None:
        return ""
    return "*" if p < 0.05 else ("+" if p < 0.1 else "")


def cmd_report(args) -> int:
    out = _out_dir(args)
    if not args.reports:
        raise UsageError("--reports needs at least one EvalReport JSON")
    reports = []
    for path in args.reports:
        if not Path(path).exists():
            raise UsageError(f"report not found: {path}")
        reports.append(EvalReport.from_dict(json.loads(Path(path).read_text())))
    columns = [(m, o) for m in MODES for o in ("PP", "P", "MM")]
    cell = {}
    for r in reports:
        for name, res in r.results.items():
            cell[(name, r.mode, r.objective)] = (res["mean_auc"], res.get("p_value"))
    header = ["feature_set"] + [f"{o}_{m}" for m, o in columns]
    rows, md = [], ["| Features | " + " | ".join(f"({o}) {m}" for m, o in columns) + " |",
                    "|---" * (len(columns) + 1) + "|"]
    for name in FEATURE_SETS:
        vals = [cell.get((name, m, o)) for m, o in columns]
        rows.append([name] + [_fmt(v[0]) if v else "" for v in vals])
        md.append(f"| {name} | " + " | ".join(
            f"{v[0]:.2f}{_stars(v[1])}" if v else "" for v in vals) + " |")
    prov = _provenance(args)
    _write_csv(out / "table.csv", header, rows, prov)
    (out / "table.md").write_text("\n".join(md) + "\n\n* p < 0.05, + p < 0.1 (label permutations)\n"
                                  + f"\nconfig_hash: {prov['config_hash']}\n", encoding="utf-8")
    return 0


def cmd_synth(args) -> int:
    out = _out_dir(args)
    mix = json.loads(args.mix) if args.mix else None
    games, manifest = generate_with_manifest(args.n_games, mix, args.n_puzzles, args.seed)
    write_corpus(games, out / "synthetic.jsonl")
    _write_json(out / "synthetic_manifest.json", {
        "games": manifest_to_dicts(manifest),
        "counts": dict(Counter(m.archetype for m in manifest)),
        "provenance": _provenance(args),
    })
    return 0


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--corpus", help="corpus JSONL file")
    common.add_argument("--lexicons", help="directory with lexicon files (default: shipped copies)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--mode", choices=MODES, default="full")
    common.add_argument("--objective", choices=sorted(OBJECTIVES), default="p")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--train-frac", type=float, default=0.8)
    common.add_argument("--n-iter", type=int, default=20)
    common.add_argument("--n-perm", type=int, default=5000)
    common.add_argument("--strict-cheat", action="store_true",
                        help="reject near-exact guesses even without window-focus telemetry")
    common.add_argument("--min-chatters", type=int, default=2)
    common.add_argument("--min-games-per-puzzle", type=int, default=5)
    common.add_argument("--cheat-radius-km", type=float, default=10.0)
    common.add_argument("--dev-players", nargs="*", default=[])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="constructive", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check schema and filters")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("score", parents=[common], help="per-game constructiveness CSV")
    p.set_defaults(func=cmd_score)
    p = sub.add_parser("analyze", parents=[common], help="idea graphs, guess profiles, histogram")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--filter", action="store_true", help="apply corpus filters first")
    p.set_defaults(func=cmd_analyze)
    p = sub.add_parser("featurize", parents=[common], help="feature CSV plus registry sidecar")
    p.add_argument("--pos-n", type=int, default=2)
    p.add_argument("--min-df", type=int, default=2)
    p.add_argument("--pos-vocab", help="features.json whose fitted POS vocabulary is reused")
    p.set_defaults(func=cmd_featurize)
    for name, func, text in (("train", cmd_train, "grid search and final model artifact"),
                             ("evaluate", cmd_evaluate, "cross-validated AUCs and permutation p-values")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--c-grid", type=float, nargs="*")
        p.add_argument("--pos-n-grid", type=int, nargs="*")
        p.add_argument("--min-df-grid", type=int, nargs="*")
        p.add_argument("--bootstrap-splits", type=int, default=0)
        p.set_defaults(func=func)
    p = sub.add_parser("report", parents=[common], help="Table-style AUC matrix from EvalReports")
    p.add_argument("--reports", nargs="*")
    p.set_defaults(func=cmd_report)
    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    p.add_argument("--n-games", type=int, default=400)
    p.add_argument("--n-puzzles", type=int, default=20)
    p.add_argument("--mix", help='JSON archetype weights, e.g. {"balanced": 0.5, "dominated": 0.5}')
    p.set_defaults(func=cmd_synth)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, MalformedDocument) as exc:
        where = f"line {getattr(exc, 'lineno', '?')}: "
        print(f"{where}{exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
