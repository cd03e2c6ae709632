"""Batch command line: latbeam <command> ...

Commands operate on directories of per-sentence lattices (<id>.lat, one
shared symbol table) and plain-text token files, one sentence per line.
Hypothesis text goes to --out (default stdout); progress and per-item
errors go to stderr. With --json, machine-readable JSON lines replace
the plain hypothesis output. Exit status is 0 only when every work item
succeeded. File-level work is deterministic, so --workers never changes
any output byte.

The LG_SEED environment variable fixes the seed of the demo generator
(the --seed flag wins when given).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .baselines import (
    NBestList,
    nbest_from_posterior,
    rescore_nbest_dfs,
    rescore_nbest_naive,
)
from .bleu import corpus_bleu, tune_grid
from .decoder import DecoderConfig, decode
from .errors import LatbeamError
from .ops import StageTimings
from .posterior import PosteriorLattice, prepare_timed
from .scorers import UniformScorer, load_ngram_model, load_table_scorer, train_ngram
from .synth import build_demo, write_demo
from .wfsa import (
    SymbolTable,
    parse_symbols,
    parse_wfsa,
    serialize_wfsa,
    validate,
)
from . import semiring


def _load_symbols(path: str) -> SymbolTable:
    return parse_symbols(Path(path).read_text(encoding="utf-8"))


def _lattice_files(directory: str) -> list[Path]:
    files = sorted(Path(directory).glob("*.lat"))
    if not files:
        raise LatbeamError(f"no .lat files under {directory}")
    return files


def _make_scorer(args, symbols: SymbolTable):
    if args.scorer == "uniform":
        return UniformScorer(symbols.ids())
    if args.model is None:
        raise LatbeamError(f"--scorer {args.scorer} needs --model")
    # scorer files may mention words beyond the lattice vocabulary; let
    # them extend the table rather than fail the whole run
    was_closed = symbols.closed
    symbols.closed = False
    try:
        if args.scorer == "ngram":
            return load_ngram_model(args.model, symbols)
        return load_table_scorer(args.model, symbols)
    finally:
        symbols.closed = was_closed


def _decoder_config(args) -> DecoderConfig:
    return DecoderConfig(beam=args.beam, lambda_lat=args.lambda_lat,
                         lambda_scorer=args.lambda_scorer,
                         local_softmax=args.local_softmax)


def _pmap(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


_PUSH_JOB = {}


def _push_one(job):
    src, dst, symtab_path = job
    symbols = _load_symbols(symtab_path)
    try:
        raw = parse_wfsa(Path(src).read_text(encoding="utf-8"), symbols)
        lattice, timings = prepare_timed(raw)
        Path(dst).write_text(serialize_wfsa(lattice.inner, symbols),
                             encoding="utf-8")
        return (Path(src).stem, None, timings)
    except LatbeamError as exc:
        return (Path(src).stem, str(exc), None)


def cmd_push(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = [(str(f), str(outdir / f.name), args.symtab)
            for f in _lattice_files(args.latdir)]
    results = _pmap(_push_one, jobs, args.workers)
    errors = 0
    total = StageTimings(0.0, 0.0, 0.0)
    done = 0
    for ident, err, timings in results:
        if err is not None:
            errors += 1
            print(f"{ident}: {err}", file=sys.stderr)
        else:
            total = total + timings
            done += 1
    rows = total.rows()
    if args.json:
        for stage, seconds in rows:
            print(json.dumps({"stage": stage, "seconds": seconds,
                              "sentences_per_sec": done / seconds if seconds else None},
                             sort_keys=True))
    else:
        print(f"{'stage':<16} {'seconds':>9} {'sent/sec':>9}", file=sys.stderr)
        for stage, seconds in rows:
            rate = f"{done / seconds:9.1f}" if seconds > 0 else "      inf"
            print(f"{stage:<16} {seconds:9.3f} {rate}", file=sys.stderr)
    return 1 if errors else 0


def _decode_one(job):
    path, symtab_path, cfg_fields, scorer_blob = job
    symbols = _load_symbols(symtab_path)
    cfg = DecoderConfig(**cfg_fields)
    scorer = scorer_blob
    try:
        inner = parse_wfsa(Path(path).read_text(encoding="utf-8"), symbols,
                           semiring_tag=semiring.LOG)
        lattice = PosteriorLattice(inner)
        result = decode(lattice, scorer, cfg)
        tokens = [symbols.sym_of(t) for t in result.best.prefix]
        return (Path(path).stem, None,
                (tokens, result.best.score, result.node_expansions))
    except LatbeamError as exc:
        return (Path(path).stem, str(exc), None)


def cmd_decode(args) -> int:
    symbols = _load_symbols(args.symtab)
    scorer = _make_scorer(args, symbols)
    cfg_fields = dict(beam=args.beam, lambda_lat=args.lambda_lat,
                      lambda_scorer=args.lambda_scorer,
                      local_softmax=args.local_softmax)
    jobs = [(str(f), args.symtab, cfg_fields, scorer)
            for f in _lattice_files(args.latdir)]
    results = _pmap(_decode_one, jobs, args.workers)
    out, close_out = _open_out(args.out)
    errors = 0
    expansions = []
    try:
        for ident, err, payload in results:
            if err is not None:
                errors += 1
                print(f"{ident}: {err}", file=sys.stderr)
                continue
            tokens, score, n_exp = payload
            expansions.append(n_exp)
            if args.json:
                out.write(json.dumps({"id": ident, "tokens": tokens,
                                      "score": score, "expansions": n_exp},
                                     sort_keys=True) + "\n")
            else:
                out.write(" ".join(tokens) + "\n")
                print(f"{ident}: score {score:.6f}, expansions {n_exp}",
                      file=sys.stderr)
    finally:
        if close_out:
            out.close()
    if expansions:
        mean = sum(expansions) / len(expansions)
        print(f"decoded {len(expansions)} sentences, "
              f"mean node expansions {mean:.1f}", file=sys.stderr)
    return 1 if errors else 0


def _nbest_one(job):
    path, symtab_path, n = job
    symbols = _load_symbols(symtab_path)
    try:
        inner = parse_wfsa(Path(path).read_text(encoding="utf-8"), symbols,
                           semiring_tag=semiring.LOG)
        lattice = PosteriorLattice(inner)
        nbest = nbest_from_posterior(lattice, n, source_id=Path(path).stem)
        lines = []
        for tokens, logprob in nbest.entries:
            text = " ".join(symbols.sym_of(t) for t in tokens)
            lines.append(f"{nbest.source_id} ||| {text} ||| {logprob!r}")
        return (Path(path).stem, None, lines)
    except LatbeamError as exc:
        return (Path(path).stem, str(exc), None)


def cmd_nbest(args) -> int:
    jobs = [(str(f), args.symtab, args.nbest)
            for f in _lattice_files(args.latdir)]
    results = _pmap(_nbest_one, jobs, args.workers)
    out, close_out = _open_out(args.out)
    errors = 0
    try:
        for ident, err, lines in results:
            if err is not None:
                errors += 1
                print(f"{ident}: {err}", file=sys.stderr)
                continue
            for line in lines:
                out.write(line + "\n")
    finally:
        if close_out:
            out.close()
    return 1 if errors else 0


def _read_nbest_file(path, symbols) -> list[NBestList]:
    groups: dict[str, list[tuple[tuple[int, ...], float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split("|||")]
            if len(parts) != 3:
                raise LatbeamError(
                    f"{path}: line {lineno}: expected 'id ||| tokens ||| logprob'")
            ident, text, lp_text = parts
            try:
                logprob = float(lp_text)
            except ValueError:
                raise LatbeamError(
                    f"{path}: line {lineno}: bad logprob {lp_text!r}") from None
            tokens = tuple(symbols.id_of(t) for t in text.split())
            groups.setdefault(ident, []).append((tokens, logprob))
    return [NBestList(entries, source_id=ident)
            for ident, entries in sorted(groups.items())]


def cmd_rescore(args) -> int:
    symbols = _load_symbols(args.symtab)
    scorer = _make_scorer(args, symbols)
    rescore = rescore_nbest_dfs if args.mode == "dfs" else rescore_nbest_naive
    out, close_out = _open_out(args.out)
    total_calls = 0
    n_lists = 0
    try:
        for nbest in _read_nbest_file(args.nbest_file, symbols):
            result = rescore(nbest, scorer, lambda_lat=args.lambda_lat,
                             lambda_scorer=args.lambda_scorer)
            if not result.ranked:
                print(f"{nbest.source_id}: nothing to rescore", file=sys.stderr)
                continue
            best = result.ranked[0]
            total_calls += result.predict_calls
            n_lists += 1
            tokens = [symbols.sym_of(t) for t in best.tokens]
            if args.json:
                out.write(json.dumps(
                    {"id": nbest.source_id, "tokens": tokens,
                     "score": best.joint_score,
                     "predict_calls": result.predict_calls},
                    sort_keys=True) + "\n")
            else:
                out.write(" ".join(tokens) + "\n")
    finally:
        if close_out:
            out.close()
    if n_lists:
        print(f"rescored {n_lists} lists ({args.mode}), "
              f"mean predict calls {total_calls / n_lists:.1f}", file=sys.stderr)
    return 0


def _read_sentences(path) -> list[list[str]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.split() for line in lines]


def cmd_tune(args) -> int:
    symbols = _load_symbols(args.symtab)
    scorer = _make_scorer(args, symbols)
    lattices = []
    for f in _lattice_files(args.latdir):
        inner = parse_wfsa(f.read_text(encoding="utf-8"), symbols,
                           semiring_tag=semiring.LOG)
        lattices.append(PosteriorLattice(inner))
    references = [[symbols.id_of(t) for t in sent]
                  for sent in _read_sentences(args.refs)]
    grid = _parse_grid(args.grid)
    result = tune_grid(lattices, references, scorer, grid, beam=args.beam,
                       local_softmax=args.local_softmax)
    if args.json:
        print(json.dumps({"lambda_lat": result.lambda_lat,
                          "lambda_scorer": result.lambda_scorer,
                          "bleu": result.bleu.score,
                          "history": result.history}, sort_keys=True))
    else:
        for lam, score in result.history:
            print(f"lambda_lat {lam:g}: bleu {score:.4f}")
        print(f"best lambda_lat {result.lambda_lat:g} "
              f"(lambda_scorer 1), bleu {result.bleu.score:.4f}")
    return 0


def _parse_grid(spec: str) -> list[float]:
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise LatbeamError(f"bad grid {spec!r}, expected start:stop:step")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise LatbeamError("grid step must be positive")
    values = []
    i = 0
    while True:
        v = round(start + i * step, 10)
        if v > stop + 1e-9:
            break
        values.append(v)
        i += 1
    return values


def cmd_bleu(args) -> int:
    hyps = _read_sentences(args.hyp)
    refs = _read_sentences(args.ref)
    report = corpus_bleu(hyps, refs)
    if args.json:
        print(json.dumps({"bleu": report.score,
                          "precisions": list(report.precisions),
                          "brevity_penalty": report.brevity_penalty,
                          "hyp_length": report.hyp_length,
                          "ref_length": report.ref_length}, sort_keys=True))
    else:
        precisions = "/".join(f"{p:.4f}" for p in report.precisions)
        print(f"bleu {report.score:.4f} (precisions {precisions}, "
              f"bp {report.brevity_penalty:.4f}, "
              f"len {report.hyp_length}/{report.ref_length})")
    return 0


def cmd_stats(args) -> int:
    symbols = _load_symbols(args.symtab)
    rows = []
    errors = 0
    for f in _lattice_files(args.latdir):
        try:
            w = parse_wfsa(f.read_text(encoding="utf-8"), symbols)
        except LatbeamError as exc:
            errors += 1
            print(f"{f.stem}: {exc}", file=sys.stderr)
            continue
        rows.append((f.stem, validate(w)))
    if args.json:
        for ident, report in rows:
            print(json.dumps({"id": ident, "states": report.n_states,
                              "arcs": report.n_arcs, "finals": report.n_finals,
                              "arcs_per_state": report.arcs_per_state,
                              "acyclic": report.is_acyclic,
                              "deterministic": report.is_deterministic,
                              "epsilon": report.has_epsilon,
                              "empty": report.is_empty}, sort_keys=True))
    else:
        print(f"{'id':<8} {'states':>7} {'arcs':>7} {'finals':>7} "
              f"{'arcs/state':>11} {'acyclic':>8}")
        for ident, report in rows:
            print(f"{ident:<8} {report.n_states:>7} {report.n_arcs:>7} "
                  f"{report.n_finals:>7} {report.arcs_per_state:>11.2f} "
                  f"{str(report.is_acyclic):>8}")
        if rows:
            mean = sum(r.arcs_per_state for _, r in rows) / len(rows)
            print(f"mean arcs/state {mean:.2f}")
    return 1 if errors else 0


def cmd_train(args) -> int:
    symbols = _load_symbols(args.symtab) if args.symtab else SymbolTable()
    corpus = []
    for sent in _read_sentences(args.corpus):
        corpus.append([symbols.id_of(t) if symbols.closed else symbols.add(t)
                       for t in sent])
    model = train_ngram(corpus, order=args.order, smoothing=args.smoothing,
                        k=args.k, alpha=args.alpha, min_count=args.min_count)
    model.save(args.out, symbols)
    print(f"trained order-{args.order} {args.smoothing} model on "
          f"{len(corpus)} sentences, vocab {len(model.vocab)}", file=sys.stderr)
    return 0


def cmd_demo(args) -> int:
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("LG_SEED", "13"))
    demo = build_demo(seed=seed, n_sentences=args.sentences)
    write_demo(demo, args.outdir)
    print(f"wrote demo set ({args.sentences} sentences, seed {seed}) "
          f"to {args.outdir}", file=sys.stderr)
    return 0


def _add_scorer_flags(sub):
    sub.add_argument("--scorer", choices=["uniform", "ngram", "table"],
                     default="uniform")
    sub.add_argument("--model", metavar="PATH",
                     help="model file for --scorer ngram/table")
    sub.add_argument("--lambda-lat", type=float, default=1.0, dest="lambda_lat")
    sub.add_argument("--lambda-scorer", type=float, default=1.0,
                     dest="lambda_scorer")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latbeam",
        description="lattice preprocessing and fused beam-search decoding")
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("push", help="preprocess raw lattices into posteriors")
    p.add_argument("latdir")
    p.add_argument("outdir")
    p.add_argument("--symtab", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_push)

    p = commands.add_parser("decode", help="beam-decode pushed lattices")
    p.add_argument("latdir", help="directory of pushed lattices")
    p.add_argument("--symtab", required=True)
    _add_scorer_flags(p)
    p.add_argument("--beam", type=int, default=12)
    p.add_argument("--local-softmax", action="store_true", dest="local_softmax")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_decode)

    p = commands.add_parser("nbest", help="extract n-best lists from pushed lattices")
    p.add_argument("latdir")
    p.add_argument("--symtab", required=True)
    p.add_argument("--nbest", type=int, default=100, metavar="N")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_nbest)

    p = commands.add_parser("rescore", help="rescore an n-best file with a scorer")
    p.add_argument("nbest_file")
    p.add_argument("--symtab", required=True)
    p.add_argument("--mode", choices=["naive", "dfs"], default="dfs")
    _add_scorer_flags(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_rescore)

    p = commands.add_parser("tune", help="grid-search lambda_lat by BLEU")
    p.add_argument("latdir", help="directory of pushed lattices")
    p.add_argument("refs")
    p.add_argument("--symtab", required=True)
    _add_scorer_flags(p)
    p.add_argument("--grid", default="0:2:0.25", help="start:stop:step")
    p.add_argument("--beam", type=int, default=12)
    p.add_argument("--local-softmax", action="store_true", dest="local_softmax")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_tune)

    p = commands.add_parser("bleu", help="corpus BLEU of hypothesis vs reference file")
    p.add_argument("hyp")
    p.add_argument("ref")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bleu)

    p = commands.add_parser("stats", help="validate lattices and report sizes")
    p.add_argument("latdir")
    p.add_argument("--symtab", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = commands.add_parser("train", help="train an n-gram scorer on a text corpus")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--symtab")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--smoothing", choices=["add-k", "stupid-backoff"],
                   default="add-k")
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--min-count", type=int, default=1, dest="min_count")
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("demo", help="write the bundled synthetic demo set")
    p.add_argument("outdir")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sentences", type=int, default=50)
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LatbeamError as exc:
        print(f"latbeam: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
