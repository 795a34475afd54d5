"""
Command-line front end.

Exit codes: 0 success, 2 input error, 3 capability limit (enumeration cap).
Tree-producing commands print the canonical Newick line first; the ASCII
cladogram follows on stdout, or on stderr with ``--quiet``.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .analysis import closeness_predictions, compare_trees_report
from .bayes import McmcConfig, consensus_tree, mc3_run
from .dataio import (
    FIG3_NEWICK,
    SIMILARITY_TRANSFORMS,
    GlottoParams,
    builtin_similarity,
    glotto_divergence_time,
    load_characters,
    load_distance,
    load_similarity,
    similarity_to_distance,
)
from .distance import neighbor_joining, upgma
from .parsimony import ParsimonyKind, exhaustive_search, rank_trees, score_tree
from .trees import (
    MAX_ENUMERATION_TAXA,
    enumerate_rooted_trees,
    parse_newick,
    render_ascii,
    root_at_outgroup,
    tree_count,
    write_newick,
)

BUILTIN_MATRICES = ("scd",)
BUILTIN_TREES = ("fig3",)


class InputError(Exception):
    """Bad user input; reported on stderr with exit status 2."""


class CapabilityError(Exception):
    """Request beyond a built-in limit; exit status 3."""


def _builtins(args, allowed) -> list:
    names = args.builtin or []
    for name in names:
        if name not in allowed:
            raise InputError(f"unknown builtin {name!r} (choose from {', '.join(allowed)})")
    return names


def _read_similarity(args):
    names = _builtins(args, BUILTIN_MATRICES + BUILTIN_TREES)
    mats = [n for n in names if n in BUILTIN_MATRICES]
    if args.input and mats:
        raise InputError("give either --input or --builtin scd, not both")
    if mats:
        return builtin_similarity(mats[0]), True
    if not args.input:
        raise InputError("no input: use --input PATH or --builtin scd")
    return args.input, False


def _distance_matrix(args):
    source, builtin = _read_similarity(args)
    mode = args.mode or ("similarity" if builtin else "distance")
    try:
        if builtin:
            if mode == "distance":
                raise InputError("the builtin matrix holds similarities; use --similarity")
            return similarity_to_distance(source, args.transform)
        if mode == "similarity":
            return similarity_to_distance(load_similarity(source), args.transform)
        return load_distance(source)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _parse_tree(text: str):
    """Newick given inline, or the path of a file holding one."""
    if not text.lstrip().startswith("(") and os.path.isfile(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        return parse_newick(text)
    except ValueError as exc:
        raise InputError(f"bad Newick: {exc}") from None


def _emit_tree(tree, args, out) -> None:
    print(write_newick(tree, with_lengths=not args.no_lengths), file=out)
    if tree.has_negative_lengths():
        print("# note: negative branch lengths present (drawn as 0)", file=sys.stderr)
    art = render_ascii(tree)
    if args.quiet:
        sys.stderr.write(art)
    else:
        out.write(art)


def _maybe_figure(tree, args, title: str) -> None:
    if getattr(args, "figure", None):
        from .plotting import plot_tree

        plot_tree(tree, args.figure, title=title)
        print(f"# figure written to {args.figure}", file=sys.stderr)


def cmd_upgma(args, out) -> int:
    tree = upgma(_distance_matrix(args))
    _emit_tree(tree, args, out)
    _maybe_figure(tree, args, "UPGMA")
    return 0


def cmd_nj(args, out) -> int:
    d = _distance_matrix(args)
    try:
        tree = neighbor_joining(d)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.root_at:
        if args.root_at not in d.taxa:
            raise InputError(f"unknown taxon {args.root_at!r}")
        tree = root_at_outgroup(tree, args.root_at)
    _emit_tree(tree, args, out)
    _maybe_figure(tree, args, "Neighbour joining")
    return 0


def _load_chars(path):
    try:
        return load_characters(path)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from None


def cmd_parsimony(args, out) -> int:
    m = _load_chars(args.chars)
    kind = ParsimonyKind.parse(args.kind)
    if args.score_tree:
        tree = _parse_tree(args.score_tree)
        if kind in (ParsimonyKind.CAMIN_SOKAL, ParsimonyKind.DOLLO) and not tree.rooted:
            raise InputError("this parsimony needs a rooted tree")
        try:
            score = score_tree(kind, tree, m)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        print(f"score\t{score}", file=out)
        print(f"tree\t{write_newick(tree, with_lengths=False)}", file=out)
        _maybe_figure(tree, args, f"{kind.value} score {score}")
        if not args.exhaustive:
            return 0
    elif not args.exhaustive:
        raise InputError("give --exhaustive and/or --score-tree NEWICK")
    if m.n_taxa > MAX_ENUMERATION_TAXA:
        raise CapabilityError(f"exhaustive search is limited to {MAX_ENUMERATION_TAXA} taxa")
    try:
        result = exhaustive_search(kind, m, keep_table=bool(args.top or args.histogram), workers=args.workers)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    print(f"best_score\t{result.best_score}", file=out)
    print(f"trees_scored\t{result.n_trees}", file=out)
    print(f"optimal_rooted\t{len(result.optimal_trees)}", file=out)
    if kind in (ParsimonyKind.WAGNER, ParsimonyKind.COMPATIBILITY):
        print(f"optimal_unrooted\t{len(result.optimal_unrooted)}", file=out)
        for nwk in result.optimal_unrooted:
            print(f"optimum_unrooted\t{nwk}", file=out)
    for nwk in result.optimal_trees:
        print(f"optimum\t{nwk}", file=out)
    if args.top:
        for rank, (nwk, score) in enumerate(result.table[: args.top], start=1):
            print(f"rank\t{rank}\t{score}\t{nwk}", file=out)
    if args.histogram:
        from .plotting import plot_score_histogram

        plot_score_histogram(result.table, args.histogram, title=f"{kind.value} scores")
        print(f"# figure written to {args.histogram}", file=sys.stderr)
    if args.figure and not args.score_tree:
        _maybe_figure(parse_newick(result.optimal_trees[0]), args, f"{kind.value} optimum")
    return 0


def cmd_bayes(args, out) -> int:
    m = _load_chars(args.chars)
    try:
        cfg = McmcConfig(
            n_chains=args.chains,
            temperature=args.temp,
            seed=args.seed,
            max_generations=args.max_gen,
            threshold=args.threshold,
            sample_interval=args.sample_every,
            burnin_fraction=args.burnin,
            rate_mode=args.rates,
            gamma_shape=args.alpha,
            min_generations=min(args.min_gen, args.max_gen),
            check_interval=args.check_every,
        )
        result = mc3_run(m, cfg)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    sample = result.combined(cfg.burnin_fraction)
    cons = consensus_tree(sample)
    if args.root_at:
        if args.root_at not in m.taxa:
            raise InputError(f"unknown taxon {args.root_at!r}")
        cons = root_at_outgroup(cons, args.root_at)
    print(write_newick(cons, with_lengths=False, support=True), file=out)
    for line in result.diagnostics_lines():
        print(line, file=out)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write("analysis\tgeneration\tlog_posterior\tnewick\n")
            for k, s in enumerate(result.samples, start=1):
                for line in s.log_lines():
                    fh.write(f"{k}\t{line}\n")
    art = render_ascii(cons)
    (sys.stderr if args.quiet else out).write(art)
    _maybe_figure(cons, args, "Majority-rule consensus")
    if args.trace_figure:
        from .plotting import plot_trace

        plot_trace(result, args.trace_figure)
        print(f"# figure written to {args.trace_figure}", file=sys.stderr)
    return 0


def cmd_predict(args, out) -> int:
    names = _builtins(args, BUILTIN_MATRICES + BUILTIN_TREES)
    if args.tree and "fig3" in names:
        raise InputError("give either --tree or --builtin fig3, not both")
    if args.tree:
        tree = _parse_tree(args.tree)
    elif "fig3" in names:
        tree = parse_newick(FIG3_NEWICK)
    else:
        raise InputError("no tree: use --tree NEWICK or --builtin fig3")
    if not [n for n in names if n in BUILTIN_MATRICES] and not args.input:
        s = builtin_similarity()
    else:
        source, builtin = _read_similarity(args)
        try:
            s = source if builtin else load_similarity(source)
        except (OSError, ValueError) as exc:
            raise InputError(str(exc)) from None
    try:
        report = closeness_predictions(tree, s, ties_count_as_correct=not args.strict_ties)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.records:
        print("focus\tcloser\tfarther\tclaim\ts_closer\ts_farther\tverdict", file=out)
        for line in report.records():
            print(line, file=out)
    else:
        out.write(report.to_text())
    return 0


def cmd_compare(args, out) -> int:
    tree = _parse_tree(args.tree)
    ref = parse_newick(FIG3_NEWICK) if args.reference == "fig3" else _parse_tree(args.reference)
    try:
        report = compare_trees_report(tree, ref)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.json:
        print(report.to_json(), file=out)
    else:
        for line in report.records():
            print(line, file=out)
        sys.stderr.write(report.to_text())
    return 0


def cmd_glotto(args, out) -> int:
    try:
        t = glotto_divergence_time(GlottoParams(args.c, args.r))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    print(f"{t:.6f}", file=out)
    return 0


def cmd_enumerate(args, out) -> int:
    taxa = [t.strip() for t in args.taxa.split(",") if t.strip()]
    if len(taxa) < 2:
        raise InputError("need at least two taxa")
    if len(taxa) > MAX_ENUMERATION_TAXA:
        raise CapabilityError(f"enumeration is limited to {MAX_ENUMERATION_TAXA} taxa")
    if len(set(taxa)) != len(taxa):
        raise InputError("duplicate taxon names")
    if args.count_only:
        print(tree_count(len(taxa)), file=out)
        return 0
    try:
        for tree in enumerate_rooted_trees(taxa):
            print(write_newick(tree), file=out)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return 0


def _add_matrix_input(p) -> None:
    p.add_argument("--input", metavar="PATH", help="lower-triangle matrix file")
    p.add_argument("--builtin", action="append", metavar="NAME", help="bundled data: scd")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--similarity", dest="mode", action="store_const", const="similarity",
                   help="input holds shared-cognate counts; convert to distances")
    g.add_argument("--distance", dest="mode", action="store_const", const="distance",
                   help="input already holds distances")
    p.add_argument("--transform", choices=SIMILARITY_TRANSFORMS, default="reciprocal",
                   help="similarity-to-distance conversion (default: reciprocal, d = 1/s)")


def _add_tree_output(p) -> None:
    p.add_argument("--quiet", action="store_true", help="send the cladogram to stderr")
    p.add_argument("--no-lengths", action="store_true", help="omit branch lengths from Newick")
    p.add_argument("--figure", metavar="PATH", help="also save a tree figure (png, pdf, svg)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lingphylo", description="Phylogenetic inference for linguistic data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("upgma", help="UPGMA tree from a distance or similarity matrix")
    _add_matrix_input(p)
    _add_tree_output(p)
    p.set_defaults(func=cmd_upgma)

    p = sub.add_parser("nj", help="neighbour-joining tree")
    _add_matrix_input(p)
    _add_tree_output(p)
    p.add_argument("--root-at", metavar="TAXON", help="root on this outgroup")
    p.set_defaults(func=cmd_nj)

    p = sub.add_parser("parsimony", help="score a tree or search all rooted trees")
    p.add_argument("--chars", required=True, metavar="PATH", help="character matrix file")
    p.add_argument("--kind", default="camin-sokal", choices=[k.value for k in ParsimonyKind])
    p.add_argument("--exhaustive", action="store_true", help="score every rooted binary tree")
    p.add_argument("--score-tree", metavar="NEWICK", help="score this tree (Newick or file)")
    p.add_argument("--top", type=int, default=0, metavar="K", help="print the K best trees")
    p.add_argument("--workers", type=int, default=None, help="processes (default: $LINGPHYLO_THREADS or 1)")
    p.add_argument("--figure", metavar="PATH", help="save a figure of the (first) optimal or scored tree")
    p.add_argument("--histogram", metavar="PATH", help="save a histogram of all scores")
    p.set_defaults(func=cmd_parsimony)

    p = sub.add_parser("bayes", help="Metropolis-coupled MCMC with majority-rule consensus")
    p.add_argument("--chars", required=True, metavar="PATH")
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--temp", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--max-gen", type=int, default=200_000)
    p.add_argument("--min-gen", type=int, default=5000)
    p.add_argument("--check-every", type=int, default=1000)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--sample-every", type=int, default=10)
    p.add_argument("--burnin", type=float, default=0.25)
    p.add_argument("--rates", choices=("off", "fixed", "uniform"), default="off",
                   help="rate variation across characters")
    p.add_argument("--alpha", type=float, default=1.0, help="gamma shape (fixed, or starting value)")
    p.add_argument("--root-at", metavar="TAXON", help="root the consensus on this outgroup")
    p.add_argument("--log", metavar="PATH", help="write the sample log (tab-separated)")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--figure", metavar="PATH", help="save a consensus-tree figure")
    p.add_argument("--trace-figure", metavar="PATH", help="save log-posterior and deviation traces")
    p.set_defaults(func=cmd_bayes)

    p = sub.add_parser("predict", help="audit closeness predictions of a rooted tree")
    p.add_argument("--tree", metavar="NEWICK", help="Newick string or file")
    p.add_argument("--input", metavar="PATH", help="similarity file (default: builtin scd)")
    p.add_argument("--builtin", action="append", metavar="NAME", help="fig3 (tree) and/or scd (matrix)")
    p.add_argument("--records", action="store_true", help="one tab-separated line per prediction")
    p.add_argument("--strict-ties", action="store_true", help="do not count ties as correct")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="RF distances and differing groups between two trees")
    p.add_argument("--tree", required=True, metavar="NEWICK", help="Newick string or file")
    p.add_argument("--reference", default="fig3", metavar="NEWICK", help="reference tree (default: fig3)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("glotto", help="glottochronological divergence time (millennia)")
    p.add_argument("--c", type=float, required=True, help="proportion of shared cognates")
    p.add_argument("--r", type=float, default=0.806, help="retention constant")
    p.set_defaults(func=cmd_glotto)

    p = sub.add_parser("enumerate", help="list or count rooted binary trees")
    p.add_argument("--taxa", required=True, help="comma-separated taxon names")
    p.add_argument("--count-only", action="store_true")
    p.set_defaults(func=cmd_enumerate)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except BrokenPipeError:
        # downstream reader (e.g. ``head``) closed early; not an error
        sys.stdout = open(os.devnull, "w")
        return 0


if __name__ == "__main__":
    sys.exit(main())
