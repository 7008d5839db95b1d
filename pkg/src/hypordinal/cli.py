"""Command-line front end.

Exit codes: 0 on success, 2 on invalid input or configuration, 3 on a
numerical failure (overflow, non-finite gradients, failed construction).
"""

import argparse
import sys


from . import experiments as ex
from .dataset import (LinkFunction, generate_weighted_tree, read_observations,
                      read_tree, sample_observations, tree_distances, write_observations,
                      write_tree)
from .embed import (EUCLIDEAN, HYPERBOLIC, Embedding, FitConfig, LossFunction,
                    embedding_to_csv, fit_embedding, read_embedding, write_embedding,
                    write_risk_trace)
from .exceptions import (ConfigError, ConstructionError, GenerationError,
                         HypOrdinalError, ScaleError, TrainingError)
from .gramian import (check_conditions, coordinate_decompose, DecomposedGramian,
                      read_matrix, reconstruct_points, write_matrix)
from .hypgeo import BallRestriction
from .treeembed import format_summary

NUMERIC_ERRORS = (TrainingError, ScaleError, ConstructionError, GenerationError,
                  FloatingPointError, OverflowError)


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _schema_help(kind):
    lines = [f"config keys for [{kind}] (INI section, or --set KEY=VALUE):"]
    for key, entry in ex.SCHEMAS[kind].items():
        lines.append(f"  {key:<11} {entry.help} (default: {entry.default})")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_tree(args):
    tree = generate_weighted_tree(args.n, seed=args.seed, weight_min=args.weight_min,
                                  weight_max=args.weight_max)
    if args.out:
        write_tree(tree, args.out)
    else:
        for u, v, w in tree.edges:
            sys.stdout.write(f"{u + 1} {v + 1} {w!r}\n")


def cmd_sample(args):
    D = tree_distances(read_tree(args.tree))
    link = (LinkFunction.step(args.alpha) if args.link == "step"
            else LinkFunction.logistic(args.scale))
    T, y = sample_observations(D, link, args.m, seed=args.seed)
    if args.out:
        write_observations(T, y, args.out)
    else:
        sys.stdout.write("t,i,j,k,y\n")
        for t, ((i, j, k), lab) in enumerate(zip(T, y), 1):
            sys.stdout.write(f"{t},{i + 1},{j + 1},{k + 1},{lab}\n")


def cmd_fit(args):
    T, y = read_observations(args.obs)
    n = args.n if args.n else int(T.max()) + 1
    cfg = FitConfig(BallRestriction(args.R), step_size=args.step_size, epochs=args.epochs,
                    batch_size=args.batch_size, seed=args.seed, init_scale=args.init_scale,
                    decay=args.decay, max_step=args.max_step)
    emb = fit_embedding(args.space, (T, y), cfg, LossFunction(args.loss), n, args.d)
    _emit(embedding_to_csv(emb), args.out)
    if args.trace:
        write_risk_trace(emb.risk_trace, args.trace)


def cmd_bounds(args):
    if args.check:
        problems = ex.check_bound_rows(args.check)
        for p in problems:
            sys.stderr.write(p + "\n")
        sys.stdout.write(f"{'ok' if not problems else 'mismatch'}: {args.check}\n")
        return 0 if not problems else 3
    cfg = ex.load_config("bounds", args.config, _overrides(args.set))
    rows = ex.run_bound_sweep(cfg, args.seed, args.threads)
    _emit(ex.rows_to_csv(ex.BOUND_HEADER, rows), args.out)


def cmd_rademacher(args):
    cfg = ex.load_config("rademacher", args.config, _overrides(args.set))
    rows = ex.run_rademacher_check(cfg, args.seed, args.threads)
    _emit(ex.rows_to_csv(ex.RADEMACHER_HEADER, rows), args.out)


def cmd_excess_risk(args):
    cfg = ex.load_config("excess-risk", args.config, _overrides(args.set))
    rows = ex.run_excess_risk(cfg, args.seed, args.threads)
    text = ex.rows_to_csv(ex.EXCESS_HEADER, rows)
    # The expected-risk minimizer is approximate, so excess is understated.
    text = "# risk_star_approx >= true minimum; excess is a lower estimate\n" + text
    _emit(text, args.out)


def cmd_tree_compare(args):
    cfg = ex.load_config("tree-compare", args.config, _overrides(args.set))
    rows, margin = ex.run_tree_comparison(cfg, args.seed, args.threads)
    _emit(ex.rows_to_csv(ex.TREE_HEADER, rows), args.out)
    if margin is not None:
        summary = format_summary(margin) + "\n"
        if args.summary:
            with open(args.summary, "w", encoding="utf-8") as fh:
                fh.write(summary)
        else:
            sys.stderr.write(summary)
        if args.embedding_out:
            if margin.points is None:
                raise ScaleError("margin embedding coordinates overflow float64; "
                                 "only the summary is available")
            write_embedding(Embedding(HYPERBOLIC, margin.points), args.embedding_out)


def cmd_gram(args):
    if args.action == "decompose":
        emb = read_embedding(args.emb)
        if emb.space != HYPERBOLIC:
            raise ConfigError("gram decompose needs a hyperbolic embedding")
        dec = coordinate_decompose(emb)
        prefix = args.out or "gram"
        write_matrix(dec.g_minus, prefix + "_minus.csv")
        write_matrix(dec.g_plus, prefix + "_plus.csv")
    elif args.action == "check":
        dec = DecomposedGramian(read_matrix(args.minus), read_matrix(args.plus))
        report = check_conditions(dec, args.d, args.R, args.C)
        rows = [{"condition": k, "ok": v.ok, "slack": float(v.slack)} for k, v in report.items()]
        _emit(ex.rows_to_csv(["condition", "ok", "slack"], rows), args.out)
        return 0 if all(v.ok for v in report.values()) else 1
    else:
        X = reconstruct_points(read_matrix(args.matrix), args.d)
        _emit(embedding_to_csv(Embedding(HYPERBOLIC, X)), args.out)


# ---------------------------------------------------------------------------
# Parser


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Subcommands repeat the global flags with suppressed defaults so a
    # value given before the subcommand is not reset by the subparser.
    def dflt(value):
        return argparse.SUPPRESS if suppress else value

    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=dflt(0), help="master seed (default 0)")
    p.add_argument("--out", default=dflt(None), help="output path (default stdout)")
    p.add_argument("--config", default=dflt(None), help="INI config file")
    p.add_argument("--threads", type=int, default=dflt(1), help="worker threads (default 1)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(
        prog="hypordinal",
        description="Hyperbolic and Euclidean ordinal embedding with bound checks.",
        parents=[_global_flags(suppress=False)])
    sub = parser.add_subparsers(dest="command", required=True)
    raw = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("gen-tree", parents=[common], help="random weighted tree")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--weight-min", type=float, default=1.0)
    p.add_argument("--weight-max", type=float, default=2.0)
    p.set_defaults(func=cmd_gen_tree)

    p = sub.add_parser("sample", parents=[common], help="sample triplet observations")
    p.add_argument("--tree", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--link", choices=["step", "logistic"], default="step")
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--scale", type=float, default=1.0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", parents=[common], help="fit an HOE or EOE embedding")
    p.add_argument("--obs", required=True)
    p.add_argument("--n", type=int, default=0, help="entity count (default: largest id)")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--space", choices=[HYPERBOLIC, EUCLIDEAN], default=HYPERBOLIC)
    p.add_argument("--R", type=float, default=3.0)
    p.add_argument("--loss", choices=["hinge", "ramp"], default="hinge")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--step-size", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=0)
    p.add_argument("--init-scale", type=float, default=0.1)
    p.add_argument("--max-step", type=float, default=0.5)
    p.add_argument("--decay", action="store_true", help="1/sqrt(t) step decay")
    p.add_argument("--trace", default=None, help="risk-trace CSV path")
    p.set_defaults(func=cmd_fit)

    for name, func, kind, text in (
            ("bounds", cmd_bounds, "bounds", "evaluate bound formulas over a grid"),
            ("rademacher", cmd_rademacher, "rademacher", "Monte Carlo Rademacher check"),
            ("excess-risk", cmd_excess_risk, "excess-risk", "excess risk vs bound"),
            ("tree-compare", cmd_tree_compare, "tree-compare", "HOE vs EOE on a tree")):
        p = sub.add_parser(name, parents=[common], help=text, epilog=_schema_help(kind),
                           formatter_class=raw)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key")
        p.set_defaults(func=func)
        if name == "bounds":
            p.add_argument("--check", default=None, metavar="CSV",
                           help="re-evaluate the rows of a bound CSV instead of sweeping")
        if name == "tree-compare":
            p.add_argument("--summary", default=None, help="summary file (default stderr)")
            p.add_argument("--embedding-out", default=None, help="margin embedding CSV")

    p = sub.add_parser("gram", parents=[common], help="Lorentz Gramian tools")
    gsub = p.add_subparsers(dest="action", required=True)
    g = gsub.add_parser("decompose", parents=[common],
                        help="write PREFIX_minus.csv and PREFIX_plus.csv (PREFIX = --out)")
    g.add_argument("--emb", required=True)
    g = gsub.add_parser("check", parents=[common], help="check the decomposition conditions")
    g.add_argument("--minus", required=True)
    g.add_argument("--plus", required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--R", type=float, default=None)
    g.add_argument("--C", type=float, default=None)
    g = gsub.add_parser("reconstruct", parents=[common], help="points from a Lorentz Gramian")
    g.add_argument("--matrix", required=True)
    g.add_argument("--d", type=int, required=True)
    p.set_defaults(func=cmd_gram)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        code = args.func(args)
    except NUMERIC_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    except (HypOrdinalError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
