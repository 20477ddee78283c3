"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 data error, 3 learning failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bench, factext, signscene, task
from .logic import Atom, Clause, Const, ExampleSet
from .lptext import ParseError, dump, format_clause, load, serialize_program
from .mdie import NoHeadMode, SearchConfig, SeedNotGround, cover_loop
from .mil import LearningTimeout, MILConfig, mil_learn

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_LEARN = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class LearnFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_generate(sub):
    p = sub.add_parser("generate", help="render a labelled synthetic sign corpus")
    p.add_argument("--pos", type=int, default=20, help="number of stop signs")
    p.add_argument("--neg", type=int, default=20, help="number of other signs")
    p.add_argument("--variant", default="base", choices=list(signscene.VARIANTS) + ["advcam_stain", "all"],
                   help="attack variant; 'all' writes one subdirectory per variant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=int, default=120)
    p.add_argument("--jitter", type=int, default=6, help="per-pixel colour jitter (0-10)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)


def _add_extract(sub):
    p = sub.add_parser("extract", help="turn rendered signs into background facts")
    p.add_argument("--in", dest="indir", required=True, help="directory of PPM images")
    p.add_argument("--manifest", help="manifest path (default: <in>/manifest.json)")
    p.add_argument("--out", required=True, help="facts file (.lp)")
    p.add_argument("--examples", help="also write labelled examples (.ex)")
    p.add_argument("--lexicon", default=",".join(factext.DEFAULT_LEXICON), help="comma-separated words")
    p.set_defaults(func=cmd_extract)


def _add_learn(sub):
    p = sub.add_parser("learn", help="induce a hypothesis")
    p.add_argument("--engine", required=True, choices=["mil", "mdie"])
    p.add_argument("--bk", required=True, help="background facts (.lp)")
    p.add_argument("--examples", required=True, help="examples (.ex)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--modes", help="mode declarations (.modes), for mdie")
    g.add_argument("--metarules", help="metarules (.mrules), for mil")
    p.add_argument("--out", required=True, help="hypothesis file (.lp)")
    p.add_argument("--trace", help="write clause-search trace as JSON lines (mdie)")
    p.add_argument("--max-clauses", type=int, default=2)
    p.add_argument("--depth-bound", type=int, default=100)
    p.add_argument("--timeout", type=float, default=None, help="seconds")
    p.set_defaults(func=cmd_learn)


def _add_curve(sub):
    p = sub.add_parser("curve", help="run a learning-curve experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_curve)


def _add_robust(sub):
    p = sub.add_parser("robust", help="accuracy of a hypothesis on each attack variant")
    p.add_argument("--hypothesis", required=True)
    p.add_argument("--data", required=True, help="directory with one subdirectory per variant")
    p.add_argument("--max-occlusion", type=float, default=None)
    p.add_argument("--out", help="CSV output (default: stdout)")
    p.set_defaults(func=cmd_robust)


def _add_plot(sub):
    p = sub.add_parser("plot", help="SVG chart of a learning-curve CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)


def build_parser(prog: str = "signilp", only: str = None) -> argparse.ArgumentParser:
    parser = _Parser(prog=prog, description="Traffic-sign rule learning toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    adders = {"generate": _add_generate, "extract": _add_extract, "learn": _add_learn,
              "curve": _add_curve, "robust": _add_robust, "plot": _add_plot}
    for name, add in adders.items():
        if only is None or name == only:
            add(sub)
    return parser


# --------------------------------------------------------------------------
# commands

def cmd_generate(args) -> int:
    variants = list(signscene.VARIANTS) if args.variant == "all" else [args.variant]
    for v in variants:
        cfg = signscene.DatasetConfig(positives=args.pos, negatives=args.neg, variant=v, scale=args.scale,
                                      jitter=args.jitter)
        items = signscene.generate_dataset(cfg, args.seed)
        out = os.path.join(args.out, v) if args.variant == "all" else args.out
        signscene.write_dataset(items, out)
        print(f"{v}: wrote {len(items)} images to {out}")
    return EXIT_OK


def _extract_dir(indir, manifest_path, lexicon):
    try:
        entries = signscene.read_manifest(manifest_path)
    except FileNotFoundError:
        raise DataError(f"{manifest_path}: no such file") from None
    except ValueError as exc:  # includes JSON decoding errors
        raise DataError(str(exc)) from None
    out = []
    for e in entries:
        try:
            raster = signscene.Raster.load(os.path.join(indir, e["file"]))
        except (OSError, ValueError) as exc:
            raise DataError(f"{e['file']}: {exc}") from None
        out.append((e, factext.extract(raster, e["sign_id"], lexicon)))
    return out


def cmd_extract(args) -> int:
    manifest = args.manifest or os.path.join(args.indir, "manifest.json")
    lexicon = [w for w in args.lexicon.split(",") if w]
    pairs = _extract_dir(args.indir, manifest, lexicon)
    clauses = []
    for _, fs in pairs:
        clauses.extend(Clause(a) for a in fs.facts)
    clauses.extend(Clause(Atom("sign", [Const(fs.sign_id)])) for _, fs in pairs)
    clauses.extend(Clause(Atom("known_word", [Const(w)])) for w in lexicon)
    Path(args.out).write_text(serialize_program(clauses), encoding="utf-8")
    if args.examples:
        pos = [fs.sign_id for e, fs in pairs if e.get("label") == "stop"]
        neg = [fs.sign_id for e, fs in pairs if e.get("label") != "stop"]
        dump(args.examples, "examples", task.examples_for(pos, neg))
    print(f"extracted {len(pairs)} signs to {args.out}")
    return EXIT_OK


def _load(path, kind):
    try:
        return load(path, kind).declarations
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except ParseError as exc:
        raise DataError(f"{path}: {exc}") from None


def _is_class_task(examples: ExampleSet) -> bool:
    atoms = examples.positives + examples.negatives
    return bool(atoms) and all(a.predicate == task.TARGET and a.arity == 2 for a in atoms)


def cmd_learn(args) -> int:
    from .logic import Program
    bk = Program(_load(args.bk, "facts"))
    examples = _load(args.examples, "examples")
    trace_fh = open(args.trace, "w") if args.trace else None

    def trace(rec):
        trace_fh.write(json.dumps(rec, sort_keys=True) + "\n")

    try:
        if args.engine == "mil":
            rules = _load(args.metarules, "metarules") if args.metarules else task.default_metarules()
            if _is_class_task(examples):
                settings = task.LearnerSettings(depth_bound=args.depth_bound, timeout=args.timeout,
                                                max_clauses=args.max_clauses, metarules=rules)
                hyp = task.learn("mil", bk, examples, settings)
            else:
                config = MILConfig(max_clauses=args.max_clauses, depth_bound=args.depth_bound,
                                   timeout=args.timeout)
                hyp = mil_learn(bk, examples, rules, config)
                if hyp is None:
                    raise LearnFailure("no consistent hypothesis within the clause bound")
        else:
            modes = _load(args.modes, "modes") if args.modes else task.default_modes()
            config = SearchConfig(depth_bound=args.depth_bound, timeout=args.timeout)
            hyp = cover_loop(bk, examples, modes, config, trace if trace_fh else None)
            for e in hyp.uncovered:
                print(f"warning: positive not covered: {e!r}", file=sys.stderr)
    except LearningTimeout as exc:
        raise LearnFailure(str(exc)) from None
    except (NoHeadMode, SeedNotGround) as exc:
        raise DataError(str(exc)) from None
    finally:
        if trace_fh:
            trace_fh.close()
    if examples.positives and not hyp.clauses:
        raise LearnFailure("no hypothesis found")
    dump(args.out, "hypothesis", hyp.clauses)
    for c in hyp.clauses:
        print(format_clause(c))
    return EXIT_OK


def _resolve(base: Path, p):
    return str(p) if p is None or os.path.isabs(p) else str(base / p)


def cmd_curve(args) -> int:
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{args.config}: no such file") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.config}: {exc}") from None
    base = Path(args.config).resolve().parent
    engines = cfg.get("engines", cfg.get("engine", ["mil", "mdie"]))
    if isinstance(engines, str):
        engines = [engines]
    try:
        settings = task.LearnerSettings(depth_bound=cfg.get("depth_bound", 100), timeout=cfg.get("timeout", 10.0),
                                        **cfg.get("mil", {}), **cfg.get("mdie", {}))
        config = bench.ExperimentConfig(engines=engines, train_sizes=cfg.get("train_sizes", [1, 2, 4, 8]),
                                        repeats=cfg.get("repeats", 100), seed=cfg.get("seed", 0),
                                        workers=cfg.get("workers", 1), record_time=cfg.get("record_time", False),
                                        settings=settings)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    data = cfg.get("data", {"generate": {}})
    if "bk" in data:
        from .logic import Program
        bk = Program(_load(_resolve(base, data["bk"]), "facts"))
        examples = _load(_resolve(base, data["examples"]), "examples")
    else:
        gen = data.get("generate", {})
        items = signscene.generate_dataset(
            signscene.DatasetConfig(positives=gen.get("positives", 20), negatives=gen.get("negatives", 20)),
            gen.get("seed", 7))
        fss = [factext.extract(it.raster, it.spec.sign_id) for it in items]
        bk = task.build_bk(fss, factext.DEFAULT_LEXICON)
        examples = task.examples_for([it.spec.sign_id for it in items if it.label == "stop"],
                                     [it.spec.sign_id for it in items if it.label != "stop"])
    try:
        results = bench.learning_curve(config, bk, examples)
    except bench.InsufficientData as exc:
        raise DataError(str(exc)) from None
    text = bench.curve_csv(results)
    out = _resolve(base, cfg.get("out", "curve.csv"))
    Path(out).write_text(text, encoding="utf-8")
    if cfg.get("predictions"):
        Path(_resolve(base, cfg["predictions"])).write_text(bench.predictions_csv(results), encoding="utf-8")
    if cfg.get("svg"):
        Path(_resolve(base, cfg["svg"])).write_text(bench.plot(text), encoding="utf-8")
    for (engine, n), (mean, std, _) in bench.summarize(results).items():
        print(f"{engine:5s} n={n:<3d} mean={mean:.3f} std={std:.3f}")
    return EXIT_OK


def cmd_robust(args) -> int:
    clauses = _load(args.hypothesis, "hypothesis")
    if not clauses:
        raise DataError(f"{args.hypothesis}: empty hypothesis")
    if not os.path.isdir(args.data):
        raise DataError(f"{args.data}: not a directory")
    variants = {}
    for name in sorted(os.listdir(args.data)):
        d = os.path.join(args.data, name)
        manifest = os.path.join(d, "manifest.json")
        if not os.path.isfile(manifest):
            continue
        items = []
        for e, fs in _extract_dir(d, manifest, factext.DEFAULT_LEXICON):
            bk = task.build_bk([fs], factext.DEFAULT_LEXICON)
            items.append(bench.EvalItem(fs.sign_id, e.get("label") == "stop", bk, float(e.get("occlusion", 0.0))))
        variants[name] = items
    rows = bench.robustness_eval(clauses, variants, args.max_occlusion)
    text = bench.robustness_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        text = Path(args.csv).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"{args.csv}: no such file") from None
    try:
        svg = bench.plot(text)
    except bench.MalformedCSV as exc:
        raise DataError(f"{args.csv}: {exc}") from None
    Path(args.out).write_text(svg, encoding="utf-8")
    return EXIT_OK


def _run(parser, argv) -> int:
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ParseError, signscene.SpecError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LearnFailure as exc:
        print(f"learning failed: {exc}", file=sys.stderr)
        return EXIT_LEARN


def main(argv=None) -> int:
    return _run(build_parser(), argv)


def signscene_main(argv=None) -> int:
    return _run(build_parser("signscene", only="generate"), argv)


def factext_main(argv=None) -> int:
    return _run(build_parser("factext", only="extract"), argv)


if __name__ == "__main__":
    sys.exit(main())
