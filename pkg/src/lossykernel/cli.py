"""Command-line entry points: kernelize, protocol, verify, export-dot."""
import argparse
import json
import logging
import sys
from fractions import Fraction

from .config import caps_profile
from .errors import CapExceeded, ConfigError, InvalidInput, OracleCapacityError, ParseError
from .graph import BoundariedGraph, make_graph, read_family, read_graph

log = logging.getLogger("lossykernel")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


def _fraction(text):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _load_graph(path):
    g = read_graph(path)
    if isinstance(g, BoundariedGraph):
        g = g.graph
    return g


def _config(args, epsilon=1):
    from .pipeline import PipelineConfig
    family = read_family(args.family) if args.family else []
    try:
        caps = caps_profile(args.caps)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return PipelineConfig(family=family, eta=args.eta, epsilon=epsilon, mode=args.mode, caps=caps)


def _emit(report, out):
    from .harness import dumps_report
    text = dumps_report(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
        ratio = report.get("capped_ratio", "n/a")
        print(f"solution size {len(report['lifted_solution'])}, capped ratio {ratio}, report written to {out}")
    else:
        print(text)


def _run(args, protocol):
    from .harness import audit_kernel, audit_protocol, digest
    g = _load_graph(args.graph)
    if args.k < 0:
        raise InvalidInput("k must be non-negative")
    cfg = _config(args, args.epsilon if protocol else 1)
    padding = args.seed if args.beta > 1 else None
    audit = audit_protocol if protocol else audit_kernel
    _, report = audit(g, args.k, cfg, beta=args.beta, padding_seed=padding)
    report["input_digest"] = digest(g)
    report["command"] = "protocol" if protocol else "kernelize"
    _emit(report, args.out)
    return EXIT_OK


def cmd_kernelize(args):
    return _run(args, protocol=False)


def cmd_protocol(args):
    return _run(args, protocol=True)


def cmd_verify(args):
    from .harness import run_suite
    results = run_suite(args.suite, args.count, seed=args.seed, workers=args.workers)
    dumps = []
    for name, fails in results.items():
        status = "ok" if not fails else f"{len(fails)} failing"
        print(f"{name}: {args.count - len(fails)}/{args.count} passed ({status})")
        dumps += [f.to_json() for f in fails]
    if dumps:
        text = json.dumps(dumps, indent=2, default=str)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
            print(f"counterexamples written to {args.out}", file=sys.stderr)
        else:
            print(text, file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_export_dot(args):
    from .protrusion import from_json, to_dot
    try:
        with open(args.decomposition) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"{args.decomposition}: {e}") from None
    d = from_json(obj)
    if args.graph:
        g = _load_graph(args.graph)
    else:
        vs = set(d.root_bag).union(*d.parts)
        g = make_graph(sorted(vs))
    text = to_dot(g, d)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="lossykernel",
                                description="Approximate kernels for minor-hitting deletion problems.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--graph", required=True, help="graph file ('p n m' header, 'e u v' lines)")
        sp.add_argument("--family", help="family file, graphs separated by '---' lines")
        sp.add_argument("--eta", type=int, default=1)
        sp.add_argument("-k", type=int, required=True, help="solution budget")
        sp.add_argument("--mode", choices=["fdel", "tweta"], default="fdel")
        sp.add_argument("--beta", type=_fraction, default=Fraction(1), help="oracle approximation factor")
        sp.add_argument("--seed", type=int, default=0, help="padding seed of an approximate oracle")
        sp.add_argument("--caps", default="default", help="cap profile: default, small, large, strict")
        sp.add_argument("--out", help="write the JSON report here instead of stdout")

    kp = sub.add_parser("kernelize", help="single oracle call, ratio 2*beta")
    run_flags(kp)
    kp.set_defaults(func=cmd_kernelize)

    pp = sub.add_parser("protocol", help="multi-round protocol, ratio (1+eps)*beta")
    run_flags(pp)
    pp.add_argument("--epsilon", type=_fraction, default=Fraction(1))
    pp.set_defaults(func=cmd_protocol)

    vp = sub.add_parser("verify", help="run a seeded property suite")
    vp.add_argument("suite", help="lca, pack, protrusion, dichotomy, replacer, flow, pipeline or all")
    vp.add_argument("--count", type=int, default=100)
    vp.add_argument("--seed", type=int, default=0)
    vp.add_argument("--workers", type=int, default=1)
    vp.add_argument("--out", help="write counterexamples here instead of stderr")
    vp.set_defaults(func=cmd_verify)

    ep = sub.add_parser("export-dot", help="render a decomposition JSON as DOT clusters")
    ep.add_argument("--decomposition", required=True)
    ep.add_argument("--graph")
    ep.add_argument("--out")
    ep.set_defaults(func=cmd_export_dot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ParseError, InvalidInput, ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (CapExceeded, OracleCapacityError) as e:
        print(f"cap exceeded: {e}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
