"""Command-line entry point: ``mcl verify|list|selftest``."""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, IoError, MclError
from .harness.config import KINDS, ExperimentConfig
from .harness.report import emit_report, reports_json

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mcl", description="Numerical verification suites for Morse-Bott flows, "
                                        "odd Chern-Weil forms and stratum duality.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    v = sub.add_parser("verify", help="run one experiment from a config file")
    v.add_argument("kind", choices=KINDS)
    v.add_argument("--config", required=True, help="JSON config file, or builtin:<name>")
    v.add_argument("--out", help="output directory for report files")
    v.add_argument("--seed", type=_u64)
    v.add_argument("--quad-order", type=int, dest="quad_order")
    fmt = v.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_const", const="json", dest="fmt")
    fmt.add_argument("--csv", action="store_const", const="csv", dest="fmt")
    fmt.add_argument("--plots", action="store_const", const="plots", dest="fmt")
    ls = sub.add_parser("list", help="list built-in experiments")
    ls.add_argument("what", choices=["experiments"])
    sub.add_parser("selftest", help="run acceptance criteria A1-A14")
    return p


def _load(args) -> ExperimentConfig:
    from .harness.experiments import builtin_config

    if args.config.startswith("builtin:"):
        cfg = builtin_config(args.config.split(":", 1)[1])
    else:
        cfg = ExperimentConfig.from_file(args.config)
    if cfg.kind != args.kind:
        raise ConfigError(f"config kind {cfg.kind!r} does not match command {args.kind!r}")
    d = cfg.to_dict()
    if args.seed is not None:
        d["seed"] = args.seed
    if args.quad_order is not None:
        d["quadrature"] = {**d["quadrature"], "order": args.quad_order}
    return ExperimentConfig.from_dict(d, name=cfg.name)


def _print_report(rep) -> None:
    print(f"# experiment {rep.experiment} ({rep.kind}) status {rep.status}")
    for r in rep.rows:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark}  {r.name}  computed={r.computed!s:.60}  reference={r.reference!s:.40}  [{r.provenance}]")
    if rep.summary:
        print("# summary " + " ".join(f"{k}={v}" for k, v in rep.summary.items()))


def cmd_verify(args) -> int:
    from .harness.experiments import run_experiment

    cfg = _load(args)
    rep = run_experiment(cfg)
    fmt = args.fmt or "json"
    if args.out:
        emit_report(rep, "csv" if fmt == "csv" else "json", args.out, plots=fmt == "plots")
    if fmt == "json" and not args.out:
        print(reports_json([rep]))
    else:
        _print_report(rep)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_list(args) -> int:
    from .harness.experiments import BUILTIN

    for name, (cfg, desc) in BUILTIN.items():
        print(f"{name:<26} {cfg['kind']:<10} {desc}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .harness.acceptance import CRITERIA, check

    ok = True
    for cid in CRITERIA:
        v = check(cid)
        print(v.line(), flush=True)
        ok &= v.passed
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return {"verify": cmd_verify, "list": cmd_list, "selftest": cmd_selftest}[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IoError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except MclError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
