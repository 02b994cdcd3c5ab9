"""Command-line interface.

Exit codes: 0 success, 2 usage or input error, 3 fit succeeded but the
likelihood failed (profile still increasing at n_upp).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from .histories import CaptureDataError, covariate_matrix, parse_quantifier, read_capture_csv, write_matrix_csv
from .likelihood import fit_model
from .models import parse_model, parse_models
from .partitions import MAX_ENUMERATION_T, markov_correspondence_check
from .selection import CUT_STRATEGIES, cut_search, rank_models
from .simulation import GeneratorSpec, expected_m, generate, replicate_seed, run_trial

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _threads(value) -> int:
    if value is None:
        return os.cpu_count() or 1
    return max(1, int(value))


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _emit(text: str, path=None):
    fh, close = _open_out(path)
    try:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")
    finally:
        if close:
            fh.close()


def _load_config(args):
    """Fill unset options from --config JSON (command-line values win)."""
    if not getattr(args, "config", None):
        return
    cfg = json.loads(Path(args.config).read_text())
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise UsageError(f"unknown config field {key!r}")
        if getattr(args, dest) in (None, False):
            setattr(args, dest, val)


def _read(args):
    if not args.input:
        raise UsageError("--input is required")
    return read_capture_csv(args.input)


def _fit_opts(args) -> dict:
    return {"n_upp": args.nupp, "grid": args.grid or "coarse", "level": args.level or 0.95,
            "threads": _threads(args.threads)}


def _fit_csv(res) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "params", "n_hat", "ci_lo", "ci_hi", "aic", "failure", "p0", "coefficients"])
    w.writerow([res.model, res.params, res.n_hat, res.ci[0], "" if res.ci[1] is None else res.ci[1],
                f"{res.aic:.2f}", str(res.failure).lower(), f"{res.p0:.4g}",
                " ".join(f"{c:.4g}" for c in res.coefficients)])
    return buf.getvalue()


def cmd_quantify(args) -> int:
    data = _read(args)
    q = parse_quantifier(args.quantifier, data.t)
    z = covariate_matrix(data, q)
    fh, close = _open_out(args.output)
    try:
        write_matrix_csv(z.exact, fh, header=[f"z{j + 1}" for j in range(data.t)], fmt=lambda v: repr(float(v)))
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_fit(args) -> int:
    data = _read(args)
    if not args.model:
        raise UsageError("--model is required")
    spec = parse_model(args.model)
    res = fit_model(data, spec, **_fit_opts(args))
    _emit(_fit_csv(res) if args.csv else res.to_json(indent=2), args.output)
    return EXIT_FAILURE if res.failure else EXIT_OK


def cmd_select(args) -> int:
    data = _read(args)
    specs = parse_models(args.models or "standard")
    report = rank_models(data, specs, cut_strategy=args.strategy, **_fit_opts(args))
    _emit(report.to_json(indent=2) if args.json else report.to_csv(), args.output)
    return EXIT_OK


def cmd_cutsearch(args) -> int:
    data = _read(args)
    q = parse_quantifier(args.quantifier, data.t)
    cuts, res = cut_search(data, q, args.cuts, args.strategy, **_fit_opts(args))
    if args.json:
        out = {"cutpoints": [str(c) for c in cuts], "cutpoints_float": [float(c) for c in cuts], "fit": res.to_dict()}
        _emit(json.dumps(out, indent=2), args.output)
    else:
        text = _fit_csv(res).rstrip("\n").split("\n")
        text[0] += ",cutpoints"
        text[1] += "," + " ".join(f"{float(c):.4g}" for c in cuts)
        _emit("\n".join(text), args.output)
    return EXIT_FAILURE if res.failure else EXIT_OK


def _seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("RECAP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"RECAP_SEED must be an integer, got {env!r}") from None
    return 0


def cmd_simulate(args) -> int:
    if not args.model:
        raise UsageError("--model is required")
    spec_model = parse_model(args.model)
    probs = None if args.probs is None else tuple(float(p) for p in args.probs.split(","))
    if args.n is None or args.t is None:
        raise UsageError("--n and --t are required")
    seed = _seed(args)
    gen = GeneratorSpec(spec_model, int(args.n), int(args.t), seed, args.alpha, args.beta, probs)
    candidates = parse_models(args.candidates) if args.candidates else [spec_model]
    if args.dump:
        dump = Path(args.dump)
        dump.mkdir(parents=True, exist_ok=True)
        for r in range(args.k):
            data = generate(GeneratorSpec(spec_model, gen.n_true, gen.t, replicate_seed(seed, r), gen.alpha, gen.beta, gen.probs))
            with open(dump / f"replicate_{r:04d}.csv", "w", newline="") as fh:
                write_matrix_csv(data.rows(), fh)
    opts = _fit_opts(args)
    report = run_trial(gen, candidates, args.k, seed, threads=opts["threads"], n_upp=opts["n_upp"],
                       grid=opts["grid"], level=opts["level"])
    print(f"E[M]={expected_m(gen):.1f}", file=sys.stderr)
    _emit(report.to_json(indent=2) if args.json else report.to_csv(), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    if args.t > MAX_ENUMERATION_T or args.t < 2:
        raise UsageError(f"--t must be between 2 and {MAX_ENUMERATION_T}")
    kmax = args.t - 1 if args.kmax is None else args.kmax
    if not 1 <= kmax < args.t:
        raise UsageError("--kmax must satisfy 1 <= kmax < t")
    ok = True
    print("k,t,result,histories")
    for k in range(1, kmax + 1):
        rep = markov_correspondence_check(k, args.t)
        ok &= rep.passed
        print(f"{k},{args.t},{'pass' if rep.passed else 'fail: ' + rep.counterexample},{rep.n_checked}")
    return EXIT_OK if ok else 1


def _add_fit_options(p):
    p.add_argument("--nupp", type=int, default=None, help="upper bound of the N grid (default max(2M+100, 20M))")
    p.add_argument("--grid", choices=("full", "coarse"), default=None, help="default coarse")
    p.add_argument("--level", type=float, default=None, help="confidence level (default 0.95)")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON file with the same fields as the flags")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="recap", description="Behavioural capture-recapture models for closed populations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("quantify", help="covariate matrix of a capture CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--quantifier", default="g", help="f, g, gn, gtilde or gaug:k")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_quantify)

    p = sub.add_parser("fit", help="fit one model")
    p.add_argument("--input")
    p.add_argument("--model")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", default=True)
    fmt.add_argument("--csv", action="store_true")
    p.add_argument("--output", default=None)
    _add_fit_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="rank models by AIC")
    p.add_argument("--input")
    p.add_argument("--models", help="model strings separated by spaces or ';' ('standard' = study set)")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    p.add_argument("--strategy", choices=CUT_STRATEGIES, default=None, help="cut search strategy")
    p.add_argument("--output", default=None)
    _add_fit_options(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("cutsearch", help="optimal cutpoints of a covariate")
    p.add_argument("--input")
    p.add_argument("--quantifier", default="g")
    p.add_argument("--cuts", type=int, default=1)
    p.add_argument("--strategy", choices=CUT_STRATEGIES, default=None)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    p.add_argument("--output", default=None)
    _add_fit_options(p)
    p.set_defaults(func=cmd_cutsearch)

    p = sub.add_parser("simulate", help="replicated simulation study")
    p.add_argument("--model")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--probs", default=None, help="comma-separated class probabilities")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--seed", type=int, default=None, help="base seed (falls back to $RECAP_SEED, then 0)")
    p.add_argument("--candidates", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--dump", default=None, help="directory for the simulated capture matrices")
    p.add_argument("--json", action="store_true")
    _add_fit_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="Markov correspondence of dyadic cuts")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--kmax", type=int, default=None)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _load_config(args)
        return args.func(args)
    except (UsageError, CaptureDataError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"recap {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
