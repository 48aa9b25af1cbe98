"""Command-line entry point: ``wavepinn train | evaluate | aggregate``.

Exit codes: 0 success, 2 configuration error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

from .activations import all_activation_names
from .harness import ConfigError, RunConfig, scale_preset, aggregate, build_problem, evaluate_model, run_experiment
from .network import load_checkpoint
from .pde import PROBLEM_KINDS, ReferenceParseError, load_reference_csv

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3

# flag name -> RunConfig field, for the fields exposed as plain flags
_FLAG_FIELDS = {f.name: f for f in fields(RunConfig) if f.name != "constants"}


def _constant(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"constant {key!r} needs a number, got {val!r}") from None


def _add_train(sub) -> None:
    p = sub.add_parser("train", help="train one problem/activation pair")
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--scale", choices=sorted(("paper", "desk")), help="size preset applied before other settings")
    p.add_argument("--problem", choices=PROBLEM_KINDS)
    p.add_argument("--activation", metavar="NAME", help="one of: " + ", ".join(all_activation_names()))
    p.add_argument("--hidden-layers", type=int)
    p.add_argument("--hidden-width", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--weight-residual", type=float)
    p.add_argument("--weight-boundary", type=float)
    p.add_argument("--weight-initial", type=float)
    p.add_argument("--nx", type=int, help="training grid points in x (1D problems)")
    p.add_argument("--nt", type=int, help="training grid points in t (1D problems)")
    p.add_argument("--n-random", type=int, help="reference records drawn for navier_stokes")
    p.add_argument("--gabor-omega-init", type=int, choices=(3, 5))
    p.add_argument("--reference-data", help="t,x,y,u,v,p CSV (navier_stokes)")
    p.add_argument("--output-dir")
    p.add_argument("--eval-nx", type=int)
    p.add_argument("--eval-nt", type=int)
    p.add_argument("--history", type=int, help="L-BFGS memory")
    p.add_argument("--iteration-count", choices=("steps", "evals"))
    p.add_argument("--constant", type=_constant, action="append", default=[], metavar="KEY=VALUE", help="override a problem constant, e.g. beta=10")


def _add_evaluate(sub) -> None:
    p = sub.add_parser("evaluate", help="evaluate a saved model on the test grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--problem", required=True, choices=PROBLEM_KINDS)
    p.add_argument("--reference-data")
    p.add_argument("--eval-nx", type=int, default=101)
    p.add_argument("--eval-nt", type=int, default=101)
    p.add_argument("--constant", type=_constant, action="append", default=[], metavar="KEY=VALUE")


def _add_aggregate(sub) -> None:
    p = sub.add_parser("aggregate", help="merge run reports into one CSV table")
    p.add_argument("dirs", nargs="*", help="run directories (or report.json files)")
    p.add_argument("--output", "-o", help="write the CSV here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavepinn", description="Train and evaluate PINNs with adaptive wavelet activations.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_train(sub)
    _add_evaluate(sub)
    _add_aggregate(sub)
    return parser


def config_from_args(args) -> RunConfig:
    doc: dict = {}
    if args.config:
        doc = RunConfig.from_json(args.config).to_dict()
    if args.scale:
        doc.update(scale_preset(args.scale))
    for name in _FLAG_FIELDS:
        val = getattr(args, name, None)
        if val is not None:
            doc[name] = val
    if args.constant:
        consts = dict(doc.get("constants", {}))
        consts.update(dict(args.constant))
        doc["constants"] = consts
    return RunConfig.from_dict(doc)


def _cmd_train(args) -> int:
    cfg = config_from_args(args)
    report = run_experiment(cfg)
    summary = {"status": report.status, "output_dir": cfg.output_dir, "eval": report.eval, "loss": None if report.loss is None else report.loss["total"]}
    print(json.dumps(summary))
    return EXIT_DIVERGED if report.diverged else EXIT_OK


def _cmd_evaluate(args) -> int:
    try:
        model = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load checkpoint {args.checkpoint}: {exc}") from None
    ref = None
    if args.problem == "navier_stokes":
        if not args.reference_data:
            raise ConfigError("navier_stokes evaluation needs --reference-data")
        try:
            ref = load_reference_csv(args.reference_data)
        except (OSError, ReferenceParseError) as exc:
            raise ConfigError(str(exc)) from None
    cfg = RunConfig(problem=args.problem, activation=model.config.activation, reference_data=args.reference_data, constants=dict(args.constant))
    problem = build_problem(cfg, ref)
    if (model.config.in_dim, model.config.out_dim) != (problem.in_dim, problem.out_dim):
        raise ConfigError(f"checkpoint is {model.config.in_dim}->{model.config.out_dim}, {problem.kind} needs {problem.in_dim}->{problem.out_dim}")
    res, _, _ = evaluate_model(model, problem, args.eval_nx, args.eval_nt, ref)
    print(json.dumps(res.to_dict()))
    return EXIT_OK


def _cmd_aggregate(args) -> int:
    result = aggregate(args.dirs)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    text = result.to_csv()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = {"train": _cmd_train, "evaluate": _cmd_evaluate, "aggregate": _cmd_aggregate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"wavepinn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
