"""Command line interface: ``sketchjl {plan,sample,embed,sketch,verify,crossover}``.

Exit codes: 0 success, 2 invalid parameters, 3 shape mismatch, 4 parse
failure, 5 failed verification experiments.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import cascade, dense_jl, diagnostics, formats, sparse_jl
from .errors import (
    DomainOverflowError,
    InvalidParameterError,
    InvalidSeedError,
    ShapeError,
    SketchJLError,
    UnsupportedParametersError,
)
from .field_hash import parse_seed
from .report import crossover_table, format_crossover

EXIT_PARAMS = 2
EXIT_SHAPE = 3
EXIT_PARSE = 4
EXIT_VERIFY = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _default_profile() -> str:
    return os.environ.get("SKETCHJL_PROFILE", "practical")


def _read(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_PARSE) from exc


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _emit(obj, fmt: str, path: str | None = None) -> None:
    if fmt == "json":
        _write(path, formats.dump_json(obj))
    else:
        _write(path, "".join(f"{k}: {v}\n" for k, v in obj.items()))


def _load_transform(path: str) -> sparse_jl.SparseJLTransform:
    desc = formats.load_json(_read(path))
    if not isinstance(desc, dict):
        raise formats.ParseError("transform descriptor must be a JSON object")
    return sparse_jl.SparseJLTransform.from_descriptor(desc)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise CliError("missing required option(s): " + ", ".join("--" + n for n in missing), EXIT_PARAMS)


def cmd_plan(args) -> int:
    _need(args, "epsilon", "delta")
    if args.family == "dense":
        params = dense_jl.plan_dense(args.epsilon, args.delta, args.profile)
        out = {"family": "dense", **params.to_dict(), "seed_bits": dense_jl.dense_seed_bits(params.r)}
    elif args.family == "sparse":
        _need(args, "d")
        params = sparse_jl.plan_sparse(args.epsilon, args.delta, args.d, args.profile, args.variant)
        out = {"family": "sparse", **params.to_dict()}
    else:
        _need(args, "d")
        plan = cascade.plan_cascade(args.epsilon, args.delta, args.d)
        out = {"family": "cascade", **plan.to_dict(), "seed_bits": plan.total_seed_bits}
    _emit(out, args.format, args.output)
    return 0


def cmd_sample(args) -> int:
    _need(args, "epsilon", "delta", "d", "seed")
    params = sparse_jl.plan_sparse(args.epsilon, args.delta, args.d, args.profile, args.variant)
    t = sparse_jl.sample_sparse(params, parse_seed(args.seed))
    _write(args.output, formats.dump_json(t.to_descriptor()))
    return 0


def cmd_embed(args) -> int:
    _need(args, "transform", "input")
    t = _load_transform(args.transform)
    text = _read(args.input)
    if args.input_format == "sparse":
        rows = [formats.parse_sparse_vector(text, t.d)]
    else:
        rows = formats.parse_dense_rows(text, t.d)
    ys = [t.apply(x) for x in rows]
    if args.format == "json":
        _write(args.output, formats.dump_json([[float(v) for v in y] for y in ys]))
    else:
        _write(args.output, "".join(formats.format_row(y) + "\n" for y in ys))
    return 0


def cmd_sketch(args) -> int:
    _need(args, "transform")
    t = _load_transform(args.transform)
    sk = sparse_jl.TurnstileSketch(t)
    for j, v in formats.parse_pairs(_read(args.input), t.d):
        sk.update(j, v)
    out = {"updates_applied": sk.updates_applied, "y": [float(v) for v in sk.y]}
    if args.format == "json":
        _write(args.output, formats.dump_json(out))
    else:
        _write(args.output, f"updates_applied: {sk.updates_applied}\n" + formats.format_row(sk.y) + "\n")
    return 0


_OVERRIDES = ("k", "alpha", "r_h", "r_sigma")


def run_manifest_entry(entry: dict) -> diagnostics.ExperimentReport:
    if not isinstance(entry, dict) or "kind" not in entry:
        raise formats.ParseError("manifest entries must be objects with a 'kind'")
    try:
        params = sparse_jl.plan_sparse(
            float(entry["epsilon"]),
            float(entry["delta"]),
            int(entry["d"]),
            entry.get("profile", "practical"),
            entry.get("variant", "main"),
        )
        changes = {k: int(entry[k]) for k in _OVERRIDES if k in entry}
        if changes:
            params = dataclasses.replace(params, profile="custom", **changes)
        trials = int(entry.get("trials", 1000))
        rng_seed = int(entry.get("rng_seed", 0))
    except SketchJLError:
        raise
    except KeyError as exc:
        raise formats.ParseError(f"manifest entry lacks {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise formats.ParseError(f"bad manifest value: {exc}") from exc
    name = entry.get("name")
    if entry["kind"] == "eigenbound":
        return diagnostics.eigenbound_sweep(params, trials, rng_seed, name)
    return diagnostics.tail_experiment(entry["kind"], params, trials, rng_seed, entry.get("vector", "ones"), name)


def cmd_verify(args) -> int:
    manifest = formats.load_json(_read(args.manifest or args.input))
    if not isinstance(manifest, list):
        raise formats.ParseError("manifest must be a JSON array")
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.rng_seed is not None:
        overrides["rng_seed"] = args.rng_seed
    reports = [run_manifest_entry({**e, **overrides} if isinstance(e, dict) else e) for e in manifest]
    _write(args.output, formats.dump_json([r.to_dict() for r in reports]))
    failed = [r.name for r in reports if not r.passed]
    if failed:
        print("failed experiments: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return 0


def cmd_crossover(args) -> int:
    rows = crossover_table()
    if args.format == "json":
        _write(args.output, formats.dump_json(rows))
    else:
        _write(args.output, format_crossover(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchjl", description="Seeded sparse Johnson-Lindenstrauss embeddings.", allow_abbrev=False
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, params=False, io=True, fmt_default="json"):
        if params:
            p.add_argument("--epsilon", type=float, help="distortion bound, in (0, 1/2]")
            p.add_argument("--delta", type=float, help="failure probability, in (0, 1/2)")
            p.add_argument("--d", type=int, help="input dimension")
            p.add_argument(
                "--profile",
                default=_default_profile(),
                choices=["practical", "paper", "paper-faithful"],
                help="constants profile (default: $SKETCHJL_PROFILE or practical)",
            )
            p.add_argument("--variant", default="main", choices=["main", "variant"], help="sparse parameter shape")
        if io:
            p.add_argument("--input", help="input file (default stdin)")
            p.add_argument("--output", help="output file (default stdout)")
        p.add_argument("--format", default=fmt_default, choices=["json", "text"], help="output format")

    p = sub.add_parser("plan", help="print the parameter plan", allow_abbrev=False)
    p.add_argument("--family", choices=["dense", "sparse", "cascade"], default="sparse", help="transform family")
    common(p, params=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sample", help="write a sparse transform descriptor for a seed", allow_abbrev=False)
    common(p, params=True)
    p.add_argument("--seed", help="master seed as a hex string")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("embed", help="embed vectors with a transform descriptor", allow_abbrev=False)
    p.add_argument("--transform", help="transform descriptor JSON")
    p.add_argument("--input-format", choices=["dense", "sparse"], default="dense", help="vector file format")
    common(p, fmt_default="text")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("sketch", help="fold an update stream 'j v' into a sketch", allow_abbrev=False)
    p.add_argument("--transform", help="transform descriptor JSON")
    common(p)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("verify", help="run the experiments listed in a JSON manifest", allow_abbrev=False)
    p.add_argument("manifest", nargs="?", help="manifest file (or --input)")
    p.add_argument("--trials", type=int, help="override the trial count of every entry")
    p.add_argument("--rng-seed", type=int, help="override the rng seed of every entry")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("crossover", help="seed-length table: cascade against a single dense matrix", allow_abbrev=False)
    common(p, fmt_default="text")
    p.set_defaults(func=cmd_crossover)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"sketchjl: {exc}", file=sys.stderr)
        return exc.code
    except formats.ParseError as exc:
        print(f"sketchjl: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ShapeError as exc:
        print(f"sketchjl: shape mismatch: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except InvalidSeedError as exc:
        print(f"sketchjl: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InvalidParameterError, UnsupportedParametersError, DomainOverflowError) as exc:
        print(f"sketchjl: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    except SketchJLError as exc:
        print(f"sketchjl: {exc}", file=sys.stderr)
        return EXIT_PARAMS


if __name__ == "__main__":
    sys.exit(main())
