"""Command-line entry point: ``vtn run``, ``vtn validate`` and ``vtn topology``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import InvalidParameterError, SpecValidationError
from .experiments import EXPERIMENTS, ExperimentSpec, run_to_dir, validate
from .topology import resolve_topology


def _load_spec(path: str, seed: int | None = None) -> ExperimentSpec:
    spec = ExperimentSpec.load(path)
    if seed is not None:
        data = spec.to_dict()
        data["seed"] = seed
        spec = ExperimentSpec.from_dict(data)
    return spec


def cmd_run(args) -> int:
    spec = _load_spec(args.spec, args.seed)
    csv_path, manifest = run_to_dir(spec, args.out, workers=args.workers)
    print(f"wrote {csv_path}")
    print(f"wrote {manifest}")
    return 0


def cmd_validate(args) -> int:
    spec = _load_spec(args.spec)
    errors = validate(spec)
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    print("ok")
    return 0


def cmd_topology(args) -> int:
    ref = args.builtin if args.builtin.startswith("builtin:") else f"builtin:{args.builtin}"
    topo = resolve_topology(ref)
    if args.out:
        topo.save(args.out)
        print(f"wrote {args.out} ({topo.node_count} nodes, {topo.link_count} links)")
    else:
        print(topo.to_json())
    return 0


def cmd_spec(args) -> int:
    text = json.dumps(ExperimentSpec(experiment=args.experiment).to_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vtn", description="Tenant routing-update experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment spec and write CSV + manifest")
    p.add_argument("--spec", required=True, help="experiment spec (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a spec without running it")
    p.add_argument("--spec", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("topology", help="write a builtin topology as JSON")
    p.add_argument("--builtin", required=True, help="ft<k>, clos or shortcut:ft<k>:<n>:<seed>")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("spec", help="print a default spec for an experiment")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spec)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecValidationError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 2
    except (InvalidParameterError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
