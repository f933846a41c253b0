"""Command line interface: simulate, compose, reconstruct, verify, oracle, figure."""
import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .errors import BihjError
from .scenario import (
    load_config,
    parse_config,
    run_compose,
    run_figure,
    run_oracle_table,
    run_reconstruct,
    run_simulate,
)


def _default_config_doc():
    with resources.files("bihj").joinpath("data/gaussian.json").open("r") as fh:
        return json.load(fh)


def _load(args):
    if args.config:
        config = load_config(args.config)
    else:
        config = parse_config(_default_config_doc())
    if args.mode:
        doc = dict(config.echo)
        doc["mode"] = args.mode
        config = parse_config(doc)
    return config


def _out_dir(args, config, command):
    if args.out:
        return Path(args.out)
    base = config.output_dir or "out"
    return Path(base) / command


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bihj",
        description="Trajectory laboratory for 1D Schrodinger dynamics: "
                    "propagate the coupled action-pair congruences, rebuild the "
                    "wavefunction from accumulated actions, and verify the "
                    "composition and conservation analysis against closed forms.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
            ("simulate", "reference solution, fields and trajectory ensembles"),
            ("compose", "integral-curve composition and source terms"),
            ("reconstruct", "wavefunction from trajectory data against the reference"),
            ("verify", "full acceptance suite"),
            ("oracle", "closed-form table for the gaussian scenario"),
            ("figure", "plot-ready CSV series")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", metavar="PATH", default=None,
                       help="scenario JSON (default: bundled gaussian scenario)")
        p.add_argument("--out", metavar="DIR", default=None, help="output directory")
        p.add_argument("--mode", choices=("reference", "autonomous"), default=None,
                       help="override the scenario mode")
        if name == "compose":
            p.add_argument("--case", choices=("i", "ii", "converse"), default=None,
                           help="composition case (default: from the scenario)")
        if name == "figure":
            p.add_argument("--id", dest="figure_id", choices=("fig2", "fig3"),
                           required=True, help="which figure data set")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.mode == "reference":
        args.mode = "reference_driven"
    try:
        config = _load(args)
        if args.command == "oracle":
            print(run_oracle_table(config))
            return 0
        out_dir = _out_dir(args, config, args.command)
        if args.command == "simulate":
            manifest, bundle = run_simulate(config, out_dir)
        elif args.command == "compose":
            manifest, bundle = run_compose(config, out_dir, case=args.case)
        elif args.command == "reconstruct":
            manifest, bundle = run_reconstruct(config, out_dir)
        elif args.command == "figure":
            manifest, bundle = run_figure(config, out_dir, args.figure_id)
        elif args.command == "verify":
            from .acceptance import run_all
            from .scenario import RunBundle
            bundle = RunBundle("verify", config, out_dir)
            results, timings = run_all(workdir=out_dir / "scratch")
            bundle.timings.update(timings)
            for res in results:
                bundle.add_check(res.as_dict())
            bundle.emit_json("acceptance.json", {
                "n_checks": len(results),
                "n_passed": sum(r.passed for r in results),
                "checks": [r.as_dict() for r in results],
            })
            manifest = bundle.finish()
            n_fail = sum(not r.passed for r in results)
            print(f"{len(results) - n_fail}/{len(results)} acceptance checks passed; "
                  f"outputs in {out_dir}")
            return 0 if n_fail == 0 else 1
        for name in sorted(bundle.files):
            print(f"wrote {out_dir / name}")
        return 0 if bundle.all_passed else 1
    except BihjError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
