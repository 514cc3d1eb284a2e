"""Command-line driver.

Subcommands: ``zeros``, ``sample-sets``, ``reconstruct``, ``certify``,
``demo-1d``, ``demo-2d``, ``skolem``.  Exit codes: 0 on success, 1 on a
configuration error, 2 when some atoms failed but others produced results.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline, sampling, uniqueness
from .errors import ConfigError, EmptyDecouplingSetError, ShiftPronyError
from .svgplot import render_zero_plot


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; map that to a config error
    def error(self, message):
        raise _ArgumentError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="shiftprony", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument(
            "--noise", type=float, default=None, help="override config noise level"
        )
        p.add_argument("--format", choices=("json", "csv"), default="json")

    add_common(sub.add_parser("zeros", help="emit zero sets and the SVG plot"))
    add_common(sub.add_parser("sample-sets", help="emit decoupling points per atom"))
    add_common(sub.add_parser("reconstruct", help="run the full pipeline"))
    add_common(sub.add_parser("certify", help="uniqueness certificates only"))
    for name in ("demo-1d", "demo-2d"):
        p = sub.add_parser(name, help=f"run the bundled {name[-2:]} example")
        add_common(p, config_required=False)
    p = sub.add_parser("skolem", help="signed-pair moment table")
    p.add_argument("--kmax", type=int, default=40)
    p.add_argument("--out", default="out")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    return parser


def _load_config(args) -> pipeline.ExperimentConfig:
    if args.command == "demo-1d":
        raw = pipeline.demo_1d_config(seed=args.seed or 0)
    elif args.command == "demo-2d":
        raw = pipeline.demo_2d_config(seed=args.seed or 0)
    else:
        if args.config is None:
            raise ConfigError("--config is required")
        raw = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        raw = dict(raw, seed=args.seed)
    if args.noise is not None:
        raw = dict(raw, noise_level=args.noise)
    return pipeline.parse_config(raw)


def _cmd_zeros(config, out_dir: Path, fmt: str) -> int:
    atoms = list(config.atoms)
    descs = []
    for i, atom in enumerate(atoms):
        desc = sampling.zero_set(atom)
        entry = {"atom_index": i, "atom": atom.label(), "variant": desc.variant}
        if desc.lattice is not None:
            entry["lattice"] = {
                "step": desc.lattice.step,
                "offset": desc.lattice.offset,
                "exclude_zero": desc.lattice.exclude_zero,
            }
        if desc.families:
            entry["families"] = [
                {
                    "normal": list(f.normal),
                    "step": f.step,
                    "offset": f.offset,
                    "exclude_zero": f.exclude_zero,
                }
                for f in desc.families
            ]
        descs.append(entry)
    pipeline.dump_json(descs, out_dir / "zero_sets.json")
    (out_dir / "zeros.svg").write_text(
        render_zero_plot(atoms, config.window, None)
    )
    print(f"wrote {out_dir / 'zero_sets.json'} and {out_dir / 'zeros.svg'}")
    return 0


def _cmd_sample_sets(config, out_dir: Path, fmt: str) -> int:
    atoms = list(config.atoms)
    failures = 0
    collected = []
    for r in range(len(atoms)):
        try:
            ds = sampling.decoupling_set(atoms, r, config.window)
            collected.append(sampling.decoupling_to_json_dict(ds))
            if fmt == "csv":
                with open(out_dir / f"sample_set_{r}.csv", "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow([f"s{d + 1}" for d in range(config.dimension)])
                    for row in sampling.points_to_rows(ds.points):
                        writer.writerow([repr(v) for v in row])
        except EmptyDecouplingSetError as exc:
            failures += 1
            collected.append({"target_index": r, "error": str(exc)})
    pipeline.dump_json(collected, out_dir / "sample_sets.json")
    print(f"wrote {out_dir / 'sample_sets.json'}")
    return 2 if 0 < failures < len(atoms) else (1 if failures == len(atoms) else 0)


def _cmd_reconstruct(config, out_dir: Path, fmt: str, base_dir=None) -> int:
    report = pipeline.run_reconstruction(config, base_dir=base_dir)
    paths = pipeline.write_report_artifacts(report, out_dir)
    for entry in report.entries:
        if entry.error:
            print(f"atom {entry.atom_index}: FAILED ({entry.error})")
        else:
            res = entry.solution.residual if entry.solution else float("nan")
            print(f"atom {entry.atom_index}: ok, residual {res:.3g}")
    print(f"wrote {paths['report']}")
    return 2 if report.status == "partial" else 0


def _cmd_certify(config, out_dir: Path, fmt: str) -> int:
    atoms = list(config.atoms)
    results = []
    failures = 0
    for r in range(len(atoms)):
        order = config.orders[r]
        entry = {"atom_index": r, "order": order}
        try:
            ds = sampling.decoupling_set(atoms, r, config.window)
            plan = pipeline.select_samples(ds, config.sampling_specs[r], order)
            certs = {}
            pipeline._attach_certificates(certs, config, ds, plan, order)
            entry["certificates"] = certs
        except ShiftPronyError as exc:
            failures += 1
            entry["error"] = f"{type(exc).__name__}: {exc}"
        results.append(entry)
    pipeline.dump_json(results, out_dir / "certificates.json")
    print(f"wrote {out_dir / 'certificates.json'}")
    return 2 if 0 < failures < len(atoms) else (1 if failures == len(atoms) else 0)


def _cmd_skolem(args, out_dir: Path) -> int:
    result = uniqueness.skolem_demo(args.kmax)
    if args.format == "csv":
        path = out_dir / "skolem_moments.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "m_k"])
            writer.writerows(result.rows())
    else:
        path = out_dir / "skolem_moments.json"
        pipeline.dump_json(
            {
                "moments": list(result.moments),
                "even_moments_zero": result.even_moments_zero,
                "even_grid_flags": list(result.even_grid_flags),
                "verdict": result.verdict,
            },
            path,
        )
    print(result.verdict)
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.command == "skolem":
        return _cmd_skolem(args, out_dir)
    try:
        config = _load_config(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    base_dir = Path(args.config).parent if getattr(args, "config", None) else None
    try:
        if args.command == "zeros":
            return _cmd_zeros(config, out_dir, args.format)
        if args.command == "sample-sets":
            return _cmd_sample_sets(config, out_dir, args.format)
        if args.command in ("reconstruct", "demo-1d", "demo-2d"):
            return _cmd_reconstruct(config, out_dir, args.format, base_dir=base_dir)
        if args.command == "certify":
            return _cmd_certify(config, out_dir, args.format)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
