"""Command-line entry points for running experiments and shape utilities.

Exit codes: 0 when every assertion passes, 1 when an experiment assertion
fails, 2 for configuration problems (bad JSON, invalid values, unusable
geometry descriptions).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError
from .grids import make_grid
from .harness import ExperimentConfig, export_wulff_obj, run_experiment
from .integrand import build_wulff, integrand_from_spec
from .stability import StabilityOperator

__all__ = ["main"]


def _load_integrand(path: str, n: int):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read integrand file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"integrand file is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigError("integrand file must hold a JSON object")
    spec.setdefault("dim", n + 1)
    return integrand_from_spec(spec)


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    result = run_experiment(config, out_dir=args.out)
    for line in result.summary_lines():
        print(line)
    print(f"records: {len(result.records)}")
    if result.csv_path:
        print(f"csv: {result.csv_path}")
        print(f"svg: {result.svg_path}")
        print(f"summary: {result.summary_path}")
    return 0 if result.passed else 1


def _cmd_wulff(args) -> int:
    F = _load_integrand(args.integrand, args.n)
    grid = make_grid(args.n, args.res)
    W = build_wulff(F, grid)
    print(f"shape: n={W.n}, grid {tuple(grid.shape)}, diameter {W.diameter:.6e}")
    print(f"perimeter: {W.perimeter:.9e}")
    print(f"volume: {W.volume:.9e}")
    print(f"gauge residual: {W.gauge_residual():.3e}")
    if args.export == "obj":
        out_dir = Path(args.out) if args.out else Path.cwd()
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "wulff.obj"
        export_wulff_obj(W, path)
        print(f"obj: {path}")
    return 0


def _cmd_spectrum(args) -> int:
    F = _load_integrand(args.integrand, args.n)
    grid = make_grid(args.n, args.res)
    W = build_wulff(F, grid)
    op = StabilityOperator(W)
    values = op.spectrum(degree=args.degree)
    lines = ["index,eigenvalue"]
    for idx, val in enumerate(values):
        print(f"{idx:4d}  {val: .9e}")
        lines.append(f"{idx},{val:.12e}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "spectrum.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"csv: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wulff-lab",
        description=(
            "Anisotropic-curvature experiment runner: minimizer shapes, "
            "stability sweeps, and inequality verification tables."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment sweep")
    p_run.add_argument("--config", required=True, help="JSON config file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.set_defaults(func=_cmd_run)

    p_wulff = sub.add_parser("wulff", help="build a minimizer shape")
    p_wulff.add_argument("--integrand", required=True, help="JSON integrand file")
    p_wulff.add_argument("--res", type=int, required=True, help="grid resolution")
    p_wulff.add_argument("--n", type=int, default=2, choices=(1, 2))
    p_wulff.add_argument("--export", choices=("obj",), default=None)
    p_wulff.add_argument("--out", default=None, help="export directory")
    p_wulff.set_defaults(func=_cmd_wulff)

    p_spec = sub.add_parser("spectrum", help="second-variation spectrum")
    p_spec.add_argument("--integrand", required=True, help="JSON integrand file")
    p_spec.add_argument("--res", type=int, required=True, help="grid resolution")
    p_spec.add_argument("--n", type=int, default=2, choices=(1, 2))
    p_spec.add_argument("--degree", type=int, default=6, help="subspace degree")
    p_spec.add_argument("--out", default=None, help="CSV output directory")
    p_spec.set_defaults(func=_cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
