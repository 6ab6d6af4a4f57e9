"""Run every experiment config in scripts/configs and collect the verdicts.

Writes one subdirectory per experiment under the output directory (CSV
table, SVG plot, PASS/FAIL summary) and exits nonzero if any assertion
failed.  Usage:

    python scripts/run_all.py [--out runs] [--configs scripts/configs]
"""

import argparse
import sys
import time
from pathlib import Path

from wulff_lab.harness import ExperimentConfig, run_experiment


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs", help="output directory")
    parser.add_argument(
        "--configs",
        default=str(Path(__file__).parent / "configs"),
        help="directory of experiment config JSON files",
    )
    args = parser.parse_args(argv)

    paths = sorted(Path(args.configs).glob("*.json"))
    if not paths:
        print(f"no configs found in {args.configs}", file=sys.stderr)
        return 2
    failed = []
    for path in paths:
        config = ExperimentConfig.from_json(path)
        tic = time.perf_counter()
        result = run_experiment(config, out_dir=Path(args.out) / path.stem)
        elapsed = time.perf_counter() - tic
        print(f"== {path.stem} ({elapsed:.1f} s)")
        for line in result.summary_lines():
            print("  ", line)
        if not result.passed:
            failed.append(path.stem)
    if failed:
        print(f"FAILED experiments: {', '.join(failed)}")
        return 1
    print(f"all {len(paths)} experiments passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
