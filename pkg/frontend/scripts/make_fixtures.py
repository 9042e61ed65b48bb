#!/usr/bin/env python3
"""Record UI fixtures: three dataset samples plus the exact risk numbers the
CLI prints for them. The UI test suite replays these to prove the risk panel
shows the service/CLI numbers verbatim.

Usage: python make_fixtures.py --checkpoint CKPT_DIR --data DATASET_DIR --out fixtures/
"""

import argparse
import json
import os
import subprocess
import sys


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--data", required=True)
    parser.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "fixtures"))
    parser.add_argument("--count", type=int, default=3)
    args = parser.parse_args()

    sys.path.insert(0, "")  # irdrop must be importable from the active env
    from irdrop.datagen import (
        CELL_DENSITY_FILE,
        POWER_GRID_FILE,
        SWITCHING_FILE,
        load_dataset,
    )

    arrays = load_dataset(args.data, with_labels=False)
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        cli = subprocess.run(
            [
                sys.executable,
                "-m",
                "irdrop.cli",
                "predict",
                "--checkpoint",
                args.checkpoint,
                "--inputs",
                args.data,
                "--index",
                str(i),
                "--json",
            ],
            capture_output=True,
            text=True,
            check=True,
        )
        fixture = {
            "name": f"sample{i}",
            "inputs": {
                "power_grid": arrays[POWER_GRID_FILE][i].tolist(),
                "cell_density": arrays[CELL_DENSITY_FILE][i].tolist(),
                "switching": arrays[SWITCHING_FILE][i].tolist(),
            },
            "response": json.loads(cli.stdout),
        }
        path = os.path.join(args.out, f"sample{i}.json")
        with open(path, "w") as fh:
            json.dump(fixture, fh)
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
