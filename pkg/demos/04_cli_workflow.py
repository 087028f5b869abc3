"""Drive the whole workflow through the command-line interface.

Saves a model and an inputs file into a scratch directory, then invokes the
`safequant` CLI in-process: robustness quantification with a JSON report and
CSV summary, re-derivation of the safe radius from the stored report, and a
model inspection dump.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from safequant import save_model
from safequant.cli import run

from importlib import import_module
import sys

sys.path.insert(0, str(Path(__file__).resolve().parent))
demo1 = import_module("01_safe_radius")


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="safequant-demo-"))
    model = workdir / "model.json"
    inputs = workdir / "inputs.json"
    report = workdir / "report.json"
    summary = workdir / "summary.csv"

    save_model(demo1.build_net(), model, metadata={"name": "demo-relu-8"})
    inputs.write_text(json.dumps({
        "inputs": [[0.4, 0.55], [0.3, 0.7]],
        "labels": [1, 2],
    }))

    print("== inspect-model ==")
    run(["inspect-model", "--model", str(model)])

    print("\n== robustness (input 0, sup-norm ball d=0.2) ==")
    code = run(["robustness", "--model", str(model),
                "--inputs", str(inputs), "--input-index", "0",
                "--d", "0.2", "--p", "inf", "--budget", "20000", "--seed", "0",
                "--out", str(report), "--csv", str(summary)])
    print(f"exit code: {code}")

    print("\n== certify (from the stored report) ==")
    run(["certify", "--report", str(report)])

    print("\n== CSV summary ==")
    print(summary.read_text().strip())
    print(f"\nartifacts left in {workdir}")


if __name__ == "__main__":
    main()
