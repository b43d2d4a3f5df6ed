"""End-to-end command-line pipeline on a generated toy dataset.

Writes a synthetic store to disk in the standard triple-directory
layout, then drives the ``compound-kge`` CLI through train, eval,
categorize, and diagnose, including the JSON report and CSV exports.
"""

import json
import subprocess
import sys
from pathlib import Path

from compound_kge.dataset import save_dictionaries, save_splits
from compound_kge.synthetic import SyntheticPattern, generate_synthetic_kg

root = Path("demo_outputs") / "cli"
data = root / "dataset"
run = root / "run"

store = generate_synthetic_kg(SyntheticPattern.INVERSE, seed=4)
save_splits(store, data)
save_dictionaries(store, data)
print(f"wrote toy dataset to {data}\n")


def cli(*args):
    cmd = [sys.executable, "-m", "compound_kge.cli", *args]
    print("$", " ".join(str(a) for a in cmd[2:]))
    result = subprocess.run(cmd, capture_output=True, text=True)
    print(result.stdout)
    if result.returncode != 0:
        print(result.stderr, file=sys.stderr)
        raise SystemExit(result.returncode)


cli(
    "train",
    "--data", str(data),
    "--variant", "full",
    "--head-order", "SRT",
    "--tail-order", "SRT",
    "--dim", "16",
    "--lr", "0.01",
    "--batch-size", "32",
    "--neg-size", "16",
    "--margin", "4",
    "--steps", "800",
    "--valid-interval", "200",
    "--seed", "0",
    "--deterministic",
    "--save", str(run),
)

cli(
    "eval",
    "--checkpoint", str(run / "best.ckpt"),
    "--data", str(data),
    "--split", "test",
    "--out", str(root / "report.json"),
)

cli("categorize", "--data", str(data))

cli(
    "diagnose",
    "--checkpoint", str(run / "best.ckpt"),
    "--all",
    "--export-histograms", str(root / "histograms"),
    "--export-embeddings", str(root / "entities.csv"),
)

report = json.loads((root / "report.json").read_text())
print("parsed JSON report:", {k: report[k] for k in ("mrr", "hits1", "hits10")})
print("artifacts under", root)
