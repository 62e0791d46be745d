"""Regenerate the frozen outputs in tests/fixtures/golden/ from the fixture in tests/fixtures/pair/.

Run only after the oracle tests pass; never edit the goldens by hand.

    python scripts/regen_goldens.py
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
PAIR = ROOT / "tests/fixtures/pair"
GOLDEN = ROOT / "tests/fixtures/golden"

SWAPPED_GQR = {"iterations": 25, "step_size": 0.005}


def cli(*args: str) -> None:
    subprocess.run([sys.executable, "-m", "fusion_forge", *args], check=True, cwd=ROOT)


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    cfg = str(PAIR / "config.json")
    cli("run", "--config", cfg, "--method", "rrf", "--out", str(GOLDEN / "rrf.run"), "--report", "/dev/null")
    cli("eval", "--run", str(GOLDEN / "rrf.run"), "--qrels", str(PAIR / "qrels.txt"), "--out", str(GOLDEN / "rrf_eval.json"))
    cli("tune", "--config", cfg, "--method", "gqr", "--out", str(GOLDEN / "tune_gqr.json"))
    selected = json.loads((GOLDEN / "tune_gqr.json").read_text())["selected"]

    raw = json.loads((PAIR / "config.json").read_text())
    tuned = dict(raw, method="gqr", gqr=selected)
    (PAIR / "config_gqr_tuned.json").write_text(json.dumps(tuned, indent=2) + "\n")
    cli("run", "--config", str(PAIR / "config_gqr_tuned.json"), "--out", str(GOLDEN / "gqr_tuned.run"),
        "--report", "/dev/null")

    swapped = dict(raw, method="gqr", gqr=SWAPPED_GQR, swap_roles=True)
    (PAIR / "config_gqr_swapped.json").write_text(json.dumps(swapped, indent=2) + "\n")
    cli("run", "--config", str(PAIR / "config_gqr_swapped.json"), "--out", str(GOLDEN / "gqr_swapped.run"),
        "--report", "/dev/null")


if __name__ == "__main__":
    main()
