#!/usr/bin/env python3
"""Run the desk-scale pulsed experiment and check the theory/empirical gate.

Thin wrapper over the CLI; equivalent to

    drlsnet run configs/desk_pulsed_T32.ini --check-acceptance

Exits 3 if the theory curve drifts outside the acceptance tolerance.
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from drlsnet.cli import main  # noqa: E402

if __name__ == "__main__":
    config = sys.argv[1] if len(sys.argv) > 1 else str(
        ROOT / "configs" / "desk_pulsed_T32.ini")
    raise SystemExit(main(["run", config, "--check-acceptance"]))
