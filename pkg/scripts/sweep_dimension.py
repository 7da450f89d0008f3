"""Network size and channel count against dimension at fixed epsilon.

Runs the sweep described by a config (default: configs/dimension_sweep.cfg),
writes the CSV and prints fitted against predicted exponents.

    python scripts/sweep_dimension.py [--config PATH] [--key value ...]
"""

import sys
from pathlib import Path

from kolmonet.cli import main

if __name__ == "__main__":
    default = Path(__file__).parent / "configs" / "dimension_sweep.cfg"
    args = sys.argv[1:]
    if "--config" not in args:
        args = ["--config", str(default)] + args
    sys.exit(main(["sweep"] + args))
