#!/usr/bin/env python3
"""
gmdiffuse launcher for a source checkout.

Usage:
    python3 scripts/gmdiffuse.py gen-mixture --mixture pair.json --count 10000 --seed 1 --out runs/pair
    python3 scripts/gmdiffuse.py train --config train.toml --out runs/model
    python3 scripts/gmdiffuse.py sample --models runs/model --count 10000 --seed 2 --out runs/gen
"""

import sys
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from gmdiffuse.cli.main import main


if __name__ == "__main__":
    sys.exit(main())
