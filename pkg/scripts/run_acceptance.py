#!/usr/bin/env python3
"""Run the acceptance suite and show one PASS/FAIL line per criterion."""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    return subprocess.call(
        [sys.executable, "-m", "pytest", "-s", "-q", str(ROOT / "tests" / "test_acceptance.py")],
        cwd=ROOT,
    )


if __name__ == "__main__":
    sys.exit(main())
