"""Run the acceptance suite and print one line per criterion."""

import pathlib
import subprocess
import sys

root = pathlib.Path(__file__).resolve().parents[1]
sys.exit(subprocess.call([sys.executable, "-m", "pytest", "-q", str(root / "tests" / "test_acceptance.py")], cwd=root))
