"""Regenerate tests/golden/ from tests/data/.  Review the diff before committing."""
import shutil
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from test_cli import CASES, DATA, GOLDEN  # noqa: E402

from nflas.cli import main  # noqa: E402

for name, command in CASES.items():
    out = GOLDEN / name
    shutil.rmtree(out, ignore_errors=True)
    code = main([command, "--config", str(DATA / f"{name}.toml"), "--out", str(out)])
    if code:
        sys.exit(f"{name}: exit {code}")
