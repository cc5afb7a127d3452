#!/usr/bin/env python3
"""Run both 34-node case-study fixtures through `ugfrel assess` with the oracle check."""

from __future__ import annotations

import sys
from pathlib import Path

# Allow running directly from the repository without installing the package.
if __name__ == "__main__" and __package__ is None:
    repo_root = Path(__file__).resolve().parents[1]
    src_path = repo_root / "src"
    if str(src_path) not in sys.path:
        sys.path.insert(0, str(src_path))

from ugfrel.cli import main as ugfrel_main  # noqa: E402

DATA_DIR = Path(__file__).resolve().parents[1] / "data"
FIXTURES = ("case34_exact.json", "case34_paper_rounded.json")


def main(argv: list[str]) -> int:
    rc_overall = 0
    for name in FIXTURES:
        print(f"== {name}")
        try:
            ugfrel_main(["assess", "--config", str(DATA_DIR / name), "--verify-oracle", *argv])
        except SystemExit as exc:
            rc = int(exc.code or 0)
            rc_overall = rc_overall or rc
    return rc_overall


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
