from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .ugf import ModelInputError


class LoadSeriesError(ModelInputError):
    def __init__(self, message: str, path: Path, line: int | None = None) -> None:
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def read_load_series(path: Path) -> np.ndarray:
    """Read hourly kW values, one per line.

    A single non-numeric first line is taken as a header. Blank lines and
    ``#`` comments are skipped; only the first comma-separated field counts.
    """
    path = path.expanduser()
    values: list[float] = []
    header_seen = False
    try:
        with path.open("r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                field = text.split(",", 1)[0].strip()
                try:
                    kw = float(field)
                except ValueError:
                    if not values and not header_seen:
                        header_seen = True
                        continue
                    raise LoadSeriesError(f"not a number: {field!r}", path, lineno) from None
                if not math.isfinite(kw) or kw < 0:
                    raise LoadSeriesError(f"load must be finite and >= 0, got {field!r}", path, lineno)
                values.append(kw)
    except OSError as exc:
        raise LoadSeriesError(f"cannot read load series ({exc.strerror or exc})", path) from exc
    if not values:
        raise LoadSeriesError("no load values", path)
    return np.asarray(values, dtype=np.float64)
