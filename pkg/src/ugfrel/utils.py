from __future__ import annotations

import json
import logging
import os
import sys
import tempfile
from datetime import datetime, timezone
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Optional


def ensure_dir(p: Path) -> Path:
    p.mkdir(parents=True, exist_ok=True)
    return p


def atomic_write_text(path: Path, text: str) -> None:
    ensure_dir(path.parent)
    with tempfile.NamedTemporaryFile("w", delete=False, dir=str(path.parent), encoding="utf-8") as tf:
        tf.write(text)
        tf.flush()
        os.fsync(tf.fileno())
        tmpname = tf.name
    os.replace(tmpname, path)


def dump_json(data: dict[str, Any]) -> str:
    """Stable JSON text: fixed key order, shortest round-trip float repr."""
    return json.dumps(data, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever ``sys.stderr`` is at emit time."""

    @property
    def stream(self):  # type: ignore[override]
        return sys.stderr

    @stream.setter
    def stream(self, value) -> None:
        pass


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:  # type: ignore[override]
        payload = {
            "ts": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "name": record.name,
            "msg": record.getMessage(),
        }
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)
        if hasattr(record, "extra"):
            try:
                payload.update(getattr(record, "extra"))
            except Exception:
                pass
        return json.dumps(payload, ensure_ascii=False, default=str)


def setup_logging(
    name: str,
    *,
    level: int = logging.INFO,
    json_logs: bool = False,
    log_file: Optional[Path] = None,
) -> logging.Logger:
    """Configure logging.

    - If log_file is given, rotate there.
    - Else, stderr (stdout carries the report).
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Avoid duplicate handlers if called multiple times
    if logger.handlers:
        return logger

    fmt_text = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
    formatter = JsonFormatter() if json_logs else logging.Formatter(fmt_text)

    if log_file is None:
        handler: logging.Handler = _StderrHandler()
    else:
        ensure_dir(log_file.parent)
        handler = RotatingFileHandler(str(log_file), maxBytes=5 * 1024 * 1024, backupCount=5)
    handler.setFormatter(formatter)
    logger.addHandler(handler)

    logger.debug("logger initialized", extra={"extra": {"json": json_logs}})
    return logger
