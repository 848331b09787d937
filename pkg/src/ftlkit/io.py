"""File formats: atomic writes, VT databases, CSV tables."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def header_line(config_hash: Optional[str]) -> str:
    return f"# config {config_hash}\n" if config_hash else ""


def csv_text(header: Sequence[str], rows: Iterable[Sequence], config_hash: Optional[str] = None) -> str:
    buf = io.StringIO()
    buf.write(header_line(config_hash))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, config_hash=None) -> None:
    atomic_write(path, csv_text(header, rows, config_hash))


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, bool):
        return "1" if v else "0"
    return str(v)


def format_volts(values: Iterable[float]) -> str:
    return ",".join(f"{v:.3f}" for v in values)


def parse_volts(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))
