"""Line-oriented JSON helpers used by every file format in the toolkit."""

import json
import os
from collections.abc import Iterable, Iterator

from .errors import ParseError


def read_jsonl(path: str) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) for every non-blank line of a JSONL file.

    Line numbers are 1-based so they can be reported verbatim in errors.
    """
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", path=path, line=lineno) from exc
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", path=path, line=lineno)
            yield lineno, obj


def write_jsonl(path: str, rows: Iterable[dict]) -> None:
    """Write rows as one compact JSON object per line (atomic overwrite)."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, separators=(",", ":")) + "\n")
    os.replace(tmp, path)


def append_jsonl(path: str, row: dict, fsync: bool = False) -> None:
    """Append one row durably; with fsync=True the line is on disk on return."""
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(row, separators=(",", ":")) + "\n")
        f.flush()
        if fsync:
            os.fsync(f.fileno())
