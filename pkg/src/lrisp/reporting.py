"""Deterministic artifact emission: canonical JSON and atomic file writes.

Reports must be byte-identical across runs with the same configuration
and seed, so every serialization here is fully ordered: dict keys are
sorted, floats use Python's shortest round-trip repr, non-finite values
become null, and files land atomically (temp file + rename) so a failed
run never leaves a partial artifact.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

CSV_FLOAT_FMT = "%.17g"


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def canonical_json(doc: dict) -> str:
    """Stable JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_sanitize(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_csv(header, rows) -> str:
    """CSV text with '.' decimals, ',' separators and 17-significant-digit floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [CSV_FLOAT_FMT % v if isinstance(v, float) else str(v) for v in row]
        )
    return buf.getvalue()
