"""Trace persistence.

One JSON object per line, one line per step, with the run summary appended
as the final line.  Serialization is canonical (sorted keys, compact
separators, no floats anywhere in the schema) so identical runs produce
byte-identical files regardless of transport.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional, Sequence


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def render_trace(events: Sequence[dict], summary: dict) -> str:
    lines = [canonical_dumps(ev) for ev in events]
    lines.append(canonical_dumps({"summary": summary}))
    return "\n".join(lines) + "\n"


def write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_trace(path: Path, events: Sequence[dict], summary: dict) -> None:
    write_atomic(path, render_trace(events, summary))


def write_summary(path: Path, summary: dict) -> None:
    write_atomic(path, canonical_dumps(summary) + "\n")


def read_trace(path: Path) -> tuple[list[dict], Optional[dict]]:
    events: list[dict] = []
    summary: Optional[dict] = None
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if "summary" in obj and "step" not in obj:
            summary = obj["summary"]
        else:
            events.append(obj)
    return events, summary
