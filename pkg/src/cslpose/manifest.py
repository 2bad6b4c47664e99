"""Run manifests: flat key/value records written atomically before results.

A manifest snapshots everything a run depends on (command, config, seeds,
library version, output paths), so re-running it reproduces the outputs
byte-for-byte.  Format: one `key: value` line per entry, keys sorted.
"""

from __future__ import annotations

import os
import tempfile

from . import __version__


def format_manifest(entries: dict) -> str:
    lines = [f"{k}: {entries[k]}" for k in sorted(entries)]
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> dict:
    entries = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ValueError(f"malformed manifest line: {line!r}")
        key, value = line.split(":", 1)
        entries[key.strip()] = value.strip()
    return entries


def write_manifest(path, command: str, config: dict, outputs: dict) -> dict:
    """Atomically write a manifest file (temp file + rename)."""
    entries = {"command": command, "version": __version__}
    entries.update({f"config.{k}": v for k, v in config.items()})
    entries.update({f"output.{k}": v for k, v in outputs.items()})
    text = format_manifest(entries)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".manifest-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return entries


def load_manifest(path) -> dict:
    with open(path) as f:
        return parse_manifest(f.read())
