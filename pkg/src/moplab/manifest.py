"""Run manifests and deterministic tabular output.

Every artifact directory gets a manifest recording the fully resolved
config, seeds, input/output hashes, and wallclock: enough to reproduce the
outputs byte for byte (wallclock aside) by re-running the same subcommand.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

from . import __version__

__all__ = [
    "sha256_file", "sha256_json", "write_json", "write_manifest",
    "write_csv", "read_csv",
]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_json(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def write_manifest(out_dir, command, config, base_seed, *, dataset_hash=None,
                   checkpoint_hashes=None, wallclock_s=None, outputs=None,
                   extra=None) -> Path:
    manifest = {
        "tool": "moplab",
        "version": __version__,
        "command": command,
        "config": config,
        "base_seed": base_seed,
        "dataset_hash": dataset_hash,
        "checkpoint_hashes": checkpoint_hashes or {},
        "wallclock_s": wallclock_s,
        "outputs": outputs or [],
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "manifest.json"
    write_json(path, manifest)
    return path


def write_csv(path, rows, fieldnames) -> None:
    """Deterministic CSV: fixed column order, newline terminators, floats via
    repr (shortest round-trip form)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def read_csv(path) -> list[dict]:
    """Read a CSV, reporting the offending line number on malformed input."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: line 1: empty file") from None
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ValueError(
                    f"{path}: line {lineno}: expected {len(header)} fields, "
                    f"got {len(rec)}")
            rows.append(dict(zip(header, rec)))
    return rows
