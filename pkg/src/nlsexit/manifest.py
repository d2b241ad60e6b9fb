"""Run manifests and deterministic tabular output."""

import hashlib
import json
import math
from pathlib import Path

from . import __version__

__all__ = ["fmt", "write_csv", "sha256_file", "RunManifest"]


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a float64."""
    if x is None:
        return ""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dump_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return Path(path)


class RunManifest:
    def __init__(self, command: str, params: dict, out_dir):
        self.command = command
        self.params = params
        self.out_dir = Path(out_dir)
        self.files: list[Path] = []
        self.certificates: dict = {}
        self.timings: dict = {}
        self.status = "ok"
        self.abort_reason = None
        self.diagnostic_snapshot = None

    def add(self, path):
        self.files.append(Path(path))
        return Path(path)

    def abort(self, reason: str, snapshot=None):
        self.status = "aborted"
        self.abort_reason = reason
        if snapshot is not None:
            self.diagnostic_snapshot = str(Path(snapshot).name)
            self.add(snapshot)

    def to_dict(self):
        return {
            "version": __version__,
            "command": self.command,
            "params": self.params,
            "certificates": self.certificates,
            "files": {str(f.relative_to(self.out_dir)) if f.is_relative_to(self.out_dir) else str(f): sha256_file(f) for f in self.files},
            "timings": self.timings,
            "status": self.status,
            "abort_reason": self.abort_reason,
            "diagnostic_snapshot": self.diagnostic_snapshot,
        }

    def write(self, name="manifest.json"):
        return dump_json(self.out_dir / name, self.to_dict())
