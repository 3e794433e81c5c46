"""Run manifests: what was run, on what inputs, producing which bytes.

The data outputs of every command are byte-deterministic given the
config, so the manifest records a sha256 for each of them. Wall-clock
time is recorded for operational use but is the one field exempt from
the byte-identity contract; comparisons should ignore it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_path: str = ""
    config_sha256: str = ""
    seeds: dict = field(default_factory=dict)
    version: str = ""
    outputs: dict = field(default_factory=dict)
    wall_clock_s: float | None = None

    def add_output(self, name, path):
        self.outputs[name] = sha256_file(path)

    def to_json(self):
        payload = {
            "command": self.command,
            "config_path": self.config_path,
            "config_sha256": self.config_sha256,
            "seeds": self.seeds,
            "version": self.version,
            "outputs": self.outputs,
            "wall_clock_s": self.wall_clock_s,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())


def load_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def manifests_equivalent(a, b):
    """Byte-identity comparison modulo the wall-clock field."""
    da = dict(a)
    db = dict(b)
    da.pop("wall_clock_s", None)
    db.pop("wall_clock_s", None)
    return da == db
