"""Run manifests: enough provenance to reproduce any command's outputs.

A manifest records the resolved configuration (all defaults materialized),
sha256 hashes of the inputs, and the produced paths.  No timestamps, so a
re-run with identical inputs writes an identical manifest.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

from .errors import IoError

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    config: dict
    input_hashes: dict
    outputs: list
    seed: int
    version: str
    notes: dict = field(default_factory=dict)


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_input(path):
    """Hash a file, or a directory as the hash of its sorted (name, hash)
    listing."""
    if os.path.isdir(path):
        h = hashlib.sha256()
        for name in sorted(os.listdir(path)):
            sub = os.path.join(path, name)
            if os.path.isfile(sub):
                h.update(name.encode())
                h.update(file_sha256(sub).encode())
        return h.hexdigest()
    return file_sha256(path)


def manifest_to_json(manifest: RunManifest) -> str:
    return json.dumps(asdict(manifest), sort_keys=True,
                      separators=(",", ":")) + "\n"


def write_manifest(manifest: RunManifest, path):
    try:
        with open(path, "w") as fh:
            fh.write(manifest_to_json(manifest))
    except OSError as exc:
        raise IoError(f"cannot write manifest: {exc}") from exc
    return path
