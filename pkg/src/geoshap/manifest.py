"""Run manifests: seeds, input hashes, resolved config, reproducible run ids.

run_id is a content hash of (input hashes, resolved config, seeds, versions);
timestamps live only in the manifest so identical inputs give identical
output bytes everywhere else.
"""

import hashlib
import json
import time
from dataclasses import dataclass, field


def derive_seed(seed, label):
    """Labeled sub-seed: stable hash of the master seed and a purpose label."""
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    created_at: str
    command: str
    inputs: dict      # path -> sha256
    seed: int
    config: dict
    versions: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps({
            "run_id": self.run_id,
            "created_at": self.created_at,
            "command": self.command,
            "inputs": self.inputs,
            "seed": self.seed,
            "config": self.config,
            "versions": self.versions,
        }, indent=2, allow_nan=False)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")


def build_manifest(command, input_paths, seed, config):
    from . import __version__

    inputs = {str(p): file_sha256(p) for p in input_paths}
    versions = {"geoshap": __version__}
    run_id = hashlib.sha256(_canonical({
        "command": command,
        "inputs": inputs,
        "seed": seed,
        "config": config,
        "versions": versions,
    }).encode("utf-8")).hexdigest()[:12]
    return RunManifest(
        run_id=run_id,
        created_at=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        command=command,
        inputs=inputs,
        seed=seed,
        config=config,
        versions=versions,
    )
