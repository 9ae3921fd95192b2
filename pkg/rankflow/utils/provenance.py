"""
RANKFLOW Provenance Module - Track inputs, parameters, streams and outputs.

Manifests carry no run ids or timestamps, so re-running a command with the same
configuration and seed reproduces every output byte for byte.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import scipy

from rankflow import __version__
from rankflow.utils.rng import GENERATOR_NAME


def file_checksum(path: Path) -> str:
    """Compute SHA256 checksum."""
    sha256 = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            sha256.update(chunk)
    return sha256.hexdigest()


@dataclass
class RunManifest:
    """Provenance of one CLI command."""

    command: str
    seed: Optional[int] = None
    model_hash: str = ""
    rate_bound: Optional[float] = None
    generator: str = GENERATOR_NAME

    inputs: dict[str, Any] = field(default_factory=dict)
    parameters: dict[str, Any] = field(default_factory=dict)
    streams: dict[str, Any] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    software: dict[str, str] = field(
        default_factory=lambda: {
            "rankflow": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        }
    )

    def add_input_file(self, path: Path, category: str = "input"):
        """Record an input file with checksum."""
        self.inputs.setdefault("files", []).append({
            "path": path.name,
            "sha256": file_checksum(path) if path.exists() else "",
            "category": category,
        })

    def add_output_file(self, path: Path, name: Optional[str] = None):
        """Record output file with checksum."""
        if path.exists():
            self.outputs[name or path.name] = file_checksum(path)

    def to_dict(self) -> dict[str, Any]:
        """Export manifest as dictionary."""
        return {
            "command": self.command,
            "seed": self.seed,
            "model_hash": self.model_hash,
            "rate_bound": self.rate_bound,
            "generator": self.generator,
            "inputs": self.inputs,
            "parameters": self.parameters,
            "streams": self.streams,
            "diagnostics": self.diagnostics,
            "outputs": dict(sorted(self.outputs.items())),
            "software": self.software,
        }

    def save(self, path: Path):
        """Save manifest to JSON file."""
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        """Load manifest from JSON file."""
        with open(path) as f:
            data = json.load(f)
        return cls(
            command=data["command"],
            seed=data.get("seed"),
            model_hash=data.get("model_hash", ""),
            rate_bound=data.get("rate_bound"),
            generator=data.get("generator", GENERATOR_NAME),
            inputs=data.get("inputs", {}),
            parameters=data.get("parameters", {}),
            streams=data.get("streams", {}),
            diagnostics=data.get("diagnostics", {}),
            outputs=data.get("outputs", {}),
            software=data.get("software", {}),
        )


def generate_checksums_file(output_dir: Path) -> Path:
    """Generate checksums.txt for all output files."""
    checksums_path = output_dir / "checksums.txt"
    lines = [
        f"{file_checksum(path)}  {path.relative_to(output_dir).as_posix()}\n"
        for path in sorted(output_dir.rglob("*"))
        if path.is_file() and path != checksums_path
    ]
    checksums_path.write_text("".join(lines))
    return checksums_path


def verify_checksums(output_dir: Path) -> tuple[bool, list[str]]:
    """Verify checksums.txt against actual files."""
    checksums_path = output_dir / "checksums.txt"
    if not checksums_path.exists():
        return False, ["checksums.txt not found"]

    errors = []
    for line in checksums_path.read_text().splitlines():
        parts = line.strip().split("  ", 1)
        if len(parts) != 2:
            continue
        expected, rel_path = parts
        path = output_dir / rel_path
        if not path.exists():
            errors.append(f"Missing: {rel_path}")
        elif file_checksum(path) != expected:
            errors.append(f"Mismatch: {rel_path}")
    return len(errors) == 0, errors
