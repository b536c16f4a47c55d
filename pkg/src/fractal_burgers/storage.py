"""Profiles on disk (CSV + JSON sidecar), JSON reports and run manifests.

Everything written here is deterministic: floats are printed with 17
significant digits, JSON keys are sorted, and wall-clock quantities live only
in the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .convolution import KernelTail
from .errors import ProfileFormatError
from .functionals import _jsonable
from .grid import Grid1D, Profile

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
_VOLATILE_META = ("seconds",)


def artifact_version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        from . import __version__

        return __version__


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ProfileFormatError(f"cannot read JSON {path}: {exc}") from None


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_digest(config: dict) -> str:
    """Stable hash of a JSON-able configuration."""
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _sidecar(path: Path) -> Path:
    return Path(path).with_suffix(".json")


def save_profile(profile: Profile, path: Path, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``x,u`` columns to ``path`` and grid, metadata and ``extra`` to the ``.json`` sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("x,u\n")
        for x, u in zip(profile.x, profile.values):
            fh.write(f"{x:.17g},{u:.17g}\n")
    meta = {k: v for k, v in profile.meta.items() if k not in _VOLATILE_META}
    side = {"schema_version": SCHEMA_VERSION, "grid": profile.grid.to_dict(), "meta": meta,
            "columns": {"x": "position at t = 1 (dimensionless)", "u": "profile value"},
            "tail": profile.tail.to_dict() if isinstance(profile.tail, KernelTail) else None,
            "manifest": MANIFEST_NAME, **(extra or {})}
    return path, write_json(_sidecar(path), side)


def _read_columns(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ProfileFormatError(f"cannot open profile {path}: {exc.strerror}") from None
    xs, us = [], []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["x", "u"]:
            raise ProfileFormatError(f"{path}, line 1: expected header 'x,u', found {header!r}")
        for row in reader:
            line = reader.line_num
            if len(row) != 2:
                raise ProfileFormatError(f"{path}, line {line}: expected 2 columns, found {len(row)}")
            try:
                x, u = float(row[0]), float(row[1])
            except ValueError:
                raise ProfileFormatError(f"{path}, line {line}: non-numeric entry {row!r}") from None
            if not (np.isfinite(x) and np.isfinite(u)):
                raise ProfileFormatError(f"{path}, line {line}: non-finite entry {row!r}")
            xs.append(x)
            us.append(u)
    return np.array(xs), np.array(us)


def load_profile(path: Path) -> tuple[Profile, dict]:
    """Read a profile written by :func:`save_profile`; returns the profile and its sidecar."""
    path = Path(path)
    x, u = _read_columns(path)
    side_path = _sidecar(path)
    side = read_json(side_path) if side_path.exists() else {}
    if "grid" in side:
        grid = Grid1D(float(side["grid"]["L"]), int(side["grid"]["n"]))
    else:
        n = x.size
        grid = Grid1D(-float(x[0]), n) if n >= 2 else None
    if grid is None or x.size != grid.n:
        raise ProfileFormatError(f"{path}: {x.size} rows do not match the declared grid")
    if np.max(np.abs(x - grid.x)) > 1e-9 * grid.L:
        bad = int(np.argmax(np.abs(x - grid.x)))
        raise ProfileFormatError(f"{path}, line {bad + 2}: x = {x[bad]!r} is off the uniform grid")
    tail = None
    if side.get("tail"):
        t = side["tail"]
        tail = KernelTail(float(t["alpha"]), [tuple(term) for term in t["terms"]])
    meta = side.get("meta", {})
    if tail is None and "alpha" in meta:
        from .solver import fit_tail

        tail = fit_tail(float(meta["alpha"]), grid, u, float(meta.get("t", 1.0)))
    return Profile(grid, u, dict(meta), tail), side


@dataclass
class RunManifest:
    """One per invocation: effective config, version, digests and timings."""

    command: str
    config: dict
    version: str = field(default_factory=artifact_version)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    stage_seconds: dict[str, float] = field(default_factory=dict)

    def add_input(self, path: Path) -> None:
        self.inputs[str(path)] = sha256(path)

    def add_output(self, path: Path, root: Path) -> None:
        self.outputs[os.path.relpath(path, root)] = sha256(path)

    def write(self, root: Path) -> Path:
        target = Path(root) / MANIFEST_NAME
        return write_json(target, {"schema_version": SCHEMA_VERSION, "command": self.command,
                                   "config": self.config, "config_digest": config_digest(self.config),
                                   "version": self.version, "timestamp": self.timestamp,
                                   "inputs": self.inputs, "outputs": self.outputs,
                                   "stage_seconds": self.stage_seconds})
