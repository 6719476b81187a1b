"""Deterministic CSV / JSON emission and manifest hashing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__

HASH_PREFIX = "# manifest-sha256: "


def fmt(value) -> str:
    """12 significant digits in scientific notation; ints and strings verbatim."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    if value is None:
        return "nan"
    x = float(value) + 0.0  # no negative zero
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.11e}"


def _plain(obj):
    """JSON-safe copy: complex as [re, im], numpy scalars and arrays unwrapped."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(float(obj.real)), _plain(float(obj.imag))]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):  # enums
        return obj.value
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


@dataclass
class RunManifest:
    """Everything that determines a run's output bytes."""

    subcommand: str
    config: dict[str, Any]
    axes: dict[str, list] = field(default_factory=dict)
    options: dict[str, Any] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    version: str = __version__

    def as_dict(self) -> dict[str, Any]:
        return _plain(asdict(self))

    @property
    def digest(self) -> str:
        # output paths do not change the numbers, so they are not hashed
        doc = self.as_dict()
        doc.pop("outputs")
        return hashlib.sha256(canonical_json(doc).encode()).hexdigest()

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RunManifest":
        known = {"subcommand", "config", "axes", "options", "tolerances", "outputs", "seed",
                 "version"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown manifest keys: {sorted(extra)}")
        if "subcommand" not in doc or "config" not in doc:
            raise ValueError("manifest needs 'subcommand' and 'config'")
        return cls(**doc)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence], digest: str) -> None:
    lines = [HASH_PREFIX + digest, ",".join(columns)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_csv(path: Path) -> tuple[str | None, list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="ascii").splitlines()
    digest = None
    if text and text[0].startswith(HASH_PREFIX):
        digest = text[0][len(HASH_PREFIX):].strip()
        text = text[1:]
    header = text[0].split(",")
    return digest, header, [ln.split(",") for ln in text[1:] if ln]


def write_json(path: Path, payload: dict[str, Any], digest: str) -> None:
    doc = {"manifest_sha256": digest, **_plain(payload)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="ascii")


def embedded_digest(path: Path) -> str | None:
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text()).get("manifest_sha256")
    first = path.read_text(encoding="ascii").split("\n", 1)[0]
    return first[len(HASH_PREFIX):].strip() if first.startswith(HASH_PREFIX) else None
