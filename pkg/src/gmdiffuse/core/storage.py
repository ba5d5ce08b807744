"""
Run-directory persistence for gmdiffuse.

Handles the on-disk formats shared by every subcommand:
- sample CSV files (header x0..x{n-1}, 17 significant digits)
- JSON documents (sorted keys, shortest round-trip floats)
- JSON-lines audit logs
- SHA-256 hashes and the per-run manifest
"""

import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from gmdiffuse.core.errors import ArtifactError


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# binary64 needs 17 significant digits for a lossless decimal round-trip
FLOAT_FORMAT = "%.17g"


def csv_header(n: int) -> str:
    """Header row for n-dimensional samples."""
    return ",".join(f"x{i}" for i in range(n))


def write_samples_csv(path: PathLike, samples: np.ndarray) -> Path:
    """
    Write samples as CSV, one row per point.

    Args:
        path: Destination file
        samples: (m, n) array; m may be 0

    Returns:
        Path: The written file
    """
    path = Path(path)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise ArtifactError(f"Samples must be a 2-D array, got shape {samples.shape}")

    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        samples,
        fmt=FLOAT_FORMAT,
        delimiter=",",
        header=csv_header(samples.shape[1]),
        comments="",
    )
    logger.debug(f"[OK] Wrote {samples.shape[0]} samples to {path}")
    return path


def read_samples_csv(path: PathLike) -> np.ndarray:
    """
    Read a sample CSV written by write_samples_csv.

    Raises:
        ArtifactError: If the file is missing or the header is malformed
    """
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"Sample file not found: {path}", path=str(path))

    lines = [line for line in path.read_text().splitlines() if line.strip()]
    if not lines:
        raise ArtifactError(f"Sample file is empty (no header): {path}", path=str(path))

    columns = [c.strip() for c in lines[0].split(",")]
    n = len(columns)
    if columns != [f"x{i}" for i in range(n)]:
        raise ArtifactError(
            f"Bad CSV header in {path}: expected x0..x{n - 1}, got {lines[0]!r}",
            path=str(path),
        )

    if len(lines) == 1:
        return np.empty((0, n))

    try:
        data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    except ValueError as e:
        raise ArtifactError(f"Malformed sample rows in {path}: {e}", path=str(path))

    if data.shape[1] != n:
        raise ArtifactError(
            f"Row width {data.shape[1]} does not match header width {n} in {path}",
            path=str(path),
        )
    return data


def write_table_csv(path: PathLike, columns: Sequence[str], rows, fmt: Sequence[str]) -> Path:
    """Write a small numeric table (e.g. degree, tail) with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    np.savetxt(path, data, fmt=list(fmt), delimiter=",", header=",".join(columns), comments="")
    return path


def _json_safe(value: Any) -> Any:
    """Replace non-finite floats with None so documents stay valid JSON."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def dumps_json(payload: Any) -> str:
    """Serialize with sorted keys and shortest round-trip floats."""
    return json.dumps(_json_safe(payload), sort_keys=True, indent=2, allow_nan=False)


def write_json(path: PathLike, payload: Any) -> Path:
    """Write one JSON document, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(payload) + "\n")
    return path


def read_json(path: PathLike) -> Any:
    """
    Read one JSON document.

    Raises:
        ArtifactError: If the file is missing or not valid JSON
    """
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"File not found: {path}", path=str(path))
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ArtifactError(f"Invalid JSON in {path}: {e}", path=str(path))


def write_jsonl(path: PathLike, records: Iterable[Mapping[str, Any]]) -> Path:
    """Write records as JSON lines (compact, sorted keys)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for record in records:
            f.write(json.dumps(_json_safe(dict(record)), sort_keys=True, allow_nan=False))
            f.write("\n")
    return path


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    """Read a JSON-lines file."""
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"File not found: {path}", path=str(path))
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def sha256_file(path: PathLike) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def hash_inputs(inputs: Mapping[str, Optional[PathLike]]) -> Dict[str, Any]:
    """
    Hash every input path; directories hash each file they contain.

    Returns:
        dict: name -> {"path": ..., "sha256": ...} or a per-file mapping for directories
    """
    hashes: Dict[str, Any] = {}
    for name, raw in inputs.items():
        if raw is None:
            continue
        path = Path(raw)
        if path.is_dir():
            hashes[name] = {
                "path": str(path),
                "files": {
                    str(p.relative_to(path)): sha256_file(p)
                    for p in sorted(path.rglob("*"))
                    if p.is_file()
                },
            }
        elif path.is_file():
            hashes[name] = {"path": str(path), "sha256": sha256_file(path)}
    return hashes


def write_manifest(
    out_dir: PathLike,
    command: str,
    inputs: Mapping[str, Optional[PathLike]],
    settings: Mapping[str, Any],
) -> Path:
    """
    Write manifest.json for a finished run.

    The manifest lists input hashes and the hash of every file already present
    in the output directory (excluding the manifest itself).
    """
    out_dir = Path(out_dir)
    outputs = {
        str(p.relative_to(out_dir)): sha256_file(p)
        for p in sorted(out_dir.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }
    manifest = {
        "command": command,
        "settings": dict(settings),
        "inputs": hash_inputs(inputs),
        "outputs": outputs,
    }
    return write_json(out_dir / "manifest.json", manifest)


# Export persistence helpers
__all__ = [
    "FLOAT_FORMAT",
    "csv_header",
    "write_samples_csv",
    "read_samples_csv",
    "write_table_csv",
    "dumps_json",
    "write_json",
    "read_json",
    "write_jsonl",
    "read_jsonl",
    "sha256_file",
    "hash_inputs",
    "write_manifest",
]
