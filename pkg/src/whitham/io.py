"""Field snapshots, checkpoints, CSV/JSON writers and run manifests.

Snapshot layout (little endian)::

    8 bytes   magic  b"WHSNAP01" (snapshot) or b"WHCKPT01" (checkpoint)
    4 bytes   uint32 header length H
    H bytes   UTF-8 JSON header: n, half_length, t, variant, eps, ...
    8 n bytes float64 samples
    16 n bytes complex128 coefficients     (checkpoints only)

Floats in the header are written with ``repr`` so they round-trip exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .evolve import IntegratorState, SolverConfig
from .spectral_core import Grid, SpectralField

SNAP_MAGIC = b"WHSNAP01"
CKPT_MAGIC = b"WHCKPT01"


class SnapshotFormatError(ValueError):
    pass


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_to_jsonable(obj), sort_keys=True, separators=(",", ":"))


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_to_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path, rows) -> Path:
    """Write rows (first row is the header); floats use ``repr``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])
    return path


def read_csv(path):
    with Path(path).open(newline="") as fh:
        return list(csv.reader(fh))


# ------------------------------------------------------------------ snapshots


def _pack(magic: bytes, header: dict, *arrays) -> bytes:
    h = json.dumps(header, sort_keys=True).encode()
    parts = [magic, struct.pack("<I", len(h)), h]
    parts += [np.ascontiguousarray(a).astype(a.dtype.newbyteorder("<")).tobytes()
              for a in arrays]
    return b"".join(parts)


def _unpack(blob: bytes):
    if len(blob) < 12:
        raise SnapshotFormatError("file too short")
    magic = blob[:8]
    if magic not in (SNAP_MAGIC, CKPT_MAGIC):
        raise SnapshotFormatError(f"bad magic {magic!r}")
    (hlen,) = struct.unpack("<I", blob[8:12])
    header = json.loads(blob[12:12 + hlen].decode())
    n = int(header["n"])
    off = 12 + hlen
    need = 8 * n + (16 * n if magic == CKPT_MAGIC else 0)
    if len(blob) - off != need:
        raise SnapshotFormatError(f"payload is {len(blob) - off} bytes, expected {need}")
    samples = np.frombuffer(blob, dtype="<f8", count=n, offset=off).astype(float)
    coeffs = None
    if magic == CKPT_MAGIC:
        coeffs = np.frombuffer(blob, dtype="<c16", count=n, offset=off + 8 * n).astype(complex)
    return magic, header, samples, coeffs


def save_field(path, f: SpectralField, t: float = 0.0, variant: str = "modified",
               eps: float = 0.0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"n": f.grid.n_points, "half_length": f.grid.half_length, "t": float(t),
              "variant": variant, "eps": float(eps)}
    path.write_bytes(_pack(SNAP_MAGIC, header, np.asarray(f.samples, dtype=float)))
    return path


def read_snapshot(path):
    """Return (header, SpectralField) for a snapshot or checkpoint file."""
    _, header, samples, _ = _unpack(Path(path).read_bytes())
    grid = Grid(int(header["n"]), float(header["half_length"]))
    return header, SpectralField(grid, samples=samples)


def load_field(path) -> SpectralField:
    return read_snapshot(path)[1]


def save_checkpoint(path, cfg: SolverConfig, state: IntegratorState) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid
    header = {"n": grid.n_points, "half_length": grid.half_length, "t": state.t,
              "variant": cfg.variant, "eps": cfg.eps, "step": state.step, "dt": state.dt,
              "dissipation_n": state.dissipation_n,
              "dissipation_eps": state.dissipation_eps, "config": cfg.to_dict()}
    samples = SpectralField(grid, coeffs=state.coeffs).samples
    path.write_bytes(_pack(CKPT_MAGIC, header, samples, np.asarray(state.coeffs, complex)))
    return path


def load_checkpoint(path):
    """Return (SolverConfig, IntegratorState)."""
    magic, h, _, coeffs = _unpack(Path(path).read_bytes())
    if magic != CKPT_MAGIC:
        raise SnapshotFormatError(f"{path} is a snapshot, not a checkpoint")
    cfg = SolverConfig.from_dict(h["config"])
    state = IntegratorState(coeffs.copy(), float(h["t"]), int(h["step"]), float(h["dt"]),
                            float(h["dissipation_n"]), float(h["dissipation_eps"]))
    return cfg, state


# ------------------------------------------------------------------ manifests


def data_digest(cfg: SolverConfig) -> str:
    """Hash of the initial data: the file content for ``file`` profiles,
    otherwise the descriptor itself."""
    if cfg.initial.profile == "file":
        return hashlib.sha256(Path(cfg.initial.path).read_bytes()).hexdigest()
    return hashlib.sha256(canonical_json(cfg.initial.descriptor()).encode()).hexdigest()


def run_id(cfg: SolverConfig, extra: Optional[dict] = None) -> str:
    """Content hash of config and initial data; ``extra`` marks data that
    was modified before the run (e.g. mollified)."""
    body = {"config": cfg.to_dict(), "data": data_digest(cfg)}
    if extra:
        body["extra"] = extra
    payload = canonical_json(body)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


class ManifestStateError(RuntimeError):
    pass


@dataclass
class RunManifest:
    run_id: str
    config: dict
    directory: str
    paths: Dict[str, object] = field(default_factory=dict)
    status: str = "pending"
    message: str = ""
    finalized: bool = False

    @classmethod
    def create(cls, cfg: SolverConfig, out_dir, extra: Optional[dict] = None
               ) -> "RunManifest":
        rid = run_id(cfg, extra)
        d = Path(out_dir) / f"run_{rid}"
        d.mkdir(parents=True, exist_ok=True)
        m = cls(rid, cfg.to_dict(), str(d))
        m.status = "running"
        m.write()
        return m

    @property
    def path(self) -> Path:
        return Path(self.directory) / "manifest.json"

    def to_dict(self) -> dict:
        return {"run_id": self.run_id, "config": self.config, "paths": self.paths,
                "status": self.status, "message": self.message, "finalized": self.finalized}

    def write(self) -> Path:
        return write_json(self.path, self.to_dict())

    def finalize(self, status: str, message: str = "", **paths) -> Path:
        if self.finalized:
            raise ManifestStateError(f"manifest {self.run_id} already finalized")
        self.status, self.message, self.finalized = status, message, True
        self.paths.update(paths)
        return self.write()

    @classmethod
    def load(cls, path) -> "RunManifest":
        d = json.loads(Path(path).read_text())
        directory = str(Path(path).parent)
        return cls(d["run_id"], d["config"], directory, d["paths"], d["status"],
                   d.get("message", ""), d["finalized"])


def output_dir(cli_value: Optional[str] = None, default: str = "whitham_out") -> Path:
    """--out wins; otherwise WHITHAM_OUT; otherwise ``default``."""
    if cli_value:
        return Path(cli_value)
    return Path(os.environ.get("WHITHAM_OUT") or default)
