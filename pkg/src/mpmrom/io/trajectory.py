"""Binary trajectory container (format tag MPMTRAJ1).

Layout:
  8 bytes   magic b"MPMTRAJ1"
  8 bytes   little-endian uint64: byte length of the metadata document
  N bytes   UTF-8 JSON metadata: version, d, P, step_count, dt, mu
            (scenario parameter list), fields
  then      reference positions, P x d float64, little-endian, row-major
  then      step_count blocks of [positions (P x d), velocities (P x d),
            deformation gradients (P x d x d)], same dtype and order

step_count counts the stored states including the initial one, so a run of
30 solver steps stores 31 blocks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import FormatError, ShapeError

MAGIC = b"MPMTRAJ1"
FIELDS = ["positions", "velocities", "def_gradients"]


@dataclass
class Trajectory:
    """In-memory trajectory: arrays indexed [snapshot, particle, ...]."""

    reference: np.ndarray  # (P, d)
    positions: np.ndarray  # (S, P, d)
    velocities: np.ndarray  # (S, P, d)
    def_grads: np.ndarray  # (S, P, d, d)
    dt: float
    mu: list[float] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def snapshot_count(self) -> int:
        return int(self.positions.shape[0])

    @property
    def particle_count(self) -> int:
        return int(self.reference.shape[0])

    @property
    def dim(self) -> int:
        return int(self.reference.shape[1])

    def validate(self) -> None:
        P, d = self.reference.shape
        S = self.positions.shape[0]
        if self.positions.shape != (S, P, d):
            raise ShapeError(f"positions shape {self.positions.shape} != {(S, P, d)}")
        if self.velocities.shape != (S, P, d):
            raise ShapeError(f"velocities shape {self.velocities.shape} != {(S, P, d)}")
        if self.def_grads.shape != (S, P, d, d):
            raise ShapeError(f"def_grads shape {self.def_grads.shape} != {(S, P, d, d)}")


def write_trajectory(path, traj: Trajectory) -> None:
    traj.validate()
    P, d = traj.reference.shape
    meta = {
        "version": 1,
        "d": d,
        "P": P,
        "step_count": traj.snapshot_count,
        "dt": traj.dt,
        "mu": [float(v) for v in traj.mu],
        "fields": FIELDS,
    }
    meta.update({k: v for k, v in traj.metadata.items() if k not in meta})
    doc = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint64(len(doc)).tobytes())
        f.write(doc)
        f.write(np.ascontiguousarray(traj.reference, dtype="<f8").tobytes())
        for s in range(traj.snapshot_count):
            f.write(np.ascontiguousarray(traj.positions[s], dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(traj.velocities[s], dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(traj.def_grads[s], dtype="<f8").tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated trajectory file while reading {what}")
    return buf


def read_trajectory(path) -> Trajectory:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        (doc_len,) = np.frombuffer(_read_exact(f, 8, "metadata length"), dtype="<u8")
        try:
            meta = json.loads(_read_exact(f, int(doc_len), "metadata").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FormatError(f"metadata is not valid UTF-8 JSON: {e}") from e
        for key in ("version", "d", "P", "step_count", "dt"):
            if key not in meta:
                raise FormatError(f"metadata missing required key {key!r}")
        if meta["version"] != 1:
            raise FormatError(f"unsupported version {meta['version']}")
        d, P, S = int(meta["d"]), int(meta["P"]), int(meta["step_count"])
        if d not in (2, 3) or P < 1 or S < 1:
            raise FormatError(f"implausible dimensions d={d} P={P} step_count={S}")

        def read_array(shape, what):
            n = int(np.prod(shape))
            buf = _read_exact(f, n * 8, what)
            return np.frombuffer(buf, dtype="<f8").reshape(shape).copy()

        reference = read_array((P, d), "reference positions")
        positions = np.empty((S, P, d))
        velocities = np.empty((S, P, d))
        def_grads = np.empty((S, P, d, d))
        for s in range(S):
            positions[s] = read_array((P, d), f"positions[{s}]")
            velocities[s] = read_array((P, d), f"velocities[{s}]")
            def_grads[s] = read_array((P, d, d), f"def_grads[{s}]")
        if f.read(1):
            raise FormatError("trailing bytes after last snapshot")
    extra = {k: v for k, v in meta.items() if k not in ("version", "d", "P", "step_count", "dt", "mu", "fields")}
    return Trajectory(
        reference=reference,
        positions=positions,
        velocities=velocities,
        def_grads=def_grads,
        dt=float(meta["dt"]),
        mu=[float(v) for v in meta.get("mu", [])],
        metadata=extra,
    )
