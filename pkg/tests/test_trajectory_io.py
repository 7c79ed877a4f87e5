import json

import numpy as np
import pytest

from mpmrom.errors import FormatError, ShapeError
from mpmrom.io import Trajectory, read_trajectory, write_trajectory


def make_traj(rng, S=4, P=7, d=2):
    return Trajectory(
        reference=rng.standard_normal((P, d)),
        positions=rng.standard_normal((S, P, d)),
        velocities=rng.standard_normal((S, P, d)),
        def_grads=rng.standard_normal((S, P, d, d)),
        dt=1.25e-3,
        mu=[3.5, -1.0],
        metadata={"scene": "test"},
    )


class TestRoundTrip:
    @pytest.mark.parametrize("d", [2, 3])
    def test_bit_exact(self, rng, tmp_path, d):
        traj = make_traj(rng, d=d)
        path = tmp_path / "t.mpmtraj"
        write_trajectory(path, traj)
        back = read_trajectory(path)
        assert np.array_equal(back.reference, traj.reference)
        assert np.array_equal(back.positions, traj.positions)
        assert np.array_equal(back.velocities, traj.velocities)
        assert np.array_equal(back.def_grads, traj.def_grads)
        assert back.dt == traj.dt
        assert back.mu == traj.mu
        assert back.metadata["scene"] == "test"

    def test_write_is_deterministic(self, rng, tmp_path):
        traj = make_traj(rng)
        p1, p2 = tmp_path / "a", tmp_path / "b"
        write_trajectory(p1, traj)
        write_trajectory(p2, traj)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_layout(self, rng, tmp_path):
        traj = make_traj(rng)
        path = tmp_path / "t.mpmtraj"
        write_trajectory(path, traj)
        blob = path.read_bytes()
        assert blob[:8] == b"MPMTRAJ1"
        (n,) = np.frombuffer(blob[8:16], dtype="<u8")
        meta = json.loads(blob[16 : 16 + int(n)].decode("utf-8"))
        assert meta["d"] == 2 and meta["P"] == 7 and meta["step_count"] == 4
        assert meta["fields"] == ["positions", "velocities", "def_gradients"]
        # payload begins right after the metadata with the reference block
        ref = np.frombuffer(blob[16 + int(n) : 16 + int(n) + 7 * 2 * 8], dtype="<f8")
        assert np.array_equal(ref.reshape(7, 2), traj.reference)


class TestErrors:
    def test_bad_magic(self, rng, tmp_path):
        path = tmp_path / "bad"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
        with pytest.raises(FormatError, match="magic"):
            read_trajectory(path)

    def test_truncated(self, rng, tmp_path):
        traj = make_traj(rng)
        path = tmp_path / "t"
        write_trajectory(path, traj)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 17])
        with pytest.raises(FormatError, match="truncated"):
            read_trajectory(path)

    def test_trailing_garbage(self, rng, tmp_path):
        traj = make_traj(rng)
        path = tmp_path / "t"
        write_trajectory(path, traj)
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(FormatError, match="trailing"):
            read_trajectory(path)

    def test_shape_mismatch_on_write(self, rng, tmp_path):
        traj = make_traj(rng)
        traj.velocities = traj.velocities[:, :3]
        with pytest.raises(ShapeError):
            write_trajectory(tmp_path / "t", traj)

    def test_bad_metadata_json(self, tmp_path):
        doc = b"not json"
        path = tmp_path / "bad"
        path.write_bytes(b"MPMTRAJ1" + np.uint64(len(doc)).tobytes() + doc)
        with pytest.raises(FormatError, match="JSON"):
            read_trajectory(path)
