"""Scenario generation, metrics, resolution transfer, and CLI behavior."""

import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpmrom.errors import ConfigError, ShapeError
from mpmrom.experiments import (
    ErrorReport,
    accumulated_error,
    advect_tracers,
    bench_beam_spec,
    build_instance,
    generate_scenario,
    gravity_spec,
    load_manifest,
    manifest_files,
    position_error,
    refine_spec,
    run_instance,
    sample_parameters,
    spec_by_name,
    spec_from_dict,
    spec_to_dict,
    torsion_tension_spec,
)
from mpmrom.experiments import cli, scenarios
from mpmrom.experiments.driver import dataset_from_manifest
from mpmrom.experiments.superres import _check_extrapolation
from mpmrom.io import read_trajectory
from mpmrom.manifold.checkpoint import ModelBundle
from mpmrom.manifold.decoder import ScalingSpec, default_decoder
from mpmrom.training.dataset import build_dataset
from mpmrom.training.fit import TrainConfig, fit


@pytest.fixture(scope="session")
def small_gravity(tmp_path_factory):
    """Four-instance gravity dataset shared across the module."""
    out = tmp_path_factory.mktemp("grav")
    spec = gravity_spec(instances=4, steps=3)
    manifest_path = generate_scenario(spec, seed=7, out_dir=out)
    return spec, manifest_path


@pytest.fixture(scope="session")
def quick_bundle(small_gravity):
    """Barely trained model; enough to exercise plumbing, not accuracy."""
    _, manifest_path = small_gravity
    _, dataset = dataset_from_manifest(manifest_path)
    bundle, _ = fit(dataset, TrainConfig(latent_dim=2, steps=10, seed=0))
    return bundle


class TestMetrics:
    def test_identical_trajectories_give_zero(self):
        rng = np.random.default_rng(0)
        arr = rng.normal(size=(5, 40, 2))
        assert accumulated_error(arr, arr.copy()) == 0.0
        report = position_error([arr], [arr.copy()])
        assert report.aggregate == 0.0
        assert report.per_instance[0][1] == 0.0

    def test_doubled_positions_give_exactly_one(self):
        # ||2 phi - phi|| / ||phi|| = 1 identically
        rng = np.random.default_rng(1)
        arrs = [rng.normal(size=(4, 30, 2)) for _ in range(3)]
        report = position_error(arrs, [2.0 * a for a in arrs])
        assert report.aggregate == pytest.approx(1.0, abs=1e-13)
        for _, err in report.per_instance:
            assert err == pytest.approx(1.0, abs=1e-13)

    def test_shape_mismatch_rejected(self):
        a = np.zeros((3, 10, 2))
        b = np.zeros((3, 11, 2))
        with pytest.raises(ShapeError):
            position_error([a], [b])
        with pytest.raises(ShapeError):
            position_error([a, a], [a])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 6), st.randoms(use_true_random=False))
    def test_instance_order_invariance(self, n, pyrandom):
        rng = np.random.default_rng(pyrandom.randint(0, 2**31))
        truths = [rng.normal(size=(3, 8, 2)) for _ in range(n)]
        approxs = [t + 0.01 * rng.normal(size=t.shape) for t in truths]
        base = position_error(truths, approxs)
        perm = list(range(n))
        pyrandom.shuffle(perm)
        shuffled = position_error([truths[i] for i in perm], [approxs[i] for i in perm])
        assert shuffled.aggregate == pytest.approx(base.aggregate, rel=1e-12)
        assert sorted(e for _, e in shuffled.per_instance) == pytest.approx(
            sorted(e for _, e in base.per_instance), rel=1e-12
        )

    def test_report_csv_roundtrip(self, tmp_path):
        report = ErrorReport(per_instance=[((1.5,), 0.25), ((2.5,), 0.5)], aggregate=0.4)
        path = tmp_path / "err.csv"
        report.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "mu,relative_error"
        assert lines[-1].startswith("aggregate")


class TestSpecs:
    def test_spec_dict_roundtrip(self):
        for name in ("gravity", "torsion_tension", "poke_recover", "bench_beam"):
            spec = spec_by_name(name)
            clone = spec_from_dict(spec_to_dict(spec))
            assert clone == spec

    def test_unknown_scenario_rejected(self):
        with pytest.raises(ConfigError):
            spec_by_name("waterfall")

    def test_solver_step_must_satisfy_stability_bound(self):
        spec = gravity_spec()
        with pytest.raises(ConfigError, match="stability"):
            scenarios.ScenarioSpec(
                name=spec.name,
                dim=spec.dim,
                dx=spec.dx,
                node_counts=spec.node_counts,
                ppc=spec.ppc,
                dt=spec.dt,
                substeps=1,  # 8e-3 is far above the limit at this stiffness
                steps=spec.steps,
                instances=spec.instances,
                material=spec.material,
            )

    def test_torsion_needs_square_instance_count(self):
        spec = torsion_tension_spec(instances=8)
        with pytest.raises(ConfigError, match="square"):
            sample_parameters(spec, seed=0)

    def test_split_sizes_and_labels(self):
        spec = gravity_spec(instances=10)
        mus, splits = sample_parameters(spec, seed=3)
        assert len(mus) == len(splits) == 10
        assert splits.count("test") == 2  # round(10 * 0.2)
        assert set(splits) == {"train", "test"}

    def test_parameter_plan_is_seed_deterministic(self):
        spec = gravity_spec(instances=6)
        assert sample_parameters(spec, seed=5) == sample_parameters(spec, seed=5)
        assert sample_parameters(spec, seed=5) != sample_parameters(spec, seed=6)


class TestRefinement:
    def test_geometry_is_resolution_independent(self):
        spec = torsion_tension_spec()
        fine = refine_spec(spec, 2)
        coarse_scene = build_instance(spec, (0.2, 2.0))
        fine_scene = build_instance(fine, (0.2, 2.0))
        assert np.allclose(coarse_scene.shape.lo, fine_scene.shape.lo)
        assert np.allclose(coarse_scene.shape.hi, fine_scene.shape.hi)
        # 2x per dimension in 3-D
        assert fine_scene.points.count == 8 * coarse_scene.points.count

    def test_refine_preserves_snapshot_times(self):
        spec = bench_beam_spec()
        fine = refine_spec(spec, 4)
        assert fine.dt == spec.dt
        assert fine.steps == spec.steps
        assert fine.solver_dt == pytest.approx(spec.solver_dt / 4)

    def test_refine_factor_one_changes_nothing_physical(self):
        spec = gravity_spec(instances=2, steps=2)
        same = refine_spec(spec, 1)
        a = build_instance(spec, (5.0,))
        b = build_instance(same, (5.0,))
        assert np.array_equal(a.points.reference, b.points.reference)


class TestGeneration:
    def test_same_seed_regenerates_identical_bytes(self, tmp_path):
        spec = gravity_spec(instances=3, steps=2)
        dir_a = tmp_path / "a"
        dir_b = tmp_path / "b"
        path_a = generate_scenario(spec, seed=11, out_dir=dir_a)
        path_b = generate_scenario(spec, seed=11, out_dir=dir_b)
        assert path_a.read_bytes() == path_b.read_bytes()
        files_a = sorted(p.name for p in dir_a.glob("*.mpmtraj"))
        files_b = sorted(p.name for p in dir_b.glob("*.mpmtraj"))
        assert files_a == files_b and files_a
        for name in files_a:
            assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes()

    def test_failed_instance_marked_not_fatal(self, tmp_path, monkeypatch):
        from mpmrom.errors import InvertedElementError

        spec = gravity_spec(instances=3, steps=2)
        real = scenarios.run_instance
        calls = {"n": 0}

        def sometimes_blows_up(spec_, scene):
            calls["n"] += 1
            if calls["n"] == 2:
                raise InvertedElementError("inverted element: min det(F) = 0.0e+00")
            return real(spec_, scene)

        monkeypatch.setattr(scenarios, "run_instance", sometimes_blows_up)
        manifest_path = generate_scenario(spec, seed=1, out_dir=tmp_path)
        doc = load_manifest(manifest_path)
        statuses = [r["status"] for r in doc["instances"]]
        assert statuses == ["ok", "failed", "ok"]
        failed = doc["instances"][1]
        assert failed["file"] is None
        assert failed["error"] == "InvertedElementError"
        assert len(manifest_files(doc, tmp_path)) == 2

    def test_split_metadata_travels_with_files(self, small_gravity):
        _, manifest_path = small_gravity
        doc = load_manifest(manifest_path)
        for record in doc["instances"]:
            traj = read_trajectory(manifest_path.parent / record["file"])
            assert traj.metadata["split"] == record["split"]
            assert tuple(traj.mu) == tuple(record["mu"])

    def test_dataset_order_independent_of_path_order(self, small_gravity):
        _, manifest_path = small_gravity
        doc = load_manifest(manifest_path)
        paths = manifest_files(doc, manifest_path.parent)
        forward = build_dataset(paths)
        backward = build_dataset(list(reversed(paths)))
        assert [i.mu for i in forward.instances] == [i.mu for i in backward.instances]
        assert [i.split for i in forward.instances] == [i.split for i in backward.instances]


class TestTracerBaseline:
    def test_self_advection_reproduces_full_order_run(self):
        # tracers seeded at the real points and carried by the same grid
        # velocities move exactly like the real points
        spec = gravity_spec(instances=1, steps=3)
        mus, _ = sample_parameters(spec, seed=2)
        scene = build_instance(spec, mus[0])
        truth = run_instance(spec, scene)
        tracer = advect_tracers(spec, mus[0], truth.reference.copy())
        assert np.allclose(tracer, truth.positions, atol=1e-13)

    def test_extrapolation_warning_outside_trained_range(self):
        rng = np.random.default_rng(0)
        scaling = ScalingSpec(
            np.array([0.25, 0.25]), np.array([0.75, 0.75]), np.zeros(2), np.ones(2)
        )
        dec = default_decoder(2, 2, rng, scaling)
        bundle = ModelBundle(
            decoder=dec, encoder=None, corrections=None,
            particle_count=0, lambda_f=0.0, lambda_v=0.0, metadata={},
        )
        inside = np.array([[0.5, 0.5], [0.3, 0.7]])
        _check_extrapolation(bundle, inside)  # silent
        outside = np.array([[0.5, 0.5], [0.2, 0.5]])
        with pytest.warns(UserWarning, match="extrapolat"):
            _check_extrapolation(bundle, outside)


class TestCli:
    def run_cli(self, *argv):
        return cli.main([str(a) for a in argv])

    def test_gen_train_rom_error_chain(self, tmp_path, small_gravity, quick_bundle):
        _, manifest_path = small_gravity
        from mpmrom.manifold.checkpoint import save_model

        model = tmp_path / "model.json"
        save_model(model, quick_bundle)

        scene_cfg = tmp_path / "scene.json"
        scene_cfg.write_text(json.dumps({
            "scenario": "gravity",
            "overrides": {"instances": 4, "steps": 3},
            "mu": [5.0],
        }))

        fom_out = tmp_path / "fom.mpmtraj"
        assert self.run_cli("fom", scene_cfg, "--out", fom_out) == 0
        assert fom_out.exists()

        rom_out = tmp_path / "rom.mpmtraj"
        diag_out = tmp_path / "diag.csv"
        code = self.run_cli(
            "rom", scene_cfg, "--model", model, "--out", rom_out,
            "--samples", 50, "--diagnostics", diag_out,
        )
        assert code == 0
        rom_traj = read_trajectory(rom_out)
        fom_traj = read_trajectory(fom_out)
        assert rom_traj.positions.shape == fom_traj.positions.shape
        assert diag_out.exists()

        err_csv = tmp_path / "err.csv"
        assert self.run_cli("error", fom_out, rom_out, "--out", err_csv) == 0
        assert err_csv.exists()

    def test_error_between_manifests(self, tmp_path, small_gravity):
        _, manifest_path = small_gravity
        assert self.run_cli(
            "error", manifest_path, manifest_path, "--split", "all",
            "--out", tmp_path / "zero.csv",
        ) == 0
        rows = (tmp_path / "zero.csv").read_text().strip().splitlines()
        assert rows[-1].split(",")[0] == "aggregate"
        assert float(rows[-1].split(",")[1]) == 0.0

    def test_bad_scene_config_exits_with_config_category(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"scenario": "gravity", "overrides": {"nope": 1}}))
        code = self.run_cli("fom", cfg, "--out", tmp_path / "x.mpmtraj")
        assert code == cli.EXIT_CODES["config"]
        err = json.loads(capsys.readouterr().err.strip())
        assert err["category"] == "config"

    def test_malformed_model_exits_with_format_category(self, tmp_path, capsys):
        cfg = tmp_path / "scene.json"
        cfg.write_text(json.dumps({"scenario": "gravity", "overrides": {"steps": 2}}))
        model = tmp_path / "junk.json"
        model.write_text("{\"format\": \"other\"}")
        code = self.run_cli("rom", cfg, "--model", model, "--out", tmp_path / "x.mpmtraj")
        assert code == cli.EXIT_CODES["format"]
        err = json.loads(capsys.readouterr().err.strip())
        assert err["category"] == "format"

    def test_module_entry_point_reports_errors_on_stderr(self, tmp_path):
        cfg = tmp_path / "scene.json"
        cfg.write_text("not json at all")
        proc = subprocess.run(
            [sys.executable, "-m", "mpmrom", "fom", str(cfg), "--out", str(tmp_path / "o")],
            capture_output=True, text=True,
        )
        assert proc.returncode == cli.EXIT_CODES["format"]
        payload = json.loads(proc.stderr.strip().splitlines()[-1])
        assert payload["category"] == "format"
