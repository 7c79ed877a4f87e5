"""Command-line front end.

Scene configuration files are UTF-8 JSON:

    {
      "scenario": "gravity",          # catalogue name, or "spec": {...}
      "overrides": {"steps": 20},     # optional ScenarioSpec field edits
      "mu": [5.0],                    # instance parameters (fom / rom)
      "refine": 1                     # optional resolution factor
    }

Every failure exits nonzero and prints one JSON line on stderr with the
machine-readable error category.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from ..errors import ConfigError, FormatError, MpmError
from ..io.trajectory import Trajectory, read_trajectory, write_trajectory
from ..manifold.checkpoint import load_model, save_model
from ..rom import RomConfig, write_diagnostics
from ..training.fit import TrainConfig, fit
from . import bench as bench_mod
from .baseline import compare_manifolds
from .driver import (
    at_snapshots,
    dataset_from_manifest,
    decode_def_grads,
    rom_scene_for,
    run_rom_instance,
)
from .metrics import position_error
from .scenarios import (
    SCENARIO_NAMES,
    build_instance,
    generate_scenario,
    load_manifest,
    refine_spec,
    run_instance,
    sample_parameters,
    spec_by_name,
    spec_from_dict,
)
from .superres import run_superres

EXIT_CODES = {
    "config": 2,
    "format": 3,
    "shape": 4,
    "out-of-domain": 5,
    "inverted-element": 6,
    "degenerate-map": 7,
    "non-convergence": 8,
    "error": 1,
}

PROJECTION_FLAGS = {"pv": "position_velocity", "v": "velocity_only"}


def load_scene_config(path):
    """(spec, mu) from a JSON scene document."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise FormatError(f"scene config is not valid JSON: {err}") from err
    if "spec" in doc:
        spec = spec_from_dict(doc["spec"])
    elif "scenario" in doc:
        spec = spec_by_name(doc["scenario"])
    else:
        raise ConfigError("scene config needs a 'scenario' name or a full 'spec'")
    overrides = doc.get("overrides", {})
    if overrides:
        legal = {f.name for f in dataclasses.fields(spec)}
        bad = set(overrides) - legal
        if bad:
            raise ConfigError(f"unknown spec override(s): {sorted(bad)}")
        spec = dataclasses.replace(spec, **overrides)
    factor = int(doc.get("refine", 1))
    if factor > 1:
        spec = refine_spec(spec, factor)
    mu = doc.get("mu")
    if mu is not None:
        mu = tuple(float(v) for v in mu)
    return spec, mu


def default_mu(spec, seed: int):
    mus, _ = sample_parameters(spec, seed)
    return mus[0]


def rom_config_from_args(args) -> RomConfig:
    return RomConfig(
        quadrature_mode=args.quadrature,
        projection_mode=PROJECTION_FLAGS[args.projection],
        sample_count=args.samples,
        ell=args.ell,
        seed=args.seed,
    )


# --------------------------------------------------------------------------
# subcommands


def cmd_fom(args) -> int:
    spec, mu = load_scene_config(args.scene)
    if mu is None:
        mu = default_mu(spec, args.seed)
    scene = build_instance(spec, mu)
    traj = run_instance(spec, scene)
    traj.metadata["scenario"] = spec.name
    write_trajectory(args.out, traj)
    print(f"wrote {args.out}: {traj.positions.shape[1]} points, {spec.steps} snapshots")
    return 0


def cmd_gen(args) -> int:
    if args.scene:
        spec, _ = load_scene_config(args.scene)
    else:
        spec = spec_by_name(args.scenario)
    manifest = generate_scenario(spec, args.seed, args.out)
    doc = load_manifest(manifest)
    ok = sum(1 for r in doc["instances"] if r["status"] == "ok")
    failed = len(doc["instances"]) - ok
    print(f"wrote {manifest}: {ok} instances ok, {failed} failed")
    return 0


def cmd_train(args) -> int:
    _, dataset = dataset_from_manifest(args.manifest)
    cfg = TrainConfig(
        latent_dim=args.latent_dim,
        steps=args.steps,
        lambda_f=args.lambda_f,
        lambda_v=args.lambda_v,
        seed=args.seed,
    )
    log_path = args.log or (str(args.out) + ".log.csv")
    bundle, rows = fit(dataset, cfg, log_path=log_path)
    save_model(args.out, bundle)
    print(f"wrote {args.out}: final loss {rows[-1][1]:.6e} after {len(rows)} steps")
    return 0


def cmd_rom(args) -> int:
    spec, mu = load_scene_config(args.scene)
    if mu is None:
        mu = default_mu(spec, args.seed)
    bundle = load_model(args.model)
    cfg = rom_config_from_args(args)
    pos, vel, result = run_rom_instance(spec, mu, bundle, cfg)
    scene = rom_scene_for(spec, mu, bundle)
    thin = at_snapshots(result, spec)
    def_grads = decode_def_grads(scene, thin)
    traj = Trajectory(
        reference=scene.points0.reference.copy(),
        positions=pos,
        velocities=vel,
        def_grads=def_grads,
        dt=spec.dt,
        mu=[float(v) for v in mu],
        metadata={"scenario": spec.name, "model": str(args.model), "reduced": True},
    )
    write_trajectory(args.out, traj)
    if args.diagnostics:
        write_diagnostics(args.diagnostics, result.diagnostics)
    print(f"wrote {args.out}: {pos.shape[1]} points, {spec.steps} snapshots")
    return 0


def _error_pairs(truth_arg, approx_arg, split):
    """Instance lists from two trajectory files or two manifests."""
    t_path, a_path = Path(truth_arg), Path(approx_arg)
    if t_path.name.endswith(".json"):
        t_doc = load_manifest(t_path)
        a_doc = load_manifest(a_path)
        t_rows = {tuple(r["mu"]): r for r in t_doc["instances"] if r["status"] == "ok"}
        a_rows = {tuple(r["mu"]): r for r in a_doc["instances"] if r["status"] == "ok"}
        if split != "all":
            t_rows = {k: r for k, r in t_rows.items() if r["split"] == split}
        keys = sorted(set(t_rows) & set(a_rows))
        if not keys:
            raise ConfigError("the two manifests share no successful instances")
        truths, approxs, mus = [], [], []
        for k in keys:
            truths.append(read_trajectory(t_path.parent / t_rows[k]["file"]).positions)
            approxs.append(read_trajectory(a_path.parent / a_rows[k]["file"]).positions)
            mus.append(k)
        return truths, approxs, mus
    t = read_trajectory(t_path)
    a = read_trajectory(a_path)
    return [t.positions], [a.positions], [tuple(t.mu)]


def cmd_error(args) -> int:
    truths, approxs, mus = _error_pairs(args.truth, args.approx, args.split)
    report = position_error(truths, approxs, mus)
    if args.out:
        report.write_csv(args.out)
    for mu, err in report.per_instance:
        print(f"mu={mu}: {err:.6e}")
    print(f"aggregate: {report.aggregate:.6e}")
    return 0


def cmd_superres(args) -> int:
    manifest = load_manifest(args.manifest)
    spec = spec_from_dict(manifest["scenario"])
    bundle = load_model(args.model)
    cfg = rom_config_from_args(args)
    mus = [
        tuple(r["mu"])
        for r in manifest["instances"]
        if r["status"] == "ok" and r["split"] == "test"
    ]
    if not mus:
        raise ConfigError("manifest has no successful test instances")
    result = run_superres(spec, bundle, cfg, mus, factor=args.factor)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.rom_report.write_csv(out / "rom_error.csv")
    result.tracer_report.write_csv(out / "tracer_error.csv")
    print(f"reduced error    {result.rom_report.aggregate:.6e}")
    print(f"tracer baseline  {result.tracer_report.aggregate:.6e}")
    return 0


def cmd_baseline_linear(args) -> int:
    _, dataset = dataset_from_manifest(args.manifest)
    cfg = TrainConfig(
        latent_dim=args.latent_dim,
        steps=args.steps,
        lambda_f=args.lambda_f,
        lambda_v=args.lambda_v,
        seed=args.seed,
    )
    bundle = load_model(args.model) if args.model else None
    comparison = compare_manifolds(dataset, cfg, split=args.split, nonlinear_bundle=bundle)
    if args.out:
        comparison.nonlinear.extra["latent_dim"] = args.latent_dim
        comparison.linear.extra["latent_dim"] = args.latent_dim
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("manifold,aggregate_error\n")
            fh.write(f"nonlinear,{comparison.nonlinear.aggregate:.10e}\n")
            fh.write(f"linear,{comparison.linear.aggregate:.10e}\n")
    print(f"nonlinear {comparison.nonlinear.aggregate:.6e}")
    print(f"linear    {comparison.linear.aggregate:.6e}")
    return 0


def cmd_bench(args) -> int:
    spec, mu = load_scene_config(args.scene)
    bundle = load_model(args.model)
    if mu is None:
        mu = (spec.extra["g"],) if "g" in spec.extra else default_mu(spec, args.seed)
    configs = [
        ("eulerian_v", RomConfig(
            quadrature_mode="eulerian",
            projection_mode="velocity_only",
            sample_count=args.samples,
            ell=args.ell,
            seed=args.seed,
        )),
        ("lagrangian_pv", RomConfig(
            quadrature_mode="lagrangian",
            projection_mode="position_velocity",
            sample_count=args.samples,
            seed=args.seed,
        )),
    ]
    report = bench_mod.run_bench(spec, bundle, configs, mu=mu)
    if args.scaling:
        # point-scaling reuses the unrefined catalogue spec
        report.scaling_rows = bench_mod.lagrangian_point_scaling(
            spec_by_name(spec.name), bundle,
            RomConfig(
                quadrature_mode="lagrangian",
                projection_mode="velocity_only",
                sample_count=args.samples,
                seed=args.seed,
            ),
        )
    report.kernel_rows = bench_mod.kernel_backend_rows()
    report.write_csv(args.out)
    fom_row = report.by_label("fom")
    print(f"fom per-step {fom_row.per_step_ms:.2f} ms ({fom_row.points} points)")
    for label, _ in configs:
        row = report.by_label(label)
        print(f"{label}: per-step {row.per_step_ms:.2f} ms, speedup {row.speedup_vs_fom:.2f}x")
    print(f"wrote {args.out}")
    return 0


# --------------------------------------------------------------------------
# parser


def add_rom_flags(p) -> None:
    p.add_argument("--quadrature", choices=("lagrangian", "eulerian"), default="lagrangian")
    p.add_argument("--projection", choices=tuple(PROJECTION_FLAGS), default="pv")
    p.add_argument("--samples", type=int, default=100, metavar="K")
    p.add_argument("--ell", type=int, default=2, metavar="L")


def add_train_flags(p) -> None:
    p.add_argument("--latent-dim", type=int, default=4)
    p.add_argument("--lambda-f", type=float, default=100.0)
    p.add_argument("--lambda-v", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=2000, help="optimizer steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpmrom",
        description="Full-order and reduced-order material point simulation",
    )
    parser.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fom", help="run one full-order instance")
    p.add_argument("scene", help="scene config JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fom)

    p = sub.add_parser("gen", help="generate a scenario dataset")
    p.add_argument("--scenario", choices=SCENARIO_NAMES)
    p.add_argument("--scene", help="scene config JSON (overrides --scenario)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="fit a manifold to a dataset")
    p.add_argument("manifest")
    add_train_flags(p)
    p.add_argument("--log", help="training log CSV (default: OUT.log.csv)")
    p.add_argument("--out", required=True, help="model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rom", help="run one reduced-order instance")
    p.add_argument("scene", help="scene config JSON")
    p.add_argument("--model", required=True)
    add_rom_flags(p)
    p.add_argument("--diagnostics", help="per-step timing CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rom)

    p = sub.add_parser("error", help="position error between runs")
    p.add_argument("truth", help="trajectory file or manifest JSON")
    p.add_argument("approx", help="trajectory file or manifest JSON")
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.add_argument("--out", help="report CSV")
    p.set_defaults(func=cmd_error)

    p = sub.add_parser("superres", help="reduced run at a finer seeding")
    p.add_argument("manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--factor", type=int, default=2)
    add_rom_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_superres)

    p = sub.add_parser("baseline-linear", help="deep vs single-layer manifold")
    p.add_argument("manifest")
    add_train_flags(p)
    p.add_argument("--model", help="pre-trained nonlinear model to reuse")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", help="comparison CSV")
    p.set_defaults(func=cmd_baseline_linear)

    p = sub.add_parser("bench", help="timing table for a scene")
    p.add_argument("scene", help="scene config JSON")
    p.add_argument("--model", required=True)
    add_rom_flags(p)
    p.add_argument("--scaling", action="store_true", help="add point-count scaling rows")
    p.add_argument("--out", required=True, help="report CSV")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MpmError as err:
        category = getattr(err, "category", "error")
        print(json.dumps({"category": category, "message": str(err)}), file=sys.stderr)
        return EXIT_CODES.get(category, 1)


if __name__ == "__main__":
    sys.exit(main())
