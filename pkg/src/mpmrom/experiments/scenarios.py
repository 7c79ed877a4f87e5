"""Scenario catalogue: parameterized scenes and dataset generation.

Each scenario draws parameter vectors mu from its domain, builds one
scene per instance, runs the full-order solver, and writes a trajectory
file per instance plus a JSON manifest.  Everything downstream (training
splits, error metrics, reruns) is driven by the manifest.

Desk-scale sizes: a few hundred to a few thousand points, tens of stored
snapshots.  The solver substeps between stored snapshots so the motion
per snapshot is meaningful while the solver stays inside its stability
bound; the stored dt is the snapshot spacing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..boundary import BoundarySpec, DirichletRegion
from ..errors import ConfigError, InvertedElementError, MpmError
from ..fom import stable_dt, step_fom
from ..grid import BackgroundGrid
from ..io.trajectory import Trajectory, write_trajectory
from ..materials import ConstitutiveParams
from ..particles import MaterialPointSet, Shape, box_shape, seed_material_points

SCENARIO_NAMES = ("gravity", "torsion_tension", "poke_recover", "bench_beam")
MANIFEST_NAME = "manifest.json"


@dataclass
class ScenarioSpec:
    """Geometry, discretization, and parameter plan of one experiment."""

    name: str
    dim: int
    dx: float
    node_counts: tuple
    ppc: int  # seeded points per cell per dimension
    dt: float  # snapshot spacing
    substeps: int  # solver steps per stored snapshot
    steps: int  # stored snapshots beyond the initial state
    instances: int
    material: ConstitutiveParams
    train_fraction: float = 0.8
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario {self.name!r}; expected one of {SCENARIO_NAMES}")
        if self.instances < 1 or self.steps < 1 or self.substeps < 1:
            raise ConfigError("instances, steps, and substeps must be positive")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError("train_fraction must lie in (0, 1]")
        solver_dt = self.dt / self.substeps
        limit = stable_dt(self.material, self.dx)
        if solver_dt > limit:
            raise ConfigError(
                f"solver step {solver_dt:.3e} exceeds the stability bound {limit:.3e}"
            )

    @property
    def solver_dt(self) -> float:
        return self.dt / self.substeps

    @property
    def base_dx(self) -> float:
        """Geometry length scale; stays put when the spec is refined."""
        return float(self.extra.get("base_dx", self.dx))


def refine_spec(spec: ScenarioSpec, factor: int) -> ScenarioSpec:
    """The same physical scene sampled factor x finer per dimension.

    Grid spacing shrinks, node counts and solver substeps grow, and the
    geometry scale is pinned to the original spacing so body, clamps, and
    forces stay where they were.  Snapshot times are unchanged.
    """
    if factor < 1:
        raise ConfigError("refinement factor must be >= 1")
    extra = dict(spec.extra)
    extra["base_dx"] = spec.base_dx
    return ScenarioSpec(
        name=spec.name,
        dim=spec.dim,
        dx=spec.dx / factor,
        node_counts=tuple((n - 1) * factor + 1 for n in spec.node_counts),
        ppc=spec.ppc,
        dt=spec.dt,
        substeps=spec.substeps * factor,
        steps=spec.steps,
        instances=spec.instances,
        material=spec.material,
        train_fraction=spec.train_fraction,
        extra=extra,
    )


@dataclass
class SceneInstance:
    mu: tuple
    points: MaterialPointSet
    grid: BackgroundGrid
    bc: BoundarySpec
    shape: Shape


# --------------------------------------------------------------------------
# catalogue defaults


def gravity_spec(instances: int = 30, steps: int = 30, dx: float = 1.0 / 32.0) -> ScenarioSpec:
    """2-D cantilever under gravity of varying strength, clamped at one end."""
    material = ConstitutiveParams(2e5, 0.3, 1000.0)
    return ScenarioSpec(
        name="gravity",
        dim=2,
        dx=dx,
        node_counts=(33, 33),
        ppc=2,
        dt=8e-3,
        substeps=10,
        steps=steps,
        instances=instances,
        material=material,
        extra={"g_lo": 1.0, "g_hi": 10.0},
    )


def torsion_tension_spec(instances: int = 9, steps: int = 24) -> ScenarioSpec:
    """3-D bar, one end fixed, the other pulled and twisted (full factorial)."""
    material = ConstitutiveParams(1e5, 0.3, 1000.0)
    return ScenarioSpec(
        name="torsion_tension",
        dim=3,
        dx=1.0 / 16.0,
        node_counts=(17, 17, 25),
        ppc=2,
        dt=5e-3,
        substeps=8,
        steps=steps,
        instances=instances,
        material=material,
        extra={"pull_lo": 0.1, "pull_hi": 0.3, "twist_lo": 1.0, "twist_hi": 3.0},
    )


def poke_recover_spec(instances: int = 6, steps: int = 24) -> ScenarioSpec:
    """2-D block poked by a directed force for the first 1/12 of the run."""
    material = ConstitutiveParams(1e5, 0.3, 1000.0)
    return ScenarioSpec(
        name="poke_recover",
        dim=2,
        dx=1.0 / 32.0,
        node_counts=(33, 33),
        ppc=2,
        dt=8e-3,
        substeps=10,
        steps=steps,
        instances=instances,
        material=material,
        extra={"force_scale": 3e5},
    )


BENCH_BEAM_CELLS = (50, 10)  # beam length x height at the base spacing


def bench_beam_spec(steps: int = 10) -> ScenarioSpec:
    """2-D cantilever for timing runs, one instance, no test split.

    At the base spacing the beam seeds 2000 points; refine_spec scales
    the count by factor^2 (factor 10 reaches 200k) while the trained
    manifold carries over unchanged.
    """
    material = ConstitutiveParams(1e4, 0.3, 1000.0)
    return ScenarioSpec(
        name="bench_beam",
        dim=2,
        dx=1.0 / 50.0,
        node_counts=(59, 27),
        ppc=2,
        dt=2e-3,
        substeps=1,
        steps=steps,
        instances=1,
        material=material,
        train_fraction=1.0,
        extra={"g": 3.0},
    )


def spec_by_name(name: str, **overrides) -> ScenarioSpec:
    builders = {
        "gravity": gravity_spec,
        "torsion_tension": torsion_tension_spec,
        "poke_recover": poke_recover_spec,
        "bench_beam": bench_beam_spec,
    }
    if name not in builders:
        raise ConfigError(f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES}")
    return builders[name](**overrides)


# --------------------------------------------------------------------------
# parameter plans


def sample_parameters(spec: ScenarioSpec, seed: int) -> tuple[list, list]:
    """(mu tuples, split labels) for every instance.

    gravity          uniform g in [g_lo, g_hi]
    torsion_tension  full factorial over pull speed x twist rate
    poke_recover     uniform force angle in [0, 2 pi)
    bench_beam       single instance, fixed gravity
    """
    rng = np.random.default_rng(seed)
    n = spec.instances
    if spec.name == "gravity":
        mus = [(float(g),) for g in rng.uniform(spec.extra["g_lo"], spec.extra["g_hi"], size=n)]
    elif spec.name == "torsion_tension":
        side = int(round(math.sqrt(n)))
        if side * side != n:
            raise ConfigError(f"torsion_tension needs a square instance count, got {n}")
        pulls = np.linspace(spec.extra["pull_lo"], spec.extra["pull_hi"], side)
        twists = np.linspace(spec.extra["twist_lo"], spec.extra["twist_hi"], side)
        mus = [(float(p), float(w)) for p in pulls for w in twists]
    elif spec.name == "poke_recover":
        mus = [(float(a),) for a in rng.uniform(0.0, 2.0 * math.pi, size=n)]
    else:  # bench_beam
        mus = [(float(spec.extra["g"]),)] * n

    n_test = int(round(n * (1.0 - spec.train_fraction)))
    splits = ["train"] * n
    if n_test > 0:
        test_idx = rng.choice(n, size=n_test, replace=False)
        for i in test_idx:
            splits[i] = "test"
    return mus, splits


# --------------------------------------------------------------------------
# scene builders


def _clamped_beam(spec: ScenarioSpec, gravity: float) -> SceneInstance:
    d = spec.dim
    b = spec.base_dx
    grid = BackgroundGrid(np.zeros(d), spec.dx, np.asarray(spec.node_counts))
    if spec.name == "bench_beam":
        length, height = BENCH_BEAM_CELLS[0] * b, BENCH_BEAM_CELLS[1] * b
        lo = np.array([4 * b, 12 * b])
    else:
        length, height = 16 * b, 5 * b
        lo = np.array([4 * b, 16 * b])
    hi = lo + np.array([length, height])
    shape = box_shape(lo, hi)
    points = seed_material_points(grid, shape, spec.material.density, spec.ppc)

    wall = lo[0] + 2 * b

    def clamp(X):
        return X[:, 0] <= wall

    def zero_velocity(x, t):
        return np.zeros_like(x)

    bc = BoundarySpec(
        dirichlet=[DirichletRegion(clamp, zero_velocity, name="clamp")],
        gravity=np.array([0.0, -gravity]),
    )
    return SceneInstance((gravity,), points, grid, bc, shape)


def _torsion_bar(spec: ScenarioSpec, pull: float, twist: float) -> SceneInstance:
    grid = BackgroundGrid(np.zeros(3), spec.dx, np.asarray(spec.node_counts))
    b = spec.base_dx
    lo = np.array([6 * b, 6 * b, 4 * b])
    hi = lo + np.array([4 * b, 4 * b, 14 * b])
    shape = box_shape(lo, hi)
    points = seed_material_points(grid, shape, spec.material.density, spec.ppc)
    center = 0.5 * (lo + hi)

    base_top = hi[2] - 1.5 * b
    base_bot = lo[2] + 1.5 * b

    def bottom(X):
        return X[:, 2] <= base_bot

    def top(X):
        return X[:, 2] >= base_top

    def still(x, t):
        return np.zeros_like(x)

    def drive(x, t):
        # rigid motion of the moving clamp: pull along the axis plus
        # rotation about it
        v = np.zeros_like(x)
        v[:, 0] = -twist * (x[:, 1] - center[1])
        v[:, 1] = twist * (x[:, 0] - center[0])
        v[:, 2] = pull
        return v

    def top_nodes(x, t):
        return x[:, 2] >= base_top + pull * t

    bc = BoundarySpec(
        dirichlet=[
            DirichletRegion(bottom, still, name="base"),
            DirichletRegion(top, drive, node_predicate=top_nodes, name="drive"),
        ]
    )
    return SceneInstance((pull, twist), points, grid, bc, shape)


def _poke_block(spec: ScenarioSpec, angle: float) -> SceneInstance:
    """Block clamped at its base, poked near the top, left to recover."""
    grid = BackgroundGrid(np.zeros(2), spec.dx, np.asarray(spec.node_counts))
    b = spec.base_dx
    lo = np.array([10 * b, 8 * b])
    hi = lo + np.array([12 * b, 12 * b])
    shape = box_shape(lo, hi)
    points = seed_material_points(grid, shape, spec.material.density, spec.ppc)
    poke_center = np.array([0.5 * (lo[0] + hi[0]), hi[1] - b])
    radius = 3 * b
    push_until = spec.steps * spec.dt / 12.0
    direction = np.array([math.cos(angle), math.sin(angle)])
    scale = spec.extra["force_scale"]
    base = lo[1] + 1.5 * b

    def poke_force(x, t):
        f = np.zeros_like(x)
        if t < push_until:
            inside = np.sum((x - poke_center) ** 2, axis=1) <= radius**2
            f[inside] = scale * direction
        return f

    def clamp(X):
        return X[:, 1] <= base

    def still(x, t):
        return np.zeros_like(x)

    bc = BoundarySpec(
        dirichlet=[DirichletRegion(clamp, still, name="base")], extra_force=poke_force
    )
    return SceneInstance((angle,), points, grid, bc, shape)


def build_instance(spec: ScenarioSpec, mu) -> SceneInstance:
    if spec.name == "gravity" or spec.name == "bench_beam":
        return _clamped_beam(spec, mu[0])
    if spec.name == "torsion_tension":
        return _torsion_bar(spec, mu[0], mu[1])
    if spec.name == "poke_recover":
        return _poke_block(spec, mu[0])
    raise ConfigError(f"no builder for scenario {spec.name!r}")


# --------------------------------------------------------------------------
# generation


def run_instance(spec: ScenarioSpec, scene: SceneInstance) -> Trajectory:
    """Full-order run storing spec.steps snapshots past the initial state."""
    pts = scene.points
    P, d = pts.position.shape
    S = spec.steps + 1
    positions = np.empty((S, P, d))
    velocities = np.empty((S, P, d))
    def_grads = np.empty((S, P, d, d))
    positions[0], velocities[0], def_grads[0] = pts.position, pts.velocity, pts.def_grad
    sdt = spec.solver_dt
    for s in range(1, S):
        for k in range(spec.substeps):
            n = (s - 1) * spec.substeps + k
            step_fom(pts, scene.grid, spec.material, scene.bc, sdt, n * sdt)
        positions[s], velocities[s], def_grads[s] = pts.position, pts.velocity, pts.def_grad
    return Trajectory(
        reference=pts.reference.copy(),
        positions=positions,
        velocities=velocities,
        def_grads=def_grads,
        dt=spec.dt,
        mu=[float(v) for v in scene.mu],
    )


def spec_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "name": spec.name,
        "dim": spec.dim,
        "dx": spec.dx,
        "node_counts": list(spec.node_counts),
        "ppc": spec.ppc,
        "dt": spec.dt,
        "substeps": spec.substeps,
        "steps": spec.steps,
        "instances": spec.instances,
        "material": {
            "youngs_modulus": spec.material.youngs_modulus,
            "poisson_ratio": spec.material.poisson_ratio,
            "density": spec.material.density,
        },
        "train_fraction": spec.train_fraction,
        "extra": spec.extra,
    }


def spec_from_dict(doc: dict) -> ScenarioSpec:
    mat = doc["material"]
    return ScenarioSpec(
        name=doc["name"],
        dim=int(doc["dim"]),
        dx=float(doc["dx"]),
        node_counts=tuple(int(v) for v in doc["node_counts"]),
        ppc=int(doc["ppc"]),
        dt=float(doc["dt"]),
        substeps=int(doc["substeps"]),
        steps=int(doc["steps"]),
        instances=int(doc["instances"]),
        material=ConstitutiveParams(
            float(mat["youngs_modulus"]), float(mat["poisson_ratio"]), float(mat["density"])
        ),
        train_fraction=float(doc.get("train_fraction", 0.8)),
        extra=dict(doc.get("extra", {})),
    )


def generate_scenario(spec: ScenarioSpec, seed: int, out_dir) -> Path:
    """Run every instance and write trajectories plus the manifest.

    An instance whose solver blows up (inverted element or a point
    leaving the grid) is recorded as failed in the manifest instead of
    aborting the sweep.  Returns the manifest path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mus, splits = sample_parameters(spec, seed)
    records = []
    for i, (mu, split) in enumerate(zip(mus, splits)):
        fname = f"instance_{i:03d}.mpmtraj"
        scene = build_instance(spec, mu)
        try:
            traj = run_instance(spec, scene)
        except (InvertedElementError, MpmError) as err:
            records.append(
                {"file": None, "mu": list(mu), "split": split, "status": "failed",
                 "error": type(err).__name__}
            )
            continue
        traj.metadata["split"] = split
        traj.metadata["scenario"] = spec.name
        write_trajectory(out / fname, traj)
        records.append({"file": fname, "mu": list(mu), "split": split, "status": "ok"})

    manifest = {
        "scenario": spec_to_dict(spec),
        "seed": seed,
        "instances": records,
    }
    path = out / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def load_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def manifest_files(manifest: dict, base_dir, split: str | None = None) -> list[Path]:
    """Trajectory paths from a manifest, optionally filtered by split."""
    base = Path(base_dir)
    rows = [r for r in manifest["instances"] if r["status"] == "ok"]
    if split is not None:
        rows = [r for r in rows if r["split"] == split]
    return [base / r["file"] for r in rows]
