"""Scenario catalogue, metrics, drivers, and the command-line interface."""

from .baseline import BaselineComparison, compare_manifolds, linear_decoder, train_linear
from .bench import (
    REFERENCE_TARGETS,
    BenchReport,
    BenchRow,
    kernel_backend_rows,
    lagrangian_point_scaling,
    run_bench,
    time_fom,
    time_rom,
)
from .driver import (
    dataset_from_manifest,
    decode_def_grads,
    reconstruction_report,
    rom_error_report,
    rom_scene_for,
    run_rom_instance,
    snapshot_indices,
)
from .metrics import ErrorReport, accumulated_error, position_error
from .scenarios import (
    MANIFEST_NAME,
    SCENARIO_NAMES,
    ScenarioSpec,
    SceneInstance,
    bench_beam_spec,
    build_instance,
    generate_scenario,
    gravity_spec,
    load_manifest,
    manifest_files,
    poke_recover_spec,
    refine_spec,
    run_instance,
    sample_parameters,
    spec_by_name,
    spec_from_dict,
    spec_to_dict,
    torsion_tension_spec,
)
from .superres import SuperresResult, advect_tracers, run_superres

__all__ = [
    "BaselineComparison",
    "BenchReport",
    "BenchRow",
    "ErrorReport",
    "MANIFEST_NAME",
    "REFERENCE_TARGETS",
    "SCENARIO_NAMES",
    "ScenarioSpec",
    "SceneInstance",
    "SuperresResult",
    "accumulated_error",
    "advect_tracers",
    "bench_beam_spec",
    "build_instance",
    "compare_manifolds",
    "dataset_from_manifest",
    "decode_def_grads",
    "generate_scenario",
    "gravity_spec",
    "kernel_backend_rows",
    "lagrangian_point_scaling",
    "linear_decoder",
    "load_manifest",
    "manifest_files",
    "poke_recover_spec",
    "position_error",
    "reconstruction_report",
    "refine_spec",
    "rom_error_report",
    "rom_scene_for",
    "run_bench",
    "run_instance",
    "run_rom_instance",
    "run_superres",
    "sample_parameters",
    "snapshot_indices",
    "spec_by_name",
    "spec_from_dict",
    "spec_to_dict",
    "time_fom",
    "time_rom",
    "torsion_tension_spec",
    "train_linear",
]
