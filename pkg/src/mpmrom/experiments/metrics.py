"""Accuracy metrics for reduced and reconstructed trajectories."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


@dataclass
class ErrorReport:
    """Relative accumulated position error, per instance and pooled.

    The pooled value is the square-root ratio of the summed squared
    position mismatch to the summed squared true positions, accumulated
    over every snapshot, point, and instance supplied.
    """

    per_instance: list = field(default_factory=list)  # (mu tuple, error)
    aggregate: float = 0.0
    extra: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mu", "relative_error"])
            for mu, err in self.per_instance:
                writer.writerow([" ".join(f"{v:.10g}" for v in mu), f"{err:.10e}"])
            writer.writerow(["aggregate", f"{self.aggregate:.10e}"])


def _pair_sums(truth: np.ndarray, approx: np.ndarray) -> tuple[float, float]:
    if truth.shape != approx.shape:
        raise ShapeError(f"trajectory shapes differ: {truth.shape} vs {approx.shape}")
    num = float(np.sum((approx - truth) ** 2))
    den = float(np.sum(truth**2))
    return num, den


def accumulated_error(truth: np.ndarray, approx: np.ndarray) -> float:
    """Relative accumulated position error of one instance."""
    num, den = _pair_sums(truth, approx)
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return float(np.sqrt(num / den))


def position_error(truth_list, approx_list, mus=None) -> ErrorReport:
    """Pooled error across instances (order-independent up to rounding).

    truth_list and approx_list hold position arrays of matching shapes,
    one entry per instance; mus optionally labels each instance.
    """
    if len(truth_list) != len(approx_list):
        raise ShapeError(
            f"instance counts differ: {len(truth_list)} vs {len(approx_list)}"
        )
    if mus is None:
        mus = [(float(i),) for i in range(len(truth_list))]
    report = ErrorReport()
    num_total = 0.0
    den_total = 0.0
    for mu, truth, approx in zip(mus, truth_list, approx_list):
        num, den = _pair_sums(np.asarray(truth), np.asarray(approx))
        num_total += num
        den_total += den
        inst = 0.0 if den == 0.0 else float(np.sqrt(num / den))
        report.per_instance.append((tuple(mu), inst))
    report.aggregate = 0.0 if den_total == 0.0 else float(np.sqrt(num_total / den_total))
    return report
