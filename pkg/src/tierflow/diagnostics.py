"""Per-layer weight-drift analysis between network snapshots.

The headline quantity is the Euclidean distance between two snapshots of a
layer, normalized by that layer's parameter count (weights plus biases,
divided by the count itself, not its square root).  Fold changes compare the
drift across an FTL step transition against the drift under continued
same-tier training over the same number of epochs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import WeightSnapshot, take_snapshot
from .ftl import DataContext, FtlResult, TrainSchedule, TrainStep, train_ftl

__all__ = [
    "WeightSnapshot",
    "take_snapshot",
    "LayerDistance",
    "LayerDistanceReport",
    "layer_distance",
    "fold_change",
    "DriftComparison",
    "weight_drift_protocol",
    "drift_csv_lines",
]


@dataclass(frozen=True)
class LayerDistance:
    layer_index: int
    n_weights: int
    distance: float


@dataclass
class LayerDistanceReport:
    tag_a: str
    tag_b: str
    layers: list[LayerDistance]

    def distances(self) -> np.ndarray:
        return np.array([l.distance for l in self.layers])


def layer_distance(a: WeightSnapshot, b: WeightSnapshot) -> LayerDistanceReport:
    """Per layer: ||params_a - params_b||_2 / parameter count, biases included."""
    if a.n_layers != b.n_layers:
        raise ValueError(f"snapshots have {a.n_layers} vs {b.n_layers} layers")
    layers = []
    for i, (wa, ba, wb, bb) in enumerate(zip(a.weights, a.biases, b.weights, b.biases)):
        if wa.shape != wb.shape or ba.shape != bb.shape:
            raise ValueError(f"layer {i} shapes differ between snapshots")
        sq = float(np.sum((wa - wb) ** 2) + np.sum((ba - bb) ** 2))
        n = wa.size + ba.size
        layers.append(LayerDistance(i, n, float(np.sqrt(sq) / n)))
    return LayerDistanceReport(a.tag, b.tag, layers)


def fold_change(
    ftl_report: LayerDistanceReport, baseline_report: LayerDistanceReport
) -> list[float | None]:
    """Per-layer ratio ftl/baseline; None marks a zero-baseline layer."""
    if len(ftl_report.layers) != len(baseline_report.layers):
        raise ValueError("reports cover different layer counts")
    ratios: list[float | None] = []
    for f, b in zip(ftl_report.layers, baseline_report.layers):
        if b.distance == 0.0:
            ratios.append(None)
        else:
            ratios.append(f.distance / b.distance)
    return ratios


@dataclass
class DriftComparison:
    ftl_report: LayerDistanceReport
    baseline_report: LayerDistanceReport
    fold_changes: list[float | None]
    ftl_result: FtlResult
    baseline_result: FtlResult


def weight_drift_protocol(
    schedule: TrainSchedule, ctx: DataContext, delta: int = 20
) -> DriftComparison:
    """Compare step-transition drift against continued same-tier drift.

    Requires a 2-step schedule with step-1 budget E1 and step-2 budget of at
    least ``delta``.  Arm one runs the schedule and snapshots at (step 1, E1)
    and (step 2, delta); arm two continues training on the step-1 tier for
    E1 + delta epochs from the same seed, so both arms are bit-identical
    through epoch E1 (asserted).
    """
    if len(schedule.steps) != 2:
        raise ValueError(
            f"drift protocol needs a 2-step schedule, got {len(schedule.steps)} steps"
        )
    e1 = schedule.steps[0].epochs
    if delta < 0 or delta > schedule.steps[1].epochs:
        raise ValueError(
            f"delta must lie in [0, {schedule.steps[1].epochs}], got {delta}"
        )

    ftl_result = train_ftl(schedule, ctx, frozenset({(1, e1), (2, delta)}))

    continuation = TrainSchedule(
        steps=[TrainStep(schedule.steps[0].tier, e1 + delta)],
        validation_tier=schedule.validation_tier,
        batch_size=schedule.batch_size,
        learning_rate=schedule.learning_rate,
        seed=schedule.seed,
        hidden_layers=schedule.hidden_layers,
        reset_optimizer_between_steps=schedule.reset_optimizer_between_steps,
    )
    base_result = train_ftl(continuation, ctx, frozenset({(1, e1), (1, e1 + delta)}))

    ftl_at_e1 = ftl_result.snapshots[f"step1_epoch{e1}"]
    base_at_e1 = base_result.snapshots[f"step1_epoch{e1}"]
    for wa, wb in zip(ftl_at_e1.weights, base_at_e1.weights):
        if not np.array_equal(wa, wb):
            raise RuntimeError("protocol arms diverged before the step transition")
    for ba, bb in zip(ftl_at_e1.biases, base_at_e1.biases):
        if not np.array_equal(ba, bb):
            raise RuntimeError("protocol arms diverged before the step transition")

    ftl_report = layer_distance(ftl_at_e1, ftl_result.snapshots[f"step2_epoch{delta}"])
    base_report = layer_distance(
        base_at_e1, base_result.snapshots[f"step1_epoch{e1 + delta}"]
    )
    return DriftComparison(
        ftl_report, base_report, fold_change(ftl_report, base_report),
        ftl_result, base_result,
    )


def drift_csv_lines(comparison: DriftComparison) -> list[str]:
    """CSV rows: layer,n_weights,dist_ftl,dist_baseline,fold_change.

    The first line is a comment naming the snapshot pairs; undefined fold
    changes (zero baseline drift) are written as NA.
    """
    ftl, base = comparison.ftl_report, comparison.baseline_report
    lines = [
        f"# ftl: {ftl.tag_a} -> {ftl.tag_b}; baseline: {base.tag_a} -> {base.tag_b}",
        "layer,n_weights,dist_ftl,dist_baseline,fold_change",
    ]
    for lf, lb, ratio in zip(ftl.layers, base.layers, comparison.fold_changes):
        cell = "NA" if ratio is None else f"{ratio:.9g}"
        lines.append(
            f"{lf.layer_index},{lf.n_weights},{lf.distance:.9g},{lb.distance:.9g},{cell}"
        )
    return lines
