"""Stepwise training across label-confidence tiers, plus single-tier baselines.

A schedule is an ordered list of (tier, epochs) steps.  Step 1 starts from a
fresh initialization; every later step continues from the previous step's
weights and, unless told otherwise, its Adam moments.  Each step trains on
that tier's positives plus an equal number of freshly sampled negatives; the
validation tier is held out entirely and scored after every epoch.

Randomness is split into independent streams derived from the schedule seed
(init / validation negatives / per-step negatives / per-epoch shuffles), so
extending one step never reshuffles another and two runs that share a prefix
of the schedule are bit-identical over that prefix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import (
    DataError,
    InteractionTable,
    LabeledPair,
    LatentStore,
    TierSpec,
    make_features,
    sample_negatives,
    tier_filter,
)
from .engine import (
    AdamState,
    DenseNetwork,
    WeightSnapshot,
    accuracy,
    adam_step,
    backward,
    bce_loss,
    forward,
    init_network,
    take_snapshot,
)
from .errors import ConfigError
from .rng import RngStream, derive_seed


@dataclass(frozen=True)
class TrainStep:
    tier: TierSpec
    epochs: int

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"step over {self.tier} needs epochs >= 1")


@dataclass
class TrainSchedule:
    steps: list[TrainStep]
    validation_tier: TierSpec
    batch_size: int = 1000
    learning_rate: float = 0.001
    seed: int = 0
    hidden_layers: tuple[int, ...] = (128, 64, 32, 16, 8)
    reset_optimizer_between_steps: bool = False

    def __post_init__(self):
        self.hidden_layers = tuple(self.hidden_layers)
        if not self.steps:
            raise ValueError("schedule needs at least one step")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        for step in self.steps:
            if step.tier.overlaps(self.validation_tier):
                raise ValueError(
                    f"training tier {step.tier} overlaps validation tier "
                    f"{self.validation_tier}"
                )


@dataclass(frozen=True)
class MetricsRecord:
    step: int
    epoch: int
    split: str
    loss: float
    accuracy: float


@dataclass
class MetricsLog:
    records: list[MetricsRecord] = field(default_factory=list)

    def append(self, step: int, epoch: int, split: str, loss: float, acc: float) -> None:
        self.records.append(MetricsRecord(step, epoch, split, loss, acc))

    def validation_records(self) -> list[MetricsRecord]:
        return [r for r in self.records if r.split == "validation"]

    def best_validation(self) -> tuple[float, tuple[int, int], float, tuple[int, int]]:
        """(min loss, its (step, epoch), max accuracy, its (step, epoch)).

        Loss and accuracy extremes are located independently; ties resolve to
        the earliest epoch.
        """
        val = self.validation_records()
        if not val:
            raise ValueError("no validation records logged")
        best_loss = min(val, key=lambda r: r.loss)
        best_acc = max(val, key=lambda r: r.accuracy)
        return (
            best_loss.loss,
            (best_loss.step, best_loss.epoch),
            best_acc.accuracy,
            (best_acc.step, best_acc.epoch),
        )


def metrics_csv_lines(log: MetricsLog, arm: str) -> list[str]:
    """Rows for the metrics CSV: arm,step,epoch,split,loss,accuracy (9 sig digits)."""
    lines = ["arm,step,epoch,split,loss,accuracy"]
    for r in log.records:
        lines.append(
            f"{arm},{r.step},{r.epoch},{r.split},{r.loss:.9g},{r.accuracy:.9g}"
        )
    return lines


@dataclass
class DataContext:
    """Everything a training run consumes: positives, features, id universes."""

    interactions: InteractionTable
    compound_features: LatentStore
    protein_features: LatentStore
    compounds: list[str] = field(default_factory=list)
    proteins: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.compounds:
            self.compounds = sorted(self.compound_features.entries)
        if not self.proteins:
            self.proteins = sorted(self.protein_features.entries)

    @property
    def feature_dim(self) -> int:
        return self.protein_features.width + self.compound_features.width

    def feature_matrix(self, pairs: list[LabeledPair]) -> tuple[np.ndarray, np.ndarray]:
        rows, labels = [], []
        for pair in pairs:
            vec, label = make_features(pair, self.compound_features, self.protein_features)
            rows.append(vec)
            labels.append(label)
        return np.stack(rows), np.array(labels, dtype=np.float64)


@dataclass
class StepData:
    step_index: int
    tier: TierSpec
    positives: list[LabeledPair]
    negatives: list[LabeledPair]


@dataclass
class FtlResult:
    network: DenseNetwork
    log: MetricsLog
    snapshots: dict[str, WeightSnapshot]
    steps: list[StepData]
    validation_positives: list[LabeledPair]
    validation_negatives: list[LabeledPair]


def _positives_of(table: InteractionTable, tier: TierSpec) -> list[LabeledPair]:
    return [
        LabeledPair(r.compound_id, r.protein_id, 1, r.score)
        for r in tier_filter(table, tier).records
    ]


def _evaluate_arrays(net: DenseNetwork, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    out = forward(net, x)[-1].reshape(-1)
    loss, _ = bce_loss(out, y)
    return loss, accuracy(out, y)


def evaluate(
    net: DenseNetwork, pairs: list[LabeledPair], ctx: DataContext
) -> tuple[float, float]:
    """Mean BCE and threshold-0.5 accuracy over the pairs; pure function."""
    if not pairs:
        raise ValueError("evaluate needs a non-empty pair set")
    x, y = ctx.feature_matrix(pairs)
    return _evaluate_arrays(net, x, y)


def train_ftl(
    schedule: TrainSchedule,
    ctx: DataContext,
    snapshot_points: frozenset[tuple[int, int]] = frozenset(),
) -> FtlResult:
    """Run the stepwise schedule; returns the net, full metrics, and snapshots.

    ``snapshot_points`` are (step, epoch) pairs to capture, with epoch 0
    meaning "before this step's first update"; the end of every step is
    always captured under the tag ``step<k>_end``.
    """
    seed = schedule.seed
    val_pos = _positives_of(ctx.interactions, schedule.validation_tier)
    if not val_pos:
        raise DataError(f"validation tier {schedule.validation_tier} has no positives")
    all_pos = ctx.interactions.pairs()
    val_negs = sample_negatives(
        ctx.compounds,
        ctx.proteins,
        all_pos,
        len(val_pos),
        RngStream(derive_seed(seed, "validation-negatives")),
    )
    val_x, val_y = ctx.feature_matrix(val_pos + val_negs)
    val_pairs = {p.pair for p in val_pos} | {p.pair for p in val_negs}
    forbidden = all_pos | {p.pair for p in val_negs}

    net = init_network(
        list(schedule.hidden_layers) + [1],
        ctx.feature_dim,
        None,
        RngStream(derive_seed(seed, "init")),
    )
    params = net.parameters()
    adam = AdamState.create(params, schedule.learning_rate)

    log = MetricsLog()
    snapshots: dict[str, WeightSnapshot] = {}
    steps_out: list[StepData] = []

    for k, step in enumerate(schedule.steps, start=1):
        positives = _positives_of(ctx.interactions, step.tier)
        if not positives:
            raise DataError(f"step {k} tier {step.tier} has no positives")
        negatives = sample_negatives(
            ctx.compounds,
            ctx.proteins,
            forbidden,
            len(positives),
            RngStream(derive_seed(seed, "negatives", k)),
        )
        train_pairs = {p.pair for p in positives} | {p.pair for p in negatives}
        if train_pairs & val_pairs:
            raise RuntimeError("validation pairs leaked into a training step")
        steps_out.append(StepData(k, step.tier, positives, negatives))

        x, y = ctx.feature_matrix(positives + negatives)
        n = len(y)
        if schedule.reset_optimizer_between_steps and k > 1:
            adam = AdamState.create(params, schedule.learning_rate)
        if (k, 0) in snapshot_points:
            snapshots[f"step{k}_epoch0"] = take_snapshot(net, f"step{k}_epoch0")

        for epoch in range(1, step.epochs + 1):
            order = RngStream(derive_seed(seed, "shuffle", k, epoch)).permutation(n)
            for at in range(0, n, schedule.batch_size):
                idx = order[at:at + schedule.batch_size]
                acts = forward(net, x[idx])
                _, grad = bce_loss(acts[-1], y[idx])
                grads = backward(net, acts, grad)
                adam_step(adam, params, grads)
            train_loss, train_acc = _evaluate_arrays(net, x, y)
            val_loss, val_acc = _evaluate_arrays(net, val_x, val_y)
            log.append(k, epoch, "train", train_loss, train_acc)
            log.append(k, epoch, "validation", val_loss, val_acc)
            if (k, epoch) in snapshot_points:
                tag = f"step{k}_epoch{epoch}"
                snapshots[tag] = take_snapshot(net, tag)
        snapshots[f"step{k}_end"] = take_snapshot(net, f"step{k}_end")

    return FtlResult(net, log, snapshots, steps_out, val_pos, val_negs)


def train_single(
    tier: TierSpec,
    epochs: int,
    ctx: DataContext,
    *,
    validation_tier: TierSpec,
    batch_size: int = 1000,
    learning_rate: float = 0.001,
    seed: int = 0,
    hidden_layers: tuple[int, ...] = (128, 64, 32, 16, 8),
) -> FtlResult:
    """Fresh-initialization baseline on one tier; a degenerate 1-step schedule."""
    schedule = TrainSchedule(
        steps=[TrainStep(tier, epochs)],
        validation_tier=validation_tier,
        batch_size=batch_size,
        learning_rate=learning_rate,
        seed=seed,
        hidden_layers=hidden_layers,
    )
    return train_ftl(schedule, ctx)


@dataclass
class ArmSpec:
    name: str
    steps: list[TrainStep]

    def __post_init__(self):
        if not self.name:
            raise ConfigError("arm needs a non-empty name")
        if not self.steps:
            raise ConfigError(f"arm {self.name!r} needs at least one step")


@dataclass
class ExperimentConfig:
    arms: list[ArmSpec]
    validation_tier: TierSpec
    seed: int
    batch_size: int = 1000
    learning_rate: float = 0.001
    hidden_layers: tuple[int, ...] = (128, 64, 32, 16, 8)
    reset_optimizer_between_steps: bool = False

    def __post_init__(self):
        self.hidden_layers = tuple(self.hidden_layers)
        if not self.arms:
            raise ConfigError("experiment needs at least one arm")
        names = [a.name for a in self.arms]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate arm names in {names}")

    def schedule_for(self, arm: ArmSpec) -> TrainSchedule:
        return TrainSchedule(
            steps=list(arm.steps),
            validation_tier=self.validation_tier,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
            hidden_layers=self.hidden_layers,
            reset_optimizer_between_steps=self.reset_optimizer_between_steps,
        )


@dataclass
class ArmOutcome:
    name: str
    network: DenseNetwork
    log: MetricsLog
    best_val_loss: float
    best_val_accuracy: float
    best_loss_at: tuple[int, int]
    best_acc_at: tuple[int, int]


@dataclass
class ExperimentResult:
    arms: dict[str, ArmOutcome]

    def report_dict(self) -> dict:
        """Per-arm bests plus pairwise deltas, arms ordered by name."""
        names = sorted(self.arms)
        report: dict = {"arms": {}, "deltas": {}}
        for name in names:
            arm = self.arms[name]
            report["arms"][name] = {
                "best_val_loss": arm.best_val_loss,
                "best_val_accuracy": arm.best_val_accuracy,
                "epoch_of_best": {
                    "loss": list(arm.best_loss_at),
                    "accuracy": list(arm.best_acc_at),
                },
            }
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                report["deltas"][f"{a}_vs_{b}"] = {
                    "best_val_loss": self.arms[a].best_val_loss - self.arms[b].best_val_loss,
                    "best_val_accuracy": (
                        self.arms[a].best_val_accuracy - self.arms[b].best_val_accuracy
                    ),
                }
        return report


def _run_arm(config: ExperimentConfig, ctx: DataContext, arm: ArmSpec) -> ArmOutcome:
    result = train_ftl(config.schedule_for(arm), ctx)
    loss, loss_at, acc, acc_at = result.log.best_validation()
    return ArmOutcome(arm.name, result.network, result.log, loss, acc, loss_at, acc_at)


def run_experiment(
    config: ExperimentConfig, ctx: DataContext, jobs: int = 1
) -> ExperimentResult:
    """Run every arm with the shared seed and validation set.

    Arms are independent; with jobs > 1 they run in separate processes and the
    results are identical to a sequential run.
    """
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    if jobs == 1 or len(config.arms) == 1:
        outcomes = [_run_arm(config, ctx, arm) for arm in config.arms]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(jobs, len(config.arms))) as pool:
            outcomes = list(
                pool.map(_run_arm, *zip(*[(config, ctx, arm) for arm in config.arms]))
            )
    return ExperimentResult({o.name: o for o in sorted(outcomes, key=lambda o: o.name)})
