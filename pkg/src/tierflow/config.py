"""JSON config parsing for the CLI: synth, VAE, and experiment documents.

Tier intervals appear in JSON as two-element arrays ``[lo, hi]`` and are
always half-open.  Parse errors raise :class:`ConfigError` naming the field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .data import (
    SynthConfig,
    SynthTier,
    TierSpec,
    load_bitvectors,
    load_interactions,
    load_latents,
    synth_generate,
)
from .errors import ConfigError
from .ftl import ArmSpec, DataContext, ExperimentConfig, TrainStep
from .vae import VaeConfig, chemical_preset, protein_preset


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return doc[key]


def _tier(value, where: str) -> TierSpec:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) for v in value)
    ):
        raise ConfigError(f"{where}: expected [lo, hi] integer pair, got {value!r}")
    try:
        return TierSpec(value[0], value[1])
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_json(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def synth_config_from_dict(doc: dict, where: str = "synth") -> SynthConfig:
    tiers = []
    for i, entry in enumerate(_require(doc, "tiers", where)):
        spot = f"{where}.tiers[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{spot}: expected an object")
        try:
            tiers.append(
                SynthTier(
                    tier=_tier(_require(entry, "range", spot), f"{spot}.range"),
                    count=int(_require(entry, "count", spot)),
                    flip_rate=float(_require(entry, "flip_rate", spot)),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"{spot}: {exc}") from exc
    try:
        return SynthConfig(
            n_compounds=int(_require(doc, "n_compounds", where)),
            n_proteins=int(_require(doc, "n_proteins", where)),
            compound_bits=int(_require(doc, "compound_bits", where)),
            protein_bits=int(_require(doc, "protein_bits", where)),
            tiers=tiers,
            validation_tier=_tier(
                _require(doc, "validation_tier", where), f"{where}.validation_tier"
            ),
            seed=int(_require(doc, "seed", where)),
            bit_density=float(doc.get("bit_density", 0.5)),
            true_rate=float(doc.get("true_rate", 0.2)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


_VAE_PRESETS = {"protein": protein_preset, "chemical": chemical_preset}


def vae_config_from_dict(doc: dict, where: str = "vae") -> VaeConfig:
    if "preset" in doc:
        name = doc["preset"]
        if name not in _VAE_PRESETS:
            raise ConfigError(
                f"{where}.preset: unknown preset {name!r}, "
                f"choose from {sorted(_VAE_PRESETS)}"
            )
        config = _VAE_PRESETS[name]()
        # presets accept overrides for the schedule-sized fields
        for key in ("epochs", "batch_size", "learning_rate"):
            if key in doc:
                setattr(config, key, type(getattr(config, key))(doc[key]))
        return config
    try:
        return VaeConfig(
            input_dim=int(_require(doc, "input_dim", where)),
            encoder_hidden=tuple(int(v) for v in _require(doc, "encoder_hidden", where)),
            latent_dim=int(_require(doc, "latent_dim", where)),
            epochs=int(_require(doc, "epochs", where)),
            batch_size=int(_require(doc, "batch_size", where)),
            learning_rate=float(_require(doc, "learning_rate", where)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class DataPaths:
    interactions: Path
    compound_features: Path
    protein_features: Path


@dataclass
class ExperimentSpec:
    """Parsed experiment document: the training plan plus its data source."""

    config: ExperimentConfig
    synth: SynthConfig | None = None
    paths: DataPaths | None = None


def experiment_from_dict(doc: dict, base_dir: Path | None = None) -> ExperimentSpec:
    where = "experiment"
    validation_tier = _tier(
        _require(doc, "validation_tier", where), f"{where}.validation_tier"
    )
    arms = []
    for i, entry in enumerate(_require(doc, "arms", where)):
        spot = f"{where}.arms[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{spot}: expected an object")
        if "validation_tier" in entry:
            arm_tier = _tier(entry["validation_tier"], f"{spot}.validation_tier")
            if arm_tier != validation_tier:
                raise ConfigError(
                    f"{spot}: validation tier {arm_tier} does not match the "
                    f"shared validation tier {validation_tier}"
                )
        steps = []
        for j, step in enumerate(_require(entry, "steps", spot)):
            sspot = f"{spot}.steps[{j}]"
            if not isinstance(step, dict):
                raise ConfigError(f"{sspot}: expected an object")
            try:
                steps.append(
                    TrainStep(
                        tier=_tier(_require(step, "tier", sspot), f"{sspot}.tier"),
                        epochs=int(_require(step, "epochs", sspot)),
                    )
                )
            except ValueError as exc:
                raise ConfigError(f"{sspot}: {exc}") from exc
        arms.append(ArmSpec(name=str(_require(entry, "name", spot)), steps=steps))

    try:
        config = ExperimentConfig(
            arms=arms,
            validation_tier=validation_tier,
            seed=int(_require(doc, "seed", where)),
            batch_size=int(doc.get("batch_size", 1000)),
            learning_rate=float(doc.get("learning_rate", 0.001)),
            hidden_layers=tuple(
                int(v) for v in doc.get("hidden_layers", (128, 64, 32, 16, 8))
            ),
            reset_optimizer_between_steps=bool(
                doc.get("reset_optimizer_between_steps", False)
            ),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc

    has_synth = "synth" in doc
    has_data = "data" in doc
    if has_synth == has_data:
        raise ConfigError(f"{where}: exactly one of 'synth' or 'data' is required")
    if has_synth:
        return ExperimentSpec(config, synth=synth_config_from_dict(doc["synth"]))

    data = doc["data"]
    if not isinstance(data, dict):
        raise ConfigError(f"{where}.data: expected an object")
    base = base_dir or Path(".")
    paths = DataPaths(
        interactions=base / str(_require(data, "interactions", f"{where}.data")),
        compound_features=base
        / str(_require(data, "compound_features", f"{where}.data")),
        protein_features=base / str(_require(data, "protein_features", f"{where}.data")),
    )
    return ExperimentSpec(config, paths=paths)


def _load_features(path: Path):
    """Feature files are either bit-vector stores (``#width=`` header) or latent TSVs."""
    from .data import _open_for_read

    with _open_for_read(path) as fh:
        first = fh.readline()
    if first.startswith("#width="):
        return load_bitvectors(path).as_float_features()
    return load_latents(path)


def build_data_context(spec: ExperimentSpec) -> DataContext:
    if spec.synth is not None:
        synth = synth_generate(spec.synth)
        return DataContext(
            interactions=synth.interactions,
            compound_features=synth.compounds.as_float_features(),
            protein_features=synth.proteins.as_float_features(),
        )
    assert spec.paths is not None
    return DataContext(
        interactions=load_interactions(spec.paths.interactions),
        compound_features=_load_features(spec.paths.compound_features),
        protein_features=_load_features(spec.paths.protein_features),
    )
