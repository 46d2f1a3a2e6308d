"""End-to-end desk-scale pipeline: synth -> embed -> train -> diagnose.

Generates a small tiered dataset, compresses both feature spaces with VAEs,
runs the 2-step schedule against the single-tier baseline on the VAE
latents, and emits the weight-drift comparison.  Everything lands under the
given output directory (default ./demo_out).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from tierflow.cli import main as tierflow


def run(out_root: Path) -> int:
    out_root.mkdir(parents=True, exist_ok=True)
    data_dir = out_root / "data"

    synth_cfg = {
        "n_compounds": 120,
        "n_proteins": 80,
        "compound_bits": 24,
        "protein_bits": 24,
        "tiers": [
            {"range": [300, 700], "count": 1500, "flip_rate": 0.30},
            {"range": [700, 900], "count": 500, "flip_rate": 0.05},
            {"range": [900, 1000], "count": 300, "flip_rate": 0.0},
        ],
        "validation_tier": [900, 1000],
        "seed": 7,
    }
    (out_root / "synth.json").write_text(json.dumps(synth_cfg, indent=2))
    if tierflow(["synth", "--config", str(out_root / "synth.json"),
                 "--out", str(data_dir)]):
        return 1

    for space, bits in (("compound", "compounds.bits"), ("protein", "proteins.bits")):
        vae_cfg = {
            "input_dim": 24, "encoder_hidden": [16], "latent_dim": 6,
            "epochs": 40, "batch_size": 50, "learning_rate": 0.001, "seed": 7,
        }
        cfg_path = out_root / f"vae_{space}.json"
        cfg_path.write_text(json.dumps(vae_cfg, indent=2))
        if tierflow(["embed", "--config", str(cfg_path),
                     "--bitvectors", str(data_dir / bits),
                     "--out", str(out_root / f"vae_{space}")]):
            return 1

    experiment = {
        "data": {
            "interactions": str(data_dir / "interactions.tsv"),
            "compound_features": str(out_root / "vae_compound" / "latents.tsv"),
            "protein_features": str(out_root / "vae_protein" / "latents.tsv"),
        },
        "arms": [
            {"name": "ftl_2step", "steps": [
                {"tier": [300, 700], "epochs": 30},
                {"tier": [700, 900], "epochs": 30}]},
            {"name": "baseline_high", "steps": [{"tier": [700, 900], "epochs": 60}]},
        ],
        "validation_tier": [900, 1000],
        "seed": 7,
        "batch_size": 200,
        "learning_rate": 0.001,
        "hidden_layers": [16, 8],
    }
    exp_path = out_root / "experiment.json"
    exp_path.write_text(json.dumps(experiment, indent=2))
    if tierflow(["train", "--config", str(exp_path), "--out", str(out_root / "train")]):
        return 1
    if tierflow(["diagnose", "--config", str(exp_path), "--delta", "10",
                 "--out", str(out_root / "diagnose")]):
        return 1

    report = json.loads((out_root / "train" / "report.json").read_text())
    print("\nbest validation metrics per arm:")
    for name, body in report["arms"].items():
        print(f"  {name}: loss {body['best_val_loss']:.4f}, "
              f"accuracy {body['best_val_accuracy']:.2f}")
    print(f"\nartifacts under {out_root}/")
    return 0


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
    sys.exit(run(target))
