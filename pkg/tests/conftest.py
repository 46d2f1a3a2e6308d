import pytest

from tierflow.data import SynthConfig, SynthTier, TierSpec, synth_generate
from tierflow.ftl import DataContext


def tiny_synth_config(seed: int = 5) -> SynthConfig:
    return SynthConfig(
        n_compounds=80,
        n_proteins=50,
        compound_bits=16,
        protein_bits=16,
        tiers=[
            SynthTier(TierSpec(300, 700), 400, 0.30),
            SynthTier(TierSpec(700, 900), 200, 0.05),
            SynthTier(TierSpec(900, 1000), 150, 0.0),
        ],
        validation_tier=TierSpec(900, 1000),
        seed=seed,
    )


@pytest.fixture(scope="session")
def tiny_ctx() -> DataContext:
    data = synth_generate(tiny_synth_config())
    return DataContext(
        interactions=data.interactions,
        compound_features=data.compounds.as_float_features(),
        protein_features=data.proteins.as_float_features(),
    )
