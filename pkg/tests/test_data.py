import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tierflow.data import (
    BitVectorStore,
    InteractionRecord,
    InteractionTable,
    LabeledPair,
    LatentStore,
    SynthConfig,
    SynthTier,
    TierSpec,
    load_bitvectors,
    load_interactions,
    load_latents,
    make_features,
    percentile_cutoff,
    sample_negatives,
    save_bitvectors,
    save_interactions,
    save_latents,
    synth_generate,
    tier_filter,
)
from tierflow.errors import ConfigError, DataError
from tierflow.rng import RngStream
from conftest import tiny_synth_config


def table_of(scores, prefix="x"):
    return InteractionTable(
        [InteractionRecord(f"c{prefix}{i}", f"p{prefix}{i}", s) for i, s in enumerate(scores)]
    )


# ---------------------------------------------------------------- bit vectors


def test_bitvector_round_trip(tmp_path):
    store = BitVectorStore(4)
    store.add("a", np.array([1, 0, 1, 1]))
    store.add("b", np.array([0, 0, 0, 0]))
    store.add("c", np.array([1, 1, 1, 1]))
    path = tmp_path / "vecs.bits"
    save_bitvectors(store, path)
    loaded = load_bitvectors(path)
    assert loaded.width == 4
    assert set(loaded.entries) == {"a", "b", "c"}
    for key in store.entries:
        assert np.array_equal(loaded.entries[key], store.entries[key])


def test_bitvector_wrong_width_names_line(tmp_path):
    path = tmp_path / "bad.bits"
    path.write_text("#width=4\nok\t1010\nbad\t10101\n", encoding="utf-8")
    with pytest.raises(DataError, match=":3"):
        load_bitvectors(path)


def test_bitvector_empty_body(tmp_path):
    path = tmp_path / "empty.bits"
    path.write_text("#width=7\n", encoding="utf-8")
    store = load_bitvectors(path)
    assert store.width == 7
    assert len(store) == 0


@pytest.mark.parametrize(
    "body",
    [
        "#width=3\na\t102\n",  # non-01 character
        "#width=3\na\t101\na\t111\n",  # duplicate id
        "#width=3\na 101\n",  # missing tab
        "width=3\n",  # bad header
    ],
)
def test_bitvector_parse_errors(tmp_path, body):
    path = tmp_path / "bad.bits"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(DataError):
        load_bitvectors(path)


# ---------------------------------------------------------------- interactions


def test_interactions_round_trip(tmp_path):
    table = InteractionTable(
        [
            InteractionRecord("c1", "p1", 0),
            InteractionRecord("c1", "p2", 1000),
            InteractionRecord("c2", "p1", 451),
        ]
    )
    path = tmp_path / "table.tsv"
    save_interactions(table, path)
    assert load_interactions(path) == table


def test_interactions_duplicate_pair_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        InteractionTable(
            [InteractionRecord("c", "p", 10), InteractionRecord("c", "p", 20)]
        )


def test_interaction_score_range():
    with pytest.raises(ValueError):
        InteractionRecord("c", "p", 1001)


def test_interactions_parse_error_names_line(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("c\tp\t100\nc2\tp2\tnope\n", encoding="utf-8")
    with pytest.raises(DataError, match=":2"):
        load_interactions(path)


# ---------------------------------------------------------------- tiers


def test_tier_spec_validation():
    with pytest.raises(ValueError):
        TierSpec(700, 700)
    with pytest.raises(ValueError):
        TierSpec(-1, 500)
    with pytest.raises(ValueError):
        TierSpec(0, 1001)


def test_tier_filter_half_open():
    table = table_of([319, 389, 700, 900, 950])
    kept = tier_filter(table, TierSpec(700, 900))
    assert [r.score for r in kept.records] == [700]


def test_tier_filter_identity():
    table = table_of([5, 300, 999])
    assert tier_filter(table, TierSpec(0, 1000)) == table


def test_tier_filter_preserves_order():
    table = table_of([500, 100, 700, 200, 650])
    kept = tier_filter(table, TierSpec(100, 700))
    assert [r.score for r in kept.records] == [500, 100, 200, 650]


@settings(max_examples=60)
@given(
    st.lists(st.integers(min_value=0, max_value=1000), min_size=0, max_size=300),
    st.lists(st.integers(min_value=0, max_value=999), min_size=2, max_size=2, unique=True),
)
def test_tier_filter_union_property(scores, bounds):
    a, b = sorted(bounds)
    c = 1000
    table = table_of(scores)
    low = tier_filter(table, TierSpec(a, b)) if a < b else None
    mid = tier_filter(table, TierSpec(b, c))
    full = tier_filter(table, TierSpec(a, c))
    combined = (low.records if low else []) + mid.records
    assert sorted(r.pair for r in combined) == sorted(r.pair for r in full.records)
    assert len({r.pair for r in combined}) == len(combined)


# ---------------------------------------------------------------- percentiles


def brute_force_cutoff(scores, p):
    ordered = sorted(scores)
    k = max(1, math.ceil(p / 100.0 * len(ordered)))
    return ordered[k - 1]


def test_percentile_uniform_scores():
    table = table_of(range(1, 101))
    assert percentile_cutoff(table, 50) == brute_force_cutoff(range(1, 101), 50)


def test_percentile_single_record():
    assert percentile_cutoff(table_of([431]), 0) == 431


def test_percentile_empty_rejected():
    with pytest.raises(ValueError):
        percentile_cutoff(InteractionTable([]), 50)
    with pytest.raises(ValueError):
        percentile_cutoff(table_of([5]), 100)


@settings(max_examples=100)
@given(
    st.lists(st.integers(min_value=0, max_value=1000), min_size=1, max_size=200),
    st.floats(min_value=0, max_value=99.999),
)
def test_percentile_matches_brute_force(scores, p):
    assert percentile_cutoff(table_of(scores), p) == brute_force_cutoff(scores, p)


def test_percentile_reference_mapping():
    # 1000 records built so the 82nd/90th/98th percentile cutoffs land on
    # the documented 319/389/700 score boundaries
    rng = RngStream(2024)
    scores = (
        [int(s) for s in rng.uniform(0, 319, size=819)]
        + [319] + [int(s) for s in rng.uniform(320, 389, size=79)]
        + [389] + [int(s) for s in rng.uniform(390, 700, size=79)]
        + [700] + [int(s) for s in rng.uniform(701, 1000, size=20)]
    )
    order = rng.permutation(len(scores))
    table = table_of([scores[i] for i in order])
    assert len(table) == 1000
    assert percentile_cutoff(table, 82) == 319
    assert percentile_cutoff(table, 90) == 389
    assert percentile_cutoff(table, 98) == 700


# ---------------------------------------------------------------- negatives


def test_sample_negatives_exact_complement():
    positives = {("c0", "p0"), ("c1", "p1")}
    negs = sample_negatives(["c0", "c1"], ["p0", "p1"], positives, 2, RngStream(1))
    assert {n.pair for n in negs} == {("c0", "p1"), ("c1", "p0")}
    assert all(n.label == 0 and n.score is None for n in negs)


def test_sample_negatives_full_grid_rejected():
    positives = {("c0", "p0"), ("c0", "p1")}
    with pytest.raises(ValueError):
        sample_negatives(["c0"], ["p0", "p1"], positives, 1, RngStream(1))


def test_sample_negatives_deterministic():
    compounds = [f"c{i}" for i in range(10)]
    proteins = [f"p{i}" for i in range(10)]
    positives = {("c1", "p1"), ("c2", "p7")}
    a = sample_negatives(compounds, proteins, positives, 30, RngStream(5))
    b = sample_negatives(compounds, proteins, positives, 30, RngStream(5))
    assert [n.pair for n in a] == [n.pair for n in b]


def test_sample_negatives_distinct_and_clean():
    compounds = [f"c{i}" for i in range(20)]
    proteins = [f"p{i}" for i in range(15)]
    positives = {(f"c{i}", f"p{i}") for i in range(15)}
    negs = sample_negatives(compounds, proteins, positives, 200, RngStream(3))
    pairs = [n.pair for n in negs]
    assert len(set(pairs)) == 200
    assert not set(pairs) & positives


def test_sample_negatives_dense_regime():
    # request more than half the complement: exercises the enumeration path
    compounds = [f"c{i}" for i in range(4)]
    proteins = [f"p{i}" for i in range(4)]
    positives = {("c0", "p0")}
    negs = sample_negatives(compounds, proteins, positives, 14, RngStream(9))
    pairs = {n.pair for n in negs}
    assert len(pairs) == 14
    assert ("c0", "p0") not in pairs


# ---------------------------------------------------------------- features


def test_make_features_concatenation_order():
    compound_latents = LatentStore({"c": np.array([3.0])})
    protein_latents = LatentStore({"p": np.array([1.0, 2.0])})
    vec, label = make_features(LabeledPair("c", "p", 1, 950), compound_latents, protein_latents)
    assert np.array_equal(vec, np.array([1.0, 2.0, 3.0]))
    assert label == 1


def test_make_features_length():
    compound_latents = LatentStore({"c": np.zeros(64)})
    protein_latents = LatentStore({"p": np.zeros(128)})
    vec, _ = make_features(LabeledPair("c", "p", 0), compound_latents, protein_latents)
    assert vec.shape == (192,)


def test_make_features_unknown_id_named():
    compound_latents = LatentStore({"c": np.zeros(2)})
    protein_latents = LatentStore({"p": np.zeros(2)})
    with pytest.raises(DataError, match="ghost"):
        make_features(LabeledPair("ghost", "p", 0), compound_latents, protein_latents)


# ---------------------------------------------------------------- latent store io


def test_latents_round_trip(tmp_path):
    store = LatentStore({"a": np.array([1 / 3, -2.5]), "b": np.array([0.0, 1e-17])})
    path = tmp_path / "latents.tsv"
    save_latents(store, path)
    loaded = load_latents(path)
    for key in store.entries:
        assert np.array_equal(loaded.entries[key], store.entries[key])


def test_latents_width_consistency():
    with pytest.raises(ValueError):
        LatentStore({"a": np.zeros(2), "b": np.zeros(3)})


# ---------------------------------------------------------------- synth


def test_synth_counts_and_validation_clean():
    config = tiny_synth_config(seed=21)
    data = synth_generate(config)
    for synth_tier in config.tiers:
        got = tier_filter(data.interactions, synth_tier.tier)
        assert len(got) == synth_tier.count
    val = tier_filter(data.interactions, config.validation_tier)
    assert all(data.oracle[r.pair] == 1 for r in val.records)


def test_synth_exact_flip_counts():
    config = tiny_synth_config(seed=22)
    data = synth_generate(config)
    for synth_tier in config.tiers:
        records = tier_filter(data.interactions, synth_tier.tier).records
        false_positives = sum(1 - data.oracle[r.pair] for r in records)
        assert false_positives == round(synth_tier.flip_rate * synth_tier.count)


def test_synth_zero_flip_everywhere_means_all_true():
    config = SynthConfig(
        n_compounds=30, n_proteins=30, compound_bits=8, protein_bits=8,
        tiers=[SynthTier(TierSpec(0, 900), 100, 0.0), SynthTier(TierSpec(900, 1000), 50, 0.0)],
        validation_tier=TierSpec(900, 1000), seed=4,
    )
    data = synth_generate(config)
    assert all(data.oracle[r.pair] == 1 for r in data.interactions.records)


def test_synth_deterministic():
    a = synth_generate(tiny_synth_config(seed=7))
    b = synth_generate(tiny_synth_config(seed=7))
    assert a.interactions == b.interactions
    assert a.oracle == b.oracle


def test_synth_scores_stay_in_tier():
    data = synth_generate(tiny_synth_config(seed=8))
    config = tiny_synth_config(seed=8)
    for synth_tier in config.tiers:
        for rec in tier_filter(data.interactions, synth_tier.tier).records:
            assert synth_tier.tier.contains(rec.score)


def test_synth_config_rejects_overlapping_tiers():
    with pytest.raises(ConfigError, match="overlap"):
        SynthConfig(
            n_compounds=10, n_proteins=10, compound_bits=8, protein_bits=8,
            tiers=[SynthTier(TierSpec(0, 500), 10, 0.0), SynthTier(TierSpec(400, 1000), 10, 0.0)],
            validation_tier=TierSpec(400, 1000), seed=1,
        )


def test_synth_config_rejects_noisy_validation():
    with pytest.raises(ConfigError, match="validation"):
        SynthConfig(
            n_compounds=10, n_proteins=10, compound_bits=8, protein_bits=8,
            tiers=[SynthTier(TierSpec(900, 1000), 10, 0.5)],
            validation_tier=TierSpec(900, 1000), seed=1,
        )


def test_synth_rejects_oversized_request():
    with pytest.raises(ConfigError, match="true"):
        synth_generate(
            SynthConfig(
                n_compounds=5, n_proteins=5, compound_bits=8, protein_bits=8,
                tiers=[SynthTier(TierSpec(900, 1000), 1000, 0.0)],
                validation_tier=TierSpec(900, 1000), seed=1,
            )
        )
