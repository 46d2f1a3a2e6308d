"""Feature stores, confidence tiers, negative sampling, and synthetic data.

File formats (UTF-8, LF):

* bit-vector store: first line ``#width=<int>``, then ``id<TAB><01-string>``
* interaction table: ``compound_id<TAB>protein_id<TAB>score`` with integer
  scores in [0, 1000], no header
* latent store: ``id<TAB>v1,v2,...`` with 17-significant-digit floats
* synthetic oracle: ``compound_id<TAB>protein_id<TAB>true_label``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import format_float
from .errors import ConfigError, DataError
from .rng import RngStream


@dataclass
class BitVectorStore:
    """Fixed-width binary feature vectors keyed by entity id."""

    width: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")
        for key, vec in self.entries.items():
            self._check_entry(key, vec)

    def _check_entry(self, key: str, vec: np.ndarray) -> None:
        if not key:
            raise ValueError("empty id in bit-vector store")
        if vec.shape != (self.width,):
            raise ValueError(
                f"vector for {key!r} has width {vec.shape}, store width is {self.width}"
            )

    def add(self, key: str, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.uint8)
        self._check_entry(key, vec)
        if key in self.entries:
            raise ValueError(f"duplicate id {key!r}")
        self.entries[key] = vec

    def __len__(self) -> int:
        return len(self.entries)

    def as_float_features(self) -> "LatentStore":
        """View the raw bits as float feature vectors (for no-VAE training)."""
        return LatentStore({k: v.astype(np.float64) for k, v in self.entries.items()})


@dataclass
class LatentStore:
    """Float feature vectors keyed by entity id, all the same length."""

    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        widths = {v.shape for v in self.entries.values()}
        if len(widths) > 1:
            raise ValueError(f"inconsistent vector widths in latent store: {widths}")

    @property
    def width(self) -> int:
        if not self.entries:
            raise ValueError("empty latent store has no width")
        return next(iter(self.entries.values())).shape[0]

    def __len__(self) -> int:
        return len(self.entries)


def _open_for_read(path: Path):
    try:
        return path.open(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def load_bitvectors(path: str | Path) -> BitVectorStore:
    """Parse a bit-vector file; errors carry the offending line number."""
    path = Path(path)
    with _open_for_read(path) as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#width="):
            raise DataError(f"{path}:1: expected '#width=<int>' header, got {header!r}")
        try:
            width = int(header[len("#width="):])
        except ValueError as exc:
            raise DataError(f"{path}:1: bad width in header {header!r}") from exc
        store = BitVectorStore(width)
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'id<TAB>bits'")
            key, bits = parts
            if len(bits) != width:
                raise DataError(
                    f"{path}:{lineno}: vector width {len(bits)} != header width {width}"
                )
            if bits.strip("01"):
                raise DataError(f"{path}:{lineno}: non-01 character in bit vector")
            if key in store.entries:
                raise DataError(f"{path}:{lineno}: duplicate id {key!r}")
            store.add(key, np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0"))
    return store


def save_bitvectors(store: BitVectorStore, path: str | Path) -> None:
    lines = [f"#width={store.width}"]
    for key, vec in store.entries.items():
        lines.append(key + "\t" + "".join("1" if b else "0" for b in vec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_latents(path: str | Path) -> LatentStore:
    path = Path(path)
    entries: dict[str, np.ndarray] = {}
    with _open_for_read(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'id<TAB>v1,v2,...'")
            key, values = parts
            if key in entries:
                raise DataError(f"{path}:{lineno}: duplicate id {key!r}")
            try:
                entries[key] = np.array([float(v) for v in values.split(",")])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad float: {exc}") from exc
    return LatentStore(entries)


def save_latents(store: LatentStore, path: str | Path) -> None:
    lines = [
        key + "\t" + ",".join(format_float(x) for x in vec)
        for key, vec in store.entries.items()
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


@dataclass(frozen=True)
class TierSpec:
    """Half-open confidence interval [lo, hi) over scores in [0, 1000]."""

    lo: int
    hi: int

    def __post_init__(self):
        if not (0 <= self.lo < self.hi <= 1000):
            raise ValueError(f"need 0 <= lo < hi <= 1000, got [{self.lo},{self.hi})")

    def contains(self, score: int) -> bool:
        return self.lo <= score < self.hi

    def overlaps(self, other: "TierSpec") -> bool:
        return self.lo < other.hi and other.lo < self.hi

    def __str__(self) -> str:
        return f"[{self.lo},{self.hi})"


@dataclass(frozen=True)
class InteractionRecord:
    compound_id: str
    protein_id: str
    score: int

    def __post_init__(self):
        if not (0 <= self.score <= 1000):
            raise ValueError(f"score {self.score} outside [0, 1000]")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.compound_id, self.protein_id)


@dataclass
class InteractionTable:
    """Positive interaction records; (compound, protein) pairs are unique."""

    records: list[InteractionRecord] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.pair in seen:
                raise ValueError(f"duplicate pair {rec.pair}")
            seen.add(rec.pair)

    def __len__(self) -> int:
        return len(self.records)

    def pairs(self) -> set[tuple[str, str]]:
        return {rec.pair for rec in self.records}

    def scores(self) -> np.ndarray:
        return np.array([rec.score for rec in self.records], dtype=np.int64)


def load_interactions(path: str | Path) -> InteractionTable:
    path = Path(path)
    records = []
    with _open_for_read(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            try:
                rec = InteractionRecord(parts[0], parts[1], int(parts[2]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            records.append(rec)
    try:
        return InteractionTable(records)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def save_interactions(table: InteractionTable, path: str | Path) -> None:
    lines = [f"{r.compound_id}\t{r.protein_id}\t{r.score}" for r in table.records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


@dataclass(frozen=True)
class LabeledPair:
    """A (compound, protein) example; negatives carry no confidence score."""

    compound_id: str
    protein_id: str
    label: int
    score: int | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.label == 0 and self.score is not None:
            raise ValueError("negative pairs carry no confidence score")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.compound_id, self.protein_id)


def tier_filter(table: InteractionTable, tier: TierSpec) -> InteractionTable:
    """Records with lo <= score < hi, original order preserved."""
    return InteractionTable([r for r in table.records if tier.contains(r.score)])


def percentile_cutoff(table: InteractionTable, percentile: float) -> int:
    """Empirical score cutoff for a percentile in [0, 100).

    Rule: the k-th smallest score (1-based) with k = max(1, ceil(p/100 * n)),
    i.e. the lowest score at or above which the top (100-p)% of records sit.
    """
    if len(table) == 0:
        raise ValueError("percentile_cutoff needs a non-empty table")
    if not (0.0 <= percentile < 100.0):
        raise ValueError(f"percentile must lie in [0, 100), got {percentile}")
    scores = table.scores()
    k = max(1, math.ceil(percentile / 100.0 * len(scores)))
    return int(np.partition(scores, k - 1)[k - 1])


def positive_pairs_of(table: InteractionTable) -> set[tuple[str, str]]:
    return table.pairs()


def sample_negatives(
    compounds: list[str],
    proteins: list[str],
    positives: set[tuple[str, str]],
    count: int,
    rng: RngStream,
) -> list[LabeledPair]:
    """Draw `count` distinct label-0 pairs uniformly from the non-positive grid.

    Rejection-samples against the positive set; when the request covers more
    than half the complement the complement is enumerated instead so the call
    terminates.  Both paths are deterministic given the stream.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    n_grid = len(compounds) * len(proteins)
    cset, pset = set(compounds), set(proteins)
    n_blocked = sum(1 for c, p in positives if c in cset and p in pset)
    complement = n_grid - n_blocked
    if count > complement:
        raise ValueError(
            f"cannot draw {count} negatives: only {complement} non-positive pairs exist"
        )
    chosen: list[LabeledPair] = []
    seen: set[tuple[str, str]] = set()

    if count > complement // 2:
        # dense regime: enumerate the complement once, then pick by permutation
        free = [
            (c, p) for c in compounds for p in proteins if (c, p) not in positives
        ]
        order = rng.permutation(len(free))[:count]
        return [LabeledPair(free[i][0], free[i][1], 0) for i in order]

    while len(chosen) < count:
        batch = max(64, 2 * (count - len(chosen)))
        ci = rng.integers(len(compounds), size=batch)
        pi = rng.integers(len(proteins), size=batch)
        for a, b in zip(ci, pi):
            pair = (compounds[a], proteins[b])
            if pair in positives or pair in seen:
                continue
            seen.add(pair)
            chosen.append(LabeledPair(pair[0], pair[1], 0))
            if len(chosen) == count:
                break
    return chosen


def make_features(
    pair: LabeledPair, compound_latents: LatentStore, protein_latents: LatentStore
) -> tuple[np.ndarray, int]:
    """Concatenate [protein features || compound features] for one pair."""
    if pair.protein_id not in protein_latents.entries:
        raise DataError(f"unknown protein id {pair.protein_id!r}")
    if pair.compound_id not in compound_latents.entries:
        raise DataError(f"unknown compound id {pair.compound_id!r}")
    vec = np.concatenate(
        [protein_latents.entries[pair.protein_id], compound_latents.entries[pair.compound_id]]
    )
    return vec, pair.label


@dataclass(frozen=True)
class SynthTier:
    tier: TierSpec
    count: int
    flip_rate: float

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"tier {self.tier} needs count >= 1")
        if not (0.0 <= self.flip_rate <= 1.0):
            raise ValueError(f"flip_rate must lie in [0, 1], got {self.flip_rate}")


@dataclass
class SynthConfig:
    """Desk-scale synthetic stand-in for a large noisy interaction dataset.

    A hidden linear-threshold rule over shared-index bit overlaps defines the
    true interactions; each tier emits `count` positive records of which
    round(flip_rate * count) are actually false (drawn from true negatives).
    The tier matching `validation_tier` must be noise-free.
    """

    n_compounds: int
    n_proteins: int
    compound_bits: int
    protein_bits: int
    tiers: list[SynthTier]
    validation_tier: TierSpec
    seed: int
    bit_density: float = 0.5
    true_rate: float = 0.2

    def __post_init__(self):
        if min(self.n_compounds, self.n_proteins) < 1:
            raise ConfigError("need at least one compound and one protein")
        if min(self.compound_bits, self.protein_bits) < 1:
            raise ConfigError("bit widths must be >= 1")
        if not self.tiers:
            raise ConfigError("at least one tier is required")
        for i, a in enumerate(self.tiers):
            for b in self.tiers[i + 1:]:
                if a.tier.overlaps(b.tier):
                    raise ConfigError(f"tiers {a.tier} and {b.tier} overlap")
        val = [t for t in self.tiers if t.tier == self.validation_tier]
        if not val:
            raise ConfigError(f"validation tier {self.validation_tier} not among tiers")
        if val[0].flip_rate != 0.0:
            raise ConfigError("validation tier must have flip_rate 0")
        if not (0.0 < self.true_rate < 1.0):
            raise ConfigError(f"true_rate must lie in (0, 1), got {self.true_rate}")
        if not (0.0 < self.bit_density < 1.0):
            raise ConfigError(f"bit_density must lie in (0, 1), got {self.bit_density}")


@dataclass
class SynthData:
    compounds: BitVectorStore
    proteins: BitVectorStore
    interactions: InteractionTable
    oracle: dict[tuple[str, str], int]


def _random_bits(rng: RngStream, n: int, width: int, density: float) -> np.ndarray:
    return (rng.uniform(size=n * width) < density).astype(np.uint8).reshape(n, width)


def synth_generate(config: SynthConfig) -> SynthData:
    """Generate stores, a tiered positive table, and the ground-truth oracle."""
    root = RngStream(config.seed)
    compound_ids = [f"C{i:06d}" for i in range(config.n_compounds)]
    protein_ids = [f"P{j:06d}" for j in range(config.n_proteins)]

    cbits = _random_bits(
        root.spawn("compound-bits"), config.n_compounds, config.compound_bits,
        config.bit_density,
    )
    pbits = _random_bits(
        root.spawn("protein-bits"), config.n_proteins, config.protein_bits,
        config.bit_density,
    )

    # Hidden rule: signed weights over the shared low bit indices; a pair is a
    # true interaction when the weighted count of overlapping set bits clears
    # a threshold chosen to hit true_rate over the whole grid.
    shared = min(config.compound_bits, config.protein_bits)
    w = root.spawn("rule-weights").normal(shared)
    scores = (cbits[:, :shared].astype(np.float64) * w) @ pbits[:, :shared].astype(np.float64).T
    n_pairs = scores.size
    n_true_target = max(1, min(n_pairs - 1, round(config.true_rate * n_pairs)))
    flat = scores.ravel()
    threshold = np.partition(flat, n_pairs - n_true_target)[n_pairs - n_true_target]
    truth = scores >= threshold

    true_pool = np.flatnonzero(truth.ravel())
    false_pool = np.flatnonzero(~truth.ravel())
    true_pool = true_pool[root.spawn("true-pool").permutation(len(true_pool))]
    false_pool = false_pool[root.spawn("false-pool").permutation(len(false_pool))]

    need_true = sum(t.count - round(t.flip_rate * t.count) for t in config.tiers)
    need_false = sum(round(t.flip_rate * t.count) for t in config.tiers)
    if need_true > len(true_pool):
        raise ConfigError(
            f"tiers request {need_true} true positives, grid only has {len(true_pool)}"
        )
    if need_false > len(false_pool):
        raise ConfigError(
            f"tiers request {need_false} flipped positives, grid only has {len(false_pool)}"
        )

    def pair_of(flat_idx: int) -> tuple[str, str]:
        return (
            compound_ids[flat_idx // config.n_proteins],
            protein_ids[flat_idx % config.n_proteins],
        )

    records: list[InteractionRecord] = []
    t_at, f_at = 0, 0
    for tier_idx, synth_tier in enumerate(config.tiers):
        n_flip = round(synth_tier.flip_rate * synth_tier.count)
        n_keep = synth_tier.count - n_flip
        members = [pair_of(i) for i in true_pool[t_at:t_at + n_keep]]
        members += [pair_of(i) for i in false_pool[f_at:f_at + n_flip]]
        t_at += n_keep
        f_at += n_flip
        lo, hi = synth_tier.tier.lo, synth_tier.tier.hi
        tier_scores = lo + root.spawn("scores", tier_idx).integers(hi - lo, size=len(members))
        records.extend(
            InteractionRecord(c, p, int(s)) for (c, p), s in zip(members, tier_scores)
        )

    oracle = {
        (compound_ids[i], protein_ids[j]): int(truth[i, j])
        for i in range(config.n_compounds)
        for j in range(config.n_proteins)
    }
    return SynthData(
        compounds=BitVectorStore(
            config.compound_bits, dict(zip(compound_ids, cbits))
        ),
        proteins=BitVectorStore(config.protein_bits, dict(zip(protein_ids, pbits))),
        interactions=InteractionTable(records),
        oracle=oracle,
    )


def save_oracle(oracle: dict[tuple[str, str], int], path: str | Path) -> None:
    lines = [f"{c}\t{p}\t{label}" for (c, p), label in sorted(oracle.items())]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_oracle(path: str | Path) -> dict[tuple[str, str], int]:
    oracle: dict[tuple[str, str], int] = {}
    with _open_for_read(Path(path)) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: expected 'compound<TAB>protein<TAB>0|1'")
            oracle[(parts[0], parts[1])] = int(parts[2])
    return oracle
