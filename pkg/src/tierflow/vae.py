"""Variational autoencoders compressing binary feature vectors to latents.

The encoder trunk is a ReLU stack; two parallel linear heads read the
posterior mean and log-variance off the trunk's last hidden layer; the
decoder mirrors the trunk widths in reverse and ends in a Sigmoid so
reconstructions live in (0, 1) like the input bits.  Downstream features
are always the posterior mean, never a sample.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .data import BitVectorStore, LatentStore
from .engine import (
    IDENTITY,
    RELU,
    SIGMOID,
    AdamState,
    DenseLayer,
    DenseNetwork,
    adam_step,
    backward_with_input,
    forward,
    init_network,
)
from .errors import DataError
from .rng import RngStream


@dataclass
class VaeConfig:
    input_dim: int
    encoder_hidden: tuple[int, ...]
    latent_dim: int
    epochs: int
    batch_size: int
    learning_rate: float

    def __post_init__(self):
        self.encoder_hidden = tuple(self.encoder_hidden)
        if self.latent_dim < 1:
            raise ValueError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if not self.encoder_hidden:
            raise ValueError("encoder_hidden must be non-empty")
        if self.input_dim < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("input_dim and batch_size must be >= 1, epochs >= 0")


def protein_preset() -> VaeConfig:
    """5508-bit protein domain vectors down to 128 latents."""
    return VaeConfig(5508, (2048, 512), 128, 500, 1000, 1e-4)


def chemical_preset() -> VaeConfig:
    """1024-bit compound fingerprints down to 64 latents."""
    return VaeConfig(1024, (256, 128), 64, 500, 1000, 1e-4)


@dataclass
class VaeModel:
    encoder_trunk: DenseNetwork
    mu_head: DenseLayer
    logvar_head: DenseLayer
    decoder: DenseNetwork

    def __post_init__(self):
        latent = self.mu_head.out_dim
        if self.logvar_head.out_dim != latent:
            raise ValueError("mu and logvar heads must share the latent width")
        if self.decoder.input_dim != latent:
            raise ValueError("decoder input width must equal the latent width")
        if self.decoder.layers[-1].activation != SIGMOID:
            raise ValueError("decoder must end in a Sigmoid output")

    @property
    def input_dim(self) -> int:
        return self.encoder_trunk.input_dim

    @property
    def latent_dim(self) -> int:
        return self.mu_head.out_dim

    def parameters(self) -> list[np.ndarray]:
        return (
            self.encoder_trunk.parameters()
            + self.mu_head.parameters()
            + self.logvar_head.parameters()
            + self.decoder.parameters()
        )

    def copy(self) -> "VaeModel":
        return VaeModel(
            self.encoder_trunk.copy(),
            self.mu_head.copy(),
            self.logvar_head.copy(),
            self.decoder.copy(),
        )


def build_vae(config: VaeConfig, rng: RngStream) -> VaeModel:
    """Trunk, twin linear heads, and a mirrored decoder, all seeded."""
    if config.latent_dim > config.input_dim:
        warnings.warn(
            f"latent_dim {config.latent_dim} exceeds input_dim {config.input_dim}; "
            "the model will not compress", stacklevel=2,
        )
    hidden = list(config.encoder_hidden)
    trunk = init_network(hidden, config.input_dim, [RELU] * len(hidden), rng)
    head_in = hidden[-1]
    mu_head = _init_head(config.latent_dim, head_in, rng)
    logvar_head = _init_head(config.latent_dim, head_in, rng)
    decoder_sizes = hidden[::-1] + [config.input_dim]
    decoder_acts = [RELU] * (len(decoder_sizes) - 1) + [SIGMOID]
    decoder = init_network(decoder_sizes, config.latent_dim, decoder_acts, rng)
    return VaeModel(trunk, mu_head, logvar_head, decoder)


def _init_head(out_dim: int, in_dim: int, rng: RngStream) -> DenseLayer:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    w = rng.uniform(-limit, limit, size=out_dim * in_dim).reshape(out_dim, in_dim)
    return DenseLayer(w, np.zeros(out_dim), IDENTITY)


def reparameterize(mu: np.ndarray, logvar: np.ndarray, rng: RngStream) -> np.ndarray:
    """z = mu + exp(logvar/2) * eta with eta ~ N(0, 1) from the stream."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ValueError(f"mu shape {mu.shape} != logvar shape {logvar.shape}")
    eta = rng.normal(mu.size).reshape(mu.shape)
    return mu + np.exp(0.5 * logvar) * eta


def vae_loss(
    reconstruction: np.ndarray,
    batch: np.ndarray,
    mu: np.ndarray,
    logvar: np.ndarray,
) -> tuple[float, float, float]:
    """(total, reconstruction term, KL term), each averaged over samples.

    Reconstruction is per-bit Bernoulli cross-entropy summed within a sample;
    KL is the closed form against a standard-normal prior,
    0.5 * sum(mu^2 + e^logvar - 1 - logvar).
    """
    x = np.asarray(batch, dtype=np.float64)
    r = np.asarray(reconstruction, dtype=np.float64)
    if r.shape != x.shape:
        raise ValueError(f"reconstruction shape {r.shape} != input shape {x.shape}")
    if not np.isin(x, (0.0, 1.0)).all():
        raise DataError("vae_loss input must be binary (0/1 entries)")
    n = x.shape[0]
    rc = np.clip(r, 1e-12, 1.0 - 1e-12)
    recon = float(-np.sum(x * np.log(rc) + (1.0 - x) * np.log1p(-rc)) / n)
    # expm1 keeps e^lv - 1 - lv >= 0 even for tiny logvar, where exp() would
    # round to 1.0 and drop below zero
    kl = float(0.5 * np.sum(mu**2 + (np.expm1(logvar) - logvar)) / n)
    return recon + kl, recon, kl


def _head_forward(layer: DenseLayer, h: np.ndarray) -> np.ndarray:
    return h @ layer.weights.T + layer.biases


@dataclass
class _VaeCache:
    trunk_acts: list[np.ndarray]
    mu: np.ndarray
    logvar: np.ndarray
    z: np.ndarray
    eta: np.ndarray
    decoder_acts: list[np.ndarray]


def _vae_forward(model: VaeModel, batch: np.ndarray, eta: np.ndarray) -> _VaeCache:
    trunk_acts = forward(model.encoder_trunk, batch)
    h = trunk_acts[-1]
    mu = _head_forward(model.mu_head, h)
    logvar = _head_forward(model.logvar_head, h)
    z = mu + np.exp(0.5 * logvar) * eta
    decoder_acts = forward(model.decoder, z)
    return _VaeCache(trunk_acts, mu, logvar, z, eta, decoder_acts)


def _vae_backward(
    model: VaeModel, cache: _VaeCache, batch: np.ndarray
) -> list[np.ndarray]:
    """Analytic gradients of the total loss, aligned with model.parameters()."""
    x = np.asarray(batch, dtype=np.float64)
    n = x.shape[0]
    recon = cache.decoder_acts[-1]
    rc = np.clip(recon, 1e-12, 1.0 - 1e-12)
    d_recon = (-(x / rc) + (1.0 - x) / (1.0 - rc)) / n

    dec_grads, d_z = backward_with_input(model.decoder, cache.decoder_acts, d_recon)

    # KL contributions (mean over batch)
    d_mu = d_z + cache.mu / n
    d_logvar = d_z * 0.5 * np.exp(0.5 * cache.logvar) * cache.eta
    d_logvar += 0.5 * np.expm1(cache.logvar) / n

    h = cache.trunk_acts[-1]
    mu_w_grad = d_mu.T @ h
    mu_b_grad = d_mu.sum(axis=0)
    lv_w_grad = d_logvar.T @ h
    lv_b_grad = d_logvar.sum(axis=0)
    d_h = d_mu @ model.mu_head.weights + d_logvar @ model.logvar_head.weights
    trunk_grads, _ = backward_with_input(model.encoder_trunk, cache.trunk_acts, d_h)

    return trunk_grads + [mu_w_grad, mu_b_grad, lv_w_grad, lv_b_grad] + dec_grads


@dataclass
class VaeEpochRecord:
    epoch: int
    recon_loss: float
    kl_loss: float
    total_loss: float
    total_change: float


@dataclass
class VaeTrainLog:
    records: list[VaeEpochRecord] = field(default_factory=list)

    def totals(self) -> np.ndarray:
        return np.array([r.total_loss for r in self.records])


def train_vae(
    config: VaeConfig, store: BitVectorStore, rng: RngStream
) -> tuple[VaeModel, VaeTrainLog]:
    """Train with Adam over shuffled mini-batches; the short final batch is kept.

    Logs the sample-weighted epoch mean of the total loss, its two terms, and
    the epoch-over-epoch change (0.0 for the first epoch).
    """
    if len(store) == 0:
        raise DataError("cannot train a VAE on an empty store")
    if store.width != config.input_dim:
        raise DataError(
            f"store width {store.width} does not match config input_dim {config.input_dim}"
        )
    x_all = np.stack([store.entries[k] for k in store.entries]).astype(np.float64)
    n = x_all.shape[0]
    model = build_vae(config, rng.spawn("init"))
    log = VaeTrainLog()
    if config.epochs == 0:
        return model, log

    params = model.parameters()
    adam = AdamState.create(params, config.learning_rate)
    prev_total = None
    for epoch in range(1, config.epochs + 1):
        order = rng.spawn("shuffle", epoch).permutation(n)
        noise = rng.spawn("noise", epoch)
        ep_recon = ep_kl = 0.0
        for at in range(0, n, config.batch_size):
            idx = order[at:at + config.batch_size]
            batch = x_all[idx]
            eta = noise.normal(batch.shape[0] * config.latent_dim).reshape(
                batch.shape[0], config.latent_dim
            )
            cache = _vae_forward(model, batch, eta)
            _, recon, kl = vae_loss(cache.decoder_acts[-1], batch, cache.mu, cache.logvar)
            grads = _vae_backward(model, cache, batch)
            adam_step(adam, params, grads)
            ep_recon += recon * batch.shape[0]
            ep_kl += kl * batch.shape[0]
        total = (ep_recon + ep_kl) / n
        change = 0.0 if prev_total is None else total - prev_total
        log.records.append(
            VaeEpochRecord(epoch, ep_recon / n, ep_kl / n, total, change)
        )
        prev_total = total
    return model, log


def embed(model: VaeModel, store: BitVectorStore) -> LatentStore:
    """Posterior means for every entry; deterministic, consumes no randomness."""
    if store.width != model.input_dim:
        raise DataError(
            f"store width {store.width} does not match model input_dim {model.input_dim}"
        )
    keys = list(store.entries)
    out: dict[str, np.ndarray] = {}
    for at in range(0, len(keys), 4096):
        chunk = keys[at:at + 4096]
        batch = np.stack([store.entries[k] for k in chunk]).astype(np.float64)
        h = forward(model.encoder_trunk, batch)[-1]
        mu = _head_forward(model.mu_head, h)
        for k, row in zip(chunk, mu):
            out[k] = row.copy()
    return LatentStore(out)


def _layer_doc(layer: DenseLayer) -> dict:
    return ckpt.network_to_dict(DenseNetwork([layer], layer.in_dim))


def save_vae(model: VaeModel, path) -> None:
    doc = {
        "vae": {
            "encoder_trunk": ckpt.network_to_dict(model.encoder_trunk),
            "mu_head": _layer_doc(model.mu_head),
            "logvar_head": _layer_doc(model.logvar_head),
            "decoder": ckpt.network_to_dict(model.decoder),
        }
    }
    Path(path).write_text(ckpt.dumps(doc) + "\n", encoding="utf-8")


def load_vae(path) -> VaeModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        body = doc["vae"]
        return VaeModel(
            encoder_trunk=ckpt.network_from_dict(body["encoder_trunk"]),
            mu_head=ckpt.network_from_dict(body["mu_head"]).layers[0],
            logvar_head=ckpt.network_from_dict(body["logvar_head"]).layers[0],
            decoder=ckpt.network_from_dict(body["decoder"]),
        )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed VAE checkpoint {path}: {exc}") from exc
