"""Dense feed-forward networks with hand-written forward/backward passes.

Matrices are float64 numpy arrays; a 2-D array with rows = samples and
cols = features plays the role of a batch, and layer weights are stored
(out x in) so the forward map is ``a @ W.T + b``.  Everything downstream
(VAE, tier trainer, diagnostics) builds on the functions here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .rng import RngStream

RELU = "relu"
SIGMOID = "sigmoid"
IDENTITY = "identity"
ACTIVATIONS = (RELU, SIGMOID, IDENTITY)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic: never overflows for finite input."""
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _apply_activation(z: np.ndarray, tag: str) -> np.ndarray:
    if tag == RELU:
        return np.maximum(z, 0.0)
    if tag == SIGMOID:
        return sigmoid(z)
    if tag == IDENTITY:
        return z
    raise ValueError(f"unknown activation {tag!r}")


def _activation_grad_from_output(a: np.ndarray, tag: str) -> np.ndarray:
    # Derivative expressed through the post-activation value (what forward keeps).
    if tag == RELU:
        return (a > 0.0).astype(np.float64)
    if tag == SIGMOID:
        return a * (1.0 - a)
    if tag == IDENTITY:
        return np.ones_like(a)
    raise ValueError(f"unknown activation {tag!r}")


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values in {what}")


@dataclass
class DenseLayer:
    """One fully connected layer: weights (out x in), biases (out,), activation tag."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.biases.shape != (self.weights.shape[0],):
            raise ValueError(
                f"bias length {self.biases.shape} does not match "
                f"{self.weights.shape[0]} output units"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    def parameters(self) -> list[np.ndarray]:
        return [self.weights, self.biases]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.biases.copy(), self.activation)


@dataclass
class DenseNetwork:
    """Ordered dense layers; layer i consumes layer i-1's output width."""

    layers: list[DenseLayer]
    input_dim: int

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        prev = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.in_dim != prev:
                raise ValueError(
                    f"layer {i} expects input width {layer.in_dim}, previous width is {prev}"
                )
            prev = layer.out_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list (layer 0 weights, layer 0 biases, layer 1 weights, ...)."""
        params: list[np.ndarray] = []
        for layer in self.layers:
            params.extend(layer.parameters())
        return params

    def copy(self) -> "DenseNetwork":
        return DenseNetwork([l.copy() for l in self.layers], self.input_dim)


def init_network(
    layer_sizes: list[int],
    input_dim: int,
    activation_plan: list[str] | None = None,
    rng: RngStream | None = None,
) -> DenseNetwork:
    """Build a network with Glorot-uniform weights and zero biases.

    Weights are drawn uniformly from +-sqrt(6 / (fan_in + fan_out)), row-major
    draw order, so a given seed fixes them exactly.  ``activation_plan``
    defaults to ReLU on hidden layers and Sigmoid on the last.
    """
    if not layer_sizes:
        raise ValueError("layer_sizes must be non-empty")
    if any(s < 1 for s in layer_sizes):
        raise ValueError(f"zero-size layer in {layer_sizes}")
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    if activation_plan is None:
        activation_plan = [RELU] * (len(layer_sizes) - 1) + [SIGMOID]
    if len(activation_plan) != len(layer_sizes):
        raise ValueError("activation_plan length must match layer_sizes")
    if rng is None:
        rng = RngStream(0)

    layers = []
    fan_in = input_dim
    for size, act in zip(layer_sizes, activation_plan):
        limit = np.sqrt(6.0 / (fan_in + size))
        w = rng.uniform(-limit, limit, size=size * fan_in).reshape(size, fan_in)
        layers.append(DenseLayer(w, np.zeros(size), act))
        fan_in = size
    return DenseNetwork(layers, input_dim)


def forward(net: DenseNetwork, batch: np.ndarray) -> list[np.ndarray]:
    """Run the batch through every layer.

    Returns the activation chain ``[input, a_1, ..., a_L]``; the last entry is
    the network output.  Keeping the chain is what lets ``backward`` avoid
    recomputation.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ValueError(f"batch must be 2-D, got shape {batch.shape}")
    if batch.shape[1] != net.input_dim:
        raise ValueError(
            f"batch has {batch.shape[1]} columns, network expects {net.input_dim}"
        )
    acts = [batch]
    a = batch
    for layer in net.layers:
        z = a @ layer.weights.T + layer.biases
        a = _apply_activation(z, layer.activation)
        acts.append(a)
    if a.size:
        _check_finite(a, "forward output")
    return acts


def bce_loss(predictions: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. the predictions.

    Predictions are clamped to [1e-12, 1 - 1e-12] before the logs; the
    gradient is evaluated at the clamped values.
    """
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions, {y.shape[0]} labels")
    if p.size == 0:
        raise ValueError("bce_loss needs at least one prediction")
    pc = np.clip(p, 1e-12, 1.0 - 1e-12)
    loss = float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log1p(-pc)))
    grad = (-(y / pc) + (1.0 - y) / (1.0 - pc)) / p.size
    return loss, grad.reshape(np.asarray(predictions).shape)


def backward(
    net: DenseNetwork, activations: list[np.ndarray], loss_gradient: np.ndarray
) -> list[np.ndarray]:
    """Backpropagate dLoss/dOutput through the network.

    ``activations`` is the chain produced by :func:`forward` on the same net;
    ``loss_gradient`` is the gradient w.r.t. the final (post-activation)
    output.  Returns gradients aligned with ``net.parameters()``.
    """
    grads, _ = backward_with_input(net, activations, loss_gradient)
    return grads


def backward_with_input(
    net: DenseNetwork, activations: list[np.ndarray], loss_gradient: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Like :func:`backward` but also returns dLoss/dInput (VAE chaining needs it)."""
    if len(activations) != len(net.layers) + 1:
        raise ValueError(
            f"activation chain has {len(activations)} entries, "
            f"expected {len(net.layers) + 1}"
        )
    delta = np.asarray(loss_gradient, dtype=np.float64)
    if delta.shape != activations[-1].shape:
        raise ValueError(
            f"loss gradient shape {delta.shape} does not match output "
            f"shape {activations[-1].shape}"
        )
    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        a_out = activations[i + 1]
        a_in = activations[i]
        if a_in.shape[1] != layer.in_dim:
            raise ValueError(f"stale activations at layer {i}")
        dz = delta * _activation_grad_from_output(a_out, layer.activation)
        grads[2 * i] = dz.T @ a_in
        grads[2 * i + 1] = dz.sum(axis=0)
        delta = dz @ layer.weights
    for g in grads:
        if g.size:
            _check_finite(g, "backward gradients")
    return grads, delta


@dataclass
class AdamState:
    """Adam moments and step counter for a flat list of parameter arrays."""

    t: int
    m: list[np.ndarray]
    v: list[np.ndarray]
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.t < 0:
            raise ValueError("step counter must be >= 0")

    @classmethod
    def create(
        cls,
        params: list[np.ndarray],
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> "AdamState":
        return cls(
            t=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update, in place, with bias-corrected moments.

    t is incremented before the update; the applied step is
    -lr * m_hat / (sqrt(v_hat) + eps).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and Adam moments must have equal length")
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if p.shape != m.shape or p.shape != v.shape:
            raise ValueError("Adam state shape does not mirror parameters")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        if p.size:
            _check_finite(p, "parameters after Adam step")
    return params, state


@dataclass
class WeightSnapshot:
    """Frozen copy of every layer's weights and biases, tagged for reports."""

    tag: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases lists must have equal length")

    @property
    def n_layers(self) -> int:
        return len(self.weights)


def take_snapshot(net: DenseNetwork, tag: str) -> WeightSnapshot:
    return WeightSnapshot(
        tag,
        [layer.weights.copy() for layer in net.layers],
        [layer.biases.copy() for layer in net.layers],
    )


def accuracy(predictions: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> float:
    """Percentage of correct threshold classifications; ties (p == threshold) go positive."""
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise ValueError("accuracy needs at least one prediction")
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions, {y.shape[0]} labels")
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    predicted = (p >= threshold).astype(np.float64)
    return float(100.0 * np.mean(predicted == y))
