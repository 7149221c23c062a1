"""
Minimal fully connected networks on flat parameter vectors.

A network is described by an MlpSpec. Its parameters live in one flat
float64 vector laid out layer by layer: the weight matrix of shape
``(fan_in, fan_out)`` in row-major order, then the bias of length
``fan_out``. Hidden layers apply the configured activation; the output
layer is affine.

Gradients of the mean squared error are computed by hand-written reverse
mode accumulation, so no autodiff framework is needed.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.special import erf

from padambench.errors import NonFiniteError, ShapeError
from padambench.prng import RngStream


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Activation(str, Enum):
    """Hidden-layer activation."""

    RELU = "relu"
    GELU = "gelu"
    IDENTITY = "identity"


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths ``[d_in, h_1, ..., h_L, d_out]`` plus hidden activation."""

    layer_widths: tuple[int, ...]
    activation: Activation = Activation.RELU

    def __post_init__(self) -> None:
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2:
            raise ShapeError(f"Need input and output widths, got {widths}")
        if any(w < 1 for w in widths):
            raise ShapeError(f"All layer widths must be >= 1, got {widths}")
        object.__setattr__(self, "layer_widths", widths)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def d_in(self) -> int:
        return self.layer_widths[0]

    @property
    def d_out(self) -> int:
        return self.layer_widths[-1]

    @property
    def param_count(self) -> int:
        return param_count(self)


@dataclass(frozen=True)
class Batch:
    """Mini-batch of ``J`` input rows and matching target rows."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if inputs.ndim != 2 or targets.ndim != 2:
            raise ShapeError(
                f"Batch arrays must be 2-D, got {inputs.shape} and {targets.shape}"
            )
        if inputs.shape[0] != targets.shape[0]:
            raise ShapeError(
                f"Row counts differ: {inputs.shape[0]} inputs, {targets.shape[0]} targets"
            )
        if inputs.shape[0] < 1:
            raise ShapeError("Batch must contain at least one sample")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    def rows(self, start: int, stop: int) -> "Batch":
        """Sub-batch of rows ``start:stop``."""
        return Batch(self.inputs[start:stop], self.targets[start:stop])


def param_count(spec: MlpSpec) -> int:
    """Number of trainable parameters, sum of (fan_in + 1) * fan_out."""
    widths = spec.layer_widths
    return sum((widths[i] + 1) * widths[i + 1] for i in range(len(widths) - 1))


def _layers(spec: MlpSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into (weight, bias) views."""
    params = np.asarray(params, dtype=np.float64)
    expected = param_count(spec)
    if params.ndim != 1 or params.shape[0] != expected:
        raise ShapeError(
            f"Parameter vector has shape {params.shape}, expected ({expected},)"
        )
    layers = []
    offset = 0
    widths = spec.layer_widths
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weight = params[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        bias = params[offset:offset + fan_out]
        offset += fan_out
        layers.append((weight, bias))
    return layers


def gelu(x):
    """Exact GELU, ``x * Phi(x)`` with Phi the standard normal CDF."""
    x = np.asarray(x, dtype=np.float64)
    value = x * 0.5 * (1.0 + erf(x * _INV_SQRT2))
    return float(value) if value.ndim == 0 else value


def _gelu_derivative(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


def _activate(activation: Activation, z: np.ndarray) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    if activation is Activation.GELU:
        return gelu(z)
    return z


def _activation_derivative(activation: Activation, z: np.ndarray) -> np.ndarray:
    if activation is Activation.RELU:
        # subgradient 0 at exactly 0
        return (z > 0.0).astype(np.float64)
    if activation is Activation.GELU:
        return _gelu_derivative(z)
    return np.ones_like(z)


def _check_inputs(spec: MlpSpec, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != spec.d_in:
        raise ShapeError(
            f"Inputs have shape {inputs.shape}, expected (J, {spec.d_in})"
        )
    return inputs


def init_params(spec: MlpSpec, stream: RngStream) -> np.ndarray:
    """
    Glorot-uniform weights and zero biases.

    Weights of a layer are drawn from U[-a, a) with
    ``a = sqrt(6 / (fan_in + fan_out))``, layer by layer in parameter order.
    """
    chunks = []
    widths = spec.layer_widths
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(stream.uniform(-limit, limit, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def forward(spec: MlpSpec, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Evaluate the network on a ``J x d_in`` input matrix."""
    layers = _layers(spec, params)
    a = _check_inputs(spec, inputs)
    last = len(layers) - 1
    with np.errstate(over="ignore", invalid="ignore"):
        for i, (weight, bias) in enumerate(layers):
            z = a @ weight + bias
            a = z if i == last else _activate(spec.activation, z)
    return a


def mse_loss_and_grad(
    spec: MlpSpec, params: np.ndarray, batch: Batch
) -> tuple[float, np.ndarray]:
    """
    Mean squared error over the batch and its exact parameter gradient.

    The loss is ``(1/J) * sum_j ||forward(x_j) - y_j||^2``.

    Raises:
        ShapeError: If params, inputs or targets do not fit the spec.
        NonFiniteError: If an intermediate becomes inf or NaN. ``step`` is
            the 1-based layer index (forward) or ``len(layers) + 1`` for the
            loss and gradient stage.
    """
    layers = _layers(spec, params)
    inputs = _check_inputs(spec, batch.inputs)
    targets = batch.targets
    if targets.shape[1] != spec.d_out:
        raise ShapeError(
            f"Targets have shape {targets.shape}, expected (J, {spec.d_out})"
        )
    n_samples = inputs.shape[0]
    last = len(layers) - 1

    with np.errstate(over="ignore", invalid="ignore"):
        activations = [inputs]
        preactivations = []
        a = inputs
        for i, (weight, bias) in enumerate(layers):
            z = a @ weight + bias
            a = z if i == last else _activate(spec.activation, z)
            if not np.all(np.isfinite(a)):
                raise NonFiniteError(f"Non-finite activation in layer {i + 1}", step=i + 1)
            preactivations.append(z)
            activations.append(a)

        residual = a - targets
        loss = float(np.sum(residual * residual) / n_samples)

        grads = []
        delta = (2.0 / n_samples) * residual
        for i in range(last, -1, -1):
            weight, _ = layers[i]
            grads.append(delta.sum(axis=0))
            grads.append((activations[i].T @ delta).ravel())
            if i > 0:
                delta = (delta @ weight.T) * _activation_derivative(
                    spec.activation, preactivations[i - 1]
                )
        grad = np.concatenate(grads[::-1])

    if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
        raise NonFiniteError("Non-finite loss or gradient", step=len(layers) + 1)
    return loss, grad


def mse_loss(spec: MlpSpec, params: np.ndarray, batch: Batch) -> float:
    """Mean squared error only; no finiteness check."""
    residual = forward(spec, params, batch.inputs) - batch.targets
    return float(np.sum(residual * residual) / batch.size)


def central_difference(
    fn: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-4
) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for j in range(x.shape[0]):
        original = x[j]
        x[j] = original + h
        f_plus = fn(x)
        x[j] = original - h
        f_minus = fn(x)
        x[j] = original
        grad[j] = (f_plus - f_minus) / (2.0 * h)
    return grad
