"""
Stochastic optimization problems with samplers and test-error oracles.

Each problem draws mini-batches from an RngStream, evaluates the batch
mean loss and its exact gradient, and scores an iterate with a Monte Carlo
(or closed-form) test error. Samplers consume the stream in a fixed order,
inputs first and noise second, so replays are exact.

Registered problems:
    quadratic      minimize E||theta - X||^2, X ~ N(0, I_d)
    polyreg        degree-25 polynomial fit of sin(pi x) from noisy samples
    gauss_density  ReLU network fit of exp(-||x||^2 / (2 sigma^2)) on [-2, 2]^d
    heat_dkm       deep Kolmogorov method for u_t = Laplace(u), u(0, x) = ||x||^2
"""

import math
from typing import Callable, Protocol, runtime_checkable

import numpy as np
from numpy.polynomial import polynomial as P

from padambench import nn
from padambench.errors import DegenerateReferenceError, InvalidRangeError, ShapeError
from padambench.nn import Activation, Batch, MlpSpec
from padambench.prng import RngStream
from padambench.registry import register_problem

DEFAULT_MC_SAMPLES = 10_000


@runtime_checkable
class StochasticObjective(Protocol):
    """Interface the optimizers and the harness rely on."""

    name: str
    param_dim: int

    def init_params(self, stream: RngStream) -> np.ndarray: ...

    def sample_batch(self, stream: RngStream, size: int) -> Batch: ...

    def loss(self, params: np.ndarray, batch: Batch) -> float: ...

    def grad(self, params: np.ndarray, batch: Batch) -> np.ndarray: ...

    def test_error(self, params: np.ndarray, stream: RngStream, samples: int) -> float: ...


def _check_size(size: int) -> None:
    if size < 1:
        raise InvalidRangeError(f"Batch size must be >= 1, got {size}")


def relative_l2_error(
    model: Callable[[np.ndarray], np.ndarray],
    exact: Callable[[np.ndarray], np.ndarray],
    domain_sampler: Callable[[RngStream, int], np.ndarray],
    samples: int,
    stream: RngStream,
) -> float:
    """
    Monte Carlo estimate of ``||model - exact||_L2 / ||exact||_L2``.

    Args:
        model: Maps an ``M x d`` sample matrix to ``M`` model values.
        exact: Maps the same matrix to ``M`` reference values.
        domain_sampler: Draws ``M`` points of the domain from a stream.
        samples: Number of Monte Carlo points M.
        stream: Source of the domain samples.

    Raises:
        DegenerateReferenceError: If the reference vanishes on every sample.
    """
    if samples < 1:
        raise InvalidRangeError(f"Need at least one Monte Carlo sample, got {samples}")
    points = domain_sampler(stream, samples)
    reference = np.ravel(exact(points))
    with np.errstate(over="ignore", invalid="ignore"):
        difference = np.ravel(model(points)) - reference
        numerator = float(np.sum(difference * difference))
    denominator = float(np.sum(reference * reference))
    if denominator == 0.0:
        raise DegenerateReferenceError("Reference function is zero on all samples")
    return math.sqrt(numerator / denominator)


def rms_l2_error(
    model: Callable[[np.ndarray], np.ndarray],
    exact: Callable[[np.ndarray], np.ndarray],
    domain_sampler: Callable[[RngStream, int], np.ndarray],
    samples: int,
    stream: RngStream,
) -> float:
    """Monte Carlo estimate of the L2 error normalized by the domain volume."""
    if samples < 1:
        raise InvalidRangeError(f"Need at least one Monte Carlo sample, got {samples}")
    points = domain_sampler(stream, samples)
    with np.errstate(over="ignore", invalid="ignore"):
        difference = np.ravel(model(points)) - np.ravel(exact(points))
        return math.sqrt(float(np.mean(difference * difference)))


def _cube_sampler(half_width: float, dim: int) -> Callable[[RngStream, int], np.ndarray]:
    def sample(stream: RngStream, size: int) -> np.ndarray:
        return stream.uniform(-half_width, half_width, size=(size, dim))

    return sample


# Quadratic


def quadratic_grad(params: np.ndarray, batch: Batch) -> np.ndarray:
    """Gradient of the batch mean of ||theta - X||^2: ``2 (theta - mean X)``."""
    params = np.asarray(params, dtype=np.float64)
    if batch.inputs.shape[1] != params.shape[0]:
        raise ShapeError(
            f"Samples have dimension {batch.inputs.shape[1]}, params {params.shape[0]}"
        )
    return 2.0 * (params - batch.inputs.mean(axis=0))


@register_problem
class QuadraticProblem:
    """Minimize E||theta - X||^2 for standard normal X; optimum theta = 0."""

    name = "quadratic"

    def __init__(self, dim: int = 10):
        if dim < 1:
            raise ShapeError(f"Dimension must be >= 1, got {dim}")
        self.dim = dim
        self.param_dim = dim

    def init_params(self, stream: RngStream) -> np.ndarray:
        return stream.standard_normal(size=self.dim)

    def sample_batch(self, stream: RngStream, size: int) -> Batch:
        _check_size(size)
        inputs = stream.standard_normal(size=(size, self.dim))
        return Batch(inputs, np.zeros((size, 0)))

    def loss(self, params: np.ndarray, batch: Batch) -> float:
        residual = np.asarray(params, dtype=np.float64) - batch.inputs
        return float(np.mean(np.sum(residual * residual, axis=1)))

    def grad(self, params: np.ndarray, batch: Batch) -> np.ndarray:
        return quadratic_grad(params, batch)

    def test_error(self, params: np.ndarray, stream: RngStream = None, samples: int = 0) -> float:
        """Closed form ``(1/d) ||theta||^2``; stream and samples are unused."""
        params = np.asarray(params, dtype=np.float64)
        return float(np.dot(params, params) / self.dim)


# Polynomial regression


def polyreg_model(theta: np.ndarray, x):
    """Evaluate ``sum_k theta_k x**k`` by Horner's scheme."""
    value = P.polyval(x, np.asarray(theta, dtype=np.float64))
    return float(value) if np.ndim(value) == 0 else value


def polyreg_sample(stream: RngStream, size: int, noise_var: float = 0.2) -> Batch:
    """Inputs ``x ~ U(-1, 1)``, targets ``sin(pi x) + sqrt(noise_var) * Z``."""
    _check_size(size)
    x = stream.uniform(-1.0, 1.0, size=size)
    noise = stream.standard_normal(size=size)
    targets = np.sin(math.pi * x) + math.sqrt(noise_var) * noise
    return Batch(x[:, None], targets[:, None])


def _sine_target(points: np.ndarray) -> np.ndarray:
    return np.sin(math.pi * points[:, 0])


@register_problem
class PolyRegProblem:
    """Least-squares fit of sin(pi x) on [-1, 1] by monomials up to ``degree``."""

    name = "polyreg"

    def __init__(self, degree: int = 25, noise_var: float = 0.2):
        if degree < 0:
            raise ShapeError(f"Degree must be >= 0, got {degree}")
        if noise_var < 0.0:
            raise InvalidRangeError(f"Noise variance must be >= 0, got {noise_var}")
        self.degree = degree
        self.noise_var = noise_var
        self.param_dim = degree + 1

    def init_params(self, stream: RngStream) -> np.ndarray:
        return np.zeros(self.param_dim)

    def sample_batch(self, stream: RngStream, size: int) -> Batch:
        return polyreg_sample(stream, size, self.noise_var)

    def _residual(self, params: np.ndarray, batch: Batch) -> np.ndarray:
        return polyreg_model(params, batch.inputs[:, 0]) - batch.targets[:, 0]

    def loss(self, params: np.ndarray, batch: Batch) -> float:
        residual = self._residual(params, batch)
        return float(np.mean(residual * residual))

    def grad(self, params: np.ndarray, batch: Batch) -> np.ndarray:
        residual = self._residual(params, batch)
        vandermonde = np.vander(batch.inputs[:, 0], self.param_dim, increasing=True)
        return (2.0 / batch.size) * (vandermonde.T @ residual)

    def test_error(
        self, params: np.ndarray, stream: RngStream, samples: int = DEFAULT_MC_SAMPLES
    ) -> float:
        """Relative L2([-1, 1]) error against the noiseless target."""
        return relative_l2_error(
            lambda points: polyreg_model(params, points[:, 0]),
            _sine_target,
            _cube_sampler(1.0, 1),
            samples,
            stream,
        )


class _MlpProblem:
    """Shared pieces of the network-based problems."""

    spec: MlpSpec

    @property
    def param_dim(self) -> int:
        return self.spec.param_count

    def init_params(self, stream: RngStream) -> np.ndarray:
        return nn.init_params(self.spec, stream)

    def model(self, params: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        return lambda points: nn.forward(self.spec, params, points)[:, 0]

    def loss(self, params: np.ndarray, batch: Batch) -> float:
        return nn.mse_loss(self.spec, params, batch)

    def grad(self, params: np.ndarray, batch: Batch) -> np.ndarray:
        _, grad = nn.mse_loss_and_grad(self.spec, params, batch)
        return grad


# Gaussian density


@register_problem
class GaussianDensityProblem(_MlpProblem):
    """Supervised fit of ``exp(-||x||^2 / (2 sigma^2))`` for x ~ U([-2, 2]^d)."""

    name = "gauss_density"

    def __init__(self, dim: int = 5, widths: tuple[int, ...] = (32, 32), sigma2: float = 3.0):
        if sigma2 <= 0.0:
            raise InvalidRangeError(f"sigma^2 must be > 0, got {sigma2}")
        self.dim = dim
        self.sigma2 = sigma2
        self.spec = MlpSpec((dim, *widths, 1), Activation.RELU)
        self._sampler = _cube_sampler(2.0, dim)

    def exact(self, points: np.ndarray) -> np.ndarray:
        return np.exp(-np.sum(points * points, axis=1) / (2.0 * self.sigma2))

    def sample_batch(self, stream: RngStream, size: int) -> Batch:
        _check_size(size)
        inputs = self._sampler(stream, size)
        return Batch(inputs, self.exact(inputs)[:, None])

    def test_error(
        self, params: np.ndarray, stream: RngStream, samples: int = DEFAULT_MC_SAMPLES
    ) -> float:
        """L2([-2, 2]^d) error normalized by the cube volume."""
        return rms_l2_error(self.model(params), self.exact, self._sampler, samples, stream)


# Heat equation via the deep Kolmogorov method


def exact_heat_solution(x, t: float, d: int | None = None):
    """
    ``u(t, x) = ||x||^2 + 2 d t`` for the heat equation with u(0, x) = ||x||^2.

    ``x`` is one point or an ``M x d`` matrix of points.
    """
    x = np.asarray(x, dtype=np.float64)
    if d is None:
        d = x.shape[-1]
    value = np.sum(x * x, axis=-1) + 2.0 * d * t
    return float(value) if np.ndim(value) == 0 else value


def heat_dkm_sample(stream: RngStream, size: int, d: int, horizon: float) -> Batch:
    """
    Base points ``xi ~ U([-1, 1]^d)`` and terminal values
    ``||xi + sqrt(2 T) Z||^2`` with Z standard normal in R^d.
    """
    _check_size(size)
    base = stream.uniform(-1.0, 1.0, size=(size, d))
    return Batch(base, heat_terminal_values(stream, base, horizon)[:, None])


def heat_terminal_values(stream: RngStream, base: np.ndarray, horizon: float) -> np.ndarray:
    """``||xi + sqrt(2 T) Z||^2`` for each row xi of ``base``, one fresh Z per row."""
    base = np.asarray(base, dtype=np.float64)
    noise = stream.standard_normal(size=base.shape)
    endpoint = base + math.sqrt(2.0 * horizon) * noise
    return np.sum(endpoint * endpoint, axis=1)


@register_problem
class HeatDkmProblem(_MlpProblem):
    """Approximate u(T, .) on [-1, 1]^d by regressing terminal values on base points."""

    name = "heat_dkm"

    def __init__(self, dim: int = 5, widths: tuple[int, ...] = (32, 32), horizon: float = 2.0):
        if horizon < 0.0:
            raise InvalidRangeError(f"Time horizon must be >= 0, got {horizon}")
        self.dim = dim
        self.horizon = horizon
        self.spec = MlpSpec((dim, *widths, 1), Activation.GELU)

    def exact(self, points: np.ndarray) -> np.ndarray:
        return exact_heat_solution(points, self.horizon, self.dim)

    def sample_batch(self, stream: RngStream, size: int) -> Batch:
        return heat_dkm_sample(stream, size, self.dim, self.horizon)

    def test_error(
        self, params: np.ndarray, stream: RngStream, samples: int = DEFAULT_MC_SAMPLES
    ) -> float:
        """Relative L2([-1, 1]^d) error against the closed-form solution."""
        return relative_l2_error(
            self.model(params), self.exact, _cube_sampler(1.0, self.dim), samples, stream
        )
