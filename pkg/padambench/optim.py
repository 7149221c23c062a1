"""
Optimizer state machines on flat parameter vectors.

Every step function is pure: it takes the current state, parameters and
an already batch-averaged gradient and returns new arrays. The driver
(see padambench.drivers) decides where gradients are evaluated.

The Adam recursion follows the adaptive-moment process exactly, including
the placement of eps outside the square root::

    m_n   = alpha * m_{n-1} + (1 - alpha) * g
    v_n   = beta  * v_{n-1} + (1 - beta)  * g**2
    theta = theta - lr * (m_n / (1 - alpha**n)) / (eps + sqrt(v_n / (1 - beta**n)))

PADAM keeps K exponential moving averages ("channels") of the raw Adam
iterate, each with its own weight schedule, and periodically picks the
channel with the smallest loss on fresh, disjoint batches.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Protocol, Sequence

import numpy as np

from padambench.errors import (
    InvalidHyperParameterError,
    InvalidRangeError,
    NonFiniteError,
    ScheduleDomainError,
    SelectionError,
    ShapeError,
)
from padambench.nn import Batch
from padambench.prng import RngStream

logger = logging.getLogger(__name__)

_LN10 = math.log(10.0)


@dataclass(frozen=True)
class HyperParams:
    """Constant hyperparameters shared by all optimizers."""

    alpha: float = 0.9
    beta: float = 0.999
    eps: float = 1e-8
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.01

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "momentum"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise InvalidHyperParameterError(
                    f"{name} must lie in [0, 1), got {value}", key=name
                )
        if not self.eps > 0.0:
            raise InvalidHyperParameterError(f"eps must be > 0, got {self.eps}", key="eps")
        if not (self.lr > 0.0 and math.isfinite(self.lr)):
            raise InvalidHyperParameterError(
                f"lr must be finite and > 0, got {self.lr}", key="lr"
            )
        if not self.weight_decay >= 0.0:
            raise InvalidHyperParameterError(
                f"weight_decay must be >= 0, got {self.weight_decay}", key="weight_decay"
            )


@dataclass(frozen=True)
class AdamState:
    """First/second moments, step counter and running decay products."""

    m: np.ndarray
    v: np.ndarray
    n: int = 0
    prod_alpha: float = 1.0
    prod_beta: float = 1.0

    @classmethod
    def initial(cls, dim: int) -> "AdamState":
        return cls(m=np.zeros(dim), v=np.zeros(dim))


def _as_vector(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


def _check_lengths(params: np.ndarray, other: np.ndarray, what: str = "grad") -> None:
    if params.shape != other.shape or params.ndim != 1:
        raise ShapeError(
            f"Length mismatch: params {params.shape} vs {what} {other.shape}"
        )


def _check_finite_grad(grad: np.ndarray, step: int | None) -> None:
    if not np.all(np.isfinite(grad)):
        where = "" if step is None else f" at step {step}"
        raise NonFiniteError(f"Non-finite gradient{where}", step=step)


def _check_finite_params(params: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(params)):
        raise NonFiniteError(f"Non-finite parameters after step {step}", step=step)


def sgd_step(params: np.ndarray, grad: np.ndarray, hp: HyperParams) -> np.ndarray:
    """Plain SGD, ``params - lr * grad``."""
    params, grad = _as_vector(params), _as_vector(grad)
    _check_lengths(params, grad)
    _check_finite_grad(grad, step=None)
    return params - hp.lr * grad


def momentum_sgd_step(
    velocity: np.ndarray, params: np.ndarray, grad: np.ndarray, hp: HyperParams
) -> tuple[np.ndarray, np.ndarray]:
    """Heavy-ball SGD: ``v = momentum * v + grad``, ``params -= lr * v``."""
    velocity, params, grad = _as_vector(velocity), _as_vector(params), _as_vector(grad)
    _check_lengths(params, grad)
    _check_lengths(params, velocity, what="velocity")
    _check_finite_grad(grad, step=None)
    velocity = hp.momentum * velocity + grad
    return velocity, params - hp.lr * velocity


def adam_step(
    state: AdamState, params: np.ndarray, grad: np.ndarray, hp: HyperParams
) -> tuple[AdamState, np.ndarray]:
    """
    One step of the Adam recursion with bias correction.

    Args:
        state: Moments and decay products before the step.
        params: Current iterate.
        grad: Batch-averaged gradient evaluated at ``params``.
        hp: Hyperparameters (alpha, beta, eps, lr are used).

    Returns:
        The advanced state and the new iterate.

    Raises:
        ShapeError: If the vectors differ in length.
        InvalidHyperParameterError: If a bias-correction factor is zero.
        NonFiniteError: If the gradient or the new iterate is not finite.
    """
    params, grad = _as_vector(params), _as_vector(grad)
    _check_lengths(params, grad)
    _check_lengths(params, state.m, what="state")
    n = state.n + 1
    _check_finite_grad(grad, step=n)

    alpha, beta = hp.alpha, hp.beta
    prod_alpha = state.prod_alpha * alpha
    prod_beta = state.prod_beta * beta
    if prod_alpha == 1.0 or prod_beta == 1.0:
        raise InvalidHyperParameterError(
            f"Bias correction divides by zero at step {n} (alpha={alpha}, beta={beta})"
        )

    m = alpha * state.m + (1.0 - alpha) * grad
    v = beta * state.v + (1.0 - beta) * (grad * grad)
    m_hat = m / (1.0 - prod_alpha)
    v_hat = v / (1.0 - prod_beta)
    new_params = params - hp.lr * m_hat / (hp.eps + np.sqrt(v_hat))
    _check_finite_params(new_params, step=n)

    return AdamState(m=m, v=v, n=n, prod_alpha=prod_alpha, prod_beta=prod_beta), new_params


def adamw_step(
    state: AdamState, params: np.ndarray, grad: np.ndarray, hp: HyperParams
) -> tuple[AdamState, np.ndarray]:
    """Adam followed by decoupled weight decay on the pre-update iterate."""
    params = _as_vector(params)
    state, new_params = adam_step(state, params, grad, hp)
    if hp.weight_decay:
        new_params = new_params - hp.lr * hp.weight_decay * params
    return state, new_params


class ChannelKind(str, Enum):
    """Closed forms of an averaging-weight schedule."""

    CONSTANT = "constant"
    POLYNOMIAL_GAP = "polynomial_gap"
    EXP_DECAY_GAP = "exp_decay_gap"


@dataclass(frozen=True)
class ChannelSpec:
    """
    Averaging-weight schedule of one channel.

    ``CONSTANT``:        delta_n = c
    ``POLYNOMIAL_GAP``:  delta_n = 1 - c * n ** (-rate)
    ``EXP_DECAY_GAP``:   delta_n = 1 - c * exp(-rate * n * ln(10) / N)

    With ``clamp`` the value is forced into [0, 1) instead of being
    rejected. When ``horizon`` (N) is set, the schedule is validated for
    every n in 1..N at construction.
    """

    kind: ChannelKind
    c: float
    rate: float = 0.0
    horizon: int | None = None
    clamp: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if self.horizon is not None:
            if self.horizon < 1:
                raise InvalidRangeError(f"Horizon must be >= 1, got {self.horizon}")
            _validate_schedule(self, self.horizon)

    def bind(self, horizon: int) -> "ChannelSpec":
        """Copy of this spec validated against ``horizon`` steps."""
        return replace(self, horizon=horizon)

    def to_dict(self) -> dict:
        data = {"kind": self.kind.value, "c": self.c}
        if self.kind is ChannelKind.POLYNOMIAL_GAP:
            data["p"] = self.rate
        elif self.kind is ChannelKind.EXP_DECAY_GAP:
            data["r"] = self.rate
        if self.clamp:
            data["clamp"] = True
        return data

    @classmethod
    def from_dict(cls, data: dict, horizon: int | None = None) -> "ChannelSpec":
        kind = ChannelKind(data["kind"])
        rate = data.get("p", data.get("r", 0.0))
        return cls(
            kind=kind,
            c=float(data["c"]),
            rate=float(rate),
            horizon=horizon,
            clamp=bool(data.get("clamp", False)),
        )


def _raw_deltas(spec: ChannelSpec, n: np.ndarray, horizon: int | None) -> np.ndarray:
    if spec.kind is ChannelKind.CONSTANT:
        return np.full(n.shape, float(spec.c))
    if spec.kind is ChannelKind.POLYNOMIAL_GAP:
        return 1.0 - spec.c * n ** (-spec.rate)
    if horizon is None:
        raise InvalidRangeError("EXP_DECAY_GAP schedules need the total step count N")
    return 1.0 - spec.c * np.exp(-spec.rate * n * _LN10 / horizon)


def _clamp_delta(delta: float) -> float:
    return min(max(delta, 0.0), math.nextafter(1.0, 0.0))


def _validate_schedule(spec: ChannelSpec, horizon: int) -> None:
    n = np.arange(1, horizon + 1, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        deltas = _raw_deltas(spec, n, horizon)
    if spec.clamp:
        return
    bad = ~((deltas >= 0.0) & (deltas < 1.0))
    if np.any(bad):
        first = int(np.argmax(bad)) + 1
        raise ScheduleDomainError(
            f"{spec.kind.value} schedule gives delta={deltas[first - 1]!r} "
            f"outside [0, 1) at n={first} (N={horizon})",
            n=first,
        )


def schedule_delta(spec: ChannelSpec, n: int, N: int | None = None) -> float:
    """
    Averaging weight delta_n of a channel.

    Raises:
        InvalidRangeError: If n is outside 1..N.
        ScheduleDomainError: If the value leaves [0, 1) and the spec does
            not clamp.
    """
    horizon = spec.horizon if N is None else N
    if n < 1 or (horizon is not None and n > horizon):
        raise InvalidRangeError(f"Step {n} outside 1..{horizon}")

    if spec.kind is ChannelKind.CONSTANT:
        delta = float(spec.c)
    elif spec.kind is ChannelKind.POLYNOMIAL_GAP:
        delta = 1.0 - spec.c * n ** (-spec.rate)
    else:
        if horizon is None:
            raise InvalidRangeError("EXP_DECAY_GAP schedules need the total step count N")
        delta = 1.0 - spec.c * math.exp(-spec.rate * n * _LN10 / horizon)

    if spec.clamp:
        return _clamp_delta(delta)
    if not 0.0 <= delta < 1.0:
        raise ScheduleDomainError(
            f"{spec.kind.value} schedule gives delta={delta!r} outside [0, 1) at n={n}",
            n=n,
        )
    return delta


def constant(c: float) -> ChannelSpec:
    return ChannelSpec(ChannelKind.CONSTANT, c)


def polynomial_gap(c: float, p: float, clamp: bool = False) -> ChannelSpec:
    return ChannelSpec(ChannelKind.POLYNOMIAL_GAP, c, rate=p, clamp=clamp)


def exp_decay_gap(c: float, r: float) -> ChannelSpec:
    return ChannelSpec(ChannelKind.EXP_DECAY_GAP, c, rate=r)


def padam3_channels(horizon: int) -> list[ChannelSpec]:
    """The three PADAM3 schedules bound to ``horizon`` steps."""
    specs = [
        constant(0.999),
        polynomial_gap(1.0, 0.7),
        exp_decay_gap(0.1, 2.0),
    ]
    return [spec.bind(horizon) for spec in specs]


def padam10_channels(horizon: int, channel6_literal: bool = False) -> list[ChannelSpec]:
    """
    The ten PADAM10 schedules bound to ``horizon`` steps.

    Channel 6 is ``1 - 0.5 * n**(-0.7)``, following the family of channels
    3-5. With ``channel6_literal`` it is ``1 - 0.5 * n**0.7`` clamped into
    [0, 1), which is 0 from n = 3 on.
    """
    if channel6_literal:
        channel6 = polynomial_gap(0.5, -0.7, clamp=True)
    else:
        channel6 = polynomial_gap(0.5, 0.7)
    specs = [
        constant(0.99),
        constant(0.999),
        polynomial_gap(1.0, 0.6),
        polynomial_gap(1.0, 0.7),
        polynomial_gap(1.0, 0.8),
        channel6,
        exp_decay_gap(0.1, 2.0),
        exp_decay_gap(0.01, 1.0),
        exp_decay_gap(0.1, 3.0),
        exp_decay_gap(0.1, 5.0),
    ]
    return [spec.bind(horizon) for spec in specs]


def adam_ema_channels(horizon: int) -> list[ChannelSpec]:
    """Single EMA channel with constant weight 0.999."""
    return [constant(0.999).bind(horizon)]


def ema_update(channel: np.ndarray, current: np.ndarray, delta: float) -> np.ndarray:
    """``delta * channel + (1 - delta) * current``."""
    channel, current = _as_vector(channel), _as_vector(current)
    _check_lengths(channel, current, what="current")
    if not 0.0 <= delta <= 1.0:
        raise InvalidRangeError(f"Averaging weight {delta} outside [0, 1]")
    return delta * channel + (1.0 - delta) * current


def select_channel(channel_losses: Sequence[float]) -> int:
    """
    1-based index of the smallest finite loss; ties go to the lowest index.

    Raises:
        SelectionError: If no loss is finite.
    """
    best_index = 0
    best_loss = math.inf
    for index, loss in enumerate(channel_losses, start=1):
        if not math.isfinite(loss):
            continue
        if best_index == 0 or loss < best_loss:
            best_index, best_loss = index, loss
    if best_index == 0:
        raise SelectionError(f"No finite channel loss among {list(channel_losses)}")
    return best_index


@dataclass(frozen=True)
class PadamState:
    """
    Underlying Adam process plus K averaged channels.

    ``raw`` is the Adam iterate at which gradients are taken; channels
    average it and never feed back into it.
    """

    adam: AdamState
    raw: np.ndarray
    channels: tuple[np.ndarray, ...]
    specs: tuple[ChannelSpec, ...]
    best_index: int = 1
    channel_losses: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if len(self.specs) < 1:
            raise ShapeError("PADAM needs at least one channel")
        if len(self.channels) != len(self.specs):
            raise ShapeError(
                f"{len(self.channels)} channels but {len(self.specs)} schedules"
            )
        if not 1 <= self.best_index <= len(self.specs):
            raise InvalidRangeError(f"best_index {self.best_index} outside 1..{len(self.specs)}")

    @classmethod
    def initial(cls, params: np.ndarray, specs: Sequence[ChannelSpec]) -> "PadamState":
        """Fresh state; every channel starts at the initial iterate."""
        params = _as_vector(params).copy()
        return cls(
            adam=AdamState.initial(params.shape[0]),
            raw=params,
            channels=tuple(params.copy() for _ in specs),
            specs=tuple(specs),
        )

    @property
    def n(self) -> int:
        return self.adam.n

    @property
    def selected(self) -> np.ndarray:
        return self.channels[self.best_index - 1]


def padam_step(state: PadamState, grad: np.ndarray, hp: HyperParams) -> PadamState:
    """
    Advance the raw Adam iterate, then update every channel.

    Selection is not performed here; see evaluate_and_select.
    """
    adam, raw = adam_step(state.adam, state.raw, grad, hp)
    n = adam.n
    channels = tuple(
        ema_update(channel, raw, schedule_delta(spec, n))
        for channel, spec in zip(state.channels, state.specs)
    )
    return replace(state, adam=adam, raw=raw, channels=channels)


class SupportsLoss(Protocol):
    """The part of a stochastic objective that channel selection needs."""

    def sample_batch(self, stream: RngStream, size: int) -> Batch: ...

    def loss(self, params: np.ndarray, batch: Batch) -> float: ...


def channel_losses(
    state: PadamState, objective: SupportsLoss, stream: RngStream, batch_size: int
) -> list[float]:
    """
    Loss of each channel on its own fresh batch.

    One batch of K * J samples is drawn; channel k is scored on rows
    ``(k-1)*J .. k*J``, so the index ranges never overlap.
    """
    if batch_size < 1:
        raise InvalidRangeError(f"Selection batch size must be >= 1, got {batch_size}")
    count = len(state.channels)
    batch = objective.sample_batch(stream, count * batch_size)
    losses = []
    with np.errstate(over="ignore", invalid="ignore"):
        for k, channel in enumerate(state.channels):
            rows = batch.rows(k * batch_size, (k + 1) * batch_size)
            losses.append(float(objective.loss(channel, rows)))
    return losses


def evaluate_and_select(
    state: PadamState, objective: SupportsLoss, stream: RngStream, batch_size: int
) -> PadamState:
    """Score every channel on disjoint fresh batches and record the best one."""
    losses = channel_losses(state, objective, stream, batch_size)
    best = select_channel(losses)
    logger.debug("Channel losses at step %d: %s", state.n, losses)
    logger.info("Step %d: selected channel %d of %d", state.n, best, len(losses))
    return replace(state, best_index=best, channel_losses=tuple(losses))


def final_selection(
    state: PadamState, objective: SupportsLoss, stream: RngStream, batch_size: int
) -> tuple[int, np.ndarray]:
    """End-of-training pick: the selected channel index and its iterate."""
    state = evaluate_and_select(state, objective, stream, batch_size)
    return state.best_index, state.selected.copy()
