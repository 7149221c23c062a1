"""
Stateful optimizer drivers used by the experiment harness.

A driver owns one run's optimizer state and wraps the pure step functions
of padambench.optim. The harness only talks to this small interface:

    driver.raw            iterate at which the next gradient is taken
    driver.step(grad)     advance one step
    driver.report()       (reporting iterate, channel index or -1)
    driver.needs_selection / driver.select(objective, stream, J)
"""

from typing import Sequence

import numpy as np

from padambench import optim
from padambench.errors import ConfigError
from padambench.optim import ChannelSpec, HyperParams, PadamState
from padambench.prng import RngStream
from padambench.registry import register_optimizer

NO_CHANNEL = -1
RAW_CHANNEL = 0


class Driver:
    """Base driver: plain iterate, no averaging."""

    needs_selection = False
    has_raw_baseline = False

    def __init__(self, params: np.ndarray, hp: HyperParams):
        self.params = np.array(params, dtype=np.float64)
        self.hp = hp

    @property
    def raw(self) -> np.ndarray:
        return self.params

    def step(self, grad: np.ndarray) -> None:
        raise NotImplementedError

    def report(self) -> tuple[np.ndarray, int]:
        return self.params, NO_CHANNEL

    def select(self, objective, stream: RngStream, batch_size: int) -> None:
        raise TypeError(f"{type(self).__name__} has no channels to select from")


class SgdDriver(Driver):
    def step(self, grad: np.ndarray) -> None:
        self.params = optim.sgd_step(self.params, grad, self.hp)


class MomentumDriver(Driver):
    def __init__(self, params: np.ndarray, hp: HyperParams):
        super().__init__(params, hp)
        self.velocity = np.zeros_like(self.params)

    def step(self, grad: np.ndarray) -> None:
        self.velocity, self.params = optim.momentum_sgd_step(
            self.velocity, self.params, grad, self.hp
        )


class AdamDriver(Driver):
    def __init__(self, params: np.ndarray, hp: HyperParams, decoupled_decay: bool = False):
        super().__init__(params, hp)
        self.state = optim.AdamState.initial(self.params.shape[0])
        self._step_fn = optim.adamw_step if decoupled_decay else optim.adam_step

    def step(self, grad: np.ndarray) -> None:
        self.state, self.params = self._step_fn(self.state, self.params, grad, self.hp)


class AveragedAdamDriver(Driver):
    """
    Adam plus averaged channels.

    With ``selects`` the reporting iterate is the channel chosen at the last
    selection (PADAM); otherwise the single channel is reported with
    channel index -1 (Adam with EMA).
    """

    has_raw_baseline = True

    def __init__(
        self,
        params: np.ndarray,
        hp: HyperParams,
        specs: Sequence[ChannelSpec],
        selects: bool = True,
    ):
        super().__init__(params, hp)
        self.state = PadamState.initial(self.params, specs)
        self.needs_selection = selects
        self.has_raw_baseline = selects

    @property
    def raw(self) -> np.ndarray:
        return self.state.raw

    def step(self, grad: np.ndarray) -> None:
        self.state = optim.padam_step(self.state, grad, self.hp)

    def report(self) -> tuple[np.ndarray, int]:
        channel = self.state.best_index if self.needs_selection else NO_CHANNEL
        return self.state.selected, channel

    def select(self, objective, stream: RngStream, batch_size: int) -> None:
        self.state = optim.evaluate_and_select(self.state, objective, stream, batch_size)


def _bound(channels: Sequence[ChannelSpec], horizon: int) -> list[ChannelSpec]:
    return [spec.bind(horizon) for spec in channels]


@register_optimizer(name="sgd")
def make_sgd(params, hp, horizon, **_):
    return SgdDriver(params, hp)


@register_optimizer(name="momentum")
def make_momentum(params, hp, horizon, **_):
    return MomentumDriver(params, hp)


@register_optimizer(name="adam")
def make_adam(params, hp, horizon, **_):
    return AdamDriver(params, hp)


@register_optimizer(name="adamw")
def make_adamw(params, hp, horizon, **_):
    return AdamDriver(params, hp, decoupled_decay=True)


@register_optimizer(name="adam_ema")
def make_adam_ema(params, hp, horizon, channels=None, **_):
    specs = _bound(channels, horizon) if channels else optim.adam_ema_channels(horizon)
    return AveragedAdamDriver(params, hp, specs, selects=False)


@register_optimizer(name="padam3")
def make_padam3(params, hp, horizon, channels=None, **_):
    specs = _bound(channels, horizon) if channels else optim.padam3_channels(horizon)
    return AveragedAdamDriver(params, hp, specs)


@register_optimizer(name="padam10")
def make_padam10(params, hp, horizon, channels=None, channel6_literal=False, **_):
    if channels:
        specs = _bound(channels, horizon)
    else:
        specs = optim.padam10_channels(horizon, channel6_literal=channel6_literal)
    return AveragedAdamDriver(params, hp, specs)


@register_optimizer(name="padam")
def make_padam(params, hp, horizon, channels=None, **_):
    if not channels:
        raise ConfigError("Optimizer 'padam' needs an explicit 'channels' list", key="channels")
    return AveragedAdamDriver(params, hp, _bound(channels, horizon))
