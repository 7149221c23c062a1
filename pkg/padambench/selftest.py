"""
Invariant suite run by ``padam-bench selftest``.

Each check raises AssertionError on failure. The suite is small enough to
finish in a few seconds and needs nothing beyond the package itself.
"""

import logging
import math
from typing import Callable

import numpy as np

from padambench import nn, optim, prng
from padambench.nn import Activation, Batch, MlpSpec
from padambench.optim import AdamState, HyperParams
from padambench.problems import QuadraticProblem

logger = logging.getLogger(__name__)


def _reference_adam(params, grads, hp: HyperParams) -> list[float]:
    """Scalar straight-line Adam, one coordinate at a time."""
    theta = list(params)
    m = [0.0] * len(theta)
    v = [0.0] * len(theta)
    for n, grad in enumerate(grads, start=1):
        for i, g in enumerate(grad):
            m[i] = hp.alpha * m[i] + (1.0 - hp.alpha) * g
            v[i] = hp.beta * v[i] + (1.0 - hp.beta) * g * g
            m_hat = m[i] / (1.0 - hp.alpha ** n)
            v_hat = v[i] / (1.0 - hp.beta ** n)
            theta[i] -= hp.lr * m_hat / (hp.eps + math.sqrt(v_hat))
    return theta


def check_adam_oracle() -> None:
    stream = prng.derive_stream(7, 0)
    hp = HyperParams(lr=0.01)
    params = stream.standard_normal(size=6)
    grads = stream.standard_normal(size=(100, 6))
    state = AdamState.initial(6)
    theta = params
    for grad in grads:
        state, theta = optim.adam_step(state, theta, grad, hp)
    expected = _reference_adam(params.tolist(), grads.tolist(), hp)
    error = float(np.max(np.abs(theta - np.array(expected))))
    assert error <= 1e-12, f"max deviation {error:.3e} from the straight-line recursion"


def check_eps_placement() -> None:
    # g = eps at step 1 gives v_hat = eps^2: eps + sqrt(v_hat) = 2 eps,
    # while sqrt(v_hat + eps) would give a very different step
    hp = HyperParams(lr=1.0, eps=1e-8)
    _, theta = optim.adam_step(AdamState.initial(1), np.zeros(1), np.array([1e-8]), hp)
    assert abs(theta[0] + 0.5) < 1e-12, f"expected -0.5, got {theta[0]!r}"


def check_gradient() -> None:
    stream = prng.derive_stream(11, 0)
    spec = MlpSpec((3, 5, 2), Activation.GELU)
    params = stream.standard_normal(size=spec.param_count)
    batch = Batch(stream.standard_normal(size=(4, 3)), stream.standard_normal(size=(4, 2)))
    _, grad = nn.mse_loss_and_grad(spec, params, batch)
    numeric = nn.central_difference(lambda p: nn.mse_loss(spec, p, batch), params)
    error = float(np.max(np.abs(grad - numeric)))
    assert np.allclose(grad, numeric, rtol=1e-5, atol=1e-7), f"gradient error {error:.3e}"


def check_schedules() -> None:
    horizon = 10_000
    specs = optim.padam3_channels(horizon) + optim.padam10_channels(horizon)
    for spec in specs:
        for n in (1, horizon // 2, horizon):
            delta = optim.schedule_delta(spec, n)
            if spec.kind is optim.ChannelKind.CONSTANT:
                expected = spec.c
            elif spec.kind is optim.ChannelKind.POLYNOMIAL_GAP:
                expected = 1.0 - spec.c * n ** (-spec.rate)
            else:
                expected = 1.0 - spec.c * math.exp(-spec.rate * n * math.log(10.0) / horizon)
            assert abs(delta - expected) <= 1e-15, f"{spec} at n={n}: {delta!r} != {expected!r}"
            assert 0.0 <= delta < 1.0


def check_tie_break() -> None:
    assert optim.select_channel([0.5, 0.5, 0.5]) == 1
    assert optim.select_channel([2.0, 0.5, 0.5]) == 2
    assert optim.select_channel([math.nan, 3.0, 1.0]) == 3


def check_padam_matches_adam() -> None:
    problem = QuadraticProblem(dim=4)
    hp = HyperParams(lr=0.01)
    params = problem.init_params(prng.derive_stream(3, 0))
    specs = [optim.constant(0.0).bind(200), *optim.padam3_channels(200)]
    padam = optim.PadamState.initial(params, specs)
    adam, theta = AdamState.initial(4), params
    train_a = prng.derive_stream(3, 1)
    train_b = prng.derive_stream(3, 1)
    for _ in range(200):
        grad = problem.grad(padam.raw, problem.sample_batch(train_a, 16))
        padam = optim.padam_step(padam, grad, hp)
        grad = problem.grad(theta, problem.sample_batch(train_b, 16))
        adam, theta = optim.adam_step(adam, theta, grad, hp)
    assert np.array_equal(padam.raw, theta), "raw PADAM trajectory departs from Adam"
    assert np.array_equal(padam.channels[0], theta), "delta=0 channel does not copy the raw iterate"


def check_prng_replay() -> None:
    first = prng.derive_stream(42, 3)
    second = prng.derive_stream(42, 3)
    a = np.concatenate([first.standard_normal(size=3), first.standard_normal(size=4)])
    b = second.standard_normal(size=7)
    assert np.array_equal(a, b), "chunked normal draws differ from a single draw"
    assert not np.array_equal(
        prng.derive_stream(42, 4).random(size=10), prng.derive_stream(42, 3).random(size=10)
    )


CHECKS: list[tuple[str, Callable[[], None]]] = [
    ("adam oracle", check_adam_oracle),
    ("eps placement", check_eps_placement),
    ("mlp gradient", check_gradient),
    ("schedule closed forms", check_schedules),
    ("selection tie-break", check_tie_break),
    ("padam raw equals adam", check_padam_matches_adam),
    ("prng replay", check_prng_replay),
]


def run_selftest(out=print) -> bool:
    """Run every check, report one line per check and return overall success."""
    ok = True
    for name, check in CHECKS:
        try:
            check()
        except AssertionError as e:
            ok = False
            out(f"FAIL  {name}: {e}")
        else:
            out(f"ok    {name}")
    logger.debug("Selftest finished, success=%s", ok)
    return ok
