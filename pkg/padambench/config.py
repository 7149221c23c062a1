"""
Run configuration: presets, JSON config files and command-line flags.

Values are layered, later layers win:

    built-in preset  <  JSON config file  <  explicit CLI flags

Config files are flat JSON objects whose keys mirror the CLI flag names
with ``-`` replaced by ``_`` (``--mc-samples`` -> ``"mc_samples"``).
"""

import argparse
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from padambench import registry
from padambench.errors import ConfigError, InvalidHyperParameterError, PadamBenchError
from padambench.optim import ChannelSpec, HyperParams

logger = logging.getLogger(__name__)

DEFAULT_OPTIMIZER = "padam3"
DEFAULT_BATCH = 256
LONG_THRESHOLD = 5000
SHORT_THRESHOLD = 500

_INT_KEYS = {"steps", "batch", "nt", "seeds", "mc_samples", "eval_every", "seed_base", "dim", "jobs"}
_FLOAT_KEYS = {
    "lr", "horizon", "sigma2", "noise_var",
    "alpha", "beta", "eps", "momentum", "weight_decay",
}
_STR_KEYS = {"problem", "optimizer", "preset", "out"}
_BOOL_KEYS = {"padam10_channel6_literal"}
_OTHER_KEYS = {"widths", "channels"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _BOOL_KEYS | _OTHER_KEYS

_HYPER_KEYS = ("alpha", "beta", "eps", "momentum", "weight_decay")
_ATTR = {"nt": "n_t"}


def _lr_table(default: float, **per_optimizer: float) -> dict[str, float]:
    return {"default": default, **per_optimizer}


PRESETS: dict[str, dict[str, Any]] = {
    "quadratic": {
        "problem": "quadratic", "dim": 10, "steps": 50_000, "nt": 5000,
        "seeds": 50, "mc_samples": 1,
        "lr_table": _lr_table(0.01, sgd=0.001, momentum=0.001),
    },
    "quadratic-desk": {
        "problem": "quadratic", "dim": 10, "steps": 20_000, "nt": 5000,
        "seeds": 20, "mc_samples": 1,
        "lr_table": _lr_table(0.01, sgd=0.001, momentum=0.001),
    },
    "polyreg": {
        "problem": "polyreg", "dim": 25, "noise_var": 0.2, "steps": 100_000,
        "nt": 5000, "seeds": 50, "mc_samples": 50_000,
        "lr_table": _lr_table(0.01),
    },
    "polyreg-desk": {
        "problem": "polyreg", "dim": 25, "noise_var": 0.2, "steps": 50_000,
        "nt": 5000, "seeds": 3, "mc_samples": 10_000,
        "lr_table": _lr_table(0.01),
    },
    "gauss_density": {
        "problem": "gauss_density", "dim": 20, "widths": [300, 500, 100],
        "sigma2": 3.0, "steps": 100_000, "nt": 5000, "seeds": 50,
        "mc_samples": 100_000, "lr_table": _lr_table(1e-4),
    },
    "gauss_density-desk": {
        "problem": "gauss_density", "dim": 5, "widths": [32, 32],
        "sigma2": 3.0, "steps": 20_000, "nt": 5000, "seeds": 3,
        "mc_samples": 10_000, "lr_table": _lr_table(1e-4),
    },
    "heat_dkm": {
        "problem": "heat_dkm", "dim": 10, "widths": [50, 100, 50], "horizon": 2.0,
        "steps": 100_000, "nt": 5000, "seeds": 50, "mc_samples": 100_000,
        "lr_table": _lr_table(1e-4),
    },
    "heat_dkm-desk": {
        "problem": "heat_dkm", "dim": 5, "widths": [32, 32], "horizon": 2.0,
        "steps": 20_000, "nt": 5000, "seeds": 3, "mc_samples": 10_000,
        "lr_table": _lr_table(1e-3),
    },
}


@dataclass(frozen=True)
class ProblemOptions:
    """Per-problem overrides; None means the problem's own default."""

    dim: int | None = None
    widths: tuple[int, ...] | None = None
    horizon: float | None = None
    sigma2: float | None = None
    noise_var: float | None = None

    def kwargs_for(self, problem: str) -> dict[str, Any]:
        """Constructor keyword arguments understood by ``problem``."""
        accepted = {
            "quadratic": {"dim": "dim"},
            "polyreg": {"dim": "degree", "noise_var": "noise_var"},
            "gauss_density": {"dim": "dim", "widths": "widths", "sigma2": "sigma2"},
            "heat_dkm": {"dim": "dim", "widths": "widths", "horizon": "horizon"},
        }.get(problem, {})
        return {
            param: getattr(self, option)
            for option, param in accepted.items()
            if getattr(self, option) is not None
        }

    def validate(self, problem: str) -> None:
        """
        Range-check the options that are set.

        Raises:
            ConfigError: Naming the first out-of-range key.
        """
        # polyreg reads dim as the polynomial degree
        min_dim = 0 if problem == "polyreg" else 1
        checks = (
            ("dim", self.dim, lambda v: v >= min_dim, f"must be >= {min_dim}"),
            ("widths", self.widths, lambda v: all(w >= 1 for w in v), "must all be >= 1"),
            ("horizon", self.horizon, lambda v: v >= 0.0, "must be >= 0"),
            ("sigma2", self.sigma2, lambda v: v > 0.0, "must be > 0"),
            ("noise_var", self.noise_var, lambda v: v >= 0.0, "must be >= 0"),
        )
        for key, value, ok, message in checks:
            if value is not None and not ok(value):
                raise ConfigError(f"{key} {message}, got {value}", key=key)


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines one experiment's output."""

    problem: str
    optimizer: str
    steps: int
    batch: int = DEFAULT_BATCH
    n_t: int = LONG_THRESHOLD
    seeds: int = 1
    seed_base: int = 0
    mc_samples: int = 10_000
    eval_every: int = 500
    hyper: HyperParams = field(default_factory=HyperParams)
    problem_options: ProblemOptions = field(default_factory=ProblemOptions)
    padam10_channel6_literal: bool = False
    channels: tuple[ChannelSpec, ...] | None = None
    preset: str | None = None
    out_path: str | None = None
    jobs: int = 1

    def __post_init__(self) -> None:
        registry.get_problem(self.problem)
        registry.get_optimizer(self.optimizer)
        checks = (
            ("steps", self.steps >= 1, "must be >= 1"),
            ("batch", self.batch >= 1, "must be >= 1"),
            ("nt", 1 <= self.n_t <= self.steps, f"must lie in 1..steps ({self.steps})"),
            ("seeds", self.seeds >= 1, "must be >= 1"),
            ("mc_samples", self.mc_samples >= 1, "must be >= 1"),
            ("eval_every", self.eval_every >= 1, "must be >= 1"),
            ("jobs", self.jobs >= 1, "must be >= 1"),
        )
        for key, ok, message in checks:
            if not ok:
                value = getattr(self, _ATTR.get(key, key))
                raise ConfigError(f"{key} {message}, got {value}", key=key)
        self.problem_options.validate(self.problem)

    def seed_values(self) -> list[int]:
        return [self.seed_base + i for i in range(self.seeds)]

    def to_echo(self) -> dict[str, Any]:
        """Output-relevant settings, as echoed into aggregate.json."""
        return {
            "problem": self.problem,
            "optimizer": self.optimizer,
            "preset": self.preset,
            "steps": self.steps,
            "batch": self.batch,
            "nt": self.n_t,
            "seeds": self.seeds,
            "seed_base": self.seed_base,
            "mc_samples": self.mc_samples,
            "eval_every": self.eval_every,
            "hyper": asdict(self.hyper),
            "problem_options": {
                key: list(value) if isinstance(value, tuple) else value
                for key, value in asdict(self.problem_options).items()
            },
            "padam10_channel6_literal": self.padam10_channel6_literal,
            "channels": None if self.channels is None else [c.to_dict() for c in self.channels],
        }


def default_n_t(steps: int) -> int:
    """5000 for long runs, otherwise 500 capped at the run length."""
    if steps >= LONG_THRESHOLD:
        return LONG_THRESHOLD
    return max(1, min(SHORT_THRESHOLD, steps))


def default_eval_every(n_t: int) -> int:
    return max(1, n_t // 10)


def _coerce(key: str, value: Any) -> Any:
    """Type-check one raw value; None passes through."""
    if value is None:
        return None
    try:
        if key in _INT_KEYS:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if key in _FLOAT_KEYS:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if key in _BOOL_KEYS:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if key in _STR_KEYS:
            if not isinstance(value, str):
                raise TypeError
            return value
        if key == "widths":
            if isinstance(value, str):
                value = [part for part in value.split(",") if part.strip()]
            widths = tuple(int(w) for w in value)
            if not widths or any(w < 1 for w in widths):
                raise ValueError
            return widths
        if key == "channels":
            if not isinstance(value, list) or not value:
                raise TypeError
            return tuple(ChannelSpec.from_dict(item) for item in value)
    except (TypeError, ValueError, KeyError, PadamBenchError):
        raise ConfigError(f"Invalid value for {key!r}: {value!r}", key=key) from None
    raise ConfigError(f"Unknown configuration key {key!r}", key=key)


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a flat JSON config file and reject unknown keys."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}", key="config") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}", key="config") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object", key="config")
    for key in data:
        if key not in KNOWN_KEYS:
            raise ConfigError(f"Unknown configuration key {key!r} in {path}", key=key)
    return data


def resolve_config(
    overrides: Mapping[str, Any], file_values: Mapping[str, Any] | None = None
) -> RunConfig:
    """
    Merge preset, file values and explicit overrides into a RunConfig.

    ``overrides`` holds only values that were given explicitly; None
    entries are ignored.

    Raises:
        ConfigError: On unknown keys, missing problem or invalid values.
    """
    explicit: dict[str, Any] = {}
    for layer in (file_values or {}, overrides):
        for key, value in layer.items():
            if key not in KNOWN_KEYS:
                raise ConfigError(f"Unknown configuration key {key!r}", key=key)
            value = _coerce(key, value)
            if value is not None:
                explicit[key] = value

    preset_name = explicit.get("preset")
    problem = explicit.get("problem")
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(
                f"Unknown preset {preset_name!r} (known: {', '.join(PRESETS)})", key="preset"
            )
        preset_problem = PRESETS[preset_name]["problem"]
        if problem is None:
            problem = preset_problem
        elif problem != preset_problem:
            raise ConfigError(
                f"Preset {preset_name!r} is for problem {preset_problem!r}, not {problem!r}",
                key="preset",
            )
    if problem is None:
        raise ConfigError("A problem is required (--problem or --preset)", key="problem")
    registry.get_problem(problem)
    if preset_name is None:
        candidate = f"{problem}-desk"
        preset_name = candidate if candidate in PRESETS else None

    preset = dict(PRESETS.get(preset_name, {}))
    lr_table = preset.pop("lr_table", {"default": HyperParams().lr})
    merged = {key: _coerce(key, value) for key, value in preset.items()}
    merged.update(explicit)

    optimizer = merged.get("optimizer", DEFAULT_OPTIMIZER)
    lr = merged.get("lr", lr_table.get(optimizer, lr_table["default"]))
    steps = merged.get("steps")
    if steps is None:
        raise ConfigError("Number of steps is required (--steps)", key="steps")
    n_t = merged.get("nt", default_n_t(steps))
    if "nt" in merged and "nt" not in explicit and n_t > steps:
        # preset threshold longer than an overridden run
        n_t = default_n_t(steps)

    try:
        hyper = HyperParams(
            lr=lr, **{key: merged[key] for key in _HYPER_KEYS if key in merged}
        )
    except InvalidHyperParameterError as e:
        raise ConfigError(str(e), key=e.key) from e

    channels = merged.get("channels")
    if channels is not None:
        try:
            channels = tuple(spec.bind(steps) for spec in channels)
        except PadamBenchError as e:
            raise ConfigError(f"Invalid channel schedule: {e}", key="channels") from e

    options = ProblemOptions(
        dim=merged.get("dim"),
        widths=merged.get("widths"),
        horizon=merged.get("horizon"),
        sigma2=merged.get("sigma2"),
        noise_var=merged.get("noise_var"),
    )
    config = RunConfig(
        problem=problem,
        optimizer=optimizer,
        steps=steps,
        batch=merged.get("batch", DEFAULT_BATCH),
        n_t=n_t,
        seeds=merged.get("seeds", 1),
        seed_base=merged.get("seed_base", 0),
        mc_samples=merged.get("mc_samples", 10_000),
        eval_every=merged.get("eval_every", default_eval_every(n_t)),
        hyper=hyper,
        problem_options=options,
        padam10_channel6_literal=merged.get("padam10_channel6_literal", False),
        channels=channels,
        preset=preset_name,
        out_path=merged.get("out"),
        jobs=merged.get("jobs", 1),
    )
    logger.debug("Resolved configuration: %s", config)
    return config


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags of ``padam-bench run``. Defaults are None so unset flags do not override."""
    parser.add_argument("--problem", choices=registry.problem_names())
    parser.add_argument("--optimizer", choices=registry.optimizer_names())
    parser.add_argument("--preset", help="named preset, e.g. heat_dkm or heat_dkm-desk")
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument("--steps", type=int, help="number of optimizer steps N")
    parser.add_argument("--batch", type=int, help="mini-batch size J")
    parser.add_argument("--nt", type=int, help="PADAM selection cadence n_T")
    parser.add_argument("--seeds", type=int, help="number of independent runs")
    parser.add_argument("--seed-base", type=int, help="first seed value")
    parser.add_argument("--lr", type=float, help="constant learning rate")
    parser.add_argument("--mc-samples", type=int, help="Monte Carlo samples per test error")
    parser.add_argument("--eval-every", type=int, help="error logging cadence")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--jobs", type=int, help="seeds run in parallel")
    parser.add_argument("--dim", type=int, help="problem dimension (polynomial degree for polyreg)")
    parser.add_argument("--widths", help="hidden widths, comma separated")
    parser.add_argument("--horizon", type=float, help="heat equation time horizon T")
    parser.add_argument("--sigma2", type=float, help="Gaussian density variance parameter")
    parser.add_argument("--noise-var", type=float, help="polyreg target noise variance")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--eps", type=float)
    parser.add_argument("--momentum", type=float)
    parser.add_argument("--weight-decay", type=float)
    parser.add_argument(
        "--channel6-literal",
        dest="padam10_channel6_literal",
        action="store_const",
        const=True,
        help="use the PADAM10 channel-6 formula as printed, clamped into [0, 1)",
    )


def config_from_namespace(args: argparse.Namespace) -> RunConfig:
    """Resolve parsed ``run`` flags (and their --config file) into a RunConfig."""
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key in KNOWN_KEYS and value is not None
    }
    file_values = load_config_file(args.config) if args.config else None
    return resolve_config(overrides, file_values)


def parse_config(argv: Sequence[str]) -> RunConfig:
    """Parse ``run`` flags into a RunConfig (argparse exits with code 2 on bad syntax)."""
    parser = argparse.ArgumentParser(prog="padam-bench run")
    add_run_arguments(parser)
    return config_from_namespace(parser.parse_args(list(argv)))
