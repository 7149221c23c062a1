"""
Name registry for problems and optimizer drivers.

Problems and optimizers are looked up by the ids used on the command line
and in config files. Register them with a decorator:

    @register_problem
    class QuadraticProblem:
        name = "quadratic"
        ...

    @register_optimizer(name="adam")
    def make_adam(params, hp, horizon, **options): ...
"""

from typing import Any, Callable, Type

from padambench.errors import ConfigError

# Registries keep insertion order, so listings are stable
_problem_registry: dict[str, Type] = {}
_optimizer_registry: dict[str, Callable[..., Any]] = {}


def _register(registry: dict, what: str, obj: Any, name: str | None) -> Any:
    if name is None:
        name = getattr(obj, "name", None)
    if not name:
        raise TypeError(f"{what} {obj!r} needs a name (attribute or name=...)")
    if name in registry:
        raise ValueError(f"{what} id {name!r} already registered for {registry[name]!r}")
    registry[name] = obj
    return obj


def register_problem(cls: Type = None, *, name: str = None):
    """
    Register a problem class under ``name`` or its ``name`` attribute.

    Usable bare (``@register_problem``) or with arguments
    (``@register_problem(name="quadratic")``).
    """
    def decorator(cls: Type) -> Type:
        return _register(_problem_registry, "Problem", cls, name)

    if cls is not None:
        return decorator(cls)
    return decorator


def register_optimizer(factory: Callable = None, *, name: str = None):
    """Register an optimizer driver factory; same calling forms as register_problem."""
    def decorator(factory: Callable) -> Callable:
        return _register(_optimizer_registry, "Optimizer", factory, name)

    if factory is not None:
        return decorator(factory)
    return decorator


def get_problem(name: str) -> Type:
    """Problem class registered under ``name``."""
    try:
        return _problem_registry[name]
    except KeyError:
        known = ", ".join(_problem_registry)
        raise ConfigError(f"Unknown problem {name!r} (known: {known})", key="problem") from None


def get_optimizer(name: str) -> Callable[..., Any]:
    """Driver factory registered under ``name``."""
    try:
        return _optimizer_registry[name]
    except KeyError:
        known = ", ".join(_optimizer_registry)
        raise ConfigError(
            f"Unknown optimizer {name!r} (known: {known})", key="optimizer"
        ) from None


def problem_names() -> list[str]:
    return list(_problem_registry)


def optimizer_names() -> list[str]:
    return list(_optimizer_registry)
