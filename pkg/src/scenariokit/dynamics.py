"""Parametric activity models with closed-form evaluation.

Three autonomous models are built in:

* ``Sinusoidal``: ``z(t) = z0 + A/2 * (1 - cos(pi (t - t0) / T))`` on
  ``[t0, t0 + T]``, so the rate is ``pi A / (2T) * sin(pi (t - t0) / T)``
  and the state moves smoothly from ``z0`` to ``z0 + A``.
* ``Linear``: ``z(t) = z0 + s (t - t0)`` for ``t >= t0``.
* ``Constant``: ``z(t) = z0``.

New models are added by subclassing :class:`Model` and calling
:func:`register_model`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "ModelError",
    "OutOfDomain",
    "DegenerateSamples",
    "NonFinite",
    "Model",
    "Sinusoidal",
    "Linear",
    "Constant",
    "ModelParams",
    "register_model",
    "get_model",
    "model_names",
    "state",
    "derivative",
    "second_derivative",
    "displacement",
    "natural_end",
    "fit",
]

# Slack for float round-off at domain edges; inside it, time is clamped.
_EDGE = 1e-12


class ModelError(ValueError):
    pass


class OutOfDomain(ModelError):
    pass


class DegenerateSamples(ModelError):
    pass


class NonFinite(ModelError):
    pass


class Model:
    """Base class for activity models; subclasses are stateless."""

    name: str = ""
    parameters: tuple[str, ...] = ()

    def check(self, values: Mapping[str, float]) -> list[str]:
        """Return human-readable problems with ``values`` (empty when fine)."""
        problems = []
        missing = [p for p in self.parameters if p not in values]
        extra = sorted(set(values) - set(self.parameters))
        if missing:
            problems.append(f"missing parameters {missing} for {self.name}")
        if extra:
            problems.append(f"unexpected parameters {extra} for {self.name}")
        for key, val in values.items():
            if not isinstance(val, (int, float)) or not math.isfinite(val):
                problems.append(f"parameter {key}={val!r} is not a finite number")
        return problems

    def domain(self, p: Mapping[str, float]) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def natural_end(self, p: Mapping[str, float]) -> float | None:
        return None

    def state(self, p: Mapping[str, float], t: float) -> float:
        raise NotImplementedError

    def derivative(self, p: Mapping[str, float], t: float) -> float:
        raise NotImplementedError

    def second_derivative(self, p: Mapping[str, float], t: float) -> float:
        raise NotImplementedError

    def integral(self, p: Mapping[str, float], t_a: float, t_b: float) -> float:
        raise NotImplementedError

    def fit(self, t: np.ndarray, z: np.ndarray) -> dict[str, float]:
        raise NotImplementedError


class Sinusoidal(Model):
    name = "Sinusoidal"
    parameters = ("A", "T", "t0", "z0")

    def check(self, values):
        problems = super().check(values)
        T = values.get("T")
        if isinstance(T, (int, float)) and math.isfinite(T) and T <= 0:
            problems.append(f"Sinusoidal duration T must be positive, got {T!r}")
        return problems

    def domain(self, p):
        return (p["t0"], p["t0"] + p["T"])

    def natural_end(self, p):
        return p["t0"] + p["T"]

    def state(self, p, t):
        phase = math.pi * (t - p["t0"]) / p["T"]
        return p["z0"] + 0.5 * p["A"] * (1.0 - math.cos(phase))

    def derivative(self, p, t):
        phase = math.pi * (t - p["t0"]) / p["T"]
        return math.pi * p["A"] / (2.0 * p["T"]) * math.sin(phase)

    def second_derivative(self, p, t):
        phase = math.pi * (t - p["t0"]) / p["T"]
        return math.pi**2 * p["A"] / (2.0 * p["T"] ** 2) * math.cos(phase)

    def integral(self, p, t_a, t_b):
        A, T, t0, z0 = p["A"], p["T"], p["t0"], p["z0"]
        w = math.pi / T
        sines = math.sin(w * (t_b - t0)) - math.sin(w * (t_a - t0))
        return (z0 + 0.5 * A) * (t_b - t_a) - 0.5 * A * sines / w

    def fit(self, t, z):
        t0 = float(t[0])
        T = float(t[-1] - t[0])
        basis = 0.5 * (1.0 - np.cos(np.pi * (t - t0) / T))
        design = np.column_stack([np.ones_like(t), basis])
        (z0, A), *_ = np.linalg.lstsq(design, z, rcond=None)
        return {"A": float(A), "T": T, "t0": t0, "z0": float(z0)}


class Linear(Model):
    name = "Linear"
    parameters = ("s", "t0", "z0")

    def domain(self, p):
        return (p["t0"], math.inf)

    def state(self, p, t):
        return p["z0"] + p["s"] * (t - p["t0"])

    def derivative(self, p, t):
        return p["s"]

    def second_derivative(self, p, t):
        return 0.0

    def integral(self, p, t_a, t_b):
        s, t0, z0 = p["s"], p["t0"], p["z0"]
        return z0 * (t_b - t_a) + 0.5 * s * ((t_b - t0) ** 2 - (t_a - t0) ** 2)

    def fit(self, t, z):
        # t0 and z0 are not separately identifiable; t0 is pinned to the first sample.
        t0 = float(t[0])
        design = np.column_stack([np.ones_like(t), t - t0])
        (z0, s), *_ = np.linalg.lstsq(design, z, rcond=None)
        return {"s": float(s), "t0": t0, "z0": float(z0)}


class Constant(Model):
    name = "Constant"
    parameters = ("z0",)

    def state(self, p, t):
        return p["z0"]

    def derivative(self, p, t):
        return 0.0

    def second_derivative(self, p, t):
        return 0.0

    def integral(self, p, t_a, t_b):
        return p["z0"] * (t_b - t_a)

    def fit(self, t, z):
        return {"z0": float(np.mean(z))}


_REGISTRY: dict[str, Model] = {}


def register_model(model: Model) -> Model:
    """Make ``model`` available under ``model.name``; returns it unchanged."""
    if not model.name:
        raise ValueError("model needs a name")
    _REGISTRY[model.name] = model
    return model


def get_model(name: str) -> Model:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; known: {sorted(_REGISTRY)}") from None


def model_names() -> tuple[str, ...]:
    return tuple(_REGISTRY)


for _m in (Sinusoidal(), Linear(), Constant()):
    register_model(_m)


@dataclass(frozen=True)
class ModelParams:
    """A model kind together with values for exactly its parameters."""

    kind: str
    values: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        model = get_model(self.kind)
        problems = model.check(self.values)
        if problems:
            raise ModelError("; ".join(problems))
        object.__setattr__(
            self, "values", MappingProxyType({k: float(v) for k, v in self.values.items()})
        )

    @property
    def model(self) -> Model:
        return get_model(self.kind)

    def replace(self, **changes: float) -> "ModelParams":
        values = dict(self.values)
        values.update(changes)
        return ModelParams(self.kind, values)

    def __getitem__(self, key: str) -> float:
        return self.values[key]


def _in_domain(params: ModelParams, t: float, clamp: bool) -> float:
    lo, hi = params.model.domain(params.values)
    if t < lo:
        if clamp or lo - t <= _EDGE * max(1.0, abs(lo)):
            return lo
        raise OutOfDomain(f"t={t!r} precedes the {params.kind} domain start {lo!r}")
    if t > hi:
        if clamp or t - hi <= _EDGE * max(1.0, abs(hi)):
            return hi
        raise OutOfDomain(f"t={t!r} is past the {params.kind} domain end {hi!r}")
    return t


def state(params: ModelParams, t: float, *, clamp: bool = False) -> float:
    """Closed-form state at time ``t``.

    Outside the model's domain an :class:`OutOfDomain` error is raised unless
    ``clamp`` is set, in which case ``t`` is moved to the nearest domain edge.
    """
    t = _in_domain(params, t, clamp)
    return params.model.state(params.values, t)


def derivative(params: ModelParams, t: float, *, clamp: bool = False) -> float:
    t = _in_domain(params, t, clamp)
    return params.model.derivative(params.values, t)


def second_derivative(params: ModelParams, t: float, *, clamp: bool = False) -> float:
    t = _in_domain(params, t, clamp)
    return params.model.second_derivative(params.values, t)


def displacement(params: ModelParams, t_a: float, t_b: float) -> float:
    """Integral of the state over ``[t_a, t_b]``.

    When the state is a speed, this is the distance travelled.
    """
    if t_b < t_a:
        raise OutOfDomain(f"interval end {t_b!r} precedes start {t_a!r}")
    a = _in_domain(params, t_a, False)
    b = _in_domain(params, t_b, False)
    return params.model.integral(params.values, a, b)


def natural_end(params: ModelParams) -> float | None:
    """Time at which the model's own domain ends, if it has one."""
    return params.model.natural_end(params.values)


def fit(kind: str, samples: Sequence[tuple[float, float]]) -> tuple[ModelParams, float]:
    """Least-squares fit of ``kind`` to ``(t, z)`` samples.

    Returns the fitted parameters and the RMS residual.  For ``Sinusoidal``
    the start time and duration are taken from the sample window and only
    the amplitude and initial state are estimated.
    """
    model = get_model(kind)
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DegenerateSamples("samples must be (t, z) pairs")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("samples contain non-finite values")
    need = max(2, len(model.parameters))
    if len(arr) < need:
        raise DegenerateSamples(f"{kind} needs at least {need} samples, got {len(arr)}")
    t, z = arr[:, 0], arr[:, 1]
    if np.all(t == t[0]):
        raise DegenerateSamples("all sample times are equal")
    if np.any(np.diff(t) <= 0):
        raise DegenerateSamples("sample times must be strictly increasing")
    params = ModelParams(kind, model.fit(t, z))
    predicted = np.array([model.state(params.values, ti) for ti in t])
    residual = float(np.sqrt(np.mean((predicted - z) ** 2)))
    return params, residual
