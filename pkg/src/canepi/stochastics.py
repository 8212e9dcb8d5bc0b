"""Seeded random streams and the distribution families used by the model.

Every realization owns one :class:`RngStream`.  Streams are derived from a
master seed with numpy's ``SeedSequence`` spawn keys, so any ``(seed, path)``
pair names a fixed, platform independent sequence and sibling streams are
statistically independent.  The engine keys a fresh substream by
``(year, purpose)`` so that draws for one purpose never shift when another
purpose consumes a different number of variates; this is what makes scenario
comparisons under common random numbers tight.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ParameterError

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"

_U64 = 2**64


class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``."""

    def __init__(self, seed: int, stream_id: int = 0, path: tuple[int, ...] = ()):
        for name, value in (("seed", seed), ("stream_id", stream_id)):
            if not 0 <= int(value) < _U64:
                raise ParameterError(f"{name} must be a 64-bit unsigned integer, got {value}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.path = tuple(int(p) for p in path)
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def substream(self, *keys: int) -> "RngStream":
        """Independent child stream; same keys always give the same child."""
        return RngStream(self.seed, self.stream_id, self.path + tuple(keys))

    def random(self, size=None):
        return self.generator.random(size)

    def permutation(self, x):
        return self.generator.permutation(x)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"


def _scalar(value, size):
    return value.item() if size is None and isinstance(value, np.generic) else value


def sample_discrete_uniform(lo: int, hi: int, rng: RngStream, size=None):
    if lo > hi:
        raise ParameterError(f"discrete uniform needs lo <= hi, got ({lo}, {hi})")
    return _scalar(rng.generator.integers(lo, hi, endpoint=True, size=size), size)


def sample_binomial(n: int, p: float, rng: RngStream, size=None):
    if n < 0:
        raise ParameterError(f"binomial needs n >= 0, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"binomial needs 0 <= p <= 1, got {p}")
    return _scalar(rng.generator.binomial(n, p, size=size), size)


def sample_poisson(lam: float, rng: RngStream, size=None):
    if lam < 0:
        raise ParameterError(f"poisson needs lambda >= 0, got {lam}")
    return _scalar(rng.generator.poisson(lam, size=size), size)


def sample_continuous_uniform(a: float, b: float, rng: RngStream, size=None):
    if a > b:
        raise ParameterError(f"continuous uniform needs a <= b, got ({a}, {b})")
    return _scalar(rng.generator.uniform(a, b, size=size), size)


@lru_cache(maxsize=32)
def power_law_table(gamma: float, k_max: int, p_zero: float) -> tuple[np.ndarray, np.ndarray]:
    """Probability mass over degrees ``0..k_max`` and its cumulative sum.

    Degree 0 carries ``p_zero``; degrees ``1..k_max`` share the remainder in
    proportion to ``k**-gamma``.
    """
    if gamma <= 0:
        raise ParameterError(f"power law needs gamma > 0, got {gamma}")
    if k_max < 1:
        raise ParameterError(f"power law needs k_max >= 1, got {k_max}")
    if not 0.0 <= p_zero <= 1.0:
        raise ParameterError(f"power law needs 0 <= p_zero <= 1, got {p_zero}")
    k = np.arange(1, k_max + 1, dtype=float)
    weights = k**-gamma
    mass = np.empty(k_max + 1)
    mass[0] = p_zero
    mass[1:] = (1.0 - p_zero) * weights / weights.sum()
    cdf = np.cumsum(mass)
    cdf[-1] = 1.0
    mass.flags.writeable = False
    cdf.flags.writeable = False
    return mass, cdf


def sample_power_law_degree(gamma: float, k_max: int, p_zero: float, rng: RngStream, size=None):
    _, cdf = power_law_table(float(gamma), int(k_max), float(p_zero))
    u = rng.generator.random(size)
    # first index whose cumulative mass exceeds u
    return _scalar(np.searchsorted(cdf, u, side="right"), size)


_KINDS = {
    "DU": ("discrete_uniform", 2),
    "B": ("binomial", 2),
    "P": ("poisson", 1),
    "CU": ("continuous_uniform", 2),
    "PL": ("power_law", 3),
}


@dataclass(frozen=True)
class DistributionSpec:
    """A distribution written the way parameter tables write it.

    ``DistributionSpec("B", (26, 0.5))`` is a binomial with 26 trials;
    kinds are ``DU``, ``B``, ``P``, ``CU`` and ``PL`` (power-law degree with
    ``(gamma, k_max, p_zero)``).
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown distribution kind {self.kind!r}")
        arity = _KINDS[self.kind][1]
        if len(self.params) != arity:
            raise ParameterError(f"{self.kind} takes {arity} parameters, got {len(self.params)}")
        object.__setattr__(self, "params", tuple(self.params))
        self.validate()

    def validate(self) -> None:
        p = self.params
        if self.kind == "DU" and (p[0] > p[1] or int(p[0]) != p[0] or int(p[1]) != p[1]):
            raise ParameterError(f"DU needs integer bounds lo <= hi, got {p}")
        if self.kind == "B" and (p[0] < 0 or int(p[0]) != p[0] or not 0 <= p[1] <= 1):
            raise ParameterError(f"B needs integer n >= 0 and 0 <= p <= 1, got {p}")
        if self.kind == "P" and p[0] < 0:
            raise ParameterError(f"P needs lambda >= 0, got {p}")
        if self.kind == "CU" and p[0] > p[1]:
            raise ParameterError(f"CU needs a <= b, got {p}")
        if self.kind == "PL":
            power_law_table(float(p[0]), int(p[1]), float(p[2]))

    @classmethod
    def parse(cls, value) -> "DistributionSpec":
        """Build from a list such as ``["DU", 1, 2]``."""
        if isinstance(value, DistributionSpec):
            return value
        if not isinstance(value, (list, tuple)) or not value or not isinstance(value[0], str):
            raise ParameterError(f"distribution must look like [kind, params...], got {value!r}")
        return cls(value[0], tuple(value[1:]))

    def to_list(self) -> list:
        return [self.kind, *self.params]

    @property
    def mean(self) -> float:
        p = self.params
        if self.kind in ("DU", "CU"):
            return (p[0] + p[1]) / 2
        if self.kind == "B":
            return p[0] * p[1]
        if self.kind == "P":
            return float(p[0])
        mass, _ = power_law_table(float(p[0]), int(p[1]), float(p[2]))
        return float(np.arange(len(mass)) @ mass)

    def sample(self, rng: RngStream, size: Optional[int] = None):
        p = self.params
        if self.kind == "DU":
            return sample_discrete_uniform(int(p[0]), int(p[1]), rng, size)
        if self.kind == "B":
            return sample_binomial(int(p[0]), p[1], rng, size)
        if self.kind == "P":
            return sample_poisson(p[0], rng, size)
        if self.kind == "CU":
            return sample_continuous_uniform(p[0], p[1], rng, size)
        return sample_power_law_degree(p[0], int(p[1]), p[2], rng, size)
