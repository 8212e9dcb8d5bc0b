"""Transmission probabilities and scenario-dependent coefficients.

A per-act probability is the base rate for the source's infection level and
the act type, multiplied by the source's treatment reduction, the scenario
risk factor, the casual-partnership agreement factor and the target's
susceptibility, clamped to ``[0, 1]``.  Acts within a year are independent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .disease import Population, TherapyMode
from .errors import ConfigError, ParameterError
from .partnerships import ActSchedule


@dataclass(frozen=True)
class PerActBase:
    pi_urai: float = 0.22
    pi_uiai: float = 0.044
    ap_urai: float = 0.011
    ap_uiai: float = 0.0022

    def __post_init__(self):
        for name in ("pi_urai", "pi_uiai", "ap_urai", "ap_uiai"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1]")


@dataclass
class TransmissionParams:
    base: PerActBase = field(default_factory=PerActBase)
    agreement: float = 0.84
    susceptibility: float = 1.0
    # calendar year -> risk factor; overrides the scenario baseline up to the switch year
    historical_risk: dict = field(default_factory=dict)
    same_year_chains: bool = False


@dataclass
class ScenarioSpec:
    """Risk factor and therapy mode over calendar time.

    Up to and including ``switch_year`` every scenario runs at
    ``baseline_risk`` with moderate therapy; afterwards the risk is
    ``baseline_risk * risk_multiplier`` and therapy is ``therapy``.  Entries of
    ``risk_schedule`` pin the risk for single years.  ``overrides`` holds
    per-scenario parameter changes as ``{section: {key: value}}``.
    """

    name: str
    risk_multiplier: float = 1.0
    therapy: TherapyMode = TherapyMode.MODERATE
    switch_year: int = 2006
    baseline_risk: float = 1.30
    baseline_therapy: TherapyMode = TherapyMode.MODERATE
    risk_schedule: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        self.therapy = TherapyMode(self.therapy)
        self.baseline_therapy = TherapyMode(self.baseline_therapy)
        self.risk_schedule = {int(y): float(r) for y, r in self.risk_schedule.items()}
        if self.risk_multiplier <= 0 or self.baseline_risk <= 0:
            raise ConfigError("risk factors must be positive", key=f"scenarios.{self.name}")
        if any(r <= 0 for r in self.risk_schedule.values()):
            raise ConfigError("risk factors must be positive", key=f"scenarios.{self.name}.risk_schedule")


PRESETS = {
    "rs": ScenarioSpec("rs"),
    "p1": ScenarioSpec("p1", risk_multiplier=1.05, therapy=TherapyMode.MODERATE),
    "p2": ScenarioSpec("p2", risk_multiplier=1.05, therapy=TherapyMode.OPTIMISTIC),
    "p3": ScenarioSpec("p3", risk_multiplier=1.10, therapy=TherapyMode.OPTIMISTIC),
    "p4": ScenarioSpec("p4", risk_multiplier=1.20, therapy=TherapyMode.OPTIMISTIC),
    "p5": ScenarioSpec("p5", risk_multiplier=1.30, therapy=TherapyMode.OPTIMISTIC),
}


def preset(name: str) -> ScenarioSpec:
    try:
        spec = PRESETS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; presets are {', '.join(PRESETS)}") from None
    return ScenarioSpec(**{**vars(spec), "risk_schedule": dict(spec.risk_schedule), "overrides": {}})


def scenario_factors(scenario, year: int, historical: Optional[dict] = None) -> tuple[float, TherapyMode]:
    """Risk factor and therapy mode in force during ``year``."""
    if isinstance(scenario, str):
        scenario = preset(scenario)
    if year in scenario.risk_schedule:
        risk = scenario.risk_schedule[year]
    elif year > scenario.switch_year:
        risk = scenario.baseline_risk * scenario.risk_multiplier
    elif historical and year in historical:
        risk = float(historical[year])
    else:
        risk = scenario.baseline_risk
    mode = scenario.therapy if year > scenario.switch_year else scenario.baseline_therapy
    return risk, mode


def per_act_probability(base, infectivity_reduction=1.0, risk=1.0, agreement=1.0, susceptibility=1.0):
    """Clamped product of the base per-act rate and its coefficients."""
    p = np.clip(np.multiply(base, infectivity_reduction) * risk * agreement * susceptibility, 0.0, 1.0)
    return float(p) if np.ndim(p) == 0 else p


def per_year_probability(acts) -> float:
    """Probability that at least one of several independent acts transmits."""
    acts = np.asarray(list(acts) if not isinstance(acts, np.ndarray) else acts, dtype=float)
    if np.any((acts < 0) | (acts > 1)):
        raise ParameterError("per-act probabilities must lie in [0, 1]")
    return float(1.0 - np.prod(1.0 - acts))


def agreement_factor(pair, steady: bool, partner, value: float = 0.84) -> float:
    """Reduction on a casual contact when either end has a steady partner.

    ``partner`` maps node id to its steady partner, negative or ``None`` for
    singles.
    """
    if steady:
        return 1.0
    i, j = pair

    def has(x):
        p = partner[x]
        return p is not None and p >= 0

    return value if has(i) or has(j) else 1.0


def pair_probabilities(schedule: ActSchedule, pop: Population, risk: float, params: TransmissionParams) -> np.ndarray:
    """Yearly transmission probability along every scheduled contact."""
    base = params.base
    partnered = pop.steady_partner >= 0
    agreement = np.where(~schedule.steady & (partnered[schedule.source] | partnered[schedule.target]),
                         params.agreement, 1.0)
    coeff = pop.infectivity_reduction[schedule.source] * agreement
    scale = risk * params.susceptibility

    def escape(b, count):
        p = per_act_probability(b, coeff, scale)
        return (1.0 - p) ** count

    survive = (escape(base.ap_urai, schedule.receptive) * escape(base.ap_uiai, schedule.insertive)
               * escape(base.pi_urai, schedule.receptive_pi) * escape(base.pi_uiai, schedule.insertive_pi))
    return 1.0 - survive


def node_infection_probability(schedule: ActSchedule, pair_prob: np.ndarray, n: int) -> np.ndarray:
    """Per-node probability of at least one transmission from any contact."""
    with np.errstate(divide="ignore"):
        log_escape = np.bincount(schedule.target, weights=np.log1p(-pair_prob), minlength=n)
    return -np.expm1(log_escape)
