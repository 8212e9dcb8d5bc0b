"""HIV natural history, diagnosis, treatment and death-replacement.

The population is stored column-wise (one numpy array per attribute) so that
a yearly step is a handful of vectorised updates.  :class:`Individual` is a
read-only snapshot of one row, handy for inspection and tests.

Stages run ``NEGATIVE -> PI -> AP -> AIDS``.  An agent infected in year ``y``
stays in PI until the progression step of year ``y + 1``; the transmission
step of ``y + 1`` therefore sees it as a primary infection.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional

import numpy as np

from .errors import LogicError, ParameterError
from .stochastics import DistributionSpec, RngStream


class Stage(IntEnum):
    NEGATIVE = 0
    PI = 1
    AP = 2
    AIDS = 3


class TherapyMode(str, Enum):
    MODERATE = "moderate"
    OPTIMISTIC = "optimistic"


@dataclass
class DiseaseParams:
    ap_untreated: DistributionSpec = field(default_factory=lambda: DistributionSpec("B", (26, 0.5)))
    ap_treated: DistributionSpec = field(default_factory=lambda: DistributionSpec("B", (52, 0.5)))
    aids_duration: DistributionSpec = field(default_factory=lambda: DistributionSpec("DU", (1, 2)))
    moderate_reduction: DistributionSpec = field(default_factory=lambda: DistributionSpec("CU", (0.1, 0.5)))
    optimistic_reduction: DistributionSpec = field(default_factory=lambda: DistributionSpec("CU", (0.01, 0.1)))
    p_diag: float = 0.039
    p_success: float = 0.9
    treatment_start_year: int = 1985
    aids_sexually_active: bool = False

    def reduction(self, mode: TherapyMode) -> DistributionSpec:
        return self.optimistic_reduction if TherapyMode(mode) is TherapyMode.OPTIMISTIC else self.moderate_reduction


@dataclass(frozen=True)
class Individual:
    id: int
    stage: Stage
    years_in_stage: int
    ap_duration: int
    aids_duration: int
    diagnosed: bool
    treated: bool
    treatment_successful: bool
    infectivity_reduction: float
    steady_partner: Optional[int]
    steady_years_left: int
    infection_year: Optional[int]
    dead: bool


class Population:
    """Column store of every agent's disease and partnership state."""

    def __init__(self, n: int):
        if n < 1:
            raise ParameterError(f"population size must be positive, got {n}")
        self.n = n
        self.stage = np.zeros(n, dtype=np.int8)
        self.years_in_stage = np.zeros(n, dtype=np.int64)
        self.ap_duration = np.full(n, -1, dtype=np.int64)
        self.aids_duration = np.full(n, -1, dtype=np.int64)
        self.diagnosed = np.zeros(n, dtype=bool)
        self.treated = np.zeros(n, dtype=bool)
        self.treatment_successful = np.zeros(n, dtype=bool)
        self.infectivity_reduction = np.ones(n)
        self.steady_partner = np.full(n, -1, dtype=np.int64)
        self.steady_years_left = np.zeros(n, dtype=np.int64)
        self.infection_year = np.full(n, -1, dtype=np.int64)
        self.dead = np.zeros(n, dtype=bool)

    def __len__(self):
        return self.n

    def copy(self) -> "Population":
        other = Population.__new__(Population)
        for name, value in vars(self).items():
            setattr(other, name, value.copy() if isinstance(value, np.ndarray) else value)
        return other

    def individual(self, i: int) -> Individual:
        partner = int(self.steady_partner[i])
        infected_in = int(self.infection_year[i])
        return Individual(
            id=int(i),
            stage=Stage(int(self.stage[i])),
            years_in_stage=int(self.years_in_stage[i]),
            ap_duration=int(self.ap_duration[i]),
            aids_duration=int(self.aids_duration[i]),
            diagnosed=bool(self.diagnosed[i]),
            treated=bool(self.treated[i]),
            treatment_successful=bool(self.treatment_successful[i]),
            infectivity_reduction=float(self.infectivity_reduction[i]),
            steady_partner=None if partner < 0 else partner,
            steady_years_left=int(self.steady_years_left[i]),
            infection_year=None if infected_in < 0 else infected_in,
            dead=bool(self.dead[i]),
        )

    @property
    def infected(self) -> np.ndarray:
        return self.stage != Stage.NEGATIVE

    def census(self) -> dict[Stage, int]:
        counts = np.bincount(self.stage, minlength=len(Stage))
        return {s: int(counts[s]) for s in Stage}

    def diagnosed_fraction(self) -> float:
        infected = self.infected
        total = int(infected.sum())
        return float((self.diagnosed & infected).sum() / total) if total else 0.0

    def check_invariants(self) -> list[str]:
        problems = []
        infected = self.infected
        if np.any(self.treated & ~self.diagnosed):
            problems.append("treated agent without diagnosis")
        if np.any(self.diagnosed & ~infected):
            problems.append("diagnosed agent who is not infected")
        if np.any((self.infectivity_reduction != 1.0) & ~self.treated):
            problems.append("infectivity reduced for an untreated agent")
        if np.any((self.infectivity_reduction <= 0) | (self.infectivity_reduction > 1)):
            problems.append("infectivity reduction outside (0, 1]")
        has = self.steady_partner >= 0
        ids = np.flatnonzero(has)
        if np.any(self.steady_partner[self.steady_partner[ids]] != ids):
            problems.append("asymmetric steady partnership")
        if np.any(self.steady_partner[ids] == ids):
            problems.append("agent partnered with itself")
        return problems


def _as_index(idx) -> np.ndarray:
    idx = np.asarray(idx)
    if idx.dtype == bool:
        return np.flatnonzero(idx)
    return idx.astype(np.int64).reshape(-1)


def infect(pop: Population, idx, year: int) -> None:
    """Move susceptible agents ``idx`` into primary infection."""
    idx = _as_index(idx)
    if np.any(pop.stage[idx] != Stage.NEGATIVE):
        bad = idx[pop.stage[idx] != Stage.NEGATIVE]
        raise LogicError(f"cannot infect agents that are already infected: {bad.tolist()[:10]}")
    pop.stage[idx] = Stage.PI
    pop.years_in_stage[idx] = 0
    pop.infection_year[idx] = year
    pop.ap_duration[idx] = -1
    pop.aids_duration[idx] = -1
    pop.diagnosed[idx] = False
    pop.treated[idx] = False
    pop.treatment_successful[idx] = False
    pop.infectivity_reduction[idx] = 1.0


def advance_year(pop: Population, rng: RngStream, params: DiseaseParams, year: int) -> None:
    """Progress every infected agent by one year and flag AIDS deaths.

    PI agents infected before ``year`` enter AP and draw their AP duration,
    which is long only for successfully treated agents.  AP ends once the
    years spent there reach that duration; AIDS ends in death the same way.
    Draws are made for every agent so their count does not depend on state.
    """
    n = pop.n
    ap_plain = np.asarray(params.ap_untreated.sample(rng, n))
    ap_long = np.asarray(params.ap_treated.sample(rng, n))
    aids_draw = np.asarray(params.aids_duration.sample(rng, n))

    stage = pop.stage.copy()
    to_ap = (stage == Stage.PI) & (pop.infection_year < year)
    in_ap = stage == Stage.AP
    in_aids = stage == Stage.AIDS

    pop.years_in_stage[in_ap | in_aids] += 1

    ap_ends = in_ap & (pop.years_in_stage >= pop.ap_duration)
    pop.stage[ap_ends] = Stage.AIDS
    pop.years_in_stage[ap_ends] = 0
    pop.aids_duration[ap_ends] = aids_draw[ap_ends]

    pop.dead |= in_aids & (pop.years_in_stage >= pop.aids_duration)

    pop.stage[to_ap] = Stage.AP
    pop.years_in_stage[to_ap] = 0
    pop.ap_duration[to_ap] = np.where(pop.treatment_successful[to_ap], ap_long[to_ap], ap_plain[to_ap])


def start_treatment(pop: Population, idx, p_success: float, therapy_mode: TherapyMode,
                    rng_success: np.ndarray, reduction_draw: np.ndarray, long_ap_draw: np.ndarray) -> None:
    """Treat diagnosed agents ``idx`` using pre-drawn per-agent variates."""
    idx = _as_index(idx)
    pop.treated[idx] = True
    ok = idx[rng_success[idx] < p_success]
    pop.treatment_successful[ok] = True
    pop.infectivity_reduction[ok] = reduction_draw[ok]
    in_ap = ok[pop.stage[ok] == Stage.AP]
    pop.ap_duration[in_ap] = np.maximum(long_ap_draw[in_ap], pop.years_in_stage[in_ap] + 1)


def diagnose_and_treat_step(pop: Population, p_diag: float, p_success: float, therapy_mode: TherapyMode,
                            rng: RngStream, params: DiseaseParams, year: int) -> np.ndarray:
    """Yearly diagnosis hazard, then treatment for the newly eligible.

    Returns the indices of agents diagnosed this year.  Treatment starts at
    diagnosis, or at ``params.treatment_start_year`` for agents diagnosed
    earlier.  Successful treatment draws a reduction factor for the current
    therapy mode and redraws the AP duration from the long distribution.
    """
    if not 0 <= p_diag <= 1 or not 0 <= p_success <= 1:
        raise ParameterError("diagnosis and success probabilities must lie in [0, 1]")
    n = pop.n
    u_diag = rng.random(n)
    u_success = rng.random(n)
    reduction = np.asarray(params.reduction(therapy_mode).sample(rng, n), dtype=float)
    long_ap = np.asarray(params.ap_treated.sample(rng, n))

    infected = pop.infected & ~pop.dead
    newly = infected & ~pop.diagnosed & (u_diag < p_diag)
    pop.diagnosed |= newly
    if year >= params.treatment_start_year:
        start = np.flatnonzero(pop.diagnosed & ~pop.treated & infected)
        start_treatment(pop, start, p_success, therapy_mode, u_success, reduction, long_ap)
    return np.flatnonzero(newly)


def replace_dead(pop: Population, idx) -> None:
    """Replace dead agents by fresh susceptibles on the same nodes."""
    idx = _as_index(idx)
    if not np.all(pop.dead[idx]):
        raise LogicError(f"cannot replace living agents: {idx[~pop.dead[idx]].tolist()[:10]}")
    partners = pop.steady_partner[idx]
    partners = partners[partners >= 0]
    pop.steady_partner[partners] = -1
    pop.steady_years_left[partners] = 0
    pop.stage[idx] = Stage.NEGATIVE
    pop.years_in_stage[idx] = 0
    pop.ap_duration[idx] = -1
    pop.aids_duration[idx] = -1
    pop.diagnosed[idx] = False
    pop.treated[idx] = False
    pop.treatment_successful[idx] = False
    pop.infectivity_reduction[idx] = 1.0
    pop.steady_partner[idx] = -1
    pop.steady_years_left[idx] = 0
    pop.infection_year[idx] = -1
    pop.dead[idx] = False


def seed_prevalent(pop: Population, idx, rng: RngStream, params: DiseaseParams,
                   diagnosed_fraction: float, year: int, therapy_mode: TherapyMode = TherapyMode.MODERATE) -> None:
    """Place agents ``idx`` somewhere inside their asymptomatic period.

    Used for the initial state: each gets an AP duration and a time already
    spent in AP drawn uniformly from ``0 .. duration - 1``; a fraction is
    already diagnosed and, when therapy is available, treated.
    """
    idx = _as_index(idx)
    if np.any(pop.stage[idx] != Stage.NEGATIVE):
        raise LogicError("initial infections must be placed on susceptible agents")
    k = len(idx)
    diagnosed = rng.random(k) < diagnosed_fraction
    success = rng.random(k) < params.p_success
    treat = diagnosed & (year + 1 >= params.treatment_start_year)
    long_course = treat & success
    duration = np.where(long_course, params.ap_treated.sample(rng, k), params.ap_untreated.sample(rng, k))
    duration = np.maximum(duration, 1)
    elapsed = np.floor(rng.random(k) * duration).astype(np.int64)
    reduction = np.asarray(params.reduction(therapy_mode).sample(rng, k), dtype=float)

    pop.stage[idx] = Stage.AP
    pop.infection_year[idx] = year - 1 - elapsed
    pop.years_in_stage[idx] = elapsed
    pop.ap_duration[idx] = duration
    pop.diagnosed[idx] = diagnosed
    pop.treated[idx] = treat
    pop.treatment_successful[idx] = long_course
    pop.infectivity_reduction[idx] = np.where(long_course, reduction, 1.0)
