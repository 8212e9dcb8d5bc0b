"""Yearly simulation loop, realizations and scenario runs.

Each year executes, in order: casual rewiring, steady partnership turnover,
act scheduling against the start-of-year infection census, infection trials,
infection of new cases, diagnosis and treatment, disease progression, and
replacement of the dead.

Random draws are keyed by ``(realization, year, purpose)``.  Two scenarios run
with the same master seed therefore share the same network, initial state and
per-year variates; they only drift apart through the state they produce.
"""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import YearMetrics, incidence, susceptible_person_years, write_edge_csv
from .disease import (DiseaseParams, Population, Stage, TherapyMode, advance_year, diagnose_and_treat_step,
                      infect, replace_dead, seed_prevalent)
from .errors import ConfigError, GenerationError, ParameterError
from .netgen import EdgeSet, annual_rewire, generate_degree_sequence, wire_configuration_model
from .partnerships import PartnershipParams, form_and_dissolve_steady, schedule_acts, steady_pairs
from .stochastics import RNG_ALGORITHM, RngStream
from .transmission import (PRESETS, ScenarioSpec, TransmissionParams, node_infection_probability,
                           pair_probabilities, preset, scenario_factors)

log = logging.getLogger(__name__)

# purpose keys for per-year substreams
_INIT, _NETWORK, _PARTNERS, _ACTS, _INFECTION, _DIAGNOSIS, _PROGRESSION = range(7)
_MAX_CHAIN_ROUNDS = 10


@dataclass
class PopulationParams:
    n: int = 2299
    initial_infected: int = 571
    initial_diagnosed: float = 0.4
    initial_assignment: str = "uniform"


@dataclass
class NetworkParams:
    gamma: float = 1.6
    k_max: int = 200
    p_zero: float = 0.01
    shared: bool = False


@dataclass
class SimulationConfig:
    population: PopulationParams = field(default_factory=PopulationParams)
    network: NetworkParams = field(default_factory=NetworkParams)
    disease: DiseaseParams = field(default_factory=DiseaseParams)
    partnerships: PartnershipParams = field(default_factory=PartnershipParams)
    transmission: TransmissionParams = field(default_factory=TransmissionParams)
    start_year: int = 1985
    end_year: int = 2044
    realizations: int = 30
    seed: int = 1984

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigError("must be at least 1", key="simulation.realizations")
        if self.start_year >= self.end_year:
            raise ConfigError("start_year must precede end_year", key="simulation.start_year")

    @property
    def years(self) -> list[int]:
        return list(range(self.start_year, self.end_year + 1))

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)


def apply_overrides(config: SimulationConfig, overrides: dict) -> SimulationConfig:
    """Copy of ``config`` with ``{section: {key: value}}`` overrides applied."""
    if not overrides:
        return config
    changes = {}
    for section, values in overrides.items():
        current = getattr(config, section, None)
        if not dataclasses.is_dataclass(current):
            raise ConfigError("unknown section", key=section)
        unknown = set(values) - {f.name for f in dataclasses.fields(current)}
        if unknown:
            raise ConfigError("unknown key", key=f"{section}.{sorted(unknown)[0]}")
        changes[section] = dataclasses.replace(current, **values)
    return dataclasses.replace(config, **changes)


@dataclass
class State:
    config: SimulationConfig
    degrees: np.ndarray
    edges: EdgeSet
    pop: Population
    rng: RngStream
    year: int


def initial_degrees(config: SimulationConfig, rng: RngStream) -> np.ndarray:
    net = config.network
    return generate_degree_sequence(config.population.n, net.gamma, net.k_max, net.p_zero, rng.substream(_INIT, 0))


def initialize(config: SimulationConfig, rng: RngStream, degrees: Optional[np.ndarray] = None,
               attempts: int = 5) -> State:
    """Build the network and the state of the year before ``start_year``."""
    popcfg = config.population
    n = popcfg.n
    if not 0 <= popcfg.initial_infected <= n:
        raise ConfigError("must lie between 0 and population size", key="population.initial_infected")
    edges = None
    for attempt in range(attempts):
        stream = rng.substream(_INIT, 1, attempt)
        if degrees is None or attempt > 0 and not config.network.shared:
            net = config.network
            degrees = generate_degree_sequence(n, net.gamma, net.k_max, net.p_zero, stream.substream(0))
        try:
            edges = wire_configuration_model(degrees, stream.substream(1))
            break
        except GenerationError as exc:
            log.warning("initial wiring failed (%s); resampling", exc)
    if edges is None:
        raise ConfigError("no simple graph could be wired for this degree distribution", key="network")

    pop = Population(n)
    seed_rng = rng.substream(_INIT, 2)
    k = popcfg.initial_infected
    if popcfg.initial_assignment == "uniform":
        chosen = seed_rng.permutation(n)[:k]
    elif popcfg.initial_assignment == "degree":
        weights = degrees / degrees.sum() if degrees.sum() else None
        chosen = seed_rng.generator.choice(n, size=k, replace=False, p=weights)
    else:
        raise ConfigError("must be 'uniform' or 'degree'", key="population.initial_assignment")
    seed_prevalent(pop, np.sort(chosen), seed_rng, config.disease, popcfg.initial_diagnosed,
                   config.start_year - 1)
    form_and_dissolve_steady(pop, edges, config.partnerships.p_form, rng.substream(_INIT, 3),
                             config.partnerships, degrees)
    edges = edges.with_steady(pop.steady_partner)
    return State(config, degrees, edges, pop, rng, config.start_year - 1)


def _transmit(state: State, risk: float, year: int, sources=None, round_key: int = 0) -> np.ndarray:
    cfg = state.config
    pop = state.pop
    acts = schedule_acts(pop, state.edges, state.rng.substream(year, _ACTS, round_key), cfg.partnerships,
                         cfg.disease.aids_sexually_active, sources=sources)
    prob = node_infection_probability(acts, pair_probabilities(acts, pop, risk, cfg.transmission), pop.n)
    u = state.rng.substream(year, _INFECTION, round_key).random(pop.n)
    return np.flatnonzero((u < prob) & (pop.stage == Stage.NEGATIVE))


def step_year(state: State, scenario: ScenarioSpec, year: int, on_edges=None) -> YearMetrics:
    """Advance ``state`` through calendar ``year`` and report its metrics."""
    cfg = state.config
    if not cfg.start_year <= year <= cfg.end_year:
        raise ParameterError(f"year {year} outside {cfg.start_year}..{cfg.end_year}")
    pop = state.pop
    rng = state.rng
    risk, mode = scenario_factors(scenario, year, cfg.transmission.historical_risk)

    state.edges = annual_rewire(state.edges, state.degrees, steady_pairs(pop), rng.substream(year, _NETWORK))
    form_and_dissolve_steady(pop, state.edges, cfg.partnerships.p_form, rng.substream(year, _PARTNERS),
                             cfg.partnerships, state.degrees)
    state.edges = state.edges.with_steady(pop.steady_partner)
    if on_edges is not None:
        on_edges(year, state.edges)

    susceptible_start = int((pop.stage == Stage.NEGATIVE).sum())
    new = _transmit(state, risk, year)
    infect(pop, new, year)
    new_total = len(new)
    if cfg.transmission.same_year_chains:
        for round_key in range(1, _MAX_CHAIN_ROUNDS + 1):
            if not len(new):
                break
            new = _transmit(state, risk, year, sources=new, round_key=round_key)
            infect(pop, new, year)
            new_total += len(new)

    dis = cfg.disease
    diagnosed = diagnose_and_treat_step(pop, dis.p_diag, dis.p_success, mode, rng.substream(year, _DIAGNOSIS),
                                        dis, year)
    advance_year(pop, rng.substream(year, _PROGRESSION), dis, year)
    dead = np.flatnonzero(pop.dead)
    replace_dead(pop, dead)
    state.year = year

    spy = susceptible_person_years(susceptible_start, new_total)
    census = pop.census()
    return YearMetrics(
        year=year,
        new_infections=new_total,
        susceptible_person_years=spy,
        incidence_per_100py=incidence(new_total, spy),
        diagnosed_fraction=pop.diagnosed_fraction(),
        stage_negative=census[Stage.NEGATIVE],
        stage_pi=census[Stage.PI],
        stage_ap=census[Stage.AP],
        stage_aids=census[Stage.AIDS],
        new_diagnoses=len(diagnosed),
        deaths=len(dead),
        steady_pairs=int((pop.steady_partner >= 0).sum() // 2),
        risk_factor=risk,
        therapy_mode=TherapyMode(mode).value,
    )


@dataclass
class RealizationOutput:
    index: int
    metrics: list[YearMetrics]
    attempts: int = 1
    stage_log: Optional[np.ndarray] = None


def run_realization(scenario: ScenarioSpec, config: SimulationConfig, index: int,
                    degrees: Optional[np.ndarray] = None, trace: bool = False,
                    network_dir: Optional[Path] = None, max_attempts: int = 4) -> RealizationOutput:
    """One realization from initialization through ``end_year``.

    A realization that raises a generation or config error is retried on a
    fresh stream, at most ``max_attempts`` times in total.
    """
    last_error = None
    for attempt in range(max_attempts):
        rng = RngStream(config.seed, index, (attempt,))
        try:
            state = initialize(config, rng, degrees)
            log_rows = [state.pop.stage.copy()] if trace else None
            on_edges = None
            if network_dir is not None:
                network_dir.mkdir(parents=True, exist_ok=True)

                def on_edges(year, edges):
                    write_edge_csv(network_dir / f"edges_{year}.csv", edges)

            metrics = []
            for year in config.years:
                metrics.append(step_year(state, scenario, year, on_edges))
                if trace:
                    log_rows.append(state.pop.stage.copy())
            return RealizationOutput(index, metrics, attempt + 1, np.array(log_rows) if trace else None)
        except (GenerationError, ConfigError) as exc:
            last_error = exc
            log.warning("realization %d attempt %d failed: %s", index, attempt + 1, exc)
    raise last_error


@dataclass
class SimulationResult:
    """All realizations of one scenario plus their year-wise averages."""

    scenario: ScenarioSpec
    config: SimulationConfig
    realizations: list[list[YearMetrics]]

    @property
    def name(self) -> str:
        return self.scenario.name

    @property
    def years(self) -> list[int]:
        return [m.year for m in self.realizations[0]]

    def series(self, metric: str) -> np.ndarray:
        """``(realizations, years)`` array of one metric."""
        return np.array([[getattr(m, metric) for m in run] for run in self.realizations], dtype=float)

    def mean(self, metric: str = "incidence_per_100py") -> np.ndarray:
        return self.series(metric).mean(axis=0)

    def sd(self, metric: str = "incidence_per_100py") -> np.ndarray:
        values = self.series(metric)
        if len(values) < 2:
            return np.zeros(values.shape[1])
        return values.std(axis=0, ddof=1)

    def mean_incidence(self) -> dict[int, float]:
        return dict(zip(self.years, self.mean().tolist()))

    def metadata(self) -> dict:
        return {
            "tool": f"canepi {__version__}",
            "scenario": self.scenario.name,
            "master_seed": self.config.seed,
            "rng": RNG_ALGORITHM,
            "realizations": len(self.realizations),
        }


def _run_one(args):
    scenario, config, index, degrees, network_dir = args
    return run_realization(scenario, config, index, degrees, network_dir=network_dir).metrics


def run_scenario(scenario, config: SimulationConfig, workers: int = 1,
                 network_dir: Optional[Path] = None) -> SimulationResult:
    """Run ``config.realizations`` independent realizations of ``scenario``.

    Realization ``i`` uses stream ``i`` of the master seed in every scenario,
    which couples scenarios through common random numbers.  Results are
    collected in realization order, so ``workers`` never changes the output.
    ``network_dir`` receives the yearly edge lists of realization 0.
    """
    if isinstance(scenario, str):
        scenario = preset(scenario)
    config = apply_overrides(config, scenario.overrides)
    degrees = initial_degrees(config, RngStream(config.seed, 2**63)) if config.network.shared else None
    jobs = [(scenario, config, i, degrees, network_dir if i == 0 else None) for i in range(config.realizations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(job) for job in jobs]
    return SimulationResult(scenario, config, runs)


__all__ = [
    "PRESETS", "NetworkParams", "PopulationParams", "RealizationOutput", "ScenarioSpec", "SimulationConfig",
    "SimulationResult", "State", "apply_overrides", "initialize", "run_realization", "run_scenario", "step_year",
]
