import re

import numpy as np
import pytest

from canepi.disease import DiseaseParams, Population, Stage, infect
from canepi.engine import (NetworkParams, PopulationParams, SimulationConfig, State, apply_overrides, initialize,
                           run_realization, run_scenario, step_year)
from canepi.errors import ConfigError, ParameterError
from canepi.netgen import EdgeSet
from canepi.partnerships import PartnershipParams
from canepi.stochastics import DistributionSpec, RngStream
from canepi.transmission import PerActBase, TransmissionParams, preset

SMALL = SimulationConfig(population=PopulationParams(n=400, initial_infected=100),
                         network=NetworkParams(k_max=60), start_year=1985, end_year=2000, realizations=3, seed=7)

LETTERS = {Stage.NEGATIVE: "N", Stage.PI: "P", Stage.AP: "A", Stage.AIDS: "I"}
# optional initial AP spell, then complete lives, then an unfinished one
LIFE = re.compile(r"^(?:A+I+|A+$)?(?:N*PA+I+)*N*(?:PA*I*)?$")


def stage_strings(stage_log):
    table = np.array([LETTERS[s] for s in Stage])
    return ["".join(table[col]) for col in stage_log.T]


@pytest.fixture(scope="module")
def default_state():
    return initialize(SimulationConfig(), RngStream(1984, 0, (0,)))


class TestInitialize:
    def test_entry_counts(self, default_state):
        census = default_state.pop.census()
        assert sum(census.values()) == 2299
        assert census[Stage.NEGATIVE] == 1728
        assert census[Stage.AP] == 571

    def test_degree_census_matches_sequence(self, default_state):
        assert np.array_equal(default_state.edges.degrees(2299), default_state.degrees)

    def test_steady_edges_match_partners(self, default_state):
        s = default_state
        steady = s.edges.pairs[s.edges.steady]
        assert np.all(s.pop.steady_partner[steady[:, 0]] == steady[:, 1])
        assert len(steady) == (s.pop.steady_partner >= 0).sum() // 2

    def test_degree_weighted_assignment(self):
        cfg = SMALL.replace(population=PopulationParams(n=400, initial_infected=100, initial_assignment="degree"))
        state = initialize(cfg, RngStream(1))
        assert state.pop.infected.sum() == 100

    def test_bad_assignment(self):
        cfg = SMALL.replace(population=PopulationParams(n=400, initial_infected=10, initial_assignment="x"))
        with pytest.raises(ConfigError):
            initialize(cfg, RngStream(1))


class TestConfig:
    def test_realizations_must_be_positive(self):
        with pytest.raises(ConfigError):
            SimulationConfig(realizations=0)

    def test_year_order(self):
        with pytest.raises(ConfigError):
            SimulationConfig(start_year=2000, end_year=1990)

    def test_overrides(self):
        cfg = apply_overrides(SMALL, {"disease": {"p_diag": 0.2}})
        assert cfg.disease.p_diag == 0.2 and SMALL.disease.p_diag != 0.2
        with pytest.raises(ConfigError) as info:
            apply_overrides(SMALL, {"disease": {"p_diagnosis": 0.2}})
        assert info.value.key == "disease.p_diagnosis"


def single_pair_state():
    cfg = SimulationConfig(
        population=PopulationParams(n=2, initial_infected=1),
        partnerships=PartnershipParams(p_form=0.0, steady_acts=DistributionSpec("DU", (5, 5))),
        transmission=TransmissionParams(base=PerActBase(1.0, 1.0, 1.0, 1.0)),
        disease=DiseaseParams(p_diag=0.0),
        realizations=1)
    pop = Population(2)
    infect(pop, [0], 1980)
    pop.stage[0] = Stage.AP
    pop.ap_duration[0] = 20
    pop.steady_partner[:] = [1, 0]
    pop.steady_years_left[:] = 10
    edges = EdgeSet([[0, 1]], [True])
    return State(cfg, np.array([1, 1]), edges, pop, RngStream(3), 1984)


class TestStep:
    def test_certain_transmission(self):
        state = single_pair_state()
        m = step_year(state, preset("rs"), 1985)
        assert m.new_infections == 1
        assert state.pop.stage[1] == Stage.PI
        assert m.susceptible_person_years == 0.5
        assert m.incidence_per_100py == pytest.approx(200.0)

    def test_all_negative_is_absorbing(self):
        state = single_pair_state()
        state.pop = Population(2)
        state.pop.steady_partner[:] = [1, 0]
        state.pop.steady_years_left[:] = 10
        m = step_year(state, preset("rs"), 1985)
        assert m.new_infections == 0 and m.incidence_per_100py == 0.0

    def test_year_outside_range(self):
        state = single_pair_state()
        with pytest.raises(ParameterError):
            step_year(state, preset("rs"), 1900)

    def test_new_cases_do_not_transmit_in_their_first_year(self):
        # a chain 0 -> 1 -> 2 with certain transmission takes two years
        state = single_pair_state()
        cfg = state.config
        pop = Population(3)
        infect(pop, [0], 1980)
        pop.stage[0], pop.ap_duration[0] = Stage.AP, 20
        state.pop = pop
        state.degrees = np.array([1, 2, 1])
        state.edges = EdgeSet([[0, 1], [1, 2]])
        state.config = cfg.replace(population=PopulationParams(n=3, initial_infected=1))
        first = step_year(state, preset("rs"), 1985)
        assert first.new_infections == 1 and pop.stage[2] == Stage.NEGATIVE
        second = step_year(state, preset("rs"), 1986)
        assert second.new_infections == 1 and pop.stage[2] == Stage.PI

    def test_same_year_chains_switch(self):
        state = single_pair_state()
        pop = Population(3)
        infect(pop, [0], 1980)
        pop.stage[0], pop.ap_duration[0] = Stage.AP, 20
        state.pop = pop
        state.degrees = np.array([1, 2, 1])
        state.edges = EdgeSet([[0, 1], [1, 2]])
        state.config = state.config.replace(
            population=PopulationParams(n=3, initial_infected=1),
            transmission=TransmissionParams(base=PerActBase(1.0, 1.0, 1.0, 1.0), same_year_chains=True))
        assert step_year(state, preset("rs"), 1985).new_infections == 2


class TestRealization:
    def test_zero_initial_infected(self):
        cfg = SMALL.replace(population=PopulationParams(n=400, initial_infected=0))
        result = run_scenario("rs", cfg)
        assert np.all(result.series("incidence_per_100py") == 0)
        assert np.all(result.series("new_infections") == 0)

    def test_event_log_cross_check_and_trajectories(self):
        cfg = SimulationConfig(realizations=1)
        out = run_realization(preset("rs"), cfg, 0, trace=True)
        log = out.stage_log
        assert log.shape == (len(cfg.years) + 1, 2299)
        transitions = ((log[:-1] == Stage.NEGATIVE) & (log[1:] == Stage.PI)).sum()
        assert transitions == sum(m.new_infections for m in out.metrics)
        bad = [s for s in stage_strings(log) if not LIFE.match(s)]
        assert not bad, bad[:3]
        assert all(m.population == 2299 for m in out.metrics)

    def test_determinism(self):
        a = run_scenario("p2", SMALL)
        b = run_scenario("p2", SMALL)
        assert np.array_equal(a.series("incidence_per_100py"), b.series("incidence_per_100py"))
        assert np.array_equal(a.series("diagnosed_fraction"), b.series("diagnosed_fraction"))
        c = run_scenario("p2", SMALL.replace(seed=8))
        assert not np.array_equal(a.series("new_infections"), c.series("new_infections"))

    def test_workers_do_not_change_output(self):
        a = run_scenario("rs", SMALL)
        b = run_scenario("rs", SMALL, workers=2)
        assert np.array_equal(a.series("new_infections"), b.series("new_infections"))

    def test_single_realization_mean(self):
        result = run_scenario("rs", SMALL.replace(realizations=1))
        assert np.array_equal(result.mean(), result.series("incidence_per_100py")[0])
        assert np.all(result.sd() == 0)

    def test_mean_is_arithmetic_over_realizations(self):
        result = run_scenario("rs", SMALL)
        assert np.allclose(result.mean("diagnosed_fraction"), result.series("diagnosed_fraction").mean(axis=0))
        assert result.years == SMALL.years
        assert list(result.mean_incidence()) == SMALL.years

    def test_conservation(self):
        result = run_scenario("p5", SMALL)
        stages = sum(result.series(s) for s in ("stage_negative", "stage_pi", "stage_ap", "stage_aids"))
        assert np.all(stages == 400)

    def test_coupled_scenarios_share_history_until_switch(self):
        cfg = SMALL.replace(end_year=2010)
        rs, p5 = run_scenario("rs", cfg), run_scenario("p5", cfg)
        upto = np.array(cfg.years) <= 2006
        assert np.array_equal(rs.series("new_infections")[:, upto], p5.series("new_infections")[:, upto])

    def test_network_export(self, tmp_path):
        run_realization(preset("rs"), SMALL.replace(end_year=1987), 0, network_dir=tmp_path)
        files = sorted(p.name for p in tmp_path.iterdir())
        assert files == ["edges_1985.csv", "edges_1986.csv", "edges_1987.csv"]
        header = (tmp_path / "edges_1985.csv").read_text().splitlines()[0]
        assert header == "node_i,node_j,tag"

    def test_shared_network(self):
        cfg = SMALL.replace(network=NetworkParams(k_max=60, shared=True))
        result = run_scenario("rs", cfg)
        assert len(result.realizations) == 3
