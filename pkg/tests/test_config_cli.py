import json
import subprocess
import sys

import pytest

from canepi.analysis import read_table
from canepi.cli import main
from canepi.config import config_from_dict, config_to_dict, parse_config, presets_document
from canepi.disease import TherapyMode
from canepi.engine import SimulationConfig
from canepi.errors import ConfigError

SMALL = {"population": {"n": 300, "initial_infected": 60}, "network": {"k_max": 50}}


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def metadata(path):
    meta = {}
    for line in path.read_text().splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition(": ")
        meta[key] = value
    return meta


class TestParseConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        config, scenarios = parse_config(path)
        assert config == SimulationConfig()
        assert (config.population.n, config.network.gamma, config.network.k_max, config.network.p_zero) == \
            (2299, 1.6, 200, 0.01)
        assert config.population.initial_infected == 571
        assert config.partnerships.steady_acts.to_list() == ["P", 30]
        assert config.transmission.base.pi_urai == 0.22
        assert list(scenarios) == ["rs", "p1", "p2", "p3", "p4", "p5"]

    def test_empty_object(self):
        assert config_from_dict({})[0] == SimulationConfig()

    def test_negative_gamma_names_key(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            parse_config(write_json(tmp_path / "c.json", {"network": {"gamma": -1}}))
        assert info.value.key == "network.gamma"
        assert "network.gamma" in str(info.value)

    @pytest.mark.parametrize("doc,key", [
        ({"disease": {"p_diag": 1.5}}, "disease.p_diag"),
        ({"disease": {"p_dig": 0.1}}, "disease.p_dig"),
        ({"network": {"k_max": "lots"}}, "network.k_max"),
        ({"partnerships": {"duration": ["DU", 2, 1]}}, "partnerships.duration"),
        ({"simulation": {"realizations": 0}}, "simulation.realizations"),
        ({"population": {"n": 10, "initial_infected": 20}}, "population.initial_infected"),
        ({"scenarios": {"p5": {"therapy": "magic"}}}, "scenarios.p5.therapy"),
        ({"scenarios": {"bad name": {}}}, "scenarios.bad name"),
        ({"scenarios": {"x": {"overrides": {"disease": {"p_diag": 2}}}}}, "scenarios.x.overrides.disease.p_diag"),
        ({"weather": {}}, "weather"),
    ])
    def test_errors_name_the_key(self, doc, key):
        with pytest.raises(ConfigError) as info:
            config_from_dict(doc)
        assert info.value.key == key

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "absent.json")

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ not json")
        with pytest.raises(ConfigError) as info:
            parse_config(path)
        assert "line 1" in str(info.value)

    def test_overrides_win(self):
        config, scenarios = config_from_dict({
            "disease": {"p_diag": 0.2, "ap_untreated": ["B", 20, 0.5]},
            "simulation": {"realizations": 5, "seed": 9},
            "scenarios": {"p5": {"risk_multiplier": 1.4}, "mine": {"therapy": "optimistic", "risk_multiplier": 2}},
        })
        assert config.disease.p_diag == 0.2 and config.disease.ap_untreated.mean == 10
        assert config.realizations == 5 and config.seed == 9
        assert scenarios["p5"].risk_multiplier == 1.4
        assert scenarios["mine"].therapy is TherapyMode.OPTIMISTIC and scenarios["mine"].risk_multiplier == 2.0

    def test_roundtrip(self):
        config, _ = config_from_dict({"disease": {"p_diag": 0.07}, "transmission": {"historical_risk": {1990: 1.1}}})
        again, _ = config_from_dict(json.loads(json.dumps(config_to_dict(config))))
        assert again == config

    def test_presets_document(self):
        doc = presets_document()["scenarios"]
        assert set(doc) == {"rs", "p1", "p2", "p3", "p4", "p5"}
        assert doc["p5"]["risk_multiplier"] == 1.3 and doc["p5"]["therapy"] == "optimistic"
        _, scenarios = config_from_dict(presets_document())
        assert scenarios["p3"].risk_multiplier == 1.1


@pytest.fixture
def small_config(tmp_path):
    return write_json(tmp_path / "small.json", SMALL)


class TestCli:
    def run(self, *argv):
        return main(list(argv))

    def test_realizations_echoed(self, tmp_path, small_config, capsys):
        out = tmp_path / "out"
        code = self.run("run", "--config", small_config, "--scenarios", "rs", "--seed", "42",
                        "--realizations", "5", "--years", "1985:1990", "--out", str(out))
        assert code == 0
        meta = metadata(out / "rs.csv")
        assert meta["realizations"] == "5" and meta["master_seed"] == "42"
        assert meta["rng"] == "numpy.PCG64/SeedSequence"
        assert meta["tool"].startswith("canepi ")
        assert json.loads(meta["config"])["simulation"]["realizations"] == 5

    def test_byte_identical_reruns(self, tmp_path, small_config):
        args = ["run", "--config", small_config, "--scenarios", "rs", "--seed", "42", "--realizations", "2",
                "--years", "1985:1995"]
        assert self.run(*args, "--out", str(tmp_path / "a")) == 0
        assert self.run(*args, "--out", str(tmp_path / "b")) == 0
        assert (tmp_path / "a" / "rs.csv").read_bytes() == (tmp_path / "b" / "rs.csv").read_bytes()

    def test_seed_from_environment(self, tmp_path, small_config, monkeypatch):
        monkeypatch.setenv("CANEPI_SEED", "77")
        assert self.run("run", "--config", small_config, "--scenarios", "rs", "--realizations", "1",
                        "--years", "1985:1987", "--out", str(tmp_path)) == 0
        assert metadata(tmp_path / "rs.csv")["master_seed"] == "77"

    def test_all_presets_write_seven_files(self, tmp_path, small_config, capsys):
        out = tmp_path / "out"
        code = self.run("run", "--config", small_config, "--scenarios", "rs,p1,p2,p3,p4,p5", "--seed", "1",
                        "--realizations", "2", "--years", "2005:2012", "--out", str(out))
        assert code == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["comparison.csv", "p1.csv", "p2.csv", "p3.csv", "p4.csv", "p5.csv", "rs.csv"]
        rows = read_table(out / "comparison.csv")
        assert [(r["year"], r["scenario"]) for r in rows] == [("2010", s) for s in ("p1", "p2", "p3", "p4", "p5")]

    def test_historical_t_test(self, tmp_path, small_config, capsys):
        hist = tmp_path / "acs.csv"
        hist.write_text("year,incidence_per_100py\n" + "".join(f"{y},{1 + (y % 3) / 10}\n" for y in range(1985, 1996)))
        code = self.run("run", "--config", small_config, "--scenarios", "rs", "--realizations", "2",
                        "--years", "1985:1992", "--historical", str(hist), "--out", str(tmp_path / "o"))
        assert code == 0
        assert "df=7" in capsys.readouterr().out  # 8 overlapping years

    def test_export_network(self, tmp_path, small_config):
        out = tmp_path / "o"
        assert self.run("run", "--config", small_config, "--scenarios", "rs", "--realizations", "1",
                        "--years", "1985:1986", "--export-network", "--out", str(out)) == 0
        assert sorted(p.name for p in (out / "network" / "rs").iterdir()) == ["edges_1985.csv", "edges_1986.csv"]

    @pytest.mark.parametrize("argv", [
        ["run", "--scenarios", "p9"],
        ["run", "--years", "2000"],
        ["run", "--seed", "-3"],
        ["run", "--realizations", "0"],
        ["run", "--config", "/nonexistent/config.json"],
    ])
    def test_config_errors_exit_2(self, tmp_path, argv, capsys):
        assert self.run(*argv, "--out", str(tmp_path)) == 2
        assert "config error" in capsys.readouterr().err

    def test_runtime_error_exit_3(self, tmp_path, small_config, capsys):
        bad = tmp_path / "hist.csv"
        bad.write_text("when,value\n")
        code = self.run("run", "--config", small_config, "--scenarios", "rs", "--realizations", "1",
                        "--years", "1985:1986", "--historical", str(bad), "--out", str(tmp_path / "o"))
        assert code == 3

    def test_validate_config(self, tmp_path, capsys):
        path = write_json(tmp_path / "c.json", {"disease": {"p_diag": 0.3}})
        assert self.run("validate-config", path) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["disease"]["p_diag"] == 0.3 and "p5" in doc["scenarios"]
        bad = write_json(tmp_path / "bad.json", {"network": {"gamma": -1}})
        assert self.run("validate-config", bad) == 2
        assert "network.gamma" in capsys.readouterr().err

    def test_presets_command(self, capsys):
        assert self.run("presets") == 0
        assert json.loads(capsys.readouterr().out) == presets_document()

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "canepi", "presets"], capture_output=True, text=True)
        assert proc.returncode == 0 and '"rs"' in proc.stdout
