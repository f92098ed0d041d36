import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from suppalign.experiments.cli import main
from suppalign.experiments.report import CRITERIA, emit_report, evaluate
from suppalign.experiments.results import (COLUMNS, ResultTable, parse_point, point_label,
                                           summary_dict, write_csv)
from suppalign.experiments.runners import (RUNNERS, chunk_rng, run_papr_ccdf, run_power_utilization,
                                           run_psd_experiment)
from suppalign.experiments.scenario import (DEFAULTS, ScenarioError, bundled_scenarios,
                                            load_scenario, parse_scenario)

TINY = {
    "name": "tiny", "seed": 3, "chunk_symbols": 40,
    "psd": {"num_symbols": 80, "symbols_per_channel": 20,
            "points": [{"alpha": 0.25, "lam": 0.0}, {"alpha": 0.25, "lam": 0.5, "R": 2}]},
    "power": {"alphas": [0.0, 0.25], "lams": [0.0, 1.0], "num_symbols": 40,
              "symbols_per_channel": 20},
    "ccdf": {"num_symbols": 120, "symbols_per_channel": 20, "probability": 0.1,
             "points": [{"alpha": 0.25, "lam": 1.0}]},
}


class TestScenario:
    def test_defaults_fill_in(self):
        sc = parse_scenario({"name": "x", "tradeoff": {"alpha": 0.1}})
        assert sc.sections["tradeoff"]["alpha"] == 0.1
        assert sc.sections["tradeoff"]["lams"] == DEFAULTS["tradeoff"]["lams"]
        assert sc.experiments == ["tradeoff"]

    @pytest.mark.parametrize("doc, match", [
        ({}, "name"),
        ({"name": "x", "schema": 2}, "schema"),
        ({"name": "x", "bogus": {}}, "unknown section"),
        ({"name": "x", "psd": {"points": [{"alpha": 0.1, "lam": 0}], "nope": 1}}, "unknown keys"),
        ({"name": "x", "psd": {"points": []}}, "non-empty"),
        ({"name": "x", "psd": {"points": [{"alpha": 0.1}]}}, "'alpha' and 'lam'"),
        ({"name": "x", "psd": {"points": [{"alpha": 0.1, "lam": 0, "beta": 1}]}}, "unknown keys"),
        ({"name": "x", "system": {"Q": 3}}, "system"),
        ({"name": "x", "system": {"L": 80}}, "system"),
        ({"name": "x", "chunk_symbols": 100, "power": {"symbols_per_channel": 30}}, "divide"),
        ({"name": "x", "ccdf": {"num_symbols": 100, "points": [{"alpha": 1, "lam": 1}]}}, "resolve"),
        ({"name": "x", "leakage": {"num_trials": 10}}, "1000"),
        ({"name": "x", "leakage": {"lam0_rule": "mean"}}, "lam0_rule"),
        ({"name": "x", "ber": {"snr_db": []}}, "non-empty"),
        ({"name": "x", "tradeoff": {"num_symbols": 0}}, "positive"),
    ])
    def test_rejects(self, doc, match):
        with pytest.raises(ScenarioError, match=match):
            parse_scenario(doc)

    def test_bundled(self):
        names = bundled_scenarios()
        assert {"acceptance", "smoke", "psd", "ccdf", "ber"} <= set(names)
        for name in names:
            assert load_scenario(name).name == name

    def test_load_from_file(self, tmp_path):
        p = tmp_path / "s.toml"
        p.write_text('name = "f"\nseed = 4\n[power]\nalphas = [0.5]\n')
        sc = load_scenario(p)
        assert sc.seed == 4 and sc.sections["power"]["alphas"] == [0.5]
        assert sc.with_seed(9).seed == 9 and sc.seed == 4

    def test_bad_toml(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("name = \n")
        with pytest.raises(ScenarioError):
            load_scenario(p)

    def test_missing(self):
        with pytest.raises(ScenarioError):
            load_scenario("no-such-scenario")


class TestResults:
    @given(st.dictionaries(st.sampled_from(["alpha", "lam", "R", "arm"]),
                           st.one_of(st.integers(-5, 5), st.floats(0, 10, allow_nan=False),
                                     st.sampled_from(["sa", "plain"]))))
    def test_point_label_roundtrip(self, axes):
        back = parse_point(point_label(**axes))
        assert set(back) == set(axes)
        for k, v in axes.items():
            assert back[k] == v

    def test_table_access(self):
        t = ResultTable("s", "e", 1, "0")
        t.add("m", 1.5, {"alpha": 0.1})
        t.add("m", 2.5, {"alpha": 0.2}, ci=(2.0, 3.0))
        assert t.get("m", alpha=0.2) == 2.5
        assert sorted(v for _, v in t.select("m")) == [1.5, 2.5]
        with pytest.raises(KeyError):
            t.get("m", alpha=0.3)

    def test_csv_layout(self, tmp_path):
        t = ResultTable("s", "e", 1, "0")
        t.add("m", 1.0, {"alpha": 0.1})
        path = write_csv([t], tmp_path / "r.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(COLUMNS)
        assert lines[1] == "s,e,alpha=0.1,m,1.0,,,1,0"

    def test_summary_skips_curves(self):
        t = ResultTable("s", "psd", 1, "0")
        t.add("psd_db", -3.0, {"bin": 1})
        t.add("oob_reduction_db", 20.0, {"alpha": 0.1})
        assert summary_dict([t]) == {"psd": {"alpha=0.1": {"oob_reduction_db": 20.0}}}


class TestRunners:
    def test_chunk_streams_are_distinct_and_stable(self):
        a = chunk_rng(1, "psd", 0).standard_normal(3)
        assert np.array_equal(a, chunk_rng(1, "psd", 0).standard_normal(3))
        assert not np.array_equal(a, chunk_rng(1, "psd", 1).standard_normal(3))
        assert not np.array_equal(a, chunk_rng(1, "ccdf", 0).standard_normal(3))

    def test_deterministic_and_independent_of_jobs(self, tmp_path):
        sc = parse_scenario(TINY)
        one = write_csv([run_psd_experiment(sc, 1)], tmp_path / "a.csv").read_bytes()
        again = write_csv([run_psd_experiment(sc, 1)], tmp_path / "b.csv").read_bytes()
        two = write_csv([run_psd_experiment(sc, 2)], tmp_path / "c.csv").read_bytes()
        assert one == again == two

    def test_seed_changes_results(self):
        sc = parse_scenario(TINY)
        a = run_psd_experiment(sc).get("oob_reduction_db", alpha=0.25, lam=0.0, R=0)
        b = run_psd_experiment(sc.with_seed(4)).get("oob_reduction_db", alpha=0.25, lam=0.0, R=0)
        assert a != b

    def test_psd_rows(self):
        t = run_psd_experiment(parse_scenario(TINY))
        assert len(t.select("psd_db")) == 3 * 256
        assert t.get("oob_reduction_db", alpha=0.25, lam=0.0, R=0) > 10

    def test_power_rows(self):
        t = run_power_utilization(parse_scenario(TINY))
        assert t.get("power_ratio", alpha=0.0, lam=0.0) == 0.0
        assert t.get("power_ratio", alpha=0.25, lam=0.0) == pytest.approx(0.25, rel=1e-4)
        assert t.get("power_ratio", alpha=0.25, lam=1.0) <= 0.25 * (1 + 1e-6)

    def test_ccdf_rows(self):
        t = run_papr_ccdf(parse_scenario(TINY))
        plain = t.get("papr_db_at_prob", variant="plain")
        sa = t.get("papr_db_at_prob", alpha=0.25, lam=1.0, R=0)
        assert t.get("papr_reduction_db_at_prob", alpha=0.25, lam=1.0, R=0) == pytest.approx(plain - sa)
        assert sa < plain

    def test_every_section_has_a_runner(self):
        assert set(RUNNERS) == set(DEFAULTS)


def _table(name, rows):
    t = ResultTable("s", name, 0, "0")
    for metric, point, value in rows:
        t.add(metric, value, point)
    return t


class TestReport:
    def test_missing_tables_are_skipped(self):
        res = evaluate({})
        assert len(res) == len(CRITERIA)
        assert all(r.passed is None for r in res)

    @pytest.mark.parametrize("value, ok", [(7.5, True), (9.5, False)])
    def test_partial_cp_tolerance(self, value, ok):
        psd = _table("psd", [("oob_reduction_db", {"alpha": 0.25, "lam": 0.0, "R": 4}, value)])
        (r,) = evaluate({"psd": psd}, only={2})
        assert r.passed is ok

    def test_power_criterion(self):
        rows = [("power_ratio", {"alpha": a, "lam": 0.0}, a) for a in (0.1, 0.5, 1.0)]
        rows += [("power_ratio", {"alpha": a, "lam": 1.0}, v) for a, v in ((1.0, 0.7), (2.0, 0.71))]
        (r,) = evaluate({"power": _table("power", rows)}, only={7})
        assert r.passed and r.measured["slope_lam0"] == pytest.approx(1.0)
        rows[-1] = ("power_ratio", {"alpha": 2.0, "lam": 1.0}, 0.9)
        (r,) = evaluate({"power": _table("power", rows)}, only={7})
        assert r.passed is False

    def test_emit_writes_json(self, tmp_path):
        lines = []
        emit_report({}, tmp_path / "a.json", echo=lines.append)
        doc = json.loads((tmp_path / "a.json").read_text())
        assert len(lines) == len(CRITERIA) and doc["all_passed"] is True
        assert lines[0].startswith("[SKIP]")


class TestCli:
    def test_list_and_validate(self, capsys):
        assert main(["list-scenarios"]) == 0
        assert "acceptance" in capsys.readouterr().out
        assert main(["validate", "smoke"]) == 0
        assert "smoke: ok" in capsys.readouterr().out

    def test_validate_bad_file(self, tmp_path, capsys):
        p = tmp_path / "x.toml"
        p.write_text('name = "x"\n[psd]\npoints = []\n')
        assert main(["validate", str(p)]) == 2
        assert "error" in capsys.readouterr().err

    def test_run_writes_outputs_and_fails_report(self, tmp_path, monkeypatch):
        p = tmp_path / "t.toml"
        p.write_text('name = "t"\nchunk_symbols = 40\n[power]\nalphas = [0.1, 0.2]\n'
                     'lams = [0.0, 1.0]\nnum_symbols = 40\nsymbols_per_channel = 20\n')
        monkeypatch.setenv("SUPPALIGN_OUT_DIR", str(tmp_path / "env"))
        monkeypatch.setenv("SUPPALIGN_JOBS", "1")
        # lam=1 does not saturate between 0.1 and 0.2, so criterion 7 fails
        code = main(["run", str(p), "--seed", "5", "--report", str(tmp_path / "acc.json")])
        assert code == 1
        out = tmp_path / "env" / "t"
        assert (out / "results.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["seed"] == 5 and "power" in summary["results"]
        assert main(["run", str(p), "--out", str(tmp_path / "flag")]) == 0
        assert (tmp_path / "flag" / "t" / "results.csv").exists()

    def test_bad_jobs_env(self, monkeypatch):
        monkeypatch.setenv("SUPPALIGN_JOBS", "many")
        with pytest.raises(SystemExit):
            main(["run", "smoke"])

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "suppalign", "validate", "smoke"],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "smoke: ok" in proc.stdout
