"""
Unit tests for the scenario repository.
"""
import json

import pandas as pd
import pytest
from pydantic import ValidationError

from src.models.scenario import CheckResult, GridSpec, RunReport, Scenario
from src.repository.scenario_repository import (
    SUMMARY_COLUMNS,
    ScenarioRepository,
    load_scenario,
    save_scenario,
)
from src.utils.exceptions import ConfigurationError


@pytest.fixture
def scenario():
    return Scenario.model_validate(Scenario.model_config["json_schema_extra"]["example"])


@pytest.fixture
def repository(tmp_path):
    return ScenarioRepository(tmp_path / "out")


class TestScenarioFiles:
    """Test reading and writing scenario files."""

    def test_save_and_load(self, tmp_path, scenario):
        path = save_scenario(scenario, tmp_path / "nested" / "scenario.json")
        document = json.loads(path.read_text())
        assert document["grid"] == {"T": 1.0, "N": 3}
        assert load_scenario(path) == scenario

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc_info:
            load_scenario(tmp_path / "absent.json")
        assert "not found" in str(exc_info.value)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_scenario(path)

    def test_schema_violations(self, tmp_path):
        documents = [
            {"grid": {"T": 0.0, "N": 3}},
            {"grid": {"T": 1.0, "N": 0}},
            {"f": {"name": "affine", "params": {"y": 1.0}}},
            {"solver": {"beta": -1.0}},
            {"solver": {"variant": "other"}},
            {"checks": ["oracle", "oracle"]},
            {"checks": ["unknown"]},
            {"extra": 1},
        ]

        for j, document in enumerate(documents):
            path = tmp_path / f"bad_{j}.json"
            path.write_text(json.dumps(document))
            with pytest.raises(ValidationError):
                load_scenario(path)

    def test_defaults(self):
        scenario = Scenario()
        assert scenario.grid.horizon == 1.0
        assert scenario.f.name == "zero" and scenario.f.lipschitz is None
        assert scenario.solver.beta == "auto"


class TestScenarioRepository:
    """Test artifact writing."""

    def test_write_report_leaves_out_none(self, repository, scenario):
        report = RunReport(command="check", scenario=scenario, checks=[CheckResult(name="oracle", passed=True)])
        path = repository.write_report(report)
        document = json.loads(path.read_text())
        assert "timings" not in document
        assert "beta" not in document
        assert document["scenario"]["grid"] == {"T": 1.0, "N": 3}
        assert document["checks"][0]["name"] == "oracle"

    def test_summary_columns(self, repository):
        rows = [{"k": 0, "t": 0.0, "mean_Y": 1.0, "var_Y": 0.0, "z_energy_delta": 0.5, "z_energy_deltac": 0.0}]
        path = repository.write_summary_csv(rows)
        frame = pd.read_csv(path)
        assert tuple(frame.columns) == SUMMARY_COLUMNS
        assert frame.loc[0, "z_energy_delta"] == 0.5

    def test_full_precision(self, repository):
        path = repository.write_table([{"x": 1.0 / 3.0}], "values.csv", ("x",))
        assert pd.read_csv(path, float_precision="round_trip").loc[0, "x"] == 1.0 / 3.0

    def test_without_directory(self, scenario):
        repository = ScenarioRepository()
        assert repository.write_report(RunReport(command="solve")) is None
        assert repository.write_table([{"x": 1}], "values.csv") is None

    def test_creates_directory(self, tmp_path):
        repository = ScenarioRepository(tmp_path / "a" / "b")
        path = repository.write_report(RunReport(command="repdemo", scenario=Scenario(grid=GridSpec(T=2.0, N=2))))
        assert path.exists()
