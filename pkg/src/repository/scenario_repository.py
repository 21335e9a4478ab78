"""
Repository for scenario files and run artifacts.
Abstracts file I/O so services only deal with validated models and rows.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

from src.models.scenario import RunReport, Scenario
from src.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SUMMARY_COLUMNS = ("k", "t", "mean_Y", "var_Y", "z_energy_delta", "z_energy_deltac")


def load_scenario(path: PathLike) -> Scenario:
    """
    Read and validate a scenario file.

    Args:
        path: JSON scenario file

    Returns:
        Validated Scenario (registry names are resolved later, against a tree)

    Raises:
        ConfigurationError: If the file is missing or is not a JSON document
        pydantic.ValidationError: If the document does not fit the schema
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Scenario file not found: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Scenario file {path} is not valid JSON: {e}")
    scenario = Scenario.model_validate(document)
    logger.debug(f"Loaded scenario {path} (T={scenario.grid.horizon}, N={scenario.grid.steps})")
    return scenario


def save_scenario(scenario: Scenario, path: PathLike) -> Path:
    """Write a scenario with its public field names (T, N) so it loads back unchanged."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(scenario.model_dump_json(by_alias=True, indent=2) + "\n", encoding="utf-8")
    return path


class ScenarioRepository:
    """
    Artifact writer rooted at an output directory.

    Without a directory nothing is written, which keeps ``check`` runs side-effect free.
    """

    def __init__(self, out_dir: Optional[PathLike] = None):
        self.out_dir = Path(out_dir) if out_dir is not None else None

    def _target(self, name: str) -> Optional[Path]:
        if self.out_dir is None:
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def write_report(self, report: RunReport, name: str = "report.json") -> Optional[Path]:
        """Serialize a report; None-valued fields (timings under stable output) are left out."""
        target = self._target(name)
        if target is None:
            return None
        target.write_text(report.model_dump_json(by_alias=True, exclude_none=True, indent=2) + "\n", encoding="utf-8")
        logger.info(f"Wrote report {target}")
        return target

    def write_table(
        self, rows: List[Dict[str, object]], name: str, columns: Optional[Sequence[str]] = None
    ) -> Optional[Path]:
        """Write rows as CSV with a fixed column order."""
        target = self._target(name)
        if target is None:
            return None
        frame = pd.DataFrame(rows, columns=list(columns) if columns else None)
        frame.to_csv(target, index=False, float_format="%.17g")
        logger.info(f"Wrote {len(frame)} rows to {target}")
        return target

    def write_summary_csv(self, rows: List[Dict[str, object]], name: str = "summary.csv") -> Optional[Path]:
        return self.write_table(rows, name, SUMMARY_COLUMNS)
