"""
Scenario generation script.
Writes the sample scenario files under scenarios/.
"""
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.models.scenario import Scenario
from src.repository.scenario_repository import save_scenario
from src.services.lab_service import resolve_scenario
from src.utils.exceptions import BDSVIELabException

SAMPLE_SCENARIOS = {
    "zero": {},
    "linear_zeta": {
        "grid": {"T": 1.0, "N": 3},
        "psi": {"name": "wiener_terminal", "params": {"scale": 1.0}},
        "f": {"name": "affine", "params": {"zeta": 1.0}, "lipschitz": 1.0},
        "g": {"name": "zero"},
        "solver": {"variant": "full", "beta": "auto", "picard_tol": 1e-12},
        "checks": ["oracle", "contraction", "measurability", "reconstruction", "symmetry", "sm_inequality"],
        "seed": 7,
    },
    "trig_full": {
        "grid": {"T": 1.0, "N": 6},
        "psi": {"name": "sin_wiener", "params": {"amplitude": 1.0, "frequency": 1.0}},
        "f": {"name": "trig", "params": {"amplitude": 0.5, "weights": [1.0, 0.5, 0.5]}, "lipschitz": 0.5},
        "g": {"name": "trig", "params": {"amplitude": 0.1, "weights": [1.0, 1.0, 1.0]}, "lipschitz": 0.05},
        "solver": {"variant": "full", "beta": "auto", "picard_tol": 1e-12, "picard_max": 200},
        "checks": ["measurability", "reconstruction", "contraction", "apriori", "sm_inequality"],
        "seed": 11,
    },
    "bdsde_reduction": {
        "grid": {"T": 1.0, "N": 6},
        "psi": {"name": "wiener_terminal", "params": {"scale": 1.0}},
        "f": {"name": "affine", "params": {"y": -0.5, "z": 0.2, "offset": 0.1}, "lipschitz": 0.29},
        "g": {"name": "affine", "params": {"y": 0.2, "offset": 0.05}, "lipschitz": 0.04},
        "solver": {"variant": "simple", "beta": "auto", "picard_tol": 1e-12},
        "checks": ["bdsde_reduction", "completion_modes", "family"],
        "seed": 3,
    },
    "simple_affine": {
        "grid": {"T": 1.0, "N": 4},
        "psi": {"name": "wiener_adapted", "params": {"scale": 1.0, "offset": 0.5}},
        "f": {"name": "affine", "params": {"y": -1.0, "offset_t": 0.5}, "lipschitz": 1.0},
        "g": {"name": "affine", "params": {"y": 0.1, "z": 0.3}, "lipschitz": 0.1},
        "solver": {"variant": "simple", "beta": "auto"},
        "checks": ["oracle", "apriori", "weighted_lemmas", "isometry", "representation"],
        "seed": 5,
    },
}


def generate_scenarios(target: Path) -> None:
    """Validate, resolve and write every sample scenario."""
    print(f"Writing sample scenarios to {target} ...")
    written = 0
    for name, document in SAMPLE_SCENARIOS.items():
        try:
            scenario = Scenario.model_validate(document)
            resolve_scenario(scenario)
        except BDSVIELabException as e:
            print(f"✗ Skipped {name}: {e}")
            continue
        path = save_scenario(scenario, target / f"{name}.json")
        print(f"✓ Wrote {path}")
        written += 1
    print(f"Done: {written}/{len(SAMPLE_SCENARIOS)} scenarios written")


if __name__ == "__main__":
    generate_scenarios(Path(__file__).parent.parent / "scenarios")
