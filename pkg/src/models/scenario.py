"""
Pydantic schemas for scenario files and run reports.
"""
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SUITES = (
    "measurability",
    "reconstruction",
    "symmetry",
    "representation",
    "isometry",
    "sm_inequality",
    "weighted_lemmas",
    "apriori",
    "contraction",
    "oracle",
    "bdsde_reduction",
    "completion_modes",
    "family",
)


class GridSpec(BaseModel):
    """Time horizon and number of steps."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    horizon: float = Field(1.0, alias="T", gt=0, description="Terminal time T")
    steps: int = Field(4, alias="N", ge=1, description="Number of intervals N")


class DimSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int = Field(1, ge=1, description="State dimension")


class TerminalSpec(BaseModel):
    """Registry entry for psi."""

    model_config = ConfigDict(extra="forbid")

    name: str = "zero"
    params: Dict[str, Union[float, List[float]]] = Field(default_factory=dict)


class CoefficientSpec(BaseModel):
    """Registry entry for a generator with its declared Lipschitz constant."""

    model_config = ConfigDict(extra="forbid")

    name: str = "zero"
    params: Dict[str, Union[float, List[float], List[List[float]]]] = Field(default_factory=dict)
    lipschitz: Optional[float] = Field(None, ge=0, description="Declared constant (c for f, alpha for g)")

    @model_validator(mode="after")
    def require_constant(self):
        """Every generator except 'zero' must declare its constant."""
        if self.name != "zero" and self.lipschitz is None:
            raise ValueError(f"Coefficient '{self.name}' must declare its Lipschitz constant")
        return self


class SolverSpec(BaseModel):
    """Picard and inner-solver settings of a scenario."""

    model_config = ConfigDict(extra="forbid")

    variant: Literal["simple", "full"] = "simple"
    beta: Union[float, Literal["auto"]] = "auto"
    picard_tol: float = Field(1e-10, gt=0)
    picard_max: int = Field(200, ge=1)
    completion_mode: Literal["SM", "M", "S"] = "SM"
    inner_tol: float = Field(1e-12, gt=0)

    @field_validator("beta")
    @classmethod
    def positive_beta(cls, v):
        """An explicit beta must be positive."""
        if v != "auto" and v <= 0:
            raise ValueError("beta must be positive or 'auto'")
        return v


class Scenario(BaseModel):
    """A complete lab scenario."""

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "grid": {"T": 1.0, "N": 3},
                "dims": {"k": 1},
                "psi": {"name": "wiener_terminal", "params": {"scale": 1.0}},
                "f": {"name": "affine", "params": {"zeta": 1.0}, "lipschitz": 1.0},
                "g": {"name": "zero"},
                "solver": {"variant": "full", "beta": "auto", "completion_mode": "SM"},
                "checks": ["oracle", "contraction"],
                "seed": 7,
            }
        },
    )

    grid: GridSpec = Field(default_factory=GridSpec)
    dims: DimSpec = Field(default_factory=DimSpec)
    psi: TerminalSpec = Field(default_factory=TerminalSpec)
    f: CoefficientSpec = Field(default_factory=CoefficientSpec)
    g: CoefficientSpec = Field(default_factory=CoefficientSpec)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    checks: List[str] = Field(default_factory=list)
    seed: int = Field(0, ge=0, description="Seed of the randomized suites")

    @field_validator("checks")
    @classmethod
    def known_suites(cls, v):
        """Suites must be known and listed once."""
        unknown = [name for name in v if name not in SUITES]
        if unknown:
            raise ValueError(f"Unknown check suites {unknown}; known: {list(SUITES)}")
        if len(set(v)) != len(v):
            raise ValueError("Each check suite may be listed only once")
        return v


class EstimateReport(BaseModel):
    """One inequality: pass iff lhs <= slack * rhs."""

    name: str
    lhs: float
    rhs: float
    margin: float
    slack: float = 1.0
    passed: bool
    implied: Optional[float] = Field(None, description="Smallest constant making the inequality hold")


class CheckResult(BaseModel):
    """Outcome of one invariant suite."""

    name: str
    passed: bool
    skipped: bool = False
    detail: str = ""
    metrics: Dict[str, float] = Field(default_factory=dict)
    estimates: List[EstimateReport] = Field(default_factory=list)


class NodeSummary(BaseModel):
    """Per-node solution summary, one CSV row."""

    k: int
    t: float
    mean_Y: float
    var_Y: float
    z_energy_delta: float
    z_energy_deltac: float


class RunReport(BaseModel):
    """Machine-readable result of a command."""

    command: str
    scenario: Optional[Scenario] = None
    beta: Optional[float] = None
    iterations: Optional[int] = None
    differences: List[float] = Field(default_factory=list)
    contraction_ratios: List[float] = Field(default_factory=list)
    residual_max: Optional[float] = None
    residual_l2: Optional[float] = None
    summary: List[NodeSummary] = Field(default_factory=list)
    checks: List[CheckResult] = Field(default_factory=list)
    estimates: List[EstimateReport] = Field(default_factory=list)
    convergence: Dict[str, List[Union[int, float]]] = Field(default_factory=dict)
    timings: Optional[Dict[str, float]] = None
    passed: bool = True
