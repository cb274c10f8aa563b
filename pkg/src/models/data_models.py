from typing import Annotated, Literal, Optional, Tuple, Union
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from enum import Enum

SOLUTION_NAMES = ("bubble", "sin", "poly-patch")


class LoadCase(str, Enum):
    """Load approximation regime"""
    PROJECTED_LOW = "a"       # f_h = Π⁰_{r-2p1} f
    PROJECTED_ENHANCED = "b"  # f_h = Π⁰_{r-p1} f on the enhanced space


class SpaceParams(BaseModel):
    """Operator order p1, regularity index p2 and accuracy order r.

    ``enhanced`` is forced on when p2 <= r <= p2 + 2p1 - 2, because the load
    then needs the Π⁰_{r-p1} projector; otherwise it is opt-in.
    """
    model_config = ConfigDict(frozen=True)

    p1: int = Field(ge=1)
    p2: int = Field(ge=1)
    r: int = Field(ge=1)
    enhanced: bool = False

    @model_validator(mode="before")
    @classmethod
    def _force_enhanced(cls, data):
        if isinstance(data, dict):
            try:
                p1, p2, r = int(data["p1"]), int(data["p2"]), int(data["r"])
            except (KeyError, TypeError, ValueError):
                return data
            if p2 <= r <= p2 + 2 * p1 - 2:
                data = {**data, "enhanced": True}
        return data

    @model_validator(mode="after")
    def _check_order(self):
        if not (self.r >= self.p2 >= self.p1 >= 1):
            raise ValueError(
                f"require r >= p2 >= p1 >= 1, got (p1, p2, r) = "
                f"({self.p1}, {self.p2}, {self.r})"
            )
        return self

    @property
    def load_case(self) -> LoadCase:
        if self.p2 + 2 * self.p1 - 1 <= self.r:
            return LoadCase.PROJECTED_LOW
        return LoadCase.PROJECTED_ENHANCED

    @property
    def high_regime(self) -> bool:
        """True when r >= 2p2 - 1 (every derivative order carries edge moments)"""
        return self.r >= 2 * self.p2 - 1

    @property
    def expected_rate(self) -> int:
        return self.r - (self.p1 - 1)

    @property
    def label(self) -> str:
        return f"({self.p1},{self.p2},{self.r})"


class DofKind(str, Enum):
    VERTEX = "D1"
    EDGE = "D2"
    CELL = "D3"
    CELL_EXTRA = "D3~"


class VertexDerivative(BaseModel):
    """h_V^{|ν|} D^ν v(V)"""
    model_config = ConfigDict(frozen=True)
    kind: Literal[DofKind.VERTEX] = DofKind.VERTEX
    vertex: int
    nu: Tuple[int, int]


class EdgeMoment(BaseModel):
    """h_E^{-1+j} ∫_E L_k ∂_n^j v ds.

    Inside a local layout the normal and the Legendre parameter follow the
    cell's outward frame; in the global map they follow the global edge
    direction (lower vertex index to higher).
    """
    model_config = ConfigDict(frozen=True)
    kind: Literal[DofKind.EDGE] = DofKind.EDGE
    edge: int
    j: int
    k: int


class CellMoment(BaseModel):
    """h_P^{-2} ∫_P m_ν v, |ν| <= r - 2p1"""
    model_config = ConfigDict(frozen=True)
    kind: Literal[DofKind.CELL] = DofKind.CELL
    cell: int
    nu: Tuple[int, int]


class CellMomentExtra(BaseModel):
    """h_P^{-2} ∫_P m_ν v, r - 2p1 < |ν| <= r - p1 (extended space only)"""
    model_config = ConfigDict(frozen=True)
    kind: Literal[DofKind.CELL_EXTRA] = DofKind.CELL_EXTRA
    cell: int
    nu: Tuple[int, int]


DofDescriptor = Annotated[
    Union[VertexDerivative, EdgeMoment, CellMoment, CellMomentExtra],
    Field(discriminator="kind"),
]


class ErrorReport(BaseModel):
    """Errors and cost of one discrete solve"""
    params: str
    mesh: str
    h: float = Field(ge=0)
    n_dof: int = Field(ge=0)
    energy_err: float = Field(ge=0)
    h_p1_seminorm_err: float = Field(ge=0)
    l2_err: float = Field(ge=0)
    assemble_s: float = Field(ge=0)
    solve_s: float = Field(ge=0)
    u_energy_norm: float = Field(default=0.0, ge=0)
    residual: float = Field(default=0.0, ge=0)

    @property
    def relative_energy_err(self) -> float:
        if self.u_energy_norm == 0.0:
            return self.energy_err
        return self.energy_err / self.u_energy_norm


class TraceDegreeRow(BaseModel):
    """One row of the edge-trace table for derivative order j"""
    j: int
    alpha: int
    beta: int
    moments: int
    endpoint_conditions: int


class SpaceCheckReport(BaseModel):
    params: str
    mesh: str
    n_cells: int
    dof_counts: dict[str, int] = {}
    trace_table: list[TraceDegreeRow] = []
    local_dim_formula: list[int] = []
    local_dim_enumerated: list[int] = []
    dimension_match: bool = False
    d_rank_min: int = 0
    d_rank_expected: int = 0
    preservation_residual: float = 0.0
    enhanced_checked: bool = False
    enhanced_count_match: Optional[bool] = None
    stabilization_range: Optional[Tuple[float, float]] = None
    gram_condition_max: float = 0.0
    kernel_dims: list[int] = []
    kernel_expected: int = 0
    passed: bool = False


class RunConfig(BaseModel):
    """Validated command-line configuration"""
    subcommand: Literal["solve", "convergence", "space-check"]
    p1: int
    p2: int
    r: int
    enhanced: bool = False
    mesh: str = "square:2"
    levels: Optional[Tuple[int, int]] = None
    solution: str = "sin"
    out: Optional[str] = None
    seed: int = 0
    format: Literal["markdown", "json"] = "markdown"
    deterministic: bool = False
    rate_tolerance: Optional[float] = Field(default=None, gt=0)

    @field_validator("solution")
    @classmethod
    def _known_solution(cls, value: str) -> str:
        if value not in SOLUTION_NAMES:
            raise ValueError(
                f"unknown solution '{value}', expected one of {', '.join(SOLUTION_NAMES)}"
            )
        return value

    @field_validator("levels", mode="before")
    @classmethod
    def _parse_levels(cls, value):
        if isinstance(value, str):
            lo, sep, hi = value.partition("..")
            if not sep:
                raise ValueError(f"levels must look like 'A..B', got '{value}'")
            return int(lo), int(hi)
        return value

    @model_validator(mode="after")
    def _check(self):
        SpaceParams(p1=self.p1, p2=self.p2, r=self.r, enhanced=self.enhanced)
        if self.levels is not None:
            lo, hi = self.levels
            if lo < 0 or hi < lo:
                raise ValueError(f"invalid level range {lo}..{hi}")
        if self.subcommand == "convergence":
            if self.levels is None:
                raise ValueError("convergence needs --levels A..B")
            if self.levels[1] - self.levels[0] + 1 < 3:
                raise ValueError("convergence needs at least 3 levels")
        return self

    @property
    def space_params(self) -> SpaceParams:
        return SpaceParams(p1=self.p1, p2=self.p2, r=self.r, enhanced=self.enhanced)
