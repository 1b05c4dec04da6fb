"""Pencil file, run configuration and JSON report schemas."""
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.config import SPECTRAL_DIGITS, SPECTRAL_JOBS, SPECTRAL_MAX_DIGITS, SPECTRAL_OUTPUT_DIR, SPECTRAL_RESIDUAL_TARGET

COMMANDS = ("check", "eigen", "fig1", "series", "support", "verify")


def _degree(coeffs: list[tuple[float, float]]) -> int:
    """Degree after dropping exact trailing zeros; -1 for the zero polynomial."""
    deg = len(coeffs) - 1
    while deg >= 0 and coeffs[deg][0] == 0 and coeffs[deg][1] == 0:
        deg -= 1
    return deg


class PencilFile(BaseModel):
    """{"k": int, "Q": [[[re, im], ...] per Q_i, low-to-high]}."""
    k: int = Field(..., ge=1)
    Q: list[list[tuple[float, float]]]
    name: Optional[str] = None

    @model_validator(mode="after")
    def _shape(self) -> "PencilFile":
        if len(self.Q) != self.k + 1:
            raise ValueError(f"expected {self.k + 1} polynomials Q_0..Q_{self.k}, got {len(self.Q)}")
        for i, q in enumerate(self.Q):
            if _degree(q) > i:
                raise ValueError(f"deg Q_{i} = {_degree(q)} exceeds {i}")
        if _degree(self.Q[-1]) < 0:
            raise ValueError(f"Q_{self.k} is identically zero")
        return self

    def rows(self) -> list[list[complex]]:
        return [[complex(re, im) for re, im in q] for q in self.Q]


class RunConfig(BaseModel):
    command: Literal["check", "eigen", "fig1", "series", "support", "verify"]
    pencil: Optional[Path] = None
    n: list[int] = Field(default_factory=lambda: [55])
    family: Optional[list[int]] = None
    order: int = Field(20, ge=1)
    radius: Optional[float] = Field(None, gt=0)
    rect: Optional[tuple[float, float, float, float]] = None
    res: float = Field(0.02, gt=0)
    out: Path = Path(SPECTRAL_OUTPUT_DIR)
    digits: int = Field(SPECTRAL_DIGITS, ge=8)
    max_digits: int = Field(SPECTRAL_MAX_DIGITS, ge=8)
    residual_target: float = Field(SPECTRAL_RESIDUAL_TARGET, gt=0)
    jobs: int = Field(SPECTRAL_JOBS, ge=1)

    @field_validator("n")
    @classmethod
    def _degrees(cls, v: list[int]) -> list[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError("every degree in --n must be >= 1")
        return v

    @field_validator("rect")
    @classmethod
    def _rect(cls, v):
        if v is not None and (v[2] <= v[0] or v[3] <= v[1]):
            raise ValueError("--rect must be x0,y0,x1,y1 with x0 < x1 and y0 < y1")
        return v

    @model_validator(mode="after")
    def _digits(self) -> "RunConfig":
        if self.digits > self.max_digits:
            raise ValueError("--digits exceeds the maximum precision")
        if self.command != "verify" and self.pencil is None:
            raise ValueError(f"command '{self.command}' needs --pencil")
        return self


class GeneralTypeOut(BaseModel):
    is_general_type: bool
    leading_ok: bool
    constant_ok: bool
    roots_distinct: bool
    no_collinear_pair: bool
    alphas: list[tuple[float, float]] = Field(default_factory=list)
    reasons: list[str] = Field(default_factory=list)


class EigenSummaryRow(BaseModel):
    n: int
    j: int
    lam: Optional[tuple[str, str]] = None  # full-precision (re, im)
    ratio_gap: Optional[float] = None  # |λ/n − α_j|
    residual: Optional[float] = None
    root_count: int = 0
    error: Optional[str] = None


class DeviationRecord(BaseModel):
    kind: Literal["branch", "cauchy", "algebraic"]
    n: int
    j: int
    radius: float
    value: float


class DensityOut(BaseModel):
    pair: tuple[int, int]
    family: int
    window: float
    vertices: int
    mean_ratio: Optional[float] = None
    spread: Optional[float] = None
    atoms_near: int = 0
    atom_total: int = 0
    global_mass: Optional[float] = None
    predicted_mass: Optional[float] = None
    closed: bool = False
    stops: list[str] = Field(default_factory=list)


class CriterionResult(BaseModel):
    id: int
    name: str
    passed: bool
    seconds: float = 0.0
    detail: dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None


class VerifyReport(BaseModel):
    pencil_sha256: str
    tool_version: str
    digits: int
    criteria: list[CriterionResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)


class EigenSummary(BaseModel):
    pencil_sha256: str
    digits: int
    rows: list[EigenSummaryRow] = Field(default_factory=list)


class DeviationReport(BaseModel):
    pencil_sha256: str
    records: list[DeviationRecord] = Field(default_factory=list)
    errors: list[str] = Field(default_factory=list)
