"""Pydantic request/response models for the reconstruction service.

These schemas are the single validation point for run configurations:
the CLI parses config files into them before doing anything, and the
FastAPI endpoints take them as request bodies.  Unknown keys are
rejected everywhere (extra="forbid").
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ProfileDoc(StrictModel):
    kind: str
    axis: list[float] | None = None
    coeffs: list[float] | None = None


class TermDoc(StrictModel):
    rho: float
    profile: ProfileDoc
    coupling: float = 1.0


class ShortRangeDoc(StrictModel):
    rho_sr: float
    g: float = 1.0


class ModelDoc(StrictModel):
    dim: int = 3
    terms: list[TermDoc] = Field(default_factory=list)
    short_range: ShortRangeDoc | None = None
    cutoff_radius: float = 1.0
    mode: str = "cutoff"


class PerturbationDoc(StrictModel):
    eps: float = 0.0
    p_b: float | None = None
    seed: int = 0


class CapDoc(StrictModel):
    omega0: list[float]
    radius: float


class OracleDoc(StrictModel):
    lam: float = Field(default=1.0, alias="lambda")
    perturbation: PerturbationDoc = Field(default_factory=PerturbationDoc)
    gauge: bool = False
    cap: CapDoc | None = None


class SeparationDoc(StrictModel):
    delta: float = 0.05
    gap_min: float = 0.05
    min_amplitude: float = 1e-10
    max_components: int = 4
    s_min: float = 10.0
    s_max: float = 1e4
    num_radii: int = 64
    probe_rays: int = 8


class RadonDoc(StrictModel):
    angles: int = 32
    offsets: int = 513
    S: float = 40.0
    band: float = 8.0


class TolerancesDoc(StrictModel):
    phase: float = 1e-9            # oracle-internal quadrature tolerance
    stencil_h: float = 1e-4        # extraction stencil (relative)
    roundtrip_bound: float = 0.02  # max relative error accepted by roundtrip


class ForwardGridDoc(StrictModel):
    omegas: list[list[float]]
    ys: list[list[float]]

    @model_validator(mode="after")
    def _same_length(self):
        if len(self.omegas) != len(self.ys):
            raise ValueError("omegas and ys must have the same length")
        if not self.omegas:
            raise ValueError("forward grid must contain at least one point")
        return self


class RunConfig(StrictModel):
    """Full experiment configuration shared by every subcommand."""

    model: ModelDoc
    oracle: OracleDoc = Field(default_factory=OracleDoc)
    separation: SeparationDoc = Field(default_factory=SeparationDoc)
    radon: RadonDoc = Field(default_factory=RadonDoc)
    tolerances: TolerancesDoc = Field(default_factory=TolerancesDoc)
    targets: list[list[float]] = Field(default_factory=list)
    grid: ForwardGridDoc | None = None
    seed: int | None = None  # overrides oracle.perturbation.seed when set


# --------------------------------------------------------------------------
# responses

class ForwardRow(StrictModel):
    omega: list[float]
    y: list[float]
    phi: float
    grad: list[float]
    est_error: float


class ForwardResponse(StrictModel):
    rows: list[ForwardRow]


class SymbolRow(StrictModel):
    omega: list[float]
    y: list[float]
    re: float
    im: float


class SymbolDumpResponse(StrictModel):
    rows: list[SymbolRow]


class ReconstructResponse(StrictModel):
    report: dict
    ok: bool


class RoundtripErrorRow(StrictModel):
    target: list[float]
    component: int
    rho_hat: float
    v_hat: float
    v_true: float
    rel_err: float


class RoundtripResponse(StrictModel):
    report: dict
    errors: list[RoundtripErrorRow]
    max_rel_err: float
    bound: float
    passed: bool


class SelftestCheck(StrictModel):
    name: str
    passed: bool
    detail: str


class SelftestResponse(StrictModel):
    checks: list[SelftestCheck]
    passed: bool
