"""Fixed-energy inverse scattering for long-range potentials.

Forward direction: phase-function tables and synthetic scattering-symbol
oracles for potentials that are sums of homogeneous terms (orders -rho
with 1/2 < rho <= 1) plus a short-range tail.  Inverse direction: unique
recovery of each homogeneous component from locally sampled symbol data
via gradient extraction, power-law separation, planar X-ray inversion
and radial integration.
"""

from .errors import (
    ConditioningError,
    ConfigError,
    DomainError,
    InversionError,
    LrispError,
    NumericalError,
    OutOfDomainError,
    QuadratureError,
    SeparationError,
)
from .geometry import Direction, PlaneFrame, TangentPoint, tangent_basis
from .phase import (
    GaugePhase,
    PhaseValue,
    gauge_shifted_phase,
    grad_phase,
    grad_phase_batch,
    grad_phase_term,
    phase_batch,
    phase_integral,
    phase_table,
    phase_value,
    theta_pm,
    write_phase_csv,
)
from .potential import (
    HomogeneousTerm,
    PotentialModel,
    Profile,
    ShortRangeTerm,
    eval_potential,
    grad_potential,
    model_from_json,
    model_to_json,
    verify_homogeneity,
)
from .radon import (
    PlanarFunction,
    Sinogram,
    fourier_slice,
    invert_at_origin,
    read_sinogram,
    sinogram_from_function,
    sinogram_sidecar_json,
    write_sinogram_csv,
    xray_forward,
)
from .reconstruct import (
    ReconstructionConfig,
    ReconstructionFrame,
    ReconstructionReport,
    build_component_sinogram,
    reconstruct_all,
    reconstruct_partial,
    reconstruct_value,
    report_to_json,
)
from .separation import (
    HomogeneousDecomposition,
    RaySamples,
    SeparationOptions,
    consensus_exponents,
    decomposition_report_json,
    detect_exponents,
    evaluate_component,
    fit_known_exponents,
    geometric_grid,
    model_gradient_source,
    oracle_gradient_source,
    sample_ray,
)
from .symbol import (
    Energy,
    OracleFamily,
    PerturbationSpec,
    SymbolOracle,
    SymbolSample,
    extract_grad_phase,
    extract_grad_phase_batch,
    localized_oracle,
    make_synthetic_oracle,
    oracle_from_config,
    principal_symbol,
)

__version__ = "0.1.0"
