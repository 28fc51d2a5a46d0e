"""Service-layer operations: validated request models in, response models out.

Both the FastAPI endpoints and the CLI route through these functions, so
computation behaves identically whether it runs in-process or behind
HTTP.  Schema violations and semantically invalid configurations raise
ConfigError; numerical failures propagate as their own error types and
are mapped to exit codes / HTTP statuses by the callers.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, LrispError
from ..fixtures import p1
from ..geometry import Direction, TangentPoint
from ..phase import phase_value
from ..potential import HomogeneousTerm, PotentialModel, Profile, ShortRangeTerm, eval_potential
from ..radon import PlanarFunction, invert_at_origin, sinogram_from_function
from ..reconstruct import ReconstructionConfig, reconstruct_all, report_to_json
from ..reference import (
    gaussian_projection,
    gaussian_transform,
    radial_gradient_constant,
    radial_phase_constant,
)
from ..separation import SeparationOptions
from ..symbol import Energy, PerturbationSpec, SymbolOracle, localized_oracle
from .schemas import (
    ForwardResponse,
    ForwardRow,
    ReconstructResponse,
    RoundtripErrorRow,
    RoundtripResponse,
    RunConfig,
    SelftestCheck,
    SelftestResponse,
    SymbolDumpResponse,
    SymbolRow,
)


def build_model(cfg: RunConfig) -> PotentialModel:
    doc = cfg.model
    try:
        terms = [
            HomogeneousTerm(
                rho=t.rho,
                profile=Profile(t.profile.kind, axis=t.profile.axis, coeffs=t.profile.coeffs),
                coupling=t.coupling,
            )
            for t in doc.terms
        ]
        sr = ShortRangeDoc_to_term(doc.short_range)
        return PotentialModel(
            dim=doc.dim,
            terms=terms,
            short_range=sr,
            cutoff_radius=doc.cutoff_radius,
            mode=doc.mode,
        )
    except LrispError as exc:
        raise ConfigError(f"invalid potential model: {exc}") from exc


def ShortRangeDoc_to_term(doc):
    return ShortRangeTerm(rho_sr=doc.rho_sr, g=doc.g) if doc is not None else None


def build_oracle(cfg: RunConfig) -> SymbolOracle:
    model = build_model(cfg)
    odoc = cfg.oracle
    seed = cfg.seed if cfg.seed is not None else odoc.perturbation.seed
    try:
        oracle = SymbolOracle(
            model=model,
            energy=Energy(odoc.lam),
            perturbation=PerturbationSpec(
                eps=odoc.perturbation.eps, p_b=odoc.perturbation.p_b, seed=seed
            ),
            gauged=odoc.gauge,
            tol=cfg.tolerances.phase,
        )
        if odoc.cap is not None:
            oracle = localized_oracle(oracle, Direction(odoc.cap.omega0), odoc.cap.radius)
        return oracle
    except LrispError as exc:
        raise ConfigError(f"invalid oracle configuration: {exc}") from exc


def reconstruction_config(cfg: RunConfig) -> ReconstructionConfig:
    sep = cfg.separation
    return ReconstructionConfig(
        separation=SeparationOptions(
            delta=sep.delta,
            gap_min=sep.gap_min,
            min_amplitude=sep.min_amplitude,
            max_components=sep.max_components,
            s_min=sep.s_min,
            s_max=sep.s_max,
            num_radii=sep.num_radii,
            probe_rays=sep.probe_rays,
        ),
        n_angles=cfg.radon.angles,
        n_offsets=cfg.radon.offsets,
        half_width=cfg.radon.S,
        band=cfg.radon.band,
        stencil_h=cfg.tolerances.stencil_h,
    )


def _validated_targets(cfg: RunConfig) -> list[np.ndarray]:
    if not cfg.targets:
        raise ConfigError("configuration lists no targets")
    out = []
    for t in cfg.targets:
        arr = np.asarray(t, dtype=float)
        if arr.shape != (cfg.model.dim,):
            raise ConfigError(f"target {t} does not match model dimension {cfg.model.dim}")
        if float(np.linalg.norm(arr)) == 0.0:
            raise ConfigError("reconstruction targets must be nonzero")
        out.append(arr)
    return out


def run_forward(cfg: RunConfig, tol: float | None = None) -> ForwardResponse:
    """Tabulate the phase and its gradient over the configured grid."""
    if cfg.grid is None:
        raise ConfigError("forward runs require a grid of (omega, y) points")
    model = build_model(cfg)
    tol = tol if tol is not None else cfg.tolerances.phase
    rows = []
    for omega, y in zip(cfg.grid.omegas, cfg.grid.ys):
        try:
            point = TangentPoint(Direction(omega), y)
        except LrispError as exc:
            raise ConfigError(f"invalid grid point (omega={omega}, y={y}): {exc}") from exc
        pv = phase_value(model, point, tol=tol)
        rows.append(
            ForwardRow(
                omega=point.omega.vec.tolist(),
                y=point.y.tolist(),
                phi=pv.value,
                grad=pv.grad.tolist(),
                est_error=pv.est_error,
            )
        )
    return ForwardResponse(rows=rows)


def run_symbol_dump(cfg: RunConfig) -> SymbolDumpResponse:
    """Sample the symbol oracle over the configured grid."""
    if cfg.grid is None:
        raise ConfigError("symbol dumps require a grid of (omega, y) points")
    oracle = build_oracle(cfg)
    rows = []
    for omega, y in zip(cfg.grid.omegas, cfg.grid.ys):
        try:
            point = TangentPoint(Direction(omega), y)
        except LrispError as exc:
            raise ConfigError(f"invalid grid point (omega={omega}, y={y}): {exc}") from exc
        val = oracle.sample(point)
        rows.append(
            SymbolRow(
                omega=point.omega.vec.tolist(),
                y=point.y.tolist(),
                re=float(val.real),
                im=float(val.imag),
            )
        )
    return SymbolDumpResponse(rows=rows)


def run_reconstruct(cfg: RunConfig) -> ReconstructResponse:
    """Full reconstruction over the configured targets."""
    targets = _validated_targets(cfg)
    oracle = build_oracle(cfg)
    report = reconstruct_all(oracle, targets, reconstruction_config(cfg))
    return ReconstructResponse(report=report_to_json(report), ok=report.ok)


def _true_component_values(cfg: RunConfig, target: np.ndarray) -> list[tuple[float, float]]:
    """Ground-truth (rho, V_j(x)) pairs from the configured model."""
    model = build_model(cfg)
    out = []
    for term in model.terms:
        single = PotentialModel(dim=model.dim, terms=[term], mode="bare")
        out.append((term.rho, float(eval_potential(single, target))))
    return out


def run_roundtrip(cfg: RunConfig, bound: float | None = None) -> RoundtripResponse:
    """Forward model -> oracle -> reconstruction -> per-component errors."""
    bound = bound if bound is not None else cfg.tolerances.roundtrip_bound
    targets = _validated_targets(cfg)
    oracle = build_oracle(cfg)
    report = reconstruct_all(oracle, targets, reconstruction_config(cfg))
    rows: list[RoundtripErrorRow] = []
    max_rel = 0.0
    for target, result in zip(targets, report.targets):
        truth = _true_component_values(cfg, target)
        if result.status == "failed" or len(result.components) != len(truth):
            # mismatched component count is a failed roundtrip for this target
            for j, (rho, v_true) in enumerate(truth):
                rows.append(
                    RoundtripErrorRow(
                        target=target.tolist(),
                        component=j,
                        rho_hat=float("nan"),
                        v_hat=float("nan"),
                        v_true=v_true,
                        rel_err=float("inf"),
                    )
                )
                max_rel = float("inf")
            continue
        for j, (comp, (rho, v_true)) in enumerate(zip(result.components, truth)):
            rel = abs(comp.value_euler - v_true) / abs(v_true) if v_true != 0 else abs(comp.value_euler)
            rows.append(
                RoundtripErrorRow(
                    target=target.tolist(),
                    component=j,
                    rho_hat=comp.rho,
                    v_hat=comp.value_euler,
                    v_true=v_true,
                    rel_err=rel,
                )
            )
            max_rel = max(max_rel, rel)
    return RoundtripResponse(
        report=report_to_json(report),
        errors=rows,
        max_rel_err=max_rel,
        bound=bound,
        passed=bool(max_rel <= bound),
    )


def run_selftest() -> SelftestResponse:
    """Closed-form oracle suite: radial phase constants and the Gaussian Radon pair."""
    checks: list[SelftestCheck] = []

    def record(name, passed, detail):
        checks.append(SelftestCheck(name=name, passed=bool(passed), detail=detail))

    omega = Direction([1.0, 0.0, 0.0])
    model = p1("bare")
    c_oracle = radial_phase_constant(0.75)
    point = TangentPoint(omega, [0.0, 10.0, 0.0])
    phi = phase_value(model, point, tol=1e-10).value
    rel = abs(phi - c_oracle * 10.0**0.25) / abs(c_oracle * 10.0**0.25)
    record("radial-phase-constant", rel < 1e-7, f"rel err {rel:.3e}")

    b1 = radial_gradient_constant(1.0)
    record("gradient-constant-B1", abs(b1 - 2.0) < 1e-10, f"B(1) = {b1:.12f}")

    for rho in (0.6, 0.75, 0.9):
        lhs = (1.0 - rho) * radial_phase_constant(rho)
        rhs = -rho * radial_gradient_constant(rho)
        rel = abs(lhs - rhs) / abs(rhs)
        record(f"cross-identity-rho-{rho}", rel < 1e-8, f"rel err {rel:.3e}")

    gauss = PlanarFunction(lambda p: np.exp(-np.sum(p * p, axis=-1)), decay=np.inf)
    sino = sinogram_from_function(gauss, n_angles=16, n_offsets=257, half_width=10.0)
    v0, _ = invert_at_origin(sino)
    record("gaussian-radon-roundtrip", abs(v0 - 1.0) < 1e-3, f"v(0) = {v0:.6f}")
    pr = gaussian_projection(1.0)
    record(
        "gaussian-projection-constant",
        abs(pr - np.sqrt(np.pi) * np.exp(-1.0)) < 1e-12,
        f"r = {pr:.12f}",
    )
    vt = gaussian_transform(1.0)
    record(
        "gaussian-transform-constant",
        abs(vt - 0.5 * np.exp(-0.25)) < 1e-12,
        f"vhat = {vt:.12f}",
    )

    return SelftestResponse(checks=checks, passed=all(c.passed for c in checks))
