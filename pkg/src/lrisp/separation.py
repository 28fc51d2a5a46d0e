"""Separation of gradient data into homogeneous power-law components.

Along a fixed ray y = s*u the probe projection g(s) = <grad Phi(s u, w), e>
is a sum of exact power laws c_j s^(-rho_j), rho_j in (1/2, 1], plus a
remainder decaying faster than s^(-1) (short-range and symbol-remainder
contributions).  Neither the number of components nor their orders are
known a priori.  Detection grows the model order:

1. the slowest decay, estimated by Richardson-extrapolated log-log
   differences at the largest usable radii, seeds the first component
   (acceptable seeds have slope in (-1 - delta, -1/2)),
2. for each order N, a separable nonlinear least-squares fit optimizes
   the exponents with the coefficients eliminated by linear solves; a
   nuisance-tail dictionary absorbs the remainder so it cannot bias the
   component coefficients,
3. N grows while the component-only residual still contains structure
   slower than s^(-1-delta); slopes in the boundary band [-1-delta, -1]
   are promoted to a rho = 1 component only when the grown fit improves
   the residual tenfold, and otherwise stay in the remainder,
4. exponents that collapse within gap_min merge (with a warning), and
   components whose contribution is negligible at the inner radius are
   pruned.

Data that decays too slowly for the class (or that no in-class fit
explains) raises SeparationError rather than returning a bad fit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import ConditioningError, DomainError, SeparationError
from .geometry import Direction
from .phase import DEFAULT_PHASE_TOL, grad_phase_batch
from .symbol import DEFAULT_STENCIL_H, extract_grad_phase_batch

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SeparationOptions:
    """Tuning knobs for exponent detection (defaults fixed project-wide)."""

    delta: float = 0.05          # remainder margin below slope -1
    gap_min: float = 0.05        # minimal separation between exponents
    min_amplitude: float = 1e-10  # data below this is treated as zero
    max_components: int = 4
    s_min: float = 10.0
    s_max: float = 1e4
    num_radii: int = 64
    probe_rays: int = 8


def geometric_grid(s_min: float, s_max: float, num: int) -> np.ndarray:
    if not (s_min > 0 and s_max > s_min and num >= 4):
        raise DomainError("geometric grid requires 0 < s_min < s_max and >= 4 points")
    return np.geomspace(s_min, s_max, num)


@dataclass(frozen=True)
class RaySamples:
    """Probe projections g(s_i) = <grad Phi(s_i u, omega), e> on a geometric grid."""

    omega: Direction
    u: np.ndarray
    e: np.ndarray
    radii: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        w = self.omega.vec
        for name, vec in (("u", self.u), ("e", self.e)):
            if abs(np.dot(vec, w)) > 1e-12 or abs(np.linalg.norm(vec) - 1.0) > 1e-12:
                raise DomainError(f"ray vector {name} must be a unit vector tangent to omega")
        r = np.asarray(self.radii, dtype=float)
        if np.any(np.diff(r) <= 0):
            raise DomainError("radii must be strictly increasing")


def model_gradient_source(model, tol: float = DEFAULT_PHASE_TOL):
    """Gradient source backed by direct phase quadrature of a model."""

    def src(ys, omegas):
        grads, _ = grad_phase_batch(model, ys, omegas, tol=tol)
        return grads

    return src


def oracle_gradient_source(oracle, h: float = DEFAULT_STENCIL_H):
    """Gradient source backed by symbol-sample extraction from an oracle."""

    def src(ys, omegas):
        return extract_grad_phase_batch(oracle, ys, omegas, h=h)

    return src


def sample_ray(src, omega: Direction, u, e, radii) -> RaySamples:
    """Fill a RaySamples record by querying a gradient source at y = s_i u."""
    u = np.asarray(u, dtype=float)
    e = np.asarray(e, dtype=float)
    radii = np.asarray(radii, dtype=float)
    ys = radii[:, None] * u[None, :]
    omegas = np.tile(omega.vec, (len(radii), 1))
    grads = src(ys, omegas)
    values = grads @ e
    return RaySamples(omega=omega, u=u, e=e, radii=radii, values=values)


@dataclass(frozen=True)
class HomogeneousDecomposition:
    """Detected exponents and per-ray coefficients, with fit diagnostics."""

    exponents: np.ndarray
    coefficients: np.ndarray
    remainder_slope: float
    conditioning: float
    residual_rms: float
    ray: RaySamples | None = field(default=None, repr=False)
    tail_exponents: np.ndarray = field(default_factory=lambda: np.array([]))

    @property
    def n_components(self) -> int:
        return len(self.exponents)


def evaluate_component(decomp: HomogeneousDecomposition, j: int, s) -> float | np.ndarray:
    """Component j of the decomposition at radius s: c_j * s^(-rho_j)."""
    if not 0 <= j < decomp.n_components:
        raise IndexError(f"component index {j} out of range for {decomp.n_components} components")
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DomainError("component evaluation requires s > 0")
    out = decomp.coefficients[j] * s ** (-decomp.exponents[j])
    return float(out) if out.ndim == 0 else out


def _design(radii: np.ndarray, exponents) -> np.ndarray:
    return radii[:, None] ** (-np.asarray(exponents, dtype=float)[None, :])


def _lstsq_fit(radii, values, exponents):
    """Plain least squares of g against {s^(-rho_j)}; returns (c, rms, cond)."""
    a = _design(radii, exponents)
    col_scale = np.linalg.norm(a, axis=0)
    cond = float(np.linalg.cond(a / col_scale))
    coeffs, *_ = np.linalg.lstsq(a, values, rcond=None)
    resid = values - a @ coeffs
    rms = float(np.sqrt(np.mean(resid**2)))
    return coeffs, rms, cond


def fit_known_exponents(samples: RaySamples, exponents):
    """Linear least squares with known exponents; returns (coeffs, rms residual).

    Raises ConditioningError when the design (after column scaling) is
    numerically rank deficient for this grid.
    """
    exponents = np.asarray(exponents, dtype=float)
    if len(exponents) == 0:
        raise DomainError("at least one exponent is required")
    if len(np.unique(exponents)) != len(exponents):
        raise DomainError("exponents must be distinct")
    if np.any(exponents <= 0) or np.any(exponents > 1.0 + 1e-12):
        raise DomainError("exponents must lie in (0, 1]")
    if len(samples.radii) < len(exponents) + 2:
        raise DomainError("need at least #exponents + 2 radii")
    coeffs, rms, cond = _lstsq_fit(samples.radii, samples.values, exponents)
    if cond > MAX_CONDITION:
        raise ConditioningError(
            f"separation design condition number {cond:.3e} exceeds {MAX_CONDITION:.1e}",
            condition_number=cond,
        )
    return coeffs, rms


def _leading_slope(radii: np.ndarray, values: np.ndarray, min_amplitude: float, stability: float = 0.2):
    """Richardson-extrapolated log-log slope at the largest usable radii.

    Scans 5-point windows from the top of the grid down and returns the
    slope of the first window that is sign-consistent, above the noise
    floor and curvature-stable (the h and 2h estimates agree to within
    ``stability``).  Returns (slope, center_index), or (None, None) when
    no window qualifies.
    """
    n = len(radii)
    for end in range(n, 9, -1):
        window = values[end - 5 : end]
        if np.max(np.abs(window)) < min_amplitude:
            continue
        if np.any(window == 0.0) or len(set(np.sign(window))) != 1:
            continue
        logs = np.log(radii[end - 5 : end])
        logv = np.log(np.abs(window))
        h = logs[1] - logs[0]
        m_h = (logv[3] - logv[1]) / (2.0 * h)
        m_2h = (logv[4] - logv[0]) / (4.0 * h)
        if abs(m_h - m_2h) > stability:
            continue
        return (4.0 * m_h - m_2h) / 3.0, end - 3
    return None, None


def _tail_fit(radii, values, components, delta):
    """Separable nonlinear LSQ over component exponents plus nuisance tails.

    The nuisance dictionary soaks up the fast-decaying remainder so the
    component coefficients stay unbiased.  It has one free exponent t in
    (1 + delta, 4] and, when components are present, an anchor at twice
    the smallest order (the symbol-remainder decay class, tracking the
    running exponents during optimization).  Every tail exponent also
    carries +2 companion columns (two for the free tail): smooth
    remainders in this problem are power series in s^(-2) around their
    leading power (e.g. line integrals of (1 + |x|^2)-type profiles),
    and truncating the series leaks bias into the slowest component,
    whose coefficient is extrapolated far below the grid downstream.
    Tails are never reported as components.  Returns (exponents, coeffs,
    component-only residual, full rms, tails).
    """
    n = len(components)
    lo = np.concatenate([np.full(n, 0.5 + 1e-9), [1.0 + delta + 1e-6]])
    hi = np.concatenate([np.full(n, 1.0), [4.0]])
    x0 = np.concatenate([np.clip(components, lo[:n], hi[:n]), [2.2]])

    def run(with_anchor: bool):
        def tail_set(x):
            t = x[n]
            tails = [t, t + 2.0, t + 4.0]
            if with_anchor and n:
                anchor = max(2.0 * float(np.min(x[:n])), 1.0 + delta + 1e-6)
                tails += [anchor, anchor + 2.0]
            return np.asarray(tails)

        def resid(x):
            a = _design(radii, np.concatenate([x[:n], tail_set(x)]))
            c, *_ = np.linalg.lstsq(a, values, rcond=None)
            return values - a @ c

        sol = least_squares(resid, x0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        exps = np.sort(sol.x[:n])
        tails = np.sort(tail_set(sol.x))
        a = _design(radii, np.concatenate([exps, tails]))
        c, *_ = np.linalg.lstsq(a, values, rcond=None)
        full_resid = values - a @ c
        comp_resid = values - a[:, :n] @ c[:n]
        return exps, c[:n], comp_resid, float(np.sqrt(np.mean(full_resid**2))), tails

    # Occam selection: the anchor pair degrades component identifiability
    # (it sits next to a rho ~ 1 component), so keep it only when the
    # residual actually demands it
    plain = run(False)
    if n == 0:
        return plain
    anchored_fit = run(True)
    return anchored_fit if anchored_fit[3] < plain[3] / 2.0 else plain


def detect_exponents(samples: RaySamples, opts: SeparationOptions | None = None) -> HomogeneousDecomposition:
    """Detect the number, orders and coefficients of power-law components.

    Model-order growth with peeled seeds: starting from the top-of-grid
    slope estimate, fit N components (plus the nuisance tail) for
    N = 0, 1, 2, ... and keep the smallest N whose component-only
    residual decays like a valid remainder.  Residual slopes in the
    boundary band [-1-delta, -1] are resolved by the tenfold rule: the
    next component is kept only when it improves the fit rms by >= 10x.
    All-zero input returns an empty decomposition; data that no in-class
    fit explains raises SeparationError.
    """
    opts = opts or SeparationOptions()
    radii = samples.radii
    values = samples.values
    if np.log10(radii[-1] / radii[0]) < 3.0 - 1e-9:
        raise DomainError("detection requires a grid spanning at least 3 decades")
    scale = float(np.max(np.abs(values)))
    if scale < opts.min_amplitude:
        return HomogeneousDecomposition(
            exponents=np.array([]),
            coefficients=np.array([]),
            remainder_slope=float("-inf"),
            conditioning=1.0,
            residual_rms=scale,
            ray=samples,
        )
    floor = max(opts.min_amplitude, 1e-6 * scale)

    # class guard: sign-consistent data whose top slope is shallower than
    # -1/2 cannot start a component in (1/2, 1]; mixed-sign data is exempt
    # (cancellation between components distorts the apparent slope)
    live = values[np.abs(values) > floor]
    if len(live) and len(set(np.sign(live))) == 1:
        slope0, _ = _leading_slope(radii, values, opts.min_amplitude)
        if slope0 is not None and slope0 > -0.5:
            raise SeparationError(
                f"leading decay s^({slope0:.3f}) is slower than the model class allows"
            )

    def next_fit(exponents):
        """Best (N+1)-component fit grown from the given exponent set."""
        seeds = []
        slope, _ = _leading_slope(radii, values, opts.min_amplitude)
        if not len(exponents) and slope is not None:
            seeds.append(np.array([np.clip(-slope, 0.5 + 1e-6, 1.0)]))
        for fresh in (0.55, 0.75, 0.95):
            if any(abs(fresh - r) < opts.gap_min for r in exponents):
                continue
            seeds.append(np.sort(np.append(exponents, fresh)))
        if not seeds:
            return None
        fits = [_tail_fit(radii, values, s0, opts.delta) for s0 in seeds]
        return min(fits, key=lambda f: f[3])

    # growth loop state: exponents/coeffs/component-residual/full-fit rms;
    # even the empty model gets the nuisance tails, so a pure remainder is
    # explained at N = 0
    current = _tail_fit(radii, values, np.array([]), opts.delta)
    accepted = False
    accept_slope = float("-inf")
    while True:
        exps, coeffs, comp_resid, rms, tails = current
        if float(np.max(np.abs(comp_resid))) <= floor:
            accepted = True
            break
        slope, _ = _leading_slope(radii, comp_resid, opts.min_amplitude)
        if len(exps) >= opts.max_components:
            if slope is not None and slope <= -1.0 - opts.delta:
                accepted = True
                accept_slope = slope
            else:
                warnings.warn("component budget exhausted; residual may contain structure")
            break
        grown = next_fit(exps)
        # a tenfold rms improvement always wins: it is the boundary-band
        # promotion rule, and it also overrides slope estimates confused
        # by sign crossings in mixed-sign data
        if grown is not None and grown[3] <= rms / 10.0:
            current = grown
            continue
        if slope is not None and slope <= -1.0 - opts.delta:
            accepted = True
            accept_slope = slope
            break
        if slope is not None and slope <= -1.0:
            # boundary band without a tenfold improvement: remainder
            accepted = True
            accept_slope = slope
            break
        if slope is None and float(np.max(np.abs(comp_resid))) <= 10.0 * floor:
            accepted = True
            break
        if grown is None:
            break
        current = grown  # in-class structure remains: grow and retry

    exps, coeffs, comp_resid, rms, tails = current
    if not accepted:
        slope, _ = _leading_slope(radii, comp_resid, opts.min_amplitude)
        raise SeparationError(
            f"no in-class decomposition explains the data (best residual decays like s^({slope}))"
        )
    if len(exps) == 0:
        return HomogeneousDecomposition(
            exponents=np.array([]),
            coefficients=np.array([]),
            remainder_slope=accept_slope,
            conditioning=1.0,
            residual_rms=rms,
            ray=samples,
            tail_exponents=tails,
        )

    # merge exponents that collapsed together, then prune components whose
    # contribution at the inner radius is negligible
    merged: list[float] = []
    for r in exps:
        if merged and abs(r - merged[-1]) < opts.gap_min:
            warnings.warn(f"exponents {merged[-1]:.4f} and {r:.4f} merged after refinement")
            continue
        merged.append(float(r))
    if len(merged) != len(exps):
        exps, coeffs, comp_resid, rms, tails = _tail_fit(radii, values, np.array(merged), opts.delta)
    contrib = np.abs(coeffs) * radii[0] ** (-exps)
    keep = contrib >= 0.04 * float(np.abs(values[0])) if values[0] != 0 else contrib > floor
    if not np.all(keep) and np.any(keep):
        exps, coeffs, comp_resid, rms, tails = _tail_fit(radii, values, exps[keep], opts.delta)

    _, _, cond = _lstsq_fit(radii, values, exps)
    return HomogeneousDecomposition(
        exponents=exps,
        coefficients=coeffs,
        remainder_slope=accept_slope,
        conditioning=cond,
        residual_rms=rms,
        ray=samples,
        tail_exponents=tails,
    )


def consensus_exponents(decomps, with_tails: bool = False):
    """Merge per-ray detections into one exponent set.

    The modal component count wins (ties to the smaller count); the
    exponents are the per-position medians across the agreeing rays.
    Rays are processed in sorted order so the reduction is deterministic.
    With with_tails, also returns the median nuisance-tail exponents of
    the agreeing rays (used to keep downstream coefficient fits unbiased
    by the fast-decaying remainder).
    """
    counts = sorted(d.n_components for d in decomps)
    n_hat = 0
    if counts:
        uniq, freq = np.unique(counts, return_counts=True)
        n_hat = int(uniq[np.argmax(freq)])
    if n_hat == 0:
        return (np.array([]), np.array([])) if with_tails else np.array([])
    agree = [d for d in decomps if d.n_components == n_hat]
    stacks = sorted([np.sort(d.exponents) for d in agree], key=tuple)
    exps = np.median(np.stack(stacks), axis=0)
    if not with_tails:
        return exps
    # rays may carry differently sized tail dictionaries (with or without
    # the anchor pair); reduce over the modal size only
    sizes = [len(d.tail_exponents) for d in agree]
    uniq, freq = np.unique(sizes, return_counts=True)
    m_hat = int(uniq[np.argmax(freq)])
    tstacks = sorted(
        [np.sort(d.tail_exponents) for d in agree if len(d.tail_exponents) == m_hat],
        key=tuple,
    )
    tails = np.median(np.stack(tstacks), axis=0) if tstacks and m_hat else np.array([])
    return exps, tails


def decomposition_report_json(exponents, remainder_slope, conditioning, ray_fits) -> dict:
    """JSON document for a (possibly multi-ray) decomposition report."""
    return {
        "exponents": [float(r) for r in exponents],
        "remainder_slope": float(remainder_slope),
        "conditioning": float(conditioning),
        "rays": [
            {
                "omega": rf["omega"].tolist(),
                "u": rf["u"].tolist(),
                "e": rf["e"].tolist(),
                "coeffs": [float(c) for c in rf["coeffs"]],
                "residual": float(rf["residual"]),
            }
            for rf in ray_fits
        ],
    }
