"""Scattering-matrix symbol models and gradient extraction.

The forward object is the symbol a(y, omega) = e^{-i Phi/(2k)} (1 + b)
at fixed energy lambda = k^2: a unit-modulus principal factor driven by
the phase function, times a controlled remainder b whose envelope decays
like (1+|y|)^(-p_b) with p_b = 2 rho_1 - 1 by default.  Remainders for
real potentials are not available in closed form, so b is synthesized: a
seeded trigonometric polynomial in the tangent angle and omega, scaled
to respect the envelope exactly.  Every sample is a pure function of
(y, omega, seed), which keeps oracles immutable and safe to share.

The inverse-facing operation is extract_grad_phase: central differences
of symbol samples in an orthonormal tangent frame give z = 2k grad(a)/a,
and Re(i z) isolates grad Phi up to the remainder's O(|y|^(-2 rho_1))
contribution plus O(h^2) stencil error.  Taking the real part avoids
phase unwrapping entirely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, OutOfDomainError
from .geometry import Direction, TangentPoint, tangent_basis
from .phase import DEFAULT_PHASE_TOL, GaugePhase, phase_batch
from .potential import PotentialModel

DEFAULT_STENCIL_H = 1e-4
DEFAULT_CAP_RADIUS = 0.2
DEFAULT_ANGULAR_DEGREE = 3


@dataclass(frozen=True)
class Energy:
    """Fixed energy lambda > 0 and wave number k = sqrt(lambda)."""

    lam: float
    k: float

    def __init__(self, lam: float):
        if lam <= 0:
            raise DomainError(f"energy must be positive, got {lam}")
        object.__setattr__(self, "lam", float(lam))
        object.__setattr__(self, "k", float(np.sqrt(lam)))


@dataclass(frozen=True)
class SymbolSample:
    point: TangentPoint
    value: complex


@dataclass(frozen=True)
class PerturbationSpec:
    """Synthetic remainder parameters.

    eps = 0 disables the remainder; p_b = None means 2 rho_1 - 1 for the
    model at hand.  degree is the trigonometric degree of the angular
    factor; seed makes the draw reproducible bit for bit.
    """

    eps: float = 0.0
    p_b: float | None = None
    seed: int = 0
    degree: int = DEFAULT_ANGULAR_DEGREE

    def __post_init__(self):
        if self.eps < 0:
            raise DomainError("perturbation amplitude must be >= 0")
        if self.degree < 0:
            raise DomainError("angular degree must be >= 0")


class _RemainderField:
    """Seeded angular-polynomial remainder with a hard decay envelope.

    b(y, omega) = eps * (2 + 2|y|^2)^(-p_b/2) * w(|y|) * g(alpha, omega)
    where g is a complex trigonometric polynomial in the tangent angle
    alpha, modulated affinely in omega and normalized so sup|g| <= 1.
    The (2+2|y|^2) form makes |b| <= eps (1+|y|)^(-p_b) exact; the factor
    w = |y|^2/(1+|y|^2) removes the angular ambiguity at y = 0.
    """

    def __init__(self, spec: PerturbationSpec, p_b: float, dim: int):
        self.spec = spec
        self.p_b = float(p_b)
        rng = np.random.default_rng(spec.seed)
        n = spec.degree + 1
        self.a_cos = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        self.a_sin = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        self.u = rng.standard_normal(n)
        self.v = rng.standard_normal((n, dim))
        bound = float(
            np.sum(
                (np.abs(self.a_cos) + np.abs(self.a_sin))
                * (np.abs(self.u) + np.linalg.norm(self.v, axis=1))
            )
        )
        self.norm = bound if bound > 0 else 1.0

    def __call__(self, ys: np.ndarray, omegas: np.ndarray, bases: np.ndarray) -> np.ndarray:
        if self.spec.eps == 0.0:
            return np.zeros(len(ys), dtype=complex)
        r = np.linalg.norm(ys, axis=-1)
        envelope = self.spec.eps * (2.0 + 2.0 * r * r) ** (-self.p_b / 2.0)
        mollify = r * r / (1.0 + r * r)
        with np.errstate(invalid="ignore"):
            c1 = np.einsum("bd,bd->b", ys, bases[:, 0, :])
            c2 = np.einsum("bd,bd->b", ys, bases[:, 1, :])
        alpha = np.arctan2(c2, c1)
        alpha = np.where(r > 0, alpha, 0.0)
        m = np.arange(self.spec.degree + 1)
        ang = (
            self.a_cos[None, :] * np.cos(m[None, :] * alpha[:, None])
            + self.a_sin[None, :] * np.sin(m[None, :] * alpha[:, None])
        )
        mod = self.u[None, :] + omegas @ self.v.T
        g = np.sum(ang * mod, axis=1) / self.norm
        return envelope * mollify * g


@dataclass(frozen=True)
class SymbolOracle:
    """Pointwise sampler of the symbol, optionally localized and gauged.

    Immutable and re-entrant: values are pure functions of (y, omega) and
    the construction parameters, so concurrent sampling is safe.
    """

    model: PotentialModel
    energy: Energy
    perturbation: PerturbationSpec
    gauged: bool = False
    cap: tuple[Direction, float] | None = None
    tol: float = DEFAULT_PHASE_TOL

    def __post_init__(self):
        p_b = self.perturbation.p_b
        if p_b is None:
            rhos = self.model.rhos
            p_b = 2.0 * rhos[0] - 1.0 if rhos else 1.0
        object.__setattr__(self, "_remainder", _RemainderField(self.perturbation, p_b, self.model.dim))
        shift = 0.0
        if self.gauged and self.model.short_range is not None:
            gauge = GaugePhase(self.model.short_range, tol=self.tol)
            # the implemented short-range family is radial, so the shift is
            # the same for every direction on the energy sphere
            probe = np.zeros(self.model.dim)
            probe[0] = 1.0
            shift = gauge.shift(self.energy.k, Direction(probe))
        object.__setattr__(self, "_gauge_shift", shift)

    @property
    def p_b(self) -> float:
        return self._remainder.p_b

    def _check_domain(self, omegas: np.ndarray):
        if self.cap is None:
            return
        center, radius = self.cap
        dots = np.clip(omegas @ center.vec, -1.0, 1.0)
        dist = np.arccos(dots)
        if np.any(dist > radius + 1e-12):
            worst = float(np.max(dist))
            raise OutOfDomainError(
                f"query direction {worst:.4f} rad from cap center exceeds radius {radius:.4f}"
            )

    def sample_batch(self, ys: np.ndarray, omegas: np.ndarray) -> np.ndarray:
        """Symbol values at rows of (y, omega); y must be tangent to omega."""
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
        self._check_domain(omegas)
        phi, _ = phase_batch(self.model, ys, omegas, tol=self.tol)
        phi = phi + self._gauge_shift
        bases = np.stack([tangent_basis(Direction(w)) for w in omegas])
        b = self._remainder(ys, omegas, bases)
        return np.exp(-1j * phi / (2.0 * self.energy.k)) * (1.0 + b)

    def sample(self, p: TangentPoint) -> complex:
        return complex(self.sample_batch(p.y[None, :], p.omega.vec[None, :])[0])

    def config_json(self) -> dict:
        doc = {
            "lambda": self.energy.lam,
            "perturbation": {
                "eps": self.perturbation.eps,
                "p_b": self.perturbation.p_b,
                "seed": self.perturbation.seed,
            },
            "gauge": self.gauged,
            "cap": None,
        }
        if self.cap is not None:
            doc["cap"] = {"omega0": self.cap[0].vec.tolist(), "radius": self.cap[1]}
        return doc


def principal_symbol(phi: float, energy: Energy) -> complex:
    """Unit-modulus principal factor e^{-i phi / (2k)}."""
    return complex(np.exp(-1j * phi / (2.0 * energy.k)))


def make_synthetic_oracle(
    model: PotentialModel,
    energy: Energy,
    pert: PerturbationSpec | None = None,
    gauged: bool = False,
    tol: float = DEFAULT_PHASE_TOL,
) -> SymbolOracle:
    """Model-backed oracle a = e^{-i Phi/(2k)} (1 + b), deterministic per seed."""
    return SymbolOracle(
        model=model,
        energy=energy,
        perturbation=pert if pert is not None else PerturbationSpec(),
        gauged=gauged,
        tol=tol,
    )


def localized_oracle(oracle: SymbolOracle, omega0: Direction, cap_radius: float = DEFAULT_CAP_RADIUS) -> SymbolOracle:
    """Restrict an oracle to the geodesic cap around omega0.

    On the cap the smooth localizer is identically 1, so values coincide
    with the parent's; outside, queries raise OutOfDomainError.
    """
    if not 0.0 < cap_radius <= np.pi / 4.0:
        raise DomainError(f"cap radius must lie in (0, pi/4], got {cap_radius}")
    if not isinstance(omega0, Direction):
        omega0 = Direction(omega0)
    return SymbolOracle(
        model=oracle.model,
        energy=oracle.energy,
        perturbation=oracle.perturbation,
        gauged=oracle.gauged,
        cap=(omega0, float(cap_radius)),
        tol=oracle.tol,
    )


class OracleFamily:
    """A family of localized oracles acting as one sampler.

    Batched queries are routed to the first member whose cap contains the
    direction; members agree with their common parent on overlaps, so the
    routing order does not affect values.
    """

    def __init__(self, oracles):
        if not oracles:
            raise DomainError("oracle family requires at least one member")
        self.oracles = list(oracles)
        self.energy = self.oracles[0].energy

    def sample_batch(self, ys: np.ndarray, omegas: np.ndarray) -> np.ndarray:
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
        out = np.zeros(len(ys), dtype=complex)
        unassigned = np.ones(len(ys), dtype=bool)
        for oracle in self.oracles:
            if not np.any(unassigned):
                break
            if oracle.cap is None:
                take = unassigned.copy()
            else:
                center, radius = oracle.cap
                dist = np.arccos(np.clip(omegas @ center.vec, -1.0, 1.0))
                take = unassigned & (dist <= radius + 1e-12)
            if np.any(take):
                out[take] = oracle.sample_batch(ys[take], omegas[take])
                unassigned &= ~take
        if np.any(unassigned):
            raise OutOfDomainError(
                f"{int(np.sum(unassigned))} directions fall outside every cap in the family"
            )
        return out

    def sample(self, p: TangentPoint) -> complex:
        return complex(self.sample_batch(p.y[None, :], p.omega.vec[None, :])[0])


def extract_grad_phase_batch(oracle, ys: np.ndarray, omegas: np.ndarray, h: float = DEFAULT_STENCIL_H):
    """Estimate grad Phi from symbol samples at a batch of tangent pairs.

    Central differences with step h * max(1, |y|) along an orthonormal
    tangent frame yield z = 2k grad(a)/a; Re(i z) recovers grad Phi up to
    the remainder term O((1+|y|)^(-2 rho_1)) and O(h^2) stencil error.
    """
    if h <= 0:
        raise DomainError("stencil step must be positive")
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    B, d = ys.shape
    bases = np.stack([tangent_basis(Direction(w)) for w in omegas])  # (B, d-1, d)
    steps = h * np.maximum(1.0, np.linalg.norm(ys, axis=-1))  # (B,)

    # stencil layout per point: center, then (+e_i, -e_i) for each tangent axis
    n_st = 1 + 2 * (d - 1)
    pts = np.empty((B, n_st, d))
    pts[:, 0, :] = ys
    for i in range(d - 1):
        offset = steps[:, None] * bases[:, i, :]
        pts[:, 1 + 2 * i, :] = ys + offset
        pts[:, 2 + 2 * i, :] = ys - offset
    flat_y = pts.reshape(B * n_st, d)
    flat_w = np.repeat(omegas, n_st, axis=0)
    vals = oracle.sample_batch(flat_y, flat_w).reshape(B, n_st)

    center = vals[:, 0]
    if np.any(np.abs(center) < 1e-13):
        raise NumericalError("symbol vanished at a stencil center")
    k = oracle.energy.k
    grads = np.zeros((B, d))
    for i in range(d - 1):
        da = (vals[:, 1 + 2 * i] - vals[:, 2 + 2 * i]) / (2.0 * steps)
        z = 2.0 * k * da / center
        grads += np.real(1j * z)[:, None] * bases[:, i, :]
    return grads


def extract_grad_phase(oracle, p: TangentPoint, h: float = DEFAULT_STENCIL_H) -> np.ndarray:
    """Single-point wrapper around extract_grad_phase_batch."""
    return extract_grad_phase_batch(oracle, p.y[None, :], p.omega.vec[None, :], h=h)[0]


def oracle_from_config(model: PotentialModel, doc: dict | str, tol: float = DEFAULT_PHASE_TOL):
    """Build an oracle from its JSON configuration document."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    pert = doc.get("perturbation") or {}
    spec = PerturbationSpec(
        eps=float(pert.get("eps", 0.0)),
        p_b=pert.get("p_b"),
        seed=int(pert.get("seed", 0)),
    )
    oracle = SymbolOracle(
        model=model,
        energy=Energy(float(doc["lambda"])),
        perturbation=spec,
        gauged=bool(doc.get("gauge", False)),
        tol=tol,
    )
    cap = doc.get("cap")
    if cap:
        oracle = localized_oracle(oracle, Direction(cap["omega0"]), float(cap["radius"]))
    return oracle
