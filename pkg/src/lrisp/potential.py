"""Long-range potential models: sums of homogeneous terms plus a short-range part.

A model is V(x) = sum_j chi(|x|) V_j(x) + V_sr(x) where each V_j is
exactly homogeneous of order -rho_j with 1/2 < rho_1 < ... < rho_N <= 1,
the angular profile is a low-degree polynomial in the direction x/|x|,
and V_sr decays like (1+|x|)^(-rho_sr) with rho_sr > 1.  In cutoff mode
the smooth switch chi (0 below R0/2, 1 above R0) makes the model finite
and C-infinity at the origin without changing it for |x| >= R0; bare
mode evaluates the raw homogeneous sum and rejects the origin.

Evaluation is vectorized: points may be a single vector of shape (d,)
or any array of shape (..., d).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .geometry import as_point


def _np_points(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if arr.shape[-1] != dim:
        raise DomainError(f"points must have last dimension {dim}, got {arr.shape}")
    return np.atleast_2d(arr), single


def smooth_switch(r, r_lo: float, r_hi: float):
    """C-infinity switch: 0 for r <= r_lo, 1 for r >= r_hi.

    Built from the standard exp(-1/s) bump; returns values and the radial
    derivative d(chi)/dr.
    """
    r = np.asarray(r, dtype=float)
    s = (r - r_lo) / (r_hi - r_lo)
    s = np.clip(s, 0.0, 1.0)

    def h(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    def hp(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
        return out

    hs, h1s = h(s), h(1.0 - s)
    denom = hs + h1s
    chi = hs / denom
    dchi_ds = (hp(s) * h1s + hs * hp(1.0 - s)) / denom**2
    interior = (s > 0.0) & (s < 1.0)
    dchi_dr = np.where(interior, dchi_ds, 0.0) / (r_hi - r_lo)
    return chi, dchi_dr


@dataclass(frozen=True)
class Profile:
    """Angular profile: polynomial in <xhat, axis> ("axial") or constant ("radial").

    The profile value at a unit vector u is sum_m coeffs[m] * <u, axis>^m
    for the axial kind and coeffs[0] (default 1) for the radial kind.
    Polynomials in a single direction cosine are smooth on the sphere, so
    every term built from them is C-infinity away from the origin.
    """

    kind: str
    axis: np.ndarray | None = None
    coeffs: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    def __init__(self, kind: str, axis=None, coeffs=None):
        if kind not in ("radial", "axial"):
            raise DomainError(f"unknown profile kind {kind!r}")
        if kind == "axial":
            if axis is None:
                raise DomainError("axial profile requires an axis")
            axis = as_point(axis)
            n = float(np.linalg.norm(axis))
            if n == 0.0:
                raise DomainError("axial profile axis must be nonzero")
            axis = axis / n
        if coeffs is None:
            coeffs = [1.0]
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise DomainError("profile coeffs must be a nonempty 1-D sequence")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, xhat: np.ndarray) -> np.ndarray:
        if self.kind == "radial":
            return np.full(xhat.shape[:-1], float(self.coeffs[0]))
        u = xhat @ self.axis
        return np.polynomial.polynomial.polyval(u, self.coeffs)

    def derivative(self, xhat: np.ndarray) -> np.ndarray:
        """d/du of the polynomial at u = <xhat, axis> (zero for radial)."""
        if self.kind == "radial":
            return np.zeros(xhat.shape[:-1])
        u = xhat @ self.axis
        dcoeffs = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(u, dcoeffs)

    def to_json(self) -> dict:
        doc = {"kind": self.kind, "coeffs": self.coeffs.tolist()}
        doc["axis"] = self.axis.tolist() if self.axis is not None else None
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Profile":
        return cls(doc["kind"], axis=doc.get("axis"), coeffs=doc.get("coeffs"))


@dataclass(frozen=True)
class HomogeneousTerm:
    """coupling * |x|^(-rho) * profile(x/|x|), exactly homogeneous of order -rho."""

    rho: float
    profile: Profile
    coupling: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.rho <= 1.0:
            raise DomainError(f"homogeneous order must lie in (1/2, 1], got {self.rho}")

    def evaluate(self, x, dim: int | None = None) -> np.ndarray | float:
        pts, single = _np_points(x, dim if dim is not None else np.shape(x)[-1])
        r = np.linalg.norm(pts, axis=-1)
        if np.any(r == 0.0):
            raise DomainError("bare homogeneous term is singular at the origin")
        vals = self.coupling * r ** (-self.rho) * self.profile(pts / r[..., None])
        return float(vals[0]) if single else vals

    def gradient(self, x, dim: int | None = None) -> np.ndarray:
        """Analytic gradient; r^(-rho-1) * (-rho * P * xhat + P'(u) (e - u xhat))."""
        pts, single = _np_points(x, dim if dim is not None else np.shape(x)[-1])
        r = np.linalg.norm(pts, axis=-1)
        if np.any(r == 0.0):
            raise DomainError("bare homogeneous term is singular at the origin")
        xhat = pts / r[..., None]
        p = self.profile(xhat)
        grad = -self.rho * p[..., None] * xhat
        if self.profile.kind == "axial":
            u = xhat @ self.profile.axis
            dp = self.profile.derivative(xhat)
            grad = grad + dp[..., None] * (self.profile.axis - u[..., None] * xhat)
        grad = self.coupling * r[..., None] ** (-self.rho - 1.0) * grad
        return grad[0] if single else grad

    def to_json(self) -> dict:
        return {"rho": self.rho, "profile": self.profile.to_json(), "coupling": self.coupling}

    @classmethod
    def from_json(cls, doc: dict) -> "HomogeneousTerm":
        return cls(
            rho=float(doc["rho"]),
            profile=Profile.from_json(doc["profile"]),
            coupling=float(doc.get("coupling", 1.0)),
        )


@dataclass(frozen=True)
class ShortRangeTerm:
    """g * (1 + |x|^2)^(-rho_sr/2) with rho_sr > 1: smooth, short range."""

    rho_sr: float
    g: float = 1.0

    def __post_init__(self):
        if not self.rho_sr > 1.0:
            raise DomainError(f"short-range order must exceed 1, got {self.rho_sr}")

    def evaluate(self, x) -> np.ndarray | float:
        pts, single = _np_points(x, np.shape(x)[-1])
        r2 = np.sum(pts * pts, axis=-1)
        vals = self.g * (1.0 + r2) ** (-self.rho_sr / 2.0)
        return float(vals[0]) if single else vals

    def evaluate_radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.g * (1.0 + r * r) ** (-self.rho_sr / 2.0)

    def gradient(self, x) -> np.ndarray:
        pts, single = _np_points(x, np.shape(x)[-1])
        r2 = np.sum(pts * pts, axis=-1)
        grad = -self.rho_sr * self.g * (1.0 + r2[..., None]) ** (-self.rho_sr / 2.0 - 1.0) * pts
        return grad[0] if single else grad

    def to_json(self) -> dict:
        return {"rho_sr": self.rho_sr, "g": self.g}

    @classmethod
    def from_json(cls, doc: dict) -> "ShortRangeTerm":
        return cls(rho_sr=float(doc["rho_sr"]), g=float(doc.get("g", 1.0)))


@dataclass(frozen=True)
class PotentialModel:
    """Ordered homogeneous terms plus an optional short-range tail.

    mode "bare" evaluates the raw homogeneous sum (singular at 0); mode
    "cutoff" multiplies every homogeneous term by the smooth switch that
    vanishes below cutoff_radius/2 and is 1 above cutoff_radius, so bare
    and cutoff evaluations agree exactly for |x| >= cutoff_radius.
    """

    dim: int
    terms: tuple[HomogeneousTerm, ...]
    short_range: ShortRangeTerm | None = None
    cutoff_radius: float = 1.0
    mode: str = "cutoff"

    def __init__(self, dim, terms=(), short_range=None, cutoff_radius=1.0, mode="cutoff"):
        if dim < 3:
            raise DomainError(f"potential models require d >= 3, got {dim}")
        if mode not in ("bare", "cutoff"):
            raise DomainError(f"unknown mode {mode!r}")
        if cutoff_radius <= 0:
            raise DomainError("cutoff radius must be positive")
        terms = tuple(terms)
        rhos = [t.rho for t in terms]
        if any(b <= a for a, b in zip(rhos, rhos[1:])):
            raise DomainError(f"homogeneous orders must be strictly increasing, got {rhos}")
        for t in terms:
            if t.profile.kind == "axial" and t.profile.axis.shape[0] != dim:
                raise DomainError("profile axis dimension does not match the model")
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "short_range", short_range)
        object.__setattr__(self, "cutoff_radius", float(cutoff_radius))
        object.__setattr__(self, "mode", mode)

    @property
    def rhos(self) -> tuple[float, ...]:
        return tuple(t.rho for t in self.terms)

    def with_mode(self, mode: str) -> "PotentialModel":
        return PotentialModel(self.dim, self.terms, self.short_range, self.cutoff_radius, mode)

    def _switch(self, r):
        if self.mode == "bare":
            return np.ones_like(r), np.zeros_like(r)
        return smooth_switch(r, self.cutoff_radius / 2.0, self.cutoff_radius)


def eval_potential(model: PotentialModel, x):
    """V(x) for a single point (d,) or an array of points (..., d)."""
    pts, single = _np_points(x, model.dim)
    r = np.linalg.norm(pts, axis=-1)
    out = np.zeros(pts.shape[:-1])
    if model.terms:
        if model.mode == "bare":
            if np.any(r == 0.0):
                raise DomainError("bare-mode potential is singular at the origin")
            chi = None
        else:
            chi, _ = model._switch(r)
        live = r > 0.0
        if np.any(live):
            sub = pts[live]
            rs = r[live]
            xhat = sub / rs[..., None]
            acc = np.zeros(rs.shape)
            for term in model.terms:
                acc += term.coupling * rs ** (-term.rho) * term.profile(xhat)
            if chi is not None:
                acc *= chi[live]
            out[live] = acc
    if model.short_range is not None:
        out += model.short_range.evaluate_radial(r)
    return float(out[0]) if single else out


def grad_potential(model: PotentialModel, x):
    """Exact gradient of the model; same point conventions as eval_potential."""
    pts, single = _np_points(x, model.dim)
    r = np.linalg.norm(pts, axis=-1)
    out = np.zeros_like(pts)
    if model.terms:
        if model.mode == "bare":
            if np.any(r == 0.0):
                raise DomainError("bare-mode potential is singular at the origin")
        chi, dchi = model._switch(r)
        live = r > 0.0
        if np.any(live):
            sub = pts[live]
            rs = r[live]
            xhat = sub / rs[..., None]
            gsum = np.zeros_like(sub)
            vsum = np.zeros(rs.shape)
            for term in model.terms:
                p = term.profile(xhat)
                g = -term.rho * p[..., None] * xhat
                if term.profile.kind == "axial":
                    u = xhat @ term.profile.axis
                    dp = term.profile.derivative(xhat)
                    g = g + dp[..., None] * (term.profile.axis - u[..., None] * xhat)
                gsum += term.coupling * rs[..., None] ** (-term.rho - 1.0) * g
                vsum += term.coupling * rs ** (-term.rho) * p
            # product rule through the radial switch
            gsum = chi[live][..., None] * gsum + (dchi[live] * vsum)[..., None] * xhat
            out[live] = gsum
    if model.short_range is not None:
        out += model.short_range.gradient(pts)
    return out[0] if single else out


def line_difference(model: PotentialModel, ys: np.ndarray, omegas: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """V(y + t omega) - V(t omega), cancellation-free for |t| >> |y|.

    ys, omegas: (B, d) with y orthogonal to omega; ts: (B, n).  Requires
    every |t| >= cutoff_radius so the switch is identically 1 on both
    arguments (the tail regime where this difference is needed).  The
    radial parts difference through expm1/log1p and the profile part
    through its exact Taylor step, so the result is accurate relative to
    the difference itself, not to the two nearly-equal potential values.
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    ts = np.asarray(ts, dtype=float)
    if model.mode == "cutoff" and np.any(np.abs(ts) < model.cutoff_radius):
        raise DomainError("line_difference is only valid beyond the cutoff radius")
    if np.any(ts == 0.0):
        raise DomainError("line_difference requires t != 0")
    h2 = np.sum(ys * ys, axis=-1)[:, None]  # (B, 1)
    r0 = np.abs(ts)
    ratio = h2 / (ts * ts)
    r1 = r0 * np.sqrt(1.0 + ratio)
    out = np.zeros_like(ts)
    for term in model.terms:
        rho = term.rho
        dpow = r0 ** (-rho) * np.expm1(-(rho / 2.0) * np.log1p(ratio))
        if term.profile.kind == "radial":
            p1 = float(term.profile.coeffs[0])
            dp = 0.0
        else:
            e = term.profile.axis
            ye = (ys @ e)[:, None]
            we = (omegas @ e)[:, None]
            sgn = np.sign(ts)
            dr = h2 / (r1 + r0)  # r1 - r0, stable
            u0 = sgn * we
            du = (ye - we * sgn * dr) / r1
            u1 = u0 + du
            p1 = np.polynomial.polynomial.polyval(u1, term.profile.coeffs)
            # exact Taylor step of the profile polynomial: no cancellation
            dp = np.zeros_like(ts)
            deriv = term.profile.coeffs
            fact = 1.0
            power = np.ones_like(ts)
            for k in range(1, len(term.profile.coeffs)):
                deriv = np.polynomial.polynomial.polyder(deriv)
                fact *= k
                power = power * du
                dp = dp + np.polynomial.polynomial.polyval(u0, deriv) * power / fact
        out += term.coupling * (dpow * p1 + r0 ** (-rho) * dp)
    if model.short_range is not None:
        sr = model.short_range
        base = 1.0 + r0 * r0
        out += sr.g * base ** (-sr.rho_sr / 2.0) * np.expm1(
            -(sr.rho_sr / 2.0) * np.log1p(h2 / base)
        )
    return out


def verify_homogeneity(term: HomogeneousTerm, x, t: float) -> float:
    """Relative homogeneity residual |V(t x) - t^(-rho) V(x)| / |V(x)|."""
    if t <= 0:
        raise DomainError("homogeneity scale must be positive")
    x = as_point(x)
    v1 = term.evaluate(t * x)
    v0 = term.evaluate(x)
    if v0 == 0.0 and v1 == 0.0:
        return 0.0
    return abs(v1 - t ** (-term.rho) * v0) / abs(v0)


# ---------------------------------------------------------------------------
# JSON document round trip

def model_to_json(model: PotentialModel) -> dict:
    return {
        "dim": model.dim,
        "terms": [t.to_json() for t in model.terms],
        "short_range": model.short_range.to_json() if model.short_range else None,
        "cutoff_radius": model.cutoff_radius,
        "mode": model.mode,
    }


def model_from_json(doc: dict | str) -> PotentialModel:
    if isinstance(doc, str):
        doc = json.loads(doc)
    sr = doc.get("short_range")
    return PotentialModel(
        dim=int(doc["dim"]),
        terms=[HomogeneousTerm.from_json(t) for t in doc.get("terms", [])],
        short_range=ShortRangeTerm.from_json(sr) if sr else None,
        cutoff_radius=float(doc.get("cutoff_radius", 1.0)),
        mode=doc.get("mode", "cutoff"),
    )
