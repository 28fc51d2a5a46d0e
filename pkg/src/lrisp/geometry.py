"""Unit directions, tangent hyperplanes and plane frames.

All downstream data lives on the cotangent-bundle-like set of pairs
(y, omega) with omega a unit vector and y in the hyperplane orthogonal
to omega, so the constructors here re-project and validate aggressively.
Bases are deterministic functions of their inputs: every run of the
pipeline sees the same frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

UNIT_NORM_TOL = 1e-12


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce to a 1-D float array, optionally checking the dimension."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"expected a single point, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DomainError(f"expected dimension {dim}, got {arr.shape[0]}")
    return arr


@dataclass(frozen=True)
class Direction:
    """Unit vector in R^d, d >= 3.

    The constructor normalizes its input; a zero vector or d < 3 is
    rejected.  Instances are immutable and hashable by identity.
    """

    vec: np.ndarray

    def __init__(self, vec):
        arr = as_point(vec)
        if arr.shape[0] < 3:
            raise DomainError("directions require dimension d >= 3")
        norm = float(np.linalg.norm(arr))
        if norm == 0.0 or not np.isfinite(norm):
            raise DomainError("cannot normalize a zero or non-finite vector")
        object.__setattr__(self, "vec", arr / norm)

    @property
    def dim(self) -> int:
        return self.vec.shape[0]

    def __array__(self, dtype=None):
        return self.vec if dtype is None else self.vec.astype(dtype)

    def geodesic_distance(self, other: "Direction") -> float:
        """Great-circle angle between two directions, in [0, pi]."""
        c = float(np.clip(np.dot(self.vec, other.vec), -1.0, 1.0))
        return float(np.arccos(c))


def tangent_basis(omega: Direction) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to omega.

    Returns an array of shape (d-1, d) whose rows span Pi_omega.  The
    construction is deterministic: Gram-Schmidt over the standard basis
    vectors, skipping the coordinate most aligned with omega, so the
    result depends only on omega.
    """
    w = omega.vec
    d = w.shape[0]
    skip = int(np.argmax(np.abs(w)))
    rows = []
    for i in range(d):
        if i == skip:
            continue
        v = np.zeros(d)
        v[i] = 1.0
        v = v - np.dot(v, w) * w
        for r in rows:
            v = v - np.dot(v, r) * r
        nrm = np.linalg.norm(v)
        v = v / nrm
        rows.append(v)
    return np.array(rows)


def project_tangent(y, omega: Direction) -> np.ndarray:
    """Orthogonal projection of y onto the hyperplane Pi_omega."""
    arr = as_point(y, omega.dim)
    return arr - np.dot(arr, omega.vec) * omega.vec


@dataclass(frozen=True)
class TangentPoint:
    """A pair (y, omega) with y in the hyperplane orthogonal to omega.

    The constructor re-projects y onto Pi_omega, so after construction
    |<y, omega>| <= 1e-12 |y| holds exactly.
    """

    omega: Direction
    y: np.ndarray

    def __init__(self, omega: Direction, y):
        if not isinstance(omega, Direction):
            omega = Direction(omega)
        arr = as_point(y, omega.dim)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "y", arr - np.dot(arr, omega.vec) * omega.vec)

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.y))


@dataclass(frozen=True)
class PlaneFrame:
    """A two-dimensional plane through the origin, orthogonal to a base point.

    Holds the base point x != 0 and an orthonormal pair (f1, f2) spanning
    the plane Lambda_x with <f_i, x> = 0.  Used to embed planar Radon
    geometry into R^d.
    """

    x: np.ndarray
    f1: np.ndarray = field(default=None)
    f2: np.ndarray = field(default=None)

    def __init__(self, x, f1=None, f2=None):
        arr = as_point(x)
        if arr.shape[0] < 3:
            raise DomainError("plane frames require dimension d >= 3")
        if float(np.linalg.norm(arr)) == 0.0:
            raise DomainError("plane frame base point must be nonzero")
        if f1 is None or f2 is None:
            basis = tangent_basis(Direction(arr))
            f1, f2 = basis[0], basis[1]
        f1 = as_point(f1, arr.shape[0])
        f2 = as_point(f2, arr.shape[0])
        xhat = arr / np.linalg.norm(arr)
        gram = np.array(
            [
                [np.dot(f1, f1), np.dot(f1, f2), np.dot(f1, xhat)],
                [np.dot(f2, f1), np.dot(f2, f2), np.dot(f2, xhat)],
                [np.dot(xhat, f1), np.dot(xhat, f2), np.dot(xhat, xhat)],
            ]
        )
        if not np.allclose(gram, np.eye(3), atol=1e-12):
            raise DomainError("plane frame axes are not orthonormal to the base point")
        object.__setattr__(self, "x", arr)
        object.__setattr__(self, "f1", f1)
        object.__setattr__(self, "f2", f2)

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    @property
    def xhat(self) -> np.ndarray:
        return self.x / np.linalg.norm(self.x)

    def embed(self, p) -> np.ndarray:
        """Map plane coordinates (..., 2) to ambient vectors (..., d)."""
        p = np.asarray(p, dtype=float)
        return p @ np.stack([self.f1, self.f2])

    def embed_direction(self, theta: float) -> Direction:
        """Unit vector cos(theta) f1 + sin(theta) f2 in the plane."""
        return Direction(np.cos(theta) * self.f1 + np.sin(theta) * self.f2)
