"""Independent closed-form oracles, computed with scipy's QUADPACK wrappers.

These deliberately avoid the package's own quadrature engine so they can
serve as one side of every dual-route check:

* C(rho) = 2 int_0^inf [ (1+tau^2)^(-rho/2) - tau^(-rho) ] dtau
  (radial phase constant: Phi = C(rho) |y|^(1-rho) for a unit radial term)
* B(rho) = int_{-inf}^{inf} (1+tau^2)^(-(rho+2)/2) dtau
  (radial gradient constant: grad Phi = -rho B(rho) |y|^(-rho) yhat)
* the identity (1-rho) C(rho) = -rho B(rho)
* the Gaussian Radon pair: projections sqrt(pi) exp(-|y|^2) and
  transform (1/2) exp(-|xi|^2/4) under vhat = (2pi)^(-1) iint e^(-i<xi,x>) v.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad


def radial_phase_constant(rho: float) -> float:
    """C(rho) by adaptive 1-D quadrature; negative for rho in (1/2, 1)."""
    if not 0.5 < rho < 1.0:
        raise ValueError("C(rho) requires rho in (1/2, 1)")

    def core(tau):
        return (1.0 + tau * tau) ** (-rho / 2.0) - tau ** (-rho)

    inner, _ = quad(core, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    outer, _ = quad(core, 1.0, np.inf, epsabs=1e-13, epsrel=1e-13)
    return 2.0 * (inner + outer)


def radial_gradient_constant(rho: float) -> float:
    """B(rho) by adaptive 1-D quadrature; B(1) = 2 exactly."""
    if not 0.5 < rho <= 1.0:
        raise ValueError("B(rho) requires rho in (1/2, 1]")
    val, _ = quad(
        lambda tau: (1.0 + tau * tau) ** (-(rho + 2.0) / 2.0),
        -np.inf,
        np.inf,
        epsabs=1e-13,
        epsrel=1e-13,
    )
    return val


def gaussian_projection(y_norm: float) -> float:
    """Line integral of exp(-|x|^2) over a line at distance |y| from 0."""
    return float(np.sqrt(np.pi) * np.exp(-y_norm * y_norm))


def gaussian_transform(xi_norm: float) -> float:
    """2-D Fourier transform of exp(-|x|^2) under the (2pi)^(-1) convention."""
    return float(0.5 * np.exp(-xi_norm * xi_norm / 4.0))
