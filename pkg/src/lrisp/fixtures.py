"""Canonical potential fixtures shared by tests, the selftest command and docs.

P1: single radial term, order 3/4, unit coupling.
P2: order 0.6 with profile 1 + (1/2)<xhat, e3>^2.
P3: P2's term, a radial order-1 term with coupling 1/2, and the
    short-range tail (1 + |x|^2)^(-1).

All three are d = 3 with cutoff radius 1; helpers return either bare or
cutoff mode.
"""

from __future__ import annotations

import numpy as np

from .potential import HomogeneousTerm, PotentialModel, Profile, ShortRangeTerm

E3 = np.array([0.0, 0.0, 1.0])


def p1(mode: str = "cutoff") -> PotentialModel:
    term = HomogeneousTerm(rho=0.75, profile=Profile("radial"), coupling=1.0)
    return PotentialModel(dim=3, terms=[term], mode=mode)


def p2(mode: str = "cutoff") -> PotentialModel:
    term = HomogeneousTerm(
        rho=0.6, profile=Profile("axial", axis=E3, coeffs=[1.0, 0.0, 0.5]), coupling=1.0
    )
    return PotentialModel(dim=3, terms=[term], mode=mode)


def p3(mode: str = "cutoff") -> PotentialModel:
    t1 = HomogeneousTerm(
        rho=0.6, profile=Profile("axial", axis=E3, coeffs=[1.0, 0.0, 0.5]), coupling=1.0
    )
    t2 = HomogeneousTerm(rho=1.0, profile=Profile("radial"), coupling=0.5)
    sr = ShortRangeTerm(rho_sr=2.0, g=1.0)
    return PotentialModel(dim=3, terms=[t1, t2], short_range=sr, mode=mode)


def zero_model() -> PotentialModel:
    """Pure null model: no terms, no short-range part."""
    return PotentialModel(dim=3, terms=[], mode="cutoff")
