import json

import numpy as np
import pytest
from scipy.integrate import quad

from lrisp.errors import DomainError, InversionError, QuadratureError
from lrisp.radon import (
    PlanarFunction,
    Sinogram,
    _filon_moments,
    _oscillatory_tail,
    fourier_slice,
    invert_at_origin,
    read_sinogram,
    sinogram_from_function,
    sinogram_sidecar_json,
    write_sinogram_csv,
    xray_forward,
)
from lrisp.reference import gaussian_projection, gaussian_transform

GAUSS = PlanarFunction(lambda p: np.exp(-np.sum(p * p, axis=-1)), decay=np.inf)


def power_law(rho):
    return PlanarFunction(
        lambda p: (1.0 + np.sum(p * p, axis=-1)) ** (-(rho + 1.0) / 2.0), decay=rho + 1.0
    )


@pytest.fixture(scope="module")
def gauss_sino():
    return sinogram_from_function(GAUSS)


@pytest.fixture(scope="module")
def power_sino():
    return sinogram_from_function(power_law(0.75), gamma=0.75)


# ---------------------------------------------------------------------------
# forward

def test_xray_gaussian_closed_form():
    r = xray_forward(GAUSS, [0.0, 1.0], [1.0, 0.0])
    assert r == pytest.approx(gaussian_projection(1.0), rel=1e-9)


def test_xray_zero():
    zero = PlanarFunction(lambda p: np.zeros(p.shape[:-1]), decay=np.inf)
    assert xray_forward(zero, [0.0, 2.0], [1.0, 0.0]) == 0.0


def test_xray_radial_depends_on_offset_norm():
    v = power_law(0.75)
    a = xray_forward(v, [0.0, 2.0], [1.0, 0.0])
    b = xray_forward(v, [2.0, 0.0], [0.0, 1.0])
    assert a == pytest.approx(b, rel=1e-9)


def test_xray_decay_validation():
    slow = PlanarFunction(lambda p: (1.0 + np.sum(p * p, axis=-1)) ** -0.4, decay=0.8)
    with pytest.raises(DomainError):
        xray_forward(slow, [0.0, 1.0], [1.0, 0.0])


def test_xray_offset_orthogonality():
    with pytest.raises(DomainError):
        xray_forward(GAUSS, [1.0, 1.0], [1.0, 0.0])


def test_sinogram_flip_symmetry():
    # r(y, w) = r(y, -w): the same line traversed backwards
    v = power_law(0.6)
    y = np.array([0.0, 1.5])
    w = np.array([1.0, 0.0])
    assert xray_forward(v, y, w) == pytest.approx(xray_forward(v, y, -w), rel=1e-10)


# ---------------------------------------------------------------------------
# Filon moments and oscillatory tails (internal building blocks)

def test_filon_moments_against_quad():
    h = 0.3
    for kappa in (0.01, 1.0, 30.0):
        mom = _filon_moments(kappa, h)
        for m in range(4):
            re, _ = quad(lambda u: u**m * np.cos(kappa * u), 0, h, epsabs=1e-14)
            im, _ = quad(lambda u: u**m * np.sin(kappa * u), 0, h, epsabs=1e-14)
            assert mom[m] == pytest.approx(re - 1j * im, abs=1e-13)


def test_oscillatory_tail_against_qawf():
    for kappa, gamma in ((1.0, 0.75), (0.3, 0.6), (5.0, 1.0)):
        re, _ = quad(lambda s: s**-gamma, 40.0, np.inf, weight="cos", wvar=kappa, limit=400)
        im, _ = quad(lambda s: s**-gamma, 40.0, np.inf, weight="sin", wvar=kappa, limit=400)
        got = _oscillatory_tail(kappa, gamma, 40.0)
        assert got == pytest.approx(re - 1j * im, abs=1e-9)


# ---------------------------------------------------------------------------
# Fourier slice

def test_fourier_slice_gaussian(gauss_sino):
    for xi in ([1.0, 0.0], [0.3, 0.4], [0.0, 2.0]):
        got = fourier_slice(gauss_sino, xi)
        assert got == pytest.approx(gaussian_transform(np.linalg.norm(xi)), abs=1e-5)


def test_fourier_slice_real_even(gauss_sino):
    val = fourier_slice(gauss_sino, [0.7, 0.2])
    assert abs(val.imag) <= 1e-8


def test_fourier_slice_zero_xi_rejected(gauss_sino):
    with pytest.raises(DomainError):
        fourier_slice(gauss_sino, [0.0, 0.0])


def test_fourier_slice_requires_tails():
    v = power_law(0.75)
    sino = sinogram_from_function(v, n_angles=4, n_offsets=65, half_width=20.0, gamma=0.75)
    sino.tails = np.zeros_like(sino.tails)  # wipe the tail model
    sino.tails[:, 2] = 2.0
    with pytest.raises(QuadratureError):
        fourier_slice(sino, [1.0, 0.0])


# ---------------------------------------------------------------------------
# inversion at the origin

def test_invert_gaussian(gauss_sino):
    v0, err = invert_at_origin(gauss_sino)
    assert v0 == pytest.approx(1.0, rel=1e-3)
    assert abs(v0 - 1.0) <= 20.0 * err + 1e-9


def test_invert_power_law(power_sino):
    v0, _ = invert_at_origin(power_sino)
    assert v0 == pytest.approx(1.0, rel=1e-2)


def test_invert_zero():
    zero = PlanarFunction(lambda p: np.zeros(p.shape[:-1]), decay=np.inf)
    sino = sinogram_from_function(zero, n_angles=8, n_offsets=65, half_width=10.0)
    v0, _ = invert_at_origin(sino)
    assert v0 == 0.0


def test_invert_linearity(gauss_sino, power_sino):
    combo = Sinogram(
        angles=gauss_sino.angles,
        offsets=gauss_sino.offsets,
        values=2.0 * power_sino.values + 3.0 * gauss_sino.values,
        half_width=gauss_sino.half_width,
    )
    combo.fit_tails(gamma=0.75)
    vc, _ = invert_at_origin(combo)
    v1, _ = invert_at_origin(power_sino)
    v2, _ = invert_at_origin(gauss_sino)
    assert vc == pytest.approx(2.0 * v1 + 3.0 * v2, rel=1e-6)


def test_invert_angle_count_convergence():
    v = power_law(0.75)
    errs = []
    for n in (16, 32, 64):
        sino = sinogram_from_function(v, n_angles=n, gamma=0.75)
        v0, _ = invert_at_origin(sino)
        errs.append(abs(v0 - 1.0))
    assert errs[2] <= errs[0] + 1e-4  # monotone within noise


def test_invert_nonconverging_band_raises(gauss_sino):
    # coherent oscillation at frequency 20 puts its spectral mass in the
    # outer doubled annulus: band contributions grow instead of converging
    osc = Sinogram(
        angles=gauss_sino.angles,
        offsets=gauss_sino.offsets,
        values=np.tile(np.cos(20.0 * gauss_sino.offsets), (len(gauss_sino.angles), 1)),
        half_width=gauss_sino.half_width,
    )
    osc.tails = np.zeros((len(osc.angles), 3))
    osc.tails[:, 2] = 2.0
    with pytest.raises(InversionError):
        invert_at_origin(osc)


def test_invert_band_validation(gauss_sino):
    with pytest.raises(DomainError):
        invert_at_origin(gauss_sino, band=-1.0)


# ---------------------------------------------------------------------------
# serialization

def test_sinogram_csv_sidecar_roundtrip(tmp_path):
    v = power_law(0.75)
    sino = sinogram_from_function(v, n_angles=4, n_offsets=33, half_width=20.0, gamma=0.75)
    csv_path = tmp_path / "sino.csv"
    write_sinogram_csv(csv_path, sino)
    sidecar = sinogram_sidecar_json(sino)
    text = json.dumps(sidecar)
    back = read_sinogram(csv_path, json.loads(text))
    np.testing.assert_allclose(back.values, sino.values, rtol=1e-15)
    np.testing.assert_allclose(back.tails, sino.tails, rtol=1e-15)
    assert back.half_width == sino.half_width
