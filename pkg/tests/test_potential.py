import json

import numpy as np
import pytest

from lrisp import fixtures
from lrisp.errors import DomainError
from lrisp.potential import (
    HomogeneousTerm,
    PotentialModel,
    Profile,
    ShortRangeTerm,
    eval_potential,
    grad_potential,
    line_difference,
    model_from_json,
    model_to_json,
    verify_homogeneity,
)


def test_p1_radial_value():
    x = np.array([0.0, 2.0, 0.0])
    assert eval_potential(fixtures.p1("bare"), x) == pytest.approx(2.0**-0.75, rel=1e-14)


def test_p1_cutoff_vanishes_at_origin():
    assert eval_potential(fixtures.p1("cutoff"), np.zeros(3)) == 0.0


def test_p2_axial_value():
    # direct substitution: 2^(-0.6) * (1 + 0.5 * 1^2), checked independently
    x = np.array([0.0, 0.0, 2.0])
    expected = 2.0**-0.6 * 1.5
    assert eval_potential(fixtures.p2("bare"), x) == pytest.approx(expected, rel=1e-14)
    # independent evaluator: raw formula
    xhat = x / np.linalg.norm(x)
    raw = np.linalg.norm(x) ** -0.6 * (1.0 + 0.5 * xhat[2] ** 2)
    assert eval_potential(fixtures.p2("bare"), x) == pytest.approx(raw, rel=1e-14)


def test_bare_origin_rejected():
    with pytest.raises(DomainError):
        eval_potential(fixtures.p1("bare"), np.zeros(3))


def test_rho_ordering_enforced():
    t1 = HomogeneousTerm(rho=0.8, profile=Profile("radial"))
    t2 = HomogeneousTerm(rho=0.6, profile=Profile("radial"))
    with pytest.raises(DomainError):
        PotentialModel(dim=3, terms=[t1, t2])


def test_rho_range_enforced():
    with pytest.raises(DomainError):
        HomogeneousTerm(rho=0.5, profile=Profile("radial"))
    with pytest.raises(DomainError):
        HomogeneousTerm(rho=1.2, profile=Profile("radial"))


def test_homogeneity_exact_randomized():
    gen = np.random.default_rng(42)
    for model in (fixtures.p1("bare"), fixtures.p2("bare"), fixtures.p3("bare")):
        for term in model.terms:
            for _ in range(20):
                x = gen.standard_normal(3)
                t = float(gen.uniform(0.1, 10.0))
                assert verify_homogeneity(term, x, t) <= 1e-12


def test_homogeneity_of_corrupted_exponent():
    # term evaluates with exponent 0.75 + 1e-3 but is checked against the
    # nominal 0.75: residual = t^(-0.75) |t^(-1e-3) - 1| at |x| = 1, t = 10
    term = HomogeneousTerm(rho=0.75 + 1e-3, profile=Profile("radial"))
    x = np.array([1.0, 0.0, 0.0])
    res = abs(term.evaluate(10.0 * x) - 10.0**-0.75 * term.evaluate(x)) / abs(term.evaluate(x))
    expected = 10.0**-0.75 * abs(10.0 ** (-1e-3) - 1.0)
    assert res == pytest.approx(expected, rel=1e-10)
    # same scale as the raw exponent perturbation |10^(1e-3) - 1|
    assert res == pytest.approx(abs(10.0 ** 1e-3 - 1.0), rel=1.0)


def test_cutoff_bare_agree_beyond_radius():
    gen = np.random.default_rng(7)
    bare, cut = fixtures.p3("bare"), fixtures.p3("cutoff")
    for _ in range(25):
        x = gen.standard_normal(3)
        x *= (1.0 + gen.uniform(0, 9)) / np.linalg.norm(x)  # |x| in [1, 10] = [R0, ...]
        assert eval_potential(cut, x) == eval_potential(bare, x)  # bit-exact


def test_gradient_matches_finite_differences():
    gen = np.random.default_rng(3)
    for model in (fixtures.p1("bare"), fixtures.p2("bare"), fixtures.p3("cutoff")):
        for _ in range(10):
            x = gen.standard_normal(3) * 2.0
            if np.linalg.norm(x) < 0.3:
                continue
            u = gen.standard_normal(3)
            u /= np.linalg.norm(u)
            h = 1e-5
            fd = (eval_potential(model, x + h * u) - eval_potential(model, x - h * u)) / (2 * h)
            assert np.dot(grad_potential(model, x), u) == pytest.approx(fd, rel=1e-8, abs=1e-10)


def test_gradient_radial_closed_form():
    model = fixtures.p1("bare")
    x = np.array([1.0, 2.0, -0.5])
    r = np.linalg.norm(x)
    expected = -0.75 * r ** (-2.75) * x
    np.testing.assert_allclose(grad_potential(model, x), expected, rtol=1e-13)


def test_gradient_zero_inside_cutoff():
    model = fixtures.p1("cutoff")
    x = np.array([0.2, 0.1, 0.0])  # |x| < R0/2
    np.testing.assert_array_equal(grad_potential(model, x), np.zeros(3))


def test_gradient_convergence_order():
    # central differences of V converge to the analytic gradient at order >= 1.9
    model = fixtures.p3("cutoff")
    x = np.array([0.9, -0.4, 1.3])
    u = np.array([0.3, 0.5, -0.8])
    u /= np.linalg.norm(u)
    g = float(np.dot(grad_potential(model, x), u))
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        fd = (eval_potential(model, x + h * u) - eval_potential(model, x - h * u)) / (2 * h)
        errs.append(abs(fd - g))
    order = np.log(errs[0] / errs[2]) / np.log(4.0)
    assert order >= 1.9


def test_short_range_decay_bound():
    sr = ShortRangeTerm(rho_sr=2.0, g=1.0)
    r = np.geomspace(1.0, 1e4, 50)
    x = np.zeros((50, 3))
    x[:, 0] = r
    vals = np.abs(sr.evaluate(x)) * (1.0 + r) ** 2.0
    assert np.all(vals <= 4.0)  # bounded over |x| in [1, 1e4]


def test_short_range_derivative_gains_decay():
    sr = ShortRangeTerm(rho_sr=2.0, g=1.0)
    for r in (2.0, 10.0, 100.0):
        x = np.array([r, 0.0, 0.0])
        g = np.linalg.norm(sr.gradient(x))
        v = abs(sr.evaluate(x))
        assert g <= 3.0 * v / r  # one extra order of decay


def test_empty_term_list_allowed():
    model = PotentialModel(dim=3, terms=[], short_range=ShortRangeTerm(2.0, 1.0))
    x = np.array([1.0, 1.0, 1.0])
    assert eval_potential(model, x) == pytest.approx(0.25, rel=1e-14)
    assert eval_potential(fixtures.zero_model(), x) == 0.0


def test_json_roundtrip():
    model = fixtures.p3("cutoff")
    doc = model_to_json(model)
    text = json.dumps(doc)
    back = model_from_json(text)
    gen = np.random.default_rng(0)
    for _ in range(10):
        x = gen.standard_normal(3) * 3.0
        assert eval_potential(back, x) == eval_potential(model, x)


def test_line_difference_matches_naive():
    model = fixtures.p3("cutoff")
    y = np.array([[0.0, 3.0, 4.0]])
    w = np.array([[1.0, 0.0, 0.0]])
    ts = np.array([[2.0, 17.0, 331.0]])
    stable = line_difference(model, y, w, ts)
    for k, t in enumerate(ts[0]):
        naive = eval_potential(model, y[0] + t * w[0]) - eval_potential(model, t * w[0])
        assert stable[0, k] == pytest.approx(naive, rel=1e-11)
