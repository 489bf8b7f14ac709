import numpy as np
import pytest

from safechain.jets import Jet, chain_state_jets


def poly_eval(phi1, phi2):
    # reference polynomial p(a, b) = a^2 b + 3 a - 2
    return phi1**2 * phi2 + 3.0 * phi1 - 2.0


def test_mul_matches_polynomial_derivatives():
    # chain n=2, m=1: phi1' = phi2, phi2' = 0 (input excluded)
    phi = np.array([1.5, -0.7])
    b = chain_state_jets(phi, 2, 1, 3)
    p1, p2 = b[0][0], b[1][0]
    jet = p1 * p1 * p2 + 3.0 * p1 - 2.0

    a, bb = phi
    assert jet.value == pytest.approx(poly_eval(a, bb), rel=1e-14)
    # d/dt p = 2 a a' b = 2 a b^2 ... with a' = b, b' = 0:
    assert jet.deriv == pytest.approx(2 * a * bb * bb + 3 * bb, rel=1e-13)
    # gradient
    assert jet.gradient == pytest.approx([2 * a * bb + 3.0, a * a], rel=1e-13)
    # second derivative: d2/dt2 (a^2 b) = 2 b^3 (a''=0)
    assert 2.0 * jet.c[2, 0] == pytest.approx(2 * bb**3, rel=1e-13)


def test_constant_and_scalar_ops():
    c = Jet.constant(2.0, 2, 3)
    out = (c + 1.0) * 3.0 - 0.5
    assert out.value == pytest.approx(8.5)
    assert np.all(out.c[1:] == 0.0)
    assert (1.0 - c).value == pytest.approx(-1.0)


def test_pow_matches_repeated_mul():
    phi = np.array([0.8, 0.3])
    b = chain_state_jets(phi, 2, 1, 3)
    p = b[0][0]
    assert np.allclose((p**3).c, (p * p * p).c)
    with pytest.raises(ValueError):
        p ** -1
    with pytest.raises(ValueError):
        p ** 0.5


def test_ddt_shifts_coefficients():
    phi = np.array([1.0, 2.0, -1.0])
    b = chain_state_jets(phi, 3, 1, 3)
    jet = b[0][0] * b[0][0]
    d = jet.ddt()
    for k in range(jet.order):
        assert np.allclose(d.c[k], (k + 1) * jet.c[k + 1])
    assert np.all(d.c[-1] == 0.0)


def test_seeds_with_estimates():
    phi = np.array([1.0, 2.0])
    w = [np.array([0.5]), None]
    wd = [np.array([-0.25]), None]
    b = chain_state_jets(phi, 2, 1, 3, w_hat=w, w_hat_dot=wd)
    # phi1' = phi2 + w1, phi1'' = phi2' + w1' = 0 + w1'
    assert b[0][0].c[1, 0] == pytest.approx(2.5)
    assert 2.0 * b[0][0].c[2, 0] == pytest.approx(-0.25)
    # gradient of the first coefficient is the unit vector of phi2
    assert b[0][0].c[1, 1:] == pytest.approx([0.0, 1.0])


def test_seed_taylor_matches_flow():
    # integrate the chain with constant w and compare against the jet series
    phi = np.array([0.4, -1.2, 0.9])
    w = [np.array([0.3]), np.array([-0.1]), None]
    b = chain_state_jets(phi, 3, 1, 3, w_hat=w)
    tau = 1e-2
    # exact flow of the linear chain with v = 0, constant w
    p3 = phi[2]
    p2 = phi[1] + tau * (p3 + (-0.1))
    p1 = phi[0] + tau * (phi[1] + 0.3) + tau**2 / 2.0 * (p3 - 0.1)
    series1 = sum(b[0][0].c[k, 0] * tau**k for k in range(4))
    series2 = sum(b[1][0].c[k, 0] * tau**k for k in range(4))
    assert series1 == pytest.approx(p1, abs=1e-15)
    assert series2 == pytest.approx(p2, abs=1e-15)
