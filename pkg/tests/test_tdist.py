import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import dawsn

from flrwren.errors import DomainError
from flrwren.tdist import BoundaryValue, Delta, FinitePartAbs, fd_matrix, trapezoid_weights


def gaussian(c):
    return lambda t: np.exp(-(np.asarray(t) - c) ** 2)


def test_finite_part_of_gaussian_closed_form():
    # int_0^inf (e^{-t^2} - theta(1 - t))/t dt = -gamma/2
    for M in (0.5, 1.0, 3.0):
        val = FinitePartAbs(0.0, M).pair(gaussian(0.0))
        expected = -np.euler_gamma + 2 * np.log(M) + np.log(2) + 1j * np.pi
        assert val == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("c", [0.0, 0.4, -1.1])
def test_boundary_value_of_gaussian_closed_form(sign, c):
    # principal value of a shifted Gaussian over t is a Dawson function
    val = BoundaryValue(0.0, sign).pair(gaussian(c))
    expected = 2 * np.sqrt(np.pi) * dawsn(c) + 1j * np.pi * sign * np.exp(-c * c)
    assert val == pytest.approx(expected, abs=1e-10)


@given(T=st.floats(0.1, 5.0), kappa=st.floats(0.0, 3.0))
@settings(max_examples=25)
def test_finite_part_independent_of_split(T, kappa):
    D = FinitePartAbs(kappa, 1.0)
    a = D.pair(gaussian(0.3), T=1.0)
    b = D.pair(gaussian(0.3), T=T)
    assert abs(a - b) < 1e-9


def test_finite_part_scale_shift():
    # M -> 2M adds 2 log 2 times psi(0)
    phi = gaussian(0.3)
    diff = FinitePartAbs(1.0, 2.0).pair(phi) - FinitePartAbs(1.0, 1.0).pair(phi)
    assert diff == pytest.approx(2 * np.log(2) * phi(0.0), abs=1e-10)


@pytest.mark.parametrize("D", [FinitePartAbs(1.3, 1.0), BoundaryValue(1.3, 1),
                               BoundaryValue(0.7, -1), Delta()])
def test_grid_weights_match_pairing(D):
    phi = gaussian(0.3)
    errs = []
    for h in (0.02, 0.01):
        g = np.linspace(-10, 10, int(round(20 / h)) + 1)
        i = len(g) // 2
        grid_val = (D.weights(g) @ phi(g))[i]
        ref = D.pair(lambda t: phi(g[i] - t))
        errs.append(abs(grid_val - ref))
    assert errs[-1] < 1e-8


def test_operator_matches_dense_weights():
    g = np.linspace(-5, 5, 401)
    D = FinitePartAbs(0.8, 1.0)
    phi = np.cos(g) * np.exp(-g**2)
    op = D.operator(g)
    assert np.allclose(op.apply(phi), op.dense() @ phi, atol=1e-12)


def test_trapezoid_and_differences():
    g = np.linspace(0, 1, 101)
    assert trapezoid_weights(g) @ g**2 == pytest.approx(1 / 3, abs=2e-5)
    d2 = fd_matrix(g, 2)
    assert np.allclose((d2 @ np.sin(g))[5:-5], -np.sin(g)[5:-5], atol=1e-4)


def test_nonuniform_grid_rejected():
    with pytest.raises(DomainError):
        FinitePartAbs(1.0, 1.0).weights(np.array([0.0, 0.1, 0.3]))
