import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flrwren.background import DeSitter, Minkowski
from flrwren.kernels import flog
from flrwren.modes import (ConformalVacuum, ExplicitModes, FieldParams, PositiveFrequency,
                           make_k_grid, solve_modes)
from flrwren.propagators import (Variant, coincidence_data, coincidence_v, coincidence_w,
                                 effective_mass, fourier_propagator, propagator_matrix,
                                 split_from_feynman, split_propagator)

GAMMA = np.euler_gamma


@pytest.fixture(scope="module")
def massive_minkowski():
    fp = FieldParams(m=0.7, xi=0.0, M=1.3)
    tau = np.linspace(0.0, 2.0, 21)
    # the linear part of the grid starts well above the mass scale
    ks = make_k_grid(1e-3, 4.0, 200.0, n_log=60, dk=0.5)
    return fp, solve_modes(Minkowski(), fp, PositiveFrequency(0.0), ks, tau)


@pytest.fixture(scope="module")
def de_sitter_modes():
    bg = DeSitter(1.0, domain=(-300.0, -0.01))
    fp = FieldParams(m=0.4, xi=0.0)
    tau = np.linspace(-6.0, -1.0, 11)
    # adiabatic state of order two, started well inside the horizon
    ks = np.array([0.2, 0.5, 1.0, 2.0, 5.0])
    return bg, fp, solve_modes(bg, fp, PositiveFrequency(-60.0, 2), ks, tau)


def test_conformal_feynman_closed_form():
    bg = DeSitter()
    tau = np.linspace(-5.0, -1.0, 9)
    ms = solve_modes(bg, FieldParams(), ConformalVacuum(), [0.5, 2.0], tau)
    for k in ms.k:
        t1, t2 = tau[6], tau[2]
        expect = np.exp(-1j * k * (t1 - t2)) / (2 * k)
        assert fourier_propagator(Variant.ConformalFeynman, ms, t1, t2, k) == pytest.approx(expect)
        assert fourier_propagator(Variant.Feynman, ms, t1, t2, k) == pytest.approx(expect, abs=1e-9)


def test_relations_between_variants(de_sitter_modes):
    _, _, ms = de_sitter_modes
    for i in range(len(ms.k)):
        P = propagator_matrix("plus", ms, i)
        Mi = propagator_matrix("minus", ms, i)
        R = propagator_matrix("retarded", ms, i)
        A = propagator_matrix("advanced", ms, i)
        F = propagator_matrix("feynman", ms, i)
        assert np.allclose(Mi, np.conj(P), atol=0)
        assert np.allclose(P, np.conj(P.T), atol=1e-14)
        # (1/i)(Plus - Minus) = Retarded - Advanced
        assert np.max(np.abs(P - Mi - 1j * (R - A))) < 1e-12
        assert np.max(np.abs(F - (P + 1j * A))) < 1e-12
        assert np.max(np.abs(F - (Mi + 1j * R))) < 1e-12
        assert np.allclose(F, F.T, atol=1e-14)
        # causal supports
        tau = ms.tau
        assert np.all(R[tau[:, None] < tau[None, :]] == 0)
        assert np.all(A[tau[:, None] > tau[None, :]] == 0)
        diag = np.diag(P)
        assert np.all(diag.real > 0)
        assert np.allclose(diag.imag, 0, atol=1e-15)


def test_unsolved_momentum_is_a_lookup_error(de_sitter_modes):
    _, _, ms = de_sitter_modes
    with pytest.raises(LookupError):
        fourier_propagator("plus", ms, ms.tau[0], ms.tau[1], 0.33)


def test_coincidence_v_pointwise():
    bg = DeSitter(hubble=0.5)
    fp = FieldParams(m=0.3, xi=0.1)
    tau = np.linspace(-4.0, -1.0, 7)
    R = bg.ricci(tau)
    assert np.allclose(coincidence_v(bg, fp, tau), 0.5 * (0.09 + (0.1 - 1 / 6) * R))


def test_w_minkowski_massless_vanishes():
    ms = solve_modes(Minkowski(), FieldParams(), ConformalVacuum(), make_k_grid(1e-3, 1, 50, 20), [0.0, 1.0])
    assert coincidence_w(Minkowski(), FieldParams(), ms, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_w_minkowski_massive_closed_form(massive_minkowski):
    fp, ms = massive_minkowski
    ref = fp.m**2 / (16 * np.pi**2) * (2 * GAMMA - 1 + np.log(fp.m**2 / (2 * fp.M**2)))
    w = coincidence_w(Minkowski(), fp, ms, 1.0)
    assert abs(w - ref) <= 1e-8 * abs(ref)
    alt = coincidence_w(Minkowski(), fp, ms, 1.0, subtraction="F'")
    assert abs(alt - w) <= 1e-6 * abs(w)


def test_w_de_sitter_conformal_vacuum():
    bg = DeSitter(1.0, domain=(-300.0, -0.01))
    fp = FieldParams()
    ms = solve_modes(bg, fp, ConformalVacuum(), make_k_grid(1e-3, 1.0, 50.0, 30), np.linspace(-3, -1, 5))
    for tau in ms.tau:
        R = bg.ricci(tau)
        assert 8 * np.pi**2 * coincidence_w(bg, fp, ms, tau) == pytest.approx(-R / 36, abs=1e-6)


def test_effective_mass():
    w = np.array([0.1, -0.2])
    assert np.all(effective_mass(FieldParams(lam=0.0), w) == 0)
    assert np.allclose(effective_mass(FieldParams(lam=2.0), w), 6 * w)
    # de Sitter conformal vacuum: mu = 3 lam [w] with 8 pi^2 [w] = -R/36, R = 12
    assert effective_mass(FieldParams(lam=1.0), -12 / 36 / (8 * np.pi**2)) == pytest.approx(-1 / (8 * np.pi**2))


def test_split_of_conformal_vacuum_is_zero():
    bg = DeSitter()
    tau = np.linspace(-4.0, -1.0, 7)
    ms = solve_modes(bg, FieldParams(), ConformalVacuum(), [0.7], tau)
    s = split_propagator(ms, FieldParams(), tau[5], tau[1], 0.7)
    assert abs(s.d) < 1e-9 and s.d1 == 0 and abs(s.d2) < 1e-9


def test_split_with_vanishing_v_has_no_log_part():
    # conformally coupled massless field in a non-vacuum state
    bg = DeSitter()
    tau = np.linspace(-4.0, -1.0, 7)
    al, be = np.cosh(0.3), np.sinh(0.3) * np.exp(0.4j)

    def data(k):
        e = np.exp(-1j * k * tau[0])
        chi = (al * e + be / e) / np.sqrt(2 * k)
        dchi = -1j * k * (al * e - be / e) / np.sqrt(2 * k)
        return tau[0], chi, dchi

    ms = solve_modes(bg, FieldParams(), ExplicitModes(data), [0.7], tau)
    s = split_propagator(ms, FieldParams(), tau[4], tau[2], 0.7)
    assert s.d1 == 0
    assert s.d2 == s.d
    assert abs(s.d) > 1e-3


@settings(max_examples=25)
@given(st.floats(0.1, 5.0), st.floats(0.1, 3.0), st.floats(-3.0, 3.0), st.floats(0.2, 3.0))
def test_split_minkowski_massive_closed_form(k, m, t, M):
    fp = FieldParams(m=m, xi=0.0, M=M)
    w = np.hypot(k, m)
    feyn = np.exp(-1j * w * abs(t)) / (2 * w)
    s = split_from_feynman(Minkowski(), fp, feyn, t, 0.0, k)
    expect = np.exp(-1j * w * abs(t)) / (2 * w) - np.exp(-1j * k * abs(t)) / (2 * k)
    assert s.d == pytest.approx(expect, rel=1e-12, abs=1e-14)
    assert s.d1 + s.d2 == pytest.approx(s.d, rel=1e-12, abs=1e-14)
    # d1 = [v] (2 pi)^{3/2} flog / (8 pi^2) at a = 1
    assert s.d1 == pytest.approx(m * m / 2 * (2 * np.pi) ** 1.5 / (8 * np.pi**2) * flog(t, k, M))


def test_d_decays_faster_than_single_propagator(massive_minkowski):
    fp, ms = massive_minkowski
    t = ms.tau[10]
    vals = [abs(split_propagator(ms, fp, t, t, k).d) * k for k in ms.k[-5:]]
    assert vals[-1] < 0.01 and vals[-1] < vals[0]


def test_coincidence_table(massive_minkowski):
    fp, ms = massive_minkowski
    data = coincidence_data(Minkowski(), FieldParams(m=0.7, xi=0.0, M=1.3, lam=0.5), ms)
    assert len(data.to_csv_rows()) == len(ms.tau)
    assert np.allclose(data.mu, 1.5 * data.w)
    assert np.allclose(data.v, 0.49 / 2)


def test_w_independent_of_subtraction_de_sitter():
    bg = DeSitter(1.0, domain=(-300.0, -0.01))
    fp = FieldParams(m=0.5, xi=0.25)
    ks = make_k_grid(0.1, 4.0, 100.0, n_log=60, dk=0.5)
    ms = solve_modes(bg, fp, PositiveFrequency(-30.0, 2), ks, np.array([-2.0, -1.0]))
    w = coincidence_w(bg, fp, ms, -1.0)
    alt = coincidence_w(bg, fp, ms, -1.0, subtraction="F'")
    assert abs(alt - w) <= 1e-6 * abs(w)
