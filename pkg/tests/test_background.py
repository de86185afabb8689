import numpy as np
import pytest
from hypothesis import given, strategies as st

from flrwren.background import DeSitter, Minkowski, PowerLaw, Tabulated, evaluate
from flrwren.errors import AccuracyError, DomainError


def test_minkowski_is_flat():
    p = evaluate(Minkowski(), np.array([-3.0, 0.0, 7.5]))
    assert np.all(p.a == 1)
    assert np.all(p.hubble == 0)
    assert np.all(p.ricci == 0)


def test_de_sitter_ricci_is_twelve_h_squared():
    p = evaluate(DeSitter(hubble=1.0), -1.0)
    assert p.a == pytest.approx(1.0)
    assert p.ricci == pytest.approx(12.0, rel=1e-14)


@given(st.floats(0.1, 5.0), st.floats(-50.0, -0.01))
def test_de_sitter_ricci_any_rate(h, tau):
    p = evaluate(DeSitter(hubble=h), tau)
    assert p.ricci == pytest.approx(12 * h * h, rel=1e-12)
    assert p.hubble == pytest.approx(h, rel=1e-12)


def test_radiation_like_power_law():
    p = evaluate(PowerLaw(exponent=1.0), 2.0)
    assert p.a == pytest.approx(2.0)
    assert p.dda == 0
    assert p.ricci == 0


def test_domain_errors():
    with pytest.raises(DomainError):
        DeSitter().a(0.5)
    with pytest.raises(DomainError):
        PowerLaw().a(-1.0)
    with pytest.raises(DomainError):
        DeSitter(domain=(-2.0, 1.0))
    with pytest.raises(DomainError):
        Tabulated(tau_grid=tuple(range(10)), a_values=(1.0,) * 9 + (-1.0,))


def _ricci_from_cosmic_time(bg, tau, h=1e-4):
    # R = 6 (dH/dt + 2 H^2) with dt = a dtau and H = a'/a^2
    hub = lambda x: evaluate(bg, x).hubble
    dh = (hub(tau + h) - hub(tau - h)) / (2 * h)
    a = bg.a(tau)
    return 6 * (dh / a + 2 * hub(tau) ** 2)


@pytest.mark.parametrize("bg, tau", [
    (DeSitter(hubble=0.7), -1.3),
    (PowerLaw(exponent=2.0), 1.7),
    (PowerLaw(exponent=0.5, tau_ref=2.0), 3.1),
])
def test_ricci_two_routes(bg, tau):
    r = _ricci_from_cosmic_time(bg, tau)
    assert r == pytest.approx(evaluate(bg, tau).ricci, rel=1e-7)


@pytest.mark.parametrize("bg, span", [
    (DeSitter(hubble=1.0), (-2.0, -0.5)),
    (PowerLaw(exponent=2.0), (1.0, 3.0)),
    (PowerLaw(exponent=1.0), (0.5, 2.0)),
    (Minkowski(), (0.0, 1.0)),
])
def test_tabulated_reproduces_analytic(bg, span):
    grid = np.linspace(*span, 801)
    tab = Tabulated.from_background(bg, grid)
    inner = np.linspace(span[0], span[1], 97)[8:-8]
    exact, approx = evaluate(bg, inner), evaluate(tab, inner)
    for name in ("a", "hubble", "ricci"):
        e, v = getattr(exact, name), getattr(approx, name)
        scale = max(np.max(np.abs(e)), 1.0)
        assert np.max(np.abs(v - e)) / scale < 1e-8, name
    assert tab.check_resolution() < 1e-6


def test_tabulated_coarse_grid_is_flagged():
    tab = Tabulated.from_background(DeSitter(), np.linspace(-2.0, -0.1, 12))
    with pytest.raises(AccuracyError):
        tab.check_resolution()
