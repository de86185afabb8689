import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import (fish_smooth_oracle, fishlog_transform_oracle, flog_reconstruct,
                     k3ren_mass_limit, massive_fish_difference, sunset_smooth_oracle)
from flrwren.background import DeSitter, Minkowski, Tabulated
from flrwren.errors import DivergenceError, DomainError
from flrwren.kernels import (EIGHT_PI2, _fishlog_transform, conv_spatial, fish_kernel, fish_ms,
                             fishlog_kernel, fishlog_ms, flog, full_fish, full_sunset,
                             k3ren_constant, k3ren_pair, oscillatory_tail, sunset_kernel,
                             sunset_ms, tame_tail)

SQRT8PI = np.sqrt(8 * np.pi)
SPACELIKE = [(1.0, 0.0, 1.0), (2.0, 1.0, 1.0), (3.0, 0.5, 2.0), (0.7, 0.3, 0.5), (5.0, 4.0, 1.3)]


def massive_d(m, t):
    s = abs(t)

    def d(p):
        p = np.asarray(p, dtype=float)
        w = np.sqrt(p * p + m * m)
        return np.exp(-1j * w * s) / (2 * w) - np.exp(-1j * p * s) / (2 * p)
    return d


# flog and the renormalised 1/k^3


def test_flog_equal_times():
    assert flog(0.0, 2.0, 3.0) == pytest.approx(-SQRT8PI / 16)


@given(st.floats(-10, 10), st.floats(0.01, 50))
def test_flog_even_in_time(t, k):
    assert flog(t, k) == flog(-t, k)


def test_flog_needs_positive_momentum():
    with pytest.raises(DomainError):
        flog(1.0, 0.0)


def test_flog_reconstruction_at_half():
    # sigma = (r^2 - t^2)/2 = 1/2 at r = 1, t = 0
    assert flog_reconstruct(1.0, 0.0, 1.0).real == pytest.approx(np.log(0.5), rel=1e-10)


@pytest.mark.parametrize("r, t, M", SPACELIKE)
def test_flog_reconstruction(r, t, M):
    val = flog_reconstruct(r, t, M)
    exact = np.log(M * M * (r * r - t * t) / 2)
    assert abs(val - exact) <= 1e-4 * abs(exact)


def test_k3ren_zero_profile():
    assert k3ren_pair(lambda k: 0.0 * np.exp(-k)) == 0


def test_k3ren_scale_change():
    g = lambda k: np.exp(-k * k)
    assert k3ren_pair(g, M=2.0) - k3ren_pair(g, M=1.0) == pytest.approx(-4 * np.pi * np.log(2), abs=1e-10)


@pytest.mark.parametrize("g", [
    lambda k: np.exp(-k * k),
    lambda k: 1 / (1 + k**2) ** 2,
    lambda k: np.cos(k) * np.exp(-k),
])
def test_k3ren_covariance(g):
    for M, M2 in [(1.0, 3.0), (0.5, 0.2)]:
        diff = k3ren_pair(g, M=M2) - k3ren_pair(g, M=M)
        assert diff == pytest.approx(4 * np.pi * g(0.0) * np.log(M / M2), abs=1e-8)


def test_k3ren_matches_mass_limit():
    g = lambda k: np.exp(-k * k)
    limit, seq = k3ren_mass_limit(g)
    assert k3ren_pair(g) == pytest.approx(limit, abs=1e-9)
    # the sequence converges to the same value
    assert abs(seq[-1] - seq[-2]) < 1e-4


@settings(max_examples=15)
@given(st.floats(0.05, 5.0))
def test_k3ren_split_point_independent(k0):
    g = lambda k: np.exp(-k) / (1 + k)
    assert k3ren_pair(g, k0=k0) == pytest.approx(k3ren_pair(g, k0=1.0), abs=1e-9)


@settings(max_examples=15)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_k3ren_linear(a, b):
    f = lambda k: np.exp(-k * k)
    g = lambda k: 1 / (1 + k**4)
    lhs = k3ren_pair(lambda k: a * f(k) + b * g(k))
    assert lhs == pytest.approx(a * k3ren_pair(f) + b * k3ren_pair(g), abs=1e-8)


def test_k3ren_errors():
    with pytest.raises(DomainError):
        k3ren_pair(lambda k: 1 / k if k else np.inf)
    with pytest.raises(DivergenceError):
        k3ren_pair(lambda k: 1.0 + 0 * k)


def test_k3ren_constant_is_split_covariant():
    assert k3ren_constant(2.0, 1.0) - k3ren_constant(1.0, 1.0) == pytest.approx(np.log(2))


# fish


def test_fish_local_flat():
    s = fish_ms(Minkowski(), 1.0, 0.3, 0.3, 1.0)
    assert s.local[0] == pytest.approx(-1j / (16 * np.pi**2))
    assert np.isnan(s.smooth)


def test_fish_local_with_scale_factor():
    bg = DeSitter()
    a = bg.a(-0.5)
    c = fish_kernel(bg, 1.0, 1.0).local_coefficients(-0.5)[0]
    assert c == pytest.approx(-1j * (1 + 2 * np.log(a)) / (16 * np.pi**2 * a**2))


@given(st.floats(-5, -0.2), st.floats(-5, -0.2), st.floats(0.0, 5.0))
def test_fish_smooth_symmetric(t1, t2, k):
    if t1 == t2:
        return
    kern = fish_kernel(DeSitter(), 1.0, k)
    assert kern.smooth(t1, t2) == pytest.approx(kern.smooth(t2, t1), rel=1e-14)


def test_fish_zero_momentum_limit():
    t = 0.7
    vals = [fish_ms(Minkowski(), 1.0, t, 0.0, k).smooth for k in (4e-3, 2e-3, 1e-3)]
    # quadratic Richardson on a halving sequence
    extrap = (8 * vals[2] - 6 * vals[1] + vals[0]) / 3
    zero = fish_ms(Minkowski(), 1.0, t, 0.0, 0.0).smooth
    assert np.isfinite(zero)
    assert abs(vals[2] - extrap) <= 1e-3 * abs(extrap)
    assert abs(zero - extrap) <= 1e-3 * abs(extrap)


@pytest.mark.parametrize("t, k", [(1.0, 1.0), (0.5, 2.0), (2.0, 0.3), (1.5, 1.5), (0.3, 0.7)])
def test_fish_smooth_against_p_integral(t, k):
    val = fish_ms(Minkowski(), 1.0, t, 0.0, k).smooth
    ref = fish_smooth_oracle(t, k)
    assert abs(val - ref) <= 1e-3 * abs(ref)


def test_flat_table_has_no_scale_factor_dependence():
    flat = Tabulated(tau_grid=tuple(np.linspace(0, 4, 40)), a_values=(1.0,) * 40)
    for make in (fish_kernel, sunset_kernel, fishlog_kernel):
        a = make(flat, 1.0, 0.8)
        b = make(Minkowski(), 1.0, 0.8)
        assert a.local_coefficients(1.0) == pytest.approx(b.local_coefficients(1.0))
        assert a.smooth(2.0, 0.5) == pytest.approx(b.smooth(2.0, 0.5))


# fish-log


def test_fishlog_local_flat():
    c = fishlog_ms(Minkowski(), 1.0, 0.0, 0.0, 1.0).local[0]
    assert c == pytest.approx(1j * (2 + 2 * np.log(EIGHT_PI2)) / (32 * np.pi**2))


@pytest.mark.parametrize("t, k", [(1.0, 1.0), (0.6, 2.0)])
def test_fishlog_transform_against_convolution(t, k):
    val = _fishlog_transform(t, k, 1.0)
    ref = fishlog_transform_oracle(t, k)
    assert abs(val - ref) <= 1e-6 * abs(ref)


def test_fishlog_smooth_sample():
    t, k = 1.0, 1.0
    val = fishlog_ms(Minkowski(), 1.0, t, 0.0, k).smooth
    ft_inv = EIGHT_PI2**2 * (-1j) * np.exp(-1j * k * t) / (16 * np.pi**2 * t)
    ref = -(fishlog_transform_oracle(t, k) + np.log(EIGHT_PI2) * ft_inv) / EIGHT_PI2**2
    assert abs(val - ref) <= 1e-6 * abs(ref)


# sunset


def test_sunset_local_flat():
    c = sunset_kernel(Minkowski(), 1.0, 0.0).local_coefficients(0.0)
    # -15 i box delta /(48 (8 pi^2)^2) with box -> -(d^2 + k^2) in Fourier space
    assert c[2] == pytest.approx(15j / (48 * EIGHT_PI2**2))
    assert c[0] == pytest.approx(0.0)
    k = 1.7
    c = sunset_kernel(Minkowski(), 1.0, k).local_coefficients(0.0)
    assert c[0] == pytest.approx(15j * k * k / (48 * EIGHT_PI2**2))


def test_sunset_smooth_double_convolution():
    t, k = 1.0, 1.0
    val = sunset_ms(Minkowski(), 1.0, t, 0.0, k).smooth
    coarse = sunset_smooth_oracle(t, k, nodes=100)
    fine = sunset_smooth_oracle(t, k, nodes=200)
    assert abs(fine - coarse) <= 1e-3 * abs(fine)
    # the double convolution is the plain cube; its pointwise part is the
    # (d^2 + k^2) image of -i pi^2 e^{-ik|t|}/|t| times the prefactor
    assert abs(val - fine) <= 1e-3 * abs(fine)


# tails


@pytest.mark.parametrize("t, p0, p1", [(1.0, 5.0, 40.0), (0.3, 10.0, 200.0), (2.0, 1.0, 15.0)])
def test_tail_taming_identity(t, p0, p1):
    from scipy.integrate import quad
    f = lambda p: -1j * t * np.exp(-2j * p * t) / p**2
    direct = (quad(lambda p: f(p).real, p0, p1, limit=2000, epsabs=1e-13)[0]
              + 1j * quad(lambda p: f(p).imag, p0, p1, limit=2000, epsabs=1e-13)[0])
    assert tame_tail(t, p0, p1) == pytest.approx(direct, abs=1e-8)


def test_oscillatory_tail_infinite():
    t, p0 = 0.8, 3.0
    assert oscillatory_tail(t, p0) == pytest.approx(tame_tail(t, p0), abs=1e-10)


# spatial convolution and the full kernels


def test_conv_spatial_exponentials():
    F = lambda p: np.exp(-np.asarray(p))
    for k in (0.0, 0.5, 2.0):
        exact = np.pi * np.exp(-k) * (k * k / 3 + k + 1)
        assert conv_spatial(F, F, k) == pytest.approx(exact, rel=1e-9)


def test_conv_spatial_zero_momentum_and_symmetry():
    F = lambda p: np.exp(-np.asarray(p) ** 2)
    G = lambda p: 1 / (1 + np.asarray(p) ** 2) ** 2
    from scipy.integrate import quad
    direct = 4 * np.pi * quad(lambda p: p * p * F(p) * G(p), 0, np.inf)[0]
    assert conv_spatial(F, G, 0.0) == pytest.approx(direct, rel=1e-10)
    assert conv_spatial(F, G, 1.3) == conv_spatial(G, F, 1.3)


def test_full_fish_conformal_vacuum():
    zero = lambda p: 0j * np.asarray(p)
    bg = DeSitter()
    ref = fish_ms(bg, 1.0, -1.0, -2.0, 0.7).smooth
    assert full_fish(zero, bg, 1.0, -1.0, -2.0, 0.7) == ref


def test_full_fish_quadratic_in_d():
    t, k = 1.0, 1.0
    d = massive_d(1.0, t)
    bg = Minkowski()
    vals = [full_fish(lambda p, s=s: s * d(p), bg, 1.0, t, 0.0, k) for s in (0.0, 1.0, 2.0)]
    square = conv_spatial(d, d, k, phase=2 * t, symmetric=False) / (2 * np.pi) ** 3
    # value(s) = fish0 + 2 s cross + s^2 square
    assert vals[2] - 2 * vals[1] + vals[0] == pytest.approx(2 * square, rel=1e-8)


@pytest.mark.parametrize("t, k, m", [(1.0, 1.0, 1.0), (0.5, 2.0, 0.7)])
def test_full_fish_minkowski_massive(t, k, m):
    val = full_fish(massive_d(m, t), Minkowski(), 1.0, t, 0.0, k)
    ref = fish_ms(Minkowski(), 1.0, t, 0.0, k).smooth
    coarse = ref + massive_fish_difference(t, k, m, nodes=20)
    fine = ref + massive_fish_difference(t, k, m, nodes=40)
    assert abs(fine - coarse) <= 1e-8 * abs(fine)
    assert abs(val - fine) <= 1e-8 * abs(fine)


def test_full_sunset_without_d():
    zero = lambda p: 0j * np.asarray(p)
    ref = sunset_ms(Minkowski(), 1.0, 1.0, 0.0, 1.0).smooth
    assert full_sunset(zero, 0.0, Minkowski(), 1.0, 1.0, 0.0, 1.0, nodes=8) == pytest.approx(ref, abs=1e-18)


def test_full_sunset_vanishing_v_skips_log_term():
    d = massive_d(1.0, 1.0)
    a = full_sunset(d, 0.0, Minkowski(), 1.0, 1.0, 0.0, 1.0, nodes=24, fishlog0=np.nan)
    b = full_sunset(d, 0.0, Minkowski(), 1.0, 1.0, 0.0, 1.0, nodes=24, fishlog0=1e6)
    assert np.isfinite(a) and a == b


@pytest.mark.slow
def test_full_sunset_resolution_and_scale():
    m, t, k = 1.0, 1.0, 1.0
    d = massive_d(m, t)
    run = lambda n, M=1.0: full_sunset(d, m * m / 2, Minkowski(), M, t, 0.0, k, nodes=n)
    coarse, fine = run(24), run(48)
    assert abs(fine - coarse) <= 1e-3 * abs(fine)
    # away from coincidence the renormalisation scale only moves local terms
    assert run(24, M=2.5) == pytest.approx(coarse, rel=1e-9)
