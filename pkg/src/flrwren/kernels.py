"""Renormalised momentum-space kernels on conformally flat backgrounds.

Conventions
-----------
For a two-point kernel ``G(x, y)`` the spatial Fourier transform used
throughout is

    G^(tau1, tau2, k) = a(tau1) a(tau2) int d^3x G(x, y) e^{-i k.(x - y)}

so that the Wightman function of a mode set has ``G^ = chi(tau1) conj(chi(tau2))``
and the conformal vacuum has ``G^ = e^{-ik|t|}/(2k)`` with ``t = tau1 - tau2``.
Products become spatial convolutions,

    (A B)^ = (A^ *3 B^) / ((2 pi)^3 a1 a2).

A :class:`FourierKernel` carries a local part (finitely many derivatives of
``delta(tau1 - tau2)``) and a singular part built from the model
distributions of :mod:`flrwren.tdist`.  Pointwise samples for ``t != 0``
are available from :meth:`FourierKernel.smooth`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import exp1, roots_legendre

from .background import Background
from .errors import AccuracyError, DivergenceError, DomainError
from .tdist import FinitePartAbs

GAMMA = np.euler_gamma
EIGHT_PI2 = 8 * np.pi**2


# --------------------------------------------------------------------------
# flog and the renormalised 1/k^3


def flog(dtau, k, M=1.0):
    """Spatial Fourier transform of ``log(M^2 sigma_F)`` at ``k > 0``.

    ``-sqrt(8 pi) (1/(2k^3) + i|dtau|/(2k^2)) e^{-ik|dtau|}``; the ``1/k^3``
    is pointwise, its distributional content at ``k = 0`` is carried by
    :func:`k3ren_pair`.  With this normalisation

        log(M^2 sigma) = (2 pi)^{-3/2} int d^3k e^{ik.x} flog(dtau, k).

    ``M`` enters only through the ``k = 0`` pairing and is accepted for a
    uniform signature.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise DomainError("flog is pointwise only for k > 0; use k3ren_pair "
                          "for the distributional content at k = 0")
    s = np.abs(dtau)
    return -np.sqrt(8 * np.pi) * (0.5 / k**3 + 0.5j * s / k**2) * np.exp(-1j * k * s)


def k3ren_constant(k0, M):
    """Local constant ``C(k0, M) = log(k0/M) + gamma - 1 + log(2)/2``."""
    return np.log(k0 / M) + GAMMA - 1 + 0.5 * np.log(2.0)


def _quad_complex(f, lo, hi, **kw):
    re = quad(lambda x: np.real(f(x)), lo, hi, full_output=1, **kw)
    im = quad(lambda x: np.imag(f(x)), lo, hi, full_output=1, **kw)
    return re[0] + 1j * im[0], re[1] + im[1]


def _tail_slope(g, k0):
    ks = k0 * np.geomspace(1e2, 1e4, 5)
    vals = np.abs([g(x) for x in ks])
    if np.all(vals < 1e-290):
        # zero or underflowing profile
        return -np.inf
    vals = np.maximum(vals, 1e-300)
    return float(np.polyfit(np.log(ks), np.log(vals), 1)[0])


def k3ren_pair(g, M=1.0, k0=1.0, *, epsabs=1e-11, epsrel=1e-11, limit=500):
    """Pair the radial profile ``g`` with ``(1/k^3)_{ren, M}``.

    Implements

        4 pi int_0^inf [g(k) - g(0) theta(k0 - k)] / k dk + 4 pi g(0) C(k0, M)

    which equals the ``m -> 0`` limit of the mass-regulated pairing and does
    not depend on ``k0``.

    Parameters
    ----------
    g : callable
        Radial test profile, finite at ``k = 0`` and decaying at infinity.
        May be complex valued.
    M : float
        Renormalisation scale.
    k0 : float
        Split point of the subtraction.

    Raises
    ------
    DomainError
        If ``g(0)`` is not finite.
    DivergenceError
        If ``g`` does not decay at large ``k``.
    """
    g0 = complex(g(0.0))
    if not np.isfinite(g0):
        raise DomainError("k3ren_pair needs a profile finite at k = 0")
    slope = _tail_slope(g, k0)
    if slope >= -0.05:
        raise DivergenceError(f"profile does not decay (tail slope {slope:.3f})",
                              slope=slope)
    kw = dict(epsabs=epsabs, epsrel=epsrel, limit=limit)
    inner, _ = _quad_complex(lambda x: (g(x) - g0) / x, 0.0, k0, **kw)
    outer, _ = _quad_complex(lambda x: g(x) / x, k0, np.inf, **kw)
    val = 4 * np.pi * (inner + outer + g0 * k3ren_constant(k0, M))
    return val.real if val.imag == 0 else val


# --------------------------------------------------------------------------
# closed-form p-integral behind the fish kernel


def fish_pre_integral(dtau, k, M=1.0):
    """Closed form of

        I(t, k) = int d^3p [ (1/p^3)_ren/2 + i|t|/(2p^2) ] e^{-ip|t|} e^{-iq|t|}/(2q)

    with ``q = |k - p|``.  Satisfies ``(d_t^2 + k^2) I = i pi e^{-ik|t|}/|t|``
    for ``t != 0``.  At ``t = 0`` returns the finite limit ``(pi/k)(C + 1)``.
    """
    t = np.abs(np.asarray(dtau, dtype=float))
    k = float(k)
    if k <= 0:
        raise DomainError("fish_pre_integral needs k > 0")
    C = k3ren_constant(k, M)
    out = np.full(t.shape, np.pi / k * (C + 1), dtype=complex)
    nz = t > 0
    if np.any(nz):
        tt = t[nz]
        W = 2j * k * tt
        E = np.exp(-1j * k * tt)
        s = np.sin(k * tt)
        E1 = exp1(W)
        Ein = E1 + np.log(W) + GAMMA
        J1 = 1 + np.expm1(-W) / W - Ein
        E2 = np.exp(-W) - W * E1
        out[nz] = (2 * np.pi * ((E / (2 * k)) * (J1 + C) + s * E2 / (2 * k**2 * tt))
                   + (np.pi / (2 * k)) * (E * Ein + 2j * s * E1))
    return out if out.ndim else complex(out)


# --------------------------------------------------------------------------
# kernel containers


@dataclass(frozen=True)
class LocalTerm:
    """``outer(tau1) d^order/dtau1^order delta(tau1 - tau2) inner(tau2)``."""

    order: int
    outer: Callable
    inner: Callable = None

    def inner_values(self, tau):
        if self.inner is None:
            return np.ones_like(np.asarray(tau, dtype=float))
        return self.inner(tau)


@dataclass(frozen=True)
class SingularTerm:
    """``c a(tau1)^-p a(tau2)^-q (d^2 + k^2)^n D(tau1 - tau2)``."""

    constant: complex
    outer_power: int
    inner_power: int
    dist: object
    box_power: int = 0


@dataclass(frozen=True)
class KernelSample:
    """Local coefficients at ``tau1`` (by derivative order) and the smooth
    value at ``(tau1, tau2)`` (``nan`` at coincident times)."""

    local: dict
    smooth: complex


@dataclass(frozen=True)
class FourierKernel:
    """Momentum-space kernel at fixed ``k``; see the module docstring."""

    name: str
    bg: Background
    M: float
    k: float
    local: tuple = ()
    singular: tuple = ()
    regular: Callable = None
    meta: dict = field(default_factory=dict)

    def smooth(self, tau1, tau2):
        """Pointwise value for ``tau1 != tau2`` (``nan`` on the diagonal)."""
        tau1, tau2 = np.broadcast_arrays(np.asarray(tau1, float),
                                         np.asarray(tau2, float))
        t = tau1 - tau2
        out = np.zeros(t.shape, dtype=complex)
        nz = t != 0
        if np.any(nz):
            a1 = self.bg.a(tau1[nz])
            a2 = self.bg.a(tau2[nz])
            for term in self.singular:
                out[nz] += (term.constant * a1 ** (-term.outer_power)
                            * a2 ** (-term.inner_power)
                            * term.dist.pointwise(t[nz], self.k, term.box_power))
            if self.regular is not None:
                out[nz] += self.regular(tau1[nz], tau2[nz])
        out[~nz] = np.nan
        return out if out.ndim else complex(out)

    def local_coefficients(self, tau1):
        """Map derivative order -> coefficient at ``tau1`` (inner weight
        evaluated at ``tau2 = tau1``)."""
        res = {}
        for term in self.local:
            c = term.outer(tau1) * term.inner_values(tau1)
            res[term.order] = res.get(term.order, 0) + c
        return res

    def sample(self, tau1, tau2):
        return KernelSample(self.local_coefficients(tau1),
                            self.smooth(tau1, tau2))


def _log_a(bg):
    return lambda tau: np.log(bg.a(tau))


def fish_kernel(bg: Background, M, k) -> FourierKernel:
    """``(Delta_{F,0}^2)_ms`` in the conformal vacuum.

    Local part ``-i (1 + 2 log a)/(16 pi^2 a^2) delta``; singular part
    ``-i/(16 pi^2 a1 a2) e^{-ik|t|} [1/|t|]_M``.
    """
    if k < 0:
        raise DomainError("momentum must be non-negative")
    loga = _log_a(bg)
    local = (LocalTerm(0, lambda tau: -1j * (1 + 2 * loga(tau))
                       / (16 * np.pi**2 * bg.a(tau) ** 2)),)
    sing = (SingularTerm(-1j / (16 * np.pi**2), 1, 1, FinitePartAbs(k, M)),)
    return FourierKernel("fish", bg, M, k, local, sing)


def sunset_kernel(bg: Background, M, k) -> FourierKernel:
    """``(Delta_{F,0}^3)_ms`` in the conformal vacuum.

    Singular part ``i pi^2/((8 pi^2)^3 a1^2 a2^2) (d^2 + k^2) e^{-ik|t|}[1/|t|]_M``.
    Local part, with ``L = log a`` and coefficients at ``tau1``,

        -i a2 / (48 (8 pi^2)^2 a1^5) [ -(15 + 12 L)(d^2 + k^2) - 6 L'' + 2 a''/a ] delta.
    """
    if k < 0:
        raise DomainError("momentum must be non-negative")
    pref = -1j / (48 * EIGHT_PI2**2)

    def geom(tau):
        a, da, dda = bg.scale(tau)
        L = np.log(a)
        ddL = dda / a - (da / a) ** 2
        return a, L, ddL, dda / a

    def c2(tau):
        a, L, _, _ = geom(tau)
        return pref * (-(15 + 12 * L)) / a**5

    def c0(tau):
        a, L, ddL, ra = geom(tau)
        return pref * (-(15 + 12 * L) * k**2 - 6 * ddL + 2 * ra) / a**5

    inner = lambda tau: bg.a(tau)
    local = (LocalTerm(2, c2, inner), LocalTerm(0, c0, inner))
    sing = (SingularTerm(1j * np.pi**2 / EIGHT_PI2**3, 2, 2,
                         FinitePartAbs(k, M), 1),)
    return FourierKernel("sunset", bg, M, k, local, sing)


def _osc_tail(c, k, n):
    """``int_k^inf e^{-icp} p^{-n} dp`` (Abel summed for ``n = 0``)."""
    z = 1j * c * k
    if n == 0:
        return np.exp(-z) / (1j * c)
    if n == 1:
        return exp1(z)
    return _expn_complex(n, z) / k ** (n - 1)


def _expn_complex(n, z):
    # E_n(z) = (e^{-z} - z E_{n-1}(z)) / (n - 1)
    e = exp1(z)
    for m in range(2, n + 1):
        e = (np.exp(-z) - z * e) / (m - 1)
    return e


def _fishlog_transform(t, k, M, nodes=200):
    """``int d^3x e^{-ik.x} log(M^2 sigma)/sigma^2`` at fixed ``t != 0``."""
    t = abs(float(t))

    def angular(p):
        # (1/(2kp)) int_{|k-p|}^{k+p} q e^{-iqt} dq
        F = lambda q: np.exp(-1j * q * t) * (1 + 1j * q * t) / t**2
        return (F(k + p) - F(np.abs(k - p))) / (2 * k * p)

    x, w = roots_legendre(nodes)
    p = 0.5 * k * (x + 1)
    w = 0.5 * k * w
    h = np.exp(-1j * p * t) * angular(p)
    h0 = np.exp(0j) * np.exp(-1j * k * t)  # limit of angular(p) at p = 0
    # p > k: e^{-ipt} A(p) = e^{-2ipt}[c2/p + c1]
    c2 = (np.exp(-1j * k * t) * (1 + 1j * k * t)
          - np.exp(1j * k * t) * (1 - 1j * k * t)) / (2 * k * t**2)
    c1 = np.sin(k * t) / (k * t)
    ren = 4 * np.pi * (np.sum(w * (h - h0) / p)
                       + c2 * _osc_tail(2 * t, k, 2) + c1 * _osc_tail(2 * t, k, 1)
                       + h0 * k3ren_constant(k, M))
    lin = 4 * np.pi * 1j * t * (np.sum(w * h)
                                + c2 * _osc_tail(2 * t, k, 1)
                                + c1 * _osc_tail(2 * t, k, 0))
    return (2j * np.pi / t) * (ren + lin)


def fishlog_kernel(bg: Background, M, k) -> FourierKernel:
    """``(Delta_{F,0}^2 log(M^-2 Delta_{F,0}))_ms`` in the conformal vacuum.

    Local part ``i (2 + 2 log(8 pi^2 a^2) + log(a^2)^2) / (32 pi^2 a^2) delta``;
    the pointwise part for ``t != 0`` is

        -(1/((8 pi^2)^2 a1 a2)) FT[(log(M^2 sigma) + log(8 pi^2 a1 a2)) / sigma^2].
    """
    if k < 0:
        raise DomainError("momentum must be non-negative")
    kk = max(k, 1e-9)

    def c0(tau):
        a = bg.a(tau)
        la2 = np.log(a**2)
        return 1j * (2 + 2 * np.log(EIGHT_PI2 * a**2) + la2**2) / (32 * np.pi**2 * a**2)

    def regular(tau1, tau2):
        tau1 = np.atleast_1d(tau1)
        tau2 = np.atleast_1d(tau2)
        a1, a2 = bg.a(tau1), bg.a(tau2)
        out = np.empty(tau1.shape, complex)
        for i, (x1, x2) in enumerate(zip(tau1, tau2)):
            t = x1 - x2
            ft_log = _fishlog_transform(t, kk, M)
            ft_inv = EIGHT_PI2**2 * (-1j) * np.exp(-1j * k * abs(t)) / (16 * np.pi**2 * abs(t))
            L = np.log(EIGHT_PI2 * a1[i] * a2[i])
            out[i] = -(ft_log + L * ft_inv) / (EIGHT_PI2**2 * a1[i] * a2[i])
        return out

    return FourierKernel("fishlog", bg, M, k, (LocalTerm(0, c0),), (), regular)


def _sample(kernel, tau1, tau2):
    return kernel.sample(tau1, tau2)


def fish_ms(bg, M, tau1, tau2, k) -> KernelSample:
    """Sample of the minimally subtracted fish kernel at ``(tau1, tau2, k)``."""
    return _sample(fish_kernel(bg, M, k), tau1, tau2)


def sunset_ms(bg, M, tau1, tau2, k) -> KernelSample:
    """Sample of the minimally subtracted sunset kernel."""
    return _sample(sunset_kernel(bg, M, k), tau1, tau2)


def fishlog_ms(bg, M, tau1, tau2, k) -> KernelSample:
    """Sample of the minimally subtracted fish-log kernel."""
    return _sample(fishlog_kernel(bg, M, k), tau1, tau2)


# --------------------------------------------------------------------------
# tail taming


def tame_tail(dtau, p0, p1=np.inf, power=2, order=2):
    """``int_{p0}^{p1} -i|t| e^{-2ip|t|} p^-power dp`` by partial integration.

    Each step uses ``e^{-2ip|t|} p^-n = d/dp(i e^{-2ip|t|} p^-n / (2|t|))
    + (i n/(2|t|)) e^{-2ip|t|} p^-(n+1)``; for ``power = 2`` the first step
    is the rewriting ``-i|t| e^{-2ip|t|}/p^2 = d/dp(e^{-2ip|t|}/(2p^2))
    + e^{-2ip|t|}/p^3``.  After ``order`` steps the remaining absolutely
    convergent integral is done in closed form (infinite ``p1``) or by
    adaptive quadrature.
    """
    t = abs(float(dtau))
    if t == 0 or p0 <= 0 or not p1 > p0:
        raise DomainError("tail taming needs |dtau| > 0 and 0 < p0 < p1")
    c = 2 * t
    bnd = lambda p, n: 0j if np.isinf(p) else 1j * np.exp(-1j * c * p) * p ** (-n) / c
    factor = -1j * t
    n = power
    total = 0j
    for _ in range(order):
        total += factor * (bnd(p1, n) - bnd(p0, n))
        factor *= 1j * n / c
        n += 1
    if np.isinf(p1):
        rest = _expn_complex(n, 1j * c * p0) / p0 ** (n - 1)
    else:
        rest = _quad_complex(lambda p: np.exp(-1j * c * p) * p ** (-n), p0, p1,
                             limit=2000, epsabs=1e-14, epsrel=1e-12)[0]
    return total + factor * rest


def oscillatory_tail(dtau, p0, power=2):
    """Closed form of ``int_{p0}^inf -i|t| e^{-2ip|t|} p^-power dp``."""
    t = abs(float(dtau))
    return -1j * t * _expn_complex(power, 2j * t * p0) / p0 ** (power - 1)


# --------------------------------------------------------------------------
# spatial convolution of radial profiles

_GL_X, _GL_W = roots_legendre(24)


def _window_integral(G, lo, hi, freq):
    """``int_lo^hi q G(q) dq`` by composite Gauss-Legendre.

    The window has width at most ``2k``; panels are sized so that a profile
    oscillating like ``e^{-i freq q}`` is resolved.
    """
    if hi <= lo:
        return 0j
    n = max(1, int(np.ceil((hi - lo) * (1 + freq) / 2)))
    e = np.linspace(lo, hi, n + 1)
    a, b = e[:-1, None], e[1:, None]
    q = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    return complex(np.sum(0.5 * (b - a) * _GL_W * q * G(q)))


def _fourier_tail(h, p0, omega, epsabs, limlst=200):
    """``int_p0^inf h(p) e^{-i omega p} dp`` for slowly varying decaying ``h``."""
    hr = lambda p: np.real(h(p))
    hi = lambda p: np.imag(h(p))
    out = 0j
    err = 0.0
    for f, unit in ((hr, 1.0), (hi, 1j)):
        # the per-cycle warnings are superseded by the returned error estimate
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            c, ec = quad(f, p0, np.inf, weight="cos", wvar=omega, limlst=limlst,
                         epsabs=epsabs)
            sn, es = quad(f, p0, np.inf, weight="sin", wvar=omega, limlst=limlst,
                          epsabs=epsabs)
        out += unit * (c - 1j * sn)
        err += ec + es
    return out, err


def conv_spatial(F, G, k, *, phase=0.0, split=None, ir=None, symmetric=True,
                 epsabs=1e-10, epsrel=1e-10, limit=400):
    """``int d^3p F(|p|) G(|k - p|)`` for radial profiles ``F`` and ``G``.

    The angular integral is done first,

        4 pi int_0^inf dp p^2 F(p) gbar(p),
        gbar(p) = (1/(2kp)) int_{|k-p|}^{k+p} dq q G(q),

    with ``gbar(p) = G(p)`` at ``k = 0``.

    Parameters
    ----------
    F, G : callable
        Radial profiles.  ``G`` must accept arrays.
    k : float
        External momentum, ``k >= 0``.
    phase : float
        Frequency ``omega`` such that ``p^2 F(p) gbar(p) e^{i omega p}`` is
        slowly varying at large ``p``.  For products of hats at time
        separation ``t`` this is ``2|t|``.  With ``phase > 0`` the range
        beyond ``split`` is integrated as a Fourier integral, which turns the
        conditionally convergent tails of light-cone singular products into
        well-defined values.  ``phase = 0`` uses plain adaptive quadrature.
    split : float, optional
        Start of the Fourier tail; defaults to ``max(10, 2k, 10/omega)``.
    ir : tuple, optional
        ``(c, M)`` when ``F`` has a ``c/p^3`` singularity at ``p = 0``, read
        as the renormalised distribution of :func:`k3ren_pair` at scale ``M``.
    symmetric : bool
        Average the two orderings of ``F`` and ``G`` so that swapping the
        arguments gives an identical value.  Ignored when ``ir`` is given.

    Raises
    ------
    AccuracyError
        If a quadrature misses the tolerance by three orders of magnitude.
    """
    if k < 0:
        raise DomainError("momentum must be non-negative")
    kw = dict(phase=phase, split=split, epsabs=epsabs, epsrel=epsrel, limit=limit)
    if ir is not None or not symmetric or F is G:
        val, err = _conv_one(F, G, k, ir, **kw)
    else:
        v1, e1 = _conv_one(F, G, k, None, **kw)
        v2, e2 = _conv_one(G, F, k, None, **kw)
        val, err = 0.5 * (v1 + v2), 0.5 * (e1 + e2)
    if err > max(1e3 * epsabs, 1e3 * epsrel * abs(val)):
        raise AccuracyError("spatial convolution did not converge", achieved=err)
    return complex(val)


def _conv_one(F, G, k, ir, *, phase, split, epsabs, epsrel, limit):
    freq = 0.5 * phase

    if k == 0:
        gbar = lambda p: complex(G(np.asarray(p)))
    else:
        def gbar(p):
            return _window_integral(G, abs(k - p), k + p, freq) / (2 * k * p)

    c_ir, m_ir = (0.0, 1.0) if ir is None else ir
    k0 = 1.0

    def body(p):
        if p == 0:
            return 0j
        v = p**2 * F(p) * gbar(p)
        if c_ir and p < k0:
            v -= c_ir * complex(G(np.asarray(k))) / p
        return v

    kw = dict(epsabs=epsabs, epsrel=epsrel, limit=limit)
    if phase > 0:
        p_split = split if split is not None else max(10.0, 2 * k, 10.0 / phase)
        val, err = _quad_complex(body, 0.0, p_split, points=[k0] if c_ir else None, **kw)
        err = abs(err)
        tail, terr = _fourier_tail(lambda p: body(p) * np.exp(1j * phase * p),
                                   p_split, phase, epsabs)
        val += tail
        err += terr
    else:
        val, err = _quad_complex(body, 0.0, np.inf, **kw)
        err = abs(err)
    if c_ir:
        val += c_ir * complex(G(np.asarray(k))) * k3ren_constant(k0, m_ir)
    return 4 * np.pi * val, 4 * np.pi * err


@dataclass
class RadialTable:
    """Tabulated radial profile ``f(q) = e^{-i phase q} s(q)``.

    ``s`` is a cubic spline on the nodes; beyond the last node it continues
    as a power law fitted to the last two nodes.
    """

    q: np.ndarray
    values: np.ndarray
    phase: float = 0.0

    def __post_init__(self):
        from scipy.interpolate import CubicSpline
        self.q = np.asarray(self.q, float)
        stripped = np.asarray(self.values, complex) * np.exp(1j * self.phase * self.q)
        self._spline = CubicSpline(self.q, stripped)
        s1, s2 = stripped[-2], stripped[-1]
        ratio = abs(s2) / abs(s1) if abs(s1) > 0 else 0.0
        self._power = (-np.log(ratio) / np.log(self.q[-1] / self.q[-2])
                       if ratio > 0 else 0.0)
        self._last = s2

    def __call__(self, q):
        q = np.asarray(q, float)
        inside = q <= self.q[-1]
        s = np.where(inside, self._spline(np.minimum(q, self.q[-1])),
                     self._last * (self.q[-1] / np.maximum(q, self.q[-1])) ** self._power)
        return s * np.exp(-1j * self.phase * q)


def radial_nodes(nodes, q_max=40.0, q_mid=2.0):
    """``nodes`` points on ``[0, q_max]``, uniform below ``q_mid`` and
    geometric above."""
    n1 = nodes // 2
    lin = np.linspace(0.0, q_mid, n1, endpoint=False)
    geo = np.geomspace(q_mid, q_max, nodes - n1)
    return np.concatenate([lin, geo])


def conformal_profile(dtau):
    """``Delta_{F,0}^`` at fixed time separation as a radial profile."""
    s = abs(float(dtau))
    return lambda p: np.exp(-1j * np.asarray(p) * s) / (2 * np.asarray(p))


def _fish_profile(bg, tau1, tau2):
    # pointwise part of fish_kernel at t != 0, vectorised in the momentum
    s = abs(tau1 - tau2)
    pref = -1j / (16 * np.pi**2 * bg.a(tau1) * bg.a(tau2) * s)
    return lambda p: pref * np.exp(-1j * np.asarray(p) * s)


def full_fish(d, bg: Background, M, tau1, tau2, k, *, fish0=None, epsabs=1e-10,
              epsrel=1e-9):
    """``(Delta_F^2)_ms^`` for a Hadamard state at ``tau1 != tau2``.

    ``Delta_F = Delta_{F,0} + d``; the products involving ``d`` need no
    subtraction and are computed by spatial convolution:

        (Delta_F^2)_ms = (Delta_{F,0}^2)_ms + 2 (Delta_{F,0} d)^ + (d^2)^.

    Parameters
    ----------
    d : callable
        Radial profile ``p -> d^(tau1, tau2, p)`` (array aware), with at most
        a ``1/p`` singularity at ``p = 0``.
    fish0 : complex, optional
        Precomputed pointwise ``(Delta_{F,0}^2)_ms`` sample.
    """
    t = tau1 - tau2
    if t == 0:
        raise DomainError("full_fish is pointwise only for tau1 != tau2")
    if fish0 is None:
        fish0 = fish_ms(bg, M, tau1, tau2, k).smooth
    norm = (2 * np.pi) ** 3 * bg.a(tau1) * bg.a(tau2)
    f0 = conformal_profile(t)
    kw = dict(phase=2 * abs(t), epsabs=epsabs, epsrel=epsrel, symmetric=False)
    cross = conv_spatial(f0, d, k, **kw)
    square = conv_spatial(d, d, k, **kw)
    return complex(fish0 + (2 * cross + square) / norm)


def d1_profile(v, bg: Background, M, tau1, tau2):
    """``d1^ = [v] a1 a2 (2 pi)^{3/2} flog / (8 pi^2)`` as a radial profile."""
    pref = v * bg.a(tau1) * bg.a(tau2) * (2 * np.pi) ** 1.5 / EIGHT_PI2
    return lambda p: pref * flog(tau1 - tau2, p, M)


def full_sunset(d, v, bg: Background, M, tau1, tau2, k, *, nodes=48,
                q_max=40.0, sunset0=None, fishlog0=None, epsabs=1e-10, epsrel=1e-9):
    """``(Delta_F^3)_ms^`` for a Hadamard state at ``tau1 != tau2``.

    Uses

        (Delta_F^3)_ms = (Delta_{F,0}^3)_ms + 3 (Delta_{F,0}^2 d)_ms
                         + 3 (Delta_{F,0} d^2)^ + (d^3)^,
        (Delta_{F,0}^2 d)_ms = -([v]/8 pi^2) (Delta_{F,0}^2 log(M^-2 Delta_{F,0}))_ms
                               + (d2 (Delta_{F,0}^2)_ms)^,

    with ``d2 = d - d1`` and ``d1`` the ``[v] log`` part of ``d``.  The
    products of three hats need the inner convolution ``d *3 d`` at all
    momenta; it is tabulated on ``nodes`` points up to ``q_max`` (see
    :class:`RadialTable`), which sets the resolution of the result.

    Parameters
    ----------
    d : callable
        Radial profile of ``d^`` at ``(tau1, tau2)``.
    v : float
        ``[v]`` at the sample (the symmetric mean of the two times).
    """
    t = tau1 - tau2
    if t == 0:
        raise DomainError("full_sunset is pointwise only for tau1 != tau2")
    s = abs(t)
    a1, a2 = bg.a(tau1), bg.a(tau2)
    norm = (2 * np.pi) ** 3 * a1 * a2
    if sunset0 is None:
        sunset0 = sunset_ms(bg, M, tau1, tau2, k).smooth
    kw = dict(phase=2 * s, epsabs=epsabs, epsrel=epsrel, symmetric=False)

    # (Delta_{F,0}^2 d)_ms
    fish_p = _fish_profile(bg, tau1, tau2)
    if v == 0:
        mixed = conv_spatial(d, fish_p, k, **kw) / norm
    else:
        if fishlog0 is None:
            fishlog0 = fishlog_ms(bg, M, tau1, tau2, k).smooth
        d1 = d1_profile(v, bg, M, tau1, tau2)
        d2 = lambda p: d(p) - d1(p)
        # flog ~ -sqrt(8 pi)/(2 p^3), so d2 ~ +[v] a1 a2 / (2 p^3) at small p
        ir = (v * a1 * a2 / 2, M)
        mixed = -v / EIGHT_PI2 * fishlog0 + conv_spatial(d2, fish_p, k, ir=ir, **kw) / norm

    # inner d *3 d, tabulated
    q = radial_nodes(nodes, q_max)
    dd = np.array([conv_spatial(d, d, qi, **kw) for qi in q])
    table = RadialTable(q, dd, phase=s)
    f0 = conformal_profile(t)
    cubic_f0 = conv_spatial(f0, table, k, **kw) / norm**2
    cubic_d = conv_spatial(d, table, k, **kw) / norm**2
    return complex(sunset0 + 3 * mixed + 3 * cubic_f0 + cubic_d)


__all__ = [
    "flog", "k3ren_pair", "k3ren_constant", "fish_pre_integral",
    "LocalTerm", "SingularTerm", "KernelSample", "FourierKernel",
    "fish_kernel", "sunset_kernel", "fishlog_kernel",
    "fish_ms", "sunset_ms", "fishlog_ms", "tame_tail", "oscillatory_tail",
    "conv_spatial", "RadialTable", "radial_nodes", "conformal_profile",
    "full_fish", "full_sunset", "d1_profile",
]
