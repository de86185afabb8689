"""Momentum-space propagators, coincidence limits and the conformal split.

All propagators use the hat convention of :mod:`flrwren.kernels`; for a
mode set ``chi_k`` the Wightman function is ``Plus = chi(tau1) conj(chi(tau2))``
and

    Minus    = conj(Plus)
    Retarded = -i theta(tau1 - tau2) (Plus - Minus)
    Advanced =  i theta(tau2 - tau1) (Plus - Minus)
    Feynman  = theta(t) Plus + theta(-t) Minus

so that ``Feynman = Plus + i Advanced = Minus + i Retarded`` and
``Plus - Minus = i (Retarded - Advanced)``.  The step function is one half
at coincident times.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .background import Background
from .errors import DivergenceError, DomainError
from .kernels import flog
from .modes import FieldParams, ModeSet, _grid_index

GAMMA = np.euler_gamma


class Variant(enum.Enum):
    Plus = "plus"
    Minus = "minus"
    Feynman = "feynman"
    Retarded = "retarded"
    Advanced = "advanced"
    ConformalFeynman = "conformal_feynman"


def _step(t):
    return np.where(t > 0, 1.0, np.where(t < 0, 0.0, 0.5))


def _combine(variant, plus, t):
    minus = np.conj(plus)
    if variant is Variant.Plus:
        return plus
    if variant is Variant.Minus:
        return minus
    if variant is Variant.Retarded:
        return -1j * _step(t) * (plus - minus)
    if variant is Variant.Advanced:
        return 1j * _step(-t) * (plus - minus)
    if variant is Variant.Feynman:
        return _step(t) * plus + _step(-t) * minus
    raise DomainError(f"unknown propagator variant {variant}")


def conformal_feynman(tau1, tau2, k):
    """``e^{-ik|t|}/(2k)``."""
    return np.exp(-1j * k * np.abs(np.asarray(tau1) - tau2)) / (2 * k)


def fourier_propagator(variant, modes: ModeSet, tau1, tau2, k):
    """Evaluate a momentum-space propagator at grid times.

    Parameters
    ----------
    variant : Variant or str
    modes : ModeSet
    tau1, tau2 : float or array
        Times on the mode grid.
    k : float
        A momentum of the solved set.

    Raises
    ------
    LookupError
        If ``k`` was not solved or a time is not on the grid.
    """
    variant = Variant(variant) if not isinstance(variant, Variant) else variant
    mode = modes.mode(k)
    i1 = _grid_index(modes.tau, tau1)
    i2 = _grid_index(modes.tau, tau2)
    t = np.asarray(tau1, dtype=float) - np.asarray(tau2, dtype=float)
    if variant is Variant.ConformalFeynman:
        return conformal_feynman(tau1, tau2, mode.k)
    plus = mode.chi[i1] * np.conj(mode.chi[i2])
    return _combine(variant, plus, t)


def propagator_matrix(variant, modes: ModeSet, k_index: int):
    """Full ``(tau1, tau2)`` matrix of a propagator for one solved momentum."""
    variant = Variant(variant) if not isinstance(variant, Variant) else variant
    tau = modes.tau
    t = tau[:, None] - tau[None, :]
    k = modes.k[k_index]
    if variant is Variant.ConformalFeynman:
        return np.exp(-1j * k * np.abs(t)) / (2 * k)
    chi = modes.chi[k_index]
    return _combine(variant, chi[:, None] * np.conj(chi)[None, :], t)


# --------------------------------------------------------------------------
# coincidence limits


@dataclass(frozen=True)
class CoincidenceData:
    """``[v]``, ``[w]`` and ``mu = 3 lam [w]`` on a set of times."""

    tau: np.ndarray
    v: np.ndarray
    w: np.ndarray
    mu: np.ndarray

    def to_csv_rows(self):
        return [(float(t), float(v), float(w), float(m))
                for t, v, w, m in zip(self.tau, self.v, self.w, self.mu)]


def coincidence_v(bg: Background, fp: FieldParams, tau):
    """``[v] = (m^2 + (xi - 1/6) R) / 2``."""
    return fp.coincidence_v(bg, tau)


def _tail(k, g, n_fit=6, noise=1e-10):
    """Power-law fit ``g ~ A k^-p`` to the last samples of ``g``.

    A sign-changing tail below ``noise * k`` (the relative size of the
    round-off in the subtracted terms) is treated as zero.
    """
    kk, gg = k[-n_fit:], g[-n_fit:]
    if np.all(gg == 0):
        return 0.0, np.inf
    if np.any(gg == 0) or np.any(np.sign(gg) != np.sign(gg[-1])):
        if np.all(np.abs(gg) <= noise * kk):
            return 0.0, np.inf
        return np.nan, 0.0
    p = -np.polyfit(np.log(kk), np.log(np.abs(gg)), 1)[0]
    return gg[-1] * kk[-1] ** p, p


def coincidence_w(bg: Background, fp: FieldParams, modes: ModeSet, tau,
                  subtraction="F", min_tail_power=1.0):
    """Coincidence limit ``[w](tau)`` of the regular Hadamard part.

    ``[w] = 1/(2 pi^2 a^2) int_0^inf k^2 (|chi_k|^2 - F(k)) dk
            + (m_eff^2/(16 pi^2)) (2 gamma - 1 + log(m_eff^2 / (2 M^2)))
            - R / (288 pi^2)``

    with ``F = 1/(2 sqrt(k^2 + a^2 m_eff^2))`` and ``m_eff^2 = m^2 + (xi - 1/6) R``.
    ``subtraction="F'"`` uses instead ``F' = 1/(2k) - theta(k - b) a^2 m_eff^2 /(4k^3)``
    with ``b = a m`` (``b = a M`` for ``m = 0``) and the correspondingly
    shifted local term, which leaves ``[w]`` unchanged.

    The momentum integral runs over the solved grid (cubic spline in
    ``log k``) and is completed by power-law fits at both ends.

    Raises
    ------
    DomainError
        For ``subtraction="F"`` with ``m_eff^2 < 0``.
    DivergenceError
        If the subtracted integrand decays no faster than ``k^-min_tail_power``.
    """
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    idx = _grid_index(modes.tau, tau_arr)
    out = np.empty(tau_arr.shape)
    k = modes.k
    lk = np.log(k)
    for j, (t, i) in enumerate(zip(tau_arr, idx)):
        pt = bg.evaluate(t)
        a, R = float(pt.a), float(pt.ricci)
        meff2 = fp.m**2 + (fp.xi - 1.0 / 6.0) * R
        c2 = a**2 * meff2
        al, be = modes.alpha[:, i], modes.beta[:, i]
        excess = (np.abs(be) ** 2
                  + (al * np.conj(be) * np.exp(-2j * k * t)).real) / k
        if subtraction == "F":
            if meff2 < 0:
                raise DomainError("subtraction F needs m_eff^2 >= 0; use F'")
            # 1/(2k) - F without cancellation
            root = np.sqrt(k**2 + c2)
            diff = c2 / (2 * k * root * (k + root))
            integrand = k**2 * (excess + diff)
            # below the grid only the state-dependent part is extrapolated;
            # int_0^k0 k^2 (1/(2k) - F) dk is done in closed form
            k0 = k[0]
            r0 = np.sqrt(k0**2 + c2)
            analytic = 0.0
            if c2 > 0:
                analytic = 0.5 * (0.5 * k0**2 - 0.5 * (k0 * r0 - c2 * np.arcsinh(k0 / np.sqrt(c2))))
            small = k**2 * excess
            local = 0.0
            if meff2 > 0:
                local = meff2 / (16 * np.pi**2) * (2 * GAMMA - 1
                                                   + np.log(meff2 / (2 * fp.M**2)))
            local -= R / (288 * np.pi**2)
        elif subtraction in ("F'", "Fprime", "F_prime"):
            b = a * fp.m if fp.m > 0 else a * fp.M
            # theta(k - b) c2/(4k^3) is added on the whole grid and the part
            # below b is taken out analytically
            integrand = k**2 * excess + c2 / (4 * k)
            k0 = k[0]
            analytic = -0.25 * c2 * np.log(max(b, k0) / k0)
            if b < k0:
                analytic += 0.25 * c2 * np.log(k0 / b)
            local = (meff2 / (16 * np.pi**2) * (2 * GAMMA - 2
                                                + np.log(2 * b**2 / (a**2 * fp.M**2)))
                     - R / (288 * np.pi**2))
            small = k**2 * excess
        else:
            raise DomainError(f"unknown subtraction {subtraction!r}")
        val = _radial_integral(k, lk, integrand, min_tail_power, small)
        out[j] = (val + analytic) / (2 * np.pi**2 * a**2) + local
    return out if np.ndim(tau) else float(out[0])


def _radial_integral(k, lk, integrand, min_tail_power, small=None):
    """``int_0^inf integrand dk`` from grid samples with fitted end pieces.

    ``small`` (default ``integrand``) is the integrand continued below the
    first grid point, extrapolated as a power law.
    """
    total = CubicSpline(lk, k * integrand).integrate(lk[0], lk[-1])
    A, p = _tail(k, integrand)
    if not np.isfinite(A) or p <= min_tail_power:
        raise DivergenceError(
            f"subtracted integrand tail ~ k^-{p:.3f} is not integrable",
            slope=float(-p))
    if np.isfinite(p) and A != 0:
        total += A * k[-1] ** (1 - p) / (p - 1)
    small = integrand if small is None else small
    if small[0] != 0:
        q = np.polyfit(lk[:3], np.log(np.abs(small[:3]) + 1e-300), 1)[0]
        q = max(q, -0.9)
        total += k[0] * small[0] / (q + 1)
    return total


def effective_mass(fp: FieldParams, w):
    """``mu = 3 lam [w]``."""
    return 3.0 * fp.lam * np.asarray(w, dtype=float)


def coincidence_data(bg, fp, modes, tau=None, **kw) -> CoincidenceData:
    tau = modes.tau if tau is None else np.asarray(tau, dtype=float)
    w = np.atleast_1d(coincidence_w(bg, fp, modes, tau, **kw))
    v = np.atleast_1d(coincidence_v(bg, fp, tau))
    return CoincidenceData(np.atleast_1d(tau), v, w, effective_mass(fp, w))


# --------------------------------------------------------------------------
# split relative to the conformal vacuum


@dataclass(frozen=True)
class PropagatorSplit:
    """``Delta_F = Delta_{F,0} + d`` with ``d = d1 + d2`` at one sample."""

    tau1: float
    tau2: float
    k: float
    feynman: complex
    conformal: complex
    d: complex
    d1: complex
    d2: complex
    v_mean: float


def split_from_feynman(bg, fp, feynman, tau1, tau2, k):
    """Split a given Feynman sample; ``d1`` uses the symmetric mean of ``[v]``."""
    if not k > 0:
        raise DomainError("split_propagator needs k > 0")
    f0 = complex(conformal_feynman(tau1, tau2, k))
    d = complex(feynman) - f0
    v = 0.5 * (coincidence_v(bg, fp, tau1) + coincidence_v(bg, fp, tau2))
    if v == 0:
        d1 = 0j
    else:
        a1, a2 = bg.a(tau1), bg.a(tau2)
        d1 = complex(v * a1 * a2 * (2 * np.pi) ** 1.5 / (8 * np.pi**2)
                     * flog(tau1 - tau2, k, fp.M))
    return PropagatorSplit(float(tau1), float(tau2), float(k), complex(feynman),
                           f0, d, d1, d - d1, float(v))


def split_propagator(modes: ModeSet, fp: FieldParams, tau1, tau2, k) -> PropagatorSplit:
    """Split ``Delta_F^`` into the conformal-vacuum part and ``d = d1 + d2``.

    ``d1`` is the transform of ``-[v] log(M^-2 Delta_{F,0}) / (8 pi^2)``,
    which at ``k > 0`` equals ``[v] a1 a2 (2 pi)^{3/2} flog / (8 pi^2)``.
    """
    feyn = fourier_propagator(Variant.Feynman, modes, tau1, tau2, k)
    return split_from_feynman(modes.bg, fp, feyn, tau1, tau2, k)
