"""Temporal mode functions of a free scalar on a flat FLRW background.

For each comoving momentum ``k`` the mode obeys

    chi'' + (k**2 + V(tau)) chi = 0,    V = a**2 (m**2 + (xi - 1/6) R)

and is normalised by ``chi conj(chi') - conj(chi) chi' = i``.

The integrator works in the interaction picture relative to the massless
conformal solution:

    chi  = (alpha e^{-ik tau} + beta e^{ik tau}) / sqrt(2k)
    chi' = -ik (alpha e^{-ik tau} - beta e^{ik tau}) / sqrt(2k)

so ``alpha`` and ``beta`` vary slowly whenever ``V << k**2`` and the
Wronskian reduces to ``i (|alpha|**2 - |beta|**2)``.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .background import Background, Minkowski
from .errors import DomainError, SolverError

CONFORMAL_XI = 1.0 / 6.0


@dataclass(frozen=True)
class FieldParams:
    """Mass ``m``, curvature coupling ``xi``, quartic coupling ``lam`` and
    renormalisation scale ``M``."""

    m: float = 0.0
    xi: float = CONFORMAL_XI
    lam: float = 0.0
    M: float = 1.0

    def __post_init__(self):
        if self.m < 0:
            raise DomainError("mass must be non-negative")
        if self.M <= 0:
            raise DomainError("renormalisation scale M must be positive")

    @property
    def is_conformal_massless(self):
        return self.m == 0 and self.xi == CONFORMAL_XI

    def mass_eff_sq(self, bg: Background, tau):
        """``m**2 + (xi - 1/6) R`` (physical units)."""
        return self.m**2 + (self.xi - CONFORMAL_XI) * bg.ricci(tau)

    def potential(self, bg: Background, tau):
        """Conformal-frame potential ``V = a**2 (m**2 + (xi - 1/6) R)``."""
        a = bg.a(tau)
        return a**2 * self.mass_eff_sq(bg, tau)

    def coincidence_v(self, bg: Background, tau):
        """Coincidence limit of the logarithmic Hadamard coefficient."""
        return 0.5 * self.mass_eff_sq(bg, tau)


# --------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class ConformalVacuum:
    """Modes equal to ``e^{-ik tau}/sqrt(2k)`` at the start of the grid.

    Exact for all times only for ``m = 0, xi = 1/6``.
    """

    kind = "conformal_vacuum"

    def describe(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class PositiveFrequency:
    """Adiabatic positive-frequency data at ``tau0`` (order 0 or 2)."""

    tau0: float
    order: int = 0

    kind = "positive_frequency"

    def __post_init__(self):
        if self.order not in (0, 2):
            raise DomainError("adiabatic order must be 0 or 2")

    def describe(self):
        return {"kind": self.kind, "tau0": self.tau0, "order": self.order}


@dataclass(frozen=True)
class ExplicitModes:
    """User-supplied initial data.

    Parameters
    ----------
    data : callable or mapping
        ``k -> (tau0, chi0, dchi0)``.  A mapping is looked up by exact
        momentum value.
    """

    data: Callable | Mapping
    label: str = "explicit"

    kind = "explicit"

    def initial(self, k):
        if callable(self.data):
            return self.data(k)
        try:
            return self.data[k]
        except KeyError:
            raise DomainError(f"no explicit mode data for k={k}") from None

    def describe(self):
        return {"kind": self.kind, "label": self.label}


# --------------------------------------------------------------------------
# mode functions


@dataclass
class ModeFunction:
    """One mode on a conformal-time grid."""

    k: float
    tau: np.ndarray
    chi: np.ndarray
    dchi: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def excess_power(self):
        """``|chi|**2 - 1/(2k)`` computed without cancellation."""
        ph = np.exp(-2j * self.k * self.tau)
        cross = (self.alpha * np.conj(self.beta) * ph).real
        return (np.abs(self.beta) ** 2 + cross) / self.k


def wronskian(mode: ModeFunction, tau=None):
    """``chi conj(chi') - conj(chi) chi'``; equals ``i`` for a valid mode."""
    if tau is None:
        chi, dchi = mode.chi, mode.dchi
    else:
        idx = _grid_index(mode.tau, tau)
        chi, dchi = mode.chi[idx], mode.dchi[idx]
    return chi * np.conj(dchi) - np.conj(chi) * dchi


def _grid_index(grid, tau):
    tau = np.asarray(tau, dtype=float)
    idx = np.searchsorted(grid, tau)
    idx = np.clip(idx, 0, len(grid) - 1)
    lower = np.clip(idx - 1, 0, len(grid) - 1)
    idx = np.where(np.abs(grid[lower] - tau) < np.abs(grid[idx] - tau),
                   lower, idx)
    if np.any(np.abs(grid[idx] - tau) > 1e-12 * (1 + np.abs(tau))):
        raise LookupError("requested time is not on the mode grid")
    return idx


def _from_chi(k, tau, chi, dchi):
    """Interaction-picture coefficients of given ``(chi, chi')``."""
    s = np.sqrt(2 * k) / 2
    alpha = s * (chi + 1j * dchi / k) * np.exp(1j * k * tau)
    beta = s * (chi - 1j * dchi / k) * np.exp(-1j * k * tau)
    return alpha, beta


def _to_chi(k, tau, alpha, beta):
    em = np.exp(-1j * k * tau)
    ep = np.conj(em)
    n = np.sqrt(2 * k)
    return (alpha * em + beta * ep) / n, -1j * k * (alpha * em - beta * ep) / n


def _local_derivatives(f, tau0, h, order):
    """Derivatives of ``f`` at ``tau0`` from a 9-point polynomial fit."""
    x = np.arange(-4, 5) * h
    coef = np.polynomial.polynomial.polyfit(x / h, f(tau0 + x), 8)
    return [coef[n] * np.prod(np.arange(1, n + 1)) / h**n
            for n in range(order + 1)]


def adiabatic_initial(bg, fp, k, tau0, order=0):
    """Adiabatic vacuum data ``(chi, chi')`` at ``tau0``.

    Order 0 uses the instantaneous frequency ``W = sqrt(k**2 + V)``; order 2
    uses the WKB frequency

        W**2 = Om - Om''/(4 Om) + 5 Om'**2 / (16 Om**2),   Om = k**2 + V

    with ``chi = 1/sqrt(2W)`` and ``chi' = (-iW - W'/(2W)) chi``.
    """
    om = lambda t: k**2 + fp.potential(bg, t)
    if order == 0:
        w2, dw = om(tau0), 0.0
    else:
        lo, hi = bg.domain
        h = 1e-2 * max(abs(tau0), 1.0)
        room = min(tau0 - lo, hi - tau0) / 4.5
        h = min(h, room) if np.isfinite(room) else h
        if h <= 0:
            raise DomainError("tau0 too close to the background boundary")
        o0, o1, o2, o3 = _local_derivatives(om, tau0, h, 3)
        w2 = o0 - o2 / (4 * o0) + 5 * o1**2 / (16 * o0**2)
        dw2 = o1 - (o3 / (4 * o0) - o2 * o1 / (4 * o0**2)
                    - 10 * o1 * o2 / (16 * o0**2) + 10 * o1**3 / (16 * o0**3))
        dw = dw2 / (2 * np.sqrt(w2)) if w2 > 0 else 0.0
    if w2 <= 0:
        raise DomainError(
            f"adiabatic frequency squared {w2:.3e} <= 0 at tau0={tau0}, k={k}")
    w = np.sqrt(w2)
    chi = 1.0 / np.sqrt(2 * w)
    return complex(chi), complex((-1j * w - dw / (2 * w)) * chi)


def _initial_data(bg, fp, state, k, grid):
    if isinstance(state, ConformalVacuum):
        t0 = grid[0]
        return t0, 1.0 + 0j, 0j
    if isinstance(state, PositiveFrequency):
        t0 = state.tau0
        chi, dchi = adiabatic_initial(bg, fp, k, t0, state.order)
    elif isinstance(state, ExplicitModes):
        t0, chi, dchi = state.initial(k)
    else:
        raise DomainError(f"unknown state {state!r}")
    a, b = _from_chi(k, t0, complex(chi), complex(dchi))
    w = abs(a) ** 2 - abs(b) ** 2
    if abs(w - 1) > 1e-10:
        raise DomainError(f"initial data not Wronskian normalised ({w - 1:.2e})")
    return t0, complex(a), complex(b)


def _constant_potential(bg, fp):
    return isinstance(bg, Minkowski) or (fp.m == 0 and fp.xi == CONFORMAL_XI)


def _evolve_exact(bg, fp, k, t0, a0, b0, grid):
    """Exact evolution for a time-independent potential."""
    V = fp.m**2 if isinstance(bg, Minkowski) else 0.0
    if V == 0:
        return np.full(grid.shape, a0), np.full(grid.shape, b0)
    w = np.sqrt(k**2 + V + 0j)
    chi0, dchi0 = _to_chi(k, t0, a0, b0)
    dt = grid - t0
    chi = chi0 * np.cos(w * dt) + dchi0 * np.sin(w * dt) / w
    dchi = -chi0 * w * np.sin(w * dt) + dchi0 * np.cos(w * dt)
    return _from_chi(k, grid, chi, dchi)


def _integrate_batch(bg, fp, ks, t0, a0, b0, grid, rtol, atol):
    """Interaction-picture integration of several momenta sharing ``t0``.

    Returns ``alpha, beta`` arrays of shape ``(len(ks), len(grid))``.
    """
    ks = np.asarray(ks, dtype=float)
    n = len(ks)
    alpha = np.empty((n, len(grid)), complex)
    beta = np.empty((n, len(grid)), complex)

    def rhs(t, y):
        al = y[:n] + 1j * y[n:2 * n]
        be = y[2 * n:3 * n] + 1j * y[3 * n:]
        c = fp.potential(bg, t) / (2 * ks)
        e = np.exp(2j * ks * t)
        da = -1j * c * (al + be * e)
        db = 1j * c * (al * np.conj(e) + be)
        return np.concatenate([da.real, da.imag, db.real, db.imag])

    y0 = np.concatenate([a0.real, a0.imag, b0.real, b0.imag])
    fwd = grid >= t0
    for mask, end in ((fwd, grid[-1]), (~fwd, grid[0])):
        if not mask.any():
            continue
        pts = grid[mask]
        if end == t0:
            alpha[:, mask] = a0[:, None]
            beta[:, mask] = b0[:, None]
            continue
        sol = solve_ivp(rhs, (t0, end), y0, method="DOP853",
                        t_eval=pts if end > t0 else pts[::-1],
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise SolverError(f"mode integration failed: {sol.message}")
        y = sol.y if end > t0 else sol.y[:, ::-1]
        alpha[:, mask] = y[:n] + 1j * y[n:2 * n]
        beta[:, mask] = y[2 * n:3 * n] + 1j * y[3 * n:]
    return alpha, beta


def _check_wronskian(ks, alpha, beta, tol):
    drift = np.max(np.abs(np.abs(alpha) ** 2 - np.abs(beta) ** 2 - 1.0), axis=-1)
    worst = int(np.argmax(drift))
    if drift[worst] > tol:
        raise SolverError(f"Wronskian drift {drift[worst]:.3e} at k={ks[worst]}",
                          achieved=float(drift[worst]))


def _validate(bg, k_values, grid):
    if np.any(np.asarray(k_values) <= 0):
        raise DomainError("mode momenta must be positive")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise DomainError("mode grid must be strictly increasing")
    bg._check(grid)
    return grid


def solve_mode(bg: Background, fp: FieldParams, state, k, grid, *,
               rtol=1e-10, atol=1e-12, wronskian_tol=1e-8) -> ModeFunction:
    """Integrate one mode over ``grid``.

    Parameters
    ----------
    bg : Background
    fp : FieldParams
    state : ConformalVacuum, PositiveFrequency or ExplicitModes
    k : float
        Comoving momentum, ``k > 0``.
    grid : array_like
        Increasing conformal times inside the background domain.
    rtol, atol : float
        Integrator tolerances on the interaction-picture coefficients.
    wronskian_tol : float
        Maximum allowed deviation of ``|alpha|**2 - |beta|**2`` from one.

    Raises
    ------
    SolverError
        If the integrator fails or the Wronskian drifts beyond tolerance.
    """
    ms = solve_modes(bg, fp, state, [k], grid, rtol=rtol, atol=atol,
                     wronskian_tol=wronskian_tol, workers=1)
    return ms.mode(ms.k[0])


# --------------------------------------------------------------------------
# mode sets


def make_k_grid(k_min, k_pivot, k_max, n_log=40, dk=None, dtau=None):
    """Logarithmic grid below ``k_pivot`` joined to a linear grid above.

    The linear spacing defaults to ``0.5 / dtau`` when a time step is given
    (so that ``k dtau`` changes by at most 0.5 between neighbours), else to
    ``k_pivot / 4``.
    """
    if not 0 < k_min < k_pivot <= k_max:
        raise DomainError("need 0 < k_min < k_pivot <= k_max")
    if dk is None:
        dk = 0.5 / dtau if dtau else k_pivot / 4
    low = np.geomspace(k_min, k_pivot, n_log, endpoint=False)
    n_lin = int(np.ceil((k_max - k_pivot) / dk)) + 1
    high = np.linspace(k_pivot, k_max, max(n_lin, 2))
    return np.concatenate([low, high])


@dataclass
class ModeSet:
    """Modes on a common ``(k, tau)`` grid.

    Arrays are indexed ``[k_index, tau_index]``.
    """

    bg: Background
    fp: FieldParams
    state: object
    k: np.ndarray
    tau: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    _interp: dict = field(default_factory=dict, repr=False)

    @property
    def chi(self):
        return _to_chi(self.k[:, None], self.tau[None, :], self.alpha,
                       self.beta)[0]

    @property
    def dchi(self):
        return _to_chi(self.k[:, None], self.tau[None, :], self.alpha,
                       self.beta)[1]

    def mode(self, k) -> ModeFunction:
        i = np.flatnonzero(np.isclose(self.k, k, rtol=1e-13, atol=0))
        if i.size == 0:
            raise LookupError(f"k={k} not in solved mode set")
        i = int(i[0])
        chi, dchi = _to_chi(self.k[i], self.tau, self.alpha[i], self.beta[i])
        return ModeFunction(float(self.k[i]), self.tau, chi, dchi,
                            self.alpha[i], self.beta[i])

    def coefficients(self, k):
        """Interpolated ``(alpha, beta)`` rows at arbitrary momenta.

        Inside the solved range a cubic spline in ``log k`` is used; above it
        the asymptotic values ``alpha = 1, beta = 0`` are returned, which is
        the large-momentum limit of any Hadamard state.
        """
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if "spl" not in self._interp:
            lk = np.log(self.k)
            self._interp["spl"] = (CubicSpline(lk, self.alpha, axis=0),
                                   CubicSpline(lk, self.beta, axis=0))
        sa, sb = self._interp["spl"]
        inside = k <= self.k[-1]
        lk = np.log(np.clip(k, self.k[0], self.k[-1]))
        al = np.where(inside[:, None], sa(lk), 1.0 + 0j)
        be = np.where(inside[:, None], sb(lk), 0j)
        if np.any(k < self.k[0]):
            raise DomainError("momentum below the solved mode range")
        return al, be

    def chi_at(self, k):
        """``(chi, chi')`` rows at arbitrary momenta on the time grid."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        al, be = self.coefficients(k)
        return _to_chi(k[:, None], self.tau[None, :], al, be)


def _solve_batch(args):
    bg, fp, state, ks, grid, rtol, atol = args
    init = [_initial_data(bg, fp, state, k, grid) for k in ks]
    t0s = np.array([i[0] for i in init])
    a0 = np.array([i[1] for i in init])
    b0 = np.array([i[2] for i in init])
    for t0 in np.unique(t0s):
        bg._check(t0)
    alpha = np.empty((len(ks), len(grid)), complex)
    beta = np.empty_like(alpha)
    if _constant_potential(bg, fp):
        for j, k in enumerate(ks):
            alpha[j], beta[j] = _evolve_exact(bg, fp, k, t0s[j], a0[j], b0[j], grid)
        return alpha, beta
    for t0 in np.unique(t0s):
        sel = t0s == t0
        alpha[sel], beta[sel] = _integrate_batch(bg, fp, ks[sel], t0, a0[sel],
                                                 b0[sel], grid, rtol, atol)
    return alpha, beta


def solve_modes(bg, fp, state, k_grid, tau_grid, *, workers=None,
                rtol=1e-10, atol=1e-12, wronskian_tol=1e-8,
                batch=64) -> ModeSet:
    """Solve all momenta of ``k_grid`` on ``tau_grid``.

    Momenta are integrated in batches of ``batch`` as one vector system, so
    the potential is evaluated once per step for the whole batch.  Batches
    are independent; ``workers`` (default from the ``FLRWREN_THREADS``
    environment variable, else 1) sets the number of worker processes.

    Raises
    ------
    SolverError
        If any mode violates the Wronskian constraint by more than
        ``wronskian_tol``.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    tau_grid = _validate(bg, k_grid, tau_grid)
    if workers is None:
        workers = int(os.environ.get("FLRWREN_THREADS", "1"))
    jobs = [(bg, fp, state, k_grid[i:i + batch], tau_grid, rtol, atol)
            for i in range(0, len(k_grid), batch)]
    if workers > 1 and len(jobs) > 1 and not isinstance(state, ExplicitModes):
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_solve_batch, jobs))
    else:
        rows = [_solve_batch(j) for j in jobs]
    alpha = np.concatenate([r[0] for r in rows])
    beta = np.concatenate([r[1] for r in rows])
    _check_wronskian(k_grid, alpha, beta, wronskian_tol)
    return ModeSet(bg, fp, state, k_grid, tau_grid, alpha, beta)
