"""Spatially flat FLRW backgrounds in conformal time.

All backgrounds expose the scale factor ``a(tau)`` together with its first
two conformal-time derivatives.  The Hubble rate and the Ricci scalar are
derived from these as

    H = a' / a**2,        R = 6 a'' / a**3

with primes denoting derivatives with respect to conformal time ``tau``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import AccuracyError, DomainError


class BackgroundPoint(NamedTuple):
    """Geometry at one (or an array of) conformal time(s)."""

    a: np.ndarray
    da: np.ndarray
    dda: np.ndarray
    hubble: np.ndarray
    ricci: np.ndarray


@dataclass(frozen=True)
class Background:
    """Base class; subclasses implement :meth:`_scale`.

    Parameters
    ----------
    domain : tuple of float
        Closed conformal-time interval ``(tau_min, tau_max)`` on which the
        background may be evaluated.
    """

    domain: tuple = field(default=(-np.inf, np.inf), kw_only=True)

    kind = "abstract"

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi:
            raise DomainError(f"empty conformal-time domain {self.domain}")

    def _scale(self, tau):
        raise NotImplementedError

    def _check(self, tau):
        tau = np.asarray(tau, dtype=float)
        lo, hi = self.domain
        if np.any(tau < lo) or np.any(tau > hi):
            raise DomainError(
                f"conformal time outside background domain [{lo}, {hi}]"
            )
        return tau

    def scale(self, tau):
        """Return ``(a, a', a'')`` at ``tau``."""
        tau = self._check(tau)
        return self._scale(tau)

    def evaluate(self, tau) -> BackgroundPoint:
        a, da, dda = self.scale(tau)
        return BackgroundPoint(a, da, dda, da / a**2, 6.0 * dda / a**3)

    def a(self, tau):
        return self.scale(tau)[0]

    def ricci(self, tau):
        return self.evaluate(tau).ricci

    @property
    def is_flat(self):
        """True when ``a`` is identically one."""
        return False

    def describe(self) -> dict:
        """Plain-dict description used for config hashing and headers."""
        return {"kind": self.kind, "domain": list(self.domain)}


def evaluate(bg: Background, tau) -> BackgroundPoint:
    """Evaluate ``{a, a', a'', H, R}`` for ``bg`` at ``tau``.

    Raises
    ------
    DomainError
        If ``tau`` lies outside the background domain.
    """
    return bg.evaluate(tau)


@dataclass(frozen=True)
class Minkowski(Background):
    kind = "minkowski"

    def _scale(self, tau):
        one = np.ones_like(tau)
        return one, 0.0 * one, 0.0 * one

    @property
    def is_flat(self):
        return True


@dataclass(frozen=True)
class DeSitter(Background):
    """Conformal patch of de Sitter, ``a = -1/(H tau)`` for ``tau < 0``."""

    hubble: float = 1.0
    domain: tuple = field(default=(-np.inf, -1e-12), kw_only=True)

    kind = "de_sitter"

    def __post_init__(self):
        super().__post_init__()
        if self.hubble <= 0:
            raise DomainError("de Sitter Hubble rate must be positive")
        if self.domain[1] >= 0:
            raise DomainError("de Sitter conformal patch requires tau < 0")

    def _scale(self, tau):
        h = self.hubble
        return -1.0 / (h * tau), 1.0 / (h * tau**2), -2.0 / (h * tau**3)

    def describe(self):
        return {**super().describe(), "hubble": self.hubble}


@dataclass(frozen=True)
class PowerLaw(Background):
    """``a = (tau / tau_ref)**exponent`` for ``tau > 0``."""

    exponent: float = 1.0
    tau_ref: float = 1.0
    domain: tuple = field(default=(1e-12, np.inf), kw_only=True)

    kind = "power_law"

    def __post_init__(self):
        super().__post_init__()
        if self.tau_ref <= 0 or self.domain[0] <= 0:
            raise DomainError("power-law background requires tau, tau_ref > 0")

    def _scale(self, tau):
        p = self.exponent
        x = tau / self.tau_ref
        a = x**p
        da = p * x ** (p - 1) / self.tau_ref
        dda = p * (p - 1) * x ** (p - 2) / self.tau_ref**2
        return a, da, dda

    def describe(self):
        return {**super().describe(), "exponent": self.exponent,
                "tau_ref": self.tau_ref}


@dataclass(frozen=True)
class Tabulated(Background):
    """Background interpolated from a table of ``(tau, a)`` samples.

    The logarithm of the scale factor is interpolated with a quintic
    spline, which keeps ``a`` positive and makes ``R`` continuous.

    Parameters
    ----------
    tau_grid, a_values : array_like
        Strictly increasing conformal times and positive scale factors.
    resolution_tol : float
        Relative tolerance for the grid-halving resolution check on ``R``
        run by :meth:`check_resolution`.
    """

    tau_grid: tuple = ()
    a_values: tuple = ()
    resolution_tol: float = 1e-6
    domain: tuple = field(default=(0.0, 1.0), kw_only=True)
    _spline: object = field(default=None, repr=False, compare=False)

    kind = "tabulated"

    def __post_init__(self):
        tau = np.asarray(self.tau_grid, dtype=float)
        a = np.asarray(self.a_values, dtype=float)
        if tau.ndim != 1 or tau.shape != a.shape or tau.size < 8:
            raise DomainError("tabulated background needs >= 8 (tau, a) pairs")
        if np.any(np.diff(tau) <= 0):
            raise DomainError("tabulated conformal-time grid must increase")
        if np.any(a <= 0):
            raise DomainError("tabulated scale factor must be positive")
        object.__setattr__(self, "domain", (float(tau[0]), float(tau[-1])))
        object.__setattr__(self, "_spline",
                           make_interp_spline(tau, np.log(a), k=5))

    @classmethod
    def from_background(cls, bg: Background, tau_grid, **kw):
        """Tabulate an analytic background on ``tau_grid``."""
        tau_grid = np.asarray(tau_grid, dtype=float)
        return cls(tau_grid=tuple(tau_grid), a_values=tuple(bg.a(tau_grid)),
                   **kw)

    def _scale(self, tau):
        s = self._spline(tau)
        ds = self._spline(tau, 1)
        dds = self._spline(tau, 2)
        a = np.exp(s)
        return a, ds * a, (dds + ds**2) * a

    def check_resolution(self):
        """Compare ``R`` against a spline built on every other grid point.

        Returns
        -------
        float
            Maximum relative deviation of the Ricci scalar on interior
            points, normalised by ``max |R| + max (a'/a)**2``.

        Raises
        ------
        AccuracyError
            If the deviation exceeds ``resolution_tol``.
        """
        tau = np.asarray(self.tau_grid)
        coarse = make_interp_spline(tau[::2], np.log(self.a_values)[::2], k=5)
        inner = tau[len(tau) // 8: -len(tau) // 8 or None]

        def ricci(spl):
            a = np.exp(spl(inner))
            return 6.0 * (spl(inner, 2) + spl(inner, 1) ** 2) / a**2

        fine, rough = ricci(self._spline), ricci(coarse)
        # a flat table has no curvature scale; fall back to an absolute check
        scale = np.max(np.abs(fine)) + np.max(self._spline(inner, 1) ** 2) or 1.0
        dev = float(np.max(np.abs(fine - rough)) / scale)
        if dev > self.resolution_tol:
            raise AccuracyError(
                f"tabulated grid too coarse: R changes by {dev:.3e} (relative)"
                " when the grid is halved", achieved=dev)
        return dev

    def describe(self):
        return {**super().describe(), "n_points": len(self.tau_grid)}
