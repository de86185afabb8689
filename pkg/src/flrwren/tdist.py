"""Distributions in a conformal-time difference and their quadrature weights.

Kernels that are too singular at coincident times to be sampled pointwise
are represented by a few model distributions in ``t = tau1 - tau2``:

``FinitePartAbs(kappa, M)``
    ``e^{-i kappa |t|} [1/|t|]_M`` defined by

        <D, psi> = int [e^{-i kappa |t|} psi(t) - psi(0) theta(T - |t|)] / |t| dt
                   + psi(0) (2 log(T M) + log 2 + i pi)

    for any ``T > 0`` (the result does not depend on ``T``).
``BoundaryValue(kappa, sign)``
    ``e^{-i kappa t} / (t - i sign 0)``, i.e. the principal value plus
    ``i pi sign delta``.
``Delta``
    The Dirac delta.

Each distribution can be paired with a callable test function through
adaptive quadrature (reference path) or turned into a dense weight matrix
on a uniform grid (production path used by the assembler).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.integrate import quad
from scipy.linalg import matmul_toeplitz
from scipy.special import exp1

from .errors import DomainError

GAMMA = np.euler_gamma


def _uniform_step(grid):
    h = np.diff(grid)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise DomainError("distribution weights need a uniform time grid")
    return float(h[0])


def trapezoid_weights(grid):
    h = _uniform_step(grid)
    w = np.full(len(grid), h)
    w[0] = w[-1] = h / 2
    return w


def fd_matrix(grid, order, dense=True):
    """Finite-difference matrix for the first or second derivative.

    Fourth-order central stencils in the interior and fourth-order one-sided
    stencils on the first and last two points.
    """
    n, h = len(grid), _uniform_step(grid)
    if n < 7:
        raise DomainError("finite differences need at least 7 grid points")
    D = sparse.lil_matrix((n, n))
    if order == 1:
        c = np.array([1, -8, 0, 8, -1]) / 12.0
        one = np.array([-25, 48, -36, 16, -3]) / 12.0
        two = np.array([-3, -10, 18, -6, 1]) / 12.0
    elif order == 2:
        c = np.array([-1, 16, -30, 16, -1]) / 12.0
        one = np.array([45, -154, 214, -156, 61, -10]) / 12.0
        two = np.array([10, -15, -4, 14, -6, 1]) / 12.0
    else:
        raise DomainError("only first and second derivatives supported")
    D = sparse.diags([np.full(n - abs(j - 2), cj) for j, cj in enumerate(c)],
                     [j - 2 for j in range(5)], shape=(n, n), format="lil")
    sgn = -1.0 if order == 1 else 1.0
    for row, coef in ((0, one), (1, two)):
        D[row, :] = 0
        D[row, :len(coef)] = coef
        D[n - 1 - row, :] = 0
        D[n - 1 - row, n - len(coef):] = sgn * coef[::-1]
    D = D.tocsr() / h**order
    return D.toarray() if dense else D


class GridOperator:
    """``phi -> T (w phi) + diag phi + extra phi`` on a uniform grid.

    ``T`` is the Toeplitz matrix of kernel samples at ``t = tau_i - tau_j``
    (zero on the diagonal), ``w`` the trapezoid weights, ``diag`` a vector
    and ``extra`` an optional sparse banded matrix.  Applying the operator
    costs ``O(n log n)`` per column.
    """

    def __init__(self, col, row, w, diag, extra=None):
        self.col = np.asarray(col, dtype=complex)
        self.row = np.asarray(row, dtype=complex)
        self.w = np.asarray(w, dtype=float)
        self.diag = np.asarray(diag, dtype=complex)
        self.extra = extra

    @property
    def n(self):
        return len(self.col)

    def apply(self, phi):
        phi = np.asarray(phi, dtype=complex)
        wphi = phi * (self.w if phi.ndim == 1 else self.w[:, None])
        out = matmul_toeplitz((self.col, self.row), wphi)
        out = out + (self.diag if phi.ndim == 1 else self.diag[:, None]) * phi
        if self.extra is not None:
            out = out + self.extra @ phi
        return out

    def dense(self):
        idx = np.arange(self.n)
        t = idx[:, None] - idx[None, :]
        T = np.where(t >= 0, self.col[np.abs(t)], self.row[np.abs(t)])
        T[idx, idx] = 0
        W = T * self.w[None, :] + np.diag(self.diag)
        if self.extra is not None:
            W = W + self.extra.toarray()
        return W


def _toeplitz_sum(samples_pos, samples_neg, w):
    """``sum_j S(tau_i - tau_j) w_j`` for Toeplitz samples with zero diagonal."""
    col = np.asarray(samples_pos, dtype=complex).copy()
    row = np.asarray(samples_neg, dtype=complex).copy()
    col[0] = row[0] = 0
    return matmul_toeplitz((col, row), np.asarray(w, dtype=complex))


def _default_cutoff(grid, h):
    return max(20 * h, 0.05 * (grid[-1] - grid[0]))


@dataclass(frozen=True)
class Delta:
    """Dirac delta in ``t``."""

    def pointwise(self, t, k=0.0, box_power=0):
        return np.zeros_like(np.asarray(t, dtype=complex))

    def pair(self, psi, **kw):
        return complex(psi(0.0))

    def operator(self, grid, cutoff=None):
        n = len(grid)
        z = np.zeros(n)
        return GridOperator(z, z, np.zeros(n), np.ones(n))

    def weights(self, grid, cutoff=None):
        return np.eye(len(grid), dtype=complex)


def _box_pointwise(t, kappa, k, box_power, even):
    """``(d^2/dt^2 + k^2)^n`` of ``e^{-i kappa s}/s`` at ``s = |t|`` or ``t``."""
    s = np.abs(t) if even else np.asarray(t, dtype=float)
    e = np.exp(-1j * kappa * s)
    if box_power == 0:
        return e / s
    if box_power == 1:
        return e * ((k**2 - kappa**2) / s + 2j * kappa / s**2 + 2 / s**3)
    raise DomainError("box power above one is not supported pointwise")


@dataclass(frozen=True)
class FinitePartAbs:
    """``e^{-i kappa |t|} [1/|t|]_M`` (see module docstring)."""

    kappa: float
    M: float

    def delta_constant(self, T):
        return 2 * np.log(T * self.M) + np.log(2.0) + 1j * np.pi

    def pointwise(self, t, k=0.0, box_power=0):
        return _box_pointwise(t, self.kappa, k, box_power, even=True)

    def pair(self, psi, T=1.0, limit=400, epsabs=1e-12, epsrel=1e-12,
             support=np.inf):
        """Adaptive-quadrature pairing with a test function ``psi(t)``."""
        kap = self.kappa

        def f(t, part):
            v = (np.exp(-1j * kap * abs(t)) * psi(t)
                 - psi(0.0) * (abs(t) < T)) / abs(t)
            return v.real if part == 0 else v.imag

        tot = 0j
        for lo, hi in ((-min(T, support), 0.0), (0.0, min(T, support)),
                       (-support, -T), (T, support)):
            if hi <= lo:
                continue
            for part in (0, 1):
                val = quad(f, lo, hi, args=(part,), limit=limit,
                           epsabs=epsabs, epsrel=epsrel)[0]
                tot += val if part == 0 else 1j * val
        return tot + psi(0.0) * self.delta_constant(T)

    def operator(self, grid, cutoff=None) -> GridOperator:
        """Quadrature operator with ``(W phi)_i ~ <D(tau_i - .), phi>``.

        The local subtraction uses ``psi(0) exp(-|t|/T)`` whose exact
        integral outside the grid is added through ``E1``.
        """
        grid = np.asarray(grid, dtype=float)
        n, h = len(grid), _uniform_step(grid)
        T = cutoff if cutoff is not None else _default_cutoff(grid, h)
        w = trapezoid_weights(grid)
        s = h * np.arange(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            col = np.where(s > 0, np.exp(-1j * self.kappa * s) / s, 0.0)
            sub = np.where(s > 0, np.exp(-s / T) / s, 0.0)
        # trapezoid of the subtraction, the limit value at t = 0 and the
        # subtraction tail beyond both grid ends
        diag = -_toeplitz_sum(sub, sub, w)
        diag += h * (-1j * self.kappa + 1.0 / T)
        left = grid - grid[0]
        right = grid[-1] - grid
        for d in (left, right):
            with np.errstate(divide="ignore"):
                diag -= np.where(d > 0, exp1(np.maximum(d, 1e-300) / T), 0.0)
        diag += self.delta_constant(T) - 2 * GAMMA
        # Euler-Maclaurin correction for the |t| kink of the subtracted
        # integrand at t = 0
        kink = h**2 / 12
        diag += kink * (-self.kappa**2 - 1.0 / T**2)
        return GridOperator(col, col, w, diag, kink * fd_matrix(grid, 2, dense=False))

    def weights(self, grid, cutoff=None):
        """Dense matrix of :meth:`operator`."""
        return self.operator(grid, cutoff).dense()


@dataclass(frozen=True)
class BoundaryValue:
    """``e^{-i kappa t} (t - i sign 0)^{-1}``."""

    kappa: float
    sign: int = 1

    def pointwise(self, t, k=0.0, box_power=0):
        return _box_pointwise(t, self.kappa, k, box_power, even=False)

    def pair(self, psi, T=1.0, limit=400, epsabs=1e-12, epsrel=1e-12,
             support=np.inf):
        kap = self.kappa

        def f(t, part):
            v = (np.exp(-1j * kap * t) * psi(t) - psi(0.0) * (abs(t) < T)) / t
            return v.real if part == 0 else v.imag

        tot = 0j
        for lo, hi in ((-min(T, support), 0.0), (0.0, min(T, support)),
                       (-support, -T), (T, support)):
            if hi <= lo:
                continue
            for part in (0, 1):
                val = quad(f, lo, hi, args=(part,), limit=limit,
                           epsabs=epsabs, epsrel=epsrel)[0]
                tot += val if part == 0 else 1j * val
        return tot + 1j * np.pi * self.sign * psi(0.0)

    def operator(self, grid, cutoff=None) -> GridOperator:
        grid = np.asarray(grid, dtype=float)
        n, h = len(grid), _uniform_step(grid)
        T = cutoff if cutoff is not None else _default_cutoff(grid, h)
        w = trapezoid_weights(grid)
        s = h * np.arange(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            col = np.where(s > 0, np.exp(-1j * self.kappa * s) / s, 0.0)
            row = np.where(s > 0, -np.exp(1j * self.kappa * s) / s, 0.0)
            sub = np.where(s > 0, np.exp(-(s / T) ** 2) / s, 0.0)
        diag = -_toeplitz_sum(sub, -sub, w)
        diag += h * (-1j * self.kappa)
        # odd subtraction beyond the grid: t > 0 region lies below grid[0]
        lo = grid - grid[0]
        hi = grid[-1] - grid
        with np.errstate(divide="ignore"):
            diag -= np.where(lo > 0, 0.5 * exp1(np.maximum(lo, 1e-300) ** 2 / T**2), 0.0)
            diag += np.where(hi > 0, 0.5 * exp1(np.maximum(hi, 1e-300) ** 2 / T**2), 0.0)
        diag += 1j * np.pi * self.sign
        # t = tau_i - tau, so psi'(0) = -phi'(tau_i)
        return GridOperator(col, row, w, diag, -h * fd_matrix(grid, 1, dense=False))

    def weights(self, grid, cutoff=None):
        return self.operator(grid, cutoff).dense()
