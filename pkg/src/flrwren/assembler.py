"""Temporal and spatial convolutions and the second-order two-point function.

The interacting Wightman function of ``V = lam/4 phi^4 + mu/2 phi^2`` with
``mu = 3 lam [w]`` is assembled diagram by diagram at fixed momentum.
Temporal convolutions carry the weight ``a(tau)^2`` and a smooth switch-on
window; all quadratures use the trapezoid rule on a uniform grid, refined
by one Richardson step.

Propagators of a mode set are rank two in time,

    Plus = chi(tau1) conj(chi(tau2)),   Retarded = -i theta(t) (Plus - Minus),

so every convolution with a propagator reduces to cumulative sums.
Distributional kernels act through :class:`flrwren.tdist.GridOperator`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .background import Background, Minkowski
from .errors import DomainError
from .kernels import (EIGHT_PI2, FourierKernel, SingularTerm, conv_spatial,
                      fish_kernel, sunset_kernel)
from .modes import ConformalVacuum, FieldParams, solve_modes
from .tdist import BoundaryValue, fd_matrix, trapezoid_weights

DIAGRAM_ORDER = {
    "free": 0,
    "mu1": 1,
    "mu2": 2,
    "bubble": 2,
    "sunset": 2,
}


# --------------------------------------------------------------------------
# grid and window


@dataclass(frozen=True)
class Window:
    """Smoothed step switching on over the first ``ramp`` of ``[start, end]``.

    ``f(tau) = (1 + erf((tau - start - ramp/2) / (ramp/6))) / 2`` and zero
    before ``start``; the step left at ``start`` is about ``1e-5``.
    """

    start: float
    end: float
    ramp: float

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        x = (tau - self.start - 0.5 * self.ramp) / (self.ramp / 6)
        f = 0.5 * (1 + erf(x))
        return np.where(tau < self.start, 0.0, f)


@dataclass(frozen=True)
class ConvolutionGrid:
    """Uniform conformal-time grid over ``I = [start, end]`` plus momenta.

    Parameters
    ----------
    bg : Background
    start, end : float
        Integration window ``I``.
    step : float
        Grid spacing; the grid is refined so that ``end - start`` is an
        even multiple of it (needed for the Richardson step).
    k : sequence of float
        External momenta.
    ramp_fraction : float
        Switch-on ramp as a fraction of ``end - start``.
    intervals : int, optional
        Exact number of grid intervals; overrides ``step``.
    """

    bg: Background
    start: float
    end: float
    step: float
    k: tuple = (1.0,)
    ramp_fraction: float = 0.1
    intervals: int = None
    tau: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.end > self.start:
            raise DomainError("window end must exceed its start")
        if not 0 < self.ramp_fraction < 1:
            raise DomainError("ramp_fraction must lie in (0, 1)")
        if any(kk < 0 for kk in self.k):
            raise DomainError("momenta must be non-negative")
        n = self.intervals
        if n is None:
            n = int(np.ceil((self.end - self.start) / self.step / 2 - 1e-9)) * 2
        tau = np.linspace(self.start, self.end, n + 1)
        self.bg._check(tau)
        object.__setattr__(self, "tau", tau)

    @property
    def h(self):
        return float(self.tau[1] - self.tau[0])

    @property
    def window(self):
        return Window(self.start, self.end, self.ramp_fraction * (self.end - self.start))

    def coarse(self):
        """The same window on every other grid point."""
        n = len(self.tau) - 1
        if n % 2:
            raise DomainError("coarsening needs an even number of intervals")
        return ConvolutionGrid(self.bg, self.start, self.end, 2 * self.h, self.k,
                               self.ramp_fraction, n // 2)

    def enlarged(self, factor=1.5):
        """Window extended into the past by ``(factor - 1)`` of its length."""
        n = int(np.ceil((len(self.tau) - 1) * factor / 2)) * 2
        return ConvolutionGrid(self.bg, self.end - n * self.h, self.end,
                               self.h, self.k, self.ramp_fraction, n)

    def vertex_weights(self, power=2):
        """Trapezoid weights times ``a^power`` times the window."""
        a = self.bg.a(self.tau)
        return trapezoid_weights(self.tau) * a**power * self.window(self.tau)

    def index(self, tau):
        """Grid indices of the given times (``LookupError`` off the grid)."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        idx = np.rint((tau - self.start) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= len(self.tau)) or not np.allclose(
                self.tau[np.clip(idx, 0, len(self.tau) - 1)], tau,
                atol=1e-9 * max(1.0, self.h)):
            raise LookupError("time not on the convolution grid")
        return idx


# --------------------------------------------------------------------------
# propagators in rank-two form


class ModePropagator:
    """Propagators of one mode ``chi`` sampled on a grid.

    The ``apply_*`` methods return ``sum_j G(tau_i, tau_j) z_j`` for all ``i``.
    """

    def __init__(self, chi):
        self.chi = np.asarray(chi, dtype=complex)

    def plus(self, i, j):
        return self.chi[i] * np.conj(self.chi[j])

    def matrix(self, variant):
        c = self.chi
        P = c[:, None] * np.conj(c)[None, :]
        n = len(c)
        step = np.tri(n, n, -1) + 0.5 * np.eye(n)
        if variant == "plus":
            return P
        if variant == "minus":
            return np.conj(P)
        if variant == "retarded":
            return -1j * step * (P - np.conj(P))
        if variant == "advanced":
            return 1j * step.T * (P - np.conj(P))
        raise DomainError(f"unknown variant {variant!r}")

    def apply_plus(self, z):
        return self.chi * (np.conj(self.chi) @ z)

    def apply_minus(self, z):
        return np.conj(self.chi) * (self.chi @ z)

    @staticmethod
    def _causal_sum(x, past=True):
        """``sum_{j<i} x_j + x_i / 2`` (or over ``j > i`` for ``past=False``)."""
        if not past:
            return ModePropagator._causal_sum(x[::-1])[::-1]
        c = np.cumsum(x)
        return c - 0.5 * x

    def apply_retarded(self, z):
        c = self.chi
        s1 = self._causal_sum(np.conj(c) * z)
        s2 = self._causal_sum(c * z)
        return -1j * (c * s1 - np.conj(c) * s2)

    def apply_advanced(self, z):
        c = self.chi
        s1 = self._causal_sum(np.conj(c) * z, past=False)
        s2 = self._causal_sum(c * z, past=False)
        return 1j * (c * s1 - np.conj(c) * s2)

    def apply(self, variant, z):
        return getattr(self, f"apply_{variant}")(z)


# --------------------------------------------------------------------------
# kernel operators


def _power_kernel(bg, M, k, power, variant):
    """Conformal-vacuum ``Plus^n`` or ``Minus^n`` (``n`` = 2, 3) as a kernel."""
    sign = 1 if variant == "plus" else -1
    dist = BoundaryValue(sign * k, sign)
    if power == 2:
        term = SingularTerm(-sign * 1j / (16 * np.pi**2), 1, 1, dist, 0)
    elif power == 3:
        term = SingularTerm(sign * 1j * np.pi**2 / EIGHT_PI2**3, 2, 2, dist, 1)
    else:
        raise DomainError("only squares and cubes are supported")
    return FourierKernel(f"{variant}{power}", bg, M, k, (), (term,))


class KernelOperator:
    """Quadrature operator of a :class:`FourierKernel` on a uniform grid.

    ``apply(phi)_i ~ int dtau K(tau_i, tau, k) phi(tau)``.  Singular terms
    move their ``(d^2 + k^2)`` onto ``a^-q phi``; local derivatives of the
    delta act on ``inner * phi`` by finite differences.

    With ``symmetric`` set, a local term ``f(tau1) delta''(tau1 - tau2) g(tau2)``
    is replaced by its symmetric part ``(f (g phi)'' + g (f phi)'')/2``.
    Feynman-type kernels are symmetric in their two times, and the one-sided
    form only agrees with that up to first-derivative terms.
    """

    def __init__(self, kernel: FourierKernel, tau, cutoff=None, symmetric=True):
        self.symmetric = symmetric
        if kernel.regular is not None:
            raise DomainError(f"kernel {kernel.name!r} has no grid operator")
        self.kernel = kernel
        self.tau = np.asarray(tau, dtype=float)
        self.a = kernel.bg.a(self.tau)
        self._ops = [(term, term.dist.operator(self.tau, cutoff))
                     for term in kernel.singular]
        self._d2 = fd_matrix(self.tau, 2, dense=False)
        self._d1 = fd_matrix(self.tau, 1, dense=False)

    def _box(self, psi, n):
        for _ in range(n):
            psi = self._d2 @ psi + self.kernel.k**2 * psi
        return psi

    def apply(self, phi):
        phi = np.asarray(phi, dtype=complex)
        a = self.a
        out = np.zeros_like(phi)
        for term, op in self._ops:
            psi = self._box(a ** (-term.inner_power) * phi, term.box_power)
            out += term.constant * a ** (-term.outer_power) * op.apply(psi)
        for term in self.kernel.local:
            f = term.outer(self.tau)
            g = term.inner_values(self.tau)
            if term.order == 0:
                out += f * g * phi
            elif term.order == 2:
                if self.symmetric:
                    out += 0.5 * (f * (self._d2 @ (g * phi)) + g * (self._d2 @ (f * phi)))
                else:
                    out += f * (self._d2 @ (g * phi))
            elif term.order == 1 and not self.symmetric:
                out += f * (self._d1 @ (g * phi))
            else:
                raise DomainError(f"local terms of order {term.order} are not supported")
        return out

    def dense(self):
        return np.column_stack([self.apply(e) for e in np.eye(len(self.tau))])


# --------------------------------------------------------------------------
# generic convolutions


def conv_temporal(A, B, grid: ConvolutionGrid, window=True):
    """``int dtau a(tau)^2 A(tau1, tau, k) B(tau, tau2, k)`` on the grid.

    ``A`` and ``B`` are dense ``(n, n)`` matrices on ``grid.tau`` or
    :class:`KernelOperator` instances; a kernel in the first slot is applied
    through its transpose, which for the translation-invariant distributions
    used here equals the operator on the mirrored grid.
    """
    dens = grid.bg.a(grid.tau) ** 2
    if window:
        dens = dens * grid.window(grid.tau)
    if isinstance(B, KernelOperator):
        if isinstance(A, KernelOperator):
            raise DomainError("at most one kernel operator per convolution")
        # (A diag(w)) B = (B^T (w A^T))^T; B^T needs the kernel at swapped times
        raise DomainError("kernel operators are supported in the first slot")
    if isinstance(A, KernelOperator):
        # the operator carries its own quadrature weights
        B = np.asarray(B, dtype=complex)
        if B.ndim == 1:
            return A.apply(dens * B)
        return np.column_stack([A.apply(dens * col) for col in B.T])
    w = trapezoid_weights(grid.tau) * dens
    return np.asarray(A) @ (w[:, None] * np.asarray(B))


# --------------------------------------------------------------------------
# vertex factors


def _mu_values(mu, tau):
    if callable(mu):
        return np.asarray(mu(tau), dtype=float) * np.ones_like(tau)
    return np.broadcast_to(np.asarray(mu, dtype=float), tau.shape).astype(float)


def _zero_momentum_operator(variant, grid, M):
    bg = grid.bg
    if variant in ("fish", "FishMS", "feynman2"):
        kern = fish_kernel(bg, M, 0.0)
    elif variant in ("plus2", "Plus2"):
        kern = _power_kernel(bg, M, 0.0, 2, "plus")
    elif variant in ("minus2", "Minus2"):
        kern = _power_kernel(bg, M, 0.0, 2, "minus")
    else:
        raise DomainError(f"unknown vertex-factor variant {variant!r}")
    return KernelOperator(kern, grid.tau)


def vertex_factor(variant, mu, grid: ConvolutionGrid, M=1.0):
    """``h(tau) = (1/a(tau)) int dtau1 a(tau1)^3 f(tau1) mu(tau1) K(tau, tau1, 0)``.

    ``variant`` selects ``K``: ``"fish"`` for the minimally subtracted
    Feynman square of the conformal vacuum, ``"plus2"`` or ``"minus2"`` for
    the squared Wightman functions.  ``f`` is the switch-on window.
    Returned on ``grid.tau``.
    """
    tau = grid.tau
    muv = _mu_values(mu, tau)
    if not np.any(muv):
        return np.zeros(len(tau), dtype=complex)
    op = _zero_momentum_operator(variant, grid, M)
    a = grid.bg.a(tau)
    src = a**3 * grid.window(tau) * muv
    return op.apply(src.astype(complex)) / a


# --------------------------------------------------------------------------
# two-point function


@dataclass
class DiagramResult:
    """Contribution of one diagram at the requested ``(tau1, tau2, k)`` points.

    ``values[i, j, l]`` is the value at ``(tau_out[i], tau_out[j], k[l])``.
    """

    diagram: str
    order: int
    tau: np.ndarray
    k: np.ndarray
    values: np.ndarray

    def to_rows(self):
        rows = []
        for i, t1 in enumerate(self.tau):
            for j, t2 in enumerate(self.tau):
                for l, kk in enumerate(self.k):
                    v = self.values[i, j, l]
                    rows.append((self.diagram, self.order, float(t1), float(t2),
                                 float(kk), float(v.real), float(v.imag)))
        return rows


@dataclass
class DiagramResultSet:
    """All diagrams of a two-point computation plus diagnostics."""

    results: dict
    lam: float
    window_sensitivity: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.results[name]

    def total(self, order=None):
        """Sum of the diagrams up to ``order`` (all by default)."""
        out = None
        for r in self.results.values():
            if order is not None and r.order > order:
                continue
            out = r.values.copy() if out is None else out + r.values
        return out

    def to_json(self):
        data = {"lam": self.lam, "diagrams": []}
        for r in self.results.values():
            data["diagrams"].append({
                "diagram": r.diagram, "order": r.order,
                "tau": [float(x) for x in r.tau], "k": [float(x) for x in r.k],
                "re": np.real(r.values).tolist(), "im": np.imag(r.values).tolist(),
            })
        data["window_sensitivity"] = self.window_sensitivity
        return json.dumps(data, indent=1, sort_keys=True)


def _is_conformal_free(bg, fp, state):
    if not isinstance(state, ConformalVacuum):
        return False
    if fp.m == 0 and abs(fp.xi - 1.0 / 6.0) < 1e-14:
        return True
    return isinstance(bg, Minkowski) and fp.m == 0


def _mode_on_grid(bg, fp, state, k, tau):
    """``chi_k`` on ``tau``; closed forms where available."""
    if isinstance(bg, Minkowski) and isinstance(state, ConformalVacuum):
        om = np.sqrt(k**2 + fp.m**2)
        return np.exp(-1j * om * tau) / np.sqrt(2 * om)
    if _is_conformal_free(bg, fp, state):
        return np.exp(-1j * k * tau) / np.sqrt(2 * k)
    ms = solve_modes(bg, fp, state, [k], tau)
    return ms.chi[0]


def _diagrams_on_grid(grid, bg, fp, state, k, out_idx, mu, lam, order, M):
    """Diagram values on ``out_idx x out_idx`` for one momentum."""
    tau = grid.tau
    chi = _mode_on_grid(bg, fp, state, k, tau)
    prop = ModePropagator(chi)
    w = grid.vertex_weights(2)
    muv = _mu_values(mu, tau)
    res = {"free": prop.plus(out_idx[:, None], out_idx[None, :])}
    if order < 1:
        return res

    plus_cols = [prop.chi * np.conj(prop.chi[j]) for j in out_idx]
    adv_cols = [_adv_column(prop, j) for j in out_idx]

    def ins(m):
        return w * m

    # first order: R mu P + P mu A
    def mu1(c_plus, c_adv):
        return (prop.apply("retarded", ins(muv) * c_plus)
                + prop.apply("plus", ins(muv) * c_adv))

    res["mu1"] = np.stack([mu1(p, q)[out_idx] for p, q in zip(plus_cols, adv_cols)], axis=1)
    if order < 2:
        return res

    def chain(mv):
        def f(p, q):
            r = prop.apply("retarded", ins(mv) * prop.apply("retarded", ins(mv) * p))
            r += prop.apply("retarded", ins(mv) * prop.apply("plus", ins(mv) * q))
            r += prop.apply("plus", ins(mv) * prop.apply("advanced", ins(mv) * q))
            return r
        return f

    f2 = chain(muv)
    res["mu2"] = np.stack([f2(p, q)[out_idx] for p, q in zip(plus_cols, adv_cols)], axis=1)

    if not _is_conformal_free(bg, fp, state) and lam != 0:
        raise DomainError(
            "second-order loop diagrams are implemented for the conformal vacuum "
            "of the massless conformally coupled field only")
    if lam == 0:
        zero = np.zeros((len(out_idx), len(out_idx)), dtype=complex)
        res["bubble"] = zero
        res["sunset"] = zero.copy()
        return res

    # bubble: effective mass shift -3 i lam (h_F - h_minus)
    h = vertex_factor("fish", muv, grid, M) - vertex_factor("minus2", muv, grid, M)
    dmu = -3j * lam * h
    res["bubble"] = np.stack([
        (prop.apply("retarded", ins(dmu) * p) + prop.apply("plus", ins(dmu) * q))[out_idx]
        for p, q in zip(plus_cols, adv_cols)], axis=1)

    # sunset: -6 i lam^2 [R (F^3 - M^3) P + P (F^3 - P^3) A] + 6 lam^2 R P^3 A
    sun = KernelOperator(sunset_kernel(bg, M, k), tau)
    minus3 = KernelOperator(_power_kernel(bg, M, k, 3, "minus"), tau)
    plus3 = KernelOperator(_power_kernel(bg, M, k, 3, "plus"), tau)
    # the kernel operators integrate themselves: their input carries a^2 f only
    dens = bg.a(tau) ** 2 * grid.window(tau)
    cols = []
    for p, q in zip(plus_cols, adv_cols):
        wp, wq = dens * p, dens * q
        s1 = prop.apply("retarded", w * (sun.apply(wp) - minus3.apply(wp)))
        s2 = prop.apply("plus", w * (sun.apply(wq) - plus3.apply(wq)))
        s3 = prop.apply("retarded", w * plus3.apply(wq))
        cols.append((-6j * lam**2 * (s1 + s2) + 6 * lam**2 * s3)[out_idx])
    res["sunset"] = np.stack(cols, axis=1)
    return res


def _adv_column(prop, j):
    """``Advanced(tau, tau_j)`` for all grid ``tau``."""
    c = prop.chi
    n = len(c)
    step = np.where(np.arange(n) < j, 1.0, 0.0)
    step[j] = 0.5
    return 1j * step * (c * np.conj(c[j]) - np.conj(c) * c[j])


def two_point(order, bg: Background, fp: FieldParams, state, grid: ConvolutionGrid,
              tau_out, mu=None, M=None, richardson=True, window_check=False):
    """Interacting Wightman function ``<phi_I phi_I>^`` up to ``order`` in ``lam``.

    Parameters
    ----------
    order : int
        0, 1 or 2.
    bg, fp, state :
        Background, field parameters and free state.
    grid : ConvolutionGrid
        Integration window, spacing and external momenta.
    tau_out : sequence of float
        Output times; must be grid points of both ``grid`` and its coarse
        version when ``richardson`` is set.
    mu : float, callable or None
        Effective mass ``3 lam [w]`` as a constant or a function of ``tau``.
        ``None`` uses the closed form ``-lam R/(96 pi^2)`` of the conformal
        vacuum of the massless conformally coupled field.
    M : float, optional
        Renormalisation scale (default ``fp.M``).
    richardson : bool
        Combine the grid with its every-other-point subgrid to cancel the
        leading ``h^2`` quadrature error.
    window_check : bool
        Repeat on a window enlarged by 50% and record the largest relative
        change per diagram in ``window_sensitivity``.

    Returns
    -------
    DiagramResultSet
        Diagrams ``free`` (order 0), ``mu1`` (order 1), ``mu2``, ``bubble``
        and ``sunset`` (order 2).

    Notes
    -----
    The loop kernels are not causal, so the truncation of the grid at
    ``grid.end`` reaches the output times through them.  Keep the latest
    output time about one time unit (several oscillation periods of the
    external momenta) before ``grid.end``; outputs on the last grid point
    lose hermiticity at the ``1e-6`` level.
    """
    if order not in (0, 1, 2):
        raise DomainError("order must be 0, 1 or 2")
    M = fp.M if M is None else M
    lam = fp.lam
    if mu is None:
        if not _is_conformal_free(bg, fp, state):
            raise DomainError("mu must be supplied for this state")
        mu = lambda tau: -3 * lam * bg.evaluate(tau).ricci / (36 * EIGHT_PI2)
    tau_out = np.atleast_1d(np.asarray(tau_out, dtype=float))
    values = _evaluate(order, bg, fp, state, grid, tau_out, mu, M, richardson)
    sens = {}
    if window_check:
        big = _evaluate(order, bg, fp, state, grid.enlarged(1.5), tau_out, mu, M,
                        richardson)
        for name, v in values.items():
            scale = np.max(np.abs(v))
            sens[name] = float(np.max(np.abs(big[name] - v)) / scale) if scale > 0 else 0.0
    results = {name: DiagramResult(name, DIAGRAM_ORDER[name], tau_out,
                                   np.asarray(grid.k, float), v)
               for name, v in values.items()}
    return DiagramResultSet(results, lam, sens)


def _evaluate(order, bg, fp, state, grid, tau_out, mu, M, richardson):
    def run(g):
        idx = g.index(tau_out)
        per_k = [_diagrams_on_grid(g, bg, fp, state, k, idx, mu, fp.lam, order, M)
                 for k in g.k]
        return {name: np.stack([d[name] for d in per_k], axis=-1) for name in per_k[0]}

    fine = run(grid)
    if not richardson:
        return fine
    coarse = run(grid.coarse())
    out = {}
    for name, v in fine.items():
        out[name] = v if name == "free" else (4 * v - coarse[name]) / 3
    return out


__all__ = [
    "Window", "ConvolutionGrid", "ModePropagator", "KernelOperator",
    "conv_temporal", "conv_spatial", "vertex_factor", "DiagramResult",
    "DiagramResultSet", "two_point",
]
