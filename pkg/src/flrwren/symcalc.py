"""Exact calculus for flat-space distributions built from powers of sigma.

Expressions are finite sums of

* sigma terms ``c * Box^p (L^n / sigma^s)`` with ``L = log(M^2 sigma)`` and
  an exponent ``s`` that may be affine in the regularisation parameter
  ``alpha``.  Regularised terms (``s`` depending on ``alpha``) carry the
  factor ``M^{-2 alpha}``.
* delta terms ``c * Box^q delta``.

Here ``sigma`` is the Feynman-regularised half squared distance in
Minkowski space (signature ``-+++``) or, with ``bar=True``, its complex
conjugate.  Coefficients are exact sympy expressions in ``alpha`` and the
scale-change symbol ``ell = log(M'^2/M^2)``.

Flat-space rules used throughout::

    Box sigma = 4,  sigma_a sigma^a = 2 sigma,  Box F(sigma) = 2 sigma F'' + 4 F'
    Box (1/sigma) = 8 pi^2 i delta          (conjugate: -8 pi^2 i delta)
    sigma delta = 0,  sigma Box delta = 4 delta
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import sympy as sp

from .errors import UnsupportedExpression

alpha = sp.Symbol("alpha")
ell = sp.Symbol("ell", real=True)
_L = sp.Symbol("L")

MAX_LOG = 3
MAX_BOX = 2


@dataclass(frozen=True)
class SigmaTerm:
    """``coeff * Box^box (L^n sigma^-s)``, times ``M^{-2 alpha}`` if ``s`` has alpha."""

    coeff: sp.Expr
    s: sp.Expr
    n: int = 0
    box: int = 0

    @property
    def regularised(self):
        return sp.sympify(self.s).has(alpha)

    def key(self):
        return (sp.srepr(sp.sympify(self.s)), self.n, self.box)


@dataclass(frozen=True)
class DeltaTerm:
    """``coeff * Box^op delta``."""

    coeff: sp.Expr
    op: int = 0


@dataclass(frozen=True)
class SigmaExpr:
    terms: tuple = ()
    deltas: tuple = ()
    bar: bool = False

    # construction -------------------------------------------------------

    @classmethod
    def power(cls, s, n=0, coeff=1, box=0, bar=False):
        """``coeff * Box^box (L^n / sigma^s)`` as an expression."""
        return cls((SigmaTerm(sp.sympify(coeff), sp.sympify(s), n, box),),
                   bar=bar).normalised()

    @classmethod
    def delta(cls, coeff=1, op=0, bar=False):
        return cls((), (DeltaTerm(sp.sympify(coeff), op),), bar).normalised()

    @classmethod
    def zero(cls, bar=False):
        return cls((), (), bar)

    # arithmetic ---------------------------------------------------------

    def _check_bar(self, other):
        if self.bar != other.bar and (self.terms and other.terms):
            raise UnsupportedExpression("cannot mix sigma and its conjugate")
        return self.bar if self.terms else other.bar

    def __add__(self, other):
        bar = self._check_bar(other)
        return SigmaExpr(self.terms + other.terms, self.deltas + other.deltas,
                         bar).normalised()

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = sp.sympify(c)
        return SigmaExpr(tuple(replace(t, coeff=c * t.coeff) for t in self.terms),
                         tuple(replace(d, coeff=c * d.coeff) for d in self.deltas),
                         self.bar).normalised()

    __rmul__ = scale

    def __eq__(self, other):
        if not isinstance(other, SigmaExpr):
            return NotImplemented
        diff = self - other
        return not diff.terms and not diff.deltas

    def __hash__(self):
        return hash((self.terms, self.deltas, self.bar))

    @property
    def is_local(self):
        return not self.terms

    # normal form ----------------------------------------------------------

    @property
    def delta_unit(self):
        return -8 * sp.pi**2 * sp.I if self.bar else 8 * sp.pi**2 * sp.I

    def normalised(self) -> "SigmaExpr":
        """Canonical form: pointwise boxes evaluated, ``Box^p(1/sigma)`` turned
        into deltas, like terms merged, zero terms dropped."""
        sig = {}
        dl = {}
        todo = list(self.terms)
        while todo:
            t = todo.pop()
            c = sp.sympify(t.coeff)
            if c == 0:
                continue
            if t.n > MAX_LOG or t.n < 0:
                raise UnsupportedExpression(f"log power {t.n} outside 0..{MAX_LOG}")
            s = sp.sympify(t.s)
            if not t.regularised and t.box > 0:
                if s == 1 and t.n == 0:
                    op = t.box - 1
                    dl[op] = dl.get(op, 0) + c * self.delta_unit
                    continue
                if s == 0:
                    todo.extend(_box_log_power(c, t.n, t.box))
                    continue
                if s != 1:
                    raise UnsupportedExpression(
                        "Box of a pointwise power beyond 1/sigma is not a distribution")
            if t.box > MAX_BOX + 1 or (s - 3).subs(alpha, 0) > 0:
                raise UnsupportedExpression("expression outside the supported grading")
            key = t.key()
            if key in sig:
                sig[key] = replace(sig[key], coeff=sig[key].coeff + c)
            else:
                sig[key] = replace(t, coeff=c)
        for d in self.deltas:
            if d.op > MAX_BOX:
                raise UnsupportedExpression("delta operators above Box^2")
            dl[d.op] = dl.get(d.op, 0) + sp.sympify(d.coeff)
        terms = []
        for t in sig.values():
            c = sp.cancel(sp.expand(t.coeff))
            if c != 0:
                terms.append(replace(t, coeff=c))
        deltas = []
        for op in sorted(dl):
            c = sp.cancel(sp.expand(dl[op]))
            if c != 0:
                deltas.append(DeltaTerm(c, op))
        terms.sort(key=lambda t: (t.box, t.n, str(t.s)))
        return SigmaExpr(tuple(terms), tuple(deltas), self.bar)

    # output ---------------------------------------------------------------

    def __str__(self):
        parts = []
        for t in self.terms:
            inner = (f"L^{t.n}" if t.n > 1 else "L" if t.n == 1 else "1")
            inner = f"{inner}/sigma^({t.s})" if t.s != 0 else inner
            if t.regularised:
                inner = f"M^(-2 alpha) {inner}"
            op = f"Box^{t.box} " if t.box > 1 else "Box " if t.box == 1 else ""
            parts.append(f"({t.coeff}) {op}[{inner}]")
        for d in self.deltas:
            op = f"Box^{d.op} " if d.op > 1 else "Box " if d.op == 1 else ""
            parts.append(f"({d.coeff}) {op}delta")
        body = " + ".join(parts) if parts else "0"
        return body + ("  [conjugate sigma]" if self.bar else "")

    def to_dict(self):
        return {
            "bar": self.bar,
            "terms": [{"coeff": str(t.coeff), "s": str(t.s), "n": t.n, "box": t.box}
                      for t in self.terms],
            "deltas": [{"coeff": str(d.coeff), "op": d.op} for d in self.deltas],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _box_log_power(c, n, box):
    """``c Box^box (L^n)``: one Box evaluated pointwise.

    ``Box L^n = (2 n (n-1) L^{n-2} + 2 n L^{n-1}) / sigma``.
    """
    if n == 0:
        return []
    out = [SigmaTerm(c * 2 * n, 1, n - 1, box - 1)]
    if n >= 2:
        out.append(SigmaTerm(c * 2 * n * (n - 1), 1, n - 2, box - 1))
    return out


# --------------------------------------------------------------------------
# operators


def box_apply(e: SigmaExpr) -> SigmaExpr:
    """Apply the flat d'Alembertian.

    Regularised powers are moved up one step through
    ``Box sigma^-(n+alpha) = 2 (n+alpha)(n-1+alpha) sigma^-(n+1+alpha)`` when
    pointwise; otherwise the box is kept as an operator.
    """
    terms = []
    for t in e.terms:
        if t.regularised and t.box == 0 and t.n == 0:
            s = sp.sympify(t.s)
            m = s - 1
            terms.append(SigmaTerm(t.coeff * 2 * s * m, s + 1, 0, 0))
        else:
            terms.append(replace(t, box=t.box + 1))
    deltas = tuple(replace(d, op=d.op + 1) for d in e.deltas)
    return SigmaExpr(tuple(terms), deltas, e.bar).normalised()


def euler_apply(e: SigmaExpr, n_points=2) -> SigmaExpr:
    """Adjoint generalised Euler operator ``E_1^dagger e = -(4 + 2 sigma d/dsigma) e``.

    Only pointwise terms of a single ``sigma`` (two points) are supported.
    """
    if n_points != 2:
        raise UnsupportedExpression("Euler operator implemented for two points only")
    if e.deltas:
        raise UnsupportedExpression("Euler operator on delta terms is not supported")
    terms = []
    for t in e.terms:
        if t.box:
            raise UnsupportedExpression("Euler operator needs pointwise terms")
        s = sp.sympify(t.s)
        terms.append(SigmaTerm(-(4 - 2 * s) * t.coeff, s, t.n, 0))
        if t.n:
            terms.append(SigmaTerm(-2 * t.n * t.coeff, s, t.n - 1, 0))
    return SigmaExpr(tuple(terms), (), e.bar).normalised()


def multiply_sigma(e: SigmaExpr) -> SigmaExpr:
    """``sigma * e`` using

    ``sigma Box F = Box(sigma F) - 4 F - 4 sigma F'`` and
    ``sigma Box^2 F = Box^2(sigma F) - 4 Box F - 4 Box(2 sigma F')``
    together with ``sigma delta = 0`` and ``sigma Box delta = 4 delta``.
    """
    out = SigmaExpr.zero(e.bar)
    for t in e.terms:
        if t.regularised:
            raise UnsupportedExpression("multiply regularised terms before expanding")
        s = sp.sympify(t.s)
        F = SigmaExpr((SigmaTerm(t.coeff, s, t.n, 0),), (), e.bar)
        sF = SigmaExpr((SigmaTerm(t.coeff, s - 1, t.n, 0),), (), e.bar)
        # sigma F' = (n L^{n-1} - s L^n) sigma^-s
        dF = SigmaExpr((SigmaTerm(-s * t.coeff, s, t.n, 0),)
                       + ((SigmaTerm(t.n * t.coeff, s, t.n - 1, 0),) if t.n else ()),
                       (), e.bar)
        if t.box == 0:
            out = out + sF
        elif t.box == 1:
            out = out + box_apply(sF) - 4 * F - 4 * dF
        elif t.box == 2:
            out = out + box_apply(box_apply(sF)) - 4 * box_apply(F) - 8 * box_apply(dF)
        else:
            raise UnsupportedExpression("sigma times Box^3 is not supported")
    for d in e.deltas:
        if d.op == 0:
            continue
        if d.op == 1:
            out = out + SigmaExpr.delta(4 * d.coeff, 0, e.bar)
        else:
            # sigma Box^2 delta = Box(sigma Box delta) - 4 Box delta
            #                    - 2 x.d(Box delta) = 12 Box delta
            out = out + SigmaExpr.delta(12 * d.coeff, 1, e.bar)
    return out.normalised()


def change_scale(e: SigmaExpr) -> SigmaExpr:
    """Replace ``M`` by ``M'``: ``L -> L + ell`` with ``ell = log(M'^2/M^2)``.

    Only subtracted (alpha-free) expressions are accepted.
    """
    out = []
    for t in e.terms:
        if t.regularised:
            raise UnsupportedExpression("change the scale after subtraction")
        for j in range(t.n + 1):
            out.append(SigmaTerm(t.coeff * sp.binomial(t.n, j) * ell ** (t.n - j),
                                 t.s, j, t.box))
    return SigmaExpr(tuple(out), e.deltas, e.bar).normalised()


def conjugate(e: SigmaExpr) -> SigmaExpr:
    """Formal conjugation ``sigma -> conj(sigma)``, ``i -> -i``."""
    conj = lambda c: sp.sympify(c).subs(sp.I, -sp.I)
    return SigmaExpr(tuple(replace(t, coeff=conj(t.coeff)) for t in e.terms),
                     tuple(replace(d, coeff=conj(d.coeff)) for d in e.deltas),
                     not e.bar).normalised()


# --------------------------------------------------------------------------
# Laurent expansion and minimal subtraction


@dataclass(frozen=True)
class LaurentResult:
    """``principal`` has coefficients containing ``alpha^-1`` and ``alpha^-2``."""

    principal: SigmaExpr
    finite: SigmaExpr
    order: int


def _recursion_factor(s0):
    """``c(alpha)`` with ``sigma^-(s0+alpha) = c Box^(s0-1) sigma^-(1+alpha)``."""
    c = sp.Integer(1)
    for m in range(1, s0):
        c /= 2 * (m + alpha) * (m - 1 + alpha)
    return c


def _series_mul(a, b, top):
    out = {}
    for i, ci in a.items():
        for j, cj in b.items():
            if i + j <= top:
                out[i + j] = out.get(i + j, 0) + ci * cj
    return out


def _generator_series(s0, n, top):
    """Laurent coefficients of ``(-d/dalpha)^n [c(alpha) e^{-alpha L}]`` up to
    ``alpha^top``, as a dict ``power -> polynomial in L``."""
    need = top + n + 1
    ser = {j: (-_L) ** j / sp.factorial(j) for j in range(need + 1)}
    for m in range(1, s0):
        # 1/(2 (m + alpha) (m - 1 + alpha)) as a truncated series
        f1 = {j: sp.Rational((-1) ** j, m ** (j + 1)) for j in range(need + 2)}
        if m == 1:
            f2 = {-1: sp.Integer(1)}
        else:
            f2 = {j: sp.Rational((-1) ** j, (m - 1) ** (j + 1)) for j in range(need + 2)}
        fac = {j: c / 2 for j, c in _series_mul(f1, f2, need).items()}
        ser = _series_mul(ser, fac, need)
    for _ in range(n):
        ser = {k - 1: -k * c for k, c in ser.items() if k != 0}
    return {k: sp.expand(c) for k, c in ser.items() if k <= top}


def _coeff_series(coeff, top):
    coeff = sp.sympify(coeff)
    if not coeff.has(alpha):
        return {0: coeff}
    ser = sp.expand(sp.series(coeff, alpha, 0, top + 4).removeO())
    low = -6
    return {k: ser.coeff(alpha, k) for k in range(low, top + 4)
            if ser.coeff(alpha, k) != 0}


def laurent(e: SigmaExpr) -> LaurentResult:
    """Exact Laurent expansion in ``alpha`` up to the constant term.

    A regularised term ``c(alpha) Box^p (L^n M^{-2alpha} sigma^-(s0+alpha))`` is
    written as ``c(alpha) (-d/dalpha)^n [r(alpha) e^{-alpha L}]`` applied as
    ``Box^(p+s0-1)`` to ``1/sigma``, where ``r`` is the recursion factor.

    Raises
    ------
    UnsupportedExpression
        For pole orders above two or a non-local principal part.
    """
    principal = SigmaExpr.zero(e.bar)
    finite = SigmaExpr((), e.deltas, e.bar)
    order = 0
    for t in e.terms:
        if not t.regularised:
            finite = finite + SigmaExpr((t,), (), e.bar)
            continue
        s = sp.sympify(t.s)
        s0 = s.subs(alpha, 0)
        if sp.simplify(s - s0 - alpha) != 0 or not s0.is_integer or s0 < 1:
            raise UnsupportedExpression(f"regularised exponent {s} not of the form n + alpha")
        s0 = int(s0)
        cser = _coeff_series(t.coeff, 0)
        gser = _generator_series(s0, t.n, 0 - min(cser))
        ser = {}
        for i, ci in cser.items():
            for j, cj in gser.items():
                if i + j <= 0:
                    ser[i + j] = ser.get(i + j, 0) + ci * cj
        ser = {k: sp.expand(c) for k, c in ser.items()}
        if any(ser[k] != 0 for k in ser if k < -2):
            raise UnsupportedExpression("pole order above two")
        box = t.box + s0 - 1
        for k in (-2, -1, 0):
            poly = sp.Poly(ser.get(k, sp.Integer(0)), _L)
            for (j,), cj in poly.terms():
                if cj == 0:
                    continue
                if k < 0:
                    order = max(order, -k)
                    principal = principal + SigmaExpr(
                        (SigmaTerm(cj * alpha**k, 1, j, box),), (), e.bar)
                else:
                    finite = finite + SigmaExpr((SigmaTerm(cj, 1, j, box),), (), e.bar)
    if not principal.is_local:
        raise UnsupportedExpression("principal part is not local")
    return LaurentResult(principal, finite, order)


def minimal_subtract(e: SigmaExpr) -> SigmaExpr:
    """Finite part at ``alpha = 0`` after removing the principal part."""
    return laurent(e).finite


def regularised_power(s0, log_power=0, bar=False):
    """``L^n M^{-2 alpha} sigma^-(s0 + alpha)``; ``log_power = 1`` is minus the
    alpha-derivative of the plain power."""
    return SigmaExpr.power(s0 + alpha, log_power, bar=bar)


def ms_power(s0, log_power=0, bar=False):
    """Renormalised ``(L^n / sigma^s0)_ms``."""
    return minimal_subtract(regularised_power(s0, log_power, bar))


def delta_coefficient(e: SigmaExpr, op=0):
    """Coefficient of ``Box^op delta`` in ``e`` (zero if absent)."""
    for d in e.deltas:
        if d.op == op:
            return d.coeff
    return sp.Integer(0)


# --------------------------------------------------------------------------
# identity corpus


@dataclass(frozen=True)
class CorpusCheck:
    name: str
    passed: bool
    lhs: str
    rhs: str

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "lhs": self.lhs,
                "rhs": self.rhs}


def _check(name, lhs, rhs):
    if isinstance(lhs, SigmaExpr):
        ok = lhs == rhs
    else:
        ok = sp.simplify(sp.sympify(lhs) - sp.sympify(rhs)) == 0
    return CorpusCheck(name, bool(ok), str(lhs), str(rhs))


def identity_corpus():
    """Exact identities every build must reproduce.

    The expected sides are written in their literal ``Box``-form and only
    compared after normalisation, so each check exercises the normal form
    as well as the Laurent machinery.
    """
    P = SigmaExpr.power
    half, quarter = sp.Rational(1, 2), sp.Rational(1, 4)
    eight_pi2 = 8 * sp.pi**2
    ms2, ms2log, ms3 = ms_power(2), ms_power(2, 1), ms_power(3)
    checks = [
        _check("ms(1/sigma^2)", ms2, P(1, 1, -half, box=1) + P(1, 0, -half, box=1)),
        _check("ms(L/sigma^2)", ms2log,
               P(1, 2, -quarter, box=1) + P(1, 1, -half, box=1) + P(1, 0, -half, box=1)),
        _check("ms(1/sigma^3)", ms3,
               P(1, 1, -sp.Rational(1, 8), box=2) + P(1, 0, -sp.Rational(5, 16), box=2)),
        _check("Box(1/sigma)", box_apply(P(1)), SigmaExpr.delta(8 * sp.pi**2 * sp.I)),
        _check("Box(1/conj sigma)", box_apply(P(1, bar=True)),
               SigmaExpr.delta(-8 * sp.pi**2 * sp.I, bar=True)),
        _check("sigma ms(1/sigma^3)", multiply_sigma(ms3), ms2),
    ]
    # the alpha-derivative line: d/dalpha = -(L sigma^-(2+alpha) M^-2alpha)
    lr = laurent(regularised_power(2, 1))
    deriv = -(lr.principal + lr.finite)
    expected = (P(1, 0, -half / alpha**2, box=1) + P(1, 2, quarter, box=1)
                + P(1, 1, half, box=1) + P(1, 0, half, box=1))
    checks.append(_check("d/dalpha Laurent line", deriv, expected))
    checks.append(_check("pole order of the derivative line", lr.order, 2))
    lp = laurent(regularised_power(2))
    checks.append(_check("principal part of 1/sigma^(2+alpha)", lp.principal,
                         P(1, 0, half / alpha, box=1)))
    checks.append(_check("M-flow of ms(1/sigma^2)", change_scale(ms2) - ms2,
                         SigmaExpr.delta(-4 * sp.pi**2 * sp.I * ell)))
    checks.append(_check("conjugation commutes with ms",
                         minimal_subtract(conjugate(regularised_power(2))),
                         conjugate(ms2)))
    checks.append(_check("Box commutes with ms",
                         box_apply(ms2log), minimal_subtract(box_apply(regularised_power(2, 1)))))
    checks.append(_check("fish local coefficient",
                         delta_coefficient(ms2.scale(1 / eight_pi2**2)),
                         -sp.I / (16 * sp.pi**2)))
    # rescaling M^2 -> 8 pi^2 M^2 is undone by the explicit delta counterterm
    rescaled = change_scale(ms2).scale(1 / eight_pi2**2)
    fish_h = delta_coefficient(rescaled).subs(ell, sp.log(eight_pi2))
    fish_h += sp.I * sp.log(eight_pi2) / (16 * sp.pi**2)
    checks.append(_check("fish local coefficient, rescaled M", fish_h,
                         -sp.I / (16 * sp.pi**2)))
    checks.append(_check("sunset local coefficient",
                         delta_coefficient(ms3.scale(1 / eight_pi2**3), 1),
                         -15 * sp.I / (48 * eight_pi2**2)))
    return checks


__all__ = [
    "alpha", "ell", "SigmaTerm", "DeltaTerm", "SigmaExpr", "LaurentResult",
    "CorpusCheck", "box_apply", "euler_apply", "multiply_sigma", "change_scale",
    "conjugate", "laurent", "minimal_subtract", "regularised_power", "ms_power",
    "delta_coefficient", "identity_corpus",
]
