"""Forest combinatorics for nested pole subtraction in multigraph amplitudes.

A :class:`DiagramGraph` has vertices ``1..n`` and line multiplicities
``l_ij``.  The scaling degree of the amplitude towards the thin diagonal of
a vertex subset ``I`` is ``sum 2 l_ij`` over pairs inside ``I``; the subset
needs a subtraction when that reaches the codimension ``4 (|I| - 1)``.

Divergent forests are the families of divergent subsets that are pairwise
nested or disjoint.  :func:`schedule` orders the subtractions of one forest
inner before outer, and :func:`toy_evaluate` runs the whole sum on an exact
rational toy backend (see :class:`ToyModel`).
"""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy as sp

from .errors import DomainError

Subset = frozenset


def _key(subset):
    return (len(subset), tuple(sorted(subset)))


def subset_label(subset):
    return "".join(str(v) for v in sorted(subset)) if max(subset) < 10 else \
        "{" + ",".join(str(v) for v in sorted(subset)) + "}"


@dataclass(frozen=True)
class DiagramGraph:
    """Multigraph without tadpoles on vertices ``1..n``.

    ``lines`` maps ordered pairs ``(i, j)`` with ``i < j`` to positive
    multiplicities; absent pairs have multiplicity zero.
    """

    n: int
    lines: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("a graph needs at least one vertex")
        clean = {}
        for (i, j), m in self.lines.items():
            if i == j:
                raise DomainError(f"tadpole at vertex {i}")
            i, j = min(i, j), max(i, j)
            if not (1 <= i and j <= self.n):
                raise DomainError(f"edge ({i}, {j}) outside vertices 1..{self.n}")
            if m < 0 or int(m) != m:
                raise DomainError("multiplicities must be non-negative integers")
            if m:
                clean[(i, j)] = clean.get((i, j), 0) + int(m)
        object.__setattr__(self, "lines", clean)

    @classmethod
    def from_edges(cls, n, edges):
        """From ``(i, j, multiplicity)`` triples."""
        lines = {}
        for i, j, m in edges:
            key = (min(i, j), max(i, j))
            lines[key] = lines.get(key, 0) + m
        return cls(n, lines)

    @classmethod
    def parse(cls, text, n=None):
        """Parse the edge-list format.

        One ``i j multiplicity`` triple per line; ``#`` starts a comment and
        an optional ``vertices N`` line fixes the vertex count (default:
        the largest index used).
        """
        edges = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "vertices" and len(parts) == 2:
                n = int(parts[1])
                continue
            if len(parts) != 3:
                raise DomainError(f"line {lineno}: expected 'i j multiplicity'")
            try:
                i, j, m = (int(p) for p in parts)
            except ValueError as exc:
                raise DomainError(f"line {lineno}: {exc}") from None
            edges.append((i, j, m))
        if n is None:
            n = max((max(i, j) for i, j, _ in edges), default=1)
        return cls.from_edges(n, edges)

    def l(self, i, j):
        return self.lines.get((min(i, j), max(i, j)), 0)

    @property
    def vertices(self):
        return tuple(range(1, self.n + 1))

    def edges_within(self, subset):
        return tuple(e for e in sorted(self.lines) if e[0] in subset and e[1] in subset)

    def is_connected(self, subset):
        """Whether the subgraph induced on ``subset`` is connected with an edge."""
        subset = set(subset)
        edges = self.edges_within(subset)
        if not edges:
            return False
        start = next(iter(subset))
        seen, todo = {start}, [start]
        while todo:
            v = todo.pop()
            for i, j in edges:
                w = j if i == v else i if j == v else None
                if w is not None and w not in seen:
                    seen.add(w)
                    todo.append(w)
        return seen == subset

    def to_edge_list(self):
        rows = [f"vertices {self.n}"]
        rows += [f"{i} {j} {m}" for (i, j), m in sorted(self.lines.items())]
        return "\n".join(rows) + "\n"


def _check_subset(g, subset):
    subset = Subset(subset)
    if len(subset) < 2:
        raise DomainError("subsets need at least two vertices")
    if not subset <= set(g.vertices):
        raise DomainError(f"subset {sorted(subset)} is not inside 1..{g.n}")
    return subset


def scaling_degree(g: DiagramGraph, subset) -> int:
    """``sum_{i<j in I} 2 l_ij``."""
    subset = _check_subset(g, subset)
    return sum(2 * g.l(i, j) for i, j in itertools.combinations(sorted(subset), 2))


def is_divergent(g: DiagramGraph, subset) -> bool:
    """``scaling_degree >= 4 (|I| - 1)``."""
    subset = _check_subset(g, subset)
    return scaling_degree(g, subset) >= 4 * (len(subset) - 1)


def is_candidate(g: DiagramGraph, subset) -> bool:
    """Divergence candidate: connected induced subgraph with a line, divergent.

    Disconnected or edgeless subsets are never subtracted; this is the only
    place the restriction lives.
    """
    subset = Subset(subset)
    return len(subset) >= 2 and g.is_connected(subset) and is_divergent(g, subset)


@functools.lru_cache(maxsize=None)
def _vertex_masks(n):
    """Bitmasks of all vertex subsets with at least two members."""
    out = []
    for mask in range(1, 1 << n):
        members = [v for v in range(n) if mask >> v & 1]
        if len(members) >= 2:
            out.append((mask, members))
    return tuple(out)


def divergent_subsets(g: DiagramGraph):
    # vertex v is bit v - 1; same criterion as is_candidate
    adj = [0] * g.n
    for (i, j), m in g.lines.items():
        if m:
            adj[i - 1] |= 1 << (j - 1)
            adj[j - 1] |= 1 << (i - 1)
    weighted = [((1 << (i - 1)) | (1 << (j - 1)), 2 * m) for (i, j), m in g.lines.items() if m]
    out = []
    for mask, members in _vertex_masks(g.n):
        sd = sum(w for pm, w in weighted if mask & pm == pm)
        if sd < 4 * (len(members) - 1):
            continue
        seen = reach = 1 << members[0]
        while reach:
            v = reach.bit_length() - 1
            reach &= ~(1 << v)
            new = adj[v] & mask & ~seen
            seen |= new
            reach |= new
        if seen == mask:
            out.append(Subset(v + 1 for v in members))
    return sorted(out, key=_key)


def compatible(a, b) -> bool:
    return not (a & b) or a <= b or b <= a


@dataclass(frozen=True)
class Forest:
    """Nested-or-disjoint family of vertex subsets, stored in canonical order."""

    subsets: tuple = ()

    def __post_init__(self):
        subs = tuple(sorted((Subset(s) for s in self.subsets), key=_key))
        if len(set(subs)) != len(subs):
            raise DomainError("forest has a repeated subset")
        for a, b in itertools.combinations(subs, 2):
            if not compatible(a, b):
                raise DomainError(f"subsets {sorted(a)} and {sorted(b)} overlap")
        object.__setattr__(self, "subsets", subs)

    @classmethod
    def _trusted(cls, subsets):
        """Compatible subsets already in canonical order; no validation."""
        f = object.__new__(cls)
        object.__setattr__(f, "subsets", tuple(subsets))
        return f

    def __len__(self):
        return len(self.subsets)

    def sort_key(self):
        return (len(self.subsets), tuple(tuple(sorted(s)) for s in self.subsets))

    def labels(self):
        return [subset_label(s) for s in self.subsets]

    def as_lists(self):
        return [sorted(s) for s in self.subsets]


def divergent_forests(g: DiagramGraph):
    """All forests of divergent candidate subsets, the empty forest included,
    in lexicographic order (by size, then by the sorted subsets)."""
    return list(_forests_of(tuple(divergent_subsets(g))))


@functools.lru_cache(maxsize=4096)
def _forests_of(cands):
    """Forests of a candidate family; depends on nothing else in the graph."""
    masks = [sum(1 << (v - 1) for v in c) for c in cands]
    # bit j of fits[i] is set when candidates i and j are compatible
    fits = [sum(1 << j for j, b in enumerate(masks) if not a & b or a & b in (a, b))
            for a in masks]
    # forests compare by their sorted subsets taken as tuples
    order = sorted(range(len(cands)), key=lambda i: tuple(sorted(cands[i])))
    rank = [0] * len(cands)
    for r, i in enumerate(order):
        rank[i] = r
    out = []
    stack = [(0, (), (1 << len(cands)) - 1)]
    while stack:
        start, chosen, allowed = stack.pop()
        out.append(((len(chosen), tuple(rank[i] for i in chosen)), chosen))
        allowed >>= start
        idx = start
        while allowed:
            if allowed & 1:
                stack.append((idx + 1, chosen + (idx,), (allowed << idx) & fits[idx]))
            allowed >>= 1
            idx += 1
    out.sort(key=lambda item: item[0])
    # candidates are in canonical order, so every chosen tuple is too
    return tuple(Forest._trusted([cands[i] for i in chosen]) for _, chosen in out)


@dataclass(frozen=True)
class SubtractionSchedule:
    """Ordered principal-part subtractions for one forest.

    ``steps[m]`` is the subset whose ``R`` is applied ``m``-th and
    ``identifications[m]`` the lines whose regulators are set equal to the
    common regulator of that subset at that step.
    """

    forest: Forest
    steps: tuple
    identifications: tuple

    @property
    def is_identity(self):
        return not self.steps

    def labels(self):
        return [f"R_{subset_label(s)}" for s in self.steps]


def schedule(g: DiagramGraph, forest: Forest) -> SubtractionSchedule:
    """Inner before outer; disjoint subsets in lexicographic order."""
    steps = tuple(sorted(forest.subsets, key=_key))
    idents = tuple(g.edges_within(s) for s in steps)
    return SubtractionSchedule(forest, steps, idents)


def forests_to_json(g: DiagramGraph, forests=None, indent=2):
    forests = divergent_forests(g) if forests is None else forests
    doc = {
        "vertices": g.n,
        "lines": [[i, j, m] for (i, j), m in sorted(g.lines.items())],
        "divergent_subsets": [sorted(s) for s in divergent_subsets(g)],
        "count": len(forests),
        "forests": [{"subsets": f.as_lists(),
                     "schedule": schedule(g, f).labels()} for f in forests],
    }
    return json.dumps(doc, indent=indent)


# --------------------------------------------------------------------------
# toy backend


def _edge_symbol(e):
    return sp.Symbol(f"alpha_{e[0]}_{e[1]}")


def _group_symbol(subset):
    return sp.Symbol("alpha_I" + "_".join(str(v) for v in sorted(subset)))


@dataclass(frozen=True)
class ToyModel:
    """Exact rational toy amplitude with one pole per divergent subset.

    Every line ``e`` carries a regulator ``alpha_e`` and a positive weight
    ``c_e``.  A divergent subset ``K`` contributes the radial integral
    ``int_0^1 rho^(ell_K - 1) d rho = 1/ell_K`` with
    ``ell_K = sum_{e in K} l_e c_e alpha_e``, and the test-function moments
    enter through a numerator with mixed terms of every order:

        f = p0 prod_e (1 + b_e alpha_e + q_e alpha_e^2) / prod_K ell_K.
    """

    g: DiagramGraph
    weights: dict
    p0: Fraction
    linear: dict
    quadratic: dict

    @classmethod
    def random(cls, g, rng: np.random.Generator):
        edges = sorted(g.lines)
        frac = lambda lo, hi: Fraction(int(rng.integers(lo, hi)), int(rng.integers(1, 5)))
        return cls(g, {e: frac(1, 6) for e in edges}, frac(1, 9),
                   {e: frac(-5, 6) for e in edges}, {e: frac(-5, 6) for e in edges})

    def poles(self):
        return divergent_subsets(self.g)

    def linear_form(self, subset):
        return sum(self.g.l(*e) * sp.Rational(self.weights[e]) * _edge_symbol(e)
                   for e in self.g.edges_within(subset))

    def expression(self):
        num = sp.Rational(self.p0)
        for e in sorted(self.g.lines):
            x = _edge_symbol(e)
            num *= 1 + sp.Rational(self.linear[e]) * x + sp.Rational(self.quadratic[e]) * x**2
        den = sp.Integer(1)
        for K in self.poles():
            den *= self.linear_form(K)
        return num / den


@dataclass(frozen=True)
class ToyResult:
    """Laurent data of the forest sum after all regulators are set equal.

    ``finite`` is the value at zero regulator; ``poles[k]`` the coefficient
    of ``alpha^-k`` left over (empty when the sum is finite).
    """

    finite: sp.Expr
    poles: dict

    @property
    def value(self):
        return complex(sp.N(self.finite, 30))


def _laurent_coefficients(f, eps, upto=0):
    """Coefficients of ``eps^k`` for ``k <= upto`` of a rational function.

    ``f`` is an element of a sparse rational function field and ``eps`` one
    of its generators.  Returns ``(order, coeffs)`` with ``coeffs[k]`` for
    ``-order <= k <= upto``, themselves field elements.
    """
    K = f.field
    i = K.gens.index(eps)
    num, den = f.numer, f.denom
    order = next(d for d in range(den.degree(i) + 1) if den.coeff_wrt(i, d))
    dc = [K(den.coeff_wrt(i, order + j)) for j in range(den.degree(i) - order + 1)]
    q = []
    for m in range(max(order + upto + 1, 0)):
        acc = K(num.coeff_wrt(i, m)) if m <= num.degree(i) else K.zero
        for j in range(1, min(m, len(dc) - 1) + 1):
            acc -= dc[j] * q[m - j]
        q.append(acc / dc[0])
    return order, {k - order: c for k, c in enumerate(q)}


def _principal_part(f, eps):
    order, co = _laurent_coefficients(f, eps, upto=-1)
    return sum((co[k] * eps**k for k in co if k < 0), f.field.zero)


def _substitute(f, subs):
    """Replace generators of ``f`` by other generators."""
    K = f.field
    pairs = [(K.ring.gens[K.gens.index(a)], K.ring.gens[K.gens.index(b)]) for a, b in subs.items()]
    if not pairs:
        return f
    return f.field(f.numer.compose(pairs)) / f.field(f.denom.compose(pairs))


def _apply_schedule(f, g, sched: SubtractionSchedule, gen):
    """``prod R_I f`` in schedule order.

    Before ``R_J`` every regulator living inside ``J`` (line regulators and
    the common regulators of subsets already processed inside ``J``) is set
    to the common regulator of ``J``.
    """
    done = []
    for subset in sched.steps:
        eps = gen[_group_symbol(subset)]
        subs = {gen[_edge_symbol(e)]: eps for e in g.edges_within(subset)}
        subs.update({gen[_group_symbol(s)]: eps for s in done if s <= subset})
        f = -_principal_part(_substitute(f, subs), eps)
        done.append(subset)
    return f


def toy_evaluate(g: DiagramGraph, schedules, model: ToyModel) -> ToyResult:
    """Sum of the scheduled subtractions with all regulators finally equal.

    Each term is computed with its own regulators; only after summing over
    the forests are all regulators identified and the limit taken.
    """
    expr = model.expression()
    x = sp.Symbol("alpha_all")
    symbols = sorted(expr.free_symbols, key=str)
    symbols += sorted({_group_symbol(s) for sched in schedules for s in sched.steps}, key=str)
    K, *gens = sp.field(symbols + [x], sp.QQ)
    gen = dict(zip(symbols + [x], gens))
    f = K.from_expr(expr)
    total = K.zero
    for sched in schedules:
        total += _apply_schedule(f, g, sched, gen)
    xe = gen[x]
    total = _substitute(total, {v: xe for v in gens if v != xe})
    ix = K.gens.index(xe)
    if total.numer.degree(ix) <= 0 and total.denom.degree(ix) <= 0:
        return ToyResult(total.as_expr(), {})
    order, co = _laurent_coefficients(total, xe, upto=0)
    poles = {-k: co[k].as_expr() for k in co if k < 0 and co[k]}
    return ToyResult(co[0].as_expr() if 0 in co else sp.Integer(0), poles)


def forest_sum(g: DiagramGraph, model: ToyModel | None = None, seed=0) -> ToyResult:
    """:func:`toy_evaluate` over all divergent forests of ``g``."""
    model = model or ToyModel.random(g, np.random.default_rng(seed))
    return toy_evaluate(g, [schedule(g, f) for f in divergent_forests(g)], model)


__all__ = [
    "DiagramGraph", "Forest", "SubtractionSchedule", "ToyModel", "ToyResult",
    "scaling_degree", "is_divergent", "is_candidate", "divergent_subsets",
    "divergent_forests", "schedule", "toy_evaluate", "forest_sum",
    "forests_to_json", "compatible",
]
