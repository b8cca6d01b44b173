"""Symbols a(x, xi) with order tracking, seminorms, Poisson brackets and the
truncated composition law.

A symbol evaluates, for each frequency argument xi in R^d, to its values on
the collocation grid.  Symbols are closures over whatever state fields they
were built from: nothing is cached across state updates, re-evaluation after
a background change is always explicit.  Polynomial-in-xi symbols may carry
their coefficient fields (`xi_poly`), which makes xi-derivatives exact and
enables a vectorized quantization path.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from itertools import product as _iterproduct

import numpy as np

from .fields import (SpectralField, TorusGrid, phys_deriv, sobolev_norm_full,
                     to_phys)

EVEN = "even"
ODD = "odd"
NONE = "none"

_MAX_XI_DERIVS = 3  # higher finite differences are numerically unstable


def _combine_parity(p, q):
    if p == NONE or q == NONE:
        return NONE
    return EVEN if p == q else ODD


def _flip_parity(p):
    if p == EVEN:
        return ODD
    if p == ODD:
        return EVEN
    return NONE


@dataclass(frozen=True)
class Symbol:
    """Evaluable symbol of declared order.

    fn: xi (shape (d,)) -> complex values on the collocation grid.
    grad_fn: optional analytic xi-gradient, xi -> list of d value arrays.
    xi_poly: optional tuple of (exponent tuple, coefficient values) pairs
        representing a(x, xi) = sum_gamma c_gamma(x) xi^gamma exactly.
    parity: declared behaviour under xi -> -xi ("even", "odd", "none").
    reg: Sobolev regularity tag of the x-dependence (metadata only).
    """

    grid: TorusGrid
    order: float
    fn: object
    parity: str = NONE
    reg: float | None = None
    grad_fn: object = None
    xi_poly: tuple | None = None
    _cache: OrderedDict = field(default_factory=OrderedDict, init=False,
                                repr=False, compare=False)
    _grad_cache: OrderedDict = field(default_factory=OrderedDict, init=False,
                                     repr=False, compare=False)

    def eval(self, xi) -> np.ndarray:
        """Values of a(., xi) on the collocation grid.

        Results are memoized per frequency argument (bounded LRU); symbols
        are immutable snapshots so the memo cannot go stale.  Treat the
        returned array as read-only."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        key = np.round(xi, 12).tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        vals = np.broadcast_to(np.asarray(self.fn(xi), dtype=complex),
                               self.grid.phys_shape)
        vals = np.ascontiguousarray(vals)
        self._cache[key] = vals
        if len(self._cache) > 16:
            self._cache.popitem(last=False)
        return vals

    def xi_grad(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        key = np.round(xi, 12).tobytes()
        hit = self._grad_cache.get(key)
        if hit is not None:
            self._grad_cache.move_to_end(key)
            return hit
        if self.xi_poly is not None:
            out = [_poly_eval(_poly_xi_deriv(self.xi_poly, ax), xi, self.grid)
                   for ax in range(self.grid.dim)]
        elif self.grad_fn is not None:
            out = [np.ascontiguousarray(np.broadcast_to(
                np.asarray(g, dtype=complex), self.grid.phys_shape))
                for g in self.grad_fn(xi)]
        else:
            out = [_central_diff(self, xi, ax) for ax in range(self.grid.dim)]
        self._grad_cache[key] = out
        if len(self._grad_cache) > 16:
            self._grad_cache.popitem(last=False)
        return out


def _fd_step(xi):
    return max(0.05, 0.05 * float(np.sqrt(1.0 + np.dot(xi, xi))))


def _central_diff(a: Symbol, xi, axis: int) -> np.ndarray:
    h = _fd_step(xi)
    e = np.zeros_like(xi)
    e[axis] = h
    return (a.eval(xi + e) - a.eval(xi - e)) / (2.0 * h)


# ---------------------------------------------------------------------------
# polynomial structure helpers (exponent tuple -> coefficient value array)


def _poly_eval(poly, xi, grid):
    acc = np.zeros(grid.phys_shape, dtype=complex)
    for gamma, c in poly:
        mono = 1.0
        for ax, g in enumerate(gamma):
            if g:
                mono = mono * xi[ax] ** g
        acc = acc + c * mono
    return acc


def _poly_xi_deriv(poly, axis):
    out = []
    for gamma, c in poly:
        if gamma[axis] == 0:
            continue
        new = list(gamma)
        new[axis] -= 1
        out.append((tuple(new), gamma[axis] * c))
    return tuple(out)


def _poly_mul(p, q):
    acc = {}
    for g1, c1 in p:
        for g2, c2 in q:
            g = tuple(a + b for a, b in zip(g1, g2))
            acc[g] = acc.get(g, 0) + c1 * c2
    return tuple(sorted(acc.items()))


def _poly_add(p, q, sign=1.0):
    acc = {}
    for g, c in p:
        acc[g] = acc.get(g, 0) + c
    for g, c in q:
        acc[g] = acc.get(g, 0) + sign * c
    return tuple(sorted(acc.items()))


def _poly_parity(poly):
    degs = {sum(g) % 2 for g, _ in poly}
    if degs <= {0}:
        return EVEN
    if degs <= {1}:
        return ODD
    return NONE


def _as_tuple_poly(coeff_fields: dict) -> tuple:
    return tuple(sorted((tuple(g), np.asarray(c, dtype=complex))
                        for g, c in coeff_fields.items()))


# ---------------------------------------------------------------------------
# constructors


def poly_symbol(grid: TorusGrid, coeff_fields: dict, order: float | None = None,
                reg: float | None = None) -> Symbol:
    """Symbol sum_gamma c_gamma(x) xi^gamma from collocation-value coefficients."""
    poly = _as_tuple_poly(coeff_fields)
    if order is None:
        order = float(max((sum(g) for g, _ in poly), default=0))
    return Symbol(grid, order, lambda xi: _poly_eval(poly, xi, grid),
                  parity=_poly_parity(poly), reg=reg, xi_poly=poly)


def const_symbol(grid: TorusGrid, c: complex) -> Symbol:
    vals = np.full(grid.phys_shape, c, dtype=complex)
    return poly_symbol(grid, {(0,) * grid.dim: vals}, order=0.0)


def field_symbol(f: SpectralField, reg: float | None = None) -> Symbol:
    """Order-0, xi-independent symbol a(x, xi) = f(x)."""
    vals = to_phys(f)
    return poly_symbol(f.grid, {(0,) * f.grid.dim: vals}, order=0.0, reg=reg)


def multiplier_symbol(grid: TorusGrid, wfunc, order: float,
                      parity: str = NONE) -> Symbol:
    """x-independent symbol a(x, xi) = w(xi); w maps an (d,) array to a scalar."""

    def fn(xi):
        return np.full(grid.phys_shape, complex(wfunc(xi)), dtype=complex)

    return Symbol(grid, order, fn, parity=parity)


def zero_symbol(grid: TorusGrid) -> Symbol:
    return const_symbol(grid, 0.0)


# ---------------------------------------------------------------------------
# pointwise algebra


def sym_add(a: Symbol, b: Symbol, order: float | None = None) -> Symbol:
    if order is None:
        order = max(a.order, b.order)
    poly = None
    if a.xi_poly is not None and b.xi_poly is not None:
        poly = _poly_add(a.xi_poly, b.xi_poly)
    parity = a.parity if a.parity == b.parity else NONE
    return Symbol(a.grid, order, lambda xi: a.eval(xi) + b.eval(xi),
                  parity=parity, xi_poly=poly,
                  grad_fn=lambda xi: [ga + gb for ga, gb
                                      in zip(a.xi_grad(xi), b.xi_grad(xi))])


def sym_scale(a: Symbol, c: complex) -> Symbol:
    poly = None
    if a.xi_poly is not None:
        poly = tuple((g, c * v) for g, v in a.xi_poly)
    return Symbol(a.grid, a.order, lambda xi: c * a.eval(xi),
                  parity=a.parity, xi_poly=poly,
                  grad_fn=lambda xi: [c * g for g in a.xi_grad(xi)])


def sym_mul(a: Symbol, b: Symbol) -> Symbol:
    poly = None
    if a.xi_poly is not None and b.xi_poly is not None:
        poly = _poly_mul(a.xi_poly, b.xi_poly)

    def grad(xi):
        av, bv = a.eval(xi), b.eval(xi)
        return [ga * bv + av * gb for ga, gb in zip(a.xi_grad(xi), b.xi_grad(xi))]

    return Symbol(a.grid, a.order + b.order,
                  lambda xi: a.eval(xi) * b.eval(xi),
                  parity=_combine_parity(a.parity, b.parity), xi_poly=poly,
                  grad_fn=grad)


def sym_conj(a: Symbol) -> Symbol:
    """Pointwise complex conjugate at the same xi."""
    poly = None
    if a.xi_poly is not None:
        poly = tuple((g, np.conj(v)) for g, v in a.xi_poly)
    return Symbol(a.grid, a.order, lambda xi: np.conj(a.eval(xi)),
                  parity=a.parity, xi_poly=poly,
                  grad_fn=lambda xi: [np.conj(g) for g in a.xi_grad(xi)])


def sym_reflect(a: Symbol) -> Symbol:
    """xi -> a(x, -xi)."""
    poly = None
    if a.xi_poly is not None:
        poly = tuple((g, ((-1.0) ** sum(g)) * v) for g, v in a.xi_poly)
    return Symbol(a.grid, a.order,
                  lambda xi: a.eval(-np.asarray(xi, float)),
                  parity=a.parity, xi_poly=poly,
                  grad_fn=lambda xi: [-g for g in
                                      a.xi_grad(-np.asarray(xi, float))])


def conj_reflect(a: Symbol) -> Symbol:
    """The dagger a†(x, xi) = conj(a(x, -xi)); multiplicative: (fg)† = f† g†."""
    return sym_conj(sym_reflect(a))


def x_derivative(a: Symbol, axis: int) -> Symbol:
    poly = None
    if a.xi_poly is not None:
        poly = tuple((g, phys_deriv(v, a.grid, axis)) for g, v in a.xi_poly)
    return Symbol(a.grid, a.order,
                  lambda xi: phys_deriv(a.eval(xi), a.grid, axis),
                  parity=a.parity, xi_poly=poly,
                  grad_fn=lambda xi: [phys_deriv(g, a.grid, axis)
                                      for g in a.xi_grad(xi)])


def xi_derivative(a: Symbol, axis: int) -> Symbol:
    if a.xi_poly is not None:
        poly = _poly_xi_deriv(a.xi_poly, axis)
        return Symbol(a.grid, a.order - 1.0,
                      lambda xi: _poly_eval(poly, xi, a.grid),
                      parity=_flip_parity(a.parity), xi_poly=poly)
    if a.grad_fn is not None:
        return Symbol(a.grid, a.order - 1.0,
                      lambda xi: np.broadcast_to(
                          np.asarray(a.grad_fn(np.atleast_1d(np.asarray(xi, float)))[axis],
                                     dtype=complex), a.grid.phys_shape).copy(),
                      parity=_flip_parity(a.parity))
    return Symbol(a.grid, a.order - 1.0,
                  lambda xi: _central_diff(a, np.atleast_1d(np.asarray(xi, float)), axis),
                  parity=_flip_parity(a.parity))


def poisson_bracket(a: Symbol, b: Symbol) -> Symbol:
    """{a, b} = grad_xi a . grad_x b - grad_x a . grad_xi b.

    Antisymmetric and bilinear; lowers the joint order by one."""
    d = a.grid.dim
    terms = []
    for ax in range(d):
        terms.append((xi_derivative(a, ax), x_derivative(b, ax), 1.0))
        terms.append((x_derivative(a, ax), xi_derivative(b, ax), -1.0))
    poly = None
    if a.xi_poly is not None and b.xi_poly is not None:
        poly = ()
        for p, q, sgn in terms:
            poly = _poly_add(poly, _poly_mul(p.xi_poly, q.xi_poly), sign=sgn)

    def fn(xi):
        acc = np.zeros(a.grid.phys_shape, dtype=complex)
        for p, q, sgn in terms:
            acc = acc + sgn * p.eval(xi) * q.eval(xi)
        return acc

    parity = _flip_parity(_combine_parity(a.parity, b.parity))
    return Symbol(a.grid, a.order + b.order - 1.0, fn, parity=parity, xi_poly=poly)


def sharp_compose(a: Symbol, b: Symbol, rho: float) -> Symbol:
    """Truncated composition symbol: ab for rho in (0,1], plus the
    (1/2i){a,b} correction for rho in (1,2]."""
    if not 0.0 < rho <= 2.0:
        raise ValueError(f"rho must lie in (0, 2], got {rho}")
    prod = sym_mul(a, b)
    if rho <= 1.0:
        return Symbol(a.grid, a.order + b.order, prod.fn,
                      parity=prod.parity, xi_poly=prod.xi_poly)
    corr = sym_scale(poisson_bracket(a, b), 1.0 / 2.0j)
    out = sym_add(prod, corr, order=a.order + b.order)
    return out


# ---------------------------------------------------------------------------
# seminorms


def xi_sample_set(grid: TorusGrid, radii=None):
    """Dyadic-shell sample of frequency arguments: |xi| in {0, 1, 2, 4, ..., 2N}
    with the signed axis directions plus the diagonal on each shell."""
    d = grid.dim
    if radii is None:
        radii = [0.0, 1.0]
        r = 2.0
        while r <= 2 * grid.freq_cut:
            radii.append(r)
            r *= 2.0
    dirs = []
    for ax in range(d):
        e = np.zeros(d)
        e[ax] = 1.0
        dirs.append(e)
        dirs.append(-e)
    dirs.append(np.ones(d) / np.sqrt(d))
    samples = [np.zeros(d)] if 0.0 in radii else []
    for r in radii:
        if r == 0.0:
            continue
        for e in dirs:
            samples.append(r * e)
    # drop duplicates (d = 1 repeats the diagonal direction)
    uniq, seen = [], set()
    for xi in samples:
        key = tuple(np.round(xi, 12))
        if key not in seen:
            seen.add(key)
            uniq.append(xi)
    return uniq


def _multi_indices(d, n):
    out = []
    for beta in _iterproduct(range(n + 1), repeat=d):
        if sum(beta) <= n:
            out.append(beta)
    return out


def _xi_deriv_multi(a: Symbol, xi, beta):
    """Iterated xi-derivative; exact on polynomial symbols, otherwise nested
    central differences with step frozen at the base point."""
    if a.xi_poly is not None:
        poly = a.xi_poly
        for ax, k in enumerate(beta):
            for _ in range(k):
                poly = _poly_xi_deriv(poly, ax)
        return _poly_eval(poly, xi, a.grid)
    h = _fd_step(xi)

    def rec(point, rem):
        for ax in range(len(rem)):
            if rem[ax] > 0:
                nxt = list(rem)
                nxt[ax] -= 1
                e = np.zeros_like(point)
                e[ax] = h
                return (rec(point + e, tuple(nxt)) - rec(point - e, tuple(nxt))) / (2.0 * h)
        return a.eval(point)

    return rec(np.asarray(xi, dtype=float), tuple(beta))


def seminorm(a: Symbol, m: float, s: float, n: int, xi_samples=None) -> float:
    """max over |beta| <= n and sampled xi of
    <xi>^(|beta| - m) * || d^beta_xi a(., xi) ||_{H^s}.

    Monotone nondecreasing in both n and s.  n is capped at 3: seminorms are
    diagnostics and higher finite differences are unstable."""
    if n > _MAX_XI_DERIVS:
        raise ValueError(f"seminorm derivative count capped at {_MAX_XI_DERIVS}")
    if xi_samples is None:
        xi_samples = xi_sample_set(a.grid)
    best = 0.0
    for beta in _multi_indices(a.grid.dim, n):
        for xi in xi_samples:
            w = (1.0 + float(np.dot(xi, xi))) ** ((sum(beta) - m) / 2.0)
            vals = _xi_deriv_multi(a, xi, beta)
            best = max(best, w * sobolev_norm_full(vals, a.grid, s))
    return best


def parity_defect(a: Symbol, xi_samples=None) -> float:
    """Numerical check of the declared xi-parity (0 for parity 'none')."""
    if a.parity == NONE:
        return 0.0
    if xi_samples is None:
        xi_samples = [xi for xi in xi_sample_set(a.grid) if np.linalg.norm(xi) > 0]
    sgn = 1.0 if a.parity == EVEN else -1.0
    worst = 0.0
    for xi in xi_samples:
        v = a.eval(xi)
        r = a.eval(-xi)
        scale = np.max(np.abs(v)) + 1.0
        worst = max(worst, float(np.max(np.abs(r - sgn * v)) / scale))
    return worst


# ---------------------------------------------------------------------------
# 2x2 symbols with the reality pattern


@dataclass(frozen=True)
class MatrixSymbol:
    """2x2 symbol [[a, b], [b†, a†]] with f†(x,xi) = conj(f(x,-xi)).

    Operators quantized from this pattern map conjugate pairs to conjugate
    pairs; the pattern is closed under sums and pointwise products."""

    a: Symbol
    b: Symbol

    @property
    def grid(self) -> TorusGrid:
        return self.a.grid

    @property
    def order(self) -> float:
        return max(self.a.order, self.b.order)

    def entries(self):
        """(upper-left, upper-right, lower-left, lower-right) symbols."""
        return (self.a, self.b, conj_reflect(self.b), conj_reflect(self.a))

    def eval_entries(self, xi):
        a11, a12, a21, a22 = self.entries()
        return (a11.eval(xi), a12.eval(xi), a21.eval(xi), a22.eval(xi))

    def __add__(self, other):
        return MatrixSymbol(sym_add(self.a, other.a), sym_add(self.b, other.b))


def matrix_from_scalar(w: Symbol) -> MatrixSymbol:
    """Blockwise quantization pattern of a scalar symbol: diag(w, w†)."""
    return MatrixSymbol(w, zero_symbol(w.grid))


def matrix_structure_defect(m: MatrixSymbol, lower_left: Symbol,
                            lower_right: Symbol, xi_samples=None) -> float:
    """Deviation between an externally supplied lower row and the reality
    pattern's conjugate-reflected row, at sampled xi."""
    if xi_samples is None:
        xi_samples = xi_sample_set(m.grid)
    c21, c22 = conj_reflect(m.b), conj_reflect(m.a)
    worst = 0.0
    for xi in xi_samples:
        for ours, theirs in ((c21, lower_left), (c22, lower_right)):
            v, w = ours.eval(xi), theirs.eval(xi)
            scale = np.max(np.abs(v)) + 1.0
            worst = max(worst, float(np.max(np.abs(v - w)) / scale))
    return worst
