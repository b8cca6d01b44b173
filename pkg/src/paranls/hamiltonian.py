"""Hamiltonian densities as polynomials in a complex jet, and the principal
symbols of the linearized evolution.

The density F is a real-valued polynomial in the variables
(y_0, ..., y_d, yb_0, ..., yb_d), evaluated on the jet
y_0 = u, y_j = du/dx_j, yb_i = conj(y_i).  Formal derivatives treat y and yb
as independent.  Real-valuedness is the structural condition that swapping
y <-> yb exponents and conjugating the coefficient leaves the term list
invariant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .fields import (DoubledField, SpectralField, TorusGrid, field_from_phys,
                     inner_l2, phys_deriv, to_phys, zero_field)
from .paradiff import CutoffSpec, PairOperator, opbw_assemble_pair
from .symbols import (MatrixSymbol, Symbol, poly_symbol, zero_symbol)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class WirtingerPolynomial:
    """Polynomial in (y_0..y_d, yb_0..yb_d) with complex coefficients.

    terms: tuple of ((y exponents), (yb exponents), coefficient)."""

    dim: int
    terms: tuple

    @staticmethod
    def from_monomials(dim: int, monomials) -> "WirtingerPolynomial":
        acc = {}
        for ye, be, c in monomials:
            ye, be = tuple(int(e) for e in ye), tuple(int(e) for e in be)
            if len(ye) != dim + 1 or len(be) != dim + 1:
                raise ValueError("exponent vectors must have dim + 1 entries")
            key = (ye, be)
            acc[key] = acc.get(key, 0.0) + complex(c)
        terms = tuple(sorted((ye, be, c) for (ye, be), c in acc.items() if c != 0))
        return WirtingerPolynomial(dim, terms)

    def is_zero(self) -> bool:
        return not self.terms

    def conj_mirror_defect(self) -> float:
        """Structural real-valuedness: distance of the term list from its
        (y <-> yb, conjugated-coefficient) mirror."""
        table = {(ye, be): c for ye, be, c in self.terms}
        worst = 0.0
        for (ye, be), c in table.items():
            worst = max(worst, abs(np.conj(table.get((be, ye), 0.0)) - c))
        return worst

    def derive(self, which: str, idx: int) -> "WirtingerPolynomial":
        """Formal partial derivative in y_idx ("y") or yb_idx ("yb")."""
        if which not in ("y", "yb"):
            raise ValueError(f"unknown variable family {which!r}")
        if not 0 <= idx <= self.dim:
            raise ValueError(f"variable index {idx} out of range")
        out = []
        for ye, be, c in self.terms:
            exps = ye if which == "y" else be
            if exps[idx] == 0:
                continue
            new = list(exps)
            new[idx] -= 1
            if which == "y":
                out.append((tuple(new), be, c * exps[idx]))
            else:
                out.append((ye, tuple(new), c * exps[idx]))
        return WirtingerPolynomial.from_monomials(self.dim, out)

    def evaluate(self, ys, ybs):
        """Evaluate on arrays; ys/ybs are sequences of dim+1 broadcastable
        arrays (the jet and its conjugate)."""
        acc = 0.0
        for ye, be, c in self.terms:
            term = np.full_like(np.asarray(ys[0], dtype=complex), c)
            for e, y in zip(ye, ys):
                if e:
                    term = term * np.asarray(y, dtype=complex) ** e
            for e, y in zip(be, ybs):
                if e:
                    term = term * np.asarray(y, dtype=complex) ** e
            acc = acc + term
        if np.isscalar(acc) or getattr(acc, "shape", ()) == ():
            return complex(acc)
        return acc

    def degree(self) -> int:
        return max((sum(ye) + sum(be) for ye, be, _ in self.terms), default=0)

    def to_jsonable(self):
        return [[float(np.real(c)), float(np.imag(c)), list(ye), list(be)]
                for ye, be, c in self.terms]

    @staticmethod
    def from_jsonable(dim: int, data) -> "WirtingerPolynomial":
        return WirtingerPolynomial.from_monomials(
            dim, [(ye, be, complex(re, im)) for re, im, ye, be in data])


def wirtinger_derive(F: WirtingerPolynomial, which: str, idx: int) -> WirtingerPolynomial:
    return F.derive(which, idx)


@dataclass(frozen=True)
class HamiltonianModel:
    """Hamiltonian density together with optional closed-form structure.

    special_h: coefficients (c_0, c_1, ...) of a univariate polynomial h when
    the density is base_gradient * |grad u|^2 + |grad h(|u|^2)|^2; enables the
    closed-form symbol path with xi-independent principal coefficients.
    """

    label: str
    dim: int
    density: WirtingerPolynomial
    special_h: tuple | None = None
    base_gradient: float = 0.0

    def __post_init__(self):
        d = self.density.conj_mirror_defect()
        if d > 1e-12:
            raise ValueError(f"density is not real-valued (mirror defect {d:.2e})")

    @property
    def is_special_form(self) -> bool:
        return self.special_h is not None


def special_form_density(dim: int, h_coeffs, base_gradient: float = 0.0) -> WirtingerPolynomial:
    """Expand base_gradient*|grad u|^2 + sum_j |d/dx_j h(|u|^2)|^2 into
    monomials: d/dx_j h(|u|^2) = h'(y_0 yb_0) (y_j yb_0 + y_0 yb_j)."""
    monos = []
    for j in range(1, dim + 1):
        ye = [0] * (dim + 1)
        be = [0] * (dim + 1)
        ye[j] = 1
        be[j] = 1
        monos.append((tuple(ye), tuple(be), base_gradient))
    # h'(z)^2 with z = y_0 yb_0: polynomial in z
    hp = np.polynomial.polynomial.polyder(np.asarray(h_coeffs, dtype=complex))
    hp2 = np.polynomial.polynomial.polymul(hp, hp)
    for j in range(1, dim + 1):
        # (y_j yb_0 + y_0 yb_j)^2 = y_j^2 yb_0^2 + 2 y_0 y_j yb_0 yb_j + y_0^2 yb_j^2
        for (e_y0, e_yj, e_b0, e_bj, c) in ((0, 2, 2, 0, 1.0), (1, 1, 1, 1, 2.0),
                                            (2, 0, 0, 2, 1.0)):
            for k, hc in enumerate(hp2):
                if hc == 0:
                    continue
                ye = [0] * (dim + 1)
                be = [0] * (dim + 1)
                ye[0] = e_y0 + k
                ye[j] = e_yj
                be[0] = e_b0 + k
                be[j] = e_bj
                monos.append((tuple(ye), tuple(be), c * hc))
    return WirtingerPolynomial.from_monomials(dim, monos)


# ---------------------------------------------------------------------------
# jets and ellipticity


def jet_phys(u: SpectralField):
    """(values of u, du/dx_1, ..., du/dx_d) on the collocation grid."""
    vals = to_phys(u)
    grads = [phys_deriv(vals, u.grid, ax) for ax in range(u.grid.dim)]
    return [vals] + grads


def _second_derivatives(F: WirtingerPolynomial):
    d = F.dim
    dyy = {}    # (j, k) -> d^2F / dyb_k dy_j, gradient indices 1..d
    dbb = {}    # (j, k) -> d^2F / dyb_k dyb_j
    dy = [F.derive("y", j) for j in range(d + 1)]
    db = [F.derive("yb", j) for j in range(d + 1)]
    for j in range(1, d + 1):
        for k in range(1, d + 1):
            dyy[(j, k)] = dy[j].derive("yb", k)
            dbb[(j, k)] = db[j].derive("yb", k)
    mix_y = [dy[j].derive("yb", 0) for j in range(d + 1)]   # d_yb0 d_yj F
    mix_b = [db[j].derive("y", 0) for j in range(d + 1)]    # d_y0 d_ybj F
    return dyy, dbb, mix_y, mix_b


def check_ellipticity(F: WirtingerPolynomial, samples) -> float:
    """min over samples (y, xi) of
    sum_jk xi_j xi_k d_{y_j yb_k} F - | sum_jk xi_j xi_k d_{yb_j yb_k} F |,
    with |xi| = 1 representatives.  Nonpositive values are legitimate
    (reported) outcomes."""
    if not samples:
        raise ValueError("a nonempty sample set is required")
    dyy, dbb, _, _ = _second_derivatives(F)
    d = F.dim
    worst = np.inf
    for y, xi in samples:
        ys = [np.asarray(v, dtype=complex) for v in y]
        ybs = [np.conj(v) for v in ys]
        xi = np.asarray(xi, dtype=float)
        a = 0.0
        b = 0.0
        for j in range(1, d + 1):
            for k in range(1, d + 1):
                a = a + xi[j - 1] * xi[k - 1] * dyy[(j, k)].evaluate(ys, ybs)
                b = b + xi[j - 1] * xi[k - 1] * dbb[(j, k)].evaluate(ys, ybs)
        worst = min(worst, float(np.real(a)) - abs(b))
    return worst


def ellipticity_samples(model: HamiltonianModel, states=None, rng=None,
                        n_random: int = 200, radius: float = 1.0):
    """Sample set mixing jets actually visited by states with random draws in
    a ball; unit-sphere xi representatives (axes, diagonals, random)."""
    d = model.dim
    rng = rng or np.random.default_rng(0)
    xis = []
    for ax in range(d):
        e = np.zeros(d)
        e[ax] = 1.0
        xis.append(e)
    if d > 1:
        xis.append(np.ones(d) / np.sqrt(d))
    for _ in range(3):
        v = rng.standard_normal(d)
        xis.append(v / np.linalg.norm(v))
    ys = []
    for _ in range(n_random):
        y = radius * (rng.standard_normal(d + 1) + 1j * rng.standard_normal(d + 1)) / np.sqrt(2)
        ys.append(tuple(y))
    if states:
        for st in states:
            u = st.plus if isinstance(st, DoubledField) else st
            jets = jet_phys(u)
            flat = [j.reshape(-1) for j in jets]
            take = np.linspace(0, flat[0].size - 1, 25).astype(int)
            for idx in take:
                ys.append(tuple(f[idx] for f in flat))
    return [(y, xi) for y in ys for xi in xis]


# ---------------------------------------------------------------------------
# principal symbols and system matrices


@dataclass(frozen=True)
class SymbolTriple:
    """Principal coefficients of the linearized evolution: second-order
    diagonal and off-diagonal quadratic forms, first-order diagonal symbol."""

    second_diag: Symbol      # order 2, real, even in xi
    second_off: Symbol       # order 2, even in xi
    first_diag: Symbol       # order 1, real, odd in xi


def build_symbols(model: HamiltonianModel, U: DoubledField,
                  use_special: bool | None = None) -> SymbolTriple:
    """Construct the principal symbols from the state's jet.

    Special-form models use the closed-form xi-independent coefficients;
    otherwise generic formal differentiation of the density is used."""
    grid = U.grid
    d = grid.dim
    if use_special is None:
        use_special = model.is_special_form
    jets = jet_phys(U.plus)
    jbars = [np.conj(j) for j in jets]
    if use_special:
        if not model.is_special_form:
            raise ValueError("model carries no closed-form structure")
        z = (jets[0] * jbars[0]).real
        hp = np.polynomial.polynomial.polyder(np.asarray(model.special_h, dtype=complex))
        hpz = np.polynomial.polynomial.polyval(z, hp)
        hp2 = (hpz * np.conj(hpz)).real
        a_coeff = model.base_gradient + 2.0 * hp2 * z
        b_coeff = 2.0 * hp2 * jets[0] ** 2
        a2 = poly_symbol(grid, _iso_quadratic(d, a_coeff))
        b2 = poly_symbol(grid, _iso_quadratic(d, b_coeff))
        a1_coeffs = {}
        for j in range(d):
            gamma = tuple(1 if ax == j else 0 for ax in range(d))
            a1_coeffs[gamma] = 2.0 * hp2 * np.imag(jets[0] * jbars[1 + j])
        a1 = poly_symbol(grid, a1_coeffs, order=1.0)
        return SymbolTriple(a2, b2, a1)
    dyy, dbb, mix_y, mix_b = _second_derivatives(model.density)
    a_coeffs = {}
    b_coeffs = {}
    for j in range(1, d + 1):
        for k in range(j, d + 1):
            gamma = _sq_gamma(d, j - 1, k - 1)
            if j == k:
                a_val = dyy[(j, j)].evaluate(jets, jbars)
                b_val = dbb[(j, j)].evaluate(jets, jbars)
            else:
                a_val = (dyy[(j, k)].evaluate(jets, jbars)
                         + dyy[(k, j)].evaluate(jets, jbars))
                b_val = (dbb[(j, k)].evaluate(jets, jbars)
                         + dbb[(k, j)].evaluate(jets, jbars))
            a_coeffs[gamma] = _as_grid(a_val, grid)
            b_coeffs[gamma] = _as_grid(b_val, grid)
    a1_coeffs = {}
    for j in range(1, d + 1):
        gamma = tuple(1 if ax == j - 1 else 0 for ax in range(d))
        diff = (mix_y[j].evaluate(jets, jbars) - mix_b[j].evaluate(jets, jbars))
        a1_coeffs[gamma] = _as_grid(0.5j * diff, grid)
    a2 = poly_symbol(grid, a_coeffs, order=2.0)
    b2 = poly_symbol(grid, b_coeffs, order=2.0)
    a1 = poly_symbol(grid, a1_coeffs, order=1.0)
    return SymbolTriple(a2, b2, a1)


def _as_grid(val, grid):
    return np.broadcast_to(np.asarray(val, dtype=complex), grid.phys_shape).copy()


def _sq_gamma(d, j, k):
    gamma = [0] * d
    gamma[j] += 1
    gamma[k] += 1
    return tuple(gamma)


def _iso_quadratic(d, coeff):
    return {_sq_gamma(d, j, j): coeff for j in range(d)}


def build_matrices(triple: SymbolTriple):
    """System matrices of the paralinearized evolution and the block sign.

    Returns (principal, subprincipal, E) where principal couples the pair at
    order 2 through (second_diag, second_off), subprincipal is diagonal at
    order 1, and E = diag(1, -1)."""
    principal = MatrixSymbol(triple.second_diag, triple.second_off)
    subprincipal = MatrixSymbol(triple.first_diag, zero_symbol(triple.first_diag.grid))
    E = np.diag([1.0, -1.0])
    return principal, subprincipal, E


# ---------------------------------------------------------------------------
# full nonlinearity and the exact paralinear split


def dealias_margin_ok(model: HamiltonianModel, grid: TorusGrid) -> bool:
    """Products of degree (deg F - 1) of retained-band fields alias back into
    the retained band unless M > deg(F) * N."""
    return grid.modes_per_axis > model.density.degree() * grid.freq_cut


def nonlinearity_full(model: HamiltonianModel, u: SpectralField) -> SpectralField:
    """N(u) = (dF/dyb_0)(jet) - sum_j d/dx_j [(dF/dyb_j)(jet)], evaluated
    pseudospectrally and truncated to the retained band."""
    grid = u.grid
    if not dealias_margin_ok(model, grid):
        warnings.warn(
            f"collocation grid M={grid.modes_per_axis} is below the alias-free "
            f"margin for density degree {model.density.degree()}", stacklevel=2)
    jets = jet_phys(u)
    jbars = [np.conj(j) for j in jets]
    acc = _as_grid(model.density.derive("yb", 0).evaluate(jets, jbars), grid)
    for j in range(1, grid.dim + 1):
        flux = _as_grid(model.density.derive("yb", j).evaluate(jets, jbars), grid)
        acc = acc - phys_deriv(flux, grid, j - 1)
    return field_from_phys(acc, grid)


def hamiltonian_value(model: HamiltonianModel, u: SpectralField) -> float:
    """H(u) = integral of F over the box (trapezoidal = exact quadrature)."""
    jets = jet_phys(u)
    jbars = [np.conj(j) for j in jets]
    vals = _as_grid(model.density.evaluate(jets, jbars), u.grid)
    cell = (TWO_PI / u.grid.modes_per_axis) ** u.grid.dim
    return float(np.real(np.sum(vals)) * cell)


def evolution_rhs(model: HamiltonianModel, U: DoubledField) -> DoubledField:
    """Time derivative of the pair: (i N(u), conj(i N(u)))."""
    n = nonlinearity_full(model, U.plus)
    plus = 1j * n
    from .fields import conj_reflect_field
    return DoubledField(plus, conj_reflect_field(plus))


def assemble_system(model: HamiltonianModel, U: DoubledField,
                    cut: CutoffSpec | None = None,
                    use_special: bool | None = None) -> PairOperator:
    """i E Op(principal + subprincipal) at the state U, as a dense operator."""
    triple = build_symbols(model, U, use_special=use_special)
    principal, subprincipal, _ = build_matrices(triple)
    op = opbw_assemble_pair(principal + subprincipal, cut, provenance="system")
    return op.signed_rows().scale(1j)


def paralinear_remainder(model: HamiltonianModel, U: DoubledField,
                         cut: CutoffSpec | None = None,
                         system_op: PairOperator | None = None) -> DoubledField:
    """R(U)U = full evolution RHS minus i E Op(principal + subprincipal) U;
    the defining split, exact at the truncation."""
    if system_op is None:
        system_op = assemble_system(model, U, cut)
    return evolution_rhs(model, U) - system_op.apply(U)
