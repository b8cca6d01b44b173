"""Eigen-decomposition of the principal part and its operator-level
corrections.

The order-2 principal matrix is reduced pointwise by the normalized
eigenbasis of its tilde (0-homogeneous) form; because the eigenbasis may
depend on the frequency direction, an order(-1) correction to the basis is
required for the approximate inverse to gain two derivatives, and an
order(-1) off-diagonal corrector removes the order-1 off-diagonal block left
by the reduction.  Every object here is a Symbol, so the modified-energy
weights can reuse them directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import DoubledField, TorusGrid
from .paradiff import (CutoffSpec, PairOperator, opbw_assemble_pair,
                       opbw_scalar_pair, smooth_step_down)
from .symbols import (EVEN, MatrixSymbol, ODD, Symbol, conj_reflect,
                      poisson_bracket, sym_add, sym_conj, sym_mul, sym_reflect,
                      sym_scale, xi_sample_set, zero_symbol)


class EllipticityError(ValueError):
    """The pointwise ellipticity margin failed at a sample point."""


def e_flip(U: DoubledField) -> DoubledField:
    """Block sign diag(1, -1) applied to a state pair."""
    return DoubledField(U.plus, -1.0 * U.minus)


@dataclass
class DiagonalizationPack:
    """All symbols of the two-stage reduction at a frozen background."""

    background: DoubledField
    eigenvalue: Symbol            # order 0; eigenvalue * |xi|^2 is the order-2 eigen-symbol
    diag_entry: Symbol            # order 0 (real) eigenvector normalization entry
    off_entry: Symbol             # order 0 eigenvector coupling entry
    basis: MatrixSymbol
    basis_inv: MatrixSymbol
    basis_corr: MatrixSymbol | None = None       # order -1 basis correction
    first_order_diag: Symbol | None = None       # order 1, real, odd
    first_order_off: Symbol | None = None        # order 1, odd
    corrector: Symbol | None = None              # order -1 off-diagonal corrector entry
    corrector_matrix: MatrixSymbol | None = None
    principal: MatrixSymbol | None = None
    subprincipal: MatrixSymbol | None = None
    ops: dict = field(default_factory=dict)      # assembled-operator reuse

    @property
    def grid(self) -> TorusGrid:
        return self.background.grid


def build_tilde_symbols(second_diag: Symbol, second_off: Symbol):
    """Divide the order-2 quadratic forms by |xi|^2.

    The results are 0-homogeneous; the value at xi = 0 is the average over
    the signed axis directions (the unit-sphere average of a quadratic form)."""
    return (_tilde(second_diag), _tilde(second_off))


def _tilde(a: Symbol) -> Symbol:
    grid = a.grid
    d = grid.dim

    def fn(xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        r2 = float(np.dot(xi, xi))
        if r2 < 1e-14:
            acc = np.zeros(grid.phys_shape, dtype=complex)
            for ax in range(d):
                e = np.zeros(d)
                e[ax] = 1.0
                acc = acc + 0.5 * (a.eval(e) + a.eval(-e))
            return acc / d
        return a.eval(xi) / r2

    def grad(xi):
        # d/dxi_l (a / r^2) = (d a)/r^2 - 2 xi_l a / r^4; zeros at the origin
        # (any bounded choice there perturbs only the zero-frequency column)
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        r2 = float(np.dot(xi, xi))
        if r2 < 1e-14:
            return [np.zeros(grid.phys_shape, dtype=complex) for _ in range(d)]
        vals = a.eval(xi)
        ga = a.xi_grad(xi)
        return [ga[ax] / r2 - 2.0 * xi[ax] * vals / (r2 * r2) for ax in range(d)]

    return Symbol(grid, a.order - 2.0, fn, parity=a.parity, reg=a.reg, grad_fn=grad)


def check_eigen_margin(a2t: Symbol, b2t: Symbol, threshold: float = 1e-10):
    """Pointwise margin a2tilde - |b2tilde| over the xi sample set; raises
    with the offending sample on failure."""
    worst = np.inf
    for xi in xi_sample_set(a2t.grid):
        margin = np.real(a2t.eval(xi)) - np.abs(b2t.eval(xi))
        m = float(np.min(margin))
        if m < worst:
            worst = m
        if m <= threshold:
            loc = np.unravel_index(int(np.argmin(margin)), a2t.grid.phys_shape)
            raise EllipticityError(
                f"eigen margin {m:.3e} at grid point {loc}, xi={xi}")
    return worst


def build_eigen_pack(a2t: Symbol, b2t: Symbol, background: DoubledField,
                     margin_threshold: float = 1e-10) -> DiagonalizationPack:
    """Pointwise eigen-decomposition of the tilde principal matrix.

    eigenvalue = sqrt(a2t^2 - |b2t|^2);
    diag_entry = (a2t + eigenvalue) / sqrt(2 eigenvalue (a2t + eigenvalue));
    off_entry  = -b2t / sqrt(2 eigenvalue (a2t + eigenvalue)).
    The normalization gives diag_entry^2 - |off_entry|^2 = 1."""
    check_eigen_margin(a2t, b2t, margin_threshold)
    grid = a2t.grid
    d = grid.dim

    def _parts(xi):
        a = np.real(a2t.eval(xi))
        b = b2t.eval(xi)
        lam = np.sqrt(np.maximum(a * a - np.abs(b) ** 2, 0.0))
        w = np.sqrt(2.0 * lam * (a + lam))
        return a, b, lam, w

    def lam_fn(xi):
        return _parts(xi)[2].astype(complex)

    def s1_fn(xi):
        a, _, lam, w = _parts(xi)
        return ((a + lam) / w).astype(complex)

    def s2_fn(xi):
        _, b, lam, w = _parts(xi)
        return -b / w

    def _grad_parts(xi):
        a, b, lam, w = _parts(xi)
        ga = [np.real(v) for v in a2t.xi_grad(xi)]
        gb = b2t.xi_grad(xi)
        glam = [(a * ga[l] - np.real(np.conj(b) * gb[l])) / lam for l in range(d)]
        gw = [(glam[l] * (a + lam) + lam * (ga[l] + glam[l])) / w for l in range(d)]
        return a, b, lam, w, ga, gb, glam, gw

    def lam_grad(xi):
        return [g.astype(complex) for g in _grad_parts(xi)[6]]

    def s1_grad(xi):
        a, _, lam, w, ga, _, glam, gw = _grad_parts(xi)
        return [((ga[l] + glam[l]) / w - (a + lam) * gw[l] / (w * w)).astype(complex)
                for l in range(d)]

    def s2_grad(xi):
        _, b, _, w, _, gb, _, gw = _grad_parts(xi)
        return [-gb[l] / w + b * gw[l] / (w * w) for l in range(d)]

    lam = Symbol(grid, 0.0, lam_fn, parity=EVEN, grad_fn=lam_grad)
    s1 = Symbol(grid, 0.0, s1_fn, parity=EVEN, grad_fn=s1_grad)
    s2 = Symbol(grid, 0.0, s2_fn, parity=EVEN, grad_fn=s2_grad)
    basis = MatrixSymbol(s1, s2)
    basis_inv = MatrixSymbol(s1, sym_scale(s2, -1.0))
    return DiagonalizationPack(background, lam, s1, s2, basis, basis_inv)


def build_s_star(pack: DiagonalizationPack) -> MatrixSymbol:
    """Order(-1) basis correction.

    Entries (1/2i) of ({s2, conj s2} s1 + 2 {s1, s2} conj s2) and
    ({s2, conj s2} s2 + 2 {s1, s2} s1); the lower row follows the reality
    pattern (both entries are odd and the first is real, which makes the
    pattern agree with the reflected-entry construction)."""
    s1, s2 = pack.diag_entry, pack.off_entry
    br22 = poisson_bracket(s2, sym_conj(s2))
    br12 = poisson_bracket(s1, s2)
    p = sym_scale(sym_add(sym_mul(br22, s1), sym_scale(sym_mul(br12, sym_conj(s2)), 2.0),
                          order=-1.0), 1.0 / 2.0j)
    q = sym_scale(sym_add(sym_mul(br22, s2), sym_scale(sym_mul(br12, s1), 2.0),
                          order=-1.0), 1.0 / 2.0j)
    p = Symbol(p.grid, -1.0, p.fn, parity=ODD)
    q = Symbol(q.grid, -1.0, q.fn, parity=ODD)
    corr = MatrixSymbol(p, q)
    pack.basis_corr = corr
    return corr


def basis_corr_display_defect(pack: DiagonalizationPack, xi_samples=None) -> float:
    """Distance between the reality-pattern lower row of the basis correction
    and the lower row built from the reflected-bracket construction.  Both
    agree because {s1, |s2|^2} = 0 (unit normalization)."""
    s1, s2 = pack.diag_entry, pack.off_entry
    br22 = poisson_bracket(s2, sym_conj(s2))
    br12b = poisson_bracket(s1, sym_conj(s2))
    B21 = sym_scale(sym_reflect(br12b), -2.0)
    B22 = sym_reflect(br22)
    low_left = sym_scale(sym_add(sym_mul(B21, s1), sym_mul(B22, sym_conj(s2)),
                                 order=-1.0), 1.0 / 2.0j)
    low_right = sym_scale(sym_add(sym_mul(B21, s2), sym_mul(B22, s1),
                                  order=-1.0), 1.0 / 2.0j)
    corr = pack.basis_corr
    c21, c22 = conj_reflect(corr.b), conj_reflect(corr.a)
    if xi_samples is None:
        xi_samples = [xi for xi in xi_sample_set(pack.grid) if np.linalg.norm(xi) > 0.5]
    worst = 0.0
    for xi in xi_samples:
        for ours, disp in ((c21, low_left), (c22, low_right)):
            v, w = ours.eval(xi), disp.eval(xi)
            scale = np.max(np.abs(v)) + 1e-12
            worst = max(worst, float(np.max(np.abs(v - w)) / max(scale, 1e-12)))
    return worst


@dataclass
class ResidualOperator:
    """Lazy operator given by a composition chain; applied via matvecs."""

    fn: object
    order: float

    def apply(self, V: DoubledField) -> DoubledField:
        return self.fn(V)


def parametrix_residual(pack: DiagonalizationPack, V: DoubledField,
                        cut: CutoffSpec | None = None,
                        include_correction: bool = True,
                        ops: tuple | None = None) -> DoubledField:
    """Op(basis + correction) Op(basis_inv) V - V; gains two derivatives when
    the correction is included."""
    if ops is None:
        ops = parametrix_ops(pack, cut, include_correction)
    fwd, inv = ops
    return fwd.apply(inv.apply(V)) - V


def parametrix_ops(pack: DiagonalizationPack, cut: CutoffSpec | None = None,
                   include_correction: bool = True):
    key = ("parametrix", include_correction)
    if key in pack.ops:
        return pack.ops[key]
    msym = pack.basis
    if include_correction:
        if pack.basis_corr is None:
            build_s_star(pack)
        msym = pack.basis + pack.basis_corr
    fwd = opbw_assemble_pair(msym, cut, provenance="basis+corr")
    if ("parametrix", not include_correction) in pack.ops:
        inv = pack.ops[("parametrix", not include_correction)][1]
    else:
        inv = opbw_assemble_pair(pack.basis_inv, cut, provenance="basis-inv")
    pack.ops[key] = (fwd, inv)
    return fwd, inv


@dataclass
class PrincipalReduction:
    """Output of the order-2 reduction."""

    eigen_symbol: Symbol            # eigenvalue * |xi|^2, order 2
    first_order_diag: Symbol        # order 1, real, odd
    first_order_off: Symbol         # order 1, odd
    residual: ResidualOperator      # order <= 0


def _bracket_triple(f: Symbol, g: Symbol, h: Symbol) -> Symbol:
    """(1/2i)({f, g h} + f {g, h}): the order-(sum-1) correction of the
    threefold product of quantized symbols at composition accuracy 2."""
    t1 = poisson_bracket(f, sym_mul(g, h))
    t2 = sym_mul(f, poisson_bracket(g, h))
    return sym_scale(sym_add(t1, t2, order=f.order + g.order + h.order - 1.0),
                     1.0 / 2.0j)


def diagonalize_principal(pack: DiagonalizationPack, principal: MatrixSymbol,
                          subprincipal: MatrixSymbol,
                          cut: CutoffSpec | None = None) -> PrincipalReduction:
    """Reduce the order-2 block to the scalar eigen-symbol.

    Builds the order-1 symbols of the reduced system from closed-form symbol
    algebra: the bracket corrections of the principal conjugation plus the
    entries of basis_inv . E . principal . basis_corr (computed by direct
    pointwise matrix multiplication), plus the passed-through subprincipal
    diagonal.  The residual operator (order <= 0) is the lazy difference."""
    if pack.basis_corr is None:
        build_s_star(pack)
    grid = pack.grid
    s1, s2 = pack.diag_entry, pack.off_entry
    a2, b2 = principal.a, principal.b
    a1 = subprincipal.a
    s2c = sym_conj(s2)

    c1 = _bracket_triple(s1, a2, s1)
    c1 = sym_add(c1, _bracket_triple(s1, b2, s2c), order=1.0)
    c1 = sym_add(c1, _bracket_triple(s2, sym_conj(b2), s1), order=1.0)
    c1 = sym_add(c1, _bracket_triple(s2, a2, s2c), order=1.0)

    # entries of basis_inv . E . principal . basis_corr, pointwise
    p, q = pack.basis_corr.a, pack.basis_corr.b
    pd, qd = conj_reflect(p), conj_reflect(q)
    a2d, b2d = conj_reflect(a2), conj_reflect(b2)
    r1 = sym_add(
        sym_add(sym_mul(sym_mul(a2, s1), p), sym_mul(sym_mul(b2, s1), qd), order=1.0),
        sym_add(sym_mul(sym_mul(b2d, s2), p), sym_mul(sym_mul(a2d, s2), qd), order=1.0),
        order=1.0)
    r2 = sym_add(
        sym_add(sym_mul(sym_mul(a2, s1), q), sym_mul(sym_mul(b2, s1), pd), order=1.0),
        sym_add(sym_mul(sym_mul(b2d, s2), q), sym_mul(sym_mul(a2d, s2), pd), order=1.0),
        order=1.0)

    first_diag = sym_add(sym_add(a1, c1, order=1.0), r1, order=1.0)
    first_diag = Symbol(grid, 1.0, first_diag.fn, parity=ODD)
    first_off = Symbol(grid, 1.0, r2.fn, parity=ODD)

    def eigen_fn(xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return pack.eigenvalue.eval(xi) * float(np.dot(xi, xi))

    eigen = Symbol(grid, 2.0, eigen_fn, parity=EVEN)

    fwd, inv = parametrix_ops(pack, cut, include_correction=True)
    sys_op = opbw_assemble_pair(principal + subprincipal, cut, provenance="system")
    eigen_op = opbw_scalar_pair(eigen, cut, provenance="eigen")
    reduced_sub = opbw_assemble_pair(MatrixSymbol(first_diag, first_off), cut,
                                     provenance="reduced-sub")
    pack.ops["system"] = sys_op
    pack.ops["eigen"] = eigen_op
    pack.ops["reduced_sub"] = reduced_sub

    def residual_fn(V):
        lhs = inv.apply(e_flip(sys_op.apply(fwd.apply(V))))
        rhs = e_flip(eigen_op.apply(V)) + e_flip(reduced_sub.apply(V))
        return lhs - rhs

    pack.first_order_diag = first_diag
    pack.first_order_off = first_off
    pack.principal = principal
    pack.subprincipal = subprincipal
    return PrincipalReduction(eigen, first_diag, first_off,
                              ResidualOperator(residual_fn, 0.0))


@dataclass(frozen=True)
class PhiCutoff:
    """Smooth even profile: 0 for |xi| <= rise_start, 1 for |xi| >= rise_end."""

    rise_start: float = 0.5
    rise_end: float = 1.0

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        return 1.0 - smooth_step_down((r - self.rise_start)
                                      / (self.rise_end - self.rise_start))


def build_c_corrector(pack: DiagonalizationPack,
                      phi: PhiCutoff | None = None,
                      lam_floor: float = 1e-8) -> MatrixSymbol:
    """Order(-1) off-diagonal corrector entry

        c(x, xi) = -phi(|xi|) * first_order_off(x, xi) / (eigenvalue |xi|^2).

    The sign makes (1 - Op(C)) E (Op(eigen) + Op(first-order)) cancel the
    off-diagonal order-1 block; the displayed cancellation is what the paired
    slope test certifies.  Requires the eigenvalue to stay above lam_floor on
    the profile's support."""
    phi = phi or PhiCutoff()
    if pack.first_order_off is None:
        raise ValueError("run diagonalize_principal before building the corrector")
    lam, b1p = pack.eigenvalue, pack.first_order_off
    grid = pack.grid
    for xi in xi_sample_set(grid):
        r = float(np.linalg.norm(xi))
        if phi(r) > 0.0 and float(np.min(np.real(lam.eval(xi)))) < lam_floor:
            raise EllipticityError(
                f"eigenvalue below {lam_floor} on the corrector support at xi={xi}")

    def c_fn(xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        r2 = float(np.dot(xi, xi))
        w = float(phi(np.sqrt(r2)))
        if w == 0.0:
            return np.zeros(grid.phys_shape, dtype=complex)
        return -w * b1p.eval(xi) / (np.real(lam.eval(xi)) * r2)

    c = Symbol(grid, -1.0, c_fn, parity=ODD)
    pack.corrector = c
    pack.corrector_matrix = MatrixSymbol(zero_symbol(grid), c)
    return pack.corrector_matrix


def corrected_first_order_ops(pack: DiagonalizationPack,
                              cut: CutoffSpec | None = None):
    """Assembled pieces of (1 - Op(C)) E (Op(eigen) + Op(first-order))."""
    if "corrected" in pack.ops:
        return pack.ops["corrected"]
    grid = pack.grid
    if "eigen" in pack.ops:
        eigen_op = pack.ops["eigen"]
    else:
        def eigen_fn(xi):
            xi = np.atleast_1d(np.asarray(xi, dtype=float))
            return pack.eigenvalue.eval(xi) * float(np.dot(xi, xi))

        eigen_op = opbw_scalar_pair(Symbol(grid, 2.0, eigen_fn, parity=EVEN),
                                    cut, provenance="eigen")
    sub_op = pack.ops.get("reduced_sub")
    if sub_op is None:
        sub_op = opbw_assemble_pair(
            MatrixSymbol(pack.first_order_diag, pack.first_order_off), cut,
            provenance="reduced-sub")
    one = PairOperator.identity(grid)
    c_op = opbw_assemble_pair(pack.corrector_matrix, cut, provenance="corrector")
    pack.ops["corrected"] = ((one - c_op), eigen_op, sub_op)
    return pack.ops["corrected"]


def corrected_apply(pack: DiagonalizationPack, V: DoubledField,
                    cut: CutoffSpec | None = None, ops=None) -> DoubledField:
    """(1 - Op(C)) E (Op(eigen) + Op(first-order)) V."""
    if ops is None:
        ops = corrected_first_order_ops(pack, cut)
    one_minus_c, eigen_op, sub_op = ops
    return one_minus_c.apply(e_flip(eigen_op.apply(V) + sub_op.apply(V)))


def build_pack(model, U: DoubledField, cut: CutoffSpec | None = None,
               with_corrector: bool = True) -> DiagonalizationPack:
    """Convenience: full reduction pipeline at a frozen background."""
    from .hamiltonian import build_matrices, build_symbols

    triple = build_symbols(model, U)
    principal, subprincipal, _ = build_matrices(triple)
    a2t, b2t = build_tilde_symbols(triple.second_diag, triple.second_off)
    pack = build_eigen_pack(a2t, b2t, U)
    build_s_star(pack)
    diagonalize_principal(pack, principal, subprincipal, cut)
    if with_corrector:
        build_c_corrector(pack)
    return pack
