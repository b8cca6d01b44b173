"""Quantization of symbols into dense frequency-coupling operators.

An assembled operator couples retained frequencies j, k through

    matrix[j, k] = chi_eps(|j - k| / <j + k>) * A_{j-k}((j + k) / 2),

where A_m(xi) are the plain Fourier coefficients of x -> a(x, xi) and
chi_eps(t) = chi(t / cutoff_eps) is a smooth two-scale cutoff.  The
normalization is anchored by: a constant symbol assembles to that constant
times the identity, and an x-independent symbol w(xi) assembles to the exact
diagonal multiplier w(k).  Entries with |j - k| >= support_end * cutoff_eps *
<j + k> are exactly zero.

Assembly is exact at the truncation: contributions from frequencies outside
the retained cube are dropped (projective truncation).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as _iterproduct

import numpy as np

from .fields import (DoubledField, GridMismatchError, SpectralField,
                     TorusGrid, field_from_phys, field_from_vector,
                     lattice_points, plain_coeffs_full, to_phys)
from .symbols import MatrixSymbol, Symbol, field_symbol, sharp_compose

_ROW_BLOCK = 512  # row chunk for the vectorized assembly path


def _bump(z):
    out = np.zeros_like(z, dtype=float)
    pos = z > 0
    out[pos] = np.exp(-1.0 / z[pos])
    return out


def smooth_step_down(s):
    """C-infinity monotone bridge: 1 for s <= 0, 0 for s >= 1."""
    s = np.asarray(s, dtype=float)
    f1 = _bump(1.0 - s)
    f0 = _bump(s)
    return f1 / (f0 + f1)


@dataclass(frozen=True)
class CutoffSpec:
    """Two-scale cutoff profile: chi(t) = 1 for t <= plateau_end, 0 for
    t >= support_end, smooth monotone bridge between; chi_eps(t) = chi(t/eps)."""

    cutoff_eps: float = 0.3
    plateau_end: float = 1.1
    support_end: float = 1.9

    def __post_init__(self):
        if not 0.0 < self.cutoff_eps < 1.0:
            raise ValueError("cutoff_eps must lie in (0, 1)")

    def chi(self, t):
        t = np.asarray(t, dtype=float)
        return smooth_step_down((t - self.plateau_end)
                                / (self.support_end - self.plateau_end))

    def chi_eps(self, t):
        return self.chi(np.asarray(t, dtype=float) / self.cutoff_eps)


@dataclass
class ParaOperator:
    """Dense operator over the retained frequency cube (single component)."""

    grid: TorusGrid
    matrix: np.ndarray
    order: float
    provenance: str = ""
    cutoff_eps: float = 0.3

    def apply(self, u: SpectralField) -> SpectralField:
        if u.grid != self.grid:
            raise GridMismatchError("operator and field grids differ")
        return field_from_vector(self.grid, self.matrix @ u.flat)

    def __matmul__(self, other: "ParaOperator") -> "ParaOperator":
        return ParaOperator(self.grid, self.matrix @ other.matrix,
                            self.order + other.order,
                            f"({self.provenance})@({other.provenance})",
                            self.cutoff_eps)

    def __add__(self, other):
        return ParaOperator(self.grid, self.matrix + other.matrix,
                            max(self.order, other.order),
                            f"({self.provenance})+({other.provenance})",
                            self.cutoff_eps)

    def __sub__(self, other):
        return ParaOperator(self.grid, self.matrix - other.matrix,
                            max(self.order, other.order),
                            f"({self.provenance})-({other.provenance})",
                            self.cutoff_eps)

    def scale(self, c) -> "ParaOperator":
        return ParaOperator(self.grid, c * self.matrix, self.order,
                            self.provenance, self.cutoff_eps)

    @staticmethod
    def identity(grid: TorusGrid) -> "ParaOperator":
        return ParaOperator(grid, np.eye(grid.num_modes, dtype=complex), 0.0, "id")


@dataclass
class PairOperator:
    """Dense operator on state pairs; 2L x 2L with L retained modes."""

    grid: TorusGrid
    matrix: np.ndarray
    order: float
    provenance: str = ""
    cutoff_eps: float = 0.3

    def apply(self, U: DoubledField) -> DoubledField:
        if U.grid != self.grid:
            raise GridMismatchError("operator and field grids differ")
        return DoubledField.from_vector(self.grid, self.matrix @ U.as_vector())

    def __matmul__(self, other: "PairOperator") -> "PairOperator":
        return PairOperator(self.grid, self.matrix @ other.matrix,
                            self.order + other.order,
                            f"({self.provenance})@({other.provenance})",
                            self.cutoff_eps)

    def __add__(self, other):
        return PairOperator(self.grid, self.matrix + other.matrix,
                            max(self.order, other.order),
                            f"({self.provenance})+({other.provenance})",
                            self.cutoff_eps)

    def __sub__(self, other):
        return PairOperator(self.grid, self.matrix - other.matrix,
                            max(self.order, other.order),
                            f"({self.provenance})-({other.provenance})",
                            self.cutoff_eps)

    def scale(self, c) -> "PairOperator":
        return PairOperator(self.grid, c * self.matrix, self.order,
                            self.provenance, self.cutoff_eps)

    def signed_rows(self) -> "PairOperator":
        """Left-multiply by the block sign matrix diag(+1, -1)."""
        L = self.grid.num_modes
        m = self.matrix.copy()
        m[L:, :] *= -1.0
        return PairOperator(self.grid, m, self.order,
                            f"E({self.provenance})", self.cutoff_eps)

    def block(self, row: int, col: int) -> ParaOperator:
        """Single-component block (0 or 1 per index)."""
        L = self.grid.num_modes
        sl = (slice(None, L), slice(L, None))
        return ParaOperator(self.grid, self.matrix[sl[row], sl[col]].copy(),
                            self.order, f"{self.provenance}[{row}{col}]",
                            self.cutoff_eps)

    @staticmethod
    def identity(grid: TorusGrid) -> "PairOperator":
        return PairOperator(grid, np.eye(2 * grid.num_modes, dtype=complex), 0.0, "id")


def _reflect_block(mat: np.ndarray) -> np.ndarray:
    """Block of the dagger symbol: T_{a†}[j,k] = conj(T_a[-j,-k]).

    Reversing the flattened retained-cube index flips every axis, so the full
    reversal of both matrix axes realizes j -> -j, k -> -k."""
    return np.conj(mat[::-1, ::-1])


def _assemble_poly(symbol: Symbol, cut: CutoffSpec) -> np.ndarray:
    grid = symbol.grid
    M, d, L = grid.modes_per_axis, grid.dim, grid.num_modes
    lat = lattice_points(grid)  # (L, d)
    chat = [(gamma, plain_coeffs_full(c, grid).reshape(-1))
            for gamma, c in symbol.xi_poly]
    strides = np.array([M ** (d - 1 - ax) for ax in range(d)])
    out = np.empty((L, L), dtype=complex)
    for lo in range(0, L, _ROW_BLOCK):
        hi = min(lo + _ROW_BLOCK, L)
        jj = lat[lo:hi][:, None, :]          # (B, 1, d)
        kk = lat[None, :, :]                 # (1, L, d)
        diff = jj - kk                       # (B, L, d)
        ssum = jj + kk
        arg = np.sqrt(np.sum(diff.astype(float) ** 2, axis=-1))
        arg /= np.sqrt(1.0 + np.sum(ssum.astype(float) ** 2, axis=-1))
        band = cut.chi_eps(arg)
        flatidx = (np.mod(diff, M) @ strides)
        mid = ssum * 0.5
        acc = np.zeros(band.shape, dtype=complex)
        for gamma, cvec in chat:
            mono = np.ones(band.shape)
            for ax, g in enumerate(gamma):
                if g:
                    mono = mono * mid[..., ax] ** g
            acc += cvec[flatidx] * mono
        out[lo:hi] = band * acc
    return out


def _assemble_generic(symbol: Symbol, cut: CutoffSpec) -> np.ndarray:
    grid = symbol.grid
    N, M, d, L = grid.freq_cut, grid.modes_per_axis, grid.dim, grid.num_modes
    strides_lat = np.array([(2 * N + 1) ** (d - 1 - ax) for ax in range(d)])
    strides_phys = np.array([M ** (d - 1 - ax) for ax in range(d)])
    out = np.zeros((L, L), dtype=complex)
    for s in _iterproduct(range(-2 * N, 2 * N + 1), repeat=d):
        s = np.array(s)
        axes = [np.arange(max(-N, c - N), min(N, c + N) + 1) for c in s]
        jmesh = np.meshgrid(*axes, indexing="ij")
        j = np.stack([m.ravel() for m in jmesh], axis=-1)
        if j.size == 0:
            continue
        k = s[None, :] - j
        m = j - k
        arg = np.sqrt(np.sum(m.astype(float) ** 2, axis=-1))
        arg /= np.sqrt(1.0 + float(np.dot(s, s)))
        band = cut.chi_eps(arg)
        if not np.any(band > 0.0):
            continue
        vals = symbol.eval(s.astype(float) / 2.0)
        A = plain_coeffs_full(vals, grid).reshape(-1)
        rows = (j + N) @ strides_lat
        cols = (k + N) @ strides_lat
        out[rows, cols] = band * A[np.mod(m, M) @ strides_phys]
    return out


def opbw_assemble(symbol: Symbol, cut: CutoffSpec | None = None,
                  provenance: str = "") -> ParaOperator:
    """Assemble the dense operator of a scalar symbol."""
    cut = cut or CutoffSpec()
    if symbol.xi_poly is not None:
        mat = _assemble_poly(symbol, cut)
    else:
        mat = _assemble_generic(symbol, cut)
    return ParaOperator(symbol.grid, mat, symbol.order, provenance, cut.cutoff_eps)


def opbw_assemble_pair(msym: MatrixSymbol, cut: CutoffSpec | None = None,
                       provenance: str = "") -> PairOperator:
    """Assemble the 2x2-block operator of a reality-patterned matrix symbol."""
    cut = cut or CutoffSpec()
    A = opbw_assemble(msym.a, cut).matrix
    B = opbw_assemble(msym.b, cut).matrix
    mat = np.block([[A, B], [_reflect_block(B), _reflect_block(A)]])
    return PairOperator(msym.grid, mat, msym.order, provenance, cut.cutoff_eps)


def opbw_scalar_pair(w: Symbol, cut: CutoffSpec | None = None,
                     provenance: str = "") -> PairOperator:
    """Blockwise quantization diag(T_w, T_{w†}) of a scalar symbol."""
    cut = cut or CutoffSpec()
    W = opbw_assemble(w, cut).matrix
    L = w.grid.num_modes
    mat = np.zeros((2 * L, 2 * L), dtype=complex)
    mat[:L, :L] = W
    mat[L:, L:] = _reflect_block(W)
    return PairOperator(w.grid, mat, w.order, provenance, cut.cutoff_eps)


def opbw_apply(a, u, cut: CutoffSpec | None = None):
    """Assemble-and-apply convenience: scalar symbols act on fields, matrix
    symbols act blockwise on state pairs."""
    if isinstance(a, MatrixSymbol):
        if not isinstance(u, DoubledField):
            raise TypeError("matrix symbols act on state pairs")
        return opbw_assemble_pair(a, cut).apply(u)
    if not isinstance(u, SpectralField):
        raise TypeError("scalar symbols act on single fields")
    return opbw_assemble(a, cut).apply(u)


def paraproduct_remainder(f: SpectralField, g: SpectralField,
                          cut: CutoffSpec | None = None) -> SpectralField:
    """R(f, g) = fg - T_f g - T_g f, with the product formed on the
    collocation grid and truncated to the retained band.  Bilinear and
    symmetric by construction."""
    if f.grid != g.grid:
        raise GridMismatchError("paraproduct factors live on different grids")
    cut = cut or CutoffSpec()
    product = field_from_phys(to_phys(f) * to_phys(g), f.grid)
    tf_g = opbw_assemble(field_symbol(f), cut).apply(g)
    tg_f = opbw_assemble(field_symbol(g), cut).apply(f)
    return product - tf_g - tg_f


def composition_remainder(a: Symbol, b: Symbol, rho: float,
                          cut: CutoffSpec | None = None) -> ParaOperator:
    """Op(a) Op(b) - Op(a #_rho b) as a dense operator; the defining identity
    holds exactly at the truncation."""
    cut = cut or CutoffSpec()
    oa = opbw_assemble(a, cut)
    ob = opbw_assemble(b, cut)
    osharp = opbw_assemble(sharp_compose(a, b, rho), cut)
    mat = oa.matrix @ ob.matrix - osharp.matrix
    return ParaOperator(a.grid, mat, a.order + b.order - rho,
                        "composition-remainder", cut.cutoff_eps)
