"""Spectral fields on periodic boxes.

Functions on the d-dimensional box (R / 2pi Z)^d are held as truncated
Fourier coefficients on the cube of integer frequencies |j|_inf <= freq_cut,
alongside an M-point collocation grid per axis used for pointwise products.
Coefficients follow the symmetric convention

    u(x) = (2pi)^(-d/2) * sum_j u_hat(j) exp(i j.x),

so Parseval reads (u, v)_L2 = sum_j u_hat(j) conj(v_hat(j)) and the H^s norm
is the plain weighted l2 sum with weight (1 + |j|^2)^s.  The collocation grid
must satisfy M >= 4*freq_cut + 2: products of two retained-band fields then
live below the Nyquist frequency and their retained-band part is exact.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


class GridMismatchError(ValueError):
    """Two fields living on different grids were combined."""


class ConjugacyError(ValueError):
    """A conjugate-pair invariant was violated beyond tolerance."""


@dataclass(frozen=True)
class TorusGrid:
    """Discretization of the periodic box.

    dim: spatial dimension (1, 2 or 3).
    modes_per_axis: collocation points M per axis.
    freq_cut: retained frequencies are |j|_inf <= freq_cut.
    """

    dim: int
    modes_per_axis: int
    freq_cut: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.freq_cut < 1:
            raise ValueError("freq_cut must be >= 1")
        if self.modes_per_axis < 4 * self.freq_cut + 2:
            raise ValueError(
                "modes_per_axis must be >= 4*freq_cut + 2, got "
                f"M={self.modes_per_axis} with N={self.freq_cut}")

    @property
    def shape(self) -> tuple:
        n = 2 * self.freq_cut + 1
        return (n,) * self.dim

    @property
    def phys_shape(self) -> tuple:
        return (self.modes_per_axis,) * self.dim

    @property
    def num_modes(self) -> int:
        return (2 * self.freq_cut + 1) ** self.dim

    def axis_freqs(self) -> np.ndarray:
        return np.arange(-self.freq_cut, self.freq_cut + 1)

    def nodes_1d(self) -> np.ndarray:
        return TWO_PI * np.arange(self.modes_per_axis) / self.modes_per_axis

    def node_mesh(self):
        """Mesh of collocation nodes, one (M,)*d array per axis."""
        x = self.nodes_1d()
        return np.meshgrid(*([x] * self.dim), indexing="ij")


@functools.lru_cache(maxsize=64)
def _geometry(grid: TorusGrid):
    N, M, d = grid.freq_cut, grid.modes_per_axis, grid.dim
    ax = np.arange(-N, N + 1)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    jsq = np.zeros(grid.shape)
    for m in mesh:
        jsq = jsq + m.astype(float) ** 2
    jbrack = np.sqrt(1.0 + jsq)
    embed = np.ix_(*([ax % M] * d))
    # integer frequencies of the full M-grid in fft order, per axis
    full_ax = np.rint(np.fft.fftfreq(M, 1.0 / M)).astype(int)
    full_mesh = np.meshgrid(*([full_ax] * d), indexing="ij")
    full_jsq = np.zeros(grid.phys_shape)
    for m in full_mesh:
        full_jsq = full_jsq + m.astype(float) ** 2
    lattice = np.stack([m.ravel() for m in mesh], axis=-1)  # (L, d)
    return {
        "jsq": jsq, "jbrack": jbrack, "embed": embed,
        "full_jsq": full_jsq, "full_mesh": full_mesh, "lattice": lattice,
    }


def lattice_points(grid: TorusGrid) -> np.ndarray:
    """Integer frequency vectors in the order of the flattened coefficients."""
    return _geometry(grid)["lattice"]


def freq_square(grid: TorusGrid) -> np.ndarray:
    return _geometry(grid)["jsq"]


def freq_bracket(grid: TorusGrid) -> np.ndarray:
    """sqrt(1 + |j|^2) over the retained frequency cube."""
    return _geometry(grid)["jbrack"]


@dataclass(frozen=True)
class SpectralField:
    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}")

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    def __add__(self, other):
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c):
        return SpectralField(self.grid, self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)


def _same_grid(u, v):
    if u.grid != v.grid:
        raise GridMismatchError(f"grids differ: {u.grid} vs {v.grid}")


def zero_field(grid: TorusGrid) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.shape, dtype=complex))


def field_from_vector(grid: TorusGrid, vec: np.ndarray) -> SpectralField:
    return SpectralField(grid, np.asarray(vec, dtype=complex).reshape(grid.shape))


def mode_field(grid: TorusGrid, j, amplitude: complex = 1.0) -> SpectralField:
    """Single harmonic with u_hat(j) = amplitude."""
    j = np.atleast_1d(np.asarray(j, dtype=int))
    if j.shape != (grid.dim,):
        raise ValueError(f"mode index must have {grid.dim} components")
    if np.max(np.abs(j)) > grid.freq_cut:
        raise ValueError("mode outside the retained band")
    c = np.zeros(grid.shape, dtype=complex)
    c[tuple(j + grid.freq_cut)] = amplitude
    return SpectralField(grid, c)


def to_phys(u: SpectralField) -> np.ndarray:
    """Values on the collocation grid (complex array of shape (M,)*d)."""
    g = u.grid
    geo = _geometry(g)
    padded = np.zeros(g.phys_shape, dtype=complex)
    padded[geo["embed"]] = u.coeffs
    scale = g.modes_per_axis ** g.dim * TWO_PI ** (-g.dim / 2.0)
    return np.fft.ifftn(padded) * scale


def field_from_phys(vals: np.ndarray, grid: TorusGrid) -> SpectralField:
    """Project collocation values onto the retained band (frequencies beyond
    freq_cut are dropped)."""
    geo = _geometry(grid)
    scale = TWO_PI ** (grid.dim / 2.0) / grid.modes_per_axis ** grid.dim
    full = np.fft.fftn(np.asarray(vals, dtype=complex)) * scale
    return SpectralField(grid, full[geo["embed"]].copy())


def plain_coeffs_full(vals: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Plain Fourier coefficients A_m (a(x) = sum A_m e^{imx}) of collocation
    values, on the full M-grid in fft index order."""
    return np.fft.fftn(np.asarray(vals, dtype=complex)) / grid.modes_per_axis ** grid.dim


def phys_deriv(vals: np.ndarray, grid: TorusGrid, axis: int) -> np.ndarray:
    """Spectral d/dx_axis of collocation values (Nyquist mode zeroed)."""
    M, d = grid.modes_per_axis, grid.dim
    freqs = np.rint(np.fft.fftfreq(M, 1.0 / M)).astype(float)
    if M % 2 == 0:
        freqs[M // 2] = 0.0
    shape = [1] * d
    shape[axis] = M
    mult = 1j * freqs.reshape(shape)
    return np.fft.ifftn(np.fft.fftn(np.asarray(vals, dtype=complex)) * mult)


def sobolev_norm_full(vals: np.ndarray, grid: TorusGrid, s: float) -> float:
    """H^s norm of collocation values using every M-grid frequency.

    Used for symbol fields, whose x-content may exceed the retained band."""
    scale = TWO_PI ** (grid.dim / 2.0) / grid.modes_per_axis ** grid.dim
    full = np.fft.fftn(np.asarray(vals, dtype=complex)) * scale
    w = (1.0 + _geometry(grid)["full_jsq"]) ** s
    return float(np.sqrt(np.sum(w * np.abs(full) ** 2)))


def sobolev_norm(u: SpectralField, s: float) -> float:
    w = freq_bracket(u.grid) ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def inner_l2(u: SpectralField, v: SpectralField) -> complex:
    _same_grid(u, v)
    return complex(np.sum(u.coeffs * np.conj(v.coeffs)))


def multiplier_apply(w, u: SpectralField) -> SpectralField:
    """Apply a frequency multiplier.  `w` is either an array over the retained
    cube or a callable taking the list of per-axis frequency meshes."""
    if callable(w):
        g = u.grid
        ax = g.axis_freqs()
        mesh = np.meshgrid(*([ax] * g.dim), indexing="ij")
        w = w(mesh)
    w = np.asarray(w)
    return SpectralField(u.grid, u.coeffs * w)


def bracket_power_multiplier(grid: TorusGrid, s: float) -> np.ndarray:
    """Multiplier array for (1 + |j|^2)^(s/2)."""
    return freq_bracket(grid) ** s


def viscous_semigroup(t: float, eps: float, u: SpectralField) -> SpectralField:
    """Multiply u_hat(j) by exp(-eps * t * |j|^4).

    Contraction on every H^sigma since the multiplier is <= 1."""
    if t < 0 or eps < 0:
        raise ValueError("t and eps must be nonnegative")
    mult = np.exp(-eps * t * freq_square(u.grid) ** 2)
    return SpectralField(u.grid, u.coeffs * mult)


def duhamel_viscous_const(t: float, eps: float, f: SpectralField,
                          nodes_per_step: int = 8, steps: int = 1) -> SpectralField:
    """Integral from 0 to t of exp(-eps (t - t') Delta^2) f dt' for
    time-constant f, by composite Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(nodes_per_step)
    acc = np.zeros(f.grid.shape, dtype=complex)
    h = t / steps
    for k in range(steps):
        a = k * h
        tq = a + 0.5 * h * (x + 1.0)
        wq = 0.5 * h * w
        for ti, wi in zip(tq, wq):
            acc = acc + wi * viscous_semigroup(t - ti, eps, f).coeffs
    return SpectralField(f.grid, acc)


# ---------------------------------------------------------------------------
# conjugate pairs


def conj_reflect_field(u: SpectralField) -> SpectralField:
    """Coefficients of the complex conjugate: (conj u)_hat(j) = conj(u_hat(-j))."""
    flipped = u.coeffs[tuple(slice(None, None, -1) for _ in range(u.grid.dim))]
    return SpectralField(u.grid, np.conj(flipped))


def is_real_field(u: SpectralField, tol: float = 1e-10) -> bool:
    r = conj_reflect_field(u)
    scale = np.max(np.abs(u.coeffs)) + 1.0
    return bool(np.max(np.abs(r.coeffs - u.coeffs)) <= tol * scale)


@dataclass(frozen=True)
class DoubledField:
    """State pair (u, v); the conjugate-pair invariant is v = conj(u),
    checkable through conjugacy_defect but not silently enforced."""

    plus: SpectralField
    minus: SpectralField

    def __post_init__(self):
        _same_grid(self.plus, self.minus)

    @property
    def grid(self) -> TorusGrid:
        return self.plus.grid

    @staticmethod
    def from_plus(u: SpectralField) -> "DoubledField":
        return DoubledField(u, conj_reflect_field(u))

    def conjugacy_defect(self) -> float:
        expected = conj_reflect_field(self.plus)
        scale = np.max(np.abs(self.plus.coeffs)) + 1.0
        return float(np.max(np.abs(self.minus.coeffs - expected.coeffs)) / scale)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.plus.flat, self.minus.flat])

    @staticmethod
    def from_vector(grid: TorusGrid, vec: np.ndarray) -> "DoubledField":
        L = grid.num_modes
        return DoubledField(field_from_vector(grid, vec[:L]),
                            field_from_vector(grid, vec[L:]))

    def __add__(self, other):
        return DoubledField(self.plus + other.plus, self.minus + other.minus)

    def __sub__(self, other):
        return DoubledField(self.plus - other.plus, self.minus - other.minus)

    def __mul__(self, c):
        return DoubledField(self.plus * c, self.minus * c)

    __rmul__ = __mul__


def zero_doubled(grid: TorusGrid) -> DoubledField:
    return DoubledField(zero_field(grid), zero_field(grid))


def norm_doubled(U: DoubledField, s: float) -> float:
    return sobolev_norm(U.plus, s) + sobolev_norm(U.minus, s)


def inner_doubled(Z: DoubledField, W: DoubledField, check: bool = True,
                  tol: float = 1e-8) -> float:
    """Re (z, w)_L2 on conjugate pairs; real by construction."""
    _same_grid(Z.plus, W.plus)
    if check:
        dz, dw = Z.conjugacy_defect(), W.conjugacy_defect()
        if max(dz, dw) > tol:
            raise ConjugacyError(
                f"conjugate-pair defect {max(dz, dw):.3e} exceeds {tol:.1e}")
    return float(np.real(inner_l2(Z.plus, W.plus)))


def multiplier_apply_doubled(w, U: DoubledField) -> DoubledField:
    """Apply an even real multiplier componentwise; preserves conjugate pairs."""
    return DoubledField(multiplier_apply(w, U.plus), multiplier_apply(w, U.minus))


def viscous_semigroup_doubled(t: float, eps: float, U: DoubledField) -> DoubledField:
    return DoubledField(viscous_semigroup(t, eps, U.plus),
                        viscous_semigroup(t, eps, U.minus))
