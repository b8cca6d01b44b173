"""Random band-limited fields and deterministic test states."""

from __future__ import annotations

import numpy as np

from .fields import (DoubledField, SpectralField, TorusGrid, conj_reflect_field,
                     freq_bracket, mode_field, sobolev_norm, zero_field)


def random_field(grid: TorusGrid, rng, decay: float = 3.0, amplitude: float = 1.0,
                 zero_mean: bool = False, real_valued: bool = False) -> SpectralField:
    """Random coefficients with (1+|j|^2)^(-decay/2) spectral profile."""
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    c = c * freq_bracket(grid) ** (-decay)
    f = SpectralField(grid, c)
    if real_valued:
        f = 0.5 * (f + conj_reflect_field(f))
    if zero_mean:
        idx = (grid.freq_cut,) * grid.dim
        c = f.coeffs.copy()
        c[idx] = 0.0
        f = SpectralField(grid, c)
    n = sobolev_norm(f, 0.0)
    if n == 0.0:
        return f
    return f * (amplitude / n)


def random_pair(grid: TorusGrid, rng, decay: float = 3.0,
                amplitude: float = 1.0) -> DoubledField:
    return DoubledField.from_plus(random_field(grid, rng, decay, amplitude))


def state_from_modes(grid: TorusGrid, modes, amplitude: float = 1.0) -> SpectralField:
    """Deterministic field from (mode vector, complex coefficient) entries."""
    f = zero_field(grid)
    for j, c in modes:
        f = f + mode_field(grid, j, complex(c))
    return f * amplitude


def enriched_trials(grid: TorusGrid, rng, count: int, decay: float = 3.0,
                    amplitude: float = 1.0):
    """Random fields interleaved with deterministic high-frequency harmonics
    at |n| in {N/2, 3N/4, N}; coercivity checks underweight the tail on pure
    random draws."""
    N = grid.freq_cut
    highs = sorted({N // 2, (3 * N) // 4, N})
    out = []
    for i in range(count):
        base = random_field(grid, rng, decay, amplitude)
        if i % 3 == 0:
            n = highs[(i // 3) % len(highs)]
            j = np.zeros(grid.dim, dtype=int)
            j[0] = n
            base = base + mode_field(grid, j, 0.5 * amplitude)
        out.append(DoubledField.from_plus(base))
    return out
