"""Log-log slope certification utilities.

Asymptotic boundedness statements become finite checks by fitting the
frequency-growth exponent of an operator applied to single harmonics over a
dyadic-ish probe set and comparing against the declared order with a fixed
tolerance band.
"""

from __future__ import annotations

import numpy as np

from .fields import DoubledField, SpectralField, mode_field, sobolev_norm, zero_field


def fit_loglog(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(ys <= 0.0):
        raise ValueError("slope fit requires positive values")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def default_probe_modes(freq_cut: int):
    """Dyadic probe frequencies {4, 8, ..., N/2}, densified for short ranges."""
    ns = []
    n = 4
    while n <= freq_cut // 2:
        ns.append(n)
        n *= 2
    if len(ns) < 3:
        ns = sorted({2, 3, 4, max(6, freq_cut // 3), freq_cut // 2})
        ns = [n for n in ns if 1 <= n <= freq_cut // 2]
    return ns


def probe_direction(dim: int, diagonal: bool = False) -> np.ndarray:
    """Probe harmonics run along an axis, or along the diagonal where
    direction-dependent (0-homogeneous) structure would be invisible on-axis."""
    e = np.zeros(dim, dtype=int)
    e[0] = 1
    if diagonal and dim > 1:
        return np.ones(dim, dtype=int)
    return e


def mode_probe(grid, n: int, direction=None) -> SpectralField:
    if direction is None:
        direction = probe_direction(grid.dim)
    return mode_field(grid, n * np.asarray(direction, dtype=int), 1.0)


def operator_slope(apply_fn, grid, ns=None, direction=None, norm_s: float = 0.0,
                   doubled: bool = False, floor: float = 1e-13):
    """Fitted growth exponent of ||A e_n||_{norm_s} against |n xi_dir|.

    Returns (slope, values); values at or below `floor` short-circuit to a
    certified negligible response (slope -inf)."""
    if ns is None:
        ns = default_probe_modes(grid.freq_cut)
    if direction is None:
        direction = probe_direction(grid.dim)
    direction = np.asarray(direction, dtype=int)
    scale = float(np.linalg.norm(direction))
    vals = []
    for n in ns:
        probe = mode_probe(grid, n, direction)
        if doubled:
            out = apply_fn(DoubledField.from_plus(probe))
            v = sobolev_norm(out.plus, norm_s) + sobolev_norm(out.minus, norm_s)
        else:
            v = sobolev_norm(apply_fn(probe), norm_s)
        vals.append(v)
    vals = np.asarray(vals)
    if np.max(vals) <= floor:
        return float("-inf"), vals
    xs = np.asarray(ns, dtype=float) * scale
    return fit_loglog(xs, np.maximum(vals, floor * 1e-3)), vals


def offdiagonal_slope(apply_fn, grid, ns=None, direction=None, floor: float = 1e-13):
    """Growth exponent of the lower-left block response: pure-plus probe in,
    minus-component norm out."""
    if ns is None:
        ns = default_probe_modes(grid.freq_cut)
    if direction is None:
        direction = probe_direction(grid.dim)
    direction = np.asarray(direction, dtype=int)
    vals = []
    for n in ns:
        V = DoubledField(mode_probe(grid, n, direction), zero_field(grid))
        vals.append(sobolev_norm(apply_fn(V).minus, 0.0))
    vals = np.asarray(vals)
    if np.max(vals) <= floor:
        return float("-inf"), vals
    xs = np.asarray(ns, dtype=float) * float(np.linalg.norm(direction))
    return fit_loglog(xs, np.maximum(vals, floor * 1e-3)), vals
