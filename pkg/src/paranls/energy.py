"""Background-adapted Sobolev energy: the conjugated quadratic form, its
equivalence with the standard norm, and the coercivity certificate.

The energy is value(V) = < Op(eigenvalue^sigma |xi|^(2 sigma)) K V, K V >
with K = (1 - Op(corrector)) Op(basis_inv) and the real pairing of state
pairs.  Certificates below compare against single-component Sobolev norms of
the plus component; the constant conventions absorb the fixed factor between
component and pair norms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagonalization import DiagonalizationPack
from .fields import (DoubledField, TorusGrid, freq_square, inner_l2,
                     multiplier_apply_doubled, sobolev_norm)
from .paradiff import CutoffSpec, PairOperator, opbw_assemble_pair, opbw_scalar_pair
from .symbols import EVEN, Symbol


def weight_symbol(pack: DiagonalizationPack, sigma: float) -> Symbol:
    """eigenvalue(x, xi)^sigma |xi|^(2 sigma); the identity at sigma = 0.

    Powers are taken pointwise on eigenvalue samples (the eigenvalue is
    positive wherever the ellipticity margin holds), never by expanding the
    power symbolically."""
    grid = pack.grid

    def fn(xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if sigma == 0.0:
            return np.ones(grid.phys_shape, dtype=complex)
        r2 = float(np.dot(xi, xi))
        if r2 == 0.0:
            return np.zeros(grid.phys_shape, dtype=complex)
        lam = np.real(pack.eigenvalue.eval(xi))
        return (lam ** sigma * r2 ** sigma).astype(complex)

    return Symbol(grid, 2.0 * sigma, fn, parity=EVEN)


@dataclass
class ModifiedEnergy:
    sigma: float
    pack: DiagonalizationPack
    conj_op: PairOperator      # (1 - Op(corrector)) Op(basis_inv)
    weight_op: PairOperator    # Op(eigenvalue^sigma |xi|^(2 sigma))
    cut: CutoffSpec

    @property
    def grid(self) -> TorusGrid:
        return self.pack.grid


def build_modified_energy(pack: DiagonalizationPack, sigma: float,
                          cut: CutoffSpec | None = None) -> ModifiedEnergy:
    """Assemble the conjugator and the weight; the corrector factor is the
    identity when the pack carries no corrector (closed-form models)."""
    cut = cut or CutoffSpec()
    key = ("energy", sigma)
    if key in pack.ops:
        return pack.ops[key]
    inv_key = ("parametrix", True)
    if inv_key in pack.ops:
        inv_op = pack.ops[inv_key][1]
    else:
        inv_op = opbw_assemble_pair(pack.basis_inv, cut, provenance="basis-inv")
    if pack.corrector_matrix is not None:
        c_op = opbw_assemble_pair(pack.corrector_matrix, cut, provenance="corrector")
        conj_op = (PairOperator.identity(pack.grid) - c_op) @ inv_op
    else:
        conj_op = inv_op
    w_op = opbw_scalar_pair(weight_symbol(pack, sigma), cut, provenance="weight")
    energy = ModifiedEnergy(sigma, pack, conj_op, w_op, cut)
    pack.ops[key] = energy
    return energy


def modified_norm_sq(V: DoubledField, energy: ModifiedEnergy) -> float:
    """The adapted quadratic form; real for conjugate-pair inputs and
    quadratically homogeneous."""
    z = energy.conj_op.apply(V)
    w = energy.weight_op.apply(z)
    return float(np.real(inner_l2(w.plus, z.plus)))


def pairing_imag_defect(V: DoubledField, energy: ModifiedEnergy) -> float:
    """Imaginary part of the un-symmetrized pairing relative to its modulus;
    small because the weight is nearly self-adjoint."""
    z = energy.conj_op.apply(V)
    w = energy.weight_op.apply(z)
    val = inner_l2(w.plus, z.plus)
    return abs(val.imag) / (abs(val) + 1e-300)


@dataclass
class EquivalenceReport:
    constant: float
    passed: bool
    rows: list = field(default_factory=list)   # (norm_sq, low_norm_sq, value)
    background_r: float = 0.0


def equivalence_check(energy: ModifiedEnergy, trials: int, rng,
                      sampler=None, record_norm_index: float | None = None) -> EquivalenceReport:
    """A single finite C must certify
        C^-1 ||v||_sigma^2 - ||v||_-2^2 <= value <= C ||v||_sigma^2
    over all drawn fields.  The background smallness norm is recorded at
    record_norm_index when given."""
    from .fields import norm_doubled
    from .sampling import random_field

    grid = energy.grid
    sigma = energy.sigma
    rows = []
    uppers, lowers = [], []
    ok = True
    for k in range(trials):
        v = sampler(k) if sampler is not None else random_field(
            grid, rng, decay=1.0 + rng.uniform(0.0, 2.0))
        V = DoubledField.from_plus(v)
        value = modified_norm_sq(V, energy)
        ns = sobolev_norm(v, sigma) ** 2
        nlow = sobolev_norm(v, -2.0) ** 2
        rows.append((ns, nlow, value))
        if value <= 0.0 and ns > 0.0 and value + nlow <= 0.0:
            ok = False
            continue
        uppers.append(value / ns if ns > 0 else 0.0)
        lowers.append(ns / (value + nlow) if value + nlow > 0 else np.inf)
    constant = max([1.0] + uppers + lowers)
    passed = ok and np.isfinite(constant)
    r = (norm_doubled(energy.pack.background, record_norm_index)
         if record_norm_index is not None else 0.0)
    return EquivalenceReport(float(constant), bool(passed), rows, float(r))


@dataclass
class CoercivityReport:
    coercive_constant: float      # positive lower-bound constant
    drift_constant: float         # low-order compensation constant
    passed: bool
    symmetry_ratio: float         # |form1 - form2| against the order-3/2 scale
    rows: list = field(default_factory=list)


def garding_check(energy: ModifiedEnergy, trials: int, rng,
                  theta_grid=None) -> CoercivityReport:
    """Certify  <W K D2 U, K U>  >=  c ||u||_{sigma+2}^2 - C ||u||_sigma^2
    (and the transposed pairing) over random trials enriched with
    deterministic high harmonics."""
    from .sampling import enriched_trials

    grid = energy.grid
    sigma = energy.sigma
    d2 = freq_square(grid) ** 2
    rows = []
    for U in enriched_trials(grid, rng, trials):
        DU = multiplier_apply_doubled(d2, U)
        z = energy.conj_op.apply(U)
        zD = energy.conj_op.apply(DU)
        form1 = float(np.real(inner_l2(energy.weight_op.apply(zD).plus, z.plus)))
        form2 = float(np.real(inner_l2(energy.weight_op.apply(z).plus, zD.plus)))
        u = U.plus
        rows.append((form1, form2,
                     sobolev_norm(u, sigma + 2.0) ** 2,
                     sobolev_norm(u, sigma) ** 2,
                     sobolev_norm(u, sigma + 1.5) ** 2))
    if theta_grid is None:
        theta_grid = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
    best_c, best_theta = -np.inf, 0.0
    for th in theta_grid:
        c = min(min((f1 + th * nlo) / nhi, (f2 + th * nlo) / nhi)
                for f1, f2, nhi, nlo, _ in rows)
        if c > best_c:
            best_c, best_theta = c, th
    sym = max(abs(f1 - f2) / n32 for f1, f2, _, _, n32 in rows)
    return CoercivityReport(float(best_c), float(best_theta), bool(best_c > 0.0),
                            float(sym), rows)
