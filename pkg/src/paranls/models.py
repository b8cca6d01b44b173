"""Shipped example Hamiltonians.

Each constructor returns a HamiltonianModel whose density is uniformly
elliptic (a positive lower bound holds at every jet value), except for the
documented degenerate pure-special-form example.
"""

from __future__ import annotations

from .hamiltonian import HamiltonianModel, WirtingerPolynomial, special_form_density


def linear_d1() -> HamiltonianModel:
    """F = |u_x|^2: the free evolution, every pipeline object trivial."""
    density = WirtingerPolynomial.from_monomials(1, [((0, 1), (0, 1), 1.0)])
    return HamiltonianModel("linear_d1", 1, density)


def quartic_d1() -> HamiltonianModel:
    """F = |u_x|^2 + |u|^2 |u_x|^2 / 2 + Re(u_x^2 conj(u)^2) / 2.

    Genuinely quasilinear on the circle: nonzero off-diagonal coupling and a
    nonzero first-order symbol; uniform ellipticity bound 1."""
    density = WirtingerPolynomial.from_monomials(1, [
        ((0, 1), (0, 1), 1.0),
        ((1, 1), (1, 1), 0.5),
        ((0, 2), (2, 0), 0.25),
        ((2, 0), (0, 2), 0.25),
    ])
    return HamiltonianModel("quartic_d1", 1, density)


def special_d1() -> HamiltonianModel:
    """F = |u_x|^2 + |d/dx h(|u|^2)|^2 with h(z) = z.

    The closed-form path with xi-independent principal coefficients; uniform
    ellipticity bound 1 thanks to the gradient base term."""
    h = (0.0, 1.0)
    density = special_form_density(1, h, base_gradient=1.0)
    return HamiltonianModel("special_d1", 1, density, special_h=h, base_gradient=1.0)


def special_quadratic_d1() -> HamiltonianModel:
    """F = |u_x|^2 + |d/dx h(|u|^2)|^2 with h(z) = z + z^2 / 4."""
    h = (0.0, 1.0, 0.25)
    density = special_form_density(1, h, base_gradient=1.0)
    return HamiltonianModel("special_quadratic_d1", 1, density,
                            special_h=h, base_gradient=1.0)


def aniso_d2() -> HamiltonianModel:
    """F = |grad u|^2 + |u|^2 |u_{x1}|^2 + Re(u_{x1}^2 conj(u)^2) / 4.

    Planar model with an anisotropic principal part: the normalized
    eigen-symbols depend on the frequency direction, so the lower-order
    eigenbasis correction and the off-diagonal corrector are both active."""
    density = WirtingerPolynomial.from_monomials(2, [
        ((0, 1, 0), (0, 1, 0), 1.0),
        ((0, 0, 1), (0, 0, 1), 1.0),
        ((1, 1, 0), (1, 1, 0), 1.0),
        ((0, 2, 0), (2, 0, 0), 0.125),
        ((2, 0, 0), (0, 2, 0), 0.125),
    ])
    return HamiltonianModel("aniso_d2", 2, density)


def pure_special_d1() -> HamiltonianModel:
    """F = |d/dx h(|u|^2)|^2 with h(z) = z and no gradient base term.

    Degenerate: the ellipticity quantity vanishes identically.  Retained as a
    documented failure example for the admissibility check."""
    h = (0.0, 1.0)
    density = special_form_density(1, h, base_gradient=0.0)
    return HamiltonianModel("pure_special_d1", 1, density,
                            special_h=h, base_gradient=0.0)


REGISTRY = {
    "linear_d1": linear_d1,
    "quartic_d1": quartic_d1,
    "special_d1": special_d1,
    "special_quadratic_d1": special_quadratic_d1,
    "aniso_d2": aniso_d2,
    "pure_special_d1": pure_special_d1,
}


def by_name(name: str) -> HamiltonianModel:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {sorted(REGISTRY)}") from None
