"""Run configuration: a strict, documented key-value schema.

Configs are JSON files; unknown keys are rejected with the offending field
path.  The Hamiltonian block has bit-exact round-trip through JSON (floats
are written with repr precision).

Schema (defaults in parentheses):

  grid:         dim (1), modes_per_axis (4*freq_cut+2), freq_cut (32)
  hamiltonian:  either  monomials: [[re, im, [y exps], [yb exps]], ...]
                or      special_h: [c0, c1, ...], base_gradient (1.0)
                or      model: "<registry name>"
                label ("custom")
  initial:      modes: [[ [j1..jd], re, im ], ...], amplitude (0.05)
  thresholds:   s0 (d/2 + 0.1), s (s0 + 3.1 or s0 + 2.1 for closed-form
                models), sigmas ([0.0, s0 + 1.0])
  solver:       dt (1e-3), t_guess (0.05), visc_eps ([1e-2, 1e-3, 1e-4]),
                seed (0), cfl_const (3.0), reference_dt (dt / 5)
  cutoffs:      cutoff_eps (0.3), chi_plateau (1.1), chi_support (1.9),
                phi_rise ([0.5, 1.0])
  outputs:      directory ("out"), formats (["csv", "json"])
  sweep:        amplitudes ([]) — used by the sweep subcommand
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fields import TorusGrid
from .hamiltonian import HamiltonianModel, WirtingerPolynomial, special_form_density
from .models import REGISTRY
from .paradiff import CutoffSpec
from .serialize import config_hash


class ConfigError(ValueError):
    """Schema violation; the message carries the field path."""


def _require_keys(d: dict, allowed, path: str):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key '{path}.{k}'")


def _get(d: dict, key: str, default, path: str, types):
    v = d.get(key, default)
    if v is None:
        return None
    if not isinstance(v, types):
        raise ConfigError(f"'{path}.{key}' has wrong type {type(v).__name__}")
    return v


@dataclass
class RunConfig:
    raw: dict
    grid: TorusGrid
    model: HamiltonianModel
    initial_modes: list
    amplitude: float
    s0: float
    s: float
    sigmas: tuple
    dt: float
    t_guess: float
    visc_eps: tuple
    seed: int
    cfl_const: float
    reference_dt: float
    cut: CutoffSpec
    phi_rise: tuple
    out_dir: str
    formats: tuple
    sweep_amplitudes: tuple = ()

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def _parse_hamiltonian(block: dict, dim: int) -> HamiltonianModel:
    _require_keys(block, {"monomials", "special_h", "base_gradient", "model",
                          "label"}, "hamiltonian")
    label = _get(block, "label", "custom", "hamiltonian", str)
    if "model" in block:
        name = block["model"]
        if name not in REGISTRY:
            raise ConfigError(f"'hamiltonian.model' unknown: {name!r}")
        return REGISTRY[name]()
    if "special_h" in block:
        h = block["special_h"]
        if not isinstance(h, list) or not all(isinstance(x, (int, float)) for x in h):
            raise ConfigError("'hamiltonian.special_h' must be a list of numbers")
        base = float(_get(block, "base_gradient", 1.0, "hamiltonian", (int, float)))
        density = special_form_density(dim, h, base_gradient=base)
        return HamiltonianModel(label, dim, density, special_h=tuple(float(x) for x in h),
                                base_gradient=base)
    if "monomials" not in block:
        raise ConfigError("'hamiltonian' needs one of: model, monomials, special_h")
    monos = []
    for i, m in enumerate(block["monomials"]):
        if (not isinstance(m, list) or len(m) != 4
                or not all(isinstance(x, (int, float)) for x in m[:2])
                or not all(isinstance(e, list) for e in m[2:])):
            raise ConfigError(f"'hamiltonian.monomials[{i}]' must be "
                              "[re, im, [y exps], [yb exps]]")
        ye, be = m[2], m[3]
        if len(ye) != dim + 1 or len(be) != dim + 1:
            raise ConfigError(f"'hamiltonian.monomials[{i}]' exponent vectors "
                              f"must have {dim + 1} entries")
        if not all(isinstance(e, int) and e >= 0 for e in ye + be):
            raise ConfigError(f"'hamiltonian.monomials[{i}]' exponents must be "
                              "nonnegative integers")
        monos.append((tuple(ye), tuple(be), complex(m[0], m[1])))
    density = WirtingerPolynomial.from_monomials(dim, monos)
    try:
        return HamiltonianModel(label, dim, density)
    except ValueError as exc:
        raise ConfigError(f"'hamiltonian.monomials': {exc}") from exc


def parse_config(raw: dict) -> RunConfig:
    _require_keys(raw, {"grid", "hamiltonian", "initial", "thresholds",
                        "solver", "cutoffs", "outputs", "sweep"}, "")
    gblock = raw.get("grid", {})
    _require_keys(gblock, {"dim", "modes_per_axis", "freq_cut"}, "grid")
    dim = int(_get(gblock, "dim", 1, "grid", int))
    freq_cut = int(_get(gblock, "freq_cut", 32, "grid", int))
    modes = int(_get(gblock, "modes_per_axis", 4 * freq_cut + 2, "grid", int))
    try:
        grid = TorusGrid(dim, modes, freq_cut)
    except ValueError as exc:
        raise ConfigError(f"'grid': {exc}") from exc

    model = _parse_hamiltonian(raw.get("hamiltonian", {}), dim)
    if model.dim != dim:
        raise ConfigError(f"'hamiltonian' dimension {model.dim} != grid dim {dim}")

    iblock = raw.get("initial", {})
    _require_keys(iblock, {"modes", "amplitude"}, "initial")
    modes_list = []
    for i, m in enumerate(iblock.get("modes", [[[1] * dim, 1.0, 0.0]])):
        if not isinstance(m, list) or len(m) != 3 or not isinstance(m[0], list):
            raise ConfigError(f"'initial.modes[{i}]' must be [[j1..jd], re, im]")
        if len(m[0]) != dim:
            raise ConfigError(f"'initial.modes[{i}]' index needs {dim} entries")
        modes_list.append((tuple(int(j) for j in m[0]), complex(m[1], m[2])))
    amplitude = float(_get(iblock, "amplitude", 0.05, "initial", (int, float)))

    tblock = raw.get("thresholds", {})
    _require_keys(tblock, {"s0", "s", "sigmas"}, "thresholds")
    s0 = float(_get(tblock, "s0", dim / 2.0 + 0.1, "thresholds", (int, float)))
    s_default = s0 + (2.1 if model.is_special_form else 3.1)
    s = float(_get(tblock, "s", s_default, "thresholds", (int, float)))
    sigmas = tuple(float(x) for x in _get(tblock, "sigmas", [0.0, s0 + 1.0],
                                          "thresholds", list))

    sblock = raw.get("solver", {})
    _require_keys(sblock, {"dt", "t_guess", "visc_eps", "seed", "cfl_const",
                           "reference_dt"}, "solver")
    dt = float(_get(sblock, "dt", 1e-3, "solver", (int, float)))
    t_guess = float(_get(sblock, "t_guess", 0.05, "solver", (int, float)))
    visc = tuple(float(x) for x in _get(sblock, "visc_eps", [1e-2, 1e-3, 1e-4],
                                        "solver", list))
    seed = int(_get(sblock, "seed", 0, "solver", int))
    cfl = float(_get(sblock, "cfl_const", 3.0, "solver", (int, float)))
    ref_dt = float(_get(sblock, "reference_dt", dt / 5.0, "solver", (int, float)))

    cblock = raw.get("cutoffs", {})
    _require_keys(cblock, {"cutoff_eps", "chi_plateau", "chi_support", "phi_rise"},
                  "cutoffs")
    try:
        cut = CutoffSpec(
            float(_get(cblock, "cutoff_eps", 0.3, "cutoffs", (int, float))),
            float(_get(cblock, "chi_plateau", 1.1, "cutoffs", (int, float))),
            float(_get(cblock, "chi_support", 1.9, "cutoffs", (int, float))))
    except ValueError as exc:
        raise ConfigError(f"'cutoffs': {exc}") from exc
    phi_rise = tuple(float(x) for x in _get(cblock, "phi_rise", [0.5, 1.0],
                                            "cutoffs", list))

    oblock = raw.get("outputs", {})
    _require_keys(oblock, {"directory", "formats"}, "outputs")
    out_dir = _get(oblock, "directory", "out", "outputs", str)
    formats = tuple(_get(oblock, "formats", ["csv", "json"], "outputs", list))

    wblock = raw.get("sweep", {})
    _require_keys(wblock, {"amplitudes"}, "sweep")
    sweep = tuple(float(x) for x in _get(wblock, "amplitudes", [], "sweep", list))

    return RunConfig(raw, grid, model, modes_list, amplitude, s0, s, sigmas,
                     dt, t_guess, visc, seed, cfl, ref_dt, cut, phi_rise,
                     out_dir, formats, sweep)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be an object")
    return parse_config(raw)


def initial_state(cfg: RunConfig):
    from .sampling import state_from_modes

    return state_from_modes(cfg.grid, cfg.initial_modes, cfg.amplitude)


def hamiltonian_roundtrip_ok(cfg: RunConfig) -> bool:
    """Bit-exact JSON round-trip of the density's monomial list."""
    data = cfg.model.density.to_jsonable()
    back = WirtingerPolynomial.from_jsonable(cfg.model.dim,
                                             json.loads(json.dumps(data)))
    return back == cfg.model.density
