"""Run configuration: YAML documents describing one verification scenario.

Grammar (all keys optional except ``scenario``)::

    scenario: constant-mass-scalar | mass-family-scalar | massless-dirac | u1-dirac
    base:      {box: [[lo, hi], ...], grid: [n, ...]}
    density:   {constant: c, slope: [s1, ...], quadratic: q}   # rho = c + s.x + q t^2
    mass:      {constant: c, slope: [s1, ...]}                  # m = c + s.x (scalar only)
    tests:     [{center: c, width: w, amplitude: a}, ...]
    tolerances: {check-name: value, ...}
    phases:    [angle, ...]                                     # u1-dirac only
    seed:      integer
    point:     [x1, ...]                                        # base point for commutators
    propagate: {center: c, width: w, amplitude: a, operator: retarded|advanced|causal,
                range: [T0, T1]}

Unknown keys are rejected so typos surface as errors.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError

SCENARIOS = ("constant-mass-scalar", "mass-family-scalar", "massless-dirac", "u1-dirac")

DEFAULT_TOLERANCES = {
    "geometry.glue_roundtrip": 1e-12,
    "geometry.proper_time_roundtrip": 1e-8,
    "geometry.restrict_functorial": 1e-12,
    "green.exact_sequence": 1e-6,
    "green.inverse_left": 1e-6,
    "green.inverse_right": 1e-5,
    "green.ivp_data_solve": 1e-10,
    "green.ivp_solve_data": 1e-8,
    "green.linearity": 1e-9,
    "green.support": 1e-9,
    "models.pullback": 1e-7,
    "models.pushforward": 1e-7,
    "models.pushforward_compose": 1e-9,
    "models.quotient": 1e-7,
    "models.smoothness": 0.5,
    "models.structure_symmetry": 1e-8,
    "models.u1_group_law": 0.0,
    "models.u1_pairing": 1e-9,
    "models.u1_pushforward": 1e-9,
    "quantize.associativity": 1e-12,
    "quantize.confluence": 0.0,
    "quantize.relations": 0.0,
    "quantize.star": 1e-12,
}

_PRESETS = {
    "constant-mass-scalar": {
        "base": {"box": [[0.0, 1.0]], "grid": [3]},
        "density": {"constant": 1.0, "slope": [0.2], "quadratic": 0.0},
        "mass": {"constant": 1.0, "slope": [0.0]},
        "tests": [{"center": 0.0, "width": 0.5}, {"center": 2.0, "width": 0.5}],
    },
    "mass-family-scalar": {
        # base U x U~ with the mass depending on the second factor only
        "base": {"box": [[0.0, 1.0], [0.5, 2.0]], "grid": [2, 3]},
        "density": {"constant": 1.0, "slope": [0.2, 0.0], "quadratic": 0.0},
        "mass": {"constant": 0.0, "slope": [0.0, 1.0]},
        "tests": [{"center": 0.0, "width": 0.5}, {"center": 1.5, "width": 0.3}],
    },
    "massless-dirac": {
        "base": {"box": [[0.0, 1.0]], "grid": [3]},
        "density": {"constant": 1.0, "slope": [0.2], "quadratic": 0.0},
        "tests": [{"center": 0.0, "width": 0.5}, {"center": 1.0, "width": 0.3,
                                                    "amplitude": [0.5, 1.0]}],
    },
    "u1-dirac": {
        "base": {"box": [[0.0, 1.0]], "grid": [3]},
        "density": {"constant": 1.0, "slope": [0.2], "quadratic": 0.0},
        "tests": [{"center": 0.0, "width": 0.5}, {"center": 1.0, "width": 0.3,
                                                    "amplitude": [0.5, 1.0]}],
        "phases": [0.3, 1.7, -2.2],
    },
}

_TOP_KEYS = {"scenario", "base", "density", "mass", "tests", "tolerances", "phases", "seed",
             "point", "propagate"}


@dataclass(frozen=True)
class TestSpec:
    center: float
    width: float
    amplitude: tuple


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    box: tuple
    grid: tuple
    density: dict
    mass: dict | None
    tests: tuple
    tolerances: dict
    phases: tuple = ()
    seed: int = 0
    point: tuple | None = None
    propagate: dict = field(default_factory=dict)

    @property
    def fermionic(self):
        return self.scenario in ("massless-dirac", "u1-dirac")

    def echo(self):
        """Plain-data copy for the report."""
        out = {
            "scenario": self.scenario,
            "base": {"box": [list(b) for b in self.box], "grid": list(self.grid)},
            "density": self.density,
            "tests": [{"center": t.center, "width": t.width, "amplitude": list(t.amplitude)}
                      for t in self.tests],
            "tolerances": dict(sorted(self.tolerances.items())),
            "seed": self.seed,
        }
        if self.mass is not None:
            out["mass"] = self.mass
        if self.phases:
            out["phases"] = list(self.phases)
        return out


def _num(path, v, positive=False, allow_zero=True):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        if isinstance(v, str):
            try:
                v = float(v)
            except ValueError:
                raise ConfigError(path, f"expected a number, got {v!r}") from None
        else:
            raise ConfigError(path, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and (v < 0 or (v == 0 and not allow_zero)):
        raise ConfigError(path, "must be positive")
    return v


def _list(path, v, n=None):
    if not isinstance(v, (list, tuple)):
        raise ConfigError(path, f"expected a list, got {type(v).__name__}")
    if n is not None and len(v) != n:
        raise ConfigError(path, f"expected {n} entries, got {len(v)}")
    return list(v)


def _mapping(path, v, keys):
    if not isinstance(v, dict):
        raise ConfigError(path, f"expected a mapping, got {type(v).__name__}")
    for k in v:
        if k not in keys:
            raise ConfigError(f"{path}.{k}" if path else str(k), "unknown key")
    return v


def _merge(preset, doc):
    out = copy.deepcopy(preset)
    for k, v in doc.items():
        if k == "tolerances":
            continue
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def parse_config(doc, overrides=None) -> RunConfig:
    """Validate a loaded document; ``overrides`` maps check names to tolerances."""
    doc = _mapping("", doc if doc is not None else {}, _TOP_KEYS)
    scen = doc.get("scenario")
    if scen not in SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {scen!r}; expected one of {', '.join(SCENARIOS)}")
    d = _merge(_PRESETS[scen], doc)

    base = _mapping("base", d["base"], {"box", "grid"})
    box = []
    for i, b in enumerate(_list("base.box", base.get("box", []))):
        lo, hi = (_num(f"base.box[{i}][{j}]", v) for j, v in enumerate(_list(f"base.box[{i}]", b, 2)))
        if not lo < hi:
            raise ConfigError(f"base.box[{i}]", "lower bound must be below upper bound")
        box.append((lo, hi))
    grid = _list("base.grid", base.get("grid", []), len(box))
    grid = tuple(int(_num(f"base.grid[{i}]", g)) for i, g in enumerate(grid))
    if any(g < 2 for g in grid):
        raise ConfigError("base.grid", "need at least 2 samples per axis")
    dim = len(box)

    dens = _mapping("density", d["density"], {"constant", "slope", "quadratic"})
    density = {
        "constant": _num("density.constant", dens.get("constant", 1.0)),
        "slope": [_num(f"density.slope[{i}]", s)
                  for i, s in enumerate(_list("density.slope", dens.get("slope", [0.0] * dim), dim))],
        "quadratic": _num("density.quadratic", dens.get("quadratic", 0.0), positive=True),
    }
    low = density["constant"] + sum(min(s * lo, s * hi) for s, (lo, hi) in zip(density["slope"], box))
    if not low > 0:
        raise ConfigError("density", "density must stay positive on the base box")

    mass = None
    if not scen.endswith("dirac"):
        ms = _mapping("mass", d.get("mass", {}), {"constant", "slope"})
        mass = {
            "constant": _num("mass.constant", ms.get("constant", 1.0)),
            "slope": [_num(f"mass.slope[{i}]", s)
                      for i, s in enumerate(_list("mass.slope", ms.get("slope", [0.0] * dim), dim))],
        }
        mlow = mass["constant"] + sum(min(s * lo, s * hi) for s, (lo, hi) in zip(mass["slope"], box))
        if not mlow > 0:
            raise ConfigError("mass", "mass must stay positive on the base box")

    ncomp = 2 if scen.endswith("dirac") else 1
    tests = []
    for i, t in enumerate(_list("tests", d["tests"])):
        t = _mapping(f"tests[{i}]", t, {"center", "width", "amplitude"})
        w = _num(f"tests[{i}].width", t.get("width", 0.5), positive=True, allow_zero=False)
        c = _num(f"tests[{i}].center", t.get("center", 0.0))
        amp = t.get("amplitude", 1.0 if ncomp == 1 else [1.0, 0.0])
        amp = tuple(_num(f"tests[{i}].amplitude[{j}]", a) for j, a in
                    enumerate(_list(f"tests[{i}].amplitude", amp, ncomp))) if ncomp > 1 else (
            _num(f"tests[{i}].amplitude", amp),)
        tests.append(TestSpec(c, w, amp))
    if not tests:
        raise ConfigError("tests", "need at least one test field")

    tols = dict(DEFAULT_TOLERANCES)
    user = _mapping("tolerances", doc.get("tolerances", {}) or {}, set(DEFAULT_TOLERANCES))
    for src in (user, overrides or {}):
        for k, v in src.items():
            if k not in DEFAULT_TOLERANCES:
                raise ConfigError(f"tolerances.{k}", "unknown check name")
            tols[k] = _num(f"tolerances.{k}", v, positive=True)

    phases = tuple(_num(f"phases[{i}]", p) for i, p in enumerate(_list("phases", d.get("phases", []))))
    seed = int(_num("seed", d.get("seed", 0)))
    point = d.get("point")
    if point is not None:
        point = tuple(_num(f"point[{i}]", p) for i, p in enumerate(_list("point", point, dim)))
        for i, (v, (lo, hi)) in enumerate(zip(point, box)):
            if not lo <= v <= hi:
                raise ConfigError(f"point[{i}]", "outside the base box")

    prop = _mapping("propagate", d.get("propagate", {}) or {},
                    {"center", "width", "amplitude", "operator", "range"})
    propagate = {
        "center": _num("propagate.center", prop.get("center", 0.0)),
        "width": _num("propagate.width", prop.get("width", 0.1), positive=True, allow_zero=False),
        "amplitude": _num("propagate.amplitude", prop.get("amplitude", 1.0)),
        "operator": prop.get("operator", "retarded"),
        "range": [_num(f"propagate.range[{i}]", v)
                  for i, v in enumerate(_list("propagate.range", prop.get("range", [-3.0, 3.0]), 2))],
    }
    if propagate["operator"] not in ("retarded", "advanced", "causal"):
        raise ConfigError("propagate.operator", "expected retarded, advanced or causal")
    if not propagate["range"][0] < propagate["range"][1]:
        raise ConfigError("propagate.range", "lower end must be below upper end")

    return RunConfig(scen, tuple(box), grid, density, mass, tuple(tests), tols, phases, seed,
                     point, propagate)


def load_config(path, overrides=None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("", f"malformed YAML in {path}: {exc}") from None
    return parse_config(doc, overrides)


def parse_tolerance_overrides(items):
    """``["name=value", ...]`` to a dict; raises ConfigError on bad syntax."""
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise ConfigError("--tol", f"expected name=value, got {item!r}")
        out[name.strip()] = _num(f"--tol {name.strip()}", value.strip(), positive=True)
    return out
