"""Benchmark scenarios: regions, templates and scenario files.

A scenario bundles a linear system, an initial state, a horizon, state and
input boxes, a set of named rectangles and a formula template.  Region
coordinates only ever come from scenario files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .formula import (Always, Eventually, Formula, Pred, Predicate, Until,
                      conj, disj, formula_length)
from .parser import parse_formula
from .robustness import HorizonError
from .systems import Box, LinearSystem, double_integrator

REGION_KINDS = ("Goal", "Obstacle", "Target", "Key", "Door", "Passage")
TEMPLATES = ("two_target", "narrow_passage", "many_target", "door_puzzle", "custom")
BUNDLED = ("two_target", "narrow_passage", "many_target", "door_puzzle")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    name: str
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    kind: str = "Target"

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ScenarioError(f"region {self.name!r} has an empty rectangle")
        if self.kind not in REGION_KINDS:
            raise ScenarioError(f"region {self.name!r}: unknown kind {self.kind!r}")

    @property
    def rect(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    def contains(self, p) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax


def _axis(n, i, sign):
    a = np.zeros(n)
    a[i] = sign
    return tuple(a)


def _half_planes(r: Region, n: int, dims=(0, 1)) -> list[Predicate]:
    ix, iy = dims
    return [Predicate(_axis(n, ix, -1.0), -r.xmin, f"{r.name}.xmin"),
            Predicate(_axis(n, ix, 1.0), r.xmax, f"{r.name}.xmax"),
            Predicate(_axis(n, iy, -1.0), -r.ymin, f"{r.name}.ymin"),
            Predicate(_axis(n, iy, 1.0), r.ymax, f"{r.name}.ymax")]


def region_inside(r: Region, n: int = 4, dims=(0, 1)) -> Formula:
    """Conjunction of the four half-planes of ``r`` over position ``dims``."""
    return conj(*[Pred(p) for p in _half_planes(r, n, dims)])


def region_outside(r: Region, n: int = 4, dims=(0, 1)) -> Formula:
    """Disjunction of the four flipped half-planes (negation pushed inside)."""
    return disj(*[Pred(p.negated(f"!{p.label}")) for p in _half_planes(r, n, dims)])


@dataclass(frozen=True)
class Scenario:
    name: str
    system: LinearSystem
    x0: tuple[float, ...]
    T: int
    bounds: Box
    regions: tuple[Region, ...]
    template: str
    quad: tuple | None = None          # (Q, R, w_q) as nested tuples
    formula: str | None = None         # DSL text for the custom template
    pin_velocity: bool = True
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.template not in TEMPLATES:
            raise ScenarioError(f"unknown template {self.template!r}")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "regions", tuple(self.regions))
        if len(self.x0) != self.system.n:
            raise ScenarioError("x0 does not match the state dimension")
        if self.T < 0:
            raise ScenarioError("horizon must be nonnegative")
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise ScenarioError("duplicate region names")
        if self.template == "custom" and not self.formula:
            raise ScenarioError("custom template needs a formula")

    def region(self, name: str) -> Region:
        for r in self.regions:
            if r.name == name:
                return r
        raise ScenarioError(f"scenario {self.name!r} has no region {name!r}")

    def with_horizon(self, T: int) -> "Scenario":
        d = to_dict(self)
        d["T"] = int(T)
        return from_dict(d)

    @property
    def pin_mask(self) -> np.ndarray:
        mask = np.ones(self.system.n, dtype=bool)
        if not self.pin_velocity:
            mask[2:] = False
        return mask

    @property
    def quad_cost(self):
        if self.quad is None:
            return None
        Q, R, wq = self.quad
        return np.array(Q, dtype=float), np.array(R, dtype=float), float(wq)


def build_scenario_spec(s: Scenario) -> Formula:
    """Formula of the scenario template at horizon ``s.T``."""
    n, T = s.system.n, s.T
    inside = lambda name: region_inside(s.region(name), n)      # noqa: E731
    outside = lambda name: region_outside(s.region(name), n)    # noqa: E731
    if s.template == "custom":
        regions = {r.name: (region_inside(r, n), region_outside(r, n)) for r in s.regions}
        f = parse_formula(s.formula, n, regions=regions, horizon=T)
    elif s.template == "two_target":
        if T < 6:
            raise HorizonError("two-target needs T >= 6")
        f = conj(*[
            Eventually(0, T - 5, disj(*[Always(0, 5, inside("T1")),
                                       Always(0, 5, inside("T2"))])),
            Always(0, T, outside("O")),
            Eventually(0, T, inside("G")),
        ])
    elif s.template == "narrow_passage":
        obstacles = [outside(f"O{i}") for i in range(1, 5)]
        f = conj(*[Eventually(0, T, disj(*[inside("G1"), inside("G2")])),
                  Always(0, T, conj(*obstacles))])
    elif s.template == "many_target":
        groups = [disj(*[Eventually(0, T, inside(f"T{i}_{j}")) for j in (1, 2)])
                  for i in range(1, 6)]
        f = conj(*groups, *[Always(0, T, outside("O"))])
    elif s.template == "door_puzzle":
        doors = [Until(0, T, outside(f"D{i}"), inside(f"K{i}")) for i in (1, 2)]
        f = conj(*doors, *[Eventually(0, T, inside("G")),
                          Always(0, T, conj(*[outside(f"O{i}") for i in range(1, 6)]))])
    else:
        raise ScenarioError(f"unknown template {s.template!r}")
    if formula_length(f) > T:
        raise HorizonError(f"formula needs horizon {formula_length(f)}, scenario has T={T}")
    return f


# serialization -------------------------------------------------------------

def _box_dict(b: Box) -> dict:
    conv = lambda v: [None if not np.isfinite(x) else x for x in v]  # noqa: E731
    return {"x_lo": conv(b.x_lo), "x_hi": conv(b.x_hi),
            "u_lo": conv(b.u_lo), "u_hi": conv(b.u_hi)}


def _box_from(d: dict, n: int, m: int) -> Box:
    def arr(key, default):
        v = d.get(key)
        if v is None:
            return (default,) * (n if key.startswith("x") else m)
        return tuple(default if x is None else float(x) for x in v)
    inf = float("inf")
    return Box(arr("x_lo", -inf), arr("x_hi", inf), arr("u_lo", -inf), arr("u_hi", inf))


def to_dict(s: Scenario) -> dict:
    if s.system == double_integrator():
        system = "double_integrator"
    else:
        system = {"A": s.system.A.tolist(), "B": s.system.B.tolist()}
    d = {
        "name": s.name,
        "system": system,
        "x0": list(s.x0),
        "T": s.T,
        "bounds": _box_dict(s.bounds),
        "regions": [{"name": r.name, "rect": list(r.rect), "kind": r.kind}
                    for r in s.regions],
        "template": s.template,
        "pin_velocity": s.pin_velocity,
    }
    if s.quad is not None:
        Q, R, wq = s.quad
        d["quad"] = {"Q": [list(r) for r in Q], "R": [list(r) for r in R], "w_q": wq}
    if s.formula is not None:
        d["formula"] = s.formula
    d.update(s.extra)
    return d


def _tuplify(M):
    return tuple(tuple(float(v) for v in row) for row in M)


def from_dict(d: dict) -> Scenario:
    try:
        sysd = d.get("system", "double_integrator")
        if sysd == "double_integrator":
            system = double_integrator()
        elif isinstance(sysd, dict):
            system = LinearSystem(np.array(sysd["A"], dtype=float),
                                  np.array(sysd["B"], dtype=float))
        else:
            raise ScenarioError(f"unknown system {sysd!r}")
        regions = []
        for r in d.get("regions", []):
            xmin, xmax, ymin, ymax = (float(v) for v in r["rect"])
            regions.append(Region(r["name"], xmin, xmax, ymin, ymax, r.get("kind", "Target")))
        quad = None
        if d.get("quad") is not None:
            q = d["quad"]
            n, m = system.n, system.m
            Q = np.array(q.get("Q", np.diag([0, 0, 1, 1][:n] + [0] * max(0, n - 4))),
                         dtype=float).reshape(n, n)
            R = np.array(q.get("R", np.eye(m)), dtype=float).reshape(m, m)
            quad = (_tuplify(Q), _tuplify(R), float(q.get("w_q", 0.001)))
        known = {"name", "system", "x0", "T", "bounds", "regions", "template",
                 "quad", "formula", "pin_velocity"}
        return Scenario(
            name=str(d.get("name", d.get("template", "custom"))),
            system=system,
            x0=tuple(d["x0"]),
            T=int(d["T"]),
            bounds=_box_from(d.get("bounds", {}), system.n, system.m),
            regions=tuple(regions),
            template=d.get("template", "custom"),
            quad=quad,
            formula=d.get("formula"),
            pin_velocity=bool(d.get("pin_velocity", True)),
            extra={k: v for k, v in d.items() if k not in known},
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed scenario: {exc!r}") from exc


def loads(text: str) -> Scenario:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ScenarioError("scenario JSON must be an object")
    return from_dict(d)


def load(path) -> Scenario:
    return loads(Path(path).read_text())


def save(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(to_dict(s), indent=2) + "\n")


def data_path(name: str) -> Path:
    return Path(str(resources.files("stlccp") / "data" / name))


def bundled(name: str) -> Scenario:
    """Load a scenario shipped with the package (``two_target`` etc.)."""
    return load(data_path(f"{name}.json"))


def resolve(spec: str) -> Scenario:
    """A path to a scenario file, or the name of a bundled scenario."""
    p = Path(spec)
    if p.exists():
        return load(p)
    stem = spec[:-5] if spec.endswith(".json") else spec
    if stem in BUNDLED:
        return bundled(stem)
    raise ScenarioError(f"no scenario file or bundled scenario named {spec!r}")
