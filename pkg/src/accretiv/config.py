"""Job configuration files.

A config is a TOML file with three sections::

    [grid]
    extents = [2.0, 2.0]        # or lower = [...], upper = [...]
    points = 32                 # int or one per axis
    boundary = "zero"

    [coefficients]
    form = "divergence"         # or "nondivergence"
    params = { lambda = 0.5 }
    A = [["1", "i*lambda*log(abs(x))"], ["-i*lambda*log(abs(x))", "1"]]
    b = ["-x1*abs(x)^2", "-x2*abs(x)^2"]
    c = "-2*abs(x)^2"
    atoms = { c = [{ at = 0.3, re = -1.0, im = 0.0 }] }   # 1-D only

    [options]
    tol = 1e-8

``A`` may be a single expression (times the identity) or an n x n table;
``b`` is a list of n expressions (or one expression when n = 1).  Any entry
can instead be read from an AFLD1 file with ``A_file``, ``b_file``, ``c_file``;
relative paths are taken from the config's directory.  A second drift
``b2`` switches to the general form with two drift terms.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import expr, fieldio
from .coefficients import (CoefficientError, CoefficientSet, from_nondivergence,
                           reduce_general_form)
from .grid import GridError, GridSpec

SECTIONS = ("grid", "coefficients", "options")
ENTRIES = ("A", "b", "b2", "c")
FORMS = ("divergence", "nondivergence")


class ConfigError(ValueError):
    pass


def _grid_from(sec: dict) -> GridSpec:
    unknown = set(sec) - {"dimension", "extents", "lower", "upper", "points", "boundary", "centered"}
    if unknown:
        raise ConfigError(f"[grid]: unknown keys {sorted(unknown)}")
    if "points" not in sec:
        raise ConfigError("[grid]: 'points' is required")
    boundary = sec.get("boundary", "zero")
    try:
        if "lower" in sec or "upper" in sec:
            if "extents" in sec:
                raise ConfigError("[grid]: give either extents or lower/upper, not both")
            lower, upper = list(sec["lower"]), list(sec["upper"])
            pts = sec["points"]
            pts = [pts] * len(lower) if isinstance(pts, int) else list(pts)
            grid = GridSpec(tuple(lower), tuple(upper), tuple(pts), boundary)
        else:
            if "extents" not in sec:
                raise ConfigError("[grid]: 'extents' or 'lower'/'upper' is required")
            grid = GridSpec.box(sec["extents"], sec["points"], boundary,
                                centered=sec.get("centered", True))
    except (GridError, TypeError, KeyError) as exc:
        raise ConfigError(f"[grid]: {exc}") from exc
    if "dimension" in sec and sec["dimension"] != grid.ndim:
        raise ConfigError(f"[grid]: dimension = {sec['dimension']} but the box is {grid.ndim}-dimensional")
    return grid


def _parse_entry(name, value, params):
    """Return the same nesting with every leaf parsed to an AST."""
    if isinstance(value, list):
        return [_parse_entry(f"{name}[{k}]", v, params) for k, v in enumerate(value)]
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected an expression, got a boolean")
    if isinstance(value, (int, float)):
        return expr.Num(float(value))
    try:
        return expr.parse(value, params)
    except expr.ExprError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _shape_of(tree):
    if isinstance(tree, list):
        inner = {_shape_of(t) for t in tree}
        if len(inner) != 1:
            raise ConfigError("ragged expression table")
        return (len(tree),) + inner.pop()
    return ()


def _pretty_tree(tree):
    if isinstance(tree, list):
        return [_pretty_tree(t) for t in tree]
    return expr.pretty(tree)


def _eval_tree(tree, grid, params):
    if isinstance(tree, list):
        return np.stack([_eval_tree(t, grid, params) for t in tree], axis=-1)
    return expr.eval_on_grid(tree, grid, params)


@dataclass
class JobConfig:
    grid: GridSpec
    form: str = "divergence"
    entries: dict = field(default_factory=dict)  # name -> AST tree or Path
    atoms: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    source: Path | None = None

    def free_parameters(self) -> set[str]:
        out = set()
        stack = [v for v in self.entries.values() if not isinstance(v, Path)]
        while stack:
            t = stack.pop()
            if isinstance(t, list):
                stack.extend(t)
            else:
                out |= expr.free_parameters(t)
        return out

    def check_bound(self, extra=()) -> None:
        missing = self.free_parameters() - set(self.params) - set(extra)
        if missing:
            raise ConfigError(f"[coefficients]: unbound parameters {sorted(missing)}")

    def _entry(self, name, params):
        n = self.grid.ndim
        src = self.entries.get(name)
        if isinstance(src, Path):
            try:
                return fieldio.read_field(src, self.grid).values
            except fieldio.FieldFormatError:
                raise
            except OSError as exc:
                raise ConfigError(f"{name}_file: cannot read {src}: {exc}") from exc
        if src is None:
            return None
        val = _eval_tree(src, self.grid, params)
        if name == "A" and val.shape == self.grid.shape:
            val = val[..., None, None] * np.eye(n)
        elif name in ("b", "b2") and val.shape == self.grid.shape and n == 1:
            val = val[..., None]
        return val

    def build(self, params: dict | None = None) -> CoefficientSet:
        """Evaluate every entry on the grid and assemble the coefficient set."""
        p = {**self.params, **(params or {})}
        self.check_bound(p)
        g, n = self.grid, self.grid.ndim
        A = self._entry("A", p)
        b = self._entry("b", p)
        c = self._entry("c", p)
        A = np.broadcast_to(np.eye(n), g.shape + (n, n)) if A is None else A
        b = np.zeros(g.shape + (n,)) if b is None else b
        c = np.zeros(g.shape) if c is None else c
        try:
            if "b2" in self.entries:
                if self.atoms:
                    raise ConfigError("atoms are not supported together with b2")
                return reduce_general_form(A, b, self._entry("b2", p), c, g)
            if self.form == "nondivergence":
                return from_nondivergence(A, b, c, g, atoms=self.atoms)
            return CoefficientSet(g, A, b, c, self.atoms)
        except CoefficientError as exc:
            raise ConfigError(f"[coefficients]: {exc}") from exc

    def resolved(self, params: dict | None = None) -> dict:
        """The config after parsing, suitable for embedding in reports."""
        ent = {k: str(v) if isinstance(v, Path) else _pretty_tree(v)
               for k, v in self.entries.items()}
        atoms = {k: [{"at": a.at, "re": a.weight.real, "im": a.weight.imag} for a in lst]
                 for k, lst in self.atoms.items() if lst}
        return {"source": str(self.source) if self.source else None,
                "grid": self.grid.to_dict(), "form": self.form, "coefficients": ent,
                "atoms": atoms, "params": {**self.params, **(params or {})},
                "options": copy.deepcopy(self.options)}


def _expected_shapes(name, n):
    if name == "A":
        return {(), (n, n)}
    if name in ("b", "b2"):
        return {(n,), ()} if n == 1 else {(n,)}
    return {()}


def _file_shape(name, n, grid):
    return {"A": grid.shape + (n, n), "b": grid.shape + (n,),
            "b2": grid.shape + (n,), "c": grid.shape}[name]


def from_dict(doc: dict, source: Path | None = None) -> JobConfig:
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    if "grid" not in doc:
        raise ConfigError("missing [grid] section")
    grid = _grid_from(doc["grid"])
    n = grid.ndim
    sec = dict(doc.get("coefficients", {}))
    form = sec.pop("form", "divergence")
    if form not in FORMS:
        raise ConfigError(f"[coefficients]: form must be one of {FORMS}")
    params = sec.pop("params", {})
    if not isinstance(params, dict) or not all(isinstance(v, (int, float)) for v in params.values()):
        raise ConfigError("[coefficients]: params must be a table of numbers")
    raw_atoms = sec.pop("atoms", {})
    base = source.parent if source else Path.cwd()
    entries = {}
    for key, value in sec.items():
        name = key[:-5] if key.endswith("_file") else key
        if name not in ENTRIES:
            raise ConfigError(f"[coefficients]: unknown entry {key!r}")
        if name in entries:
            raise ConfigError(f"[coefficients]: {name} given twice")
        if key.endswith("_file"):
            path = (base / value).resolve()
            if not path.is_file():
                raise ConfigError(f"[coefficients]: {key} = {value!r}: file not found ({path})")
            head = fieldio.read_field(path, grid)
            if head.values.shape != _file_shape(name, n, grid):
                raise ConfigError(f"{path}: holds values of shape {head.values.shape}, "
                                  f"{name} needs {_file_shape(name, n, grid)}")
            entries[name] = path
        else:
            tree = _parse_entry(name, value, None)
            shape = _shape_of(tree)
            if shape not in _expected_shapes(name, n):
                raise ConfigError(f"[coefficients]: {name} has shape {shape} on a {n}-dimensional grid")
            entries[name] = tree
    if "b2" in entries and form == "nondivergence":
        raise ConfigError("[coefficients]: b2 only applies to the divergence form")
    if raw_atoms and n != 1:
        raise ConfigError("[coefficients]: atoms are only supported on one-dimensional grids")
    try:
        probe = CoefficientSet.constant(grid, atoms=raw_atoms)
    except (CoefficientError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"[coefficients]: atoms: {exc}") from exc
    atoms = {k: v for k, v in probe.atoms.items() if v}
    return JobConfig(grid, form, entries, atoms, dict(params), dict(doc.get("options", {})), source)


def load(path) -> JobConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(doc, path.resolve())


def loads(text: str) -> JobConfig:
    try:
        return from_dict(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_sweep(spec: str) -> tuple[str, np.ndarray]:
    """``name=lo:hi:steps`` -> (name, values) with ``steps`` points including both ends."""
    try:
        name, rng = spec.split("=", 1)
        lo, hi, steps = rng.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise ConfigError(f"bad sweep {spec!r}, expected name=lo:hi:steps") from exc
    name = name.strip()
    if not name.isidentifier() or steps < 1:
        raise ConfigError(f"bad sweep {spec!r}")
    return name, np.linspace(lo, hi, steps)


def parse_assignment(spec: str) -> tuple[str, float]:
    try:
        name, val = spec.split("=", 1)
        return name.strip(), float(val)
    except ValueError as exc:
        raise ConfigError(f"bad assignment {spec!r}, expected name=value") from exc
