"""Run configuration: ``key = value`` files with section headers.

Values resolve in order: built-in defaults, config file, command-line flags.
Unknown sections or keys are rejected with a file:line diagnostic.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError
from .field import (Domain, Field, aronsson43, constant, cone_field, cone_hat_field, paraboloid, plane,
                    radial_perturbation)
from .hamiltonian import Hamiltonian, parse_hamiltonian

COMMANDS = ("cone", "slope", "check", "solve", "classify", "flow", "suite")
PROPERTIES = ("cgca", "cgcb", "amle", "kcomp", "segment", "harnack", "maxprin")

# section -> key -> (type, default, help)
SCHEMA = {
    "run": {
        "seed": (int, 0, "seed for randomised sampling"),
    },
    "hamiltonian": {
        "spec": (str, "isotropic", "isotropic | anisotropic:a11,a12,a22 | shifted:c (prefix hat() to reflect)"),
    },
    "cone": {
        "k": (str, "1.0", "cone levels k1,k2,..."),
        "points": (str, "", "points x,y;x,y;... (default: unit circle directions)"),
        "directions": (int, 360, "number of unit directions when no points are given"),
        "hat": (bool, False, "evaluate the reflected cone"),
    },
    "slope": {
        "field": (str, "cone:1", "field spec"),
        "center": (str, "0,0", "center x,y"),
        "radii": (str, "0.1,0.2,0.4", "increasing radii"),
        "samples": (int, 720, "angular samples per circle"),
    },
    "check": {
        "property": (str, "cgca", "|".join(PROPERTIES)),
        "field": (str, "cone:1", "field spec"),
        "center": (str, "0,0", "region center x,y"),
        "inner": (float, 0.5, "inner radius (0 for a disk)"),
        "outer": (float, 1.0, "outer radius"),
        "tol": (str, "auto", "violation tolerance or auto"),
        "samples": (int, 720, "boundary samples per circle"),
        "interior": (int, 128, "interior lattice size"),
        "level": (float, 1.0, "cone level for the segment property"),
        "pairs": (int, 200, "random point pairs for the segment property"),
        "side": (str, "both", "above | below | both (kcomp)"),
        "radii": (str, "0.4,0.2,0.1,0.05", "circle radii (harnack)"),
    },
    "solve": {
        "problem": (str, "cone", "cone | plane | corollary | data"),
        "field": (str, "cone:1", "boundary data field spec (problem = data)"),
        "radius": (float, 1.0, "disk radius"),
        "n": (int, 65, "nodes per axis"),
        "pinned": (str, "none", "none or x,y,b"),
        "k": (float, 2.0, "cone level (cone and corollary problems)"),
        "tau": (float, 0.0, "pseudo-time step (0 = automatic cap)"),
        "iters": (int, 400_000, "maximum sweeps"),
        "stop_tol": (float, 1e-11, "stop when the max update is below this"),
        "cfl": (float, 0.9, "fraction of the stable step"),
    },
    "classify": {
        "field": (str, "cone:1", "field spec"),
        "center": (str, "0,0", "puncture x,y"),
        "radius": (float, 0.25, "largest radius of the ladders"),
    },
    "flow": {
        "field": (str, "cone:1", "field spec"),
        "start": (str, "1,0", "start point x,y"),
        "step": (float, 1e-3, "time step"),
        "max_steps": (int, 100_000, "maximum steps"),
        "center": (str, "0,0", "target point x,y"),
        "arrival_radius": (str, "auto", "arrival radius or auto"),
    },
    "suite": {
        "criteria": (str, "all", "comma-separated criterion numbers or all"),
    },
}


def _to_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def coerce(section: str, key: str, value, where: str = ""):
    if section not in SCHEMA:
        raise InputError(f"{where}unknown section [{section}]")
    if key not in SCHEMA[section]:
        raise InputError(f"{where}[{section}] unknown key {key!r}")
    typ = SCHEMA[section][key][0]
    if not isinstance(value, str):
        return typ(value)
    try:
        return _to_bool(value) if typ is bool else typ(value.strip())
    except ValueError as exc:
        raise InputError(f"{where}[{section}] {key}: {exc}") from None


def _line_numbers(text: str):
    """(section, key) -> line number, for diagnostics."""
    where, sec = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            sec = m.group(1).strip()
            continue
        m = re.match(r"\s*([^=#;\s][^=]*?)\s*=", line)
        if m and sec is not None:
            where[(sec, m.group(1).strip().lower())] = i
    return where


@dataclass
class RunConfig:
    command: str
    values: dict  # section -> key -> value (resolved)
    source: Optional[str] = None

    def section(self, name: str) -> dict:
        return self.values[name]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    def to_dict(self) -> dict:
        """The resolved config: run, hamiltonian and the command's own section."""
        keep = ["run", "hamiltonian", self.command]
        return {"command": self.command, **{s: dict(self.values[s]) for s in keep}}

    def to_ini(self) -> str:
        d = self.to_dict()
        lines = []
        for sec in ("run", "hamiltonian", self.command):
            lines.append(f"[{sec}]")
            lines += [f"{k} = {_fmt(v)}" for k, v in d[sec].items()]
            lines.append("")
        return "\n".join(lines)

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def hamiltonian(self) -> Hamiltonian:
        return parse_hamiltonian(self.values["hamiltonian"]["spec"])


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else str(v)


def defaults() -> dict:
    return {s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()}


def load_config(command: str, path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Resolve a run config from defaults, an optional file and overrides.

    ``path`` may be an INI file or a ``manifest.json`` written by a previous run.
    ``overrides`` maps (section, key) to raw values (command-line flags).
    """
    if command not in COMMANDS:
        raise InputError(f"unknown command {command!r}")
    vals = defaults()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"config file not found: {path}")
        text = p.read_text()
        if p.suffix == ".json":
            try:
                data = json.loads(text)["config"]
            except (ValueError, KeyError, TypeError):
                raise InputError(f"{path}: not a run manifest") from None
            for sec, kv in data.items():
                if sec == "command":
                    continue
                for key, v in kv.items():
                    vals[sec][key] = coerce(sec, key, v, f"{path}: ")
        else:
            cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
            try:
                cp.read_string(text, source=str(path))
            except configparser.Error as exc:
                raise InputError(f"{path}: {exc}") from None
            lines = _line_numbers(text)
            for sec in cp.sections():
                for key, raw in cp.items(sec):
                    where = f"{path}:{lines.get((sec, key), '?')}: "
                    vals.setdefault(sec, {})
                    vals[sec][key] = coerce(sec, key, raw, where)
    for (sec, key), raw in (overrides or {}).items():
        vals[sec][key] = coerce(sec, key, raw, "command line: ")
    cfg = RunConfig(command, vals, path)
    where = ""
    if path is not None and not str(path).endswith(".json"):
        ln = _line_numbers(Path(path).read_text()).get(("hamiltonian", "spec"))
        where = f"{path}:{ln}: " if ln else f"{path}: "
    try:
        cfg.hamiltonian()
    except InputError as exc:
        raise InputError(f"{where}[hamiltonian] spec: {exc}") from None
    return cfg


# ----------------------------------------------------------------------------
# small value grammars


def parse_point(text: str, what: str = "point"):
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise InputError(f"{what}: expected x,y, got {text!r}") from None
    if v.shape != (2,):
        raise InputError(f"{what}: expected two coordinates, got {text!r}")
    return v


def parse_floats(text: str, what: str = "list"):
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def parse_points(text: str):
    return np.array([parse_point(t, "points") for t in text.split(";") if t.strip()])


def parse_field(text: str, H: Hamiltonian) -> Field:
    """Field specs: plane:p1,p2[:b] | cone:k[:b[:cx,cy]] | cone_hat:k[:b[:cx,cy]] |
    paraboloid:c | constant:c | x43 | perturbed_cone:k:b:amp | grid:PATH."""
    parts = text.strip().split(":")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "plane" and 1 <= len(args) <= 2:
            return plane(parse_point(args[0], "plane slope"), float(args[1]) if len(args) > 1 else 0.0)
        if kind in ("cone", "cone_hat") and 1 <= len(args) <= 3:
            k = float(args[0])
            b = float(args[1]) if len(args) > 1 else 0.0
            c = parse_point(args[2], "cone vertex") if len(args) > 2 else None
            return (cone_field if kind == "cone" else cone_hat_field)(H, k, b, c)
        if kind == "paraboloid" and len(args) == 1:
            return paraboloid(float(args[0]))
        if kind == "constant" and len(args) == 1:
            return constant(float(args[0]))
        if kind == "x43" and not args:
            return aronsson43()
        if kind == "perturbed_cone" and len(args) == 3:
            return cone_field(H, float(args[0]), float(args[1])) + radial_perturbation(float(args[2]))
        if kind == "grid" and len(args) >= 1:
            return read_grid_csv(":".join(args))
    except ValueError as exc:
        raise InputError(f"field spec {text!r}: {exc}") from None
    raise InputError(f"malformed field spec {text!r}")


def read_grid_csv(path: str) -> Field:
    """Grid field from an ``x,y,u`` CSV as written by the solve command."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    except OSError:
        raise InputError(f"grid file not found: {path}") from None
    xs, ys = np.unique(data[:, 0]), np.unique(data[:, 1])
    if xs.size * ys.size != len(data):
        raise InputError(f"{path}: not a full rectangular grid")
    h = float(xs[1] - xs[0])
    vals = np.full((xs.size, ys.size), np.nan)
    vals[np.searchsorted(xs, data[:, 0]), np.searchsorted(ys, data[:, 1])] = data[:, 2]
    return Field.from_grid((xs[0], ys[0]), h, vals, name=f"grid({path})")
