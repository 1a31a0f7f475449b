"""Strict TOML experiment configuration.

Example::

    seed = 0
    output = "out"

    [space]
    d = 1
    n_cut = 20

    [T]
    preset = "vacuum"

    [[regions]]
    kind = "ball"
    center = [0.0, 0.0]
    radius = 2.0

Unknown keys anywhere are errors. ``T`` and ``S`` accept exactly one of
``preset`` ("vacuum"), ``occupation`` (a Fock projector), ``blocks``,
``blocks_file`` or ``matrix``. ``S`` defaults to the vacuum.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fockspace import MAX_DIM, FockSpace, build_space, projector, vacuum
from .galilei import GalileiElement
from .io import FormatError, blocks_from_dict, load_blocks, operator_from_dict
from .regions import Ball, Box, QuadratureRule, Union
from .rotinv import InvariantBlocks, build_invariant


class ConfigError(ValueError):
    """The configuration document does not parse or names impossible settings."""


TOP_KEYS = {"seed", "output", "space", "T", "S", "regions", "quadrature", "density", "sample", "verify"}
SECTION_KEYS = {
    "space": {"d", "n_cut", "mass", "max_dim"},
    "operator": {"preset", "occupation", "blocks", "blocks_file", "matrix"},
    "quadrature": {"nodes", "scheme", "bbox", "angular_nodes"},
    "density": {"grid", "range"},
    "sample": {"n", "half_width", "nodes", "batch"},
    "verify": {
        "nodes", "splits", "cov_nodes", "rot_nodes", "formal_nodes", "guard",
        "translations", "cov_region", "rot_region",
    },
}
REGION_KEYS = {
    "box": {"kind", "name", "bounds"},
    "ball": {"kind", "name", "center", "radius"},
    "union": {"kind", "name", "members"},
}


def _strict(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"[{where}] must be a table")
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(extra)}")


def _int(x, where, lo=None):
    if not isinstance(x, int) or isinstance(x, bool) or (lo is not None and x < lo):
        raise ConfigError(f"{where} must be an integer" + (f" >= {lo}" if lo is not None else ""))
    return x


def _float(x, where):
    if not isinstance(x, (int, float)) or isinstance(x, bool):
        raise ConfigError(f"{where} must be a number")
    return float(x)


def _array(x, where, shape=None):
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} must be numeric") from exc
    if shape is not None and arr.shape != shape:
        raise ConfigError(f"{where} has shape {arr.shape}, expected {shape}")
    return arr


@dataclass(frozen=True)
class OperatorSpec:
    """One of the accepted ways to name ``T`` or ``S``; ``kind`` says which."""

    kind: str
    value: object = None

    def build(self, space: FockSpace) -> np.ndarray:
        """Return the density matrix; raises ``ValidationError`` if invalid."""
        if self.kind == "preset":
            return vacuum(space).matrix
        if self.kind == "occupation":
            return projector(space, tuple(self.value)).matrix
        if self.kind == "blocks":
            return build_invariant(space, self.value).matrix
        return np.asarray(self.value)

    def blocks(self) -> InvariantBlocks | None:
        return self.value if self.kind == "blocks" else None


def _operator(doc: dict, where: str, base: Path) -> OperatorSpec:
    _strict(doc, SECTION_KEYS["operator"], where)
    if len(doc) != 1:
        raise ConfigError(f"[{where}] needs exactly one of {sorted(SECTION_KEYS['operator'])}")
    (key, val), = doc.items()
    try:
        if key == "preset":
            if val != "vacuum":
                raise ConfigError(f"[{where}] unknown preset {val!r}; only 'vacuum' is defined")
            return OperatorSpec("preset", val)
        if key == "occupation":
            return OperatorSpec("occupation", [_int(n, f"{where}.occupation", 0) for n in val])
        if key == "blocks":
            return OperatorSpec("blocks", blocks_from_dict(val))
        if key == "blocks_file":
            path = Path(val) if Path(val).is_absolute() else base / val
            return OperatorSpec("blocks", load_blocks(path))
        return OperatorSpec("matrix", operator_from_dict(val))
    except (FormatError, OSError, json.JSONDecodeError, TypeError) as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def parse_region(doc: dict, d: int, where: str = "regions"):
    kind = doc.get("kind") if isinstance(doc, dict) else None
    if kind not in REGION_KEYS:
        raise ConfigError(f"{where}: kind must be one of {sorted(REGION_KEYS)}")
    _strict(doc, REGION_KEYS[kind], where)
    try:
        if kind == "box":
            return Box(_array(doc["bounds"], f"{where}.bounds", (2 * d, 2)))
        if kind == "ball":
            return Ball(_array(doc["center"], f"{where}.center", (2 * d,)), _float(doc["radius"], f"{where}.radius"))
        members = doc["members"]
        if not isinstance(members, list):
            raise ConfigError(f"{where}.members must be a list")
        parsed = [parse_region(m, d, f"{where}.members") for m in members]
        if any(isinstance(m, Union) for m in parsed):
            raise ConfigError(f"{where}: nested unions are not supported")
        return Union(tuple(parsed), d=d)
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key {exc}") from exc
    except ValueError as exc:  # RegionError
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    n_cut: int
    mass: float = 1.0
    max_dim: int = MAX_DIM
    T: OperatorSpec = OperatorSpec("preset", "vacuum")
    S: OperatorSpec = OperatorSpec("preset", "vacuum")
    regions: tuple = ()
    region_names: tuple = ()
    quadrature: QuadratureRule = QuadratureRule()
    density_grid: tuple = ()
    density_range: np.ndarray = None
    sample: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    seed: int = 0
    output: Path = Path("out")

    def space(self) -> FockSpace:
        return build_space(self.d, self.n_cut, self.mass, max_dim=self.max_dim)


def _density(doc: dict, d: int):
    _strict(doc, SECTION_KEYS["density"], "density")
    grid = doc.get("grid", 41)
    grid = (grid,) * (2 * d) if isinstance(grid, int) else tuple(grid)
    if len(grid) != 2 * d:
        raise ConfigError(f"density.grid needs {2 * d} counts")
    for g in grid:
        _int(g, "density.grid", 1)
    rng = doc.get("range", [-4.0, 4.0])
    rng = _array(rng, "density.range")
    if rng.shape == (2,):
        rng = np.tile(rng, (2 * d, 1))
    if rng.shape != (2 * d, 2) or np.any(rng[:, 1] < rng[:, 0]):
        raise ConfigError(f"density.range must be [lo, hi] or {2 * d} such rows with lo <= hi")
    return grid, rng


def _sample(doc: dict) -> dict:
    _strict(doc, SECTION_KEYS["sample"], "sample")
    out = {"n": _int(doc.get("n", 1000), "sample.n", 1)}
    if "half_width" in doc:
        out["half_width"] = _float(doc["half_width"], "sample.half_width")
    if "nodes" in doc:
        out["nodes"] = _int(doc["nodes"], "sample.nodes", 2)
    if "batch" in doc:
        out["batch"] = _int(doc["batch"], "sample.batch", 1)
    return out


def _verify(doc: dict, d: int) -> dict:
    _strict(doc, SECTION_KEYS["verify"], "verify")
    out = {}
    for key in ("nodes", "cov_nodes", "rot_nodes", "formal_nodes"):
        if key in doc:
            out[key] = _int(doc[key], f"verify.{key}", 2)
    if "guard" in doc:
        out["guard"] = _int(doc["guard"], "verify.guard", 0)
    if "splits" in doc:
        out["splits"] = tuple(_int(s, "verify.splits", 1) for s in doc["splits"])
        if len(out["splits"]) != 2 * d:
            raise ConfigError(f"verify.splits needs {2 * d} counts")
    for key in ("cov_region", "rot_region"):
        if key in doc:
            out[key] = parse_region(doc[key], d, f"verify.{key}")
    if "translations" in doc:
        elems = []
        for i, t in enumerate(doc["translations"]):
            _strict(t, {"a", "v"}, f"verify.translations[{i}]")
            a = _array(t.get("a", [0.0] * d), f"verify.translations[{i}].a", (d,))
            v = _array(t.get("v", [0.0] * d), f"verify.translations[{i}].v", (d,))
            elems.append(GalileiElement(a, v))
        out["translations"] = elems
    return out


def _check_writable(path: Path):
    probe = path
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir() or not os.access(probe, os.W_OK):
        raise ConfigError(f"output path {path} is not writable")


def parse_config(doc: dict, base: Path = Path(".")) -> ExperimentConfig:
    """Validate a parsed TOML document and build an :class:`ExperimentConfig`."""
    _strict(doc, TOP_KEYS, "top level")
    if "space" not in doc:
        raise ConfigError("missing [space] section")
    sp = doc["space"]
    _strict(sp, SECTION_KEYS["space"], "space")
    try:
        d = _int(sp["d"], "space.d")
        n_cut = _int(sp["n_cut"], "space.n_cut", 0)
    except KeyError as exc:
        raise ConfigError(f"[space] missing key {exc}") from exc
    if d not in (1, 3):
        raise ConfigError(f"space.d must be 1 or 3, got {d}")
    mass = _float(sp.get("mass", 1.0), "space.mass")
    if mass <= 0:
        raise ConfigError("space.mass must be positive")
    kw = dict(d=d, n_cut=n_cut, mass=mass, max_dim=_int(sp.get("max_dim", MAX_DIM), "space.max_dim", 1))

    for name in ("T", "S"):
        if name in doc:
            kw[name] = _operator(doc[name], name, base)

    regions = doc.get("regions", [])
    if not isinstance(regions, list):
        raise ConfigError("regions must be an array of tables ([[regions]])")
    kw["regions"] = tuple(parse_region(r, d, f"regions[{i}]") for i, r in enumerate(regions))
    kw["region_names"] = tuple(r.get("name", f"region{i}") for i, r in enumerate(regions))

    if "quadrature" in doc:
        q = doc["quadrature"]
        _strict(q, SECTION_KEYS["quadrature"], "quadrature")
        try:
            kw["quadrature"] = QuadratureRule(
                nodes=q.get("nodes", 60) if isinstance(q.get("nodes", 60), int) else tuple(q["nodes"]),
                scheme=q.get("scheme", "gauss-legendre"),
                bbox=Box(_array(q["bbox"], "quadrature.bbox", (2 * d, 2))) if "bbox" in q else None,
                angular_nodes=q.get("angular_nodes"),
            )
        except (ValueError, RuntimeError) as exc:
            raise ConfigError(f"[quadrature] {exc}") from exc

    kw["density_grid"], kw["density_range"] = _density(doc.get("density", {}), d)
    kw["sample"] = _sample(doc.get("sample", {}))
    kw["verify"] = _verify(doc.get("verify", {}), d)
    kw["seed"] = _int(doc.get("seed", 0), "seed", 0)
    out = doc.get("output", "out")
    if not isinstance(out, str):
        raise ConfigError("output must be a path string")
    kw["output"] = Path(out) if Path(out).is_absolute() else base / out
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax: {exc}") from exc
    return parse_config(doc, path.parent)


def prepare_output(path: Path) -> Path:
    _check_writable(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
