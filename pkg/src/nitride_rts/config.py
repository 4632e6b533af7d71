"""Run configuration: YAML file plus command-line overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .materials import BinaryTable, MaterialsError, load_table
from .poisson import ChargeModel
from .potential import METHODS
from .scf import SCFConfig
from .structure import CASCADE_ACTIVE_WELL, CASCADE_WELL_BUDGET, LayerStack, StructureError, cascade_stack

#: environment variable naming a materials file used when the config has none
MATERIALS_ENV = "NITRIDE_RTS_MATERIALS"


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` is the dotted name of the culprit."""

    def __init__(self, field: str, message: str, line: int | None = None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}{where}: {message}")


_CHARGE_KEYS = {f.name for f in fields(ChargeModel)} - {"temperature"}
_SCF_KEYS = {f.name for f in fields(SCFConfig)} - {"method"}
_TOP_KEYS = {"structure", "temperature", "method", "charge", "scf", "materials", "output_dir"}
_STRUCT_KEYS = {"d", "layers", "cladding_x"}


@dataclass(frozen=True)
class RunConfig:
    d: float | None = CASCADE_ACTIVE_WELL
    layers: tuple[tuple[float, float], ...] | None = None
    cladding_x: float = 1.0
    temperature: float = 300.0
    method: str = "full"
    charge: dict = field(default_factory=dict)
    scf: dict = field(default_factory=dict)
    materials: str | None = None
    output_dir: str = "results"

    def override(self, **changes) -> "RunConfig":
        """Copy with non-None ``changes``; dotted ``charge.x`` / ``scf.x`` keys go into the sections."""
        top, charge, scf = {}, dict(self.charge), dict(self.scf)
        for key, value in changes.items():
            if value is None:
                continue
            if key.startswith("charge."):
                charge[key[7:]] = value
            elif key.startswith("scf."):
                scf[key[4:]] = value
            else:
                top[key] = value
        if "d" in top:
            top["layers"] = None
        return validate(replace(self, charge=charge, scf=scf, **top))

    def table(self) -> BinaryTable:
        path = self.materials or os.environ.get(MATERIALS_ENV) or None
        try:
            return load_table(path)
        except MaterialsError as exc:
            raise ConfigError("materials", str(exc)) from None

    def stack(self, table: BinaryTable | None = None) -> LayerStack:
        table = table or self.table()
        try:
            if self.layers is not None:
                return LayerStack.build(self.layers, table, self.cladding_x)
            return cascade_stack(self.d, table)
        except StructureError as exc:
            name = "structure.layers" if self.layers is not None else "structure.d"
            raise ConfigError(name, str(exc)) from None

    def charge_model(self) -> ChargeModel:
        try:
            return ChargeModel(temperature=self.temperature, **self.charge)
        except (TypeError, ValueError) as exc:
            raise ConfigError("charge", str(exc)) from None

    def scf_config(self) -> SCFConfig:
        try:
            return SCFConfig(method=self.method, **self.scf)
        except (TypeError, ValueError) as exc:
            raise ConfigError("scf", str(exc)) from None

    def resolved(self) -> dict:
        """Every setting after defaults and overrides, for embedding in outputs."""
        table = self.table()
        charge = self.charge_model()
        scf = self.scf_config()
        structure = {"cladding_x": self.cladding_x}
        if self.layers is not None:
            structure["layers"] = [list(l) for l in self.layers]
        else:
            structure["d"] = self.d
        return {
            "structure": structure,
            "temperature": self.temperature,
            "method": self.method,
            "charge": {
                "n_d": charge.n_d,
                "doped_layers": list(charge.doped_layers),
                "g": charge.g,
                "donor_binding": charge.donor_binding,
                "donor_level": charge.donor_level,
                "fermi_level": charge.fermi_level,
            },
            "scf": scf.to_dict(),
            "materials": {"source": table.source, **table.to_dict()},
        }


def _number(value, name: str, lo=None, hi=None, strict_lo=False) -> float:
    if isinstance(value, bool):
        raise ConfigError(name, "expected a number")
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, got {value!r}") from None
    if lo is not None and (x <= lo if strict_lo else x < lo):
        raise ConfigError(name, f"must be {'>' if strict_lo else '>='} {lo}, got {x}")
    if hi is not None and x > hi:
        raise ConfigError(name, f"must be <= {hi}, got {x}")
    return x


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.method not in METHODS:
        raise ConfigError("method", f"must be one of {', '.join(METHODS)}, got {cfg.method!r}")
    _number(cfg.temperature, "temperature", 0.0, strict_lo=True)
    _number(cfg.cladding_x, "structure.cladding_x", 0.0, 1.0)
    if cfg.layers is None:
        _number(cfg.d, "structure.d", 0.0, CASCADE_WELL_BUDGET)
    for key in cfg.charge:
        if key not in _CHARGE_KEYS:
            raise ConfigError(f"charge.{key}", "unknown field")
    for key in cfg.scf:
        if key not in _SCF_KEYS:
            raise ConfigError(f"scf.{key}", "unknown field")
    if cfg.materials is not None and not Path(cfg.materials).is_file():
        raise ConfigError("materials", f"file not found: {cfg.materials}")
    cfg.charge_model()
    cfg.scf_config()
    return cfg


def _line_of(node, key: str) -> int | None:
    if isinstance(node, yaml.MappingNode):
        for k, _ in node.value:
            if k.value == key:
                return k.start_mark.line + 1
    return None


def from_mapping(data: Mapping[str, Any] | None, node=None) -> RunConfig:
    data = dict(data or {})
    for key in data:
        if key not in _TOP_KEYS:
            raise ConfigError(key, "unknown field", _line_of(node, key))
    kwargs: dict[str, Any] = {}
    struct = data.get("structure") or {}
    if not isinstance(struct, Mapping):
        raise ConfigError("structure", "expected a mapping", _line_of(node, "structure"))
    for key in struct:
        if key not in _STRUCT_KEYS:
            raise ConfigError(f"structure.{key}", "unknown field", _line_of(node, "structure"))
    if "layers" in struct:
        layers = struct["layers"]
        try:
            kwargs["layers"] = tuple((float(x), float(d)) for x, d in layers)
        except (TypeError, ValueError):
            raise ConfigError("structure.layers", "expected a list of [x, thickness] pairs",
                              _line_of(node, "structure")) from None
        kwargs["d"] = None
    elif "d" in struct:
        kwargs["d"] = struct["d"]
    if "cladding_x" in struct:
        kwargs["cladding_x"] = struct["cladding_x"]
    for key in ("temperature", "method", "materials", "output_dir"):
        if key in data and data[key] is not None:
            kwargs[key] = data[key]
    for key in ("charge", "scf"):
        section = data.get(key) or {}
        if not isinstance(section, Mapping):
            raise ConfigError(key, "expected a mapping", _line_of(node, key))
        kwargs[key] = dict(section)
    try:
        cfg = RunConfig(**kwargs)
        return validate(cfg)
    except ConfigError as exc:
        if exc.line is None:
            head = exc.field.split(".")[0]
            raise ConfigError(exc.field, str(exc).split(": ", 1)[1], _line_of(node, head)) from None
        raise


def load_config(path: str | Path | None) -> RunConfig:
    """Read a YAML run configuration (defaults only when ``path`` is None)."""
    if path is None:
        return validate(RunConfig())
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    text = path.read_text()
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError("config", f"cannot parse YAML: {exc.problem}", line) from None
    if data is not None and not isinstance(data, Mapping):
        raise ConfigError("config", "top level must be a mapping")
    return from_mapping(data, node)
