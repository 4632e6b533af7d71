"""Composition and temperature dependent constants of Al(x)Ga(1-x)N."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

#: fraction of the bandgap difference taken up by the conduction band
CONDUCTION_SHARE = 0.765

_FIELDS = (
    "effective_mass",
    "dielectric",
    "eg0",
    "varshni_a",
    "varshni_b",
    "p_sp",
    "e31",
    "e33",
    "c13",
    "c33",
    "a_lattice",
)


class MaterialsError(ValueError):
    """Raised for malformed parameter files or out-of-range compositions."""


@dataclass(frozen=True)
class MaterialParams:
    """Constants of one composition; units as in the shipped data file."""

    x: float
    effective_mass: float
    dielectric: float
    eg0: float
    varshni_a: float
    varshni_b: float
    p_sp: float
    e31: float
    e33: float
    c13: float
    c33: float
    a_lattice: float

    def __post_init__(self):
        if self.effective_mass <= 0:
            raise MaterialsError("effective_mass must be positive")
        if self.dielectric <= 1:
            raise MaterialsError("dielectric constant must exceed 1")
        if self.c33 <= 0:
            raise MaterialsError("c33 must be positive")
        if self.varshni_b <= 0:
            raise MaterialsError("varshni_b must be positive")


@dataclass(frozen=True)
class BinaryTable:
    """GaN and AlN endpoint constants plus the bandgap bowing parameter.

    ``polarization_rule`` selects how spontaneous and piezoelectric
    polarizations of the alloy are interpolated: ``"vegard"`` is the linear
    rule ``x P(AlN) + (1-x) P(GaN)``; ``"literal"`` evaluates
    ``P(AlN) + (1-x) P(GaN)`` for comparison purposes only.
    """

    gan: MaterialParams
    aln: MaterialParams
    bowing_alpha: float = 0.7
    polarization_rule: str = "vegard"
    source: str = field(default="builtin", compare=False)

    def __post_init__(self):
        if self.polarization_rule not in ("vegard", "literal"):
            raise MaterialsError(f"unknown polarization_rule {self.polarization_rule!r}")

    def replace(self, **changes) -> "BinaryTable":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {"bowing_alpha": self.bowing_alpha, "polarization_rule": self.polarization_rule}
        for name, params in (("GaN", self.gan), ("AlN", self.aln)):
            out[name] = {f: getattr(params, f) for f in _FIELDS}
        return out


def _binary(x: float, values: Mapping, name: str) -> MaterialParams:
    missing = [f for f in _FIELDS if f not in values]
    if missing:
        raise MaterialsError(f"{name}: missing field(s) {', '.join(missing)}")
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise MaterialsError(f"{name}: unknown field(s) {', '.join(unknown)}")
    try:
        kwargs = {f: float(values[f]) for f in _FIELDS}
    except (TypeError, ValueError) as exc:
        raise MaterialsError(f"{name}: non-numeric value ({exc})") from None
    return MaterialParams(x=x, **kwargs)


def table_from_dict(data: Mapping, source: str = "dict") -> BinaryTable:
    """Build a :class:`BinaryTable` from the mapping layout of the data file."""
    if not isinstance(data, Mapping):
        raise MaterialsError("materials data must be a mapping")
    for key in ("GaN", "AlN"):
        if key not in data:
            raise MaterialsError(f"materials data lacks the {key} section")
    return BinaryTable(
        gan=_binary(0.0, data["GaN"], "GaN"),
        aln=_binary(1.0, data["AlN"], "AlN"),
        bowing_alpha=float(data.get("bowing_alpha", 0.7)),
        polarization_rule=str(data.get("polarization_rule", "vegard")),
        source=source,
    )


def load_table(path: str | Path | None = None) -> BinaryTable:
    """Load binary constants from ``path`` or the built-in data file."""
    if path is None:
        text = resources.files("nitride_rts").joinpath("data/binaries.yaml").read_text()
        source = "builtin"
    else:
        path = Path(path)
        if not path.is_file():
            raise MaterialsError(f"materials file not found: {path}")
        text = path.read_text()
        source = str(path)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MaterialsError(f"cannot parse materials file: {exc}") from None
    return table_from_dict(data, source=source)


def default_table() -> BinaryTable:
    return load_table(None)


def _check_fraction(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or not np.all(np.isfinite(x)):
        raise MaterialsError("Al fraction must lie in [0, 1]")
    return x


def _check_temperature(T):
    T = np.asarray(T, dtype=float)
    if np.any(T < 0) or not np.all(np.isfinite(T)):
        raise MaterialsError("temperature must be non-negative")
    return T


def bandgap(x, T, table: BinaryTable | None = None):
    """Bandgap of Al(x)Ga(1-x)N in eV from the Varshni relation with bowing."""
    table = table or default_table()
    x = _check_fraction(x)
    T = _check_temperature(T)
    gan, aln = table.gan, table.aln
    eg0 = x * aln.eg0 + (1 - x) * gan.eg0 + table.bowing_alpha * x * (1 - x)
    a = x * aln.varshni_a + (1 - x) * gan.varshni_a
    b = x * aln.varshni_b + (1 - x) * gan.varshni_b
    out = eg0 - a * T**2 / (b + T)
    return float(out) if out.ndim == 0 else out


def conduction_offset(x, T, table: BinaryTable | None = None):
    """Conduction band edge of Al(x)Ga(1-x)N above that of GaN, eV."""
    table = table or default_table()
    out = CONDUCTION_SHARE * (np.asarray(bandgap(x, T, table)) - bandgap(0.0, T, table))
    return float(out) if np.ndim(out) == 0 else out


def interpolate(x: float, table: BinaryTable | None = None) -> MaterialParams:
    """Linear (Vegard) interpolation of every constant between GaN and AlN.

    The T = 0 bandgap includes the bowing term; use :func:`bandgap` for the
    temperature-dependent value.
    """
    table = table or default_table()
    x = float(_check_fraction(x))
    if x == 0.0:
        return table.gan
    if x == 1.0:
        return table.aln
    values = {f: x * getattr(table.aln, f) + (1 - x) * getattr(table.gan, f) for f in _FIELDS}
    values["eg0"] = bandgap(x, 0.0, table)
    return MaterialParams(x=x, **values)
