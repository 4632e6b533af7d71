"""Oscillator strengths, the detected transition energy and the well-width scan."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .constants import HBAR2_2M0 as HB
from .materials import BinaryTable
from .poisson import ChargeModel
from .scf import SCFConfig, run_scf
from .schrodinger import StationaryState
from .structure import CASCADE_WELL_BUDGET, cascade_stack

_GL_X, _GL_W = leggauss(32)


class InsufficientStatesError(ValueError):
    pass


def layer_dipoles(a: StationaryState, b: StationaryState) -> np.ndarray:
    """int z psi_a psi_b dz over each physical layer (nm)."""
    p = a.potential
    if b.potential is not p:
        raise ValueError("states belong to different potentials")
    half = 0.5 * p.widths
    z = 0.5 * (p.z_left + p.z_right)[:, None] + half[:, None] * _GL_X[None, :]
    seg = np.repeat(np.arange(p.n_segments)[:, None], len(_GL_X), axis=1)
    prod = (a.psi(z.ravel(), seg.ravel()) * b.psi(z.ravel(), seg.ravel())).reshape(z.shape)
    per_segment = half * ((z * prod) @ _GL_W)
    return np.bincount(p.layer, weights=per_segment, minlength=p.layer.max() + 1)


def _layer_masses(state: StationaryState) -> np.ndarray:
    p = state.potential
    n = p.layer.max() + 1
    return np.array([p.mass[p.layer == i][0] for i in range(n)])


def oscillator_strength(a: StationaryState, b: StationaryState) -> float:
    """f_ab = (E_b - E_a)/hb * sum_p m_p (int_p z psi_a psi_b dz)^2, hb = hbar^2/2m0.

    Positive for an upward transition a -> b; swapping the states flips the sign.
    """
    d = layer_dipoles(a, b)
    return (b.energy - a.energy) / HB * float(np.sum(_layer_masses(a) * d**2))


@dataclass(frozen=True)
class TransitionTable:
    """``omega[i, j] = E_j - E_i`` (eV) and ``f[i, j]`` for i -> j (0-based)."""

    energies: np.ndarray
    omega: np.ndarray
    f: np.ndarray

    @classmethod
    def from_states(cls, states: Sequence[StationaryState]) -> "TransitionTable":
        e = np.array([s.energy for s in states])
        n = len(states)
        f = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                f[i, j] = oscillator_strength(states[i], states[j])
                f[j, i] = -f[i, j]
        return cls(e, e[None, :] - e[:, None], f)

    @property
    def n_states(self) -> int:
        return len(self.energies)

    def to_dict(self) -> dict:
        return {
            "energies_meV": [round(float(v) * 1e3, 9) for v in self.energies],
            "omega_meV": [[round(float(v) * 1e3, 9) for v in row] for row in self.omega],
            "f": [[round(float(v), 12) for v in row] for row in self.f],
        }


def detection_energy(table: TransitionTable) -> float:
    """Omega_13 = E_3 - E_1, eV."""
    if table.n_states < 3:
        raise InsufficientStatesError(f"need 3 bound states, found {table.n_states}")
    return float(table.omega[0, 2])


def design_criteria(table: TransitionTable) -> tuple[bool, bool]:
    """(f13 beats every other f1n', f13 beats their sum), using |f| for n' = 2..5."""
    if table.n_states < 3:
        return False, False
    f1 = np.abs(table.f[0, 1:5])
    f13 = f1[1]
    others = np.delete(f1, 1)
    if f13 == 0.0:
        return False, False
    return bool(np.all(f13 > others)), bool(f13 > np.sum(others))


@dataclass(frozen=True)
class ScanRow:
    d: float
    energies: tuple[float, ...] = ()
    f1: tuple[float, ...] = ()
    cond_325: bool = False
    cond_326: bool = False
    converged: bool = False
    iterations: int = 0
    error: str = ""

    def csv_fields(self, n_states: int = 5) -> list[str]:
        e = [f"{v * 1e3:.6f}" for v in self.energies[:n_states]]
        e += [""] * (n_states - len(e))
        f = [f"{v:.8f}" for v in self.f1[:4]]
        f += [""] * (4 - len(f))
        return [f"{self.d:.4f}", *e, *f, str(self.cond_325).lower(), str(self.cond_326).lower(),
                str(self.converged).lower(), str(self.iterations), self.error]


SCAN_HEADER = [
    "d_nm", "E1_meV", "E2_meV", "E3_meV", "E4_meV", "E5_meV",
    "f12", "f13", "f14", "f15", "cond_325", "cond_326", "converged", "iterations", "error",
]


def scan_points(d_min: float, d_max: float, step: float) -> np.ndarray:
    """Grid d_min, d_min + step, ... <= d_max (a single point when step exceeds the range)."""
    if not step > 0:
        raise ValueError("step must be positive")
    if d_max < d_min:
        raise ValueError("empty scan range")
    if not (0.0 <= d_min and d_max <= CASCADE_WELL_BUDGET + 1e-9):
        raise ValueError(f"scan range must lie within [0, {CASCADE_WELL_BUDGET}] nm")
    n = int(math.floor((d_max - d_min) / step + 1e-9))
    return np.round(d_min + step * np.arange(n + 1), 10)


def scan_row(d: float, charge: ChargeModel, config: SCFConfig, table: BinaryTable | None = None) -> ScanRow:
    """Solve the cascade with input-well width ``d`` and summarize it."""
    try:
        res = run_scf(cascade_stack(d, table), charge, config)
        tt = TransitionTable.from_states(res.states)
        c325, c326 = design_criteria(tt)
        return ScanRow(
            float(d),
            tuple(float(e) for e in tt.energies),
            tuple(float(v) for v in tt.f[0, 1:5]) if tt.n_states > 1 else (),
            c325,
            c326,
            res.converged,
            res.iterations_used,
        )
    except Exception as exc:  # recorded in the row, the scan goes on
        return ScanRow(float(d), error=f"{type(exc).__name__}: {exc}")


def _row_star(args):
    return scan_row(*args)


def geometry_scan(
    d_min: float,
    d_max: float,
    step: float,
    config: SCFConfig | None = None,
    charge: ChargeModel | None = None,
    table: BinaryTable | None = None,
    jobs: int = 1,
) -> list[ScanRow]:
    """Scan the input-well width; rows come back in ascending ``d`` whatever ``jobs`` is."""
    config = config or SCFConfig()
    charge = charge or ChargeModel()
    points = scan_points(d_min, d_max, step)
    args = [(float(d), charge, config, table) for d in points]
    if jobs <= 1 or len(points) == 1:
        return [_row_star(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_row_star, args))


def scan_csv(rows: Sequence[ScanRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCAN_HEADER)
    for row in rows:
        writer.writerow(row.csv_fields())
    return buf.getvalue()


def condition_intervals(rows: Sequence[ScanRow], key: str = "both") -> list[tuple[float, float]]:
    """Maximal runs of consecutive rows where the chosen condition holds.

    ``key`` is ``"cond_325"``, ``"cond_326"`` or ``"both"``.
    """
    out = []
    start = prev = None
    for row in rows:
        ok = (row.cond_325 and row.cond_326) if key == "both" else getattr(row, key)
        if ok:
            if start is None:
                start = row.d
            prev = row.d
        elif start is not None:
            out.append((start, prev))
            start = None
    if start is not None:
        out.append((start, prev))
    return out
