"""Three approximations of the spectrum and the tools to compare them.

* ``finite_section_spectrum``: Dirichlet eigenvalues of a box, by Sturm
  bisection;
* ``trace_spectrum``: bands of a periodic approximant, ``|tr| <= 2``;
* ``lyapunov_zero_set``: grid points where ``gamma_N <= epsilon``.

Sets are carried as boolean masks on a uniform :class:`EnergyGrid`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from . import _kernels as K
from .cocycle import LyapunovProfile, lyapunov_profile
from .output import csv_text, to_json, versions
from .pool import map_chunks
from .subshifts import CapExceeded, SubshiftSystem
from .words import PotentialMap, Word

SECTION_CAP = 4096
EIG_REL_TOL = 1e-10


@dataclass(frozen=True)
class EnergyGrid:
    e_min: float
    e_max: float
    points: int = 4001

    def __post_init__(self):
        if not self.e_min < self.e_max:
            raise ValueError("need e_min < e_max")
        if self.points < 2:
            raise ValueError("grid needs at least two points")

    @classmethod
    def around(cls, potential: PotentialMap, points: int = 4001, margin: float = 3.0) -> "EnergyGrid":
        v = potential.array
        return cls(float(v.min()) - margin, float(v.max()) + margin, points)

    @property
    def h(self) -> float:
        return (self.e_max - self.e_min) / (self.points - 1)

    @property
    def energies(self) -> np.ndarray:
        return np.linspace(self.e_min, self.e_max, self.points)

    @property
    def length(self) -> float:
        return self.e_max - self.e_min

    def to_dict(self) -> dict:
        return {"e_min": self.e_min, "e_max": self.e_max, "points": self.points}


def _runs(mask: np.ndarray, value: bool) -> list[tuple[int, int]]:
    """Maximal index runs ``[i, j]`` (inclusive) where ``mask == value``."""
    m = np.concatenate(([False], mask == value, [False])).astype(np.int8)
    d = np.diff(m)
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1) - 1
    return list(zip(starts.tolist(), stops.tolist()))


@dataclass
class SpectrumEstimate:
    grid: EnergyGrid
    mask: np.ndarray
    method: str
    params: dict = field(default_factory=dict)
    label: str = ""
    gamma: np.ndarray | None = None

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (self.grid.points,):
            raise ValueError("mask does not match grid")

    @property
    def measure(self) -> float:
        return self.grid.h * int(self.mask.sum())

    @property
    def bands(self) -> list[tuple[float, float]]:
        E = self.grid.energies
        return [(float(E[i]), float(E[j])) for i, j in _runs(self.mask, True)]

    @property
    def gaps(self) -> list[tuple[float, float]]:
        """Interior gaps as ``(lo, hi)``: the in-set grid points bracketing
        each maximal out-of-set run.  Runs touching the window edge are not
        gaps."""
        E = self.grid.energies
        out = []
        for i, j in _runs(self.mask, False):
            if i > 0 and j < self.grid.points - 1:
                out.append((float(E[i - 1]), float(E[j + 1])))
        return out

    def metadata(self) -> dict:
        return {"kind": "spectrum_estimate", "method": self.method, "system": self.label,
                "params": self.params, "grid": self.grid.to_dict(), "versions": versions()}

    def to_dict(self) -> dict:
        return {"metadata": self.metadata(), "measure": self.measure, "gap_count": len(self.gaps),
                "gaps": [list(g) for g in self.gaps], "bands": [list(b) for b in self.bands],
                "mask": [int(v) for v in self.mask]}

    def to_json(self) -> str:
        return to_json(self.to_dict()) + "\n"

    def to_csv(self) -> str:
        E = self.grid.energies
        if self.gamma is not None:
            rows = ((e, bool(m), g) for e, m, g in zip(E, self.mask, self.gamma))
            return csv_text(self.metadata(), ["E", "mask", "gamma"], rows)
        return csv_text(self.metadata(), ["E", "mask"], ((e, bool(m)) for e, m in zip(E, self.mask)))

    @classmethod
    def from_dict(cls, obj: dict) -> "SpectrumEstimate":
        meta = obj["metadata"]
        g = meta["grid"]
        return cls(EnergyGrid(float(g["e_min"]), float(g["e_max"]), int(g["points"])),
                   np.array(obj["mask"], dtype=bool), meta["method"], meta.get("params", {}), meta.get("system", ""))


# ---------------------------------------------------------------- finite sections


def finite_section_spectrum(x: Word, potential: PotentialMap, interior_filter: bool = False,
                            edge_fraction: float = 0.05, edge_threshold: float = 0.5,
                            cap: int = SECTION_CAP) -> np.ndarray:
    """Eigenvalues of the Dirichlet box ``tridiag(1, v(x_1..x_L), 1)``.

    With ``interior_filter`` the eigenvalues whose normalised eigenvector puts
    more than ``edge_threshold`` of its mass on the outer ``edge_fraction`` of
    the sites (half at each end) are dropped.
    """
    L = len(x)
    if L < 1:
        raise ValueError("finite section needs at least one site")
    if L > cap:
        raise CapExceeded(L, cap, what="finite section")
    diag = np.ascontiguousarray(potential.sample(x), dtype=np.float64)
    eigs = K.bisect_eigenvalues(diag, EIG_REL_TOL)
    if not interior_filter:
        return eigs
    sites = max(1, min(L // 2, int(math.ceil(edge_fraction * L / 2))))
    mass = K.edge_masses(diag, eigs, sites, 3)
    return eigs[mass <= edge_threshold]


def section_estimate(eigenvalues: Sequence[float], grid: EnergyGrid, label: str = "",
                     params: dict | None = None) -> SpectrumEstimate:
    """Mark the grid point nearest to each eigenvalue inside the window."""
    ev = np.asarray(eigenvalues, dtype=float)
    ev = ev[(ev >= grid.e_min - grid.h / 2) & (ev <= grid.e_max + grid.h / 2)]
    idx = np.clip(np.rint((ev - grid.e_min) / grid.h).astype(np.int64), 0, grid.points - 1)
    mask = np.zeros(grid.points, dtype=bool)
    mask[idx] = True
    return SpectrumEstimate(grid, mask, "finite_section", dict(params or {}), label)


# ---------------------------------------------------------------- periodic approximants


def trace_spectrum(p: Word, potential: PotentialMap, grid: EnergyGrid, threads: int = 1,
                   label: str = "", params: dict | None = None) -> SpectrumEstimate:
    """Bands of the periodic operator with period word ``p``: ``|tr M^E(p)| <= 2``."""
    if len(p) < 1:
        raise ValueError("period word must be nonempty")
    vals = np.ascontiguousarray(potential.sample(p), dtype=np.float64)
    logtr = map_chunks(partial(K.log_abs_traces, vals), grid.energies, threads)
    mask = logtr <= math.log(2.0)
    return SpectrumEstimate(grid, mask, "trace", {"period": len(p), **(params or {})}, label)


# ---------------------------------------------------------------- Lyapunov zero set


def epsilon_rule(N: int) -> float:
    """Default threshold: dominate the ``log N / N`` norm offset of ``gamma_N``."""
    return max(0.02, 4.0 * math.log(N) / N)


def profile_grid(profile: LyapunovProfile) -> EnergyGrid:
    E = profile.energies
    grid = EnergyGrid(float(E[0]), float(E[-1]), E.size)
    if not np.allclose(E, grid.energies, rtol=0, atol=1e-9 * max(1.0, grid.length)):
        raise ValueError("profile energies are not a uniform grid")
    return grid


def lyapunov_zero_set(profile: LyapunovProfile, epsilon: float) -> SpectrumEstimate:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    grid = profile_grid(profile)
    return SpectrumEstimate(grid, profile.gamma <= epsilon, "lyapunov_zero",
                            {"N": profile.N, "epsilon": float(epsilon)}, profile.label, profile.gamma)


# ---------------------------------------------------------------- comparisons


def _nearest_distance(points: np.ndarray, targets: np.ndarray) -> np.ndarray:
    if targets.size == 0:
        return np.full(points.size, np.inf)
    j = np.searchsorted(targets, points)
    left = targets[np.clip(j - 1, 0, targets.size - 1)]
    right = targets[np.clip(j, 0, targets.size - 1)]
    return np.minimum(np.abs(points - left), np.abs(points - right))


def points_to_set_distance(points: Sequence[float], s: SpectrumEstimate) -> float:
    """Largest distance from a point of ``points`` to the nearest in-set grid point."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return 0.0
    return float(_nearest_distance(pts, s.grid.energies[s.mask]).max())


def compare_spectra(a: SpectrumEstimate, b: SpectrumEstimate) -> dict:
    """Symmetric-difference measure and one-sided Hausdorff distances."""
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")
    E = a.grid.energies
    ta, tb = E[a.mask], E[b.mask]
    d_ab = float(_nearest_distance(ta, tb).max()) if ta.size else 0.0
    d_ba = float(_nearest_distance(tb, ta).max()) if tb.size else 0.0
    h = a.grid.h
    return {"methods": [a.method, b.method], "grid": a.grid.to_dict(), "h": h,
            "symmetric_difference": h * int(np.count_nonzero(a.mask ^ b.mask)),
            "distance_a_to_b": d_ab, "distance_b_to_a": d_ba,
            "measure_a": a.measure, "measure_b": b.measure}


def cantor_diagnostic(s: SpectrumEstimate, history: Sequence[SpectrumEstimate] = ()) -> dict:
    """Gap census of ``s`` plus the refinement trace over the last three of
    ``history + [s]``."""
    gaps = s.gaps
    widths = [hi - lo for lo, hi in gaps]
    trace = [{"params": e.params, "measure": e.measure, "gap_count": len(e.gaps)} for e in [*history, s][-3:]]
    return {"method": s.method, "params": s.params, "measure": s.measure, "gap_count": len(gaps),
            "largest_gap": max(widths) if widths else 0.0, "refinement_trace": trace,
            "measure_decreasing": all(b["measure"] < a["measure"] for a, b in zip(trace, trace[1:])),
            "gaps_increasing": all(b["gap_count"] > a["gap_count"] for a, b in zip(trace, trace[1:]))}


# ---------------------------------------------------------------- pipelines


def zero_set_refinements(system: SubshiftSystem, Ns: Sequence[int], grid: EnergyGrid,
                         epsilon: float | None = None, threads: int = 1) -> list[SpectrumEstimate]:
    """Lyapunov zero sets at increasing word lengths (``epsilon_rule`` unless fixed)."""
    out = []
    for N in Ns:
        prof = lyapunov_profile(system, grid.energies, N, threads=threads)
        out.append(lyapunov_zero_set(prof, epsilon if epsilon is not None else epsilon_rule(N)))
    return out


def approximant_spectrum(system: SubshiftSystem, k: int, grid: EnergyGrid, threads: int = 1) -> SpectrumEstimate:
    p = system.approximant(k)
    return trace_spectrum(p, system.potential, grid, threads, system.label, {"depth": k})


def window_section(system: SubshiftSystem, start: int, L: int, interior_filter: bool = True) -> np.ndarray:
    """Finite-section eigenvalues of the canonical window's sites ``start .. start+L-1`` (0-based)."""
    w = system.window(start + L)[start:]
    return finite_section_spectrum(w, system.potential, interior_filter)
