"""Discrete traffic state encoding (DTSE) with non-uniform cells."""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .signals import PHASES, PhaseMachine
from .sim import N_LANES, TrafficSnapshot


@dataclass(frozen=True)
class CellGrid:
    """Cell boundaries in meters upstream of the stop line, ``b[0] = 0``."""

    boundaries: tuple[float, ...]

    def __post_init__(self) -> None:
        b = self.boundaries
        if len(b) < 2 or b[0] != 0.0 or any(y <= x for x, y in zip(b, b[1:])):
            raise ValueError("cell boundaries must start at 0 and increase strictly")

    @property
    def n_cells(self) -> int:
        return len(self.boundaries) - 1

    @property
    def coverage(self) -> float:
        return self.boundaries[-1]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def cell_of(self, distance: float) -> int | None:
        """Cell index for a distance upstream of the stop line, or None."""
        if distance < 0 or distance >= self.coverage:
            return None
        return bisect.bisect_right(self.boundaries, distance) - 1


def build_grid(cells_per_lane: int = 10, coverage: float = 200.0, growth: float = 1.35, first_cell: float = 7.0) -> CellGrid:
    """Geometric cell widths rescaled to tile ``[0, coverage]`` exactly."""
    if cells_per_lane < 1 or coverage <= 0 or growth <= 0 or first_cell <= 0:
        raise ValueError("grid parameters must be positive")
    widths = first_cell * growth ** np.arange(cells_per_lane)
    widths *= coverage / widths.sum()
    bounds = np.concatenate([[0.0], np.cumsum(widths)])
    bounds[-1] = coverage
    return CellGrid(tuple(float(x) for x in bounds))


def state_size(grid: CellGrid, include_phase: bool = True) -> int:
    return N_LANES * grid.n_cells + (len(PHASES) + 2 if include_phase else 0)


def encode(
    snapshot: TrafficSnapshot,
    machine: PhaseMachine,
    grid: CellGrid,
    stop_line: float = 500.0,
    max_green: float = 60.0,
    include_phase: bool = True,
) -> np.ndarray:
    """Presence bits per (lane, cell) followed by the signal context.

    Layout: ``N_LANES * n_cells`` occupancy bits, the active phase one-hot,
    elapsed green divided by ``max_green`` (clipped to 1) and the yellow bit.
    """
    n = grid.n_cells
    out = np.zeros(state_size(grid, include_phase))
    for k, lane in enumerate(snapshot.lanes):
        for v in lane:
            cell = grid.cell_of(stop_line - v.pos)
            if cell is not None:
                out[k * n + cell] = 1.0
    if include_phase:
        base = N_LANES * n
        out[base + int(machine.active)] = 1.0
        out[base + len(PHASES)] = min(1.0, machine.elapsed_green / max_green)
        out[base + len(PHASES) + 1] = 1.0 if machine.in_yellow else 0.0
    return out
