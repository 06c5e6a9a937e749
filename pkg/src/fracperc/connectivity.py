"""Cluster labeling, crossings, strip crossings and boundary-cluster events.

Connectivity is always the lattice adjacency of :mod:`fracperc.index`:
coordinate differences at most one with at least one coordinate equal.
Finite-level crossing of the retained cell grid is the discrete stand-in
for crossing of the limit set; corner-only contact never connects.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .index import LatticeCell, box_edges, edge_cells, neighbor_offsets
from .models import Grid, ParameterError


@dataclass(eq=False)
class ClusterLabels:
    """Cluster assignment for the retained cells of one grid.

    ``cells`` are the sorted flat indices that were labeled; ``labels``
    aligns with them and holds, for every cell, the position within
    ``cells`` of its cluster's first (row-major smallest) member.
    """

    cells: np.ndarray
    labels: np.ndarray
    dims: tuple[int, ...]

    @property
    def sizes(self) -> dict[int, int]:
        if self.cells.size == 0:
            return {}
        counts = np.bincount(self.labels, minlength=self.cells.size)
        return {int(lab): int(counts[lab]) for lab in np.unique(self.labels)}

    def members(self, label: int) -> np.ndarray:
        """Flat cell indices belonging to one cluster."""
        return self.cells[self.labels == label]

    def n_clusters(self) -> int:
        return int(np.unique(self.labels).size)


def _half_offsets(d: int) -> np.ndarray:
    return np.array(neighbor_offsets(d, half=True), dtype=np.int64)


def _full_offsets(d: int) -> np.ndarray:
    return np.array(neighbor_offsets(d, half=False), dtype=np.int64)


def label_flat_cells(cells: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Labels for sorted flat cells of a box with per-axis sides ``dims``."""
    cells = np.asarray(cells, dtype=np.int64)
    dims_arr = np.array(dims, dtype=np.int64)
    return kernels.label_cells(cells, dims_arr, _half_offsets(len(dims)))


def label_clusters(g: Grid) -> ClusterLabels:
    """Union-find cluster labels for the retained level-n cells of ``g``."""
    dims = (g.box,) * g.d
    return ClusterLabels(cells=g.cells, labels=label_flat_cells(g.cells, dims), dims=dims)


def _crossing_from_labels(cells: np.ndarray, labels: np.ndarray,
                          dims: Sequence[int], axis0: int) -> bool:
    """True when one cluster touches both faces of the box along axis0."""
    if cells.size == 0:
        return False
    coords = _decode_box(cells, dims)
    lo = labels[coords[:, axis0] == 0]
    hi = labels[coords[:, axis0] == dims[axis0] - 1]
    if lo.size == 0 or hi.size == 0:
        return False
    return bool(np.intersect1d(lo, hi).size > 0)


def _decode_box(cells: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    out = np.empty((len(cells), len(dims)), dtype=np.int64)
    rem = np.asarray(cells, dtype=np.int64).copy()
    for j in range(len(dims) - 1, -1, -1):
        out[:, j] = rem % dims[j]
        rem //= dims[j]
    return out


def crosses(g: Grid, axis: int = 1) -> bool:
    """True when a retained cluster joins the two opposite faces along
    ``axis`` (1-based).  For axis 1 this is the level-n percolation event."""
    if not (1 <= axis <= g.d):
        raise ParameterError(f"axis must be in 1..{g.d}, got {axis}")
    dims = (g.box,) * g.d
    labels = label_flat_cells(g.cells, dims)
    return _crossing_from_labels(g.cells, labels, dims, axis - 1)


@dataclass(frozen=True)
class StripSpec:
    """Axis-aligned box inside the unit cube with a crossing direction.

    Corners are exact rationals; at level n every boundary must sit on
    the level-n lattice.  ``axis`` (1-based) is the direction in which
    the strip has to be crossed, from its low face to its high face.
    """

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]
    axis: int

    def __post_init__(self):
        d = len(self.lo)
        if len(self.hi) != d:
            raise ParameterError("strip corners have different dimensions")
        if not (1 <= self.axis <= d):
            raise ParameterError(f"strip axis must be in 1..{d}")
        for a, b in zip(self.lo, self.hi):
            if not (0 <= a < b <= 1):
                raise ParameterError(f"strip interval [{a}, {b}] invalid")

    def cell_bounds(self, box: int) -> tuple[np.ndarray, np.ndarray]:
        """Bounds in cell units, requiring lattice alignment at this box."""
        lo = []
        hi = []
        for a, b in zip(self.lo, self.hi):
            av, bv = a * box, b * box
            if av.denominator != 1 or bv.denominator != 1:
                raise ParameterError(f"strip boundary {a}..{b} is not aligned to 1/{box}")
            lo.append(int(av))
            hi.append(int(bv))
        return np.array(lo, dtype=np.int64), np.array(hi, dtype=np.int64)


def strip_crossing(g: Grid, strip: StripSpec) -> bool:
    """True when a retained chain inside the strip joins the strip's two
    faces along its crossing direction."""
    if len(strip.lo) != g.d:
        raise ParameterError("strip dimension does not match grid")
    lo, hi = strip.cell_bounds(g.box)
    coords = g.coords()
    inside = np.all((coords >= lo) & (coords < hi), axis=1)
    sub = coords[inside] - lo
    dims = tuple(int(v) for v in (hi - lo))
    sub_flat = np.sort(_encode_box(sub, dims))
    labels = label_flat_cells(sub_flat, dims)
    return _crossing_from_labels(sub_flat, labels, dims, strip.axis - 1)


def _encode_box(coords: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    if len(coords) == 0:
        return np.empty(0, dtype=np.int64)
    flat = coords[:, 0].astype(np.int64).copy()
    for j in range(1, len(dims)):
        flat = flat * dims[j] + coords[:, j]
    return flat


def gamma_strips(x: tuple[Fraction, Fraction], n_x: int) -> list[StripSpec]:
    """The two horizontal and two vertical strips of width 1/(4 n_x)
    around ``x``, restricted to the ones lying inside the unit square."""
    if n_x < 1:
        raise ParameterError("n_x must be a positive integer")
    w = Fraction(1, 4 * n_x)
    x1, x2 = Fraction(x[0]), Fraction(x[1])
    candidates = [
        StripSpec((Fraction(0), x2 - w), (Fraction(1), x2), axis=1) if x2 - w >= 0 else None,
        StripSpec((Fraction(0), x2), (Fraction(1), x2 + w), axis=1) if x2 + w <= 1 else None,
        StripSpec((x1 - w, Fraction(0)), (x1, Fraction(1)), axis=2) if x1 - w >= 0 else None,
        StripSpec((x1, Fraction(0)), (x1 + w, Fraction(1)), axis=2) if x1 + w <= 1 else None,
    ]
    return [s for s in candidates if s is not None]


def gamma_event(g: Grid, x: tuple, n_x: int) -> bool:
    """Conjunction of long-way crossings in the four strips around ``x``
    (only strips inside the unit square are required).  d=2 only."""
    if g.d != 2:
        raise ParameterError("gamma_event requires d=2")
    return all(strip_crossing(g, s) for s in gamma_strips(x, n_x))


def edge_cluster_event(config: Iterable[LatticeCell], u: int,
                       targets: Sequence[Iterable[LatticeCell]],
                       box: Optional[int] = None,
                       d: Optional[int] = None) -> bool:
    """Single-cluster boundary event on a box of black cells.

    True when one black cluster meets every one-dimensional box edge in
    at least ``u`` cells and touches every target set.  Each target must
    be nonempty and contained in some box edge; violating that raises.
    """
    config = list(config)
    if config:
        box = config[0].box
        d = len(config[0].coords)
    elif box is None or d is None:
        raise ParameterError("empty configuration needs explicit box and d")
    if u < 1:
        raise ParameterError("u must be a positive integer")
    dims = (box,) * d
    edge_sets = [frozenset(edge_cells(box, r, a)) for r, a in box_edges(d)]
    target_sets = []
    for t, target in enumerate(targets):
        cells = frozenset(c.coords if isinstance(c, LatticeCell) else tuple(c)
                          for c in target)
        if not cells:
            raise ParameterError(f"target {t} is empty")
        if not any(cells <= e for e in edge_sets):
            raise ParameterError(f"target {t} is not contained in any box edge")
        target_sets.append(cells)

    coords = np.array(sorted(c.coords for c in config), dtype=np.int64).reshape(-1, d)
    flat = _encode_box(coords, dims)
    labels = label_flat_cells(flat, dims)
    coord_tuples = [tuple(int(v) for v in row) for row in coords]
    by_label: dict[int, set] = {}
    for ct, lab in zip(coord_tuples, labels):
        by_label.setdefault(int(lab), set()).add(ct)
    for members in by_label.values():
        if any(len(members & e) < u for e in edge_sets):
            continue
        if any(not (members & t) for t in target_sets):
            continue
        return True
    return False


def cluster_measure_stats(g: Grid) -> tuple[float, float]:
    """Lebesgue measure of the level-n cells lying in singleton clusters
    and in clusters of two or more cells.  The two parts sum to the
    measure of the retained set."""
    if g.cells.size == 0:
        return 0.0, 0.0
    labeling = label_clusters(g)
    counts = np.bincount(labeling.labels, minlength=g.cells.size)
    member_count = counts[labeling.labels]
    singles = int(np.count_nonzero(member_count == 1))
    multi = int(g.cells.size - singles)
    cell_measure = 1.0 / g.total_cells()
    return singles * cell_measure, multi * cell_measure
