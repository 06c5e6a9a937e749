"""Cube addressing, ordering, exact geometry and lattice adjacency.

A level-n cube of the subdivision of [0,1]^d is addressed by the sequence
of subdivision digits chosen at each level.  The total order used by the
goodness procedure ranks deeper cubes below their ancestors and breaks
ties on the first differing digit, so the unit cube is the maximum and a
post-order walk of the subdivision tree enumerates indices ascending.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

# Digit tuples are compared lexicographically by coordinate, smallest
# first.  Flipping this constant reverses the base order (and with it the
# whole index order); the golden ordering examples in the tests assume
# ascending.
DIGIT_ORDER_ASCENDING = True


@dataclass(frozen=True)
class CubeIndex:
    """Address of one subdivision cube: a sequence of per-level digits.

    ``digits`` holds one d-tuple per level, each entry in {0,...,N-1}.
    The empty sequence addresses the unit cube.
    """

    digits: tuple[tuple[int, ...], ...]
    N: int
    d: int

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("branching factor N must be >= 2")
        if self.d < 2:
            raise ValueError("dimension d must be >= 2")
        for t in self.digits:
            if len(t) != self.d:
                raise ValueError(f"digit tuple {t} does not have d={self.d} entries")
            if any(not (0 <= v < self.N) for v in t):
                raise ValueError(f"digit tuple {t} outside 0..{self.N - 1}")

    @property
    def level(self) -> int:
        return len(self.digits)

    def child(self, digit: tuple[int, ...]) -> "CubeIndex":
        return CubeIndex(self.digits + (tuple(digit),), self.N, self.d)

    def parent(self) -> "CubeIndex":
        if not self.digits:
            raise ValueError("unit cube has no parent")
        return CubeIndex(self.digits[:-1], self.N, self.d)

    def cell_coords(self) -> tuple[int, ...]:
        """Grid coordinates of this cube inside {0,...,N^level-1}^d."""
        coords = [0] * self.d
        for t in self.digits:
            for j in range(self.d):
                coords[j] = coords[j] * self.N + t[j]
        return tuple(coords)


@dataclass(frozen=True)
class LatticeCell:
    """A cell of a finite box {0,...,box-1}^d."""

    coords: tuple[int, ...]
    box: int

    def __post_init__(self):
        if self.box < 1:
            raise ValueError("box side must be positive")
        if any(not (0 <= c < self.box) for c in self.coords):
            raise ValueError(f"coords {self.coords} outside box of side {self.box}")


def compare_indices(a: CubeIndex, b: CubeIndex) -> int:
    """Total order on cube indices; returns -1, 0 or 1 for a<b, a=b, a>b.

    The first differing digit tuple decides (smaller tuple means smaller
    index); if one index is a prefix of the other, the deeper index is
    the smaller one, hence every cube sorts below each of its ancestors.
    """
    if a.N != b.N or a.d != b.d:
        raise ValueError("indices live in different subdivisions (N or d mismatch)")
    for ta, tb in zip(a.digits, b.digits):
        if ta != tb:
            lt = ta < tb if DIGIT_ORDER_ASCENDING else ta > tb
            return -1 if lt else 1
    if a.level == b.level:
        return 0
    return -1 if a.level > b.level else 1


def cube_geometry(i: CubeIndex) -> tuple[tuple[Fraction, ...], Fraction]:
    """Exact (corner, side) of the cube addressed by ``i``.

    The corner is the componentwise sum of digit/N^level contributions;
    exact rationals keep the nesting invariants exact.
    """
    side = Fraction(1, i.N ** i.level)
    coords = i.cell_coords()
    corner = tuple(Fraction(c, i.N ** i.level) for c in coords)
    return corner, side


def adjacent(u: LatticeCell, v: LatticeCell) -> bool:
    """Adjacency of the percolation lattice: all |du_i| <= 1, at least one
    coordinate equal, and u != v.  Corner-only contact is not adjacency."""
    if u.box != v.box or len(u.coords) != len(v.coords):
        raise ValueError("cells live in different boxes")
    return coords_adjacent(u.coords, v.coords)


def coords_adjacent(a: Iterable[int], b: Iterable[int]) -> bool:
    equal = False
    differ = False
    for x, y in zip(a, b):
        delta = abs(x - y)
        if delta > 1:
            return False
        if delta == 0:
            equal = True
        else:
            differ = True
    return equal and differ


def neighbor_offsets(d: int, half: bool = False) -> list[tuple[int, ...]]:
    """All lattice-adjacency offsets in d dimensions (3^d - 2^d - 1 of them).

    With ``half`` only the lexicographically positive half is returned,
    which is enough to enumerate each unordered neighbor pair once.
    """
    offsets = []
    for delta in itertools.product((-1, 0, 1), repeat=d):
        if all(v == 0 for v in delta) or all(v != 0 for v in delta):
            continue
        if half and delta <= (0,) * d:
            continue
        offsets.append(delta)
    return offsets


def box_edges(d: int) -> list[tuple[int, tuple[int, ...]]]:
    """The d*2^(d-1) one-dimensional edges of [0,1]^d.

    Each edge is (axis r, endpoint pattern a): it runs along axis r with
    the other coordinates pinned at a_i in {0,1}.  The pinned pattern is
    normalized with a_r = 0 so each geometric edge appears once.
    """
    edges = []
    for r in range(d):
        for bits in itertools.product((0, 1), repeat=d - 1):
            a = bits[:r] + (0,) + bits[r:]
            edges.append((r, a))
    return edges


def edge_cells(box: int, r: int, a: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Cells of {0,...,box-1}^d whose closed cubes meet edge (r, a)."""
    d = len(a)
    fixed = [0 if a_i == 0 else box - 1 for a_i in a]
    cells = []
    for t in range(box):
        c = list(fixed)
        c[r] = t
        cells.append(tuple(c))
    return cells


def boundary_cells(n: int, N: int, d: int, selector) -> set[LatticeCell]:
    """Level-n cells meeting a named face or edge of the unit cube.

    ``selector`` is either ``("face", axis, "low"|"high")`` with axis in
    1..d, or ``("edge", r, a)`` with r in 1..d and a a 0/1 tuple giving
    the pinned endpoint pattern (the r-th entry is ignored).
    """
    box = N ** n
    if not (isinstance(selector, tuple) and len(selector) == 3):
        raise ValueError("selector must be ('face', axis, side) or ('edge', r, a)")
    kind, first, second = selector
    if kind == "face":
        axis, side = first, second
        if not (1 <= axis <= d) or side not in ("low", "high"):
            raise ValueError(f"invalid face selector {selector!r}")
        value = 0 if side == "low" else box - 1
        cells = set()
        for rest in itertools.product(range(box), repeat=d - 1):
            c = rest[: axis - 1] + (value,) + rest[axis - 1:]
            cells.add(LatticeCell(c, box))
        return cells
    if kind == "edge":
        r, a = first, second
        if not (1 <= r <= d) or len(tuple(a)) != d or any(v not in (0, 1) for v in a):
            raise ValueError(f"invalid edge selector {selector!r}")
        a = tuple(a)[: r - 1] + (0,) + tuple(a)[r:]
        return {LatticeCell(c, box) for c in edge_cells(box, r - 1, a)}
    raise ValueError(f"unknown selector kind {kind!r}")


def indices_ascending(N: int, d: int, n: int) -> Iterator[CubeIndex]:
    """All indices up to level n in ascending order (post-order walk)."""
    digit_tuples = sorted(itertools.product(range(N), repeat=d))
    if not DIGIT_ORDER_ASCENDING:
        digit_tuples.reverse()

    def walk(prefix: tuple[tuple[int, ...], ...]) -> Iterator[CubeIndex]:
        if len(prefix) < n:
            for t in digit_tuples:
                yield from walk(prefix + (t,))
        yield CubeIndex(prefix, N, d)

    return walk(())
