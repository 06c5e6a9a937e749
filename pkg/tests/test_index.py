import functools
import random
from fractions import Fraction

import pytest

from fracperc.index import (CubeIndex, LatticeCell, adjacent, boundary_cells,
                            box_edges, compare_indices, cube_geometry,
                            edge_cells, indices_ascending, neighbor_offsets)


def ci(digits, N=2, d=2):
    return CubeIndex(tuple(tuple(t) for t in digits), N, d)


class TestOrdering:
    def test_unit_cube_is_maximal(self):
        assert compare_indices(ci([]), ci([(1, 1)])) == 1

    def test_first_differing_digit_decides(self):
        assert compare_indices(ci([(1, 1), (1, 0)]), ci([(1, 1), (0, 1)])) == 1
        assert compare_indices(ci([(0, 0)]), ci([(0, 1)])) == -1

    def test_equal(self):
        assert compare_indices(ci([(1, 1)]), ci([(1, 1)])) == 0

    def test_descending_enumeration_prefix(self):
        seq = list(indices_ascending(2, 2, 2))
        desc = [x.digits for x in reversed(seq)]
        assert desc[:7] == [
            (), ((1, 1),), ((1, 1), (1, 1)), ((1, 1), (1, 0)),
            ((1, 1), (0, 1)), ((1, 1), (0, 0)), ((1, 0),),
        ]
        assert desc[-1] == ((0, 0), (0, 0))

    def test_child_below_parent(self):
        rng = random.Random(5)
        for _ in range(200):
            depth = rng.randrange(0, 4)
            digits = [tuple(rng.randrange(2) for _ in range(2)) for _ in range(depth)]
            parent = ci(digits)
            child = parent.child((rng.randrange(2), rng.randrange(2)))
            assert compare_indices(child, parent) == -1

    def test_strict_total_order_on_random_sets(self):
        rng = random.Random(11)
        pool = []
        for _ in range(60):
            depth = rng.randrange(0, 4)
            pool.append(ci([tuple(rng.randrange(3) for _ in range(2))
                            for _ in range(depth)], N=3))
        ordered = sorted(pool, key=functools.cmp_to_key(compare_indices))
        for a, b in zip(ordered, ordered[1:]):
            c = compare_indices(a, b)
            assert c in (-1, 0)
            assert compare_indices(b, a) == -c
        # transitivity spot checks
        for _ in range(300):
            a, b, c = rng.sample(pool, 3)
            if compare_indices(a, b) <= 0 and compare_indices(b, c) <= 0:
                assert compare_indices(a, c) <= 0

    def test_mismatched_subdivisions_rejected(self):
        with pytest.raises(ValueError):
            compare_indices(ci([], N=2), ci([], N=3))


class TestGeometry:
    def test_unit_cube(self):
        corner, side = cube_geometry(ci([]))
        assert corner == (0, 0) and side == 1

    def test_single_digit(self):
        corner, side = cube_geometry(ci([(1, 0)]))
        assert corner == (Fraction(1, 2), 0) and side == Fraction(1, 2)

    def test_two_digits(self):
        corner, side = cube_geometry(ci([(1, 1), (0, 1)]))
        assert corner == (Fraction(1, 2), Fraction(3, 4))
        assert side == Fraction(1, 4)

    def test_children_nest_exactly(self):
        rng = random.Random(3)
        for _ in range(100):
            depth = rng.randrange(0, 4)
            parent = ci([tuple(rng.randrange(3) for _ in range(2))
                         for _ in range(depth)], N=3)
            child = parent.child((rng.randrange(3), rng.randrange(3)))
            pc, ps = cube_geometry(parent)
            cc, cs = cube_geometry(child)
            assert cs * 3 == ps
            for j in range(2):
                assert pc[j] <= cc[j] and cc[j] + cs <= pc[j] + ps


class TestAdjacency:
    def test_side_neighbors(self):
        assert adjacent(LatticeCell((0, 0), 2), LatticeCell((1, 0), 2))

    def test_corner_contact_excluded(self):
        assert not adjacent(LatticeCell((0, 0), 2), LatticeCell((1, 1), 2))

    def test_three_dimensional_edge_neighbors(self):
        assert adjacent(LatticeCell((0, 0, 0), 2), LatticeCell((1, 1, 0), 2))

    def test_symmetric_irreflexive(self):
        rng = random.Random(9)
        for _ in range(300):
            u = LatticeCell(tuple(rng.randrange(4) for _ in range(3)), 4)
            v = LatticeCell(tuple(rng.randrange(4) for _ in range(3)), 4)
            assert adjacent(u, v) == adjacent(v, u)
            assert not adjacent(u, u)

    def test_plane_adjacency_is_four_neighborhood(self):
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                u = LatticeCell((1, 1), 3)
                v = LatticeCell((1 + dx, 1 + dy), 3)
                expected = abs(dx) + abs(dy) == 1
                assert adjacent(u, v) == expected

    def test_offset_count(self):
        for d in (2, 3, 4):
            assert len(neighbor_offsets(d)) == 3 ** d - 2 ** d - 1
            assert len(neighbor_offsets(d, half=True)) * 2 == len(neighbor_offsets(d))


class TestBoundary:
    def test_left_face(self):
        cells = boundary_cells(1, 2, 2, ("face", 1, "low"))
        assert {c.coords for c in cells} == {(0, 0), (0, 1)}

    def test_bottom_edge(self):
        cells = boundary_cells(1, 3, 2, ("edge", 1, (0, 0)))
        assert {c.coords for c in cells} == {(0, 0), (1, 0), (2, 0)}

    def test_right_face_level_two(self):
        cells = boundary_cells(2, 2, 2, ("face", 1, "high"))
        assert {c.coords for c in cells} == {(3, 0), (3, 1), (3, 2), (3, 3)}

    def test_edge_count_and_sizes(self):
        d = 3
        edges = box_edges(d)
        assert len(edges) == d * 2 ** (d - 1)
        for r, a in edges:
            assert len(edge_cells(4, r, a)) == 4

    def test_bad_selector(self):
        with pytest.raises(ValueError):
            boundary_cells(1, 2, 2, ("face", 3, "low"))
        with pytest.raises(ValueError):
            boundary_cells(1, 2, 2, ("edge", 1, (0, 2)))
        with pytest.raises(ValueError):
            boundary_cells(1, 2, 2, "left")
