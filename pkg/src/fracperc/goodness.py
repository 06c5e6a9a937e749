"""Exact goodness recursions and the recursive cube-goodness procedure.

"m-good" is the branching-survival style predicate: a cube is 0-good when
it is retained and keeps at least k children, and (m+1)-good when it is
retained and at least k of its children are m-good.  The probability that
the unit cube is m-good satisfies a binomial recursion that this module
evaluates exactly (big-rational tail sums, one float rounding per level).

The (n,u)-goodness procedure is the constructive crossing certificate:
declared good cubes carry an edge-connected witness set of children that
touches every box edge and chains onto the witnesses of previously
examined good neighbors, so a good unit cube forces a crossing.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Optional

import numpy as np

from . import kernels
from .index import CubeIndex, box_edges, edge_cells, neighbor_offsets
from .models import (GeneratorSpec, Grid, ParameterError, _build_grid,
                     _expand_permutation, _local_coords, parent_cells)


# -- exact binomial machinery -----------------------------------------


def _ratio(x) -> tuple[int, int]:
    """Exact numerator/denominator of a probability-like value."""
    frac = Fraction(x)
    if not (0 <= frac <= 1):
        raise ParameterError(f"probability {x!r} outside [0,1]")
    return frac.numerator, frac.denominator


def binomial_tail_geq(n: int, k: int, p) -> Fraction:
    """P(Binomial(n, p) >= k) as an exact rational."""
    num, den = _ratio(p)
    if k <= 0:
        return Fraction(1)
    if k > n:
        return Fraction(0)
    q = den - num
    total = 0
    for j in range(k, n + 1):
        total += comb(n, j) * num ** j * q ** (n - j)
    return Fraction(total, den ** n)


def binomial_pmf_exact(n: int, p) -> list[Fraction]:
    num, den = _ratio(p)
    q = den - num
    return [Fraction(comb(n, j) * num ** j * q ** (n - j), den ** n) for j in range(n + 1)]


# -- m-good recursions -------------------------------------------------


@dataclass(frozen=True)
class GoodRecursionResult:
    """P(unit cube is m-good) for m = 0..horizon, with the parameters."""

    values: tuple[float, ...]
    params: dict

    def __getitem__(self, m: int) -> float:
        return self.values[m]

    @property
    def horizon(self) -> int:
        return len(self.values) - 1


def good_probability(p0: float, k: int, N: int, d: int, m: int) -> GoodRecursionResult:
    """Exact m-good probabilities for the Mandelbrot model.

    Level 0: P = P(Bin(N^d, p0) >= k); afterwards the child success
    probability is damped by the previous level, P_{m+1} =
    P(Bin(N^d, p0 * P_m) >= k).  Each tail is summed exactly in big
    rationals and rounded to float once per level.
    """
    nd = N ** d
    if not (0 < k <= nd):
        raise ParameterError(f"k must be in 1..{nd}, got {k}")
    if not (0.0 <= p0 <= 1.0):
        raise ParameterError(f"p0 must be in [0,1], got {p0}")
    values = []
    prev = 1.0
    for _ in range(m + 1):
        succ = Fraction(p0) * Fraction(prev)
        prev = float(binomial_tail_geq(nd, k, succ))
        values.append(prev)
    return GoodRecursionResult(tuple(values), {"p0": p0, "k": k, "N": N, "d": d})


def good_probability_gfp(gen: GeneratorSpec, k: int, N: int, d: int,
                         m: int) -> GoodRecursionResult:
    """m-good probabilities when the retained-count law is ``gen``.

    Level 0 is P(Y >= k); the step mixes binomial tails over the count
    law: P_{m+1} = sum_y P(Bin(y, P_m) >= k) P(Y = y).  For a binomial
    generator this coincides with :func:`good_probability`.
    """
    nd = N ** d
    if not (0 < k <= nd):
        raise ParameterError(f"k must be in 1..{nd}, got {k}")
    pmf = gen.exact_pmf(nd)
    values = [float(sum(pmf[y] for y in range(k, nd + 1)))]
    for _ in range(m):
        prev = Fraction(values[-1])
        step = sum((binomial_tail_geq(y, k, prev) * pmf[y] for y in range(k, nd + 1)),
                   Fraction(0))
        values.append(float(step))
    return GoodRecursionResult(tuple(values),
                               {"gen": gen.descriptor(), "k": k, "N": N, "d": d})


# -- m-good check on sampled trees -------------------------------------


def is_m_good(g: Grid, k: int, m: int) -> bool:
    """Whether the unit cube of this realization is m-good for ``k``.

    Requires the retained tree to depth m+1.  Works bottom-up: a cube is
    0-good when it keeps at least k children, and each further round
    demands k good children.
    """
    if g.tree is None:
        raise ParameterError("grid lacks the retained tree")
    if m + 1 > g.n:
        raise ParameterError(f"m-good with m={m} needs tree depth {m + 1}, grid has {g.n}")
    good = np.ones(g.tree[m + 1].shape[0], dtype=bool)
    for level in range(m + 1, 0, -1):
        cells = g.tree[level]
        parents = g.tree[level - 1]
        counts = np.zeros(parents.shape[0], dtype=np.int64)
        pos = np.searchsorted(parents, parent_cells(cells, g.N, level, g.d))
        np.add.at(counts, pos, good.astype(np.int64))
        good = counts >= k
    return bool(good[0])


# -- (n,u)-goodness -----------------------------------------------------


@dataclass(eq=False)
class GoodnessMap:
    """Outcome of the recursive goodness procedure on one retained tree.

    Covers every index of the retained tree; indices outside the tree are
    good exactly when they sit at depth n (depth-n cubes are good by
    rule, shallower cubes without retained children never are).
    """

    N: int
    d: int
    n: int
    u: int
    tree_flat: np.ndarray
    level_offsets: np.ndarray
    good: np.ndarray
    witness: np.ndarray

    def _locate(self, idx: CubeIndex) -> Optional[int]:
        if idx.N != self.N or idx.d != self.d:
            raise ParameterError("index does not match this map's subdivision")
        m = idx.level
        if m > self.n:
            raise ParameterError(f"index at level {m} deeper than map depth {self.n}")
        coords = np.array([idx.cell_coords()], dtype=np.int64)
        flat = coords[:, 0].copy()
        for j in range(1, self.d):
            flat = flat * (self.N ** m) + coords[:, j]
        lo, hi = self.level_offsets[m], self.level_offsets[m + 1]
        segment = self.tree_flat[lo:hi]
        pos = int(np.searchsorted(segment, flat[0]))
        if pos < segment.size and segment[pos] == flat[0]:
            return int(lo + pos)
        return None

    def good_of(self, idx: CubeIndex) -> bool:
        node = self._locate(idx)
        if node is None:
            return idx.level == self.n
        return bool(self.good[node])

    def witness_of(self, idx: CubeIndex) -> tuple[tuple[int, ...], ...]:
        """Chosen witness children (as digit tuples) of a good cube."""
        node = self._locate(idx)
        if node is None:
            return ()
        local = _local_coords(self.N, self.d)
        slots = np.nonzero(self.witness[node])[0]
        return tuple(tuple(int(v) for v in local[s]) for s in slots)

    @property
    def root_good(self) -> bool:
        return bool(self.good[0])


def _edge_mask(N: int, d: int) -> np.ndarray:
    """Edge membership of the local child slots: (n_edges, N^d) flags."""
    nd = N ** d
    local = _local_coords(N, d)
    lookup = {tuple(int(v) for v in row): i for i, row in enumerate(local)}
    edges = box_edges(d)
    mask = np.zeros((len(edges), nd), dtype=np.uint8)
    for e, (r, a) in enumerate(edges):
        for c in edge_cells(N, r, a):
            mask[e, lookup[c]] = 1
    return mask


def check_nu_good(g: Grid, u: int) -> GoodnessMap:
    """Run the recursive goodness procedure on the retained tree of ``g``.

    Cubes are examined in ascending subdivision order; depth-n cubes are
    good by rule, and an internal cube is good when some edge-connected
    component of its retained good children meets every box edge in at
    least ``u`` cubes and links to every earlier good equal-depth
    neighbor's witness set.  Ties go to the component with the smallest
    row-major member.
    """
    if g.tree is None:
        raise ParameterError("goodness check needs the retained tree")
    if u < 1:
        raise ParameterError("u must be a positive integer")
    tree_flat = np.concatenate(g.tree) if g.n > 0 else g.tree[0]
    level_offsets = np.zeros(g.n + 2, dtype=np.int64)
    for m, cells in enumerate(g.tree):
        level_offsets[m + 1] = level_offsets[m] + cells.shape[0]
    local = _local_coords(g.N, g.d)
    local_half = np.array(neighbor_offsets(g.d, half=True), dtype=np.int64)
    full = np.array(neighbor_offsets(g.d, half=False), dtype=np.int64)
    good, witness = kernels.nu_good(tree_flat.astype(np.int64), level_offsets,
                                    g.N, g.d, g.n, u, local, local_half, full,
                                    _edge_mask(g.N, g.d))
    return GoodnessMap(N=g.N, d=g.d, n=g.n, u=u, tree_flat=tree_flat,
                       level_offsets=level_offsets, good=good, witness=witness)


# -- stochastic-domination coupling ------------------------------------


def conditioned_child_count_pmf(p0: float, k: int, N: int, d: int,
                                m_trunc: int) -> np.ndarray:
    """Law of the number of m_trunc-good children of a good cube.

    The count of (m_trunc-1)-good children is Bin(N^d, p0 * P_{m_trunc-1});
    conditioning on the cube being m_trunc-good restricts it to >= k.
    Computed exactly from the recursion, returned as a float table over
    0..N^d (zero below k).
    """
    nd = N ** d
    if m_trunc < 0:
        raise ParameterError("m_trunc must be >= 0")
    prev = 1.0 if m_trunc == 0 else good_probability(p0, k, N, d, m_trunc - 1)[m_trunc - 1]
    succ = Fraction(p0) * Fraction(prev)
    pmf = binomial_pmf_exact(nd, succ)
    tail = sum(pmf[k:], Fraction(0))
    if tail == 0:
        raise ParameterError("conditioning event has probability zero")
    out = np.zeros(nd + 1)
    for y in range(k, nd + 1):
        out[y] = float(pmf[y] / tail)
    return out


def coupled_domination_sample(p0: float, k: int, N: int, d: int, n: int,
                              m_trunc: int, seed: int) -> tuple[Grid, Grid]:
    """Sample the coupled pair (dominating grid, k-subset grid).

    Every retained parent of the upper grid draws its child count from
    the conditioned law above and keeps that many slots of its address-
    keyed permutation; the lower grid keeps the first k slots of the same
    permutations, so it is contained in the upper grid cellwise and is
    distributed exactly as the k-subset model.
    """
    nd = N ** d
    if not (0 < k <= nd):
        raise ParameterError(f"k must be in 1..{nd}, got {k}")
    pmf = conditioned_child_count_pmf(p0, k, N, d, m_trunc)
    cdf = np.cumsum(pmf)
    from .rng import cell_uniforms

    tree_a = [np.zeros(1, dtype=np.int64)]
    tree_b = [np.zeros(1, dtype=np.int64)]
    for m in range(n):
        parents_a = tree_a[m]
        u = cell_uniforms(seed, m, parents_a, 0)
        counts = np.minimum(np.searchsorted(cdf, u, side="right"), nd).astype(np.int64)
        tree_a.append(_expand_permutation(parents_a, m, N, d, counts, seed))
        counts_b = np.full(tree_b[m].shape[0], k, dtype=np.int64)
        tree_b.append(_expand_permutation(tree_b[m], m, N, d, counts_b, seed))
    model_a = {"model": "dominating", "p0": p0, "k": k, "m_trunc": m_trunc}
    grid_a = _build_grid(N, d, n, tree_a, model_a, seed)
    grid_b = _build_grid(N, d, n, tree_b, {"model": "k", "k": k}, seed)
    return grid_a, grid_b
