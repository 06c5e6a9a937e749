"""Reproducible samplers for the four fractal percolation models.

All models share one construction: starting from the unit cube, each
retained cube decides which of its N^d children survive.  The Mandelbrot
and fat models threshold one uniform per child cube; the k-subset and
generalized models draw a retained count per parent and keep that many
entries of a per-parent random permutation of the child slots.  Because
every uniform is a counter-based function of the cube address (see
:mod:`fracperc.rng`), a shared seed yields the exact monotone couplings
used throughout the tests: thresholds nest in p, permutation prefixes
nest in k.

Per-parent stream layout (documented so independent runs agree):
stream 0 is the parent's own generator draw (retained-count inverse-CDF)
and, keyed by the child cube instead, the child's retention threshold;
streams 1..N^d-1 drive a Fisher-Yates shuffle of the child slots, where
step t swaps position t with position floor(u_t * (t + 1)).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Optional

import numpy as np

from .rng import cell_uniforms, derive_seed, uniform_matrix

MAX_GRID_CELLS = 1 << 62  # flat indices must fit in int64
DENSE_CELL_LIMIT = 1 << 26  # dense boolean form allowed below this

_GRID_MAGIC = b"FPGR"
_GRID_VERSION = 1


class ParameterError(ValueError):
    """Invalid model parameter or malformed specification."""


@dataclass(frozen=True)
class GeneratorSpec:
    """Distribution of the per-parent retained-child count.

    ``constant`` keeps exactly k children, ``binomial`` draws
    Binomial(N^d, p), ``pmf`` uses an explicit table over {0,...,N^d}.
    """

    kind: str
    k: Optional[int] = None
    p: Optional[float] = None
    pmf: Optional[tuple[float, ...]] = None

    PMF_TOL = 1e-12

    def validate(self, nd: int) -> None:
        if self.kind == "constant":
            if self.k is None or not (0 <= self.k <= nd):
                raise ParameterError(f"constant generator needs k in 0..{nd}, got {self.k}")
        elif self.kind == "binomial":
            if self.p is None or not (0.0 <= self.p <= 1.0):
                raise ParameterError(f"binomial generator needs p in [0,1], got {self.p}")
        elif self.kind == "pmf":
            if self.pmf is None or len(self.pmf) != nd + 1:
                raise ParameterError(f"pmf generator needs {nd + 1} weights")
            if any(w < 0 for w in self.pmf):
                raise ParameterError("pmf weights must be non-negative")
            if abs(sum(self.pmf) - 1.0) > self.PMF_TOL:
                raise ParameterError(f"pmf sums to {sum(self.pmf)!r}, not 1")
        else:
            raise ParameterError(f"unknown generator kind {self.kind!r}")

    def pmf_array(self, nd: int) -> np.ndarray:
        self.validate(nd)
        if self.kind == "constant":
            out = np.zeros(nd + 1)
            out[self.k] = 1.0
            return out
        if self.kind == "binomial":
            q = 1.0 - self.p
            return np.array([comb(nd, y) * self.p ** y * q ** (nd - y) for y in range(nd + 1)])
        return np.asarray(self.pmf, dtype=float)

    def exact_pmf(self, nd: int) -> list[Fraction]:
        """Probability table as exact rationals of the stored floats."""
        self.validate(nd)
        if self.kind == "constant":
            out = [Fraction(0)] * (nd + 1)
            out[self.k] = Fraction(1)
            return out
        if self.kind == "binomial":
            p = Fraction(self.p)
            q = 1 - p
            return [comb(nd, y) * p ** y * q ** (nd - y) for y in range(nd + 1)]
        return [Fraction(w) for w in self.pmf]

    def descriptor(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "k": self.k}
        if self.kind == "binomial":
            return {"kind": "binomial", "p": self.p}
        return {"kind": "pmf", "weights": list(self.pmf)}

    @classmethod
    def parse(cls, text: str) -> "GeneratorSpec":
        """Parse ``constant:<k>``, ``binomial:<p>`` or ``pmf:<w0>,<w1>,...``."""
        head, sep, rest = text.partition(":")
        if not sep:
            raise ParameterError(f"generator spec {text!r} lacks ':'")
        if head == "constant":
            return cls("constant", k=int(rest))
        if head == "binomial":
            return cls("binomial", p=float(rest))
        if head == "pmf":
            return cls("pmf", pmf=tuple(float(w) for w in rest.split(",")))
        raise ParameterError(f"unknown generator kind {head!r}")

    @classmethod
    def from_descriptor(cls, obj: dict) -> "GeneratorSpec":
        kind = obj.get("kind")
        if kind == "constant":
            return cls("constant", k=int(obj["k"]))
        if kind == "binomial":
            return cls("binomial", p=float(obj["p"]))
        if kind == "pmf":
            return cls("pmf", pmf=tuple(float(w) for w in obj["weights"]))
        raise ParameterError(f"bad generator descriptor {obj!r}")


@dataclass(frozen=True)
class RetentionSchedule:
    """Level-dependent retention probabilities p_1, p_2, ...

    An explicit prefix is followed by a tail rule: ``("constant", v)``
    holds v forever, ``("geometric-complement", c, q)`` continues the
    family p_n = 1 - c*q^n.  The sequence must be non-decreasing with
    every value in (0, 1].
    """

    prefix: tuple[float, ...] = ()
    tail: tuple = ("constant", 1.0)

    def __post_init__(self):
        kind = self.tail[0]
        if kind == "constant":
            if len(self.tail) != 2 or not (0.0 < self.tail[1] <= 1.0):
                raise ParameterError(f"bad constant tail {self.tail!r}")
        elif kind == "geometric-complement":
            if len(self.tail) != 3:
                raise ParameterError(f"bad geometric-complement tail {self.tail!r}")
            c, q = self.tail[1], self.tail[2]
            if not (c >= 0.0 and 0.0 < q < 1.0):
                raise ParameterError(f"geometric-complement needs c >= 0, 0 < q < 1, got {self.tail!r}")
        else:
            raise ParameterError(f"unknown tail rule {kind!r}")
        probe = [self.value_at(i) for i in range(1, len(self.prefix) + 3)]
        for v in probe:
            if not (0.0 < v <= 1.0):
                raise ParameterError(f"retention probability {v!r} outside (0, 1]")
        for a, b in zip(probe, probe[1:]):
            if b < a:
                raise ParameterError("retention probabilities must be non-decreasing")

    def value_at(self, level: int) -> float:
        """p_level for level >= 1."""
        if level < 1:
            raise ParameterError("schedule levels start at 1")
        if level <= len(self.prefix):
            return float(self.prefix[level - 1])
        if self.tail[0] == "constant":
            return float(self.tail[1])
        c, q = self.tail[1], self.tail[2]
        return 1.0 - c * q ** level

    def values(self, n: int) -> list[float]:
        return [self.value_at(i) for i in range(1, n + 1)]

    def descriptor(self) -> dict:
        return {"prefix": list(self.prefix), "tail": list(self.tail)}

    @classmethod
    def constant(cls, p: float) -> "RetentionSchedule":
        return cls(prefix=(), tail=("constant", float(p)))

    @classmethod
    def parse(cls, prefix_text: str, tail_text: str) -> "RetentionSchedule":
        """Parse CLI grammar: prefix ``0.5,0.75`` (may be empty), tail
        ``constant:<v>`` or ``geometric-complement:c=<c>,q=<q>``."""
        prefix = tuple(float(v) for v in prefix_text.split(",") if v.strip()) if prefix_text else ()
        head, sep, rest = tail_text.partition(":")
        if not sep:
            raise ParameterError(f"tail spec {tail_text!r} lacks ':'")
        if head == "constant":
            tail = ("constant", float(rest))
        elif head == "geometric-complement":
            params = {}
            for item in rest.split(","):
                key, eq, val = item.partition("=")
                if not eq:
                    raise ParameterError(f"bad tail parameter {item!r}")
                params[key.strip()] = float(val)
            if set(params) != {"c", "q"}:
                raise ParameterError(f"geometric-complement needs c and q, got {sorted(params)}")
            tail = ("geometric-complement", params["c"], params["q"])
        else:
            raise ParameterError(f"unknown tail family {head!r}")
        return cls(prefix=prefix, tail=tail)

    @classmethod
    def from_descriptor(cls, obj: dict) -> "RetentionSchedule":
        return cls(prefix=tuple(float(v) for v in obj.get("prefix", ())),
                   tail=tuple(obj["tail"][:1]) + tuple(float(v) for v in obj["tail"][1:]))


@dataclass(eq=False)
class Grid:
    """Retained level-n cells of one realization, plus the retained tree.

    ``cells`` holds sorted row-major flat indices into {0,...,N^n-1}^d.
    ``tree[m]`` (when present) holds the retained level-m cells for
    m = 0..n; level 0 is always the unit cube.
    """

    N: int
    d: int
    n: int
    cells: np.ndarray
    tree: Optional[list[np.ndarray]]
    model: dict
    seed: int

    @property
    def box(self) -> int:
        return self.N ** self.n

    def total_cells(self) -> int:
        return self.N ** (self.d * self.n)

    def coords(self) -> np.ndarray:
        return decode_cells(self.cells, self.box, self.d)

    def dense(self) -> np.ndarray:
        """Boolean occupancy array of shape (box,)*d (small grids only)."""
        if self.total_cells() > DENSE_CELL_LIMIT:
            raise ParameterError("grid too large for a dense representation")
        out = np.zeros(self.total_cells(), dtype=bool)
        out[self.cells] = True
        return out.reshape((self.box,) * self.d)

    def check_tree(self) -> None:
        """Assert ancestor consistency: every retained cell's parent is retained."""
        if self.tree is None:
            return
        assert len(self.tree) == self.n + 1
        assert np.array_equal(self.tree[self.n], self.cells)
        for m in range(1, self.n + 1):
            parents = parent_cells(self.tree[m], self.N, m, self.d)
            missing = np.setdiff1d(parents, self.tree[m - 1])
            assert missing.size == 0, f"orphan cells at level {m}"

    # -- serialization ------------------------------------------------

    def to_bytes(self) -> bytes:
        tag = self.model.get("model", "?").encode()
        buf = io.BytesIO()
        buf.write(_GRID_MAGIC)
        buf.write(struct.pack("<HHHH", _GRID_VERSION, self.N, self.d, self.n))
        buf.write(struct.pack("<Q", self.seed & ((1 << 64) - 1)))
        buf.write(struct.pack("<B", len(tag)))
        buf.write(tag)
        for run in _rle_runs(self.cells, self.total_cells()):
            _write_varint(buf, run)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Grid":
        buf = io.BytesIO(data)
        if buf.read(4) != _GRID_MAGIC:
            raise ParameterError("not a grid file (bad magic)")
        version, N, d, n = struct.unpack("<HHHH", buf.read(8))
        if version != _GRID_VERSION:
            raise ParameterError(f"unsupported grid version {version}")
        (seed,) = struct.unpack("<Q", buf.read(8))
        (taglen,) = struct.unpack("<B", buf.read(1))
        tag = buf.read(taglen).decode()
        total = N ** (d * n)
        cells = _rle_decode(buf, total)
        return cls(N=N, d=d, n=n, cells=cells, tree=None,
                   model={"model": tag}, seed=seed)

    def to_json_obj(self) -> dict:
        return {
            "format": "fracperc-grid",
            "version": _GRID_VERSION,
            "N": self.N,
            "d": self.d,
            "n": self.n,
            "seed": self.seed,
            "model": self.model,
            "cells": [int(c) for c in self.cells],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Grid":
        return cls(N=obj["N"], d=obj["d"], n=obj["n"],
                   cells=np.asarray(sorted(obj["cells"]), dtype=np.int64),
                   tree=None, model=dict(obj["model"]), seed=obj["seed"])


# -- flat-index helpers -----------------------------------------------


def decode_cells(flat: np.ndarray, box: int, d: int) -> np.ndarray:
    """Row-major flat indices -> (n, d) coordinate array."""
    flat = np.asarray(flat, dtype=np.int64)
    out = np.empty((flat.size, d), dtype=np.int64)
    rem = flat.copy()
    for j in range(d - 1, -1, -1):
        out[:, j] = rem % box
        rem //= box
    return out


def encode_cells(coords: np.ndarray, box: int) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.int64)
    flat = coords[:, 0].copy()
    for j in range(1, coords.shape[1]):
        flat = flat * box + coords[:, j]
    return flat


def parent_cells(flat: np.ndarray, N: int, level: int, d: int) -> np.ndarray:
    """Flat indices of the parents (at level-1) of level cells."""
    coords = decode_cells(flat, N ** level, d)
    return encode_cells(coords // N, N ** (level - 1))


@lru_cache(maxsize=None)
def _local_coords(N: int, d: int) -> np.ndarray:
    out = decode_cells(np.arange(N ** d, dtype=np.int64), N, d)
    out.setflags(write=False)
    return out


# -- sampling ---------------------------------------------------------


def _check_size(N: int, d: int, n: int) -> None:
    if N < 2 or d < 2 or n < 0:
        raise ParameterError(f"need N >= 2, d >= 2, n >= 0, got N={N} d={d} n={n}")
    if N ** (d * n) > MAX_GRID_CELLS:
        raise ParameterError(f"level-{n} grid exceeds the addressable cell bound")


def _child_flats(parents: np.ndarray, level: int, N: int, d: int) -> np.ndarray:
    """Flat indices of all N^d children of each parent, parent-major."""
    local = _local_coords(N, d)
    pcoords = decode_cells(parents, N ** level, d)
    child_coords = (pcoords[:, None, :] * N + local[None, :, :]).reshape(-1, d)
    return encode_cells(child_coords, N ** (level + 1))


def _expand_threshold(parents: np.ndarray, level: int, N: int, d: int,
                      p: float, seed: int) -> np.ndarray:
    """Children of ``parents`` (level -> level+1) kept when the child's
    stream-0 uniform is below p."""
    if parents.size == 0:
        return parents
    flats = _child_flats(parents, level, N, d)
    keep = cell_uniforms(seed, level + 1, flats, 0) < p
    return np.sort(flats[keep])


def _permutations(parents: np.ndarray, level: int, N: int, d: int,
                  seed: int) -> np.ndarray:
    """Per-parent random permutation of the N^d child slots.

    Fisher-Yates driven by the parent's streams 1..N^d-1: step t swaps
    slot t with slot floor(u_t * (t+1)).
    """
    nd = N ** d
    P = parents.shape[0]
    uniforms = uniform_matrix(seed, level, parents, range(1, nd))
    perm = np.tile(np.arange(nd, dtype=np.int64), (P, 1))
    rows = np.arange(P)
    for t in range(nd - 1, 0, -1):
        j = np.minimum((uniforms[:, t - 1] * (t + 1)).astype(np.int64), t)
        tmp = perm[rows, t].copy()
        perm[rows, t] = perm[rows, j]
        perm[rows, j] = tmp
    return perm


def _expand_permutation(parents: np.ndarray, level: int, N: int, d: int,
                        counts: np.ndarray, seed: int) -> np.ndarray:
    """Keep the first counts[i] slots of each parent's permutation."""
    if parents.size == 0:
        return parents
    nd = N ** d
    local = _local_coords(N, d)
    perm = _permutations(parents, level, N, d, seed)
    mask = np.arange(nd)[None, :] < counts[:, None]
    rowidx = np.repeat(np.arange(parents.shape[0]), counts)
    chosen_local = local[perm[mask]]
    pcoords = decode_cells(parents, N ** level, d)
    child_coords = pcoords[rowidx] * N + chosen_local
    return np.sort(encode_cells(child_coords, N ** (level + 1)))


def _build_grid(N, d, n, tree, model, seed) -> Grid:
    return Grid(N=N, d=d, n=n, cells=tree[n], tree=tree, model=model, seed=seed)


def sample_mfp(p: float, N: int, d: int, n: int, seed: int) -> Grid:
    """Mandelbrot fractal percolation: every cube kept with probability p."""
    if not (0.0 <= p <= 1.0):
        raise ParameterError(f"p must be in [0,1], got {p}")
    _check_size(N, d, n)
    tree = [np.zeros(1, dtype=np.int64)]
    for m in range(n):
        tree.append(_expand_threshold(tree[m], m, N, d, p, seed))
    return _build_grid(N, d, n, tree, {"model": "mfp", "p": p}, seed)


def sample_fat(sched: RetentionSchedule, N: int, d: int, n: int, seed: int) -> Grid:
    """Fat fractal percolation: level-m cubes kept with probability p_m."""
    _check_size(N, d, n)
    tree = [np.zeros(1, dtype=np.int64)]
    for m in range(n):
        tree.append(_expand_threshold(tree[m], m, N, d, sched.value_at(m + 1), seed))
    return _build_grid(N, d, n, tree, {"model": "fat", "schedule": sched.descriptor()}, seed)


def sample_k(k: int, N: int, d: int, n: int, seed: int) -> Grid:
    """k-subset fractal percolation: each parent keeps a uniform k-subset."""
    _check_size(N, d, n)
    nd = N ** d
    if not (0 < k <= nd):
        raise ParameterError(f"k must be in 1..{nd}, got {k}")
    tree = [np.zeros(1, dtype=np.int64)]
    for m in range(n):
        counts = np.full(tree[m].shape[0], k, dtype=np.int64)
        tree.append(_expand_permutation(tree[m], m, N, d, counts, seed))
    return _build_grid(N, d, n, tree, {"model": "k", "k": k}, seed)


def sample_gfp(gen: GeneratorSpec, N: int, d: int, n: int, seed: int) -> Grid:
    """Generalized model: per-parent retained count drawn from ``gen``.

    A constant generator shares the permutation path with :func:`sample_k`
    and produces the identical grid for the same seed; other generators
    draw the count by inverse CDF on the parent's stream-0 uniform.
    """
    _check_size(N, d, n)
    nd = N ** d
    gen.validate(nd)
    cdf = np.cumsum(gen.pmf_array(nd))
    tree = [np.zeros(1, dtype=np.int64)]
    for m in range(n):
        parents = tree[m]
        if gen.kind == "constant":
            counts = np.full(parents.shape[0], gen.k, dtype=np.int64)
        else:
            u = cell_uniforms(seed, m, parents, 0)
            counts = np.searchsorted(cdf, u, side="right").astype(np.int64)
            counts = np.minimum(counts, nd)
        tree.append(_expand_permutation(parents, m, N, d, counts, seed))
    return _build_grid(N, d, n, tree, {"model": "gfp", "gen": gen.descriptor()}, seed)


def cube_uniform(seed: int, index, stream: int) -> float:
    """Uniform [0,1) attached to one cube address (single-cube helper).

    ``index`` is a :class:`fracperc.index.CubeIndex`; the samplers use
    the same per-cube values through their vectorized paths.
    """
    coords = index.cell_coords()
    box = index.N ** index.level
    flat = 0
    for c in coords:
        flat = flat * box + c
    return float(cell_uniforms(seed, index.level,
                               np.array([flat], dtype=np.int64), stream)[0])


# -- model specification ----------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """A fully parameterized model: kind plus geometry, ready to sample."""

    kind: str
    N: int
    d: int
    p: Optional[float] = None
    k: Optional[int] = None
    gen: Optional[GeneratorSpec] = None
    schedule: Optional[RetentionSchedule] = None

    def __post_init__(self):
        if self.kind == "mfp":
            if self.p is None:
                raise ParameterError("mfp model needs p")
        elif self.kind == "k":
            if self.k is None:
                raise ParameterError("k model needs k")
        elif self.kind == "gfp":
            if self.gen is None:
                raise ParameterError("gfp model needs a generator")
        elif self.kind == "fat":
            if self.schedule is None:
                raise ParameterError("fat model needs a schedule")
        else:
            raise ParameterError(f"unknown model kind {self.kind!r}")

    def sample(self, n: int, seed: int) -> Grid:
        if self.kind == "mfp":
            return sample_mfp(self.p, self.N, self.d, n, seed)
        if self.kind == "k":
            return sample_k(self.k, self.N, self.d, n, seed)
        if self.kind == "gfp":
            return sample_gfp(self.gen, self.N, self.d, n, seed)
        return sample_fat(self.schedule, self.N, self.d, n, seed)

    def descriptor(self) -> dict:
        out = {"model": self.kind, "N": self.N, "d": self.d}
        if self.kind == "mfp":
            out["p"] = self.p
        elif self.kind == "k":
            out["k"] = self.k
        elif self.kind == "gfp":
            out["gen"] = self.gen.descriptor()
        else:
            out["schedule"] = self.schedule.descriptor()
        return out

    @classmethod
    def from_descriptor(cls, obj: dict) -> "ModelSpec":
        kind = obj.get("model")
        N, d = int(obj["N"]), int(obj["d"])
        if kind == "mfp":
            return cls("mfp", N, d, p=float(obj["p"]))
        if kind == "k":
            return cls("k", N, d, k=int(obj["k"]))
        if kind == "gfp":
            return cls("gfp", N, d, gen=GeneratorSpec.from_descriptor(obj["gen"]))
        if kind == "fat":
            return cls("fat", N, d, schedule=RetentionSchedule.from_descriptor(obj["schedule"]))
        raise ParameterError(f"bad model descriptor {obj!r}")

    def param_label(self) -> str:
        """Value for the sweep-parameter CSV column."""
        if self.kind == "mfp":
            return repr(self.p)
        if self.kind == "k":
            return str(self.k)
        if self.kind == "gfp":
            g = self.gen
            if g.kind == "constant":
                return f"constant:{g.k}"
            if g.kind == "binomial":
                return f"binomial:{g.p!r}"
            return "pmf:" + ",".join(repr(w) for w in g.pmf)
        sched = self.schedule
        prefix = ",".join(repr(v) for v in sched.prefix)
        tail = ":".join(str(v) for v in sched.tail)
        return f"prefix={prefix};tail={tail}"


def replicate_grid(spec: ModelSpec, n: int, seed: int, replicate: int) -> Grid:
    """Grid for one Monte Carlo replicate (seed derived from the index)."""
    return spec.sample(n, derive_seed(seed, replicate))


# -- run-length encoding ----------------------------------------------


def _rle_runs(cells: np.ndarray, total: int):
    """Alternating (absent, present) run lengths covering cells 0..total-1.

    Starts with an absent run (possibly zero); stops once all retained
    cells are covered, the final absent run being implicit.
    """
    runs = []
    if cells.size == 0:
        return runs
    breaks = np.nonzero(np.diff(cells) != 1)[0]
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [cells.size - 1]))
    pos = 0
    for s, e in zip(starts, ends):
        runs.append(int(cells[s]) - pos)
        runs.append(int(cells[e]) - int(cells[s]) + 1)
        pos = int(cells[e]) + 1
    return runs


def _write_varint(buf, value: int) -> None:
    if value < 0:
        raise ValueError("varint must be non-negative")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            buf.write(bytes((byte | 0x80,)))
        else:
            buf.write(bytes((byte,)))
            return


def _read_varint(buf) -> int:
    shift = 0
    out = 0
    while True:
        raw = buf.read(1)
        if not raw:
            raise ParameterError("truncated grid payload")
        byte = raw[0]
        out |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return out
        shift += 7


def _rle_decode(buf, total: int) -> np.ndarray:
    cells = []
    pos = 0
    absent = True
    while pos < total:
        peek = buf.read(1)
        if not peek:
            break  # implicit trailing absent run
        buf.seek(-1, io.SEEK_CUR)
        run = _read_varint(buf)
        if not absent:
            cells.append(np.arange(pos, pos + run, dtype=np.int64))
        pos += run
        absent = not absent
    if pos > total:
        raise ParameterError("grid payload overruns the declared size")
    if cells:
        return np.concatenate(cells)
    return np.empty(0, dtype=np.int64)
