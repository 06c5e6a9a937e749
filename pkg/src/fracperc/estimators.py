"""Monte Carlo estimators, exact small-instance enumeration and sweeps.

Replicate r of any estimator runs on the seed derived from (seed, r), so
results are independent of evaluation order and of the number of worker
processes.  Point estimates of probabilities carry exact binomial
(Clopper-Pearson) confidence bounds, which stay honest at 0 and 1.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np
from scipy.stats import beta as _beta_dist

from . import kernels
from .connectivity import (crosses, gamma_event, label_flat_cells,
                           _crossing_from_labels)
from .index import neighbor_offsets
from .models import (ModelSpec, ParameterError, RetentionSchedule,
                     decode_cells, replicate_grid)
from .rng import cell_uniforms, derive_seed

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = ("model", "param", "n", "estimate", "ci_low", "ci_high",
               "replicates", "seed")

ENUMERATION_BOUND = 10 ** 7


def clopper_pearson(successes: int, trials: int,
                    confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for a success probability."""
    if not (0 <= successes <= trials) or trials < 1:
        raise ParameterError("need 0 <= successes <= trials, trials >= 1")
    alpha = 1.0 - confidence
    lo = 0.0 if successes == 0 else float(
        _beta_dist.ppf(alpha / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(
        _beta_dist.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lo, hi


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo point estimate of a probability with provenance."""

    point: float
    replicates: int
    ci_low: float
    ci_high: float
    seed: int
    n: int
    model: dict
    param: str

    @classmethod
    def from_counts(cls, successes: int, replicates: int, seed: int, n: int,
                    model: dict, param: str, confidence: float = 0.95) -> "Estimate":
        lo, hi = clopper_pearson(successes, replicates, confidence)
        return cls(point=successes / replicates, replicates=replicates,
                   ci_low=lo, ci_high=hi, seed=seed, n=n, model=model, param=param)

    def row(self) -> dict:
        return {
            "model": self.model.get("model", "?"),
            "param": self.param,
            "n": self.n,
            "estimate": self.point,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "replicates": self.replicates,
            "seed": self.seed,
        }

    def json_obj(self) -> dict:
        return {
            "model": self.model,
            "param": self.param,
            "n": self.n,
            "estimate": self.point,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "replicates": self.replicates,
            "seed": self.seed,
        }


def _chunk_ranges(replicates: int, jobs: int) -> list[tuple[int, int]]:
    step = max(1, math.ceil(replicates / max(1, jobs)))
    return [(start, min(start + step, replicates))
            for start in range(0, replicates, step)]


def _crossing_chunk(args) -> int:
    descriptor, n, seed, axis, start, stop = args
    spec = ModelSpec.from_descriptor(descriptor)
    count = 0
    for r in range(start, stop):
        if crosses(replicate_grid(spec, n, seed, r), axis):
            count += 1
    return count


def estimate_crossing(model: ModelSpec, n: int, replicates: int, seed: int,
                      axis: int = 1, jobs: int = 1) -> Estimate:
    """Fraction of replicates whose grid crosses along ``axis``."""
    if replicates < 1:
        raise ParameterError("replicates must be >= 1")
    descriptor = model.descriptor()
    chunks = [(descriptor, n, seed, axis, a, b)
              for a, b in _chunk_ranges(replicates, jobs)]
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            counts = list(pool.map(_crossing_chunk, chunks))
    else:
        counts = [_crossing_chunk(c) for c in chunks]
    return Estimate.from_counts(sum(counts), replicates, seed, n,
                                descriptor, model.param_label())


# -- exact enumeration --------------------------------------------------


def _subset_weights(model: ModelSpec, depth: int) -> list[Fraction]:
    """Exact probability of one particular child subset of size s, at the
    given subdivision depth (1-based)."""
    nd = model.N ** model.d
    if model.kind == "k":
        out = [Fraction(0)] * (nd + 1)
        out[model.k] = Fraction(1, comb(nd, model.k))
        return out
    if model.kind == "mfp":
        p = Fraction(model.p)
        q = 1 - p
        return [p ** s * q ** (nd - s) for s in range(nd + 1)]
    if model.kind == "fat":
        p = Fraction(model.schedule.value_at(depth))
        q = 1 - p
        return [p ** s * q ** (nd - s) for s in range(nd + 1)]
    pmf = model.gen.exact_pmf(nd)
    return [pmf[s] / comb(nd, s) for s in range(nd + 1)]


def enumeration_size(model: ModelSpec, n: int) -> int:
    """Total number of distinct retained-tree configurations to depth n."""
    nd = model.N ** model.d
    count = 1
    for depth in range(n, 0, -1):
        weights = _subset_weights(model, depth)
        count = sum(comb(nd, s) * count ** s
                    for s in range(nd + 1) if weights[s] != 0)
    return count


def enumerate_exact(model: ModelSpec, n: int) -> Fraction:
    """Exact crossing probability (axis 1) of the level-n grid.

    Recursively builds the distribution of retained level-n patterns
    inside a cube of each depth, merging identical patterns, then sums
    the probability of the crossing patterns.  Guarded by the
    configuration-count bound.
    """
    if n < 1:
        raise ParameterError("enumeration needs n >= 1")
    size = enumeration_size(model, n)
    if size > ENUMERATION_BOUND:
        raise ParameterError(
            f"{size} configurations exceed the enumeration bound {ENUMERATION_BOUND}")
    N, d = model.N, model.d
    nd = N ** d
    local = decode_cells(np.arange(nd, dtype=np.int64), N, d)

    dist: dict[int, Fraction] = {1: Fraction(1)}  # single-cell pattern at depth n
    for m in range(n - 1, -1, -1):
        side_child = N ** (n - m - 1)
        side = side_child * N
        child_items = list(dist.items())
        placements: list[dict[int, int]] = []
        for j in range(nd):
            offset = local[j] * side_child
            mapping = {}
            for b in range(side_child ** d):
                coords = []
                rem = b
                for jj in range(d - 1, -1, -1):
                    coords.append(rem % side_child)
                    rem //= side_child
                coords.reverse()
                flat = 0
                for jj in range(d):
                    flat = flat * side + coords[jj] + offset[jj]
                mapping[b] = flat
            placements.append(mapping)

        def place(slot: int, mask: int) -> int:
            out = 0
            mapping = placements[slot]
            b = 0
            while mask:
                if mask & 1:
                    out |= 1 << mapping[b]
                mask >>= 1
                b += 1
            return out

        placed_cache: list[list[int]] = [
            [place(j, mask) for mask, _ in child_items] for j in range(nd)
        ]
        probs = [prob for _, prob in child_items]
        weights = _subset_weights(model, m + 1)
        nxt: dict[int, Fraction] = {}
        for s in range(nd + 1):
            w = weights[s]
            if w == 0:
                continue
            for slots in itertools.combinations(range(nd), s):
                for choice in itertools.product(range(len(child_items)), repeat=s):
                    mask = 0
                    prob = w
                    for slot, ci in zip(slots, choice):
                        mask |= placed_cache[slot][ci]
                        prob *= probs[ci]
                    nxt[mask] = nxt.get(mask, Fraction(0)) + prob
        dist = nxt

    assert sum(dist.values()) == 1
    box = N ** n
    dims = (box,) * d
    total = Fraction(0)
    for mask, prob in dist.items():
        if prob == 0 or mask == 0:
            continue
        cells = _mask_to_cells(mask)
        labels = label_flat_cells(cells, dims)
        if _crossing_from_labels(cells, labels, dims, 0):
            total += prob
    return total


def _mask_to_cells(mask: int) -> np.ndarray:
    cells = []
    b = 0
    while mask:
        if mask & 1:
            cells.append(b)
        mask >>= 1
        b += 1
    return np.array(cells, dtype=np.int64)


# -- critical-k sweep ---------------------------------------------------


@dataclass(frozen=True)
class CriticalSearchResult:
    """Per-k crossing estimates plus the thresholded critical index."""

    ks: tuple[int, ...]
    estimates: tuple[Estimate, ...]
    k_hat: int
    threshold: float
    N: int
    d: int
    n: int
    replicates: int
    seed: int


def _kmin_chunk(args) -> list[int]:
    N, d, n, seed, start, stop = args
    from .models import sample_k

    nd = N ** d
    out = []
    for r in range(start, stop):
        rep_seed = derive_seed(seed, r)
        lo, hi = 1, nd
        while lo < hi:
            mid = (lo + hi) // 2
            if crosses(sample_k(mid, N, d, n, rep_seed), 1):
                hi = mid
            else:
                lo = mid + 1
        out.append(lo)
    return out


def search_kc(N: int, d: int, n: int, replicates: int, threshold: float,
              seed: int, jobs: int = 1) -> CriticalSearchResult:
    """Sweep k = 1..N^d with shared replicate seeds.

    The per-replicate crossing indicator is non-decreasing in k (the
    retained sets are permutation prefixes of one another), so each
    replicate contributes its minimal crossing k, found by binary
    search; the full per-k curve follows from those thresholds.
    """
    if not (0.0 < threshold < 1.0):
        raise ParameterError("threshold must be in (0, 1)")
    if replicates < 1:
        raise ParameterError("replicates must be >= 1")
    nd = N ** d
    chunks = [(N, d, n, seed, a, b) for a, b in _chunk_ranges(replicates, jobs)]
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            kmin_lists = list(pool.map(_kmin_chunk, chunks))
    else:
        kmin_lists = [_kmin_chunk(c) for c in chunks]
    kmins = np.concatenate([np.asarray(lst, dtype=np.int64) for lst in kmin_lists])
    counts = np.cumsum(np.bincount(kmins, minlength=nd + 1))[1:]
    estimates = []
    k_hat = nd
    for k in range(1, nd + 1):
        est = Estimate.from_counts(int(counts[k - 1]), replicates, seed, n,
                                   {"model": "k", "k": k, "N": N, "d": d}, str(k))
        estimates.append(est)
    for k in range(1, nd + 1):
        if estimates[k - 1].point > threshold:
            k_hat = k
            break
    return CriticalSearchResult(ks=tuple(range(1, nd + 1)),
                                estimates=tuple(estimates), k_hat=k_hat,
                                threshold=threshold, N=N, d=d, n=n,
                                replicates=replicates, seed=seed)


# -- site percolation reference -----------------------------------------


@dataclass(frozen=True)
class SitePercSweep:
    """Crossing-probability sweep on a plain box with i.i.d. black cells."""

    estimates: tuple[Estimate, ...]
    crossing_point: float
    M: int
    d: int
    replicates: int
    seed: int


def _site_chunk(args) -> np.ndarray:
    d, M, p_grid, seed, start, stop = args
    dims = np.full(d, M, dtype=np.int64)
    half = np.array(neighbor_offsets(d, half=True), dtype=np.int64)
    flats = np.arange(M ** d, dtype=np.int64)
    grid = np.asarray(p_grid, dtype=np.float64)
    counts = np.zeros(len(p_grid), dtype=np.int64)
    for r in range(start, stop):
        uniforms = cell_uniforms(derive_seed(seed, r), 1, flats, 0)
        counts += kernels.site_sweep(uniforms, dims, half, grid, 0)
    return counts


def estimate_site_pc(d: int, M: int, replicates: int, p_grid: Sequence[float],
                     seed: int, jobs: int = 1) -> SitePercSweep:
    """Left-right crossing probability of a side-M box per threshold p.

    Each replicate draws one field of per-cell uniforms shared across the
    whole p grid, so the black sets (and crossing indicators) are coupled
    monotonically in p.  The crossing point interpolates the curve at
    height 1/2 (NaN when the curve does not bracket it).
    """
    if M < 2:
        raise ParameterError("box side must be >= 2")
    p_list = [float(p) for p in p_grid]
    if sorted(p_list) != p_list:
        raise ParameterError("p_grid must be sorted ascending")
    if M ** d > 1 << 26:
        raise ParameterError("box too large")
    chunks = [(d, M, tuple(p_list), seed, a, b)
              for a, b in _chunk_ranges(replicates, jobs)]
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_site_chunk, chunks))
    else:
        parts = [_site_chunk(c) for c in chunks]
    counts = np.sum(parts, axis=0)
    estimates = tuple(
        Estimate.from_counts(int(c), replicates, seed, 0,
                             {"model": "site", "M": M, "d": d, "p": p}, repr(p))
        for c, p in zip(counts, p_list))
    fractions = counts / replicates
    crossing_point = _interpolate_half(p_list, fractions)
    return SitePercSweep(estimates=estimates, crossing_point=crossing_point,
                         M=M, d=d, replicates=replicates, seed=seed)


def _interpolate_half(ps: Sequence[float], values: np.ndarray) -> float:
    """First crossing of the (monotone) curve through height 1/2."""
    for i in range(1, len(ps)):
        lo, hi = values[i - 1], values[i]
        if lo < 0.5 <= hi:
            if hi == lo:
                return ps[i]
            return ps[i - 1] + (0.5 - lo) * (ps[i] - ps[i - 1]) / (hi - lo)
    return float("nan")


# -- strip-conjunction probability ---------------------------------------


def _gamma_chunk(args) -> int:
    sched_desc, N, n, x_num, x_den, n_x, seed, start, stop = args
    from .models import sample_fat

    sched = RetentionSchedule.from_descriptor(sched_desc)
    x = (Fraction(x_num[0], x_den[0]), Fraction(x_num[1], x_den[1]))
    count = 0
    for r in range(start, stop):
        g = sample_fat(sched, N, 2, n, derive_seed(seed, r))
        if gamma_event(g, x, n_x):
            count += 1
    return count


def estimate_gamma(sched: RetentionSchedule, N: int, n: int, x, n_x: int,
                   replicates: int, seed: int, jobs: int = 1) -> Estimate:
    """Probability of the four-strip crossing conjunction around ``x``
    for the fat model at level n (d=2 only)."""
    if replicates < 1:
        raise ParameterError("replicates must be >= 1")
    xf = (Fraction(x[0]), Fraction(x[1]))
    desc = sched.descriptor()
    chunks = [(desc, N, n, (xf[0].numerator, xf[1].numerator),
               (xf[0].denominator, xf[1].denominator), n_x, seed, a, b)
              for a, b in _chunk_ranges(replicates, jobs)]
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            counts = list(pool.map(_gamma_chunk, chunks))
    else:
        counts = [_gamma_chunk(c) for c in chunks]
    model = {"model": "fat", "schedule": desc, "N": N, "d": 2,
             "x": [str(xf[0]), str(xf[1])], "n_x": n_x}
    return Estimate.from_counts(sum(counts), replicates, seed, n, model,
                                f"x={xf[0]};{xf[1]} n_x={n_x}")
