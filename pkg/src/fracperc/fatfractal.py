"""Fat-fractal statistics: level counts, the normalized-count martingale,
schedule product criteria and digit-shift machinery.

With Z_m retained cubes at level m, the volume fraction is Z_m / N^{dm}
and W_m = Z_m / prod_{i<=m}(p_i N^d) is a nonnegative martingale with
mean one; the volume fraction factors exactly as (prod p_i) * W_m.  The
three schedule products prod p_i, prod p_i^{N^i} and prod p_i^{N^{di}}
separate the qualitative regimes of the model, so their partial values
are tracked in log domain and their limits classified analytically from
the schedule's tail rule, never from floating-point underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .models import Grid, ParameterError, RetentionSchedule


@dataclass(eq=False)
class FatStats:
    """Per-level statistics of one fat-fractal realization (levels 0..n)."""

    counts: np.ndarray          # retained cubes per level
    volume: np.ndarray          # counts / N^{d m}
    martingale: np.ndarray      # counts / prod(p_i N^d)
    extinct: bool               # no retained cube at the deepest level
    schedule: RetentionSchedule

    @property
    def n(self) -> int:
        return len(self.counts) - 1


def fat_statistics(g: Grid, sched: RetentionSchedule) -> FatStats:
    """Level counts, volume fractions and martingale values of ``g``.

    The factorization volume_m = (prod_{i<=m} p_i) * W_m is checked in
    exact rational arithmetic for every level.
    """
    if g.tree is None:
        raise ParameterError("fat statistics need the retained tree")
    nd = g.N ** g.d
    counts = np.array([cells.shape[0] for cells in g.tree], dtype=np.int64)
    volume = counts / (float(nd) ** np.arange(g.n + 1))
    martingale = np.empty(g.n + 1)
    martingale[0] = float(counts[0])
    norm = Fraction(1)
    prod_p = Fraction(1)
    for m in range(1, g.n + 1):
        p_m = Fraction(sched.value_at(m))
        norm *= p_m * nd
        prod_p *= p_m
        w_exact = Fraction(int(counts[m])) / norm
        vol_exact = Fraction(int(counts[m]), nd ** m)
        assert prod_p * w_exact == vol_exact
        martingale[m] = float(w_exact)
    return FatStats(counts=counts, volume=volume, martingale=martingale,
                    extinct=bool(counts[g.n] == 0), schedule=sched)


def change_step_stats(g: Grid) -> list[int]:
    """Levels m where the retained set shrank, i.e. some retained
    level-(m-1) cube lost at least one child."""
    if g.tree is None:
        raise ParameterError("change-step statistics need the retained tree")
    nd = g.N ** g.d
    return [m for m in range(1, g.n + 1)
            if g.tree[m].shape[0] < nd * g.tree[m - 1].shape[0]]


POSITIVE = "positive"
ZERO = "zero"
UNDETERMINED = "undetermined-at-horizon"


@dataclass(frozen=True)
class ScheduleCriteria:
    """Partial schedule products (log domain) and their limit classes.

    ``log_partials[i][m-1]`` is the log of the m-th partial product for
    family i, where family 0 weights each level by 1, family 1 by N^m,
    family 2 by N^{dm}.  ``classifications`` give the analytic limit
    class of each family under the schedule's tail rule.
    """

    log_partials: tuple[tuple[float, ...], ...]
    classifications: tuple[str, str, str]
    horizon: int
    N: int
    d: int


def _classify_tail(sched: RetentionSchedule, growth: float, tail_tol: float) -> str:
    """Limit class of prod p_i^{w_i} with weights growing like ``growth``^i.

    The product is positive exactly when sum w_i (1 - p_i) converges.
    Constant tails below one diverge for every family; a geometric
    complement tail 1 - c q^i converges when growth * q < 1.
    """
    kind = sched.tail[0]
    if kind == "constant":
        return POSITIVE if sched.tail[1] == 1.0 else ZERO
    c, q = sched.tail[1], sched.tail[2]
    if c == 0.0:
        return POSITIVE
    ratio = growth * q
    if ratio == 1.0:
        return ZERO
    if abs(ratio - 1.0) <= tail_tol:
        return UNDETERMINED
    return POSITIVE if ratio < 1.0 else ZERO


def schedule_products(sched: RetentionSchedule, N: int, d: int,
                      horizon: int, tail_tol: float = 1e-12) -> ScheduleCriteria:
    """Evaluate the three product criteria for a retention schedule."""
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    logs = [math.log(sched.value_at(i)) for i in range(1, horizon + 1)]
    weights = [
        [1.0] * horizon,
        [float(N) ** i for i in range(1, horizon + 1)],
        [float(N) ** (d * i) for i in range(1, horizon + 1)],
    ]
    partials = []
    for w in weights:
        terms = [wi * li for wi, li in zip(w, logs)]
        partials.append(tuple(math.fsum(terms[: m + 1]) for m in range(horizon)))
    growths = (1.0, float(N), float(N) ** d)
    classes = tuple(_classify_tail(sched, g, tail_tol) for g in growths)
    return ScheduleCriteria(log_partials=tuple(partials), classifications=classes,
                            horizon=horizon, N=N, d=d)


@dataclass(frozen=True)
class PointDigits:
    """Finite base-N digit expansion of a point of the unit cube: one
    digit tuple per level, most significant first."""

    digits: tuple[tuple[int, ...], ...]
    N: int

    def __post_init__(self):
        if not self.digits:
            raise ParameterError("digit stream needs horizon >= 1")
        d = len(self.digits[0])
        for t in self.digits:
            if len(t) != d:
                raise ParameterError("digit tuples have inconsistent dimension")
            if any(not (0 <= v < self.N) for v in t):
                raise ParameterError(f"digit tuple {t} outside 0..{self.N - 1}")

    @property
    def horizon(self) -> int:
        return len(self.digits)

    @property
    def d(self) -> int:
        return len(self.digits[0])


def shift_transform(p: PointDigits, steps: int) -> PointDigits:
    """Drop the first ``steps`` digit tuples: the point is mapped to its
    relative position inside its depth-``steps`` cube."""
    if steps < 1:
        raise ParameterError("steps must be a positive integer")
    if steps >= p.horizon:
        raise ParameterError(f"cannot shift {steps} steps at horizon {p.horizon}")
    return PointDigits(digits=p.digits[steps:], N=p.N)


def summarize_fat_runs(runs: list[FatStats]) -> dict:
    """Aggregate replicate statistics, with and without extinct runs.

    Returns per-level means and standard errors for the volume fraction
    and the martingale, plus the same restricted to runs that survived
    to the deepest level (reported with the conditioning count).
    """
    if not runs:
        raise ParameterError("no replicates to summarize")
    n = runs[0].n
    volume = np.array([r.volume for r in runs])
    mart = np.array([r.martingale for r in runs])
    alive = np.array([not r.extinct for r in runs])

    def stats(matrix):
        mean = matrix.mean(axis=0)
        if matrix.shape[0] > 1:
            se = matrix.std(axis=0, ddof=1) / math.sqrt(matrix.shape[0])
        else:
            se = np.zeros(matrix.shape[1])
        return mean, se

    vol_mean, vol_se = stats(volume)
    mart_mean, mart_se = stats(mart)
    out = {
        "replicates": len(runs),
        "levels": list(range(n + 1)),
        "volume_mean": vol_mean.tolist(),
        "volume_se": vol_se.tolist(),
        "martingale_mean": mart_mean.tolist(),
        "martingale_se": mart_se.tolist(),
        "extinct": int((~alive).sum()),
    }
    if alive.any():
        cvol_mean, cvol_se = stats(volume[alive])
        cmart_mean, cmart_se = stats(mart[alive])
        out["surviving"] = {
            "replicates": int(alive.sum()),
            "volume_mean": cvol_mean.tolist(),
            "volume_se": cvol_se.tolist(),
            "martingale_mean": cmart_mean.tolist(),
            "martingale_se": cmart_se.tolist(),
        }
    return out
