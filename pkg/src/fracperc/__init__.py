"""Fractal percolation simulation and analysis toolkit.

Samplers for the Mandelbrot, k-subset, generalized and fat fractal
percolation models; cluster labeling and crossing predicates on the
retained grids; exact goodness recursions with their Monte Carlo
counterparts; fat-fractal martingale statistics and schedule product
criteria; and a Monte Carlo harness with exact small-instance oracles.
"""

from .connectivity import (ClusterLabels, StripSpec, cluster_measure_stats,
                           crosses, edge_cluster_event, gamma_event,
                           label_clusters, strip_crossing)
from .estimators import (CriticalSearchResult, Estimate, SitePercSweep,
                         clopper_pearson, enumerate_exact, enumeration_size,
                         estimate_crossing, estimate_gamma, estimate_site_pc,
                         search_kc)
from .fatfractal import (FatStats, PointDigits, ScheduleCriteria,
                         change_step_stats, fat_statistics, schedule_products,
                         shift_transform, summarize_fat_runs)
from .goodness import (GoodRecursionResult, GoodnessMap, check_nu_good,
                       coupled_domination_sample, good_probability,
                       good_probability_gfp, is_m_good)
from .index import (CubeIndex, LatticeCell, adjacent, boundary_cells,
                    compare_indices, cube_geometry)
from .kernels import set_use_numba, use_numba
from .models import (GeneratorSpec, Grid, ModelSpec, ParameterError,
                     RetentionSchedule, cube_uniform, sample_fat, sample_gfp,
                     sample_k, sample_mfp)
from .rng import derive_seed

__version__ = "0.1.0"

__all__ = [
    "ClusterLabels", "StripSpec", "cluster_measure_stats", "crosses",
    "edge_cluster_event", "gamma_event", "label_clusters", "strip_crossing",
    "CriticalSearchResult", "Estimate", "SitePercSweep", "clopper_pearson",
    "enumerate_exact", "enumeration_size", "estimate_crossing",
    "estimate_gamma", "estimate_site_pc", "search_kc",
    "FatStats", "PointDigits", "ScheduleCriteria", "change_step_stats",
    "fat_statistics", "schedule_products", "shift_transform",
    "summarize_fat_runs",
    "GoodRecursionResult", "GoodnessMap", "check_nu_good",
    "coupled_domination_sample", "good_probability", "good_probability_gfp",
    "is_m_good",
    "CubeIndex", "LatticeCell", "adjacent", "boundary_cells",
    "compare_indices", "cube_geometry",
    "set_use_numba", "use_numba",
    "GeneratorSpec", "Grid", "ModelSpec", "ParameterError",
    "RetentionSchedule", "cube_uniform", "sample_fat", "sample_gfp",
    "sample_k", "sample_mfp",
    "derive_seed",
]
