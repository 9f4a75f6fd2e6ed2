"""Discrete simulator for shaded tube families on grids in dimensions
3 and 4: direction nets, rasterized tubes, configuration generators,
shading generators, exact incidence statistics, structural checks, and
scaling experiments against the proved volume bounds."""

from .grid import GridSpec, ceil_root, pack_cells, unpack_cells, window_length
from .directions import DirectionNet, build_direction_net, clear_net_cache
from .tubes import (EmptyTube, RasterizationError, Tube, rasterize_batch,
                    rasterize_tube, tube_axis_order)
from .families import (Infeasible, ShadedFamily, ShadedTube, clear_family_cache,
                       make_family)
from .shading import make_shading
from .stats import IncidenceStats, family_stats
from .checks import available_checks, check_structure
from .experiments import (lemma_exponents, scaling_experiment, standard_suite,
                          suite_csv_rows, verify_bound, write_csv)

__all__ = [
    "GridSpec", "ceil_root", "pack_cells", "unpack_cells", "window_length",
    "DirectionNet", "build_direction_net", "clear_net_cache",
    "EmptyTube", "RasterizationError", "Tube", "rasterize_batch",
    "rasterize_tube",
    "tube_axis_order",
    "Infeasible", "ShadedFamily", "ShadedTube", "clear_family_cache",
    "make_family", "make_shading",
    "IncidenceStats", "family_stats",
    "available_checks", "check_structure",
    "lemma_exponents", "scaling_experiment", "standard_suite",
    "suite_csv_rows", "verify_bound", "write_csv",
]
