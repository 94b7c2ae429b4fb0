"""Diffusion-generated (MBO) motion for orthogonal matrix-valued fields.

Solvers for the two-step iteration (heat diffusion, then pointwise
projection onto the orthogonal group) on flat tori and on closed surfaces
represented by their closest-point maps, with a volume-constrained variant
and a built-in Lyapunov-energy monitor.
"""

from .cpm_surface import (BandSet, BandSpec, CallableSurface, Sphere, Surface,
                          SurfaceDiffuser, SurfaceOfRevolution, band_width,
                          build_band, closest_point, diffuse_surface,
                          peanut_surface, spectral_grid, tail_T)
from .errors import (ConfigurationError, DegenerateDeterminantError,
                     SnapshotFormatError, UnderResolvedError)
from .field import (EnergyLog, GridSpec, MatrixField, interface_cells,
                    plus_region_stats, plus_volume, read_snapshot,
                    winding_pair, write_snapshot)
from .matgeom import (SvdResult, frobenius_inner, nearest_opposite,
                      nearest_orthogonal, svd, t_minus, t_plus)
from .mbo import (MboConfig, RunResult, delta_e, lyapunov_energy, mbo_run,
                  mbo_step, select_threshold, volume_mbo_step)
from .nufft import ModeGrid, direct_type1, direct_type2, nufft_type1, nufft_type2
from .scenarios import SCENARIO_NAMES, ScenarioSpec, build_initial, builtin_surface
from .torus_heat import TorusDiffuser, diffuse_torus, heat_multiplier

__version__ = "0.1.0"
