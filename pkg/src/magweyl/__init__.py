"""Magnetic Weyl asymptotics and eigenvalue counting for constant-field Schrodinger operators.

Modules:

- ``field``: intensity matrices, canonical form, regimes, nondegeneracy checks
- ``potential``: expression / grid potentials and localization weights
- ``weyl``: magnetic and standard Weyl densities, Landau lattice counting
- ``discrete``: Peierls discretization on a torus or a Dirichlet box
- ``spectral``: dense, inertia, KPM and sector counting engines, gap scans
- ``dynamics``: classical trajectories, drift and brackets
- ``bounds``: predicted remainder bounds per regime
- ``experiments``: sweeps, scaling fits, studies and their outputs
"""
from .errors import BudgetExceeded, InputError, InvariantViolation, MagWeylError
from .field import FieldConfig, canonical_matrix, classify_regime, field_invariants, semiclassical_scale
from .potential import Bump, PotentialField, parse_potential
from .weyl import landau_levels, localized_weyl, magnetic_weyl_density, standard_weyl_density
from .discrete import GridSpec, assemble
from .spectral import dense_counting, inertia_counting, kpm_local_counting, sector_counting

__version__ = "0.1.0"
