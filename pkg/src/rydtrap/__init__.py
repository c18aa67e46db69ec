"""Electrodynamic trap simulator for circular Rydberg atoms.

Submodules
----------
geometry      electrode stacks and the versioned reference trap
fieldsolver   axisymmetric Laplace solve of the unit-volt basis fields
fieldmodel    total E(r, t): grid splines, analytic multipole mode, patches
stark         level data, Stark shifts, spontaneous emission
dipoles       hydrogenic dipole matrix elements (parabolic basis)
dressing      microwave-dressing Hamiltonian, optimizer, lookup table
dynamics      trajectory integration and trap characterization
ensemble      thermal sampling, Ramsey/echo coherence Monte Carlo
config        declarative JSON run configuration
orchestrate   cached pipeline and experiment runners
"""

from .config import RunConfig, parse_config
from .dressing import DressedTable, DressingConfig, build_dressed_table, optimize_dressing
from .dynamics import (StarkPotential, DressedPotential, Trajectory,
                       integrate_batch, integrate_trajectory, mean_theta,
                       stern_gerlach_separation, trap_depth, trap_frequencies)
from .ensemble import (CoherenceResult, EnsembleSpec, Pulse, PulseSequence,
                       accumulate_phase, echo_revival, extract_t2, run_sequence,
                       sample_ensemble)
from .fieldmodel import (AnalyticFieldModel, DriveWaveforms, GridFieldModel,
                         apply_patch_field, calibrate_eta)
from .fieldsolver import BasisFieldSet, solve_basis_fields
from .geometry import ElectrodeGeometry, Rect, reference_geometry
from .orchestrate import Workspace, orchestrate
from .stark import LEVEL_E, LEVEL_G, RydbergLevel, StarkModel, dipole_matrix_element

__version__ = "0.1.0"
