"""Scalar (boson) pair creation from vacuum in homogeneous, arbitrarily
polarized electric fields."""
from .field import (EllipticPulse, FieldConfig, PotentialTable, build_potential,
                    eval_field, eval_field_complex, eval_potential_complex,
                    keldysh_gamma)
from .qve import (BogoliubovState, ChiState, FghState, ModeCoordinates,
                  bogoliubov_rhs, chi_rhs, chi_to_fgh, fgh_rhs, omega,
                  vacuum_chi, w_factor)
from .integrator import (ORACLE, PRODUCTION, Formulation, ModeResult,
                         SolverSettings, solve_mode, solve_mode_all)
from .sweep import (DensityMode, MirrorAxis, MomentumGrid, ScanTable, Spectrum,
                    azimuthal_profile, compute_spectrum, dominant_azimuthal_mode,
                    effective_mass, number_density, parameter_scan,
                    peak_ring_band, symmetry_residual)

from .semiclassical import (PhaseIntegralReport, Statistics, TurningPointPair,
                            analyze, find_turning_points, interference_estimate,
                            interference_phase, phase_integral_K)

__version__ = "0.1.0"
