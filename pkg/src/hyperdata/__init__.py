"""Numerical pipelines for asymptotically hyperbolic initial data sets.

The package discretizes the exterior of a ball in hyperbolic space,
evaluates the Einstein constraint map and dominant-energy-condition
diagnostics, computes the mass functional through charge integrals, and
runs the density-theorem deformation pipelines (strict-DEC perturbation,
conformally hyperbolic exteriors, Wang gauge) at desk scale.
"""

__version__ = "0.1.0"

from .grid import Grid, build_grid, FrameConvention
from .fields import (InitialData, OneFormField, ScalarField, SymTensorField,
                     load_field, save_field, shell_norms_csv)
from .calculus import (conformal_killing, covariant_derivative, divergence,
                       gradient, hessian, laplacian, lie_derivative,
                       vector_laplacian)
from .diagnostics import (AsymptoticExpansion, cutoff_chi, cutoff_xi,
                          decay_fit, extract_expansion, weighted_sup_norm)
from .constraints import (ConstraintDensities, DecReport, adjoint_phi,
                          check_dec, densities, eval_phi, linearize_phi,
                          quadratic_remainder)
from .mass import (KidElement, MassReport, charge_integrand, kid_basis,
                   mass_conf_hyp, mass_continuity_probe, mass_functional,
                   mass_wang, sphere_charge)
from .elliptic import (IndicialRecord, OdeProblem, indicial_exponents,
                       radial_ode_solve, solve_scalar, solve_vector)
from .deformation import (DeformationResult, apply_conformal,
                          deform_to_conformally_hyperbolic, eval_T,
                          linearize_T, perturb_to_strict_dec, perturb_wang,
                          solve_linearized, wang_renormalize)
from .catalog import (WangSpec, adss_data, conf_hyp_data, hyperbolic_data,
                      wang_data)
