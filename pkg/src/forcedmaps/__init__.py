"""Forced monotone interval maps: invariant graphs and their bifurcations.

A skew product (theta, x) -> (omega(theta), f_{beta,theta}(x)) over an
invertible base replaces the fixed points of an unforced interval map by
invariant graphs. This package computes the two bounding graphs of a
trapping strip by exact orbit pullback, their Lyapunov exponents and gap
(pinching) diagnostics, the sets of strip-bounded orbits, and the
critical parameter at which the graph pair collapses, together with
independent 1-d oracles and a reduction for forced scalar flows.
"""

from .base_systems import (BasePoint, BaseSystem, GOLDEN_MEAN, backward,
                           forward, orbit, sample_thetas)
from .bifurcation import (BifurcationResult, SweepRow, existence_check,
                          find_beta_c, find_beta_c_restricted, find_beta_hat,
                          has_invariant_graph, orbit_segment, sweep,
                          verify_invariant_set)
from .errors import (Blowup, ConfigError, DomainError, ForcedMapsError,
                     GraphEscaped, MismatchedFields, NoBracket, NotInvariant,
                     PreconditionFailed, ValidationFailed)
from .fibre_maps import (AffineFibres, ArctanFibres, CallableFibres,
                         FibreFamily, GammaBoundary, TableFibres, arctan_1d,
                         arctan_2d, deriv_beta, deriv_x, deriv_xx, evaluate,
                         inverse, verify_gamma_compatibility)
from .flow_adapter import (ScalarFlowSystem, as_fibre_family, linear_field,
                           quadratic_cap_field, time_t0_map,
                           verify_flow_boundaries)
from .graph_engine import (GraphField, IntervalField, LOWER, PinchingReport,
                           UPPER, adaptive_graph_field, attracting_which,
                           bounded_set, compute_graph_field, contraction_check,
                           lyapunov, pinching_report, pullback_graph_point)
from .oracle import (IdentityBetacResult, SaddleNode1D, arctan_tangency_point,
                     closed_form_betac_arctan, identity_base_betac,
                     solve_saddle_node_1d)

__version__ = "0.1.0"
