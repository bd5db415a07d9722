"""Monotone binary-signalling systems: certification, mean-field ODEs on
complete and sparse random networks, and agent-based validation."""

from .systems import (SpinSpace, SignallingSystem, LinkSpace, ValidationReport,
                      validate, validate_macrostate, validate_link_macrostate,
                      make_long, make_kng, make_counterexample, with_committed,
                      build, InvalidParameterError)
from .orders import (PartialOrder, Cone, Comparison, CapacityError,
                     cone_contains, compare, induced_link_order,
                     enumerate_orders)
from .monotone import (Verdict, ConditionResult, MonotonicityReport,
                       check_condition_a, check_condition_b, check_condition_c,
                       certify, find_order, type_c_sampled)
from .meanfield import (Trajectory, Equilibrium, IntegrationError,
                        message_prob, drift, jacobian, integrate,
                        find_equilibria, sweep_committed, order_harness)
from .sparse import (DirectGenerator, build_direct, related_kernel,
                     related_apply, decompose, drift_sparse, integrate_sparse,
                     order_harness_sparse)
from . import abm

__version__ = "0.1.0"
