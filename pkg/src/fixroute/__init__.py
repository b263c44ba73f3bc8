"""Path-vector routing dynamics under fixed-route attackers, with fixed-point oracles."""

from .attack import SILENCE, FixedRouteAttack, announcement_for, prefix_hijack, silent_attack
from .engine import (Activate, Deliver, Drop, InitialConfig, StopCondition, Trace, detect_oscillation,
                     detect_quiescence, initialize, round_count, run, step)
from .errors import (ConfigurationError, DomainError, FixRouteError, InvariantViolation,
                     MalformedRouteError, ModelViolation, ParseError, PreconditionError, StructuralError)
from .graph import AsGraph, Mode, Relationship, Role, hierarchy_depth, neighbors, validate
from .oracle import best_perceivable, fr, fsr, perceivable_routes
from .policy import (CommercialRanking, CustomRanking, PolicyProfile, ShortestPathRanking, classify_route,
                     make_commercial_profile, make_shortest_path_profile, rank_compare)
from .route import EMPTY
from .schedule import ExplicitSchedule, FairRandomSchedule, SynchronousSchedule

__version__ = "0.1.0"
