"""Primal-dual interior-point solver for conic problems over Cartesian
products of exotic cones, with a benchmark harness and CLI."""

from .cones import (CONE_TYPES, Cone, GenPower, GeoMean, L2Epi, LinfEpi, Lmi,
                    LogPersp, Nonneg, PowerMean, PsdSvec, SqrEpi,
                    WsosDualScalar, random_interior_point)
from .errors import (ConipmError, DimensionError, NumericalFailure,
                     OracleMisuse, ParseError)
from .model import (ConicModel, DUAL_INFEASIBLE, ILL_POSED, OPTIMAL,
                    PRIMAL_INFEASIBLE, STALLED, build_model,
                    deserialize_model, serialize_model, verify_certificate)
from .solver import SolveResult, SolverOptions, solve
from .stepper import MODES

__version__ = "0.1.0"

__all__ = [
    "CONE_TYPES", "Cone", "ConicModel", "ConipmError", "DimensionError",
    "DUAL_INFEASIBLE", "GenPower", "GeoMean", "ILL_POSED", "L2Epi", "LinfEpi",
    "Lmi", "LogPersp", "MODES", "Nonneg", "NumericalFailure", "OPTIMAL",
    "OracleMisuse", "ParseError", "PowerMean", "PRIMAL_INFEASIBLE", "PsdSvec",
    "STALLED", "SolveResult", "SolverOptions", "SqrEpi", "WsosDualScalar",
    "build_model", "deserialize_model", "random_interior_point",
    "serialize_model", "solve", "verify_certificate",
]
