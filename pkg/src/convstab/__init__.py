"""Piecewise-analytic functions, Dini derivatives and convergence-stability experiments."""
from .errors import (CertificationRefused, ConvstabError, DomainError, EvaluationError,
                     FeasibilityError, ParseError, UnsupportedDimension)
from .expr import (CanonicalProgram, Expr, SignVector, discover_regions, eval_branch,
                   evaluate, evaluate_many, sign_vector, to_canonical)
from .grid import GridSpec
from .dsl import parse
from .dini import (DirectionalQuery, DirectionSampler, Verdict, dini_directional, fd_oracle,
                   gf, is_delta_stationary, one_sided)

__version__ = "0.1.0"

__all__ = ["CertificationRefused", "ConvstabError", "DomainError", "EvaluationError",
           "FeasibilityError", "ParseError", "UnsupportedDimension", "CanonicalProgram", "Expr",
           "SignVector", "discover_regions", "eval_branch", "evaluate", "evaluate_many",
           "sign_vector", "to_canonical", "GridSpec", "parse", "DirectionalQuery",
           "DirectionSampler", "Verdict", "dini_directional", "fd_oracle", "gf",
           "is_delta_stationary", "one_sided"]
