"""Extremal expectations over coherent distributions of two forecasts.

Two experts report X1 = E[X | F1] and X2 = E[X | F2] for a Bernoulli X with
P(X = 1) = p. The package computes tight bounds on E f(X1, X2) in closed
form, builds the distributions attaining them, checks them with linear
programs on finite atom grids, and verifies dual certificates numerically.
"""

from .distribution import (
    JointAtomTable,
    ObjectiveFn,
    StructureError,
    ValidationReport,
    covariance,
    expectation,
    from_conditionals,
    validate_coherence,
)
from .ladder import LadderSpec, NotTight, build_ladder, classify
from .bounds import (
    QuadraticForm,
    SphereInstance,
    abspow_bound,
    abspow_witness,
    alpha0,
    cov_bound,
    cov_witness,
    quad_bound,
    sphere_max,
    sphere_max_numeric,
)

__version__ = "0.1.0"
