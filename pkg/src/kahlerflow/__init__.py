"""kahlerflow: a numerical laboratory for the Kahler-Ricci flow on Fano
model geometries -- flow integration, curvature/entropy/Harnack diagnostics,
and property checks for the associated identities and estimates."""

__version__ = "0.1.0"

from . import errors
from .fields import CurvaturePack, HermitianMetricField, ScalarField, TensorField
from .grids import PeriodicChart, ProfileClosure, RadialGrid

__all__ = [
    "errors",
    "CurvaturePack",
    "HermitianMetricField",
    "ScalarField",
    "TensorField",
    "PeriodicChart",
    "ProfileClosure",
    "RadialGrid",
]
