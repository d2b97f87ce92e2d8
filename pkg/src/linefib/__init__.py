"""Line fibrations of R^3 built from planar generator maps.

The package evaluates the unit field of such a fibration, checks the
structural properties of its fibers and Gauss image, and computes the contact
invariants of the associated plane field.
"""
from .errors import (
    AntipodalInput, CanyonFound, CapExceeded, ConfigError, EmptyEstimate, LineFibError,
    MidpointNotRealized, NearSeam, NoConvergence, NotInPlane, OnBoundaryFiber, OutsideDomain,
    ViolationFound,
)
from .evaluator import (
    FibrationModel, SolverSettings, base_point_at, base_points, field_at, field_at_many,
    fiber_through_base, fiber_through_point, scale_homotopy,
)
from .generators import (
    BoundaryLineFamily, Composed, Constant, ConvexCollapse, DiskCollapse, ExoticTan,
    FatHelicoid, GeneratorMap, HalfHalf, Hopf, Identity, OneParam, PlanarDomain,
    SmoothDiskCollapse, eval_B, eval_f, fibers_intersect, skew_defect,
)
from .geom import (
    AffinePlane, OrientedLine, Relation, circle_angle, geodesic_midpoint, line_line_distance,
)

__version__ = "0.1.0"

__all__ = [
    "AffinePlane", "BoundaryLineFamily", "Composed", "Constant", "ConvexCollapse",
    "DiskCollapse", "ExoticTan", "FatHelicoid", "FibrationModel", "GeneratorMap", "HalfHalf",
    "Hopf", "Identity", "OneParam", "OrientedLine", "PlanarDomain", "Relation",
    "SmoothDiskCollapse", "SolverSettings", "base_point_at", "base_points", "circle_angle",
    "eval_B", "eval_f", "fiber_through_base", "fiber_through_point", "fibers_intersect",
    "field_at", "field_at_many", "geodesic_midpoint", "line_line_distance", "scale_homotopy",
    "skew_defect", "__version__",
    "AntipodalInput", "CanyonFound", "CapExceeded", "ConfigError", "EmptyEstimate",
    "LineFibError", "MidpointNotRealized", "NearSeam", "NoConvergence", "NotInPlane",
    "OnBoundaryFiber", "OutsideDomain", "ViolationFound",
]
