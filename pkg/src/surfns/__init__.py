"""Taylor-Hood finite elements for Navier-Stokes on evolving surfaces."""

from .geometry import AnalyticSurface, make_surface
from .mesh import EvolvingSurfaceMesh, MeshSnapshot, build_initial_mesh
from .fespace import FeFunction, TaylorHoodSpace, interpolate
from .solver import PRESETS, RunConfig, Stepper, run_simulation
from .analysis import ErrorReport, eoc

__all__ = [
    "AnalyticSurface",
    "make_surface",
    "EvolvingSurfaceMesh",
    "MeshSnapshot",
    "build_initial_mesh",
    "FeFunction",
    "TaylorHoodSpace",
    "interpolate",
    "PRESETS",
    "RunConfig",
    "Stepper",
    "run_simulation",
    "ErrorReport",
    "eoc",
]
