"""Mixed P1b/P1 finite elements for stationary convective Brinkman-Forchheimer
flow with a nonsmooth friction slip condition."""
from ._kernels import BACKEND
from .forms import FrictionLaw, ProblemParams, omega
from .mesh import BoundaryTag, TriMesh, rectangle_mesh, unit_square_mesh
from .fespace import build_dofmap
from .solver import DiscreteState, SolverConfig, solve_cbfed

__all__ = [
    "BACKEND",
    "BoundaryTag",
    "DiscreteState",
    "FrictionLaw",
    "ProblemParams",
    "SolverConfig",
    "TriMesh",
    "build_dofmap",
    "omega",
    "rectangle_mesh",
    "solve_cbfed",
    "unit_square_mesh",
]
__version__ = "0.1.0"
