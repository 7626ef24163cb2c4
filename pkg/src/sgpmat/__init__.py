"""Sequential global programming for material design in 2D Helmholtz scattering."""
from .tensor import ComplexSymTensor2, RealSymTensor2
from .graph import (DesignState, MaterialGraph, MaterialNode, PolynomialEdge, RotationalEdge, build_graph,
                    cyclic_linear_graph, rotational_graph)
from .mesh import Mesh, generate_structured_mesh, load_triangle_mesh
from .fem import HelmholtzFEM, ScatterSetup
from .objectives import ExtinctionObjective, TrackingObjective, QuadraticObjective, Wave
from .hyper import AsymptotePair, build_model
from .subproblem import solve_subproblem
from .sgp import Problem, SgpConfig, continuation_run, sgp_run

__version__ = "0.1.0"
