"""Layer-adapted meshes, stabilized higher-order FEM and upwind FD with error indicators
for singularly perturbed convection-diffusion problems on the unit square."""
from .bench import StudyConfig, run_study
from .elements import LocalSpace
from .fd import AdaptConfig, FDGrid, adapt_loop, compute_indicators, fd_solve
from .fem import NumericalFailure, Problem, assemble, make_stab_plan, solve, solve_problem
from .green import bessel_k0, fundamental_solution_2d
from .interpolation import DiscreteField, DofMap, interpolate
from .mesh import MeshFamily, MeshSpec, TensorMesh, build_macro_mesh, build_stype_mesh
from .norms import balanced_error, energy_error, estimated_orders
from .postprocess import postprocess_biquadratic, postprocess_gl, postprocess_vec
from .problems import problem_example1, problem_example2

__version__ = "0.1.0"
