"""Conservative pasting toolkit on the flat torus."""

from .diffeo import weak_paste
from .divsolve import solve_divergence_torus, solve_divergence_zero_boundary
from .errors import PasteError
from .grid import GridMap, GridSpec, ScalarField, VectorField, norms
from .io import read_field, write_field
from .mollify import mollify
from .moser import MoserProblem, solve_jacobian_eq
from .pasting import paste_vector_fields, smooth_conservative
from .regions import annulus_regions, ball_regions, nested_regions
from .symplectic import blend_generating, generating_from_map, map_from_generating

__version__ = "0.1.0"

__all__ = [
    "GridMap",
    "GridSpec",
    "MoserProblem",
    "PasteError",
    "ScalarField",
    "VectorField",
    "annulus_regions",
    "ball_regions",
    "blend_generating",
    "generating_from_map",
    "map_from_generating",
    "mollify",
    "nested_regions",
    "norms",
    "paste_vector_fields",
    "read_field",
    "smooth_conservative",
    "solve_divergence_torus",
    "solve_divergence_zero_boundary",
    "solve_jacobian_eq",
    "weak_paste",
    "write_field",
]
