"""magvisco: a finite-difference laboratory for an incompressible
magnetoviscoelastic fluid model (velocity + deformation tensor + unit
magnetization) on box and periodic grids.

Subsystems: tagged nodal fields, second-order stencil operators with a
compiled/numpy dual backend, a variational Helmholtz projection, a
pressure-split semi-implicit time integrator, energy/dissipation
accounting, a rest-state linearization analyzer, and a penalty-relaxed
magnetization variant for cross-validation.
"""

__version__ = "0.1.0"

from .grid import Grid, GridError, make_grid
from .fields import (  # noqa: F401
    DIRICHLET, FREE, NEUMANN, PERIODIC,
    ConstraintError, Field, FieldError, State,
    constant_field, equilibrium_state, inner_product_L2, make_state,
    norm_L2, norm_max, project_to_sphere, sample, sphere_deviation,
)
from .kernels import backend_name

__all__ = [
    "Grid", "GridError", "make_grid", "Field", "State", "FieldError",
    "ConstraintError", "DIRICHLET", "NEUMANN", "PERIODIC", "FREE",
    "sample", "constant_field", "make_state", "equilibrium_state",
    "project_to_sphere", "sphere_deviation", "inner_product_L2",
    "norm_L2", "norm_max", "backend_name", "__version__",
]
