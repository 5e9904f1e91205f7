"""Coupled logarithmic p-Laplacian systems on finite graphs.

Submodules: :mod:`graph` (instances and hypotheses), :mod:`calculus`
(gradient form, p-Laplacian, norms), :mod:`energy` (functional, derivative,
residuals), :mod:`nehari` (fibering map and projection), :mod:`solver`
(ground states and the lambda sweep), :mod:`analysis` (calibration, series,
embedding constants) and :mod:`cli`.
"""

from .calculus import FieldPair, dirichlet_norm, gradient_form, h_norm, integrate, lp_norm, p_laplacian
from .energy import ProblemSpec, derivative_pairing, energy, ground_level_identity, nehari_defect, residual
from .errors import GraphlogError
from .graph import GraphInstance, load_graph, save_graph
from .nehari import fibering_coefficients, nehari_level, project_to_nehari
from .solver import SolverConfig, lambda_sweep, solve_dirichlet, solve_ground_state

__version__ = "0.1.0"
