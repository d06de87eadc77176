"""Consensus protocols on networks.

Simulation of nonlinear and PI consensus protocols, prediction of their
limit values from conservation laws, stability analysis of the PI and
power-system controllers, and the built-in application scenarios.
"""

from ._backend import BACKEND
from .equilibrium import (
    EquilibriumPrediction,
    power_steady_state,
    predict_damped_position,
    predict_first_order,
    predict_pi_average,
    predict_second_order_velocity,
)
from .functions import (
    BumpReciprocal,
    Constant,
    ExpSgn,
    Linear,
    PiecewiseLinear,
    ReciprocalAbsShift,
    ScalarFn,
    validate_gain,
    validate_interaction,
)
from .graph import Graph, disagreement_basis, incidence_matrix, is_connected, laplacian, symmetric_eigenvalues
from .power import FreqController, LoadStep, PowerNetwork, ingest_network, step_load_experiment
from .protocols import AgentState, PIGains, ProtocolKind, ProtocolSpec, rhs
from .scenarios import Scenario, builtin_scenarios, check_scenario, get_scenario, run_scenario
from .simulate import RunConfig, disagreement_diameter, run
from .stability import StabilityReport, classify_pi_double, classify_pi_single
from .trajectory import Status, Trajectory

__version__ = "0.1.0"
