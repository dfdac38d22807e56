"""Normal forms of relative equilibria on cotangent-bundle reduced spaces."""
from .series import ComplexSeries, TruncatedSeries, poisson_bracket, to_complex, from_complex
from .lie import AnholonomicFrame, anholonomic_bracket, deprit_chart, so3_coadjoint_rate
from .mechanics import MechanicalSystem, ReducedChart, reduced_hamiltonian, hamiltonian_jet_function
from .models import (PendulumParams, ThreeBodyParams, lagrange_triangle_shape, pendulum_system,
                     three_body_system)
from .normalform import NormalForm, linearize_and_normalize, normal_form
from .equilibria import RelativeEquilibrium, solve_effective_potential, sweep_equilibria

__version__ = "0.1.0"
