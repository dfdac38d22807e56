from dataclasses import dataclass

import pytest

from cotred.equilibria import RelativeEquilibrium, solve_effective_potential
from cotred.mechanics import MechanicalSystem, ReducedChart, hamiltonian_jet_function
from cotred.models import pendulum_system, three_body_system
from cotred.normalform import NormalForm, normal_form


@dataclass
class Setup:
    system: MechanicalSystem
    eq: RelativeEquilibrium
    chart: ReducedChart
    h: object
    nf: NormalForm


def _setup(system, value):
    eq = solve_effective_potential(system, value)
    chart = ReducedChart.for_system(system, eq.r)
    h = hamiltonian_jet_function(system, chart)
    return Setup(system, eq, chart, h, normal_form(h, eq.point, 4, keep_resonant=True))


@pytest.fixture(scope="session")
def three_body():
    return _setup(three_body_system(), 6.5)


@pytest.fixture(scope="session")
def pendulum():
    return _setup(pendulum_system(), 1.0)
