"""Stretched-out relative equilibrium and fourth-order normal form of the double spherical pendulum."""
import argparse

import numpy as np

from cotred.equilibria import solve_effective_potential
from cotred.mechanics import ReducedChart, hamiltonian_jet_function
from cotred.models import pendulum_system
from cotred.normalform import complex_term_count, format_table, normal_form, taylor_shift


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--r", type=float, default=1.0)
    args = parser.parse_args()

    system = pendulum_system()
    eq = solve_effective_potential(system, args.r)
    chart = ReducedChart.for_system(system, eq.r)
    h = hamiltonian_jet_function(system, chart)
    nf = normal_form(h, eq.point, 4)

    print("z_e =", np.array2string(eq.point, precision=10))
    print(format_table(nf))
    print(f"taylor terms through degree 4: {complex_term_count(taylor_shift(h, eq.point, 4), nf.linearization)}")
    print(f"resonance margin {nf.resonance_margin:.4f} at m = {nf.resonance_vector}")
    np.set_printoptions(precision=6, suppress=True, linewidth=120)
    print("M =")
    print(nf.linearization.M)


if __name__ == "__main__":
    main()
