import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotred import series as ts
from cotred.lie import ChartSingularityError, deprit_chart, deprit_inverse
from cotred.mechanics import (ReducedChart, SingularShapeError, effective_potential, geometry_from_jets,
                              hamiltonian_value, kinetic_split, momentum_from_velocity, point_geometry,
                              reduced_hamiltonian)
from cotred.models import PendulumParams, lagrange_triangle_shape, pendulum_system, three_body_system
from cotred.series import TruncatedSeries

TB = three_body_system()
PD = pendulum_system()

tb_shape = st.tuples(st.floats(0.5, 8), st.floats(0.5, 8), st.floats(0.2, math.pi - 0.2))
pd_shape = st.tuples(st.floats(0.05, 0.9), st.floats(0.05, 0.9), st.floats(-math.pi, math.pi))
vec = lambda n: st.lists(st.floats(-2, 2), min_size=n, max_size=n).map(np.array)


def closed_form_three_body(z, r):
    """Reduced three-body Hamiltonian in the xxy gauge, written out by hand."""
    r1, r2, phi, u, p1, p2, p3, v = z
    J1, J2, J3 = deprit_chart(u, v, r)
    s, c = ts.sin(phi), ts.cos(phi)
    a, b = r1 * r1, r2 * r2
    kin = ((a + b * c * c) * ts.recip(a * b * s * s) * J1 * J1 + 2 * c * ts.recip(a * s) * J1 * J2
           + J2 * J2 * ts.recip(a) + J3 * J3 * ts.recip(a + b) + p1 * p1 + p2 * p2
           + (a + b) * ts.recip(a * b) * (p3 - b * ts.recip(a + b) * J3) ** 2)
    return 0.5 * kin + TB.potential([r1, r2, phi])


def test_three_body_closed_forms_at_triangle():
    shape = lagrange_triangle_shape(TB.params, 6.5).shape
    g = point_geometry(TB, shape)
    assert np.allclose(g.inertia, np.diag([21.125, 21.125, 42.25]), atol=1e-12)
    assert np.allclose(g.connection, [[0, 0, 0], [0, 0, 0], [0, 0, 0.5]], atol=1e-12)
    assert np.allclose(g.metric, np.diag([1.0, 1.0, 10.5625]), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(tb_shape)
def test_three_body_geometry_formulas(q):
    r1, r2, phi = q
    g = point_geometry(TB, q)
    s, c = math.sin(phi), math.cos(phi)
    I = np.array([[r2 ** 2 * s * s, -r2 ** 2 * s * c, 0], [-r2 ** 2 * s * c, r1 ** 2 + r2 ** 2 * c * c, 0],
                  [0, 0, r1 ** 2 + r2 ** 2]])
    assert np.allclose(g.inertia, I, rtol=1e-12, atol=1e-12)
    assert np.allclose(g.connection[2], [0, 0, r2 ** 2 / (r1 ** 2 + r2 ** 2)])
    assert np.allclose(g.connection[:2], 0.0)
    assert g.metric[2, 2] == pytest.approx(r1 ** 2 * r2 ** 2 / (r1 ** 2 + r2 ** 2), rel=1e-12)


def test_three_body_inertia_block_structure_as_jets():
    geo = geometry_from_jets(TB, (4.0, 5.0, 1.1), 3)
    for a, b in [(0, 2), (1, 2), (2, 0), (2, 1)]:
        assert geo.inertia[a][b].allclose(TruncatedSeries(3, 3), 1e-14)


def test_reduced_hamiltonian_matches_closed_form(three_body):
    z0, r = three_body.eq.point, three_body.eq.r
    h = reduced_hamiltonian(TB, three_body.chart, z0, 4)
    z = [TruncatedSeries.variable(8, 4, k, z0[k]) for k in range(8)]
    assert h.allclose(closed_form_three_body(z, r), 1e-9)


@settings(max_examples=20, deadline=None)
@given(tb_shape, vec(3), vec(3))
def test_three_body_value_matches_closed_form(q, p, J):
    J = J + np.array([0, 0, 3.0])
    u, v, r = deprit_inverse(J)
    z = [*q, u, *p, v]
    expected = closed_form_three_body(z, r)
    assert hamiltonian_value(TB, ReducedChart.for_system(TB, r), z) == pytest.approx(expected, rel=1e-10, abs=1e-10)


def legendre_oracle(system, q, p, J):
    """Hamiltonian from the kinetic energy of the particles: H = 1/2 pi^T G^-1 pi + V."""
    fs, gd = system.shape_dim, system.group_dim
    n = fs + gd

    def T(v):
        return kinetic_split(system, q, v[:fs], v[fs:])[0]

    E = np.eye(n)
    G = np.array([[T(E[i] + E[j]) - T(E[i]) - T(E[j]) for j in range(n)] for i in range(n)])
    pi = np.concatenate([p, J])
    return 0.5 * pi @ np.linalg.solve(G, pi) + float(system.potential(list(q)))


@settings(max_examples=20, deadline=None)
@given(tb_shape, vec(3), vec(3))
def test_three_body_legendre_oracle(q, p, J):
    J = J + np.array([0.5, 0, 3.0])
    u, v, r = deprit_inverse(J)
    got = hamiltonian_value(TB, ReducedChart.for_system(TB, r), [*q, u, *p, v])
    assert got == pytest.approx(legendre_oracle(TB, q, p, J), rel=1e-9, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(pd_shape, vec(3), st.floats(-2, 2))
def test_pendulum_legendre_oracle(q, p, r):
    chart = ReducedChart.for_system(PD, r)
    got = hamiltonian_value(PD, chart, [*q, *p])
    assert got == pytest.approx(legendre_oracle(PD, q, p, [r]), rel=1e-9, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(tb_shape, vec(3), vec(3))
def test_kinetic_split_three_body(q, qdot, xi):
    direct, split = kinetic_split(TB, q, qdot, xi)
    assert direct == pytest.approx(split, rel=1e-10, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(pd_shape, vec(3), vec(1))
def test_kinetic_split_pendulum(q, qdot, xi):
    direct, split = kinetic_split(PD, q, qdot, xi)
    assert direct == pytest.approx(split, rel=1e-10, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(pd_shape)
def test_pendulum_inertia_formula(q):
    r1, r2, phi = q
    for m1, m2 in [(1.0, 1.0), (2.0, 0.5)]:
        sys_ = pendulum_system(PendulumParams(m1, m2))
        g = point_geometry(sys_, q)
        I = m1 * r1 ** 2 + m2 * (r1 ** 2 + r2 ** 2 + 2 * r1 * r2 * math.cos(phi))
        assert g.inertia[0, 0] == pytest.approx(I, rel=1e-12)
        # only particle 2 moves sideways under a change of r1
        assert g.connection[0, 0] == pytest.approx(-m2 * r2 * math.sin(phi) / I, rel=1e-10, abs=1e-14)


def test_pendulum_connection_vanishes_in_plane():
    g = point_geometry(PD, (0.3, 0.4, 0.0))
    assert g.connection[0, 0] == 0.0 and g.connection[1, 0] == 0.0


@settings(max_examples=20, deadline=None)
@given(tb_shape, st.floats(-math.pi, math.pi), vec(3))
def test_rotated_embedding_keeps_inertia_spectrum(q, angle, axis):
    axis = axis + np.array([0, 0, 1e-3])
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    R = np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K

    def embedding(s):
        return [[sum(R[i, j] * x[j] for j in range(3)) for i in range(3)] for x in TB.embedding(s)]

    rotated = dataclasses.replace(TB, embedding=embedding)
    I0, I1 = point_geometry(TB, q).inertia, point_geometry(rotated, q).inertia
    assert np.allclose(I1, R @ I0 @ R.T, atol=1e-10)
    assert np.allclose(np.linalg.eigvalsh(I1), np.linalg.eigvalsh(I0), atol=1e-9)


def test_rotation_about_symmetry_axis_keeps_pendulum_inertia():
    c, s = math.cos(0.7), math.sin(0.7)

    def embedding(q):
        return [[c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]] for x in PD.embedding(q)]

    rotated = dataclasses.replace(PD, embedding=embedding)
    q = (0.3, 0.6, 1.2)
    assert point_geometry(rotated, q).inertia[0, 0] == pytest.approx(point_geometry(PD, q).inertia[0, 0])


@settings(max_examples=30, deadline=None)
@given(tb_shape, vec(3))
def test_horizontal_lift_has_zero_momentum(q, qdot):
    g = point_geometry(TB, q)
    xi = -g.connection.T @ qdot
    p, J = momentum_from_velocity(TB, q, qdot, xi)
    assert np.allclose(J, 0.0, atol=1e-10)
    assert np.allclose(p, g.metric @ qdot)


@settings(max_examples=30, deadline=None)
@given(tb_shape)
def test_horizontal_metric_positive_definite(q):
    assert np.all(np.linalg.eigvalsh(point_geometry(TB, q).metric) > 0)


@settings(max_examples=30, deadline=None)
@given(pd_shape)
def test_pendulum_metric_positive_definite(q):
    if q[0] ** 2 + q[1] ** 2 + 2 * q[0] * q[1] * math.cos(q[2]) < 1e-3:
        return
    assert np.all(np.linalg.eigvalsh(point_geometry(PD, q).metric) > 0)


def test_gradient_vanishes_at_equilibria(three_body, pendulum):
    for s in (three_body, pendulum):
        h = reduced_hamiltonian(s.system, s.chart, s.eq.point, 2)
        assert np.max(np.abs(h.gradient())) < 1e-9
        assert h.constant_term == pytest.approx(s.eq.energy, abs=1e-12)


def test_series_matches_point_values(pendulum):
    z0 = np.array(pendulum.eq.point)
    dz = 1e-2 * np.array([1.0, -0.5, 0.3, 0.2, 0.7, -0.4])
    exact = hamiltonian_value(PD, pendulum.chart, z0 + dz)
    errs = [abs(reduced_hamiltonian(PD, pendulum.chart, z0, d).evaluate(dz) - exact) for d in (2, 4, 6)]
    assert errs[2] < 1e-10
    assert errs[0] > errs[1] > errs[2]


def test_effective_potential_without_momentum_is_potential():
    q = (4.0, 5.0, 1.0)
    assert effective_potential(TB, q, [0, 0, 0], 2).allclose(TB.potential(
        [TruncatedSeries.variable(3, 2, k, q[k]) for k in range(3)]), 1e-14)


def test_chart_and_shape_singularities():
    with pytest.raises(ChartSingularityError):
        reduced_hamiltonian(TB, ReducedChart.for_system(TB, 2.0), [4, 5, 1, 0.1, 0, 0, 0, 2.0], 2)
    with pytest.raises(SingularShapeError):
        point_geometry(PD, (0.0, 0.0, 0.0))
