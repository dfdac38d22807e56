import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotred.mechanics import InadmissibleShapeError, point_geometry
from cotred.models import (PendulumParams, ThreeBodyParams, jacobi_distances, lagrange_triangle_shape, load_config,
                           morse, pendulum_system, system_from_config, three_body_system)
from cotred.series import TruncatedSeries

TB = three_body_system()
PD = pendulum_system()


def test_morse_minimum():
    assert morse(6.0, 6.0) == pytest.approx(-1.0)
    assert morse(6.0 + 1e-4, 6.0) > -1.0 and morse(6.0 - 1e-4, 6.0) > -1.0


@pytest.mark.parametrize("b", [3.0, 6.0, 6.5, 9.0])
def test_lagrange_shape_is_equilateral(b):
    shape = lagrange_triangle_shape(TB.params, b).shape
    assert np.allclose(jacobi_distances(TB.params, shape), [b, b, b])
    assert shape[2] == math.pi / 2
    assert shape[0] == pytest.approx(b / math.sqrt(2)) and shape[1] == pytest.approx(b / math.sqrt(2))


def test_potential_at_side_six_and_six_and_a_half():
    assert TB.potential(lagrange_triangle_shape(TB.params, 6.0).shape) == pytest.approx(-3.0)
    assert TB.potential(lagrange_triangle_shape(TB.params, 6.5).shape) == pytest.approx(3 * morse(6.5, 6.0))


def test_lagrange_momenta():
    ls = lagrange_triangle_shape(TB.params, 6.5)
    assert ls.momenta(2.0) == pytest.approx((0, 0, 1.0))
    z = ls.chart_point(2.0)
    assert len(z) == 8 and z[6] == pytest.approx(1.0) and z[3] == 0 and z[7] == 0


def test_unequal_mass_lagrange_shape():
    params = ThreeBodyParams(1.0, 2.0, 3.0)
    shape = lagrange_triangle_shape(params, 5.0).shape
    assert np.allclose(jacobi_distances(params, shape), [5.0, 5.0, 5.0])


@settings(max_examples=30, deadline=None)
@given(st.floats(1, 8), st.floats(1, 8), st.floats(0.1, math.pi - 0.1))
def test_three_body_mirror_symmetry(r1, r2, phi):
    # swapping the two outer bodies maps phi to pi - phi for equal masses
    assert TB.potential((r1, r2, phi)) == pytest.approx(TB.potential((r1, r2, math.pi - phi)), rel=1e-12,
                                                        abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(1, 8), st.floats(1, 8), st.floats(0.1, math.pi - 0.1))
def test_jacobi_distances_match_positions(r1, r2, phi):
    # first Jacobi vector points from body 3 to body 1, the second from their midpoint to body 2
    s1 = math.sqrt(2) * r1 * np.array([1, 0])
    s2 = math.sqrt(1.5) * r2 * np.array([math.cos(phi), math.sin(phi)])
    x1, x3 = s1 / 2, -s1 / 2
    x2 = s2
    expected = [np.linalg.norm(x3 - x1), np.linalg.norm(x2 - x3), np.linalg.norm(x2 - x1)]
    assert np.allclose(jacobi_distances(TB.params, (r1, r2, phi)), expected)


def test_pendulum_rest_potential():
    assert PD.potential((0.0, 0.0, 0.0)) == pytest.approx(-3.0)
    assert pendulum_system(PendulumParams(2.0, 1.0, 1.0, 1.0, 9.81)).potential((0, 0, 0)) == pytest.approx(-4 * 9.81)


def test_pendulum_potential_independent_of_phi():
    q = [TruncatedSeries.variable(3, 4, k, x) for k, x in enumerate((0.3, 0.4, 0.9))]
    V = PD.potential(q)
    assert all(e[2] == 0 for e, _ in V.items())


def test_pendulum_light_outer_bob_decouples():
    heavy = point_geometry(pendulum_system(PendulumParams(1.0, 1e-10)), (0.3, 0.4, 0.5))
    assert abs(heavy.shape_metric[0, 1]) < 1e-9 and abs(heavy.shape_metric[0, 2]) < 1e-9
    assert heavy.inertia[0, 0] == pytest.approx(0.09, rel=1e-8)


def test_admissibility():
    with pytest.raises(InadmissibleShapeError):
        TB.check_shape((1.0, 1.0, 0.0))
    with pytest.raises(InadmissibleShapeError):
        TB.check_shape((-1.0, 1.0, 1.0))
    with pytest.raises(InadmissibleShapeError):
        PD.check_shape((1.0, 0.2, 0.0))
    PD.check_shape((0.0, 0.5, 0.0))


def test_invalid_parameters():
    with pytest.raises(ValueError):
        ThreeBodyParams(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        PendulumParams(l1=-1.0)
    with pytest.raises(ValueError):
        lagrange_triangle_shape(TB.params, 0.0)


def test_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"system": "pendulum", "masses": [1, 2], "lengths": [1, 1.5], "gravity": 2}))
    sys_ = system_from_config(load_config(path))
    assert sys_.name == "pendulum" and sys_.masses == (1.0, 2.0) and sys_.params.l2 == 1.5
    assert system_from_config({"system": "three-body", "d0": 5.0}).params.d0 == 5.0
    for bad in [{"system": "four-body"}, {"system": "three-body", "masses": [1, 1]},
                {"system": "pendulum", "lengths": [1]}]:
        with pytest.raises(ValueError):
            system_from_config(bad)
