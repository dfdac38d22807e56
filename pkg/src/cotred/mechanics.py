"""Locked inertia, mechanical connection, horizontal metric and reduced Hamiltonian.

Everything is built from the body-frame particle positions ``x_i(q)`` and the
masses, as jets around a shape point.  The group acts by rotations generated
by ``x -> e_a x x`` (all three axes for SO3, the z axis for S1).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import series as ts
from .lie import ChartSingularityError, deprit_chart
from .series import TruncatedSeries

GROUP_AXES = {"SO3": (0, 1, 2), "S1": (2,), "trivial": ()}


class InadmissibleShapeError(ValueError):
    pass


class SingularShapeError(ValueError):
    """The locked inertia (or the horizontal metric) degenerates at a shape."""

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


@dataclass(frozen=True)
class MechanicalSystem:
    """A simple mechanical system described through a body-frame embedding.

    ``embedding(q)`` returns the body-frame positions of the point masses as a
    list of 3-vectors and ``potential(q)`` the potential energy; both must work
    on floats and on TruncatedSeries (use ``cotred.series.sqrt`` etc.).
    """

    name: str
    masses: tuple[float, ...]
    group: str
    shape_names: tuple[str, ...]
    embedding: Callable[[Sequence], list]
    potential: Callable[[Sequence], object]
    admissible: Callable[[Sequence[float]], None] | None = None
    params: object = None
    builder: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.group not in GROUP_AXES:
            raise ValueError(f"unknown group {self.group!r}")
        if any(m <= 0 for m in self.masses):
            raise ValueError("masses must be positive")

    @property
    def shape_dim(self) -> int:
        return len(self.shape_names)

    @property
    def group_dim(self) -> int:
        return len(GROUP_AXES[self.group])

    def __reduce__(self):
        # closures do not pickle; rebuild from the parameters instead
        if self.builder is None:
            raise TypeError(f"system {self.name!r} has no builder and cannot be pickled")
        return self.builder, (self.params,)

    def check_shape(self, q):
        if self.admissible is not None:
            self.admissible([float(np.real(x)) for x in q])


@dataclass(frozen=True)
class ReducedChart:
    """Canonical chart on the reduced space.

    Coordinates are ``(shape..., u)`` and momenta ``(p_shape..., v)`` for SO3
    (Deprit chart on the momentum sphere of radius ``r``); for S1 and trivial
    groups only the shape pairs appear and ``r`` is a fixed parameter.
    """

    group: str
    shape_names: tuple[str, ...]
    r: float

    @classmethod
    def for_system(cls, system: MechanicalSystem, r: float) -> "ReducedChart":
        return cls(system.group, system.shape_names, float(r))

    @property
    def orbit_dim(self) -> int:
        return 1 if self.group == "SO3" else 0

    @property
    def shape_dim(self) -> int:
        return len(self.shape_names)

    @property
    def dof(self) -> int:
        return self.shape_dim + self.orbit_dim

    @property
    def coordinate_names(self) -> tuple[str, ...]:
        return self.shape_names + (("u",) if self.orbit_dim else ())

    @property
    def momentum_names(self) -> tuple[str, ...]:
        return tuple(f"p_{n}" for n in self.shape_names) + (("v",) if self.orbit_dim else ())

    @property
    def variable_names(self) -> tuple[str, ...]:
        return self.coordinate_names + self.momentum_names

    def momentum(self, z):
        """Body momentum J at a chart point (list; floats or series)."""
        if self.group == "SO3":
            f = self.dof
            return deprit_chart(z[self.shape_dim], z[f + self.shape_dim], self.r)
        if self.group == "S1":
            return [self.r]
        return []


@dataclass
class ReducedGeometry:
    """Jets of the reduced kinetic data at one shape point.

    ``inertia[a][b]``, ``connection[alpha][a]`` (component a of A_alpha),
    ``metric[alpha][beta]``; the inverses are stored alongside.
    """

    inertia: list
    connection: list
    metric: list
    potential: object
    inertia_inv: list = field(repr=False, default=None)
    metric_inv: list = field(repr=False, default=None)
    locked_momentum: list = field(repr=False, default=None)
    shape_metric: list = field(repr=False, default=None)


# small matrix algebra on nested lists of series/floats ---------------------

def matmul(A, B):
    n, m, k = len(A), len(B), len(B[0]) if B else 0
    return [[_sum(A[i][l] * B[l][j] for l in range(m)) for j in range(k)] for i in range(n)]


def transpose(A):
    return [list(row) for row in zip(*A)] if A else []


def _sum(items):
    items = list(items)
    total = items[0]
    for x in items[1:]:
        total = total + x
    return total


def _const(x):
    return float(np.real(x.constant_term)) if isinstance(x, TruncatedSeries) else float(x)


def matrix_constant(A) -> np.ndarray:
    return np.array([[_const(x) for x in row] for row in A], dtype=float)


def matrix_inverse(A, what="matrix"):
    """Inverse of a square matrix of jets via a Neumann series around its constant part."""
    n = len(A)
    if n == 0:
        return []
    A0 = matrix_constant(A)
    w, vecs = np.linalg.eigh(0.5 * (A0 + A0.T))
    scale = max(np.max(np.abs(w)), 1.0)
    if np.min(np.abs(w)) < 1e-12 * scale:
        k = int(np.argmin(np.abs(w)))
        raise SingularShapeError(f"{what} is singular (eigenvalue {w[k]:.3g})", direction=vecs[:, k])
    B0 = np.linalg.inv(A0)
    sample = next((x for row in A for x in row if isinstance(x, TruncatedSeries)), None)
    if sample is None:
        return B0.tolist()
    # A = A0 (Id + B0 N) with N = A - A0;  A^-1 = sum_k (-B0 N)^k B0
    N = [[A[i][j] - A0[i, j] for j in range(n)] for i in range(n)]
    B0l = B0.tolist()
    step = [[-x for x in row] for row in matmul(B0l, N)]
    term = [[sample._like({0: B0[i, j]}) for j in range(n)] for i in range(n)]
    result = term
    for _ in range(sample.max_degree):
        term = matmul(step, term)
        if all(not x.terms for row in term for x in row):
            break
        result = [[result[i][j] + term[i][j] for j in range(n)] for i in range(n)]
    return result


def _rotate(axis: int, x):
    """e_axis x x for a 3-vector of jets."""
    if axis == 0:
        return [0.0 * x[0], -x[2], x[1]]
    if axis == 1:
        return [x[2], 0.0 * x[1], -x[0]]
    return [-x[1], x[0], 0.0 * x[2]]


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _derivative(c, k):
    return c.derivative(k) if isinstance(c, TruncatedSeries) else 0.0


def _truncate(c, degree):
    return c.truncate(degree) if isinstance(c, TruncatedSeries) else c


def shape_jets(q0: Sequence[float], degree: int, num_vars: int, offset: int = 0):
    return [TruncatedSeries.variable(num_vars, degree, offset + a, float(q0[a])) for a in range(len(q0))]


def geometry_from_jets(system: MechanicalSystem, q0, degree: int, num_vars: int | None = None,
                       offset: int = 0) -> ReducedGeometry:
    """Reduced geometry as jets of ``degree`` in ``num_vars`` variables.

    Shape coordinate ``alpha`` is carried by variable ``offset + alpha``.
    """
    system.check_shape(q0)
    fs = system.shape_dim
    num_vars = fs if num_vars is None else num_vars
    q = shape_jets(q0, degree + 1, num_vars, offset)
    X = system.embedding(q)
    m = system.masses
    dX = [[[_derivative(c, offset + a) for c in x] for x in X] for a in range(fs)]
    X = [[_truncate(c, degree) for c in x] for x in X]
    axes = GROUP_AXES[system.group]
    Y = [[_rotate(ax, x) for x in X] for ax in axes]
    npart = len(X)

    def msum(fn):
        return _sum(m[i] * fn(i) for i in range(npart))

    inertia = [[msum(lambda i: _dot(Y[a][i], Y[b][i])) for b in range(len(axes))] for a in range(len(axes))]
    locked = [[msum(lambda i: _dot(Y[a][i], dX[al][i])) for al in range(fs)] for a in range(len(axes))]
    hq = [[msum(lambda i: _dot(dX[al][i], dX[be][i])) for be in range(fs)] for al in range(fs)]
    Iinv = matrix_inverse(inertia, "locked inertia") if axes else []
    if axes:
        A_ga = matmul(Iinv, locked)  # dim g x fs
        connection = transpose(A_ga)
        LtIL = matmul(transpose(locked), A_ga)
        metric = [[hq[i][j] - LtIL[i][j] for j in range(fs)] for i in range(fs)]
    else:
        connection = [[] for _ in range(fs)]
        metric = hq
    metric_inv = matrix_inverse(metric, "horizontal metric")
    V = system.potential([x.truncate(degree) for x in q])
    return ReducedGeometry(inertia, connection, metric, V, Iinv, metric_inv, locked, hq)


def locked_inertia(system: MechanicalSystem, q0, degree: int):
    return geometry_from_jets(system, q0, degree).inertia


def mechanical_connection(system: MechanicalSystem, q0, degree: int):
    return geometry_from_jets(system, q0, degree).connection


def horizontal_metric(system: MechanicalSystem, q0, degree: int):
    return geometry_from_jets(system, q0, degree).metric


def point_geometry(system: MechanicalSystem, q) -> ReducedGeometry:
    """Geometry evaluated at a shape point, as plain numpy arrays."""
    g = geometry_from_jets(system, q, 0)
    arr = lambda A: matrix_constant(A) if A and A[0] else np.zeros((len(A), 0))
    return ReducedGeometry(arr(g.inertia) if g.inertia else np.zeros((0, 0)), arr(g.connection),
                           arr(g.metric), _const(g.potential),
                           arr(g.inertia_inv) if g.inertia_inv else np.zeros((0, 0)),
                           arr(g.metric_inv), None, arr(g.shape_metric))


def kinetic_split(system: MechanicalSystem, q, qdot, xi):
    """Kinetic energy two ways: directly from particle velocities, and in
    the form 1/2 (xi + A qdot)^T I (xi + A qdot) + 1/2 qdot^T d qdot."""
    fs = system.shape_dim
    jets = shape_jets(q, 1, fs)
    X = system.embedding(jets)
    axes = GROUP_AXES[system.group]
    direct = 0.0
    for mi, x in zip(system.masses, X):
        x0 = np.array([_const(c) for c in x])
        vel = np.array([sum(_const(_derivative(c, a)) * qdot[a] for a in range(fs)) for c in x])
        if axes:
            omega = np.zeros(3)
            omega[list(axes)] = xi
            vel = vel + np.cross(omega, x0)
        direct += 0.5 * mi * vel @ vel
    g = point_geometry(system, q)
    w = np.asarray(xi) + (g.connection.T @ qdot if axes else 0.0)
    split = 0.5 * qdot @ g.metric @ qdot
    if axes:
        split += 0.5 * w @ g.inertia @ w
    return float(direct), float(split)


def _hamiltonian(geom: ReducedGeometry, p, J, fs: int):
    """1/2 J^T I^-1 J + 1/2 w^T d^-1 w + V with w = p - A^T J."""
    w = [p[al] - _sum([geom.connection[al][a] * J[a] for a in range(len(J))] + [0.0]) for al in range(fs)]
    h = geom.potential
    for a in range(len(J)):
        for b in range(len(J)):
            h = h + 0.5 * geom.inertia_inv[a][b] * J[a] * J[b]
    for al in range(fs):
        for be in range(fs):
            h = h + 0.5 * geom.metric_inv[al][be] * w[al] * w[be]
    return h


def reduced_hamiltonian(system: MechanicalSystem, chart: ReducedChart, z0, degree: int) -> TruncatedSeries:
    """Taylor series of the reduced Hamiltonian around the chart point ``z0``.

    Variables are the displacements from ``z0`` in the chart ordering
    ``(shape, [u], p_shape, [v])``.
    """
    z0 = [float(x) for x in z0]
    f, fs = chart.dof, chart.shape_dim
    n = 2 * f
    if len(z0) != n:
        raise ts.DimensionError(f"chart point must have {n} entries")
    geom = geometry_from_jets(system, z0[:fs], degree, n, 0)
    z = [TruncatedSeries.variable(n, degree, k, z0[k]) for k in range(n)]
    J = chart.momentum(z)
    J = [x if isinstance(x, TruncatedSeries) else TruncatedSeries.constant(n, degree, x) for x in J]
    h = _hamiltonian(geom, z[f:f + fs], J, fs)
    if not isinstance(h, TruncatedSeries):
        h = TruncatedSeries.constant(n, degree, h)
    return h


def hamiltonian_value(system: MechanicalSystem, chart: ReducedChart, z) -> float:
    """Reduced Hamiltonian at a chart point."""
    f, fs = chart.dof, chart.shape_dim
    geom = point_geometry(system, z[:fs])
    J = [float(x) for x in chart.momentum(list(z))]
    w = np.asarray(z[f:f + fs], dtype=float) - (geom.connection @ np.asarray(J) if J else 0.0)
    h = geom.potential + 0.5 * w @ geom.metric_inv @ w
    if J:
        h += 0.5 * np.asarray(J) @ geom.inertia_inv @ np.asarray(J)
    return float(h)


def hamiltonian_jet_function(system: MechanicalSystem, chart: ReducedChart):
    """Jet-evaluable reduced Hamiltonian.

    Called with a list of plain numbers it returns the value; called with the
    identity jets ``z0_k + x_k`` (as produced by a Taylor shift) it returns the
    Taylor series around ``z0``.
    """

    def h(z):
        if z and isinstance(z[0], TruncatedSeries):
            return reduced_hamiltonian(system, chart, [x.constant_term for x in z], z[0].max_degree)
        return hamiltonian_value(system, chart, z)

    return h


def effective_potential(system: MechanicalSystem, q0, J, degree: int, free=None) -> TruncatedSeries:
    """Jet of ``1/2 J^T I^-1 J + V`` in the shape variables (or a subset ``free``)."""
    fs = system.shape_dim
    free = list(range(fs)) if free is None else list(free)
    nv = len(free)
    # fixed shape coordinates become constants
    q = []
    for a in range(fs):
        if a in free:
            q.append(TruncatedSeries.variable(nv, degree + 1, free.index(a), float(q0[a])))
        else:
            q.append(TruncatedSeries.constant(nv, degree + 1, float(q0[a])))
    system.check_shape(q0)
    X = system.embedding(q)
    X = [[_truncate(c, degree) for c in x] for x in X]
    axes = GROUP_AXES[system.group]
    V = system.potential([x.truncate(degree) for x in q])
    if not axes or not any(J):
        return V
    Y = [[_rotate(ax, x) for x in X] for ax in axes]
    inertia = [[_sum(system.masses[i] * _dot(Y[a][i], Y[b][i]) for i in range(len(X)))
                for b in range(len(axes))] for a in range(len(axes))]
    Iinv = matrix_inverse(inertia, "locked inertia")
    for a in range(len(axes)):
        for b in range(len(axes)):
            if J[a] and J[b]:
                V = V + 0.5 * J[a] * J[b] * Iinv[a][b]
    return V


def momentum_from_velocity(system: MechanicalSystem, q, qdot, xi):
    """Shape momenta ``p = d qdot + A^T J`` and body momentum ``J = I (xi + A qdot)``."""
    g = point_geometry(system, q)
    qdot = np.asarray(qdot, dtype=float)
    if system.group_dim:
        J = g.inertia @ (np.asarray(xi, dtype=float) + g.connection.T @ qdot)
        return g.metric @ qdot + g.connection @ J, J
    return g.metric @ qdot, np.zeros(0)


__all__ = [
    "ChartSingularityError", "InadmissibleShapeError", "SingularShapeError", "MechanicalSystem",
    "ReducedChart", "ReducedGeometry", "locked_inertia", "mechanical_connection", "horizontal_metric",
    "reduced_hamiltonian", "hamiltonian_value", "hamiltonian_jet_function", "effective_potential",
    "geometry_from_jets", "point_geometry", "kinetic_split", "matrix_inverse", "momentum_from_velocity",
]
