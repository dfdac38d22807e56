"""Reduced equations of motion, fixed-step integration and SO(3) reconstruction.

Two evaluations of the reduced vector field ``J grad h`` are provided: a
reference one through series jets of the reduced Hamiltonian, and a fast one
that rebuilds the same Hamiltonian in JAX and differentiates it
automatically.  The tests check that they agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .lie import ChartSingularityError, hat
from .mechanics import GROUP_AXES, MechanicalSystem, ReducedChart, reduced_hamiltonian

jax.config.update("jax_enable_x64", True)


def reduced_vector_field(system: MechanicalSystem, chart: ReducedChart, z) -> np.ndarray:
    """Hamilton's equations of the reduced Hamiltonian from its local jet (reference path)."""
    z = np.asarray(z, dtype=float)
    system.check_shape(z[:chart.shape_dim])
    g = reduced_hamiltonian(system, chart, z, 1).gradient()
    f = chart.dof
    return np.concatenate([g[f:], -g[:f]])


# JAX fast path -------------------------------------------------------------

def _embedding_array(system: MechanicalSystem, q):
    X = system.embedding([q[a] for a in range(system.shape_dim)])
    return jnp.stack([jnp.stack([jnp.asarray(c, dtype=jnp.float64) + 0.0 * q[0] for c in x]) for x in X])


def _geometry(system: MechanicalSystem, q):
    """Locked inertia, coupling L (dim g x shape) and shape block of the metric."""
    X = _embedding_array(system, q)
    dX = jax.jacfwd(lambda s: _embedding_array(system, s))(q)  # particle, xyz, shape
    m = jnp.asarray(system.masses)
    axes = GROUP_AXES[system.group]
    hq = jnp.einsum("i,ika,ikb->ab", m, dX, dX)
    if not axes:
        return None, None, hq
    E = jnp.asarray(np.eye(3)[list(axes)])
    Y = jnp.cross(E[:, None, :], X[None, :, :])  # axis, particle, xyz
    inertia = jnp.einsum("i,aik,bik->ab", m, Y, Y)
    coupling = jnp.einsum("i,aik,ikb->ab", m, Y, dX)
    return inertia, coupling, hq


def body_hamiltonian(system: MechanicalSystem, q, p, J):
    """``1/2 J^T I^-1 J + 1/2 w^T d^-1 w + V`` with ``w = p - A^T J`` (JAX-traceable)."""
    inertia, coupling, hq = _geometry(system, q)
    V = system.potential([q[a] for a in range(system.shape_dim)])
    if inertia is None:
        return 0.5 * p @ jnp.linalg.solve(hq, p) + V
    IJ = jnp.linalg.solve(inertia, J)
    IL = jnp.linalg.solve(inertia, coupling)
    d = hq - coupling.T @ IL
    w = p - IL.T @ J
    return 0.5 * J @ IJ + 0.5 * w @ jnp.linalg.solve(d, w) + V


def _chart_momentum(chart: ReducedChart, z):
    if chart.group == "SO3":
        f, fs = chart.dof, chart.shape_dim
        u, v = z[fs], z[f + fs]
        rho = jnp.sqrt(chart.r ** 2 - v * v)
        return jnp.stack([v, rho * jnp.sin(u), rho * jnp.cos(u)])
    if chart.group == "S1":
        return jnp.array([chart.r])
    return jnp.zeros(0)


def _split(chart: ReducedChart, z):
    f, fs = chart.dof, chart.shape_dim
    return z[:fs], z[f:f + fs], _chart_momentum(chart, z)


class FastDynamics:
    """Jitted Hamiltonian, vector field, body velocity and RK4 steppers for one chart."""

    def __init__(self, system: MechanicalSystem, chart: ReducedChart):
        self.system, self.chart = system, chart
        f = chart.dof

        def h(z):
            q, p, J = _split(chart, z)
            return body_hamiltonian(system, q, p, J)

        def field_(z):
            g = jax.grad(h)(z)
            return jnp.concatenate([g[f:], -g[:f]])

        def xi(z):
            # dh/dJ is the body angular velocity I^-1 J - A qdot
            q, p, J = _split(chart, z)
            return jax.grad(lambda JJ: body_hamiltonian(system, q, p, JJ))(J)

        self.hamiltonian = jax.jit(h)
        self.energy = jax.jit(jax.vmap(h))
        self.field = jax.jit(field_)
        self.xi = jax.jit(xi)
        self._h, self._field, self._xi = h, field_, xi
        axes = list(GROUP_AXES[system.group])
        self._axes = axes

        def rk4(z, dt):
            k1 = field_(z)
            k2 = field_(z + 0.5 * dt * k1)
            k3 = field_(z + 0.5 * dt * k2)
            k4 = field_(z + dt * k3)
            return z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

        def omega3(z):
            return jnp.zeros(3).at[jnp.array(axes)].set(xi(z)) if axes else jnp.zeros(3)

        def coupled(state):
            z, g = state
            w = omega3(z)
            W = jnp.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
            return field_(z), g @ W

        def rk4_coupled(state, dt):
            add = lambda s, k, c: (s[0] + c * k[0], s[1] + c * k[1])
            k1 = coupled(state)
            k2 = coupled(add(state, k1, 0.5 * dt))
            k3 = coupled(add(state, k2, 0.5 * dt))
            k4 = coupled(add(state, k3, dt))
            z = state[0] + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            g = state[1] + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            # nearest rotation (polar factor)
            U, _, Vt = jnp.linalg.svd(g)
            return z, U @ Vt

        self._rk4, self._rk4_coupled = rk4, rk4_coupled

    @partial(jax.jit, static_argnums=(0, 3, 4))
    def _run(self, z0, dt, steps, stride):
        def inner(z, _):
            return self._rk4(z, dt), None

        def outer(z, _):
            z, _ = jax.lax.scan(inner, z, None, length=stride)
            return z, z

        _, zs = jax.lax.scan(outer, z0, None, length=steps // stride)
        return zs

    @partial(jax.jit, static_argnums=(0, 4, 5))
    def _run_coupled(self, z0, g0, dt, steps, stride):
        def inner(s, _):
            return self._rk4_coupled(s, dt), None

        def outer(s, _):
            s, _ = jax.lax.scan(inner, s, None, length=stride)
            return s, s

        _, (zs, gs) = jax.lax.scan(outer, (z0, g0), None, length=steps // stride)
        return zs, gs


_FAST_CACHE: dict = {}


def fast_dynamics(system: MechanicalSystem, chart: ReducedChart) -> FastDynamics:
    key = (id(system), chart)
    if key not in _FAST_CACHE:
        _FAST_CACHE[key] = (system, FastDynamics(system, chart))
    return _FAST_CACHE[key][1]


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    energy: np.ndarray
    chart: ReducedChart = field(repr=False)
    singular: bool = False
    rotations: np.ndarray | None = field(default=None, repr=False)

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def momenta(self) -> np.ndarray:
        """Body momentum J along the trajectory."""
        return np.array(jax.vmap(lambda z: _chart_momentum(self.chart, z))(jnp.asarray(self.z)))

    def spatial_momentum(self) -> np.ndarray:
        if self.rotations is None:
            raise ValueError("trajectory has no rotations; integrate with reconstruction")
        J = self.momenta()
        axes = list(GROUP_AXES["SO3" if self.chart.group == "SO3" else self.chart.group])
        J3 = np.zeros((len(J), 3))
        J3[:, axes] = J
        return np.einsum("nij,nj->ni", self.rotations, J3)

    def columns(self) -> list[str]:
        c = self.chart
        names = ["t", *c.shape_names, *(f"p_{n}" for n in c.shape_names)]
        if c.orbit_dim:
            names += ["u", "v"]
        names.append("energy")
        if self.rotations is not None:
            names += [f"g{i}{j}" for i in range(3) for j in range(3)]
        return names

    def table(self) -> np.ndarray:
        c = self.chart
        f, fs = c.dof, c.shape_dim
        cols = [self.t, *self.z[:, :fs].T, *self.z[:, f:f + fs].T]
        if c.orbit_dim:
            cols += [self.z[:, fs], self.z[:, f + fs]]
        cols.append(self.energy)
        if self.rotations is not None:
            cols += list(self.rotations.reshape(len(self.t), 9).T)
        return np.column_stack(cols)

    def to_csv(self) -> str:
        lines = [",".join(self.columns())]
        for row in self.table():
            lines.append(",".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"


def _singular_rows(chart: ReducedChart, zs: np.ndarray) -> np.ndarray:
    bad = ~np.all(np.isfinite(zs), axis=1)
    if chart.orbit_dim:
        bad |= np.abs(zs[:, chart.dof + chart.shape_dim]) >= chart.r
    return bad


def integrate_reduced(system: MechanicalSystem, chart: ReducedChart, z0: Sequence[float], dt: float, T: float,
                      stride: int = 1, reconstruct_from=None, method: str = "jax") -> Trajectory:
    """Fixed-step RK4 from ``z0`` over ``[0, T]``, keeping every ``stride``-th state.

    With ``reconstruct_from`` (a rotation matrix, or True for the identity)
    the attitude ``g`` is integrated alongside with ``g' = g hat(xi)``.  A
    state reaching a chart pole or leaving the admissible shapes truncates
    the trajectory and sets ``singular``.
    """
    if dt <= 0 or T < 0:
        raise ValueError("dt must be positive and T non-negative")
    if stride < 1:
        raise ValueError("stride must be positive")
    z0 = np.asarray(z0, dtype=float)
    system.check_shape(z0[:chart.shape_dim])
    if chart.orbit_dim and abs(z0[chart.dof + chart.shape_dim]) >= chart.r:
        raise ChartSingularityError("initial state on the Deprit chart pole")
    steps = int(round(T / dt))
    steps -= steps % stride
    rotations = None
    if method == "series":
        if reconstruct_from is not None:
            raise ValueError("reconstruction runs on the JAX path")
        zs = _run_series(system, chart, z0, dt, steps, stride)
    elif method == "jax":
        fd = fast_dynamics(system, chart)
        if reconstruct_from is not None:
            g0 = np.eye(3) if reconstruct_from is True else np.asarray(reconstruct_from, dtype=float)
            check_rotation(g0)
            zs, gs = fd._run_coupled(jnp.asarray(z0), jnp.asarray(g0), dt, steps, stride)
            zs, rotations = np.asarray(zs), np.asarray(gs)
            rotations = np.concatenate([g0[None], rotations])
        else:
            zs = np.asarray(fd._run(jnp.asarray(z0), dt, steps, stride))
    else:
        raise ValueError(f"unknown method {method!r}")
    zs = np.concatenate([z0[None], zs])
    t = dt * stride * np.arange(len(zs))
    bad = _singular_rows(chart, zs)
    bad |= ~np.array([_admissible(system, z[:chart.shape_dim]) for z in zs], dtype=bool)
    singular = bool(bad.any())
    if singular:
        stop = int(np.argmax(bad))
        zs, t = zs[:stop], t[:stop]
        if rotations is not None:
            rotations = rotations[:stop]
    fd = fast_dynamics(system, chart)
    energy = np.asarray(fd.energy(jnp.asarray(zs))) if len(zs) else np.zeros(0)
    return Trajectory(t, zs, energy, chart, singular, rotations)


def _admissible(system, q) -> bool:
    try:
        system.check_shape(q)
        return True
    except ValueError:
        return False


def _run_series(system, chart, z0, dt, steps, stride) -> np.ndarray:
    F = lambda z: reduced_vector_field(system, chart, z)
    out, z = [], z0.copy()
    for n in range(steps):
        try:
            k1 = F(z)
            k2 = F(z + 0.5 * dt * k1)
            k3 = F(z + 0.5 * dt * k2)
            k4 = F(z + dt * k3)
        except ValueError:
            out.append(np.full_like(z, np.nan))
            break
        z = z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (n + 1) % stride == 0:
            out.append(z)
    return np.array(out).reshape(-1, len(z0))


def check_rotation(g, tol: float = 1e-10):
    g = np.asarray(g, dtype=float)
    if g.shape != (3, 3) or np.max(np.abs(g.T @ g - np.eye(3))) > tol or np.linalg.det(g) < 0:
        raise ValueError("initial attitude is not a rotation matrix")


def project_rotation(g) -> np.ndarray:
    """Nearest rotation matrix (polar factor)."""
    U, _, Vt = np.linalg.svd(np.asarray(g, dtype=float))
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, -1] *= -1
        R = U @ Vt
    return R


def reconstruct(times: Sequence[float], xi: Sequence[Sequence[float]], g0=None) -> np.ndarray:
    """Attitudes from sampled body angular velocities by ``g' = g hat(xi)``.

    ``xi`` is sampled at ``times`` and linearly interpolated inside each RK4
    step; each step is followed by projection onto SO(3).
    """
    times = np.asarray(times, dtype=float)
    xi = np.asarray(xi, dtype=float)
    g = np.eye(3) if g0 is None else np.asarray(g0, dtype=float)
    check_rotation(g)
    out = [g]
    for n in range(len(times) - 1):
        h = times[n + 1] - times[n]
        a, b = xi[n], xi[n + 1]
        mid = 0.5 * (a + b)
        k1 = g @ hat(a)
        k2 = (g + 0.5 * h * k1) @ hat(mid)
        k3 = (g + 0.5 * h * k2) @ hat(mid)
        k4 = (g + h * k3) @ hat(b)
        g = project_rotation(g + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        out.append(g)
    return np.array(out)


def reconstruct_trajectory(system: MechanicalSystem, trajectory: Trajectory, g0=None) -> np.ndarray:
    """Attitudes along a stored reduced trajectory, from its body angular velocities."""
    if trajectory.chart.group != "SO3":
        raise ValueError("reconstruction is defined for SO(3) systems")
    fd = fast_dynamics(system, trajectory.chart)
    xi = np.asarray(jax.vmap(fd.xi)(jnp.asarray(trajectory.z)))
    return reconstruct(trajectory.t, xi, g0)


def body_velocity(system: MechanicalSystem, chart: ReducedChart, z) -> np.ndarray:
    """``xi = I^-1 J - A qdot`` at a chart point (equal to dh/dJ)."""
    return np.asarray(fast_dynamics(system, chart).xi(jnp.asarray(z, dtype=float)))


def dominant_frequency(t: np.ndarray, y: np.ndarray, x: np.ndarray) -> float:
    """Mean angular rate of the planar signal ``(x, y)`` from its unwrapped phase."""
    phase = np.unwrap(np.arctan2(-np.asarray(y), np.asarray(x)))
    return float(np.polyfit(t, phase, 1)[0])
