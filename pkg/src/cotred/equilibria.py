"""Relative equilibria as critical points of the effective potential, and parameter sweeps."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mechanics import (MechanicalSystem, ReducedChart, effective_potential, point_geometry,
                        reduced_hamiltonian)
from .models import lagrange_triangle_shape
from .normalform import symplectic_form


class EquilibriumError(ValueError):
    pass


class NoEquilibriumError(EquilibriumError):
    """No relative equilibrium exists for the requested parameter."""


class ConvergenceError(EquilibriumError):
    pass


@dataclass
class RelativeEquilibrium:
    point: np.ndarray
    r: float
    energy: float
    frequencies: np.ndarray
    elliptic: bool
    residual: float
    param: float = math.nan
    names: tuple = field(default=(), repr=False)

    @property
    def dof(self) -> int:
        return len(self.point) // 2

    def as_dict(self) -> dict:
        return {
            "param": self.param,
            "r": self.r,
            "energy": self.energy,
            "point": dict(zip(self.names, map(float, self.point))) if self.names else list(map(float, self.point)),
            "frequencies": [float(w) for w in self.frequencies],
            "elliptic": self.elliptic,
            "residual": self.residual,
        }


def linear_frequencies(system: MechanicalSystem, chart: ReducedChart, z, tol: float = 1e-9):
    """Sorted positive frequencies of the linearised flow and an elliptic flag.

    At zero momentum the orbit collapses to a point and only the shape
    block ``1/2 p^T d^-1 p + V`` remains.
    """
    if chart.orbit_dim and chart.r == 0:
        fs = chart.shape_dim
        q = np.asarray(z[:fs], dtype=float)
        hess = effective_potential(system, q, [0.0, 0.0, 0.0], 2).hessian()
        dinv = point_geometry(system, q).metric_inv
        mu = np.linalg.eigvals(dinv @ hess)
        elliptic = bool(np.all(mu.real > 0) and np.max(np.abs(mu.imag)) <= tol)
        # the collapsed momentum sphere contributes a zero frequency
        return np.sort(np.concatenate([[0.0], np.sqrt(np.abs(mu.real))])), elliptic
    H = reduced_hamiltonian(system, chart, z, 2)
    f = chart.dof
    lam = np.linalg.eigvals(symplectic_form(f) @ H.hessian())
    scale = max(1.0, float(np.max(np.abs(lam))))
    elliptic = bool(np.max(np.abs(lam.real)) <= tol * scale)
    freqs = np.sort(np.abs(lam.imag))[::2] if elliptic else np.sort(np.abs(lam))[::2]
    return freqs, elliptic


def _group_momentum(chart: ReducedChart, r: float) -> list[float]:
    return [0.0, 0.0, r] if chart.group == "SO3" else ([r] if chart.group == "S1" else [])


def _chart_point(system, chart, q, J) -> np.ndarray:
    g = point_geometry(system, q)
    p = g.connection @ np.asarray(J) if len(J) else np.zeros(system.shape_dim)
    orbit = [0.0] if chart.orbit_dim else []
    return np.array([*q, *orbit, *p, *orbit], dtype=float)


def _finish(system, chart, q, J, residual, param) -> RelativeEquilibrium:
    z = _chart_point(system, chart, q, J)
    freqs, elliptic = linear_frequencies(system, chart, z)
    # with p = A^T J the energy is the effective potential (valid also at r = 0)
    energy = float(effective_potential(system, q, J, 1).constant_term)
    return RelativeEquilibrium(z, chart.r, energy, freqs, elliptic,
                               residual, param, chart.variable_names)


def triangle_momentum(system: MechanicalSystem, b: float) -> float:
    """Momentum magnitude making the size-``b`` Lagrange triangle a relative equilibrium.

    Along the size direction ``t`` of the triangle family, stationarity of
    ``r^2 K/2 + V`` with ``K = e3^T I^-1 e3`` gives ``r^2 = -2 (dV.t)/(dK.t)``.
    """
    params = system.params
    shape = lagrange_triangle_shape(params, b).shape
    t = np.array(lagrange_triangle_shape(params, 1.0).shape[:2] + (0.0,))
    V = effective_potential(system, shape, [0.0, 0.0, 0.0], 1)
    K = effective_potential(system, shape, [0.0, 0.0, 1.0], 1) - V
    # K here is the unit-momentum kinetic term, already carrying the 1/2
    r2 = -(V.gradient() @ t) / (K.gradient() @ t)
    if not r2 >= 0:
        raise NoEquilibriumError(f"no relative equilibrium at b = {b:g} (r^2 = {r2:.6g})")
    return math.sqrt(r2)


def solve_triangle(system: MechanicalSystem, b: float, tol: float = 1e-10) -> RelativeEquilibrium:
    """Lagrange-triangle relative equilibrium of the three-body system at size ``b``."""
    shape = lagrange_triangle_shape(system.params, b).shape
    r = triangle_momentum(system, b)
    chart = ReducedChart.for_system(system, r)
    J = _group_momentum(chart, r)
    res = float(np.max(np.abs(effective_potential(system, shape, J, 1).gradient())))
    if res > tol * max(1.0, r * r):
        raise EquilibriumError(f"triangle of size {b:g} is not stationary off the size direction "
                               f"(gradient {res:.3g})")
    return _finish(system, chart, shape, J, res, b)


def newton_effective_potential(system: MechanicalSystem, J, guess, free, fixed_shape,
                               tol: float = 1e-12, max_iter: int = 100):
    """Damped Newton on the free shape coordinates for ``grad V_eff = 0``."""
    q = np.array(fixed_shape, dtype=float)
    free = list(free)
    q[free] = guess
    system.check_shape(q)

    def jet(x):
        qq = q.copy()
        qq[free] = x
        return effective_potential(system, qq, J, 2, free)

    x = np.array(guess, dtype=float)
    for _ in range(max_iter):
        s = jet(x)
        g, Hs = s.gradient(), s.hessian()
        norm = float(np.linalg.norm(g))
        try:
            step = -np.linalg.solve(Hs, g)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular Hessian of the effective potential") from exc
        lam = 1.0
        while True:
            trial = x + lam * step
            try:
                qq = q.copy()
                qq[free] = trial
                system.check_shape(qq)
                gt = float(np.linalg.norm(jet(trial).gradient()))
                if gt < norm or lam < 1e-6 or norm < 1e-13:
                    break
            except ValueError:
                pass
            lam *= 0.5
            if lam < 1e-10:
                raise ConvergenceError("line search left the admissible shape region")
        x = trial
        if lam * np.linalg.norm(step) < tol:
            q[free] = x
            return q, float(np.linalg.norm(jet(x).gradient()))
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations")


def solve_effective_potential(system: MechanicalSystem, value: float, guess: Sequence[float] | None = None,
                              tol: float = 1e-10) -> RelativeEquilibrium:
    """Relative equilibrium for a given size ``b`` (three-body) or momentum ``r`` (pendulum)."""
    if system.name == "three-body":
        return solve_triangle(system, value, tol)
    if system.name == "pendulum":
        r = float(value)
        chart = ReducedChart.for_system(system, r)
        J = _group_momentum(chart, r)
        guess = (0.4, 0.5) if guess is None else guess
        q, res = newton_effective_potential(system, J, guess, [0, 1], [0.0, 0.0, 0.0])
        if res > tol:
            raise ConvergenceError(f"effective potential gradient {res:.3g} above {tol:g}")
        return _finish(system, chart, q, J, res, r)
    raise ValueError(f"no equilibrium family defined for system {system.name!r}")


def check_equilibrium_conditions(system: MechanicalSystem, z, r: float) -> dict:
    """Momentum match ``p - A^T J``, coadjoint alignment ``J x I^-1 J`` and shape gradient."""
    chart = ReducedChart.for_system(system, r)
    z = np.asarray(z, dtype=float)
    f, fs = chart.dof, chart.shape_dim
    q, p = z[:fs], z[f:f + fs]
    J = np.array([float(x) for x in chart.momentum(list(z))])
    g = point_geometry(system, q)
    momentum = float(np.max(np.abs(p - (g.connection @ J if len(J) else 0.0))))
    coadjoint = float(np.max(np.abs(np.cross(J, g.inertia_inv @ J)))) if len(J) == 3 else 0.0
    shape = float(np.max(np.abs(effective_potential(system, q, list(J), 1).gradient())))
    return {"momentum": momentum, "coadjoint": coadjoint, "shape_gradient": shape}


def _sweep_row(args):
    system, value, guess = args
    try:
        eq = solve_effective_potential(system, value, guess)
        return eq, None
    except (EquilibriumError, ValueError) as exc:
        return None, str(exc)


@dataclass
class SweepRow:
    param: float
    r: float
    energy: float
    frequencies: np.ndarray
    converged: bool
    shape: tuple = ()


def sweep_equilibria(system: MechanicalSystem, values: Sequence[float], jobs: int = 1,
                     guess: Sequence[float] | None = None) -> list[SweepRow]:
    """One row per parameter value; failures are kept with ``converged=False``.

    Pendulum sweeps in a single process continue from the previous solution.
    """
    f = 4 if system.name == "three-body" else 3
    values = [float(v) for v in values]
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_sweep_row, [(system, v, guess) for v in values]))
    else:
        g = guess
        for v in values:
            eq, err = _sweep_row((system, v, g))
            if eq is not None and system.name == "pendulum":
                g = tuple(eq.point[:2])
            results.append((eq, err))
    rows = []
    for v, (eq, _) in zip(values, results):
        if eq is None:
            rows.append(SweepRow(v, math.nan, math.nan, np.full(f, math.nan), False))
        else:
            rows.append(SweepRow(v, eq.r, eq.energy, eq.frequencies, True,
                                 tuple(eq.point[:system.shape_dim])))
    return rows


def sweep_csv(rows: Sequence[SweepRow], digits: int | None = None) -> str:
    """CSV text; ``digits=None`` writes the shortest round-trip form of each double."""
    f = len(rows[0].frequencies) if rows else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "r", "energy"] + [f"omega_{k + 1}" for k in range(f)] + ["converged"])
    fmt = (lambda x: repr(float(x))) if digits is None else (lambda x: f"{x:.{digits}g}")
    for row in rows:
        w.writerow([fmt(row.param), fmt(row.r), fmt(row.energy)] + [fmt(x) for x in row.frequencies]
                   + [int(row.converged)])
    return buf.getvalue()
