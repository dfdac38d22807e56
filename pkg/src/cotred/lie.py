"""Non-canonical brackets: anholonomic frames and the so(3) Lie-Poisson structure."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import series as ts
from .series import TruncatedSeries


class ChartSingularityError(ValueError):
    """Raised when a point lies on the singular set of a coordinate chart."""


class SingularFrameError(ValueError):
    pass


LEVI_CIVITA = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_a, _b, _c] = 1.0
    LEVI_CIVITA[_b, _a, _c] = -1.0


def hat(w) -> np.ndarray:
    """Skew matrix with ``hat(w) @ x == cross(w, x)``."""
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def vee(m) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def cross(a, b):
    """Cross product that also works on sequences of series."""
    return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]


@dataclass(frozen=True)
class LieAlgebraSO3:
    """so(3) identified with R^3; the bracket is the cross product."""

    @property
    def structure_constants(self) -> np.ndarray:
        # gamma[a, b, c] with [e_a, e_b] = gamma_ab^c e_c
        return LEVI_CIVITA

    def bracket(self, xi, eta) -> np.ndarray:
        return np.cross(xi, eta)

    def generators(self) -> list[np.ndarray]:
        """Matrices E_a with E_a x = e_a x x."""
        return [hat(e) for e in np.eye(3)]


@dataclass(frozen=True)
class AnholonomicFrame:
    """Frame ``X_i = sum_j a_i^j d/ds_j`` on an ``n``-dimensional base.

    ``coefficients(s)`` returns the n x n matrix ``a[i, j] = a_i^j`` and
    ``structure(s)`` the array ``c[i, j, k] = c_ij^k`` of the frame brackets
    ``[X_i, X_j] = c_ij^k X_k``.
    """

    dimension: int
    coefficients: Callable[[np.ndarray], np.ndarray]
    structure: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def identity(cls, n: int) -> "AnholonomicFrame":
        return cls(n, lambda s: np.eye(n), lambda s: np.zeros((n, n, n)))

    @classmethod
    def constant(cls, a) -> "AnholonomicFrame":
        a = np.array(a, dtype=float)
        n = a.shape[0]
        return cls(n, lambda s: a, lambda s: np.zeros((n, n, n)))

    @classmethod
    def group(cls, structure_constants) -> "AnholonomicFrame":
        """Left-invariant frame at the identity: a = Id, c = structure constants."""
        c = np.asarray(structure_constants, dtype=float)
        n = c.shape[0]
        return cls(n, lambda s: np.eye(n), lambda s: c)


def _gradient(fn, point):
    if isinstance(fn, TruncatedSeries):
        return np.array([fn.derivative(k).evaluate(point) for k in range(fn.num_vars)], dtype=float)
    return np.asarray(fn(point), dtype=float)


def anholonomic_bracket(f, g, frame: AnholonomicFrame, at: Sequence[float]) -> float:
    """Bracket of f and g at the point ``at = (s, pi)`` in frame coordinates.

    ``f`` and ``g`` are either TruncatedSeries in the 2n variables (s, pi)
    or callables returning the gradient at a point.  With ``pi_i = a_i^j p_j``
    this reproduces the canonical bracket in (s, p).
    """
    n = frame.dimension
    at = np.asarray(at, dtype=float)
    if at.shape != (2 * n,):
        raise ts.DimensionError(f"point must have length {2 * n}")
    s, pi = at[:n], at[n:]
    a = np.asarray(frame.coefficients(s), dtype=float)
    if abs(np.linalg.det(a)) < 1e-13:
        raise SingularFrameError(f"frame matrix is singular at s = {s}")
    c = np.asarray(frame.structure(s), dtype=float)
    df, dg = _gradient(f, at), _gradient(g, at)
    fs, fpi = df[:n], df[n:]
    gs, gpi = dg[:n], dg[n:]
    # sum_ij a_j^i (f_si g_pij - f_pij g_si)
    holonomic = fs @ a.T @ gpi - gs @ a.T @ fpi
    curvature = np.einsum("ijk,k,i,j->", c, pi, fpi, gpi)
    return float(holonomic - curvature)


def so3_coadjoint_rate(xi, J) -> np.ndarray:
    """Body-frame Lie-Poisson rate ``dJ/dt = J x xi`` for ``xi = dh/dJ``.

    This is the rate generated by the (-) bracket ``{J_a, J_b} = -eps_abc J_c``
    realised by the Deprit chart; it conserves ``|J|`` identically.
    """
    return np.cross(np.asarray(J, dtype=float), np.asarray(xi, dtype=float))


def lie_poisson_bracket_so3(grad_f, grad_g, J) -> float:
    """(-) Lie-Poisson bracket ``-<J, grad_f x grad_g>``."""
    return float(-np.dot(J, np.cross(grad_f, grad_g)))


def deprit_chart(u, v, r):
    """Body angular momentum ``(v, sqrt(r^2-v^2) sin u, sqrt(r^2-v^2) cos u)``.

    Works on floats and on TruncatedSeries; the chart is singular at ``|v| = r``.
    """
    v0 = v.constant_term if isinstance(v, TruncatedSeries) else v
    r0 = r.constant_term if isinstance(r, TruncatedSeries) else r
    if not abs(v0) < abs(r0):
        raise ChartSingularityError(f"Deprit chart singular: |v| = {abs(v0):g} >= r = {abs(r0):g}")
    rho = ts.sqrt(r * r - v * v)
    return [v, rho * ts.sin(u), rho * ts.cos(u)]


def deprit_inverse(J) -> tuple[float, float, float]:
    """(u, v, r) of a body momentum vector away from the chart poles."""
    J = np.asarray(J, dtype=float)
    r = float(np.linalg.norm(J))
    if not abs(J[0]) < r:
        raise ChartSingularityError("momentum on the chart pole")
    return float(np.arctan2(J[1], J[2])), float(J[0]), r
