"""Concrete systems: the Morse three-body system and the double spherical pendulum."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import series as ts
from .mechanics import InadmissibleShapeError, MechanicalSystem


@dataclass(frozen=True)
class ThreeBodyParams:
    m1: float = 1.0
    m2: float = 1.0
    m3: float = 1.0
    d0: float = 6.0

    def __post_init__(self):
        if min(self.m1, self.m2, self.m3) <= 0:
            raise ValueError("masses must be positive")

    @property
    def mu1(self) -> float:
        return self.m1 * self.m3 / (self.m1 + self.m3)

    @property
    def mu2(self) -> float:
        return self.m2 * (self.m1 + self.m3) / (self.m1 + self.m2 + self.m3)


@dataclass(frozen=True)
class PendulumParams:
    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    a: float = 1.0

    def __post_init__(self):
        if min(self.m1, self.m2, self.l1, self.l2, self.a) <= 0:
            raise ValueError("pendulum parameters must be positive")


def morse(r, d0):
    return ts.exp(-2.0 * (r - d0)) - 2.0 * ts.exp(-(r - d0))


def jacobi_distances(params: ThreeBodyParams, q):
    """Interparticle distances (r13, r23, r12) from Jacobi coordinates (r1, r2, phi)."""
    r1, r2, phi = q
    mu1, mu2 = params.mu1, params.mu2
    cphi = ts.cos(phi)
    cross_term = 2.0 * math.sqrt(mu1) / math.sqrt(mu2) * r1 * r2 * cphi
    r13 = r1 * (1.0 / math.sqrt(mu1))
    r23 = ts.sqrt(mu1 / params.m3 ** 2 * r1 * r1 + r2 * r2 / mu2 + cross_term / params.m3)
    r12 = ts.sqrt(mu1 / params.m1 ** 2 * r1 * r1 + r2 * r2 / mu2 - cross_term / params.m1)
    return r13, r23, r12


def three_body_system(params: ThreeBodyParams = ThreeBodyParams()) -> MechanicalSystem:
    """Translation-reduced three-body system in Jacobi coordinates, xxy-gauge.

    The two "particles" are the mass-weighted Jacobi vectors, so both carry
    unit mass in the kinetic metric.
    """

    def embedding(q):
        r1, r2, phi = q
        zero = 0.0 * r1
        return [[r1, zero, zero], [r2 * ts.cos(phi), r2 * ts.sin(phi), zero]]

    def potential(q):
        return sum((morse(r, params.d0) for r in jacobi_distances(params, q)), 0.0 * q[0])

    def admissible(q):
        r1, r2, phi = q
        if not (r1 > 0 and r2 > 0 and 0 < phi < math.pi):
            raise InadmissibleShapeError(f"collinear or degenerate three-body shape {tuple(q)}")

    return MechanicalSystem("three-body", (1.0, 1.0), "SO3", ("r1", "r2", "phi"),
                            embedding, potential, admissible, params, three_body_system)


def pendulum_system(params: PendulumParams = PendulumParams()) -> MechanicalSystem:
    """Double spherical pendulum, S1 symmetry about the vertical axis.

    Particle 2 sits at s1 + s2; only downward-pointing rods are represented.
    """
    l1, l2 = params.l1, params.l2

    def embedding(q):
        r1, r2, phi = q
        z1 = -ts.sqrt(l1 * l1 - r1 * r1)
        z2 = -ts.sqrt(l2 * l2 - r2 * r2)
        x1 = [r1, 0.0 * r1, z1]
        return [x1, [r1 + r2 * ts.cos(phi), r2 * ts.sin(phi), z1 + z2]]

    def potential(q):
        r1, r2, _ = q
        h1 = ts.sqrt(l1 * l1 - r1 * r1)
        h2 = ts.sqrt(l2 * l2 - r2 * r2)
        return -params.m1 * params.a * h1 - params.m2 * params.a * (h1 + h2)

    def admissible(q):
        r1, r2, _ = q
        if not (0 <= r1 < l1 and 0 <= r2 < l2):
            raise InadmissibleShapeError(f"pendulum shape outside 0 <= r_i < l_i: {tuple(q)}")

    return MechanicalSystem("pendulum", (params.m1, params.m2), "S1", ("r1", "r2", "phi"),
                            embedding, potential, admissible, params, pendulum_system)


@dataclass(frozen=True)
class LagrangeShape:
    """Equilateral-triangle shape for a given size parameter ``b``."""

    b: float
    shape: tuple[float, float, float]

    def momenta(self, r: float) -> tuple[float, float, float]:
        r1, r2, _ = self.shape
        return 0.0, 0.0, r * r2 ** 2 / (r1 ** 2 + r2 ** 2)

    def chart_point(self, r: float) -> np.ndarray:
        """(r1, r2, phi, u, p1, p2, p3, v) with the Deprit point (u, v) = (0, 0)."""
        return np.array([*self.shape, 0.0, *self.momenta(r), 0.0])


def lagrange_triangle_shape(params: ThreeBodyParams, b: float) -> LagrangeShape:
    if b <= 0:
        raise ValueError("triangle size b must be positive")
    m1, m3 = params.m1, params.m3
    s1 = math.sqrt(params.mu1) * np.array([b, 0.0, 0.0])
    s2 = math.sqrt(params.mu2) * np.array([b / 2 * (m3 - m1) / (m1 + m3), math.sqrt(3) / 2 * b, 0.0])
    r1, r2 = float(np.linalg.norm(s1)), float(np.linalg.norm(s2))
    cosphi = float(np.clip(s1 @ s2 / (r1 * r2), -1.0, 1.0))
    phi = math.acos(cosphi)
    if abs(cosphi) < 1e-15:
        phi = math.pi / 2
    return LagrangeShape(float(b), (r1, r2, phi))


def system_from_config(config: dict) -> MechanicalSystem:
    """Build a system from ``{system: "three-body"|"pendulum", masses: [...], ...}``."""
    kind = config.get("system")
    masses = config.get("masses")
    if kind == "three-body":
        m = [1.0, 1.0, 1.0] if masses is None else [float(x) for x in masses]
        if len(m) != 3:
            raise ValueError("three-body needs three masses")
        return three_body_system(ThreeBodyParams(*m, d0=float(config.get("d0", 6.0))))
    if kind == "pendulum":
        m = [1.0, 1.0] if masses is None else [float(x) for x in masses]
        lengths = config.get("lengths") or [1.0, 1.0]
        if len(m) != 2 or len(lengths) != 2:
            raise ValueError("pendulum needs two masses and two lengths")
        return pendulum_system(PendulumParams(m[0], m[1], float(lengths[0]), float(lengths[1]),
                                              float(config.get("gravity", 1.0))))
    raise ValueError(f"unknown system {kind!r}")


def load_config(path) -> dict:
    return json.loads(Path(path).read_text())
