"""Poincare-Birkhoff normal form around an elliptic equilibrium.

Pipeline: Taylor shift to the equilibrium, symplectic linear map ``M`` that
brings the quadratic part to ``sum_k w_k (q_k^2 + p_k^2)/2``, then Lie
transforms ``H -> exp(ad_W) H`` order by order, each ``W_n`` solving the
homological equation.  The nonlinear steps run in the complex variables
``z = (q + ip)/sqrt2`` where ``D = {H2, .}`` is diagonal:

    D (z^a zbar^b) = -i <w, b - a> z^a zbar^b
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .series import (ComplexSeries, TruncatedSeries, from_complex, key_degree, linear_substitute,
                     pack, poisson_bracket, shift, to_complex, unpack)

DEFAULT_TOL_RES = 1e-10
LINEAR_TOL = 1e-9


class NotAnEquilibriumError(ValueError):
    pass


class NotEllipticError(ValueError):
    pass


class ResonanceError(ValueError):
    def __init__(self, vector, value):
        self.vector = tuple(int(x) for x in vector)
        self.value = value
        super().__init__(f"small denominator <m, omega> = {value:.3g} for m = {self.vector}")


def symplectic_form(f: int) -> np.ndarray:
    return np.block([[np.zeros((f, f)), np.eye(f)], [-np.eye(f), np.zeros((f, f))]])


@dataclass
class LinearNormalization:
    """``x = M y`` with ``M^T J M = J`` and ``H2(M y) = sum w_k (q_k^2+p_k^2)/2``."""

    M: np.ndarray
    frequencies: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def dof(self) -> int:
        return len(self.frequencies)

    def symplecticity_error(self) -> float:
        Jf = symplectic_form(self.dof)
        return float(np.max(np.abs(self.M.T @ Jf @ self.M - Jf)))


def taylor_shift(h, z0: Sequence[float], n0: int, require_critical: bool = True,
                 lin_tol: float = LINEAR_TOL) -> TruncatedSeries:
    """``h(z + z0)`` as a degree-``n0`` series in the displacement ``z``.

    ``h`` is a TruncatedSeries (shifted by exact substitution) or a
    jet-evaluable callable, which receives the identity jets ``z0_k + z_k``.
    """
    z0 = [float(x) for x in z0]
    if isinstance(h, TruncatedSeries):
        out = shift(h.with_max_degree(max(h.max_degree, n0)), z0).truncate(n0)
    else:
        jets = [TruncatedSeries.variable(len(z0), n0, k, z0[k]) for k in range(len(z0))]
        out = h(jets)
    if require_critical:
        worst = float(np.max(np.abs(out.gradient()))) if out.num_vars else 0.0
        if worst > lin_tol:
            raise NotAnEquilibriumError(f"gradient {worst:.3g} at the expansion point exceeds {lin_tol:g}")
    return out


def _chop(M: np.ndarray, rel: float = 1e-13) -> np.ndarray:
    M = M.copy()
    M[np.abs(M) < rel * np.max(np.abs(M))] = 0.0
    return M


def linearize_and_normalize(h2, tol: float = 1e-9, phase: str = "largest") -> LinearNormalization:
    """Symplectic normalisation of a quadratic Hamiltonian.

    ``h2`` is a series (its quadratic part is used) or a Hessian matrix.
    ``phase`` fixes the per-mode rotation of each eigenvector: ``"largest"``
    makes its largest-magnitude component real and positive; ``"raw"`` keeps
    whatever LAPACK returns (used to check phase independence).
    """
    D2 = h2.hessian().real if isinstance(h2, TruncatedSeries) else np.asarray(h2, dtype=float)
    n = D2.shape[0]
    if n % 2:
        raise ValueError("phase space dimension must be even")
    f = n // 2
    Jf = symplectic_form(f)
    lam, vecs = np.linalg.eig(Jf @ D2)
    scale = max(np.max(np.abs(lam)), 1.0)
    if np.max(np.abs(lam.real)) > tol * scale:
        raise NotEllipticError(f"eigenvalues with real part up to {np.max(np.abs(lam.real)):.3g}")
    upper = sorted((i for i in range(n) if lam[i].imag > 0), key=lambda i: lam[i].imag)
    if len(upper) != f:
        raise NotEllipticError("zero or unpaired eigenvalues in the linearisation")
    omegas = np.array([lam[i].imag for i in upper])
    if f > 1 and np.min(np.diff(omegas)) < tol * scale:
        raise NotEllipticError(f"repeated frequencies {omegas}")
    re_cols, im_cols, chosen = [], [], []
    for i in upper:
        v = vecs[:, i].astype(complex)
        if phase == "largest":
            k = int(np.argmax(np.abs(v)))
            v = v * abs(v[k]) / v[k]
        s = v.real @ Jf @ v.imag
        if s < 0:
            # negative Krein sign: conjugate keeps c_k real (the mode then has frequency -w)
            v = v.conj()
            s = -s
        c = 1.0 / math.sqrt(s)
        chosen.append(c * v)
        re_cols.append(c * v.real)
        im_cols.append(c * v.imag)
    M = _chop(np.column_stack(re_cols + im_cols))
    signs = np.sign(np.diag(M.T @ D2 @ M)[:f])
    freqs = omegas * signs
    lin = LinearNormalization(M, freqs, np.column_stack(chosen), lam[upper])
    err = lin.symplecticity_error()
    if err > 1e-8:
        raise NotEllipticError(f"normalising matrix not symplectic (error {err:.3g})")
    return lin


def quadratic_residual(h2, lin: LinearNormalization) -> float:
    """Largest deviation of M^T D2 M from diag(w, w)."""
    D2 = h2.hessian().real if isinstance(h2, TruncatedSeries) else np.asarray(h2, dtype=float)
    target = np.diag(np.concatenate([lin.frequencies, lin.frequencies]))
    return float(np.max(np.abs(lin.M.T @ D2 @ lin.M - target)))


def d_eigenvalue(alpha, beta, omega) -> complex:
    """Eigenvalue of D = {H2, .} on z^alpha zbar^beta."""
    return -1j * float(np.dot(omega, np.subtract(beta, alpha)))


def homological_solve(Hn, omega: Sequence[float], tol_res: float = DEFAULT_TOL_RES,
                      keep_resonant: bool = False):
    """Split ``Hn`` into ``D W`` plus a kernel part.

    Returns ``(W, K)`` with ``Hn - D W = K`` and ``D K = 0``.  Real input
    gives real output; ComplexSeries input stays complex.  Terms with a
    denominator below ``tol_res`` raise ResonanceError, or with
    ``keep_resonant`` are left in ``K`` (resonant normal form).
    """
    real_input = not isinstance(Hn, ComplexSeries)
    Hc = to_complex(Hn) if real_input else Hn
    f = Hc.num_vars // 2
    omega = np.asarray(omega, dtype=float)
    if len(omega) != f:
        raise ValueError("one frequency per degree of freedom required")
    W, K = {}, {}
    for key, c in Hc.terms.items():
        e = unpack(key, 2 * f)
        a, b = e[:f], e[f:]
        if a == b:
            K[key] = c
            continue
        m = np.subtract(b, a)
        lam = d_eigenvalue(a, b, omega)
        if abs(lam) < tol_res:
            if keep_resonant:
                K[key] = c
                continue
            raise ResonanceError(m, abs(lam))
        W[key] = c / lam
    Wc = ComplexSeries(Hc.num_vars, Hc.max_degree, W)
    Kc = ComplexSeries(Hc.num_vars, Hc.max_degree, K)
    if real_input:
        return from_complex(Wc), from_complex(Kc)
    return Wc, Kc


def lie_transform_step(H: TruncatedSeries, W: TruncatedSeries, n: int, n0: int) -> TruncatedSeries:
    """``exp(ad_W) H`` truncated at degree ``n0`` for W homogeneous of degree ``n >= 3``.

    Each application of ``ad_W`` raises the degree by ``n - 2``, so degree
    ``s`` receives the terms k = 0..floor(s/(n-2)); degrees below ``n`` are
    untouched.
    """
    if n < 3:
        raise ValueError("generators start at degree 3")
    H = H.with_max_degree(n0) if H.max_degree != n0 else H
    W = W.with_max_degree(n0)
    result = H
    term = H
    k = 0
    while True:
        k += 1
        # only parts that can still land at degree <= n0 matter
        term = poisson_bracket(W, term._like({key: c for key, c in term.terms.items()
                                              if key_degree(key) <= n0 - (n - 2)}))
        if not term.terms:
            break
        term = term.scale(1.0 / k)
        result = result + term
    return result


def resonance_margin(omega: Sequence[float], order: int) -> tuple[float, tuple[int, ...]]:
    """min |<m, omega>| over integer vectors with 0 < |m|_1 <= order."""
    f = len(omega)
    best, arg = math.inf, ()
    for m in itertools.product(range(-order, order + 1), repeat=f):
        l1 = sum(abs(x) for x in m)
        if l1 == 0 or l1 > order:
            continue
        val = abs(float(np.dot(m, omega)))
        if val < best:
            best, arg = val, m
    return best, arg


@dataclass
class NormalForm:
    E0: float
    order: int
    action_coefficients: dict
    generators: dict
    linearization: LinearNormalization
    shift: np.ndarray
    hamiltonian: ComplexSeries = field(repr=False)
    resonance_margin: float = math.nan
    resonance_vector: tuple = ()
    resonant_terms: dict = field(default_factory=dict)

    @property
    def frequencies(self) -> np.ndarray:
        return self.linearization.frequencies

    @property
    def dof(self) -> int:
        return self.linearization.dof

    def real_hamiltonian(self) -> TruncatedSeries:
        return from_complex(self.hamiltonian)

    def action_polynomial(self, actions: Sequence[float]) -> float:
        total = 0.0
        for alpha, c in self.action_coefficients.items():
            total += c * math.prod(I ** a for I, a in zip(actions, alpha))
        return total

    def __call__(self, y: Sequence[float]) -> float:
        """NF Hamiltonian (resonant terms included) at normal-form coordinates ``y = (q, p)``."""
        f = self.dof
        actions = [(y[k] ** 2 + y[k + f] ** 2) / 2 for k in range(f)]
        value = self.action_polynomial(actions)
        if self.resonant_terms:
            res = ComplexSeries(2 * f, self.order, {pack(e): c for e, c in self.resonant_terms.items()})
            value += from_complex(res).evaluate(y)
        return value

    def quartic_terms(self) -> dict:
        return {a: c for a, c in self.action_coefficients.items() if sum(a) == 2}

    def term_label(self, alpha) -> str:
        parts = []
        for k, a in enumerate(alpha):
            if a == 1:
                parts.append(f"I{k + 1}")
            elif a > 1:
                parts.append(f"I{k + 1}^{a}")
        return " ".join(parts) if parts else "1"

    def to_record(self) -> dict:
        terms = sorted(self.action_coefficients.items(), key=lambda kv: (sum(kv[0]), [-x for x in kv[0]]))
        return {
            "E0": self.E0,
            "order": self.order,
            "frequencies": [float(x) for x in self.frequencies],
            "action_terms": [[list(a), float(c)] for a, c in terms],
            "M": [float(x) for x in self.linearization.M.ravel()],
            "resonance_margin": self.resonance_margin,
            "resonance_vector": list(self.resonance_vector),
            "resonant_terms": [[list(e), [c.real, c.imag]] for e, c in sorted(self.resonant_terms.items())],
        }

    def to_original(self, y: Sequence[float], rtol: float = 1e-13) -> np.ndarray:
        """Chart point corresponding to normal-form coordinates ``y``."""
        x = np.asarray(y, dtype=float)
        for n in sorted(self.generators, reverse=True):
            x = hamiltonian_flow(self.generators[n], x, -1.0, rtol=rtol)
        return self.shift + self.linearization.M @ x

    def to_normal(self, x: Sequence[float], rtol: float = 1e-13) -> np.ndarray:
        y = np.linalg.solve(self.linearization.M, np.asarray(x, dtype=float) - self.shift)
        for n in sorted(self.generators):
            y = hamiltonian_flow(self.generators[n], y, 1.0, rtol=rtol)
        return y


def hamiltonian_flow(G: TruncatedSeries, y0, t: float, rtol: float = 1e-13) -> np.ndarray:
    """Time-``t`` map of the flow of ``y' = J grad(G)`` (pass ``t < 0`` for -G)."""
    f = G.num_vars // 2
    grads = [G.derivative(k) for k in range(G.num_vars)]

    def rhs(_, y):
        g = np.array([d.evaluate(y) for d in grads], dtype=float)
        return np.concatenate([g[f:], -g[:f]])

    sol = solve_ivp(rhs, (0.0, t), np.asarray(y0, dtype=float), method="DOP853", rtol=rtol, atol=1e-16)
    return sol.y[:, -1]


def complex_term_count(H: TruncatedSeries, lin: LinearNormalization, prune: float = 1e-14) -> int:
    """Number of nonvanishing Taylor coefficients of ``H`` (linear part dropped)
    once written in the complex normal coordinates of ``lin``.

    Coefficients below ``prune`` times the largest one count as zero; the
    chart coefficients carry rounding of that relative size.
    """
    H = H._like({k: c for k, c in H.terms.items() if key_degree(k) != 1})
    Hc = to_complex(linear_substitute(H, lin.M))
    cut = prune * max(abs(c) for c in Hc.terms.values())
    return sum(1 for c in Hc.terms.values() if abs(c) >= cut)


def normal_form(h, z0: Sequence[float], n0: int, tol_res: float = DEFAULT_TOL_RES,
                lin_tol: float = LINEAR_TOL, phase: str = "largest",
                keep_resonant: bool = False) -> NormalForm:
    """Normal form of order ``n0`` (even) of ``h`` around the equilibrium ``z0``.

    With ``keep_resonant`` the terms on exact resonances stay in the result
    (``NormalForm.resonant_terms``) instead of raising ResonanceError; the
    action coefficients are unaffected by them.
    """
    if n0 < 2 or n0 % 2:
        raise ValueError("normal form order must be even and >= 2")
    H1 = taylor_shift(h, z0, n0, lin_tol=lin_tol)
    E0 = float(np.real(H1.constant_term))
    H1 = H1._like({k: c for k, c in H1.terms.items() if key_degree(k) != 1})
    lin = linearize_and_normalize(H1, phase=phase)
    omega = lin.frequencies
    Hc = to_complex(linear_substitute(H1, lin.M))
    # the quadratic part is diagonal by construction; drop rounding residue
    f = lin.dof
    h2 = {pack([1 if j % f == k else 0 for j in range(2 * f)]): float(omega[k]) for k in range(f)}
    Hc = ComplexSeries(Hc.num_vars, n0, {**{k: c for k, c in Hc.terms.items() if key_degree(k) != 2}, **h2})
    generators = {}
    for n in range(3, n0 + 1):
        Wc, Kc = homological_solve(Hc.homogeneous(n), omega, tol_res, keep_resonant)
        if Wc.terms:
            Hc = lie_transform_step(Hc, Wc, n, n0)
            # degree n is now exactly the kernel part; drop the rounding residue
            Hc = Hc._like({**{k: c for k, c in Hc.terms.items() if key_degree(k) != n}, **Kc.terms})
        generators[n] = from_complex(Wc)
    actions, resonant = {}, {}
    for key, c in Hc.terms.items():
        e = unpack(key, 2 * f)
        a, b = e[:f], e[f:]
        if a != b:
            resonant[e] = complex(c)
        elif key:
            actions[a] = float(np.real(c))
    margin, vec = resonance_margin(np.abs(omega), n0)
    return NormalForm(E0, n0, actions, generators, lin, np.asarray(z0, dtype=float), Hc, margin, vec,
                      resonant)


def format_table(nf: NormalForm, digits: int = 10) -> str:
    """Action polynomial laid out as constant, linear, then higher terms."""
    lines = [f"E0 = {nf.E0:.{digits}g}"]
    for k, w in enumerate(nf.frequencies):
        lines.append(f"omega_{k + 1} = {w:.{digits}g}")
    for a, c in sorted(nf.action_coefficients.items(), key=lambda kv: (sum(kv[0]), [-x for x in kv[0]])):
        if sum(a) >= 1:
            lines.append(f"{nf.term_label(a):>12s} : {c: .{digits}g}")
    return "\n".join(lines)
