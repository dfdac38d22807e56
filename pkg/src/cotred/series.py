"""Sparse truncated multivariate power series over phase space.

Variables are ordered ``(q_1..q_f, p_1..p_f)``.  Exponent vectors are packed
into a single integer, one byte per variable, so that multiplying two
monomials is an integer addition of their keys.
"""
from __future__ import annotations

import cmath
import math
from functools import lru_cache
from numbers import Number
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

BITS = 8
_MASK = (1 << BITS) - 1
MAX_DEGREE_LIMIT = _MASK
PRUNE_TOL = 1e-14


class DimensionError(ValueError):
    pass


class DomainError(ValueError):
    """Constant term outside the domain of an elementary function."""


def pack(exponents: Sequence[int]) -> int:
    key = 0
    for k, e in enumerate(exponents):
        if e < 0 or e > _MASK:
            raise ValueError(f"exponent {e} out of range")
        key |= int(e) << (BITS * k)
    return key


@lru_cache(maxsize=None)
def unpack(key: int, num_vars: int) -> tuple[int, ...]:
    return tuple((key >> (BITS * k)) & _MASK for k in range(num_vars))


@lru_cache(maxsize=None)
def key_degree(key: int) -> int:
    return sum(key.to_bytes((key.bit_length() + 7) // 8 or 1, "little"))


def _unit(k: int) -> int:
    return 1 << (BITS * k)


class TruncatedSeries:
    """Polynomial in ``num_vars`` variables truncated at ``max_degree``.

    Values are treated as immutable.  Coefficients with absolute value below
    ``PRUNE_TOL`` are dropped whenever a series is constructed, as are terms
    of total degree above ``max_degree``.
    """

    __slots__ = ("num_vars", "max_degree", "terms")
    __array_priority__ = 100  # make numpy scalars defer to our operators

    def __init__(self, num_vars: int, max_degree: int, terms: Mapping[int, complex] | None = None,
                 *, prune: float = PRUNE_TOL):
        if max_degree < 0 or max_degree > MAX_DEGREE_LIMIT:
            raise ValueError(f"max_degree must lie in [0, {MAX_DEGREE_LIMIT}]")
        self.num_vars = int(num_vars)
        self.max_degree = int(max_degree)
        clean = {}
        if terms:
            for key, c in terms.items():
                if abs(c) > prune and key_degree(key) <= max_degree:
                    clean[key] = c
        self.terms = clean

    # construction ------------------------------------------------------

    @classmethod
    def constant(cls, num_vars, max_degree, value=0.0):
        return cls(num_vars, max_degree, {0: value})

    @classmethod
    def variable(cls, num_vars, max_degree, index, shift=0.0):
        """The coordinate jet ``shift + x_index``."""
        if not 0 <= index < num_vars:
            raise IndexError(index)
        terms = {0: shift}
        if max_degree >= 1:
            terms[_unit(index)] = 1.0
        return cls(num_vars, max_degree, terms)

    @classmethod
    def from_exponents(cls, num_vars, max_degree, items: Iterable[tuple[Sequence[int], complex]]):
        terms: dict[int, complex] = {}
        for exps, c in items:
            if len(exps) != num_vars:
                raise DimensionError(f"exponent vector of length {len(exps)}, expected {num_vars}")
            key = pack(exps)
            terms[key] = terms.get(key, 0.0) + c
        return cls(num_vars, max_degree, terms)

    def _like(self, terms, max_degree=None):
        return type(self)(self.num_vars, self.max_degree if max_degree is None else max_degree, terms)

    # inspection ----------------------------------------------------------

    def __len__(self):
        return len(self.terms)

    def items(self):
        """Iterate over ``(exponent tuple, coefficient)`` pairs, graded by degree."""
        for key in sorted(self.terms, key=lambda k: (key_degree(k), unpack(k, self.num_vars)[::-1])):
            yield unpack(key, self.num_vars), self.terms[key]

    def coefficient(self, exponents: Sequence[int]):
        return self.terms.get(pack(exponents), 0.0)

    @property
    def constant_term(self):
        return self.terms.get(0, 0.0)

    @property
    def degree(self) -> int:
        """Highest total degree actually present (-1 for the zero series)."""
        return max((key_degree(k) for k in self.terms), default=-1)

    @property
    def is_complex(self) -> bool:
        return any(isinstance(c, complex) for c in self.terms.values())

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.terms.values())

    def homogeneous(self, s: int):
        return self._like({k: c for k, c in self.terms.items() if key_degree(k) == s})

    def truncate(self, degree: int):
        degree = min(degree, self.max_degree)
        return self._like(self.terms, max_degree=degree)

    def with_max_degree(self, degree: int):
        """Same terms (those that fit) with a new truncation degree."""
        return self._like(self.terms, max_degree=degree)

    def gradient(self) -> np.ndarray:
        """Linear coefficients, i.e. the gradient at the origin."""
        out = np.zeros(self.num_vars, dtype=complex if self.is_complex else float)
        for k in range(self.num_vars):
            out[k] = self.terms.get(_unit(k), 0.0)
        return out

    def hessian(self) -> np.ndarray:
        """Second derivative matrix at the origin."""
        n = self.num_vars
        out = np.zeros((n, n), dtype=complex if self.is_complex else float)
        for i in range(n):
            out[i, i] = 2.0 * self.terms.get(2 * _unit(i), 0.0)
            for j in range(i + 1, n):
                c = self.terms.get(_unit(i) + _unit(j), 0.0)
                out[i, j] = out[j, i] = c
        return out

    def __repr__(self):
        body = " + ".join(f"{c:.6g}*{e}" for e, c in list(self.items())[:8])
        more = " + ..." if len(self.terms) > 8 else ""
        return f"{type(self).__name__}(n={self.num_vars}, d={self.max_degree}: {body or '0'}{more})"

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return (self.num_vars == other.num_vars and self.max_degree == other.max_degree
                and self.terms == other.terms)

    __hash__ = None

    def allclose(self, other, tol=1e-10, degree=None) -> bool:
        """Coefficient-wise comparison up to ``degree`` (default: common max degree)."""
        if degree is None:
            degree = min(self.max_degree, other.max_degree)
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) <= tol
                   for k in keys if key_degree(k) <= degree)

    # arithmetic ----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, TruncatedSeries):
            if other.num_vars != self.num_vars:
                raise DimensionError(f"{self.num_vars} vs {other.num_vars} variables")
            return other
        if isinstance(other, Number) or np.isscalar(other):
            return self._like({0: other})
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0.0) + c
        return self._result_type(other)(self.num_vars, min(self.max_degree, other.max_degree), terms)

    __radd__ = __add__

    def __neg__(self):
        return self._like({k: -c for k, c in self.terms.items()})

    def __pos__(self):
        return self

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _result_type(self, other):
        return type(other) if isinstance(other, ComplexSeries) else type(self)

    def scale(self, factor):
        return self._like({k: c * factor for k, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, Number) or np.isscalar(other):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return series_mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Number) or np.isscalar(other):
            return self.scale(1.0 / other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * compose_elementary("recip", other)

    def __rtruediv__(self, other):
        return compose_elementary("recip", self) * other

    def __pow__(self, n):
        if isinstance(n, int) and n >= 0:
            result = self._like({0: 1.0})
            base = self
            while n:
                if n & 1:
                    result = result * base
                n >>= 1
                if n:
                    base = base * base
            return result
        return compose_elementary(("pow", float(n)), self)

    # calculus ------------------------------------------------------------

    def derivative(self, k: int):
        """Partial derivative in variable ``k``; the truncation degree drops by one."""
        if not 0 <= k < self.num_vars:
            raise IndexError(k)
        shift = BITS * k
        u = _unit(k)
        terms = {}
        for key, c in self.terms.items():
            e = (key >> shift) & _MASK
            if e:
                terms[key - u] = c * e
        return self._like(terms, max_degree=max(self.max_degree - 1, 0))

    def evaluate(self, z: Sequence[complex]):
        return evaluate(self, z)

    def __call__(self, *z):
        return evaluate(self, z[0] if len(z) == 1 and not np.isscalar(z[0]) else z)

    def real(self):
        return TruncatedSeries(self.num_vars, self.max_degree,
                               {k: float(np.real(c)) for k, c in self.terms.items()})

    def imag(self):
        return TruncatedSeries(self.num_vars, self.max_degree,
                               {k: float(np.imag(c)) for k, c in self.terms.items()})

    # serialization -------------------------------------------------------

    def to_record(self) -> dict:
        terms = []
        for exps, c in self.items():
            if isinstance(c, complex):
                terms.append([list(exps), [c.real, c.imag]])
            else:
                terms.append([list(exps), float(c)])
        return {"num_vars": self.num_vars, "max_degree": self.max_degree, "terms": terms}

    @classmethod
    def from_record(cls, record: Mapping) -> "TruncatedSeries":
        items = []
        for exps, c in record["terms"]:
            items.append((exps, complex(*c) if isinstance(c, (list, tuple)) else float(c)))
        return cls.from_exponents(int(record["num_vars"]), int(record["max_degree"]), items)


class ComplexSeries(TruncatedSeries):
    """Series in the diagonalising variables ``(z_1..z_f, zbar_1..zbar_f)``.

    ``z_k = (q_k + i p_k)/sqrt(2)``.  The Poisson bracket picks up a factor
    ``-i`` relative to the canonical formula in these variables.
    """

    __slots__ = ()

    @property
    def dof(self) -> int:
        return self.num_vars // 2

    def conjugate(self):
        """Complex conjugate of the function represented (swaps z and zbar)."""
        f = self.dof
        terms = {}
        for key, c in self.terms.items():
            e = unpack(key, self.num_vars)
            terms[pack(e[f:] + e[:f])] = np.conj(c)
        return self._like(terms)

    def is_real_form(self, tol: float = 1e-12) -> bool:
        """Reality condition: c(a, b) == conj(c(b, a))."""
        conj = self.conjugate()
        keys = set(self.terms) | set(conj.terms)
        return all(abs(self.terms.get(k, 0.0) - conj.terms.get(k, 0.0)) <= tol for k in keys)


def _check_dims(a: TruncatedSeries, b: TruncatedSeries):
    if a.num_vars != b.num_vars:
        raise DimensionError(f"{a.num_vars} vs {b.num_vars} variables")


def series_add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    _check_dims(a, b)
    return a + b


def _graded(terms):
    groups: dict[int, list] = {}
    for k, c in terms.items():
        groups.setdefault(key_degree(k), []).append((k, c))
    return sorted(groups.items())


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    _check_dims(a, b)
    dmax = min(a.max_degree, b.max_degree)
    if len(a.terms) > len(b.terms):
        a, b = b, a
    b_groups = _graded(b.terms)
    out: dict[int, complex] = {}
    get = out.get
    for ka, ca in a.terms.items():
        room = dmax - key_degree(ka)
        for db, items in b_groups:
            if db > room:
                break
            for kb, cb in items:
                k = ka + kb
                out[k] = get(k, 0.0) + ca * cb
    cls = ComplexSeries if isinstance(a, ComplexSeries) or isinstance(b, ComplexSeries) else TruncatedSeries
    return cls(a.num_vars, dmax, out)


def poisson_bracket(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Canonical bracket sum_k (da/dq_k db/dp_k - da/dp_k db/dq_k).

    For ``ComplexSeries`` operands the same formula in ``(z, zbar)`` is
    multiplied by ``-i``, which is the canonical bracket expressed in those
    variables.  The result keeps the common truncation degree of the inputs.
    """
    _check_dims(a, b)
    if a.num_vars % 2:
        raise DimensionError("phase space must have an even number of variables")
    f = a.num_vars // 2
    dmax = min(a.max_degree, b.max_degree)
    # derivatives are exact polynomials here; keep the full degree
    a_ = a.with_max_degree(dmax + 1)
    b_ = b.with_max_degree(dmax + 1)
    total = a._like({}, max_degree=dmax)
    complex_form = isinstance(a, ComplexSeries) or isinstance(b, ComplexSeries)
    if complex_form:
        total = ComplexSeries(a.num_vars, dmax)
    for k in range(f):
        daq, dap = a_.derivative(k), a_.derivative(k + f)
        dbq, dbp = b_.derivative(k), b_.derivative(k + f)
        if daq.terms and dbp.terms:
            total = total + series_mul(daq.with_max_degree(dmax), dbp.with_max_degree(dmax))
        if dap.terms and dbq.terms:
            total = total - series_mul(dap.with_max_degree(dmax), dbq.with_max_degree(dmax))
    if complex_form:
        total = ComplexSeries(a.num_vars, dmax, {k: -1j * c for k, c in total.terms.items()})
    return total


# elementary functions ----------------------------------------------------

def _taylor_coefficients(fn, c0, order: int) -> list:
    """f^(k)(c0)/k! for k = 0..order."""
    if isinstance(fn, tuple) and fn[0] == "pow":
        alpha = fn[1]
        if c0 == 0 or (not isinstance(c0, complex) and c0 < 0 and alpha != int(alpha)):
            raise DomainError(f"power {alpha} undefined at constant term {c0}")
        out, binom = [], 1.0
        for k in range(order + 1):
            out.append(binom * c0 ** (alpha - k))
            binom *= (alpha - k) / (k + 1)
        return out
    cm = isinstance(c0, complex)
    if fn == "exp":
        e = cmath.exp(c0) if cm else math.exp(c0)
        return [e / math.factorial(k) for k in range(order + 1)]
    if fn in ("sin", "cos"):
        s = cmath.sin(c0) if cm else math.sin(c0)
        c = cmath.cos(c0) if cm else math.cos(c0)
        cycle = [s, c, -s, -c] if fn == "sin" else [c, -s, -c, s]
        return [cycle[k % 4] / math.factorial(k) for k in range(order + 1)]
    if fn == "sqrt":
        if not cm and c0 <= 0:
            raise DomainError(f"sqrt needs a positive constant term, got {c0}")
        return _taylor_coefficients(("pow", 0.5), c0, order)
    if fn == "recip":
        if c0 == 0:
            raise DomainError("recip of a series with zero constant term")
        return [(-1) ** k * c0 ** (-1 - k) for k in range(order + 1)]
    if fn == "log":
        if not cm and c0 <= 0:
            raise DomainError(f"log needs a positive constant term, got {c0}")
        return [cmath.log(c0) if cm else math.log(c0)] + [(-1) ** (k + 1) / (k * c0 ** k)
                                                          for k in range(1, order + 1)]
    raise ValueError(f"unknown elementary function {fn!r}")


def compose_elementary(fn, a: TruncatedSeries) -> TruncatedSeries:
    """Exact jet composition ``fn(a)`` truncated at ``a.max_degree``.

    ``fn`` is one of ``exp, sin, cos, sqrt, recip, log`` or ``("pow", alpha)``.
    """
    c0 = a.constant_term
    coeffs = _taylor_coefficients(fn, c0, a.max_degree)
    delta = a - c0
    result = a._like({0: coeffs[0]})
    if not delta.terms:
        return result
    power = a._like({0: 1.0})
    for k in range(1, a.max_degree + 1):
        power = power * delta
        if not power.terms:
            break
        result = result + power.scale(coeffs[k])
    return result


def evaluate(a: TruncatedSeries, z: Sequence[complex]):
    if len(z) != a.num_vars:
        raise DimensionError(f"point of length {len(z)}, expected {a.num_vars}")
    total = 0.0
    for key, c in a.terms.items():
        term = c
        e = unpack(key, a.num_vars)
        for zk, ek in zip(z, e):
            if ek:
                term = term * zk ** ek
        total = total + term
    return total


def substitute(a: TruncatedSeries, jets: Sequence[TruncatedSeries], max_degree: int | None = None,
               cls=None) -> TruncatedSeries:
    """Compose ``a`` with ``x_k -> jets[k]``.

    Exact when ``a`` is a polynomial and ``max_degree`` is large enough to
    hold the result.
    """
    if len(jets) != a.num_vars:
        raise DimensionError(f"{len(jets)} jets for {a.num_vars} variables")
    n_out = jets[0].num_vars
    d = min(j.max_degree for j in jets) if max_degree is None else max_degree
    cls = cls or (ComplexSeries if any(isinstance(j, ComplexSeries) for j in jets) else TruncatedSeries)
    jets = [cls(n_out, d, j.terms) for j in jets]
    powers: dict[tuple[int, int], TruncatedSeries] = {}

    def power(k, e):
        if (k, e) not in powers:
            powers[(k, e)] = jets[k] if e == 1 else power(k, e - 1) * jets[k]
        return powers[(k, e)]

    out: dict[int, complex] = {}
    for key, c in a.terms.items():
        term = cls(n_out, d, {0: c})
        for k, e in enumerate(unpack(key, a.num_vars)):
            if e:
                term = term * power(k, e)
        for kk, cc in term.terms.items():
            out[kk] = out.get(kk, 0.0) + cc
    return cls(n_out, d, out)


def linear_substitute(a: TruncatedSeries, matrix, cls=None) -> TruncatedSeries:
    """Substitute ``x_i -> sum_j matrix[i, j] y_j``."""
    matrix = np.asarray(matrix)
    n = a.num_vars
    cmplx = np.iscomplexobj(matrix)
    jets = []
    for i in range(n):
        terms = {_unit(j): (complex(v) if cmplx else float(v)) for j, v in enumerate(matrix[i]) if v != 0}
        jets.append(TruncatedSeries(matrix.shape[1], a.max_degree, terms))
    return substitute(a, jets, a.max_degree, cls=cls)


def shift(a: TruncatedSeries, z0: Sequence[float]) -> TruncatedSeries:
    """``a(z + z0)`` as a series in ``z``."""
    jets = [TruncatedSeries.variable(a.num_vars, a.max_degree, k, z0[k]) for k in range(a.num_vars)]
    return substitute(a, jets, a.max_degree, cls=type(a))


def _complex_matrices(f: int):
    s = 1 / math.sqrt(2)
    eye = np.eye(f)
    # (q, p) in terms of (z, zbar)
    to_c = np.block([[s * eye, s * eye], [-1j * s * eye, 1j * s * eye]])
    # (z, zbar) in terms of (q, p)
    from_c = np.block([[s * eye, 1j * s * eye], [s * eye, -1j * s * eye]])
    return to_c, from_c


def to_complex(a: TruncatedSeries) -> ComplexSeries:
    """Rewrite ``a(q, p)`` in ``z = (q + ip)/sqrt2``, ``zbar = (q - ip)/sqrt2``."""
    if a.num_vars % 2:
        raise DimensionError("phase space must have an even number of variables")
    to_c, _ = _complex_matrices(a.num_vars // 2)
    return linear_substitute(a, to_c, cls=ComplexSeries)


def from_complex(a: ComplexSeries, real: bool = True, tol: float = 1e-10) -> TruncatedSeries:
    """Inverse of :func:`to_complex`.

    With ``real=True`` the imaginary parts must vanish (to ``tol``) and a real
    series is returned.
    """
    _, from_c = _complex_matrices(a.num_vars // 2)
    out = linear_substitute(ComplexSeries(a.num_vars, a.max_degree, a.terms), from_c, cls=ComplexSeries)
    if not real:
        return out
    worst = max((abs(np.imag(c)) for c in out.terms.values()), default=0.0)
    if worst > tol:
        raise ValueError(f"series is not real: imaginary part up to {worst:.3g}")
    return out.real()


# jet-generic elementary functions ---------------------------------------
# Model code calls these so that the same expression works on floats,
# TruncatedSeries and (when the dynamics fast path is in use) JAX arrays.

def _jax_numpy(x):
    import sys
    jax = sys.modules.get("jax")
    if jax is not None and isinstance(x, jax.Array):
        import jax.numpy as jnp
        return jnp
    return None


def _dispatch(name: str, fn_series, fn_math, fn_cmath) -> Callable:
    def f(x):
        if isinstance(x, TruncatedSeries):
            return compose_elementary(fn_series, x)
        jnp = _jax_numpy(x)
        if jnp is not None:
            return getattr(jnp, name)(x)
        if isinstance(x, complex):
            return fn_cmath(x)
        if isinstance(x, np.ndarray):
            return getattr(np, name)(x)
        try:
            return fn_math(x)
        except ValueError as err:
            raise DomainError(f"{name}({x})") from err
    f.__name__ = name
    return f


exp = _dispatch("exp", "exp", math.exp, cmath.exp)
sin = _dispatch("sin", "sin", math.sin, cmath.sin)
cos = _dispatch("cos", "cos", math.cos, cmath.cos)
sqrt = _dispatch("sqrt", "sqrt", math.sqrt, cmath.sqrt)
log = _dispatch("log", "log", math.log, cmath.log)


def recip(x):
    if isinstance(x, TruncatedSeries):
        return compose_elementary("recip", x)
    return 1.0 / x
