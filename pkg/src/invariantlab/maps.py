"""Polynomial self-maps of C^k and invertible chains of elementary automorphisms.

Two representations are supported:

* :class:`PolynomialMap` -- ``k`` sparse polynomials, composed symbolically
  up to a degree cap.
* :class:`AutomorphismChain` -- an ordered list of affine maps, triangular
  shears and coordinate permutations. Chains are evaluated left to right
  (``factors[0]`` acts first) and have exact closed-form inverses.

Both lower to a flat :class:`Program` executed by the compiled interpreter in
``_kernels``; every batch entry point accepts arrays of shape ``(n, k)``.
"""

from __future__ import annotations

import ast
import cmath
import math
import operator
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from . import _kernels as K
from .geometry import DimensionError, InvalidInputError

__all__ = [
    "DEFAULT_MAX_DEGREE",
    "DegreeOverflowError",
    "NonInvertibleError",
    "MapParseError",
    "Polynomial",
    "PolynomialMap",
    "Affine",
    "Shear",
    "Permutation",
    "AutomorphismChain",
    "OrbitRecord",
    "Program",
    "henon",
    "identity_chain",
    "linear_chain",
    "diagonal_chain",
    "rotation_chain",
    "evaluate",
    "jacobian",
    "jacobian_batch",
    "scale_map",
    "invert_chain",
    "compose",
    "power",
    "iterate",
    "as_polymap",
    "parse_map",
]

DEFAULT_MAX_DEGREE = 16
CLEANUP_RTOL = 1e-15


class DegreeOverflowError(ValueError):
    pass


class NonInvertibleError(ValueError):
    pass


class MapParseError(ValueError):
    pass


Exponent = tuple[int, ...]


class Polynomial:
    """Sparse polynomial in ``k`` complex variables.

    Terms live in a dict ``{exponent tuple: coefficient}``; zero coefficients
    are never stored. Instances are treated as immutable.
    """

    __slots__ = ("k", "terms")

    def __init__(self, k: int, terms: Union[Mapping[Exponent, complex], Iterable] = ()):
        if k < 1:
            raise DimensionError("k must be >= 1")
        self.k = k
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Exponent, complex] = {}
        for exps, coef in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != k or min(exps) < 0:
                raise DimensionError(f"bad exponent {exps} for k={k}")
            acc[exps] = acc.get(exps, 0j) + complex(coef)
        self.terms = {e: c for e, c in sorted(acc.items()) if c != 0}

    @classmethod
    def constant(cls, k: int, c: complex) -> "Polynomial":
        return cls(k, {(0,) * k: c})

    @classmethod
    def variable(cls, k: int, i: int) -> "Polynomial":
        e = [0] * k
        e[i] = 1
        return cls(k, {tuple(e): 1.0})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def depends_on(self, i: int) -> bool:
        return any(e[i] > 0 for e in self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.k == other.k and self.terms == other.terms

    def __hash__(self):
        return hash((self.k, tuple(self.terms.items())))

    def __repr__(self) -> str:
        return f"Polynomial(k={self.k}, {self.terms})"

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.k != self.k:
                raise DimensionError("polynomials in different numbers of variables")
            return other
        return Polynomial.constant(self.k, complex(other))

    def __add__(self, other):
        other = self._coerce(other)
        t = dict(self.terms)
        for e, c in other.terms.items():
            t[e] = t.get(e, 0j) + c
        return Polynomial(self.k, t)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.k, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        t: dict[Exponent, complex] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, 0j) + c1 * c2
        return Polynomial(self.k, t)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Polynomial):
            raise TypeError("division by a polynomial is not supported")
        return self * (1.0 / complex(other))

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise TypeError("polynomial powers need a nonnegative integer exponent")
        out = Polynomial.constant(self.k, 1.0)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def scaled_input(self, mu: complex) -> "Polynomial":
        """Coefficients of ``z -> p(mu z)``."""
        return Polynomial(self.k, {e: c * mu ** sum(e) for e, c in self.terms.items()})

    def cleaned(self, rtol: float = CLEANUP_RTOL) -> "Polynomial":
        if not self.terms:
            return self
        big = max(abs(c) for c in self.terms.values())
        return Polynomial(self.k, {e: c for e, c in self.terms.items() if abs(c) >= rtol * big})

    def derivative(self, i: int) -> "Polynomial":
        t = {}
        for e, c in self.terms.items():
            if e[i] > 0:
                d = list(e)
                d[i] -= 1
                t[tuple(d)] = c * e[i]
        return Polynomial(self.k, t)

    def substitute(self, comps: Sequence["Polynomial"]) -> "Polynomial":
        """``p(q_1, ..., q_k)`` for polynomials ``q_i`` (all in the same variables)."""
        if len(comps) != self.k:
            raise DimensionError("substitution needs one polynomial per variable")
        k2 = comps[0].k
        out = Polynomial(k2)
        cache: dict[tuple[int, int], Polynomial] = {}

        def pw(i: int, n: int) -> Polynomial:
            if (i, n) not in cache:
                cache[(i, n)] = comps[i] ** n
            return cache[(i, n)]

        for e, c in self.terms.items():
            term = Polynomial.constant(k2, c)
            for i, n in enumerate(e):
                if n:
                    term = term * pw(i, n)
            out = out + term
        return out

    def __call__(self, P: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape (k,) or (n, k)."""
        P = np.asarray(P, dtype=np.complex128)
        single = P.ndim == 1
        X = np.atleast_2d(P)
        if X.shape[1] != self.k:
            raise DimensionError(f"expected points in C^{self.k}")
        out = np.zeros(X.shape[0], np.complex128)
        for e, c in self.terms.items():
            term = np.full(X.shape[0], c, np.complex128)
            for i, n in enumerate(e):
                for _ in range(n):
                    term = term * X[:, i]
            out = out + term
        return out[0] if single else out


# ---------------------------------------------------------------------------
# compiled programs


@dataclass(frozen=True)
class Program:
    k: int
    ops: np.ndarray
    cpar: np.ndarray
    ipar: np.ndarray
    exps: np.ndarray
    coefs: np.ndarray

    @property
    def args(self):
        return self.ops, self.cpar, self.ipar, self.exps, self.coefs


class _ProgramBuilder:
    def __init__(self, k: int):
        self.k = k
        self.ops: list[tuple[int, int, int, int]] = []
        self.cpar: list[complex] = []
        self.ipar: list[int] = []
        self.exps: list[Exponent] = []
        self.coefs: list[complex] = []

    def _terms(self, poly: Polynomial) -> tuple[int, int]:
        start = len(self.exps)
        for e, c in poly.terms.items():
            self.exps.append(e)
            self.coefs.append(c)
        return start, len(self.exps)

    def affine(self, A: np.ndarray, b: np.ndarray):
        off = len(self.cpar)
        self.cpar.extend(complex(x) for x in np.asarray(A).ravel())
        self.cpar.extend(complex(x) for x in b)
        self.ops.append((K.OP_AFFINE, off, 0, 0))

    def shear(self, axis: int, poly: Polynomial):
        start, stop = self._terms(poly)
        self.ops.append((K.OP_SHEAR, axis, start, stop))

    def perm(self, perm: Sequence[int]):
        off = len(self.ipar)
        self.ipar.extend(int(p) for p in perm)
        self.ops.append((K.OP_PERM, off, 0, 0))

    def poly(self, comps: Sequence[Polynomial], prescale: float):
        off = len(self.ipar)
        bounds = []
        for p in comps:
            start, stop = self._terms(p)
            bounds.append(start)
        bounds.append(len(self.exps))
        self.ipar.extend(bounds)
        soff = len(self.cpar)
        self.cpar.append(complex(prescale))
        self.ops.append((K.OP_POLY, off, soff, 0))

    def build(self) -> Program:
        k = self.k
        return Program(
            k,
            np.array(self.ops, dtype=np.int64).reshape(-1, 4),
            np.array(self.cpar + [0j], dtype=np.complex128),
            np.array(self.ipar + [0], dtype=np.int64),
            np.array(self.exps, dtype=np.int64).reshape(-1, k) if self.exps else np.zeros((1, k), np.int64),
            np.array(self.coefs + [0j], dtype=np.complex128),
        )


class _MapBase:
    k: int

    @cached_property
    def program(self) -> Program:
        b = _ProgramBuilder(self.k)
        self._emit(b)
        return b.build()

    def _emit(self, b: _ProgramBuilder):  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, P):
        return evaluate(self, P)


@dataclass(frozen=True, eq=False)
class PolynomialMap(_MapBase):
    """``z -> (p_1(s z), ..., p_k(s z))`` with ``s = prescale`` (1 unless produced by scaling)."""

    components: tuple[Polynomial, ...]
    prescale: float = 1.0
    max_degree: int = DEFAULT_MAX_DEGREE

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise DimensionError("a map needs at least one component")
        k = comps[0].k
        if len(comps) != k or any(p.k != k for p in comps):
            raise DimensionError("a self-map of C^k needs k components in k variables")
        if self.degree > self.max_degree:
            raise DegreeOverflowError(f"degree {self.degree} exceeds the cap {self.max_degree}")
        if not self.prescale > 0:
            raise ValueError("prescale must be positive")

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        return max(p.degree for p in self.components)

    def expanded(self) -> "PolynomialMap":
        """Same map with the prescale folded into the coefficients."""
        if self.prescale == 1.0:
            return self
        return PolynomialMap(tuple(p.scaled_input(self.prescale) for p in self.components), 1.0, self.max_degree)

    def _emit(self, b):
        b.poly(self.components, self.prescale)

    def jacobian_batch(self, X: np.ndarray) -> np.ndarray:
        Y = X * self.prescale
        n, k = X.shape
        J = np.empty((n, k, k), np.complex128)
        for i, p in enumerate(self.components):
            for j in range(k):
                J[:, i, j] = p.derivative(j)(Y) * self.prescale
        return J


@dataclass(frozen=True, eq=False)
class Affine:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=np.complex128)
        b = np.array(self.b, dtype=np.complex128).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise DimensionError("affine factor needs a square A and matching b")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def k(self) -> int:
        return self.A.shape[0]

    def inverse(self) -> "Affine":
        k = self.k
        det = np.linalg.det(self.A)
        scale = max(np.linalg.norm(self.A, 2), 1e-300) ** k
        if not abs(det) > 1e-14 * scale:
            raise NonInvertibleError(f"affine factor with |det| = {abs(det):.3e} is not invertible")
        Ainv = np.linalg.inv(self.A)
        return Affine(Ainv, -Ainv @ self.b)

    def jacobian_batch(self, X):
        return np.broadcast_to(self.A, (X.shape[0], self.k, self.k)).copy()

    def as_components(self) -> list[Polynomial]:
        k = self.k
        comps = []
        for i in range(k):
            p = Polynomial.constant(k, self.b[i])
            for j in range(k):
                p = p + self.A[i, j] * Polynomial.variable(k, j)
            comps.append(p)
        return comps

    def is_scalar(self) -> Optional[complex]:
        """The scalar c when this factor is z -> c z, else None."""
        c = self.A[0, 0]
        if np.all(self.b == 0) and np.array_equal(self.A, c * np.eye(self.k)):
            return complex(c)
        return None


@dataclass(frozen=True, eq=False)
class Shear:
    """Adds ``poly`` (independent of coordinate ``axis``) to coordinate ``axis``."""

    axis: int
    poly: Polynomial

    def __post_init__(self):
        if not 0 <= self.axis < self.poly.k:
            raise DimensionError("shear axis out of range")
        if self.poly.depends_on(self.axis):
            raise NonInvertibleError("a shear polynomial may not involve its own axis")

    @property
    def k(self) -> int:
        return self.poly.k

    def inverse(self) -> "Shear":
        return Shear(self.axis, -self.poly)

    def jacobian_batch(self, X):
        n, k = X.shape
        J = np.broadcast_to(np.eye(k, dtype=np.complex128), (n, k, k)).copy()
        for j in range(k):
            if j != self.axis:
                J[:, self.axis, j] = self.poly.derivative(j)(X)
        return J

    def as_components(self) -> list[Polynomial]:
        k = self.k
        comps = [Polynomial.variable(k, i) for i in range(k)]
        comps[self.axis] = comps[self.axis] + self.poly
        return comps


@dataclass(frozen=True, eq=False)
class Permutation:
    """``out[i] = in[perm[i]]``; the two-coordinate swap is ``Permutation((1, 0))``."""

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"{perm} is not a permutation")
        object.__setattr__(self, "perm", perm)

    @property
    def k(self) -> int:
        return len(self.perm)

    def inverse(self) -> "Permutation":
        inv = [0] * self.k
        for i, p in enumerate(self.perm):
            inv[p] = i
        return Permutation(tuple(inv))

    def jacobian_batch(self, X):
        n, k = X.shape
        J = np.zeros((n, k, k), np.complex128)
        for i, p in enumerate(self.perm):
            J[:, i, p] = 1.0
        return J

    def as_components(self) -> list[Polynomial]:
        return [Polynomial.variable(self.k, p) for p in self.perm]


def Swap(k: int = 2, i: int = 0, j: int = 1) -> Permutation:
    perm = list(range(k))
    perm[i], perm[j] = perm[j], perm[i]
    return Permutation(tuple(perm))


Factor = Union[Affine, Shear, Permutation]


@dataclass(frozen=True, eq=False)
class AutomorphismChain(_MapBase):
    factors: tuple[Factor, ...]
    dim: Optional[int] = None

    def __post_init__(self):
        factors = tuple(self.factors)
        object.__setattr__(self, "factors", factors)
        if factors:
            k = factors[0].k
            if any(f.k != k for f in factors):
                raise DimensionError("all chain factors must act on the same C^k")
            if self.dim is not None and self.dim != k:
                raise DimensionError("dim disagrees with the factors")
            object.__setattr__(self, "dim", k)
        elif self.dim is None:
            raise DimensionError("an empty chain needs an explicit dim")
        for f in factors:
            if isinstance(f, Affine):
                f.inverse()  # raises on singular factors

    @property
    def k(self) -> int:
        return self.dim

    def _emit(self, b):
        for f in self.factors:
            if isinstance(f, Affine):
                b.affine(f.A, f.b)
            elif isinstance(f, Shear):
                b.shear(f.axis, f.poly)
            else:
                b.perm(f.perm)

    def jacobian_batch(self, X: np.ndarray) -> np.ndarray:
        n, k = X.shape
        J = np.broadcast_to(np.eye(k, dtype=np.complex128), (n, k, k)).copy()
        x = X
        for f in self.factors:
            J = f.jacobian_batch(x) @ J
            x = AutomorphismChain((f,)).__call__(x)
        return J


Map = Union[PolynomialMap, AutomorphismChain]


@dataclass(frozen=True)
class OrbitRecord:
    points: np.ndarray
    escaped_at: Optional[int]

    @property
    def escaped(self) -> bool:
        return self.escaped_at is not None


# ---------------------------------------------------------------------------
# constructors


def henon() -> AutomorphismChain:
    """The classical Henon automorphism ``(z, w) -> (z^2 + w, z)``.

    Stored as a shear ``(z, w) -> (z, w + z^2)`` followed by the swap, so the
    inverse ``(u, v) -> (v, u - v^2)`` is exact.
    """
    z = Polynomial.variable(2, 0)
    return AutomorphismChain((Shear(1, z * z), Swap(2)))


def identity_chain(k: int = 2) -> AutomorphismChain:
    return AutomorphismChain((), dim=k)


def linear_chain(A, b=None) -> AutomorphismChain:
    A = np.asarray(A, dtype=np.complex128)
    return AutomorphismChain((Affine(A, np.zeros(A.shape[0]) if b is None else b),))


def diagonal_chain(*entries) -> AutomorphismChain:
    return linear_chain(np.diag(np.asarray(entries, dtype=np.complex128)))


def rotation_chain(*angles: float) -> AutomorphismChain:
    return diagonal_chain(*[cmath.exp(1j * a) for a in angles])


# ---------------------------------------------------------------------------
# operations


def _points(f: Map, p) -> tuple[np.ndarray, bool]:
    P = np.asarray(p, dtype=np.complex128)
    single = P.ndim == 1
    X = np.ascontiguousarray(np.atleast_2d(P))
    if X.ndim != 2 or X.shape[1] != f.k:
        raise DimensionError(f"map acts on C^{f.k} but points have shape {P.shape}")
    return X, single


def evaluate(f: Map, p) -> np.ndarray:
    """Image of one point (shape (k,)) or a batch (shape (n, k))."""
    X, single = _points(f, p)
    Y = K.eval_batch(X, *f.program.args)
    return Y[0] if single else Y


def jacobian_batch(f: Map, X) -> np.ndarray:
    X, _ = _points(f, X)
    return f.jacobian_batch(X)


def jacobian(f: Map, p) -> np.ndarray:
    """Complex Jacobian matrix at ``p`` (exact derivatives of the sparse form)."""
    X, single = _points(f, p)
    J = f.jacobian_batch(X)
    return J[0] if single else J


def scale_map(f: Map, mu: float) -> Map:
    """``z -> f(mu z)``."""
    if not mu > 0:
        raise ValueError(f"scaling factor must be positive, got {mu}")
    if isinstance(f, AutomorphismChain):
        return AutomorphismChain((Affine(mu * np.eye(f.k), np.zeros(f.k)),) + f.factors, dim=f.k)
    return PolynomialMap(f.components, f.prescale * mu, f.max_degree)


def invert_chain(g: AutomorphismChain) -> AutomorphismChain:
    if not isinstance(g, AutomorphismChain):
        raise TypeError("only automorphism chains have closed-form inverses")
    return AutomorphismChain(tuple(f.inverse() for f in reversed(g.factors)), dim=g.k)


def as_polymap(f: Map, max_degree: int = DEFAULT_MAX_DEGREE) -> PolynomialMap:
    """Expand a chain (or fold the prescale of a polynomial map) into sparse form."""
    if isinstance(f, PolynomialMap):
        return f.expanded()
    k = f.k
    comps = [Polynomial.variable(k, i) for i in range(k)]
    for fac in f.factors:
        fac_comps = fac.as_components()
        bound = max(p.degree for p in fac_comps) * max(p.degree for p in comps)
        if bound > max_degree:
            raise DegreeOverflowError(f"expansion would reach degree {bound} > cap {max_degree}")
        comps = [p.substitute(comps).cleaned() for p in fac_comps]
    return PolynomialMap(tuple(comps), 1.0, max_degree)


def compose(f: Map, g: Map, max_degree: Optional[int] = None) -> Map:
    """``f o g`` (apply g first). Chains stay chains; anything else is expanded."""
    if f.k != g.k:
        raise DimensionError("cannot compose maps of different dimensions")
    if isinstance(f, AutomorphismChain) and isinstance(g, AutomorphismChain):
        return AutomorphismChain(g.factors + f.factors, dim=f.k)
    cap = max_degree or max(
        getattr(f, "max_degree", DEFAULT_MAX_DEGREE), getattr(g, "max_degree", DEFAULT_MAX_DEGREE)
    )
    fp = as_polymap(f, cap)
    gp = as_polymap(g, cap)
    if fp.degree * gp.degree > cap:
        raise DegreeOverflowError(f"composition degree {fp.degree * gp.degree} exceeds the cap {cap}")
    comps = tuple(p.substitute(gp.components).cleaned() for p in fp.components)
    return PolynomialMap(comps, 1.0, cap)


def power(f: Map, n: int) -> Map:
    if n < 0:
        raise ValueError("negative powers need invert_chain")
    if n == 0:
        return identity_chain(f.k) if isinstance(f, AutomorphismChain) else PolynomialMap(
            tuple(Polynomial.variable(f.k, i) for i in range(f.k))
        )
    out = f
    for _ in range(n - 1):
        out = compose(f, out)
    return out


def iterate(f: Map, p, n: int, escape_radius: float) -> OrbitRecord:
    """Orbit ``p, f(p), ..., f^n(p)``; stops at the first point with sup norm above the radius."""
    if n < 0 or not escape_radius > 0:
        raise ValueError("need n >= 0 and a positive escape radius")
    X, _ = _points(f, p)
    pts, esc = K.orbit(X[0], *f.program.args, int(n), float(escape_radius))
    return OrbitRecord(pts, None if esc < 0 else int(esc))


# ---------------------------------------------------------------------------
# literal parsing

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {
    "exp": cmath.exp,
    "sqrt": cmath.sqrt,
    "cos": cmath.cos,
    "sin": cmath.sin,
    "log": cmath.log,
}
_CONSTS = {"pi": math.pi, "e": math.e, "i": 1j, "I": 1j}


def _eval_node(node, names: Mapping[str, object]):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        return node.value
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        left = _eval_node(node.left, names)
        right = _eval_node(node.right, names)
        if isinstance(node.op, ast.Pow) and isinstance(left, Polynomial):
            if isinstance(right, complex) or int(right.real if isinstance(right, complex) else right) != right:
                raise MapParseError("polynomial exponents must be nonnegative integers")
            return left ** int(right)
        return _BINOPS[type(node.op)](left, right)
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval_node(node.operand, names))
    if isinstance(node, ast.Name):
        if node.id in names:
            return names[node.id]
        if node.id in _CONSTS:
            return _CONSTS[node.id]
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        if len(node.args) != 1 or node.keywords:
            raise MapParseError(f"{node.func.id} takes one argument")
        return _FUNCS[node.func.id](_eval_node(node.args[0], names))
    if isinstance(node, (ast.List, ast.Tuple)):
        return [_eval_node(e, names) for e in node.elts]
    raise MapParseError(f"unsupported expression: {ast.dump(node)[:60]}")


def parse_number(text: str):
    """Evaluate a numeric literal such as ``0.5``, ``exp(1j)`` or ``[[0,1],[1,0]]``."""
    try:
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise MapParseError(f"cannot parse number {text!r}: {exc.msg}") from None
    return _eval_node(tree, {})


def _var_names(k: int) -> dict[str, Polynomial]:
    names = {f"z{i + 1}": Polynomial.variable(k, i) for i in range(k)}
    if k == 2:
        names.update(z=Polynomial.variable(2, 0), w=Polynomial.variable(2, 1))
    elif k == 1:
        names.update(z=Polynomial.variable(1, 0))
    return names


def parse_polynomial(text: str, k: int = 2) -> Polynomial:
    try:
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise MapParseError(f"cannot parse polynomial {text!r}: {exc.msg}") from None
    val = _eval_node(tree, _var_names(k))
    return val if isinstance(val, Polynomial) else Polynomial.constant(k, val)


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def _kv(text: str) -> dict[str, str]:
    out = {}
    for chunk in _split_top(text, " "):
        if "=" not in chunk:
            raise MapParseError(f"expected key=value, got {chunk!r}")
        key, val = chunk.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _parse_factor(text: str, k: int) -> Factor:
    head, _, rest = text.strip().partition(" ")
    head = head.lower()
    if head == "swap":
        args = _kv(rest) if rest.strip() else {}
        return Swap(k, int(args.get("i", 0)), int(args.get("j", 1)))
    if head == "perm":
        return Permutation(tuple(int(x) for x in parse_number(_kv(rest)["p"])))
    if head == "shear":
        args = _kv(rest)
        return Shear(int(args["axis"]), parse_polynomial(args["poly"], k))
    if head == "affine":
        args = _kv(rest)
        A = np.asarray(parse_number(args["A"]), dtype=np.complex128)
        b = np.asarray(parse_number(args["b"]), dtype=np.complex128) if "b" in args else np.zeros(k)
        return Affine(A, b)
    if head == "scale":
        return Affine(complex(parse_number(rest)) * np.eye(k), np.zeros(k))
    raise MapParseError(f"unknown chain factor {head!r}")


def parse_map(text: str, k: int = 2) -> Map:
    """Parse a map literal.

    Grammar (whitespace-insensitive around ``:`` and ``;``)::

        henon
        identity
        linear: [[a, b], [c, d]]
        diag: a, b
        rotation: theta1, theta2           # diag(exp(i theta1), exp(i theta2))
        scale: c                           # z -> c z
        poly: z^2 + w, z                   # PolynomialMap, variables z, w (or z1..zk)
        chain: shear axis=1 poly=z^2; swap # factors applied left to right
        henon^2, chain: ...^3              # trailing ^n composes n copies

    Numbers accept complex literals (``1j``) and ``exp``, ``sqrt``, ``cos``,
    ``sin``, ``log``, ``pi``.
    """
    text = text.strip()
    if not text:
        raise MapParseError("empty map literal")
    head, sep, body = text.partition(":")
    n_pow = 1
    target = body if sep else head
    # trailing "^n" outside any bracket applies to the whole literal
    stripped = target.rstrip()
    if "^" in stripped:
        base, _, tail = stripped.rpartition("^")
        if tail.strip().isdigit() and base.count("[") == base.count("]") and base.count("(") == base.count(")"):
            if not sep or head.strip().lower() != "poly":
                n_pow = int(tail)
                target = base
    kind = (head if sep else target).strip().lower()
    try:
        if not sep:
            if kind == "henon":
                f: Map = henon()
            elif kind == "identity":
                f = identity_chain(k)
            else:
                raise MapParseError(f"unknown map literal {text!r}")
        elif kind == "linear":
            f = linear_chain(np.asarray(parse_number(target), dtype=np.complex128))
        elif kind == "diag":
            f = diagonal_chain(*[complex(parse_number(x)) for x in _split_top(target, ",")])
        elif kind == "rotation":
            f = rotation_chain(*[float(np.real(parse_number(x))) for x in _split_top(target, ",")])
        elif kind == "scale":
            f = linear_chain(complex(parse_number(target)) * np.eye(k))
        elif kind == "poly":
            comps = _split_top(target, ",")
            kk = len(comps)
            f = PolynomialMap(tuple(parse_polynomial(c, kk) for c in comps))
        elif kind == "chain":
            facs = _split_top(target, ";")
            if not facs:
                raise MapParseError("empty chain")
            first_k = k
            f = AutomorphismChain(tuple(_parse_factor(x, first_k) for x in facs))
        else:
            raise MapParseError(f"unknown map kind {kind!r}")
    except MapParseError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise MapParseError(f"invalid map literal {text!r}: {exc}") from None
    return power(f, n_pow) if n_pow != 1 else f
