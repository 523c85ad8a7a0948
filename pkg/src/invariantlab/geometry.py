"""Small complex linear algebra: points of C^k, 2x2 spectra, singular values, rank.

Points are plain ``numpy`` complex arrays of shape ``(k,)`` and matrices are
``(k, k)`` complex arrays. Nothing here allocates more than a few scalars, so
all functions are safe to call from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "InvalidInputError",
    "Spectrum",
    "cvec",
    "cmatrix",
    "eigenvalues_2x2",
    "singular_values",
    "numerical_rank",
    "sup_norm",
]

_TIE_RTOL = 1e-12
_JACOBI_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when an operation receives an object of the wrong dimension."""


class InvalidInputError(ValueError):
    """Raised on non-finite or otherwise malformed numeric input."""


def cvec(*coords) -> np.ndarray:
    """Build a point of C^k from scalars (or a single iterable)."""
    if len(coords) == 1 and np.ndim(coords[0]) == 1:
        coords = tuple(coords[0])
    v = np.asarray(coords, dtype=np.complex128)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError("a point needs k >= 1 coordinates")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"non-finite coordinates in {v!r}")
    return v


def cmatrix(entries) -> np.ndarray:
    m = np.asarray(entries, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("non-finite matrix entries")
    return m


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: tuple[complex, ...]
    moduli: tuple[float, ...]

    @classmethod
    def from_values(cls, values) -> "Spectrum":
        vals = tuple(complex(v) for v in values)
        return cls(vals, tuple(abs(v) for v in vals))


def _canonical_order(values: list[complex]) -> list[complex]:
    # descending modulus; near-ties broken by ascending argument in (-pi, pi]
    def arg(v: complex) -> float:
        a = math.atan2(v.imag, v.real)
        return math.pi if a == -math.pi else a

    out = sorted(values, key=lambda v: -abs(v))
    i = 0
    while i < len(out):
        j = i + 1
        while j < len(out) and abs(abs(out[j]) - abs(out[i])) <= _TIE_RTOL * max(1.0, abs(out[i])):
            j += 1
        out[i:j] = sorted(out[i:j], key=arg)
        i = j
    return out


def eigenvalues_2x2(m) -> Spectrum:
    """Eigenvalues of a 2x2 complex matrix via the stable quadratic formula.

    The larger root is formed without cancellation and the smaller one is
    recovered from the determinant, so tiny eigenvalues keep full relative
    accuracy.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.shape != (2, 2):
        raise DimensionError(f"eigenvalues_2x2 needs a 2x2 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("non-finite matrix entries")
    a, b, c, d = (complex(x) for x in m.ravel())
    half_tr = 0.5 * (a + d)
    det = a * d - b * c
    # (a-d)^2/4 + bc avoids forming tr^2/4 - det when the roots nearly coincide
    disc = np.sqrt(complex(0.25 * (a - d) ** 2 + b * c))
    q = half_tr + disc if abs(half_tr + disc) >= abs(half_tr - disc) else half_tr - disc
    if q == 0:
        lam1 = lam2 = 0j
    else:
        lam1 = complex(q)
        lam2 = complex(det / q)
    return Spectrum.from_values(_canonical_order([lam1, lam2]))


def _singular_values_2x2(m: np.ndarray) -> np.ndarray:
    a = abs(m[0, 0]) ** 2 + abs(m[1, 0]) ** 2
    d = abs(m[0, 1]) ** 2 + abs(m[1, 1]) ** 2
    b = np.conj(m[0, 0]) * m[0, 1] + np.conj(m[1, 0]) * m[1, 1]
    big = 0.5 * (a + d) + math.hypot(0.5 * (a - d), abs(b))
    s_max = math.sqrt(max(big, 0.0))
    if s_max == 0.0:
        return np.zeros(2)
    s_min = abs(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]) / s_max
    return np.array([s_max, min(s_min, s_max)])


def _singular_values_jacobi(m: np.ndarray) -> np.ndarray:
    # one-sided cyclic Jacobi on the columns of m
    u = m.astype(np.complex128, copy=True)
    k = u.shape[1]
    for _sweep in range(100):
        rotated = False
        for p in range(k - 1):
            for q in range(p + 1, k):
                alpha = np.vdot(u[:, p], u[:, p]).real
                beta = np.vdot(u[:, q], u[:, q]).real
                gamma = np.vdot(u[:, p], u[:, q])
                if abs(gamma) <= _JACOBI_TOL * math.sqrt(alpha * beta) or abs(gamma) == 0.0:
                    continue
                rotated = True
                phase = gamma / abs(gamma)
                zeta = (beta - alpha) / (2.0 * abs(gamma))
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                up = u[:, p].copy()
                uq = u[:, q] * np.conj(phase)
                u[:, p] = c * up - s * uq
                u[:, q] = (s * up + c * uq) * phase
        if not rotated:
            break
    return np.sort(np.linalg.norm(u, axis=0))[::-1]


def singular_values(m) -> np.ndarray:
    """Singular values in descending order (closed form for 2x2, Jacobi above)."""
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("non-finite matrix entries")
    if m.shape == (1, 1):
        return np.array([abs(m[0, 0])])
    if m.shape == (2, 2):
        return _singular_values_2x2(m)
    return _singular_values_jacobi(m)


def numerical_rank(m, tol: float) -> int:
    """Number of singular values above ``tol`` times the largest one.

    When the largest singular value itself is ``<= tol`` the rank is 0, so the
    tolerance acts as an absolute floor for nearly vanishing matrices.
    """
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    s = singular_values(m)
    if s[0] <= tol:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def sup_norm(v) -> float:
    v = np.asarray(v)
    return float(np.max(np.abs(v), axis=-1)) if v.ndim == 1 else np.max(np.abs(v), axis=-1)
