"""Compiled inner loops.

Maps are lowered to a flat *program* (see ``maps.Program``) that a single
numba interpreter executes. Every batch kernel treats samples independently,
so results do not depend on the number of worker threads.

Program layout
--------------
ops    int64 (F, 4)   one row per factor: (opcode, a, b, c)
         OP_AFFINE  a = offset into cpar of A (row major, k*k) followed by b (k)
         OP_SHEAR   a = axis, b:c = term range in exps/coefs
         OP_PERM    a = offset into ipar of the permutation (out[i] = in[perm[i]])
         OP_POLY    a = offset into ipar of k+1 term-range bounds, b = offset of prescale in cpar
cpar   complex128
ipar   int64
exps   int64 (T, k)
coefs  complex128 (T,)
"""

from __future__ import annotations

import numpy as np
from numba import config, njit, prange

# prefer OpenMP/workqueue over an outdated system TBB
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

OP_AFFINE = 0
OP_SHEAR = 1
OP_PERM = 2
OP_POLY = 3

GAUGE_BALL = 0
GAUGE_POLYDISC = 1


@njit(cache=True)
def _monomial(x, exps, t):
    v = 1.0 + 0.0j
    for i in range(x.shape[0]):
        for _ in range(exps[t, i]):
            v = v * x[i]
    return v


@njit(cache=True)
def apply_program(x, out, tmp, ops, cpar, ipar, exps, coefs):
    """Apply the program to ``x``; result in ``out``. ``tmp`` is scratch of size k."""
    k = x.shape[0]
    for i in range(k):
        out[i] = x[i]
    for f in range(ops.shape[0]):
        code = ops[f, 0]
        if code == OP_AFFINE:
            off = ops[f, 1]
            for i in range(k):
                acc = 0.0 + 0.0j
                for j in range(k):
                    acc += cpar[off + i * k + j] * out[j]
                tmp[i] = acc + cpar[off + k * k + i]
            for i in range(k):
                out[i] = tmp[i]
        elif code == OP_SHEAR:
            axis = ops[f, 1]
            acc = 0.0 + 0.0j
            for t in range(ops[f, 2], ops[f, 3]):
                acc += coefs[t] * _monomial(out, exps, t)
            out[axis] = out[axis] + acc
        elif code == OP_PERM:
            off = ops[f, 1]
            for i in range(k):
                tmp[i] = out[ipar[off + i]]
            for i in range(k):
                out[i] = tmp[i]
        else:
            off = ops[f, 1]
            s = cpar[ops[f, 2]]
            for i in range(k):
                out[i] = out[i] * s
            for i in range(k):
                acc = 0.0 + 0.0j
                for t in range(ipar[off + i], ipar[off + i + 1]):
                    acc += coefs[t] * _monomial(out, exps, t)
                tmp[i] = acc
            for i in range(k):
                out[i] = tmp[i]


@njit(cache=True)
def _sup(x):
    m = 0.0
    for i in range(x.shape[0]):
        a = abs(x[i])
        if a > m or a != a:
            m = a if a == a else np.inf
    return m


@njit(cache=True)
def _gauge(x, kind, center, radii):
    if kind == GAUGE_BALL:
        s = 0.0
        for i in range(x.shape[0]):
            d = x[i] - center[i]
            s += d.real * d.real + d.imag * d.imag
        g = np.sqrt(s) / radii[0]
    else:
        g = 0.0
        for i in range(x.shape[0]):
            a = abs(x[i] - center[i]) / radii[i]
            if a > g:
                g = a
    if g != g:
        return np.inf
    return g


@njit(cache=True, parallel=True)
def eval_batch(P, ops, cpar, ipar, exps, coefs):
    n, k = P.shape
    Q = np.empty_like(P)
    for s in prange(n):
        out = np.empty(k, np.complex128)
        tmp = np.empty(k, np.complex128)
        apply_program(P[s], out, tmp, ops, cpar, ipar, exps, coefs)
        Q[s] = out
    return Q


@njit(cache=True, parallel=True)
def escape_steps(P, ops, cpar, ipar, exps, coefs, nmax, radius):
    """First step at which the sup norm exceeds ``radius``; -1 if none up to nmax."""
    n, k = P.shape
    steps = np.full(n, -1, np.int64)
    for s in prange(n):
        x = P[s].copy()
        out = np.empty(k, np.complex128)
        tmp = np.empty(k, np.complex128)
        for j in range(1, nmax + 1):
            apply_program(x, out, tmp, ops, cpar, ipar, exps, coefs)
            for i in range(k):
                x[i] = out[i]
            if not _sup(x) <= radius:
                steps[s] = j
                break
    return steps


@njit(cache=True, parallel=True)
def iterate_batch(P, ops, cpar, ipar, exps, coefs, n_steps, radius):
    """Apply the program ``n_steps`` times; stops per sample on escape.

    Returns the final points and the escape step (-1 when the orbit stayed
    within ``radius``); escaped samples keep their first out-of-radius point.
    """
    n, k = P.shape
    Q = P.copy()
    steps = np.full(n, -1, np.int64)
    for s in prange(n):
        x = P[s].copy()
        out = np.empty(k, np.complex128)
        tmp = np.empty(k, np.complex128)
        for j in range(1, n_steps + 1):
            apply_program(x, out, tmp, ops, cpar, ipar, exps, coefs)
            for i in range(k):
                x[i] = out[i]
            if not _sup(x) <= radius:
                steps[s] = j
                break
        Q[s] = x
    return Q, steps


@njit(cache=True)
def orbit(p, ops, cpar, ipar, exps, coefs, n_steps, radius):
    k = p.shape[0]
    pts = np.empty((n_steps + 1, k), np.complex128)
    pts[0] = p
    out = np.empty(k, np.complex128)
    tmp = np.empty(k, np.complex128)
    for j in range(1, n_steps + 1):
        apply_program(pts[j - 1], out, tmp, ops, cpar, ipar, exps, coefs)
        pts[j] = out
        if not _sup(out) <= radius:
            return pts[: j + 1], j
    return pts, -1


@njit(cache=True, parallel=True)
def exit_levels(S, ops, cpar, ipar, exps, coefs, nmax, kind, center, radii, limit):
    """Level at which the iterated image first has gauge > ``limit`` (nmax+1 if never)."""
    n, k = S.shape
    lev = np.full(n, nmax + 1, np.int64)
    for s in prange(n):
        x = S[s].copy()
        out = np.empty(k, np.complex128)
        tmp = np.empty(k, np.complex128)
        for j in range(1, nmax + 1):
            apply_program(x, out, tmp, ops, cpar, ipar, exps, coefs)
            for i in range(k):
                x[i] = out[i]
            if not _gauge(x, kind, center, radii) <= limit:
                lev[s] = j
                break
    return lev


@njit(cache=True, parallel=True)
def gauge_after(S, ops, cpar, ipar, exps, coefs, n_steps, kind, center, radii):
    """Gauge of the ``n_steps``-fold image of each sample (inf on blow-up)."""
    n, k = S.shape
    g = np.empty(n)
    for s in prange(n):
        x = S[s].copy()
        out = np.empty(k, np.complex128)
        tmp = np.empty(k, np.complex128)
        blown = False
        for j in range(n_steps):
            apply_program(x, out, tmp, ops, cpar, ipar, exps, coefs)
            for i in range(k):
                x[i] = out[i]
            if not _sup(x) <= 1e150:
                blown = True
                break
        g[s] = np.inf if blown else _gauge(x, kind, center, radii)
    return g


@njit(cache=True, parallel=True)
def orbit_levels(S, ops, cpar, ipar, exps, coefs, n_steps):
    """All iterates 0..n_steps of every sample, shape (n, n_steps+1, k)."""
    n, k = S.shape
    L = np.empty((n, n_steps + 1, k), np.complex128)
    for s in prange(n):
        out = np.empty(k, np.complex128)
        tmp = np.empty(k, np.complex128)
        L[s, 0] = S[s]
        for j in range(1, n_steps + 1):
            apply_program(L[s, j - 1], out, tmp, ops, cpar, ipar, exps, coefs)
            L[s, j] = out
    return L


@njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def cell_components(X, cell_of, cell_start, cell_keys, offsets, dims, eps):
    """Union-find over grid cells; returns the number of eps-connected components.

    ``X`` real coordinates sorted by cell, ``cell_of`` the cell id of each point,
    ``cell_start`` CSR bounds, ``cell_keys`` sorted linear keys of occupied
    cells, ``offsets`` linear key offsets of the neighbour stencil and
    ``dims`` the per-axis extent used for key decoding of axis bounds.
    """
    ncell = cell_keys.shape[0]
    parent = np.arange(ncell)
    eps2 = eps * eps
    d = X.shape[1]
    for c in range(ncell):
        key = cell_keys[c]
        for o in range(offsets.shape[0]):
            nk = key + offsets[o, 0]
            # reject offsets that wrap around an axis
            ok = True
            rem = key
            for ax in range(d - 1, -1, -1):
                coord = rem % dims[ax]
                rem = rem // dims[ax]
                nc = coord + offsets[o, 1 + ax]
                if nc < 0 or nc >= dims[ax]:
                    ok = False
                    break
            if not ok or nk <= key:
                continue
            lo = 0
            hi = ncell
            while lo < hi:
                mid = (lo + hi) // 2
                if cell_keys[mid] < nk:
                    lo = mid + 1
                else:
                    hi = mid
            if lo >= ncell or cell_keys[lo] != nk:
                continue
            c2 = lo
            r1 = _find(parent, c)
            r2 = _find(parent, c2)
            if r1 == r2:
                continue
            linked = False
            for a in range(cell_start[c], cell_start[c + 1]):
                for b in range(cell_start[c2], cell_start[c2 + 1]):
                    s = 0.0
                    for t in range(d):
                        diff = X[a, t] - X[b, t]
                        s += diff * diff
                    if s <= eps2:
                        linked = True
                        break
                if linked:
                    break
            if linked:
                parent[r2] = r1
    count = 0
    for c in range(ncell):
        if _find(parent, c) == c:
            count += 1
    return count


@njit(cache=True, parallel=True)
def orbit_select(S, ops, cpar, ipar, exps, coefs, keep):
    """Iterates of every sample at the sorted levels in ``keep``, shape (n, len(keep), k)."""
    n, k = S.shape
    L = keep.shape[0]
    out_all = np.empty((n, L, k), np.complex128)
    for s in prange(n):
        x = S[s].copy()
        out = np.empty(k, np.complex128)
        tmp = np.empty(k, np.complex128)
        j = 0
        idx = 0
        while idx < L and keep[idx] == 0:
            out_all[s, idx] = x
            idx += 1
        while idx < L:
            apply_program(x, out, tmp, ops, cpar, ipar, exps, coefs)
            for i in range(k):
                x[i] = out[i]
            j += 1
            while idx < L and keep[idx] == j:
                out_all[s, idx] = x
                idx += 1
    return out_all


@njit(cache=True, parallel=True)
def return_counts(P, ops, cpar, ipar, exps, coefs, nmax, delta, radius):
    """Number of n in 1..nmax with |f^n(p) - p| <= delta; -1 for escaping samples."""
    n, k = P.shape
    counts = np.zeros(n, np.int64)
    d2 = delta * delta
    for s in prange(n):
        x = P[s].copy()
        out = np.empty(k, np.complex128)
        tmp = np.empty(k, np.complex128)
        c = 0
        for j in range(1, nmax + 1):
            apply_program(x, out, tmp, ops, cpar, ipar, exps, coefs)
            for i in range(k):
                x[i] = out[i]
            if not _sup(x) <= radius:
                c = -1
                break
            acc = 0.0
            for i in range(k):
                dz = x[i] - P[s, i]
                acc += dz.real * dz.real + dz.imag * dz.imag
            if acc <= d2:
                c += 1
        counts[s] = c
    return counts


@njit(cache=True, parallel=True)
def return_times(P, ops, cpar, ipar, exps, coefs, nmax, delta, offsets):
    """Fill the return times of each sample into a flat array at the given CSR offsets."""
    n, k = P.shape
    flat = np.empty(offsets[n], np.int64)
    d2 = delta * delta
    for s in prange(n):
        if offsets[s + 1] == offsets[s]:
            continue
        x = P[s].copy()
        out = np.empty(k, np.complex128)
        tmp = np.empty(k, np.complex128)
        pos = offsets[s]
        for j in range(1, nmax + 1):
            apply_program(x, out, tmp, ops, cpar, ipar, exps, coefs)
            for i in range(k):
                x[i] = out[i]
            acc = 0.0
            for i in range(k):
                dz = x[i] - P[s, i]
                acc += dz.real * dz.real + dz.imag * dz.imag
            if acc <= d2:
                flat[pos] = j
                pos += 1
                if pos == offsets[s + 1]:
                    break
    return flat
