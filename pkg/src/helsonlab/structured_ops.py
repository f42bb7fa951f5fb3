"""Finite Hankel and multiplicative-Hankel truncations with fast matvecs.

A Hankel section {b(j+k)} multiplies a vector in O(N log N) through a
circulant embedding; the multiplicative analogue {a(jk)} has no such
structure and streams rows in O(N^2) time with O(N) memory.  Both are
wrapped in the same LinearMap so the eigensolver does not care which
one it is driving.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from helsonlab.symbols import (DomainError, SequenceSpec, SymbolSpec,
                               _weight_of, _weight_rule, sequence_values)

# rows per evaluation block in the streaming multiplicative matvec;
# keeps the working set at ~64 rows regardless of N
_BLOCK_BUDGET = 1 << 18


@dataclass(frozen=True)
class LinearMap:
    """Matrix-free linear operator with explicit shape and symmetry flag."""

    rows: int
    cols: int
    symmetric: bool
    matvec: Callable
    description: str = ""

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("map shape must be positive")

    def apply(self, u):
        u = np.asarray(u)
        if u.shape != (self.cols,):
            raise ValueError(f"expected a length-{self.cols} vector, got {u.shape}")
        out = np.asarray(self.matvec(u))
        if out.shape != (self.rows,):
            raise ValueError("matvec returned a wrong-shaped vector")
        return out

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "cols": self.cols,
                           "symmetric": self.symmetric,
                           "description": self.description})


def dense_matrix(lm: LinearMap, max_size: int = 4096) -> np.ndarray:
    """Materialize the map column-by-column (test oracle / export path)."""
    if max(lm.rows, lm.cols) > max_size:
        raise ValueError(f"refusing to densify beyond {max_size}")
    probe = lm.apply(np.zeros(lm.cols))
    out = np.zeros((lm.rows, lm.cols), dtype=probe.dtype)
    e = np.zeros(lm.cols)
    for k in range(lm.cols):
        e[k] = 1.0
        col = lm.apply(e)
        if col.dtype != out.dtype:
            out = out.astype(np.result_type(out.dtype, col.dtype))
        out[:, k] = col
        e[k] = 0.0
    return out


def write_csv_matrix(M, path) -> None:
    """Row-major CSV dump at full double precision."""
    M = np.asarray(M)
    if np.iscomplexobj(M):
        raise TypeError("CSV export is defined for real matrices")
    np.savetxt(path, np.atleast_2d(M), fmt="%.17g", delimiter=",")


def probe_linearity(lm: LinearMap, rng, n_probes: int = 3) -> float:
    """Max relative defect of matvec(au+bv) - a matvec(u) - b matvec(v)."""
    worst = 0.0
    for _ in range(n_probes):
        u = rng.standard_normal(lm.cols)
        v = rng.standard_normal(lm.cols)
        a, b = rng.standard_normal(2)
        lhs = lm.apply(a * u + b * v)
        rhs = a * lm.apply(u) + b * lm.apply(v)
        scale = max(float(np.linalg.norm(lhs)), 1e-300)
        worst = max(worst, float(np.linalg.norm(lhs - rhs)) / scale)
    return worst


def probe_symmetry(lm: LinearMap, rng, n_probes: int = 3) -> float:
    """Max relative defect of <Au, v> - <u, Av> on random real probes."""
    if lm.rows != lm.cols:
        raise ValueError("symmetry probe needs a square map")
    worst = 0.0
    for _ in range(n_probes):
        u = rng.standard_normal(lm.cols)
        v = rng.standard_normal(lm.cols)
        lhs = float(lm.apply(u) @ v)
        rhs = float(u @ lm.apply(v))
        scale = max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


# ---------------------------------------------------------------------------
# additive structure: H(b) = {b(j+k)}


@dataclass(eq=False)
class HankelTruncation:
    """N x N section entry(j,k) = b_values[j+k], 0-indexed, from 2N-1 values."""

    b_values: np.ndarray
    _plan: Optional[tuple] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        b = np.asarray(self.b_values, dtype=float)
        if b.ndim != 1 or b.size % 2 == 0 or b.size < 1:
            raise ValueError("need an odd number 2N-1 of symbol values")
        self.b_values = b

    @property
    def N(self) -> int:
        return (self.b_values.size + 1) // 2

    def entry(self, j: int, k: int) -> float:
        N = self.N
        if not (0 <= j < N and 0 <= k < N):
            raise IndexError("entry index out of range")
        return float(self.b_values[j + k])

    def dense(self) -> np.ndarray:
        N = self.N
        idx = np.arange(N)
        return self.b_values[idx[:, None] + idx[None, :]]

    def _fft_plan(self):
        # circulant embedding: M = next power of two >= 2N, first column
        # c[0:N] = b[N-1:], wrap c[M-k] = b[N-1-k]
        if self._plan is None:
            N = self.N
            M = 1 << int(np.ceil(np.log2(max(2 * N, 2))))
            c = np.zeros(M)
            c[:N] = self.b_values[N - 1:]
            if N > 1:
                c[M - N + 1:] = self.b_values[:N - 1]
            self._plan = (M, np.fft.rfft(c))
        return self._plan


def hankel_matvec_fft(H: HankelTruncation, u):
    """y_j = sum_k b(j+k) u_k via one cyclic convolution, O(N log N)."""
    N = H.N
    u = np.asarray(u)
    if u.shape != (N,):
        raise ValueError(f"expected a length-{N} vector, got {u.shape}")
    if np.iscomplexobj(u):
        return hankel_matvec_fft(H, u.real) + 1j * hankel_matvec_fft(H, u.imag)
    M, Fc = H._fft_plan()
    x = np.zeros(M)
    x[:N] = u[::-1]
    y = np.fft.irfft(Fc * np.fft.rfft(x), n=M)
    return y[:N]


def build_hankel(b) -> LinearMap:
    """Symmetric N x N map entry(j,k) = b(j+k) from 2N-1 symbol values."""
    H = HankelTruncation(np.asarray(b, dtype=float))
    H._fft_plan()
    return LinearMap(rows=H.N, cols=H.N, symmetric=True,
                     matvec=lambda u: hankel_matvec_fft(H, u),
                     description=f"hankel section N={H.N} (fft matvec)")


# ---------------------------------------------------------------------------
# multiplicative structure: M(a) = {a(jk)}


def _product_contract(a, N: int) -> Callable:
    """Vectorized n -> a(n) for integer n <= N^2, from any accepted form."""
    if isinstance(a, SymbolSpec):
        return lambda n: sequence_values(a, n)
    if isinstance(a, SequenceSpec):
        if a.length < N * N:
            raise ValueError(
                f"sequence of length {a.length} cannot fill an N={N} section "
                f"(needs {N * N} values)")
        vals = np.asarray(a.values, dtype=float)
        return lambda n: vals[np.asarray(n) - 1]
    if callable(a):
        return lambda n: np.asarray(a(np.asarray(n)), dtype=float)
    raise TypeError("a must be a SymbolSpec, SequenceSpec, or callable")


@dataclass(eq=False)
class HelsonTruncation:
    """N x N section entry(j,k) = a(jk), indices 1-based in the symbol."""

    a: Union[SymbolSpec, SequenceSpec, Callable]
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        self._fetch = _product_contract(self.a, self.N)
        # spec'd memo: a(n) for n <= N, shared by every row
        self._head = np.asarray(self._fetch(np.arange(1, self.N + 1)), dtype=float)

    def _row_block(self, j_lo: int, j_hi: int) -> np.ndarray:
        """Rows j_lo..j_hi-1 (0-based) as a dense block."""
        k = np.arange(1, self.N + 1)
        j = np.arange(j_lo + 1, j_hi + 1)
        prod = j[:, None] * k[None, :]
        out = np.empty(prod.shape)
        small = prod <= self.N
        out[small] = self._head[prod[small] - 1]
        big = ~small
        if np.any(big):
            try:
                out[big] = self._fetch(prod[big])
            except DomainError as exc:
                raise DomainError(
                    f"symbol evaluation failed in rows {j_lo + 1}..{j_hi}: {exc}"
                ) from exc
        return out

    def entry(self, j: int, k: int) -> float:
        if not (1 <= j <= self.N and 1 <= k <= self.N):
            raise IndexError("entry index out of range (1-based)")
        n = j * k
        if n <= self.N:
            return float(self._head[n - 1])
        return float(self._fetch(np.array([n]))[0])

    def dense(self, max_size: int = 4096) -> np.ndarray:
        if self.N > max_size:
            raise ValueError(f"refusing to densify beyond {max_size}")
        return self._row_block(0, self.N)

    def matvec(self, u):
        u = np.asarray(u)
        if u.shape != (self.N,):
            raise ValueError(f"expected a length-{self.N} vector, got {u.shape}")
        out = np.empty(self.N, dtype=np.result_type(float, u.dtype))
        step = max(1, _BLOCK_BUDGET // self.N)
        for j_lo in range(0, self.N, step):
            j_hi = min(j_lo + step, self.N)
            out[j_lo:j_hi] = self._row_block(j_lo, j_hi) @ u
        return out


def build_helson(a, N: int) -> LinearMap:
    """Symmetric N x N map entry(j,k) = a(jk), streaming O(N^2) matvec."""
    T = HelsonTruncation(a, N)
    return LinearMap(rows=N, cols=N, symmetric=True, matvec=T.matvec,
                     description=f"multiplicative section N={N} (streamed matvec)")


def build_smooth_helson(spec: SymbolSpec, N: int, Q: int = 2000) -> LinearMap:
    """Matrix-free Gram section of the smooth part: entry(j,k) = a0(jk).

    Holds the factored form E E^T with E_jq = j^(-1/2-l_q) sqrt(rho_q)
    over the same cached quadrature rule as the scalar smooth-part
    values, so entries agree with those to rounding while a matvec costs
    two thin GEMVs instead of re-integrating N^2 products.  Positive
    semidefinite by construction (the genuine value at every product,
    including jk = 1, is what makes the factorization close).
    """
    if N < 1:
        raise ValueError("N must be positive")
    lam, rho = _weight_rule(_weight_of(spec), Q)
    if np.any(rho < 0):
        raise ValueError("weight rule produced negative masses")
    j = np.arange(1, N + 1, dtype=float)
    E = np.exp(np.multiply.outer(-np.log(j), lam))
    E *= (np.sqrt(rho)[None, :] / np.sqrt(j)[:, None])

    def mv(u):
        u = np.asarray(u)
        if u.shape != (N,):
            raise ValueError(f"expected a length-{N} vector, got {u.shape}")
        return E @ (E.T @ u)

    return LinearMap(rows=N, cols=N, symmetric=True, matvec=mv,
                     description=f"smooth multiplicative section N={N} "
                                 f"(Gram factor, {lam.size} nodes)")


# ---------------------------------------------------------------------------


def rank_one_dirichlet(N: int, xi: float) -> LinearMap:
    """Rank-one map with entries (jk)^(-1/2 + 2 pi i xi).

    The outer product is bilinear (v v^T, no conjugate), matching the
    entrywise power law; its only nonzero singular value is the harmonic
    sum of 1/j over j <= N regardless of xi.
    """
    if N < 1:
        raise ValueError("N must be positive")
    j = np.arange(1, N + 1, dtype=float)
    v = j ** -0.5 * np.exp(2j * np.pi * xi * np.log(j))

    def mv(u):
        u = np.asarray(u)
        if u.shape != (N,):
            raise ValueError(f"expected a length-{N} vector, got {u.shape}")
        return v * (v @ u)

    return LinearMap(rows=N, cols=N, symmetric=False, matvec=mv,
                     description=f"rank-one dirichlet section N={N} xi={xi:g}")
