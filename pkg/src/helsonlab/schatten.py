"""Schatten functionals, the dyadic trace-class estimator, sampling checks.

Singular-value functionals are computed exactly from their defining
sums.  The dyadic estimator realizes the window as a difference of
shifted smoothstep ramps in log2, which makes the partition of unity
telescope to 1 exactly instead of relying on numerical normalization.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from helsonlab.structured_ops import LinearMap, dense_matrix, rank_one_dirichlet
from helsonlab.symbols import smoothstep


def _check_singular(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim != 1:
        raise ValueError("singular values must be a 1-d sequence")
    if s.size and (np.any(s < 0) or np.any(np.diff(s) > 1e-12 * max(1.0, s[0]))):
        raise ValueError("singular values must be non-increasing and >= 0")
    return s


def schatten_norm(s, p: float) -> float:
    """(sum s_n^p)^(1/p)."""
    if not p > 0:
        raise ValueError("p must be positive")
    s = _check_singular(s)
    if s.size == 0:
        return 0.0
    return float(np.sum(s**p) ** (1.0 / p))


def schatten_lorentz_norm(s, p: float, q: float) -> float:
    """Lorentz-scale functional; q = inf gives the weak norm sup (1+n)^(1/p) s_n.

    Indexing starts at n = 1 for the leading singular value.
    """
    if not p > 0 or not (q > 0 or q == math.inf):
        raise ValueError("need p > 0 and q > 0 (or inf)")
    s = _check_singular(s)
    if s.size == 0:
        return 0.0
    n = np.arange(1, s.size + 1, dtype=float)
    if q == math.inf:
        return float(np.max((1.0 + n) ** (1.0 / p) * s))
    return float(np.sum((1.0 + n) ** (q / p - 1.0) * s**q) ** (1.0 / q))


@dataclass
class SchattenReport:
    p: float
    q: float
    value: float
    n_used: int
    tail_estimate: float

    def to_json(self) -> dict:
        return {"p": self.p, "q": self.q, "value": self.value,
                "n_used": self.n_used, "tail_estimate": self.tail_estimate}


def schatten_report(s, p: float, q: Optional[float] = None) -> SchattenReport:
    """Functional value plus a crude power-extrapolated tail estimate."""
    q_eff = p if q is None else q
    if q_eff == math.inf:
        value = schatten_lorentz_norm(s, p, q_eff)
    elif q is None:
        value = schatten_norm(s, p)
    else:
        value = schatten_lorentz_norm(s, p, q_eff)
    s = _check_singular(s)
    tail = 0.0
    m = s.size
    if m >= 12 and s[-1] > 0:
        k = m // 3
        n = np.arange(m - k + 1, m + 1, dtype=float)
        seg = s[-k:]
        if np.all(seg > 0):
            x = np.log(n) - np.log(n).mean()
            slope = float(x @ (np.log(seg) - np.log(seg).mean()) / (x @ x))
            if slope * p < -1.0:
                # integral tail of c n^(slope p) past the last index
                tail = float(s[-1] ** p * m / (-slope * p - 1.0))
            else:
                tail = math.inf
    return SchattenReport(p=p, q=q_eff, value=value, n_used=int(m),
                          tail_estimate=tail)


# ---------------------------------------------------------------------------
# dyadic window and the trace-class estimator


def dyadic_window(y) -> np.ndarray:
    """Smooth bump supported on (1/2, 2) whose dyadic dilates sum to 1.

    w(2^u) = r(u) - r(u-1) for the smoothstep ramp r on [-1, 0]; the sum
    over n of w(x/2^n) telescopes to 1 exactly for every x > 0.
    """
    y_in = np.asarray(y, dtype=float)
    y_arr = np.atleast_1d(y_in)
    out = np.zeros_like(y_arr)
    pos = y_arr > 0
    u = np.log2(y_arr[pos])
    out[pos] = smoothstep(u + 1.0) - smoothstep(u)
    return out if y_in.ndim else float(out[0])


def dyadic_cutoff(y, n_lo: int, n_hi: int) -> np.ndarray:
    """Partial sum of dyadic windows: 1 on [2^n_lo, 2^n_hi], smooth edges.

    Telescopes to a difference of two ramps, so it never accumulates
    rounding from summing the individual windows.
    """
    y_in = np.asarray(y, dtype=float)
    y_arr = np.atleast_1d(y_in)
    out = np.zeros_like(y_arr)
    pos = y_arr > 0
    u = np.log2(y_arr[pos])
    out[pos] = smoothstep(u - n_lo + 1.0) - smoothstep(u - n_hi)
    return out if y_in.ndim else float(out[0])


@dataclass
class DyadicDecomposition:
    p: float
    n_range: tuple
    pieces: list = field(repr=False)
    piece_norms: np.ndarray = field(repr=False)
    error_estimates: np.ndarray = field(repr=False)
    unresolved: list = field(repr=False)
    total: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "piece_norm", "error_estimate"])
            for n, v, e in zip(range(self.n_range[0], self.n_range[1] + 1),
                               self.piece_norms, self.error_estimates):
                wr.writerow([n, "%.17g" % v, "%.17g" % e])


def _piece_fn(b: Callable, n: int) -> Callable:
    lo, hi = 2.0 ** (n - 1), 2.0 ** (n + 1)

    def piece(x):
        x_in = np.asarray(x, dtype=float)
        x_arr = np.atleast_1d(x_in)
        out = np.zeros_like(x_arr)
        m = (x_arr > lo) & (x_arr < hi)
        if m.any():
            xm = x_arr[m]
            out[m] = np.asarray(b(xm), dtype=float) * dyadic_window(xm / 2.0**n)
        return out if x_in.ndim else float(out[0])
    return piece


def _fourier_lp_norm_p(piece: Callable, n: int, p: float, m_samples: int) -> float:
    """Riemann-sum ||piece-hat||_p^p from midpoint samples and a padded FFT."""
    lo, hi = 2.0 ** (n - 1), 2.0 ** (n + 1)
    step = (hi - lo) / m_samples
    x = lo + (np.arange(m_samples) + 0.5) * step
    vals = piece(x)
    pad = 4 * m_samples
    spec = np.abs(np.fft.fft(vals, n=pad)) * step
    dxi = 1.0 / (pad * step)
    return float(np.sum(spec**p) * dxi)


def dyadic_peller_estimate(b: Callable, p: float, n_range=(-8, 24),
                           fft_size: int = 4096) -> DyadicDecomposition:
    """Sum over scales of 2^n ||b_n hat||_p^p for the windowed pieces b_n.

    Each piece is sampled on its own support, transformed with the
    convention f-hat(xi) = integral f(x) e^(-2 pi i x xi) dx, and its
    L^p norm taken as a Riemann sum; the per-piece error estimate is the
    relative change under doubled sampling resolution, and pieces whose
    estimate exceeds 10% are listed as unresolved.
    """
    if not 0 < p <= 1:
        raise ValueError("the estimator targets p in (0, 1]")
    n_lo, n_hi = int(n_range[0]), int(n_range[1])
    if n_hi < n_lo:
        raise ValueError("empty n_range")
    if fft_size < 16 or fft_size & (fft_size - 1):
        raise ValueError("fft_size must be a power of two >= 16")
    pieces, norms, errs, unresolved = [], [], [], []
    for n in range(n_lo, n_hi + 1):
        piece = _piece_fn(b, n)
        coarse = _fourier_lp_norm_p(piece, n, p, fft_size)
        fine = _fourier_lp_norm_p(piece, n, p, 2 * fft_size)
        scale = 2.0 ** n
        norms.append(scale * fine)
        err = abs(fine - coarse) / fine if fine > 0 else 0.0
        errs.append(scale * abs(fine - coarse))
        if err > 0.10:
            unresolved.append(n)
        pieces.append(piece)
    norms = np.array(norms)
    return DyadicDecomposition(p=p, n_range=(n_lo, n_hi), pieces=pieces,
                               piece_norms=norms,
                               error_estimates=np.array(errs),
                               unresolved=unresolved,
                               total=float(norms.sum()))


# ---------------------------------------------------------------------------
# band-limited sampling check

# degree-7 cardinal B-spline at integer offsets: the autocorrelation of
# the cubic bump, Eulerian numbers over 7!
_B7_INT = {0: 151.0 / 315.0, 1: 397.0 / 1680.0, 2: 1.0 / 42.0,
           3: 1.0 / 5040.0}


def _sinc(t: np.ndarray) -> np.ndarray:
    return np.sinc(t)  # sin(pi t)/(pi t)


def band_limited_function(v, N: float, sigma: Optional[float] = None,
                          xi0: Optional[float] = None):
    """f with spectrum sum v_i B3((xi - xi_i)/sigma), bumps inside [0, N].

    Returns (f, sigma, xi_list); f(x) = sigma sinc^4(sigma x) sum v_i
    e^(2 pi i xi_i x) under the e^(-2 pi i x xi) transform convention.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("need a 1-d nonempty sample vector")
    if sigma is None:
        sigma = N / (v.size + 3.0)
    if xi0 is None:
        xi0 = 2.0 * sigma
    xi = xi0 + sigma * np.arange(v.size)
    if xi[0] - 2 * sigma < -1e-12 * N or xi[-1] + 2 * sigma > N * (1 + 1e-12):
        raise ValueError("spectrum bumps leave [0, N]")

    def f(x):
        x = np.asarray(x, dtype=float)
        phases = np.exp(2j * np.pi * np.multiply.outer(x, xi)) @ v
        return sigma * _sinc(sigma * x) ** 4 * phases

    return f, float(sigma), xi


def sampling_check(v, N: float, p: float, sigma: Optional[float] = None,
                   xi0: Optional[float] = None) -> dict:
    """Compare the lattice p-sum of a band-limited f against N ||f||_p^p.

    At p = 2 the two sides agree exactly (sampling Parseval identity);
    the rhs is then computed independently through the B-spline
    autocorrelation quadratic form rather than by quadrature.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    if not N > 0:
        raise ValueError("N must be positive")
    v = np.asarray(v, dtype=float)
    if not np.any(v != 0):
        return {"lhs": 0.0, "rhs_norm": 0.0, "ratio": math.nan}
    f, sig, xi = band_limited_function(v, N, sigma, xi0)

    # lattice sum with doubling until the tail is negligible
    lhs_prev, m_cut = None, int(64 * N / sig) + 64
    while True:
        m = np.arange(-m_cut, m_cut + 1)
        lhs = float(np.sum(np.abs(f(m / N)) ** p))
        if lhs_prev is not None and abs(lhs - lhs_prev) <= 1e-11 * lhs:
            break
        if m_cut > 10 ** 7:
            raise RuntimeError("lattice sum did not stabilize")
        lhs_prev, m_cut = lhs, 2 * m_cut

    if p == 2:
        # exact: N sigma v^T G v with G the integer B7 Gram
        idx = np.arange(v.size)
        offs = np.abs(idx[:, None] - idx[None, :])
        G = np.zeros(offs.shape)
        for k, val in _B7_INT.items():
            G[offs == k] = val
        rhs = float(N * sig * v @ G @ v)
    else:
        rhs_prev, x_max, dx = None, 64.0 / sig, 1.0 / (16.0 * N)
        while True:
            x = np.arange(-x_max, x_max, dx)
            rhs = float(N * np.sum(np.abs(f(x)) ** p) * dx)
            if rhs_prev is not None and abs(rhs - rhs_prev) <= 1e-9 * rhs:
                break
            if x_max > 1e6 / sig:
                raise RuntimeError("norm quadrature did not stabilize")
            rhs_prev, x_max = rhs, 2.0 * x_max
    ratio = lhs / rhs
    if p == 2 and abs(ratio - 1.0) > 1e-8:
        raise AssertionError(
            f"sampling Parseval identity violated: ratio {ratio!r}")
    return {"lhs": lhs, "rhs_norm": rhs, "ratio": ratio}


# ---------------------------------------------------------------------------
# rank-one expansion of a band-limited multiplicative symbol


def rank_one_expansion(v, N: float, J: int) -> LinearMap:
    """Truncation of the multiplicative matrix with symbol synthesized
    from frequency samples: (1/N) sum_m v_m (jk)^(-1/2 + 2 pi i m/N).

    The sum over the given m-samples is exact (no truncation flag needed
    for finite input); entries reproduce the direct kernel evaluation.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("need 1-d nonempty samples")
    if J < 1:
        raise ValueError("J must be positive")
    if not N > 0:
        raise ValueError("N must be positive")
    M = np.zeros((J, J), dtype=complex)
    for m, vm in enumerate(v):
        if vm == 0.0:
            continue
        M += (vm / N) * dense_matrix(rank_one_dirichlet(J, m / N))
    return LinearMap(rows=J, cols=J, symmetric=False,
                     matvec=lambda u: M @ u,
                     description=f"band-limited expansion J={J}, "
                                 f"{v.size} frequency samples")
