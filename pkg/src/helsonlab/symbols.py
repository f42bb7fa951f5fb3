"""Closed-form kernels, weights, and integer-restricted sequences.

The central objects are a family of slowly decaying symbols and their
smooth/rough decomposition:

    a(t)  = t^(-1/2) (log t)^(-1) (log log t)^(-alpha)      (multiplicative)
    b(x)  = x^(-1) (log x)^(-alpha)                          (additive)
    w(l)  = |log l|^(-alpha) chi(l)                          (Laplace weight)
    a0(t) = integral of t^(-1/2-l) w(l) dl   over l > 0      (smooth part)
    a1    = a - a0                                           (residual)

with b0, b1 the additive-variable counterparts under x = log t,
b(x) = e^(x/2) a(e^x).  Everything here is a pure function of its
inputs; quadrature rules are cached per weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

E = math.e

KINDS = (
    "helson_a", "hankel_b", "weight_w", "a0", "a1", "b0", "b1",
    "zeta1", "carleman", "h_beta", "k_beta", "custom",
)


class DomainError(ValueError):
    """Argument outside the symbol's real-valued domain."""


class QuadratureError(RuntimeError):
    """Fixed-rule quadrature failed to converge."""


@dataclass(frozen=True)
class SymbolSpec:
    """Descriptor of one closed-form kernel.

    t0 is the activation point of the integral-operator kernel for the
    full symbols (the closed form applies at t >= t0, zero below);
    eval_symbol itself is the pure closed form on its real domain.
    chi_lo/chi_hi bound the transition band of the cutoff chi; beta
    defaults to chi_hi so that supp w stays inside [0, beta].
    """

    kind: str
    alpha: float = 1.0
    t0: float = 16.0
    chi_lo: float = 0.25
    chi_hi: float = 0.75
    beta: Optional[float] = None
    fn: Optional[Callable] = None
    support: Optional[tuple] = None  # custom weights only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not (0 < self.chi_lo < self.chi_hi <= 1):
            raise ValueError("need 0 < chi_lo < chi_hi <= 1")
        if not self.t0 > E:
            raise ValueError("t0 must exceed e")
        if self.beta is None:
            object.__setattr__(self, "beta", self.chi_hi)
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom spec needs fn")

    def to_json(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom specs carry a callable and do not serialize")
        return {
            "kind": self.kind, "alpha": self.alpha, "t0": self.t0,
            "chi_lo": self.chi_lo, "chi_hi": self.chi_hi, "beta": self.beta,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "SymbolSpec":
        return cls(kind=rec["kind"], alpha=rec["alpha"], t0=rec["t0"],
                   chi_lo=rec["chi_lo"], chi_hi=rec["chi_hi"], beta=rec["beta"])


@dataclass(frozen=True)
class SequenceSpec:
    """Integer restriction r(a): values[0] corresponds to index 1 and is 0."""

    source: SymbolSpec
    length: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.length < 1 or len(self.values) != self.length:
            raise ValueError("length/values mismatch")
        if self.values[0] != 0.0:
            raise ValueError("restriction convention requires values(1) = 0")


def smoothstep(s):
    """C-infinity ramp: 0 for s <= 0, 1 for s >= 1, exp(-1/s) gluing."""
    s_in = np.asarray(s, dtype=float)
    s = np.atleast_1d(s_in)
    out = np.empty_like(s)
    lo = s <= 0.0
    hi = s >= 1.0
    mid = ~(lo | hi)
    out[lo] = 0.0
    out[hi] = 1.0
    sm = s[mid]
    a = np.exp(-1.0 / sm)
    b = np.exp(-1.0 / (1.0 - sm))
    out[mid] = a / (a + b)
    return out if s_in.ndim else float(out[0])


def chi_cutoff(lam, lo=0.25, hi=0.75):
    """Smooth cutoff: 1 on (0, lo], 0 on [hi, inf)."""
    return smoothstep((hi - np.asarray(lam, dtype=float)) / (hi - lo))


def _weight_values(spec: SymbolSpec, lam):
    """w(l) for the weight described by spec (weight_w or custom)."""
    lam_in = np.asarray(lam, dtype=float)
    lam = np.atleast_1d(lam_in)
    if spec.kind == "custom":
        out = np.asarray(spec.fn(lam), dtype=float)
        return out if lam_in.ndim else float(out[0])
    out = np.zeros_like(lam)
    inside = (lam > 0.0) & (lam < spec.chi_hi)
    li = lam[inside]
    out[inside] = np.abs(np.log(li)) ** (-spec.alpha) * chi_cutoff(
        li, spec.chi_lo, spec.chi_hi)
    return out if lam_in.ndim else float(out[0])


def _weight_support(spec: SymbolSpec) -> tuple:
    if spec.kind == "custom":
        if spec.support is None:
            raise ValueError("custom weight needs an explicit support interval")
        return spec.support
    return (0.0, spec.chi_hi)


def _weight_of(spec: SymbolSpec) -> SymbolSpec:
    """The weight spec implied by a full/decomposed symbol spec."""
    if spec.kind in ("weight_w", "custom"):
        return spec
    return SymbolSpec(kind="weight_w", alpha=spec.alpha, t0=spec.t0,
                      chi_lo=spec.chi_lo, chi_hi=spec.chi_hi, beta=spec.beta)


# ---------------------------------------------------------------------------
# fixed quadrature rule for the Laplace-type integrals

_RULE_CACHE: dict = {}


def _weight_rule(spec_w: SymbolSpec, Q: int):
    """Composite Gauss-Legendre rule on supp w, panels refined toward 0.

    Returns (nodes, weights * w(nodes)); cached so that every operator
    built from the same weight shares one rule (Gram consistency).
    """
    if Q < 16:
        raise ValueError("need Q >= 16 quadrature nodes")
    # keying by the frozen spec keeps custom fn objects alive, so the
    # identity-based hash of a callable can never be recycled
    key = (spec_w, Q)
    hit = _RULE_CACHE.get(key)
    if hit is not None:
        return hit
    lo, hi = _weight_support(spec_w)
    # geometric panels toward the lower endpoint (log-type feature at 0)
    n_panels = max(8, min(40, Q // 16))
    per = Q // n_panels
    edges = [hi]
    for _ in range(n_panels - 1):
        edges.append(edges[-1] / 2.0)
    edges.append(max(lo, 0.0))
    edges = edges[::-1]
    gx, gw = np.polynomial.legendre.leggauss(per)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        mid, hw = 0.5 * (a + b), 0.5 * (b - a)
        nodes.append(mid + hw * gx)
        weights.append(hw * gw)
    x = np.concatenate(nodes)
    om = np.concatenate(weights) * np.atleast_1d(_weight_values(spec_w, x))
    _RULE_CACHE[key] = (x, om)
    return x, om


def a0_quadrature(spec_w: SymbolSpec, t, Q: int = 2000, full_output: bool = False):
    """Integral of t^(-1/2-l) w(l) dl by the fixed composite rule.

    Doubling Q moves the value by less than the reported estimate; a
    rule that fails its own halved-rule comparison raises QuadratureError.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 1.0):
        raise DomainError("a0 integral is evaluated for t >= 1")
    x, om = _weight_rule(spec_w, Q)
    logt = np.log(t_arr)
    val = np.sqrt(1.0 / t_arr) * (np.exp(-np.multiply.outer(logt, x)) @ om)
    if not full_output:
        return val if val.ndim else float(val)
    xh, omh = _weight_rule(spec_w, max(16, Q // 2))
    val_h = np.sqrt(1.0 / t_arr) * (np.exp(-np.multiply.outer(logt, xh)) @ omh)
    err = np.abs(val - val_h)
    scale = np.maximum(np.abs(val), 1.0)
    if np.any(err > 1e-6 * scale):
        raise QuadratureError(
            f"rule not converged: est err {float(np.max(err)):.3e} at Q={Q}")
    return (val if val.ndim else float(val),
            err if err.ndim else float(err))


def b0_quadrature(spec_w: SymbolSpec, x, Q: int = 2000):
    """Laplace transform of w at x (> 0): integral of e^(-x l) w(l) dl."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0):
        raise DomainError("Laplace transform evaluated for x > 0")
    xs, om = _weight_rule(spec_w, Q)
    val = np.exp(-np.multiply.outer(x_arr, xs)) @ om
    return val if val.ndim else float(val)


# ---------------------------------------------------------------------------
# zeta(1+x) by partial sum plus Euler-Maclaurin tail

_ZETA_J = 64
_BERNOULLI = (1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66)


def zeta1(x):
    """zeta(1+x) for x > 0, absolute error below 1e-13."""
    x_in = np.asarray(x, dtype=float)
    if np.any(x_in <= 0.0):
        raise DomainError("zeta1 needs x > 0")
    x_arr = np.atleast_1d(x_in)
    s = 1.0 + x_arr
    j = np.arange(1, _ZETA_J, dtype=float)
    head = np.sum(np.power(j[None, :], -s[:, None]), axis=-1)
    J = float(_ZETA_J)
    val = head + J ** (-x_arr) / x_arr + 0.5 * J ** (-s)
    # Euler-Maclaurin corrections: B_2k/(2k)! * s(s+1)...(s+2k-2) * J^(-s-2k+1)
    rising = s.copy()
    fact = 1.0
    for k, b2k in enumerate(_BERNOULLI, start=1):
        if k > 1:
            rising = rising * (s + (2 * k - 3)) * (s + (2 * k - 2))
        fact *= (2 * k) * (2 * k - 1)
        val = val + (b2k / fact) * rising * J ** (-s - (2 * k - 1))
    return val if x_in.ndim else float(val[0])


def special_kernels(name: str, x, beta: float = 0.75):
    """Closed-form helper kernels used in the smoothing comparison.

    h_beta(x) = e^(-beta x)/x, k_beta(x) = beta e^(-x/2) exp(-beta^2 e^(-x))
    (defined for every real x), h_tilde = zeta1 - h_beta - 1.
    """
    if not beta > 0:
        raise DomainError("beta must be positive")
    x_arr = np.asarray(x, dtype=float)
    if name == "k_beta":
        val = beta * np.exp(-x_arr / 2.0) * np.exp(-beta * beta * np.exp(-x_arr))
        return val if val.ndim else float(val)
    if np.any(x_arr <= 0.0):
        raise DomainError(f"{name} needs x > 0")
    if name == "h_beta":
        val = np.exp(-beta * x_arr) / x_arr
    elif name == "h_tilde":
        val = zeta1(x_arr) - np.exp(-beta * x_arr) / x_arr - 1.0
    else:
        raise ValueError(f"unknown special kernel {name!r}")
    return val if val.ndim else float(val)


# ---------------------------------------------------------------------------
# symbol evaluation (pure closed forms on their real domains)


def _helson_a_values(alpha, t):
    logt = np.log(t)
    return t ** (-0.5) / logt * np.log(logt) ** (-alpha)


def _hankel_b_values(alpha, x):
    logx = np.log(x)
    return x ** (-1.0) * logx ** (-alpha)


def eval_symbol(spec: SymbolSpec, t):
    """Value of the closed form at t; raises DomainError off-domain."""
    t_arr = np.asarray(t, dtype=float)
    k = spec.kind
    if k == "helson_a":
        if np.any(t_arr <= E):
            raise DomainError("helson_a is real-valued for t > e only")
        val = _helson_a_values(spec.alpha, t_arr)
    elif k == "hankel_b":
        if np.any(t_arr <= 1.0):
            raise DomainError("hankel_b is real-valued for x > 1 only")
        val = _hankel_b_values(spec.alpha, t_arr)
    elif k == "weight_w":
        if np.any(t_arr <= 0.0):
            raise DomainError("weight_w needs lambda > 0")
        val = _weight_values(spec, t_arr)
    elif k == "a0":
        val = a0_quadrature(_weight_of(spec), t_arr)
        val = np.asarray(val, dtype=float)
    elif k == "a1":
        if np.any(t_arr <= E):
            raise DomainError("a1 = a - a0 is defined where a is, t > e")
        val = _helson_a_values(spec.alpha, t_arr) - np.asarray(
            a0_quadrature(_weight_of(spec), t_arr), dtype=float)
    elif k == "b0":
        val = np.asarray(b0_quadrature(_weight_of(spec), t_arr), dtype=float)
    elif k == "b1":
        if np.any(t_arr <= 1.0):
            raise DomainError("b1 = b - b0 is defined where b is, x > 1")
        val = _hankel_b_values(spec.alpha, t_arr) - np.asarray(
            b0_quadrature(_weight_of(spec), t_arr), dtype=float)
    elif k == "zeta1":
        val = np.asarray(zeta1(t_arr), dtype=float)
    elif k == "carleman":
        if np.any(t_arr <= 0.0):
            raise DomainError("carleman kernel needs x > 0")
        val = 1.0 / t_arr
    elif k == "h_beta":
        val = np.asarray(special_kernels("h_beta", t_arr, spec.beta), dtype=float)
    elif k == "k_beta":
        val = np.asarray(special_kernels("k_beta", t_arr, spec.beta), dtype=float)
    elif k == "custom":
        val = np.asarray(spec.fn(t_arr), dtype=float)
    else:  # pragma: no cover
        raise ValueError(k)
    if np.any(~np.isfinite(np.atleast_1d(val))):
        raise DomainError(f"{k} evaluated to a non-finite value")
    return val if np.ndim(val) else float(val)


def kernel_fn(spec: SymbolSpec, Q: int = 2000) -> Callable:
    """Total kernel function for integral-operator assembly.

    Unlike eval_symbol, the returned callable is defined on the whole
    half-line: the full symbols activate at t0 (zero below), so that
    b_kernel(x) = e^(x/2) a_kernel(e^x) holds identically; the additive
    form is computed directly in x and stays finite past x = 709.
    """
    k = spec.kind
    if k == "helson_a":
        t0 = spec.t0

        def f(t, alpha=spec.alpha, t0=t0):
            t_in = np.asarray(t, dtype=float)
            t = np.atleast_1d(t_in)
            out = np.zeros_like(t)
            m = t >= t0
            out[m] = _helson_a_values(alpha, t[m])
            return out if t_in.ndim else float(out[0])
        return f
    if k == "hankel_b":
        x0 = math.log(spec.t0)

        def f(x, alpha=spec.alpha, x0=x0):
            x_in = np.asarray(x, dtype=float)
            x = np.atleast_1d(x_in)
            out = np.zeros_like(x)
            m = x >= x0
            out[m] = _hankel_b_values(alpha, x[m])
            return out if x_in.ndim else float(out[0])
        return f
    if k == "a0":
        w = _weight_of(spec)
        nodes, om = _weight_rule(w, Q)

        def f(t, nodes=nodes, om=om):
            t = np.asarray(t, dtype=float)
            return np.sqrt(1.0 / t) * (np.exp(-np.multiply.outer(np.log(t), nodes)) @ om)
        return f
    if k == "b0":
        w = _weight_of(spec)
        nodes, om = _weight_rule(w, Q)

        def f(x, nodes=nodes, om=om):
            x = np.asarray(x, dtype=float)
            return np.exp(-np.multiply.outer(x, nodes)) @ om
        return f
    if k == "a1":
        fa = kernel_fn(SymbolSpec("helson_a", spec.alpha, spec.t0,
                                  spec.chi_lo, spec.chi_hi, spec.beta), Q)
        f0 = kernel_fn(SymbolSpec("a0", spec.alpha, spec.t0,
                                  spec.chi_lo, spec.chi_hi, spec.beta), Q)
        return lambda t: fa(t) - f0(t)
    if k == "b1":
        fb = kernel_fn(SymbolSpec("hankel_b", spec.alpha, spec.t0,
                                  spec.chi_lo, spec.chi_hi, spec.beta), Q)
        f0 = kernel_fn(SymbolSpec("b0", spec.alpha, spec.t0,
                                  spec.chi_lo, spec.chi_hi, spec.beta), Q)
        return lambda x: fb(x) - f0(x)
    if k == "weight_w":
        return lambda lam: _weight_values(spec, lam)
    if k == "zeta1":
        return zeta1
    if k == "carleman":
        return lambda x: 1.0 / np.asarray(x, dtype=float)
    if k == "h_beta":
        return lambda x: special_kernels("h_beta", x, spec.beta)
    if k == "k_beta":
        return lambda x: special_kernels("k_beta", x, spec.beta)
    if k == "custom":
        return spec.fn
    raise ValueError(k)  # pragma: no cover


def sequence_values(spec: SymbolSpec, n):
    """a(n) on arbitrary positive integers under the restriction convention.

    Index 1 maps to 0; the full multiplicative symbol also zeroes index 2
    and applies its closed form from n = 3 (log log n is real and positive
    there); every other kind applies eval_symbol from n = 2.

    The difference part follows the sequence convention of its minuend,
    not the continuous domain: a1(2) = 0 - a0(2), so that on integers
    a = a0 + a1 holds entry by entry including the zeroed head.
    """
    n_arr = np.asarray(n)
    if np.any(n_arr < 1):
        raise DomainError("sequence indices start at 1")
    values = np.zeros(n_arr.shape, dtype=float)
    head = 3 if spec.kind == "helson_a" else 2
    m = n_arr >= head
    if np.any(m):
        if spec.kind == "helson_a":
            values[m] = _helson_a_values(spec.alpha, n_arr[m].astype(float))
        elif spec.kind == "a1":
            nm = n_arr[m].astype(float)
            full = np.zeros_like(nm)
            mm = nm >= 3
            full[mm] = _helson_a_values(spec.alpha, nm[mm])
            values[m] = full - np.asarray(
                a0_quadrature(_weight_of(spec), nm), dtype=float)
        else:
            values[m] = np.asarray(eval_symbol(spec, n_arr[m].astype(float)),
                                   dtype=float)
    return values


def restrict(spec: SymbolSpec, N: int) -> SequenceSpec:
    """Integer restriction r(a) of length N: values[j-1] = a(j), a(1) = 0."""
    if N < 1:
        raise ValueError("N must be positive")
    values = sequence_values(spec, np.arange(1, N + 1))
    return SequenceSpec(source=spec, length=N, values=values)


def smooth_part_sequence(spec: SymbolSpec, n):
    """Genuine smooth-part values on integers n >= 1, without the zeroed head.

    sequence_values follows the restriction convention (index 1 -> 0),
    the right flavor for matching the restricted full symbol entry by
    entry.  But positivity of the smooth part's sections is a Gram
    property and needs the true integral at every product jk, including
    jk = 1; zeroing the head is a rank-two dent that makes the section
    indefinite.  Multiplicative sections meant to be positive must be
    built from this flavor.
    """
    n_arr = np.asarray(n)
    if np.any(n_arr < 1):
        raise DomainError("sequence indices start at 1")
    vals = a0_quadrature(_weight_of(spec), np.asarray(n_arr, dtype=float))
    return np.asarray(vals, dtype=float)


def difference_part_sequence(spec: SymbolSpec, n):
    """Compensating difference-part values on integers n >= 1.

    Defined so that smooth_part_sequence + difference_part_sequence
    equals sequence_values of the full symbol entry by entry; under this
    flavor the head entries are -a0(1) and -a0(2) rather than 0, and a
    section of the full restricted symbol splits exactly into a positive
    smooth section plus this difference section.
    """
    full = SymbolSpec(kind="helson_a", alpha=spec.alpha, t0=spec.t0,
                      chi_lo=spec.chi_lo, chi_hi=spec.chi_hi, beta=spec.beta)
    return sequence_values(full, n) - smooth_part_sequence(spec, n)


def a1_residual(spec: SymbolSpec, t, Q: int = 2000, weight: Optional[SymbolSpec] = None):
    """a(t) - a0(t) for the full symbol spec (t > e).

    weight overrides the smooth part's weight (default: the one implied
    by spec); a degenerate zero weight makes a1 coincide with a.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= E):
        raise DomainError("a1_residual needs t > e")
    w = _weight_of(spec) if weight is None else weight
    val = _helson_a_values(spec.alpha, t_arr) - np.asarray(
        a0_quadrature(w, t_arr, Q=Q), dtype=float)
    return val if val.ndim else float(val)
