import numpy as np
import sys
sys.path.insert(0, "src")

# --- 1. B7 integer values via numeric autocorrelation of exact cubic B3
def B3(t):
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    m1 = t <= 1.0
    out[m1] = (4.0 - 6.0 * t[m1] ** 2 + 3.0 * t[m1] ** 3) / 6.0
    m2 = (t > 1.0) & (t <= 2.0)
    out[m2] = (2.0 - t[m2]) ** 3 / 6.0
    return out

# sanity: integral of B3 = 1
g = np.linspace(-2, 2, 400001)
print("int B3 =", np.trapz(B3(g), g))

for k in range(5):
    val = np.trapz(B3(g) * B3(g - k), g)
    print(f"B7({k}) numeric = {val:.15f}")
print("table:", 151/315, 397/1680, 1/42, 1/5040)

# --- 2. sampling p=2 identity
from helsonlab.schatten import sampling_check, dyadic_peller_estimate, dyadic_window

rng = np.random.default_rng(7)
for trial in range(4):
    v = rng.standard_normal(8)
    r = sampling_check(v, 16.0, 2.0)
    print("p=2 ratio-1:", r["ratio"] - 1.0)

r1 = sampling_check(rng.standard_normal(8), 16.0, 1.0)
print("p=1:", r1)

# --- 3. unit-window dyadic pieces
b_unit = lambda x: dyadic_window(np.asarray(x) / 8.0)
d = dyadic_peller_estimate(b_unit, 1.0, n_range=(-2, 8), fft_size=1024)
for n, pn in zip(range(-2, 9), d.piece_norms):
    print(f"n={n:3d} piece={pn:.12g}")
print("total:", d.total, "unresolved:", d.unresolved)
d2 = dyadic_peller_estimate(b_unit, 1.0, n_range=(-2, 8), fft_size=2048)
print("doubling rel change:", abs(d2.total - d.total) / d.total)

# --- 4. partition of unity, wide
x = np.exp(np.random.default_rng(1).uniform(np.log(2.0**-9), np.log(2.0**25), 10000))
ns = np.arange(-12, 28)
S = sum(dyadic_window(x / 2.0**n) for n in ns)
print("partition max err:", np.max(np.abs(S - 1.0)))
nz = sum((dyadic_window(x / 2.0**n) > 0).astype(int) for n in ns)
print("max pieces nonzero:", nz.max(), "min:", nz.min())
