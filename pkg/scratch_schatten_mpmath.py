import numpy as np
import sys
sys.path.insert(0, "src")

from helsonlab.schatten import sampling_check, band_limited_function, dyadic_window

def gl_panels(f, edges, n=400):
    x0, w0 = np.polynomial.legendre.leggauss(n)
    tot = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        xm = 0.5 * (a + b) + 0.5 * (b - a) * x0
        tot += 0.5 * (b - a) * np.sum(w0 * f(xm))
    return tot

# piece n=3 of b(x) = w(x/8): b_3 = w(x/8)^2 on (4, 16); Gauss-Legendre both levels
xg, wg = np.polynomial.legendre.leggauss(600)
def bhat3(xi):
    # x-integral over (4, 16), two panels
    out = np.zeros_like(xi, dtype=complex)
    for a, b in ((4.0, 8.0), (8.0, 16.0)):
        xm = 0.5 * (a + b) + 0.5 * (b - a) * xg
        vals = dyadic_window(xm / 8.0) ** 2
        out += 0.5 * (b - a) * (vals * wg) @ np.exp(-2j * np.pi * np.outer(xm, xi))
    return out

edges = [-6, -2, -1, -0.5, -0.25, 0, 0.25, 0.5, 1, 2, 6]
norm1 = gl_panels(lambda xi: np.abs(bhat3(xi)), edges, 400)
print("GL piece n=3 = %.12g" % (8 * norm1))
print("tail probe |bhat3(6)| =", abs(bhat3(np.array([6.0]))[0]))

# p=1 sampling: independent GL quadrature of N*||f||_1
v = np.array([1.0, -2.0, 0.5])
N = 8.0
res = sampling_check(v, N, 1.0)
print("module p=1:", res)
f, sig, xi = band_limited_function(v, N)
# |f| decays like (sig x)^-4; GL panels out to 3000, oscillation scale 1/N
E = [0.0]
x = 0.0
while x < 3000:
    step = max(0.125, x * 0.05)
    x += step
    E.append(x)
E = np.array(E)
half = gl_panels(lambda t: np.abs(f(t)), list(E), 60)
halfneg = gl_panels(lambda t: np.abs(f(-t)), list(E), 60)
rhs_gl = N * (half + halfneg)
print("GL N*||f||_1 = %.10g   module rhs = %.10g   rel diff = %.3g"
      % (rhs_gl, res["rhs_norm"], abs(rhs_gl - res["rhs_norm"]) / rhs_gl))
