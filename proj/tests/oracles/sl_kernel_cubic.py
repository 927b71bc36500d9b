"""Exact evaluation of the two-polynomial Hermite-WENO interpolant for
f(x) = x^3 on [0, 1], dx = 1, exact end derivatives, theta = 1/2."""
import sympy as sp

x = sp.Symbol("x")
f = x**3
x0, x1, dx = sp.Integer(0), sp.Integer(1), sp.Integer(1)
fi, fi1 = f.subs(x, x0), f.subs(x, x1)
fpi, fpi1 = sp.diff(f, x).subs(x, x0), sp.diff(f, x).subs(x, x1)

h_l = fi + (fi1 - fi) / dx * (x - x0) + ((fi1 - fi) - dx * fpi) / dx**2 * (x - x0) * (x - x1)
h_r = fi + (fi1 - fi) / dx * (x - x0) + (dx * fpi1 - (fi1 - fi)) / dx**2 * (x - x0) * (x - x1)

# Smoothness indicators straight from their integral definition.
beta_l = sp.integrate(dx * sp.diff(h_l, x) ** 2 + dx**3 * sp.diff(h_l, x, 2) ** 2, (x, x0, x1))
beta_r = sp.integrate(dx * sp.diff(h_r, x) ** 2 + dx**3 * sp.diff(h_r, x, 2) ** 2, (x, x0, x1))

eps = sp.Rational(1, 10**6)
xt = sp.Rational(1, 2)
c_l = (x1 - xt) / dx
c_r = 1 - c_l
a_l = c_l / (eps + beta_l) ** 2
a_r = c_r / (eps + beta_r) ** 2
w_l = a_l / (a_l + a_r)
H3 = w_l * h_l.subs(x, xt) + (1 - w_l) * h_r.subs(x, xt)

print("h_l", h_l.subs(x, xt))
print("h_r", h_r.subs(x, xt))
print("beta_l", beta_l)
print("beta_r", beta_r)
print("w_l", sp.nsimplify(w_l), sp.N(w_l, 20))
print("H3", sp.N(H3, 20))
