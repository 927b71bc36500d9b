"""High-precision radial profiles and truncated Maxwellian density
n0(r) * erf(v_max / sqrt(2 Ti(r))) for the ITG parameters."""
import mpmath as mp

mp.mp.dps = 40
R_MIN, R_MAX = mp.mpf(0), mp.mpf("14.5")
R_P = (R_MIN + R_MAX) / 2
K_N, K_T = mp.mpf("0.055"), mp.mpf("0.27586")
DR_N, DR_T = mp.mpf("2.9"), mp.mpf("1.45")
V_MAX = mp.mpf(8)


def shape(kappa, width, r):
    return mp.exp(-kappa * width * mp.tanh((r - R_P) / width))


C_N = (R_MAX - R_MIN) / mp.quad(lambda r: shape(K_N, DR_N, r), [R_MIN, R_P, R_MAX])
n0 = lambda r: C_N * shape(K_N, DR_N, r)
ti = lambda r: shape(K_T, DR_T, r)

print("C_n0", mp.nstr(C_N, 17))
print("int_n0", mp.nstr(mp.quad(n0, [R_MIN, R_P, R_MAX]), 17))
for r in ["0", "3.3", "7.25", "10", "14.5"]:
    r = mp.mpf(r)
    rho = n0(r) * mp.erf(V_MAX / mp.sqrt(2 * ti(r)))
    print("r", mp.nstr(r, 5), "n0", mp.nstr(n0(r), 17), "Ti", mp.nstr(ti(r), 17), "rho", mp.nstr(rho, 17))
