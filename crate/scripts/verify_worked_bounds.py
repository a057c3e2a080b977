#!/usr/bin/env python3
"""Independent evaluation of the controller bounds for the reference home.

Prints the values frozen into the Rust unit and acceptance tests. Uses only
closed-form arithmetic with fractions where possible so it shares no code
path with the Rust implementation.
"""
from fractions import Fraction as F
import math

eps = F(985, 1000)
eta_over_a = F(15)
e_max = F(8)
t_min, t_max = F(15), F(25)
tout_min, tout_max = F(0), F(10)
b_max, s_min = F(1), F(45, 100)
g_min, g_max = F(5), F(20)
u_c, u_d = F(1), F(1)
v_max = a_max = F(3)
R = 5

d = t_max - t_min - (1 - eps) * (tout_max + eta_over_a * e_max - tout_min)
f = F(0)  # gamma = 0
v1 = (1 - eps) * eta_over_a * d / ((b_max - s_min) + f)
v2 = (g_max - g_min - (u_c + u_d)) / (b_max - s_min)
v = min(v1, v2)
h = (1 - eps) * (tout_max + eta_over_a * e_max) - t_max
m = (1 - eps) * tout_min - t_min
k = -eps * (1 - eps) * eta_over_a
gamma_min = (v * s_min) / k + h / eps
gamma_max = (v * b_max) / k + m / eps
alpha_min = -v * s_min + u_c - g_max
alpha_max = -v * b_max - u_d - g_min
xi = (2 * v * b_max + v_max) / (R - 1)
ratio = (2 * v * b_max + a_max + xi) / xi
d_max = math.ceil(ratio)
psi = (1 - eps) * (tout_max - tout_min + eta_over_a * e_max)

for name, val in [("psi", psi), ("d", d), ("v1_max", v1), ("v2_max", v2),
                  ("gamma_min", gamma_min), ("gamma_max", gamma_max),
                  ("alpha_min", alpha_min), ("alpha_max", alpha_max),
                  ("xi", xi), ("d_max_ratio", ratio)]:
    print(f"{name:12s} {float(val):.12f}  exact={val}")
print(f"d_max        {d_max}")

# HVAC threshold terms for the hvac_thresholds example
V = float(v1); gamma = 0.01; e = 0.985; ea = 15.0
coef = 2 * V * gamma * (1 - e) ** 2 * ea
b_t = coef * (5 - (22.5 - e * 20) / (1 - e))
c_t = coef * (5 + ea * 8 - (22.5 - e * 20) / (1 - e))
print(f"b_t          {b_t:.12f}\nc_t          {c_t:.12f}")
# Solver thresholds
gm = float(gamma_max)
for T in (24.0, 15.0):
    print(f"thresh(T={T}) {-e*(1-e)*(T+gm)*ea:.12f}")
print(f"V*S_min      {V*0.45:.12f}")
