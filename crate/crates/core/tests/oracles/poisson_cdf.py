"""Arbitrary-precision Poisson CDF table for tests/poisson_oracle.rs.

Run with: python3 poisson_cdf.py > ../poisson_cdf_table.in
"""
import mpmath

mpmath.mp.dps = 60

MEANS = ["0.5", "1", "5", "14.63", "50", "100", "150", "200"]
NS = [0, 1, 5, 19, 50, 100, 200, 300, 400]

print("&[")
for m in MEANS:
    lam = mpmath.mpf(m)
    for n in NS:
        s = mpmath.fsum(mpmath.exp(-lam) * lam**k / mpmath.factorial(k) for k in range(n + 1))
        print(f"    ({m}_f64, {n}_i64, {mpmath.nstr(s, 20, min_fixed=-1, max_fixed=-1)}_f64),")
print("]")
