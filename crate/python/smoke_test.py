"""Smoke test for the permsym_py extension.

Build and install first, e.g. `pip install ./crates/python --no-build-isolation`.
"""

import math
import sys

import permsym_py as ps


def main():
    g = ps.Grid(32, 8.0)
    w1 = ps.sign_condition_data(g, "gaussian")
    phys, fourier = w1.constraint_residual()
    print(f"constraint residual  {max(phys, fourier):.3e}")
    assert max(phys, fourier) < 1e-12

    u = ps.velocity_from_w1(w1)
    print(f"permutation residual {u.permutation_residual():.3e}")
    assert u.permutation_residual() < 1e-12

    report = ps.lambda_diagnostics(w1)
    lam = report["lambda_spectral"]
    spread = max(abs(v / lam - 1.0) for v in (report["lambda_w1"], report["lambda_omega"]))
    print(f"lambda               {lam:.6f} (quadrature spread {spread:.1e})")
    assert lam > 0 and spread < 1e-6

    q = ps.rotation_q()
    axis = [q[i][2] for i in range(3)]
    assert all(abs(a - 1 / math.sqrt(3)) < 1e-15 for a in axis)

    records, final, breakdown = ps.run("n = 32\nL = 8.0\nt_end = 0.25\n")
    drift = abs(records[-1]["l2_velocity"] / records[0]["l2_velocity"] - 1.0)
    print(f"run: {len(records) - 1} steps, energy drift {drift:.2e}")
    assert breakdown is None and drift < 1e-6

    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
