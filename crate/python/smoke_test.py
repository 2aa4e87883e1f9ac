"""Smoke test for the `loggas` extension module.

Run after `pip install --no-build-isolation ./crates/py`, or point
PYTHONPATH at a directory holding the built `loggas` shared library.
"""

import math
import os
import tempfile

import loggas


def main():
    c_d, beta_c, beta_s = loggas.dimension_constants(2)
    assert abs(c_d - 2 * math.pi) < 1e-12 and beta_c == 4.0 and abs(beta_s - 2 * math.pi) < 1e-12
    report = loggas.threshold_report(2)
    assert report["beta_0"] < 4.0 and report["ordering"] == "beta_s>beta_c"

    tables = loggas.PotentialTables(2, 32)
    x = 0.2
    assert abs(tables.g([x, 0.3]) - tables.g([-x, -0.3])) < 1e-12
    fx, fy = tables.force([x, 0.3])
    gx, gy = tables.force([-x, -0.3])
    assert abs(fx + gx) < 1e-9 and abs(fy + gy) < 1e-9

    mu = loggas.Field.cosine(32, 0.05, [1, 0])
    assert abs(mu.mass() - 1.0) < 1e-14
    result = loggas.solve(mu, 2.0, 1e-3, 2.0, tables, stop="l2_below", tol=1e-7)
    assert result["stop"] == "l2_below", result["stop"]
    assert result["final"].distance_to_uniform("l2") <= 1e-7 * 1.01

    lam = loggas.eigenvalue(3 * math.pi, 1.0, 2)
    expansion = loggas.GrenierExpansion(3 * math.pi, [1, 0], 2)
    assert abs(expansion.growth_rate - lam) < 1e-12
    assert 0 < expansion.escape_forecast(1e-3) < expansion.validity_time(1e-3)

    start = loggas.Field.cosine(64, 0.25, [1, 0])
    big = loggas.PotentialTables(2, 64)
    steady, converged, residual, _ = loggas.steady_state(start, 8.0, big)
    assert converged and residual < 1e-10
    cert = loggas.mlhls_counterexample(8.0, steady, big, [100, 1000])
    assert all(gap > cert["eta"] for _, _, gap in cert["rows"])

    ens = loggas.ParticleEnsemble.sample(mu, 64, 2.0, 1e-3, 7)
    ens.step(1e-3, tables, steps=5)
    again = loggas.ParticleEnsemble.sample(mu, 64, 2.0, 1e-3, 7)
    again.step(1e-3, tables, steps=5)
    assert ens.positions() == again.positions() and len(ens) == 64
    assert math.isfinite(ens.modulated_energy(mu, tables))

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "mu.lgas")
        mu.write(path, 1.5)
        back, t = loggas.Field.read(path)
        assert t == 1.5 and back.values() == mu.values()

    print("python smoke test passed")


if __name__ == "__main__":
    main()
