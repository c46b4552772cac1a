"""Smoke test for the freqstrat_py extension module."""

import json
import math
import tempfile

import freqstrat_py as fs


def main():
    m = fs.Modulus("power", c=1.0, a=1.0)
    assert abs(m.theta_tilde(0.1) - 0.1 / math.log(2) ** 2) < 1e-14

    dom = fs.Domain(3)
    u = fs.HarmonicField.model(dom, "halfspace_poly", '{"n": 2}')
    rows = u.frequency_profile([0.0, 0.0, 0.0], [0.125, 0.25, 0.5])
    for r, branch, n, *_ in rows:
        assert branch == "boundary"
        assert abs(n - 2.0) < 1e-9, (r, n)

    sing = u.singular_points([-0.5, -0.5, 0.0], [0.5, 0.5, 0.5], 0.1)
    assert sing and all(abs(p[0]) < 1e-8 and abs(p[2]) < 1e-8 for p in sing)

    beta, ev, com = fs.beta_number([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [0, 0, 0], 3.0, 1)
    assert beta < 1e-12 and abs(com[0] - 1.0) < 1e-15

    seg = [[0.0, -0.5 + i / 400, 0.0] for i in range(401)]
    val, err = fs.minkowski_estimate(seg, 1.0 / 64, probes=200_000, seed=7)
    assert abs(val - math.pi / 4) < 0.1 and err < 0.02

    rep = u.iterate_cover(seg, r0=0.01, r_star=0.5)
    assert rep["coverage"] and rep["disjoint"]

    cfg = {
        "experiment": "frequency-profile",
        "domain": {"dim": 2},
        "field": {"model": "halfspace_poly", "params": {"n": 2}},
        "params": {"expected_frequency": 2.0, "count": 4},
    }
    with tempfile.TemporaryDirectory() as d:
        assert fs.run_experiment(json.dumps(cfg), d)

    print("freqstrat_py", fs.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
