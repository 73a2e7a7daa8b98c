"""Smoke test for the compiled extension: python python/smoke_test.py"""

import math

import sobolab


def main():
    t = sobolab.exponents(2, 2.0, 0.0, 3.0, s=5.0)
    assert t["valid"], t
    assert math.isclose(t["threshold"]["s_max"], 6.0), t
    assert t["witness"] is not None

    bad = sobolab.exponents(2, 2.0, 5.0, 3.0)
    assert not bad["valid"]
    assert "alpha_outside_ap_window" in bad["threshold"]["validity"]

    assert sobolab.ap(2, 2.0, 1.0)["verdict"] == "satisfied"
    assert sobolab.ap(2, 2.0, 3.0)["verdict"] == "violated"

    d = sobolab.distortion([2.0], 0.5, 2.0, 1.52, 3.0, 2.1375)
    assert d["ia"]["verdict"] == "finite", d["ia"]
    assert d["ja"]["verdict"] == "finite", d["ja"]

    u = sobolab.solve(0.125, 1.0)
    assert u["weak_residual"] < 1e-8, u
    assert u["max_abs"] > 0.0

    r = sobolab.probe(2, 2.0, 0.0, 3.0, 5.0)
    assert r["verdict"] == "bounded", r

    try:
        sobolab.ap(2, 0.5, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("p <= 1 should be rejected")

    print("sobolab smoke test: ok")


if __name__ == "__main__":
    main()
