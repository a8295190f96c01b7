"""Smoke test for the salinity_py extension module.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import sys
import tempfile

import salinity_py as sp


def main() -> int:
    tb = sp.first_stokes_tb(35.0, 20.0, 7.0, 30.0)
    assert abs(tb - 187.99273837644747) < 1e-9, tb

    re, im = sp.permittivity(20.0, 35.0)
    assert re > 1.0 and im < 0.0

    cold = abs(sp.sss_sensitivity(35.0, 5.0, 0.0, 0.0))
    warm = abs(sp.sss_sensitivity(35.0, 25.0, 0.0, 0.0))
    assert cold < warm, (cold, warm)

    assert abs(sp.diluted_slope(1.0, 1.0, 1.0) - 0.5) < 1e-15
    draw = sp.draw_correlated([1.2, 1.5, 1.9], [[1, 0.57, -0.01], [0.57, 1, 0.65], [-0.01, 0.65, 1]], 3)
    assert len(draw) == 3
    try:
        sp.draw_correlated([1.0, 1.0], [[1, 2], [2, 1]], 0)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid correlation accepted")

    cfg = sp.Config(
        "classes = [8]\nworld_resolution = 6.0\nworld_months = 2\n"
        "calibration_pixels = 2000\nmax_epochs = 5\ntest_replicates = 1\n"
    )
    cfg.seed = 11
    with tempfile.TemporaryDirectory() as out:
        try:
            sp.run_experiment(cfg, out, "b1", 8)
        except FileNotFoundError:
            pass
        else:
            raise AssertionError("run_experiment ran without calibration")
        ratios = sp.calibrate(cfg, out)
        lo, hi = ratios[8]
        assert 0.4 <= lo <= hi <= 0.7, ratios
        reports = sp.run_experiment(cfg, out, "b1", 8)
        slope = reports["b1"]["slope"]
        net = sp.Network.load(f"{out}/nets/b1_class8.txt")
        sss = net.retrieve([200.0, 205.0, 210.0, 15.0, 7.0])
        print(f"tb {tb:.4f} K, class-8 b1 slope {slope:.3f}, sample retrieval {sss:.2f} psu")
    print("smoke ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
