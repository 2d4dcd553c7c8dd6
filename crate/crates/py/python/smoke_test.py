"""Smoke test for the scs_mimo_py extension module."""

import cmath
import math

import scs_mimo_py as sm


def main():
    loss = sm.path_loss_db(28_000.0, 2.0, 0.1)
    assert math.isclose(loss, 20 * math.log10(28_000.0) + 20 * math.log10(0.1) + 32.5, abs_tol=1e-9), loss

    a = sm.steering_vector(8, 0.3)
    assert len(a) == 8
    assert all(math.isclose(abs(x), 1.0, rel_tol=1e-12) for x in a)
    assert cmath.isclose(a[1] / a[0], cmath.exp(1j * math.pi * 0.3), rel_tol=1e-12)

    assert sm.min_time_slots(16, 2) == 9
    assert sm.orthogonal_pilot_overhead(1, 4, 32, 512, 2) == 32_768
    assert sm.p_th_for_snr(20.0) > sm.p_th_for_snr(30.0)

    cfg = sm.SystemConfig()
    cfg.snr_db = 30.0
    cfg.validate()
    assert sm.SystemConfig.from_text(cfg.to_text()) == cfg
    bad = sm.SystemConfig()
    bad.n_chain_user = bad.n_ant_user + 1
    try:
        bad.validate()
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    trial = sm.run_trial(cfg, seed=7)
    assert set(trial) == {"ssamp", "adaptive-omp", "oracle-ls"}
    assert trial == {k: {**v, "wall_time_s": trial[k]["wall_time_s"]} for k, v in sm.run_trial(cfg, seed=7).items()}

    rows = sm.sweep(cfg, "G", [8.0, 10.0], trials=4, seed=1, workers=2)
    assert len(rows) == 6
    assert all(r["trials"] == 4 for r in rows)

    report = sm.validation_battery(10, seed=3)
    assert report["certified"] == 10 and report["consistent"] == 10

    print("smoke test passed")


if __name__ == "__main__":
    main()
