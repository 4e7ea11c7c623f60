import math

import numpy as np
import pytest

from dsscsim.plant import IntegrationError
from dsscsim.sim import (ConfigError, SimTrace, Trajectory, UnmodelledSpec, compute_metrics, config_hash,
                         detect_sliding, example71_trajectories, integrate, total_variation_rate,
                         trajectory_generator, unmodelled_dynamics_filter, validate)


def _zero(ctrl):
    return {"plant": "abstract", "dt": 1e-3, "t_end": 0.5, "channels": {"c": {"controller": ctrl}}}


def test_example71_reference_values():
    tr = example71_trajectories()
    assert tr["x"].evaluate(10.0)[0] == pytest.approx(20.0)
    assert tr["z"].evaluate(0.0)[0] == pytest.approx(5.0)
    assert tr["y"].evaluate(0.0)[0] == pytest.approx(20.0)


def test_trajectory_derivatives_by_finite_difference():
    f = trajectory_generator({"offset": 1.0, "sines": [{"amplitude": 2.0, "omega": 3.0, "phase": 0.4},
                                                       {"amplitude": 0.5, "period": 7.0}]})
    h = 1e-5
    for t in (0.0, 1.3, 4.0):
        assert f(t)[1] == pytest.approx((f(t + h)[0] - f(t - h)[0]) / (2 * h), rel=1e-7)
        assert f(t)[2] == pytest.approx((f(t + h)[1] - f(t - h)[1]) / (2 * h), rel=1e-6)
    assert trajectory_generator(3.0)(2.0) == (3.0, 0.0, 0.0)
    assert Trajectory(2.0).is_constant
    with pytest.raises(ValueError):
        trajectory_generator({"amplitude": 1})


def test_unmodelled_identity_and_step():
    u = np.ones(1000)
    assert np.array_equal(unmodelled_dynamics_filter(u, UnmodelledSpec(1, 0.0), 1e-3), u)
    out = unmodelled_dynamics_filter(u, UnmodelledSpec(1, 0.1), 1e-3)
    t = np.arange(1000) * 1e-3
    assert np.max(np.abs(out - (1 - np.exp(-t / 0.1)))) < 1e-9


def test_unmodelled_second_order_step():
    out = unmodelled_dynamics_filter(np.ones(2000), UnmodelledSpec(2, 0.1), 1e-3)
    t = np.arange(2000) * 1e-3
    want = 1 - np.exp(-t / 0.1) * (1 + t / 0.1)
    assert np.max(np.abs(out - want)) < 1e-9


@pytest.mark.parametrize("order", [1, 2])
def test_unmodelled_unit_dc_gain(order):
    out = unmodelled_dynamics_filter(np.full(5000, -2.5), UnmodelledSpec(order, 0.05), 1e-3)
    assert out[-1] == pytest.approx(-2.5, abs=1e-12)


def test_unmodelled_validation_and_warning():
    with pytest.raises(ValueError):
        UnmodelledSpec(3, 0.1)
    with pytest.raises(ValueError):
        UnmodelledSpec(1, -0.1)
    with pytest.warns(RuntimeWarning):
        unmodelled_dynamics_filter(np.ones(5), UnmodelledSpec(1, 0.01), 0.01)


def test_in_loop_filter_matches_standalone():
    cfg = {"plant": "abstract", "dt": 1e-3, "t_end": 1.0,
           "channels": {"c": {"controller": {"type": "none"}, "command": [{"start": 0.0, "value": 1.0}],
                              "unmodelled": {"order": 1, "mu": 0.1}}}}
    tr = integrate(cfg)
    want = 1 - np.exp(-tr.t / 0.1)
    assert np.max(np.abs(tr["c.u_p"] - want)) < 1e-8


def test_chattering_index():
    t = np.arange(101) * 1e-3
    assert total_variation_rate(np.full(101, 0.3), t) == 0.0
    a = 0.25
    u = a * (-1.0) ** np.arange(101)
    assert total_variation_rate(u, t) == pytest.approx(2 * a / 1e-3)
    assert total_variation_rate(np.zeros(1), t[:1]) == 0.0


def test_zero_config_gives_zero_trace():
    for ctrl in ({"type": "none"}, {"type": "sta", "kappa1": 1.0, "kappa2": 1.0},
                 {"type": "pi", "g1": 1.0, "g2": 1.0}):
        tr = integrate(_zero(ctrl))
        for c in tr.columns:
            if c != "t":
                assert np.all(tr[c] == 0.0) or c.endswith(("kappa1", "kappa2")), c


def test_validation_errors():
    with pytest.raises(ConfigError, match="required keys"):
        validate({})
    with pytest.raises(ConfigError, match="dt"):
        validate({"plant": "abstract", "dt": -1.0, "t_end": 1.0, "channels": {"c": {}}})
    with pytest.raises(ConfigError, match="t_end"):
        validate({"plant": "abstract", "dt": 1.0, "t_end": 0.5, "channels": {"c": {}}})
    with pytest.raises(ConfigError, match="integrator"):
        validate({"plant": "abstract", "dt": 0.1, "t_end": 1.0, "integrator": "rk45", "channels": {"c": {}}})
    with pytest.raises(ConfigError, match="metrics.windows.w"):
        validate({"plant": "abstract", "dt": 0.1, "t_end": 1.0, "channels": {"c": {}},
                  "metrics": {"windows": {"w": [0.5, 2.0]}}})
    with pytest.raises(ConfigError, match="bogus"):
        validate({"plant": "abstract", "dt": 0.1, "t_end": 1.0, "channels": {"c": {}}, "bogus": 1})
    with pytest.raises(ConfigError, match="channels.w"):
        validate({"plant": "uav_first_order", "dt": 0.1, "t_end": 1.0, "channels": {"w": {}}})


def test_nonfinite_state_aborts_with_step():
    cfg = {"plant": "abstract", "dt": 1e-2, "t_end": 50.0,
           "channels": {"c": {"plant": {"k_p": 1.0, "a_p": -20.0}, "initial": {"y": 1.0},
                              "disturbance": {"d3": {"steps": [{"value": 1.0, "start": 0.0}]}}}}}
    with pytest.raises(IntegrationError, match="step") as exc:
        integrate(cfg)
    assert exc.value.step > 0


def test_metric_windows_rejected():
    tr = integrate(_zero({"type": "none"}))
    with pytest.raises(ValueError, match="window"):
        compute_metrics(tr, {"late": (0.2, 5.0)})
    m = compute_metrics(tr, {"early": (0.0, 0.2)})
    assert m.channels["c"].rms_e["early"] == 0.0 and m.channels["c"].t_s is None


def test_detect_sliding_cases(preset):
    tr = integrate(preset("equivalence_dssc", t_end=0.5))
    assert detect_sliding(tr, "z")["t_s"] == 0.0
    sta = integrate(preset("equivalence_sta", t_end=0.5))
    with pytest.raises(ValueError, match="predictor"):
        detect_sliding(sta, "z")
    # a channel whose predictor error never enters the band
    n = 200
    fake = SimTrace({"t": np.arange(n) * 1e-3, "c.sigma_tilde": np.ones(n), "c.k_o": np.ones(n),
                     "c.rho": np.ones(n)}, {"dt": 1e-3})
    assert detect_sliding(fake, "c", delta_rho=0.1) == {"channel": "c", "t_s": None, "stays_inside": False,
                                                         "escape_steps": 0, "T_s_bound": 10.0}


def test_reaching_time_within_bound(preset):
    tr = integrate(preset("reaching"))
    r = detect_sliding(tr, "c", delta_rho=0.1)
    assert r["t_s"] is not None and r["t_s"] <= r["T_s_bound"] == pytest.approx(10.0)


def test_determinism_and_hash(preset):
    cfg = preset("reaching", t_end=1.0)
    a, b = integrate(cfg), integrate(cfg)
    assert a.identical_to(b)
    assert a.meta["config_hash"] == config_hash(cfg)
    assert config_hash(preset("reaching", t_end=2.0)) != config_hash(cfg)


def test_csv_round_trip(tmp_path, preset):
    tr = integrate(preset("reaching", t_end=0.2))
    p = tmp_path / "trace.csv"
    tr.to_csv(p, float_format="%.17g")
    back = SimTrace.from_csv(p)
    assert back.columns == tr.columns
    assert back.meta["config_hash"] == tr.meta["config_hash"]
    assert all(np.array_equal(back[c], tr[c]) for c in tr.columns)


def test_grid_uniform(preset):
    tr = integrate(preset("reaching", t_end=0.5))
    d = np.diff(tr.t)
    assert np.all(d > 0) and np.allclose(d, 1e-3, atol=1e-12)


def _pi_cfg(dt, scheme):
    return {"plant": "abstract", "dt": dt, "t_end": 2.0, "integrator": scheme,
            "channels": {"c": {"l0": 1.0, "plant": {"k_p": 1.0, "a_p": 0.5}, "initial": {"y": 1.0},
                               "trajectory": {"sines": [{"amplitude": 1.0, "omega": 2.0}]},
                               "controller": {"type": "pi", "g1": 2.0, "g2": 3.0}}}}


@pytest.mark.parametrize("scheme,order", [("euler", 1), ("heun", 2), ("rk4", 4)])
def test_scheme_order_on_smooth_run(scheme, order):
    ref = integrate(_pi_cfg(1e-4, "rk4"))["c.y"][-1]
    e1 = abs(integrate(_pi_cfg(0.02, scheme))["c.y"][-1] - ref)
    e2 = abs(integrate(_pi_cfg(0.01, scheme))["c.y"][-1] - ref)
    assert 2 ** order * 0.6 < e1 / e2 < 2 ** order * 1.6


def test_example71_simplified_bounded(preset):
    tr = integrate(preset("example71_simplified"))
    assert tr.t[-1] == pytest.approx(60.0)
    for ch in ("x", "y", "z", "psi"):
        e = tr[f"{ch}.e"]
        assert np.all(np.isfinite(e)) and np.max(np.abs(e)) < 25.0
