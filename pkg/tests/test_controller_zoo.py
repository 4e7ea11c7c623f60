import copy
import math

import numpy as np
import pytest

from dsscsim.controller_zoo import (StaParams, StaState, phi_functions, sta_control, sta_control_step,
                                    synthesized_equivalence_report)
from dsscsim.sim import integrate


def test_standard_phi():
    assert phi_functions(4.0) == (2.0, 0.5)
    assert phi_functions(-4.0) == (-2.0, -0.5)
    for v in ("standard", "delta_case1", "delta_case2", "vgsta_approx", "pi"):
        assert phi_functions(0.0, v, 0.1, 1.0, 1.0) == (0.0, 0.0)


def test_delta_case2_phi2():
    _, ph2 = phi_functions(1.0, "delta_case2", 0.1)
    assert ph2 == pytest.approx(1 / (2 * 1.21))
    assert ph2 == pytest.approx(0.4132, abs=5e-5)


def test_delta_case1_phi1_closed_form():
    s, d = 2.0, 0.3
    r = math.sqrt(s)
    ph1, _ = phi_functions(s, "delta_case1", d)
    assert ph1 == pytest.approx((1 - d * math.log((r + d) / d) / r) * r)


@pytest.mark.parametrize("variant", ["delta_case1", "vgsta_approx"])
def test_phi2_is_phi1_times_slope(variant):
    h = 1e-6
    for s in (-2.0, -0.1, 0.3, 5.0):
        f = lambda x: phi_functions(x, variant, 0.2, 0.8, 1.5)[0]
        slope = (f(s + h) - f(s - h)) / (2 * h)
        assert phi_functions(s, variant, 0.2, 0.8, 1.5)[1] == pytest.approx(f(s) * slope, rel=1e-6)


def test_delta_case1_near_zero_is_finite():
    ph1, ph2 = phi_functions(1e-14, "delta_case1", 0.1)
    assert math.isfinite(ph1) and math.isfinite(ph2)
    assert abs(ph1) < 1e-12


def test_param_errors():
    with pytest.raises(ValueError):
        phi_functions(1.0, "delta_case1", 0.0)
    with pytest.raises(ValueError):
        phi_functions(1.0, "nope")
    with pytest.raises(ValueError):
        StaParams(kappa1=0.0)
    with pytest.raises(ValueError):
        StaParams(variant="pi")
    with pytest.raises(ValueError):
        StaParams(variant="vgsta_approx")
    with pytest.raises(ValueError):
        StaParams(integral0="bogus")


def test_sta_control_low_gain_example():
    p = StaParams(kappa1=0.075, kappa2=0.035)
    assert sta_control(StaState(), 4.0, p) == pytest.approx(-0.15)


def test_sta_zero_sigma_holds_zero():
    p = StaParams(kappa1=1.5, kappa2=1.1)
    st = StaState()
    assert all(sta_control_step(st, 0.0, p, 1e-3) == 0.0 for _ in range(1000))


def test_pi_from_dynamic_closed_form():
    p = StaParams.pi_from_dynamic(1.0, 0.5, 2.0)
    assert (p.g1, p.g2) == (2.0, 1.0)
    st = StaState()
    u = None
    for _ in range(1000):
        u = sta_control_step(st, 1.0, p, 1e-3)
    assert u == pytest.approx(-3.0)


def _pi_cfg(dt):
    return {"plant": "abstract", "dt": dt, "t_end": 2.0,
            "channels": {"c": {"l0": 1.0, "plant": {"k_p": 1.0, "a_p": 0.5}, "initial": {"y": 1.0},
                               "trajectory": {"sines": [{"amplitude": 1.0, "omega": 2.0}]},
                               "controller": {"type": "pi", "g1": 2.0, "g2": 3.0}}}}


def test_integral_refines_with_integrator_order():
    ref = integrate(_pi_cfg(0.01 / 16))["c.integral"][-1]
    e1 = abs(integrate(_pi_cfg(0.02))["c.integral"][-1] - ref)
    e2 = abs(integrate(_pi_cfg(0.01))["c.integral"][-1] - ref)
    assert e1 / e2 > 8.0


def test_report_identical_traces_zero(preset):
    tr = integrate(preset("equivalence_dssc", t_end=1.0))
    rep = synthesized_equivalence_report(tr, tr, "z")
    assert rep.sigma_sup == rep.sigma_rms == rep.u_sup == rep.u_rms == rep.C_s == 0.0
    assert rep.n_samples > 0


def test_report_rejects_mismatched_grids(preset):
    a = integrate(preset("equivalence_sta", t_end=0.5))
    b = integrate(preset("equivalence_sta", t_end=0.5, dt=2e-4))
    with pytest.raises(ValueError, match="grid"):
        synthesized_equivalence_report(a, b, "z", t_s=0.0)


def test_gain_reducer_widens_divergence(preset):
    sta = integrate(preset("equivalence_sta"))
    out = {}
    for delta in (0.01, 1.0):
        cfg = preset("equivalence_dssc")
        cfg["channels"]["z"]["controller"]["delta"] = delta
        d = integrate(cfg)
        ts = d.events["t_s"]["z"] or 0.0
        out[delta] = synthesized_equivalence_report(d, sta, "z", t_s=ts).sigma_sup
    assert out[1.0] > out[0.01]
    assert out[0.01] < 0.025
