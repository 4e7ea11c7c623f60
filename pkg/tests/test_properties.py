import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dsscsim.controller_zoo import phi_functions
from dsscsim.dssc import eq35_phi, modulation_rho
from dsscsim.gain_design import DesignFree, design_gains, rho_bounds, variable_gains
from dsscsim.plant import NominalControlSpec, PlantParams
from dsscsim.sim import total_variation_rate

sigmas = st.floats(-1e4, 1e4, allow_nan=False)
pos = st.floats(1e-3, 10.0)
VARIANTS = ["standard", "delta_case1", "delta_case2", "vgsta_approx", "pi"]


@given(sigmas, st.sampled_from(VARIANTS), pos, st.floats(0, 5), pos)
def test_phi_variants_odd(s, variant, delta, pa, pb):
    a = phi_functions(s, variant, delta, pa, pb)
    b = phi_functions(-s, variant, delta, pa, pb)
    assert a[0] == -b[0] and a[1] == -b[1]


@given(sigmas, st.floats(0, 5), pos, pos)
def test_eq35_dominates_linear_part(s, pa, pb, delta):
    assert abs(eq35_phi(s, pa, pb, delta)[0]) >= pb * abs(s) * (1 - 1e-15)


@given(st.sampled_from([0.01, 1.0, 100.0]), st.sampled_from([1.0, -1.0]))
def test_delta_variant_converges_monotonically(mag, sign):
    s = sign * mag
    ref = phi_functions(s)[0]
    errs = [abs(phi_functions(s, "delta_case1", d)[0] - ref) for d in (1.0, 0.1, 0.01, 0.001)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


@given(pos, st.floats(-50, 50), st.floats(0, 100), st.floats(0, 1), st.floats(0, 10))
def test_modulation_dominates_filter_state(k_o, u_av, d, drho, kp):
    rho = modulation_rho(k_o, u_av, d, drho, kp)
    assert rho >= abs(u_av) * (1 - 1e-12)
    assert rho >= (d + drho) / k_o * (1 - 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(0.5, 3.0))
def test_variable_gains_even(eps, scale):
    g = design_gains(PlantParams(k_p=1, k_p_lower=0.8, k_p_upper=1.2, a_p_bound=1.5),
                     NominalControlSpec.tracking(0.5, 1, 1), DesignFree(l0=0.5, epsilon=eps))
    for s, e in ((scale, -0.3), (-2 * scale, 1.0), (0.0, scale)):
        assert variable_gains(s, e, g) == variable_gains(-s, -e, g)
        assert variable_gains(s, e, g) == variable_gains(s, -e, g)


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20), st.floats(-20, 20), pos, st.floats(1.0, 4.0))
def test_rho_bounds_nonincreasing_in_phi_b(s, e, pb, factor):
    g = design_gains(PlantParams(k_p=1, k_p_lower=0.8, k_p_upper=1.2, a_p_bound=1.5),
                     NominalControlSpec.tracking(0.5, 1, 1), DesignFree(l0=0.5, epsilon=0.5, phi_b=pb))
    lo = rho_bounds(s, e, g)
    hi = rho_bounds(s, e, g.with_overrides(phi_b=pb * factor))
    assert hi[0] <= lo[0] and hi[1] <= lo[1]


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50), st.floats(-5, 5))
def test_total_variation_shift_invariant(u, c):
    t = np.arange(len(u)) * 0.1
    a = total_variation_rate(np.array(u), t)
    b = total_variation_rate(np.array(u) + c, t)
    assert a >= 0 and math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)
