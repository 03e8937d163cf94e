import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from irdecoherence.errors import (CutoffMissing, Indeterminate, InadmissibleFormFactor,
                                  IRDivergent, OscillationOverflow)
from irdecoherence.spectral import (Boundedness, FormFactor, IRClass, Kernel, boundedness_check,
                                    field_quadrature, ir_classify, mode_grid, oscillatory_integral,
                                    weighted_norm_sq)


def laplace_oracle(J, power, t, kernel):
    """Closed forms from ``int w^(s-1) e^(-a w) e^(i w t) dw = Gamma(s) (a - i t)^(-s)``.

    Valid by analytic continuation for ``s > -2`` with the cosine kernel and
    ``s > -1`` with the sine kernel; ``s = 0`` is the logarithmic limit.
    """
    mpmath.mp.dps = 40
    c2 = mpmath.mpf(J.amplitude) ** 2
    a = mpmath.mpf(J.decay_rate)
    s = mpmath.mpf(2 * J.sigma + power + 1)
    t = mpmath.mpf(t)
    z = a - 1j * t
    if kernel is Kernel.ONE_MINUS_COS:
        if abs(s) < 1e-30:
            return float(c2 * 0.5 * mpmath.log(1 + (t / a) ** 2))
        return float(c2 * mpmath.gamma(s) * (a ** -s - mpmath.re(z ** -s)))
    if kernel is Kernel.SIN:
        if abs(s) < 1e-30:
            return float(c2 * mpmath.atan(t / a))
        return float(c2 * mpmath.gamma(s) * mpmath.im(z ** -s))
    raise ValueError(kernel)


# -- weighted norms ---------------------------------------------------------

def test_norm_example_half():
    J = FormFactor(sigma=1.0, cutoff=1.0, amplitude=1.0)
    res = weighted_norm_sq(J, -2)
    assert res.value == pytest.approx(0.5, rel=1e-12)
    assert res.converged and res.abs_error_estimate >= 0


def test_zero_coupling_norm_is_zero():
    J = FormFactor(sigma=1.3, cutoff=1.0, amplitude=0.0)
    for p in (-2, 0, 3):
        assert weighted_norm_sq(J, p).value == 0.0


def test_norm_divergent_prescreen():
    J = FormFactor(sigma=1.0, cutoff=1.0)
    with pytest.raises(IRDivergent):
        weighted_norm_sq(J, -3)
    res = weighted_norm_sq(J, -3, strict=False)
    assert not res.converged and math.isinf(res.value)


@pytest.mark.parametrize("sigma", [0.55, 0.6, 0.75, 1.0, 1.5, 2.0, 3.3])
@pytest.mark.parametrize("power", [-2, -1, 0, 2])
@pytest.mark.parametrize("cutoff", [0.3, 1.0, 7.0])
def test_norm_matches_gamma_oracle(sigma, power, cutoff):
    J = FormFactor(sigma=sigma, cutoff=cutoff, amplitude=1.3)
    s = mpmath.mpf(2 * sigma + power + 1)
    exact = float(mpmath.mpf(J.amplitude) ** 2 * mpmath.gamma(s) * (mpmath.mpf(cutoff) / 2) ** s)
    assert weighted_norm_sq(J, power).value == pytest.approx(exact, rel=1e-10)


@given(c=st.floats(0.01, 10.0), sigma=st.floats(0.6, 3.0))
def test_norm_quadratic_in_amplitude(c, sigma):
    J = FormFactor(sigma=sigma, cutoff=1.0, amplitude=c)
    J2 = FormFactor(sigma=sigma, cutoff=1.0, amplitude=2 * c)
    assert weighted_norm_sq(J2, -2).value == pytest.approx(4 * weighted_norm_sq(J, -2).value,
                                                           rel=1e-13)


def test_inadmissible_profiles():
    with pytest.raises(InadmissibleFormFactor):
        FormFactor(sigma=0.5)
    with pytest.raises(InadmissibleFormFactor):
        FormFactor(sigma=1.0, amplitude=-1.0)
    with pytest.raises(CutoffMissing):
        FormFactor(sigma=1.0, cutoff=math.inf)


# -- oscillatory integrals --------------------------------------------------

def test_frullani_example():
    J = FormFactor(sigma=1.0, cutoff=2.0, amplitude=1.0)  # w^2 exp(-w)
    got = oscillatory_integral(J, -3, 1.0, Kernel.ONE_MINUS_COS).value
    assert got == pytest.approx(0.5 * math.log(2.0), rel=1e-12)


def test_t_zero_vanishes(regular_sigma2):
    for kernel in Kernel:
        assert oscillatory_integral(regular_sigma2, -3, 0.0, kernel).value == 0.0


@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_closed_form_on_0_100(sigma):
    J = FormFactor(sigma=sigma, cutoff=2.0, amplitude=1.0)
    for t in np.concatenate([[0.0], np.geomspace(1e-3, 100.0, 60)]):
        exact = 0.5 * math.log1p(t * t) if sigma == 1.0 else 1 - (1 - t * t) / (1 + t * t) ** 2
        got = oscillatory_integral(J, -3, t, Kernel.ONE_MINUS_COS).value
        assert got == pytest.approx(exact, rel=1e-8, abs=1e-300)


@pytest.mark.parametrize("sigma", [0.6, 0.8, 1.0, 1.2, 2.0])
@pytest.mark.parametrize("kernel", [Kernel.ONE_MINUS_COS, Kernel.SIN])
def test_oscillatory_up_to_1e6(sigma, kernel):
    J = FormFactor(sigma=sigma, cutoff=1.5, amplitude=0.7)
    for t in np.geomspace(1e-2, 1e6, 17):
        exact = laplace_oracle(J, -3, t, kernel)
        got = oscillatory_integral(J, -3, t, kernel).value
        assert got == pytest.approx(exact, rel=1e-8), (t, got, exact)


def test_sin_kernel_odd_in_t(regular_sigma2):
    v = oscillatory_integral(regular_sigma2, -3, 3.0, Kernel.SIN).value
    assert oscillatory_integral(regular_sigma2, -3, -3.0, Kernel.SIN).value == -v


@pytest.mark.parametrize("sigma", [0.6, 1.0, 2.0])
def test_kernel_identity(sigma):
    J = FormFactor(sigma=sigma, cutoff=1.0)
    for t in np.geomspace(1e-2, 1e5, 15):
        one = oscillatory_integral(J, -3, t, Kernel.ONE_MINUS_COS).value
        cs = oscillatory_integral(J, -3, t, Kernel.COS_SQ).value
        ss = oscillatory_integral(J, -3, t, Kernel.SIN_SQ).value
        assert cs + ss == pytest.approx(2 * one, rel=1e-12)


def test_thermal_against_quadrature_oracle():
    J = FormFactor(sigma=2.0, cutoff=1.0)
    mpmath.mp.dps = 30
    for beta in (0.5, 3.0):
        for t in (0.7, 4.0):
            f = lambda w: (w ** 4 * mpmath.exp(-2 * w) * w ** -3 * (1 - mpmath.cos(w * t))
                           / mpmath.tanh(beta * w / 2))
            exact = float(mpmath.quad(f, mpmath.linspace(0, 40, 60) + [mpmath.inf]))
            got = oscillatory_integral(J, -3, t, Kernel.ONE_MINUS_COS, beta=beta).value
            assert got == pytest.approx(exact, rel=1e-10)


@given(t=st.floats(1e-3, 1e4), beta=st.floats(0.05, 50.0))
def test_thermal_strictly_exceeds_vacuum(t, beta):
    J = FormFactor(sigma=1.0, cutoff=1.0)
    vac = oscillatory_integral(J, -3, t, Kernel.ONE_MINUS_COS).value
    th = oscillatory_integral(J, -3, t, Kernel.ONE_MINUS_COS, beta=beta).value
    assert th > vac


def test_thermal_prescreen_and_overflow():
    J = FormFactor(sigma=0.6, cutoff=1.0)
    with pytest.raises(IRDivergent):
        oscillatory_integral(J, -4, 1.0, Kernel.SIN)
    with pytest.raises(OscillationOverflow):
        oscillatory_integral(FormFactor(sigma=2.0), -3, 2e6, Kernel.ONE_MINUS_COS)


# -- classification ---------------------------------------------------------

@pytest.mark.parametrize("sigma,expected", [(2.0, IRClass.REGULAR), (1.0, IRClass.IR_DIVERGENT),
                                            (0.75, IRClass.IR_DIVERGENT),
                                            (1.0001, IRClass.REGULAR)])
def test_ir_classify(sigma, expected):
    assert ir_classify(FormFactor(sigma=sigma)) is expected


def test_boundedness_examples():
    J = FormFactor(sigma=1.0, cutoff=1.0).with_norm(0.5)
    assert boundedness_check(J, "velocity") is Boundedness.SUBCRITICAL
    assert boundedness_check(FormFactor(1.0, amplitude=0.0), "velocity") is Boundedness.SUBCRITICAL
    # position: c^2 Gamma(2 sigma - 1) (cutoff / 2)^(2 sigma - 1) = omega0^2
    omega0, sigma, cutoff = 1.7, 1.5, 1.0
    c = math.sqrt(omega0 ** 2 / (math.gamma(2 * sigma - 1) * (cutoff / 2) ** (2 * sigma - 1)))
    crit = FormFactor(sigma, cutoff, c)
    assert boundedness_check(crit, "position", omega0) is Boundedness.CRITICAL
    assert boundedness_check(crit.scaled(1.001), "position", omega0) is Boundedness.SUPERCRITICAL
    assert boundedness_check(FormFactor(2.0).with_norm(1.0), "velocity") is Boundedness.CRITICAL


# -- tabulated profiles -----------------------------------------------------

def test_tabulated_profile_recovers_default_family(tmp_path):
    ref = FormFactor(sigma=2.0, cutoff=1.0)
    w = np.geomspace(1e-4, 30.0, 400)
    path = tmp_path / "j.csv"
    path.write_text("omega,J\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in zip(w, ref(w))))
    tab = FormFactor.from_csv(path)
    assert tab.tabulated
    assert tab.sigma == pytest.approx(2.0, abs=1e-3)
    assert ir_classify(tab) is IRClass.REGULAR
    assert weighted_norm_sq(tab, -2).value == pytest.approx(weighted_norm_sq(ref, -2).value,
                                                            rel=1e-6)
    t = 3.0
    assert oscillatory_integral(tab, -3, t, Kernel.ONE_MINUS_COS).value == pytest.approx(
        oscillatory_integral(ref, -3, t, Kernel.ONE_MINUS_COS).value, rel=1e-6)


def test_tabulated_indeterminate_slope(rng):
    w = np.geomspace(1e-3, 10.0, 50)
    noisy = w ** 2 * np.exp(rng.normal(0.0, 0.5, size=w.size))
    tab = FormFactor.from_table(w, noisy)
    with pytest.raises(Indeterminate):
        ir_classify(tab)


# -- grids ------------------------------------------------------------------

@pytest.mark.parametrize("scheme", ["midpoint", "log"])
def test_mode_grid_covers_support(scheme, regular_sigma2):
    nodes, widths = mode_grid(regular_sigma2, 100, scheme)
    assert np.all(np.diff(nodes) > 0) and np.all(widths > 0)
    assert nodes[0] > 0


def test_field_quadrature_integrates_profile(regular_sigma2):
    nodes, weights = field_quadrature(regular_sigma2, t_max=10.0)
    assert np.sum(weights * regular_sigma2(nodes)) == pytest.approx(
        weighted_norm_sq(regular_sigma2, 0).value, rel=1e-12)
