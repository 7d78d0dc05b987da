import numpy as np
import pytest
from scipy.integrate import trapezoid

from glebench.enums import RegimeTag
from glebench.kernel import (KernelSpec, build_modes, classify_regime, eval_kernel, fit_power_law, fit_tail_exponent,
                             kernel_l2_norm, kernel_table, tail_mass, truncation_bound)


def test_single_mode_is_one():
    modes = build_modes(KernelSpec(0.5, 3.0, 1))
    assert modes.c.tolist() == [1.0]
    assert modes.lam.tolist() == [1.0]


def test_build_modes_formula(three_modes):
    assert three_modes.c == pytest.approx([1.0, 0.125, 1 / 27], rel=1e-15)
    assert three_modes.lam == pytest.approx([1.0, 0.25, 1 / 9], rel=1e-15)


def test_build_modes_fractional_exponent():
    modes = build_modes(KernelSpec(1.5, 3.0, 2))
    assert modes.c[1] == pytest.approx(2 ** -5.5, rel=1e-15)
    assert modes.lam[1] == pytest.approx(2 ** -3, rel=1e-15)


def test_modes_strictly_decreasing(diffusive_modes):
    assert np.all(np.diff(diffusive_modes.c) < 0)
    assert np.all(np.diff(diffusive_modes.lam) < 0)
    assert diffusive_modes.c[0] == 1.0 and diffusive_modes.lam[0] == 1.0


@pytest.mark.parametrize("spec", [KernelSpec(0.5, 3.0, 0), KernelSpec(-1.0, 3.0, 5), KernelSpec(1.0, 0.0, 5),
                                  KernelSpec(1.0, 2.0, 5, s=0.5)])
def test_build_modes_rejects_invalid(spec):
    with pytest.raises(RuntimeError):
        build_modes(spec)


def test_single_mode_kernel_is_exponential():
    modes = build_modes(KernelSpec(1.0, 2.0, 1))
    assert eval_kernel(modes, 0.0) == 1.0
    assert eval_kernel(modes, 2.0) == pytest.approx(np.exp(-2.0), rel=1e-15)


def test_kernel_at_zero_is_partial_zeta_sum():
    modes = build_modes(KernelSpec(1.0, 2.0, 100))
    expected = sum(k ** -3.0 for k in range(1, 101))
    assert eval_kernel(modes, 0.0) == pytest.approx(expected, rel=1e-13)
    assert eval_kernel(modes, 0.0) == pytest.approx(1.20201, abs=1e-5)


def test_kernel_monotone(diffusive_modes):
    values = eval_kernel(diffusive_modes, np.linspace(0, 100, 500))
    assert np.all(np.diff(values) < 0)
    assert np.all(values > 0)


def test_kernel_rejects_negative_time(diffusive_modes):
    with pytest.raises(RuntimeError):
        eval_kernel(diffusive_modes, -1.0)


def test_truncated_kernel_is_dominated():
    full = build_modes(KernelSpec(1.5, 3.0, 40))
    short = full.truncate(10)
    t = np.geomspace(1e-3, 1e3, 50)
    assert np.all(eval_kernel(short, t) <= eval_kernel(full, t))


@pytest.mark.parametrize("alpha,beta,n_modes", [(0.5, 3.0, 1000), (1.5, 3.0, 1000)])
def test_truncation_bound_dominates(alpha, beta, n_modes):
    spec = KernelSpec(alpha, beta, n_modes)
    modes = build_modes(KernelSpec(alpha, beta, 4 * n_modes))
    t = np.geomspace(1e-3, 1e4, 80)
    difference = eval_kernel(modes, t) - eval_kernel(modes.truncate(n_modes), t)
    assert np.all(difference >= 0)
    assert np.all(difference <= truncation_bound(spec))
    assert tail_mass(spec) <= truncation_bound(spec)


def test_tail_mass_matches_direct_sum():
    spec = KernelSpec(1.5, 3.0, 10)
    direct = float(np.sum(np.arange(11, 200001, dtype=float) ** -5.5))
    assert tail_mass(spec) == pytest.approx(direct, rel=1e-9)


def test_kernel_l2_norm_single_mode():
    modes = build_modes(KernelSpec(1.0, 2.0, 1))
    assert kernel_l2_norm(modes) == pytest.approx(0.5)


def test_kernel_l2_norm_matches_quadrature(three_modes):
    t = np.linspace(0, 400, 400001)
    values = eval_kernel(three_modes, t) ** 2
    assert kernel_l2_norm(three_modes) == pytest.approx(trapezoid(values, t), rel=1e-6)


@pytest.mark.parametrize("alpha,beta,tag,upper", [(1.5, 3.0, RegimeTag.DIFFUSIVE, 0.75),
                                                  (0.5, 3.0, RegimeTag.SUBDIFFUSIVE, 0.75),
                                                  (1.0, 2.0, RegimeTag.CRITICAL, 1.0)])
def test_classify_regime(alpha, beta, tag, upper):
    regime = classify_regime(KernelSpec(alpha, beta, 10, s=0.6))
    assert regime.tag == tag
    assert regime.s_range == pytest.approx((0.5, upper))
    assert regime.s_in_range


def test_classify_unclassified():
    regime = classify_regime(KernelSpec(0.5, 1.0, 10, s=0.6))
    assert regime.tag == RegimeTag.UNCLASSIFIED
    assert regime.s_range is None
    assert not regime.s_in_range


def test_classify_flags_s_outside_range():
    regime = classify_regime(KernelSpec(1.5, 3.0, 10, s=0.9))
    assert regime.tag == RegimeTag.DIFFUSIVE
    assert not regime.s_in_range


def test_fit_power_law_exact():
    t = np.geomspace(1, 1000, 30)
    fit = fit_power_law(t, 3.0 * t ** -0.7)
    assert fit.slope == pytest.approx(-0.7, abs=1e-10)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-10)
    assert fit.n_points == 30


def test_fit_power_law_needs_two_points():
    with pytest.raises(RuntimeError):
        fit_power_law(np.array([1.0, 2.0]), np.array([1.0, 0.5]), window=(1.5, 3.0))


def test_single_mode_has_no_power_law():
    modes = build_modes(KernelSpec(0.5, 3.0, 1))
    with pytest.warns(UserWarning):
        slope = fit_tail_exponent(modes, (1.0, 10.0), 20)
    assert slope < -2


def test_fit_rejects_non_positive_window(diffusive_modes):
    with pytest.raises(RuntimeError):
        fit_tail_exponent(diffusive_modes, (0.0, 10.0), 20)
    with pytest.raises(RuntimeError):
        fit_tail_exponent(diffusive_modes, (1.0, 10.0), 5)


@pytest.mark.slow
@pytest.mark.parametrize("alpha,beta", [(0.5, 3.0), (1.0, 2.0)])
def test_tail_exponent(alpha, beta):
    modes = build_modes(KernelSpec(alpha, beta, 100000))
    slope = fit_tail_exponent(modes, (10.0, 1000.0), 50)
    assert slope == pytest.approx(-alpha, abs=0.05)


def test_kernel_table(three_modes):
    table = kernel_table(three_modes, np.array([0.0, 1.0]))
    assert list(table.columns) == ["t", "K", "tail_bound"]
    assert table["K"].iloc[0] == pytest.approx(1 + 0.125 + 1 / 27)
    assert table["tail_bound"].iloc[0] == pytest.approx(3.0 ** -2 / 2)
