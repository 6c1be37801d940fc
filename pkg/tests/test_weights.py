import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersive_cq.discretization import MaterialLayout
from dispersive_cq.material import DebyePole, MaterialModel, PhysicalConstants, chi_hat, tissue_model
from dispersive_cq.weights import (
    ContourParams,
    WeightError,
    WeightTable,
    dump_tables,
    symbol,
    weights_debye_recurrence,
    weights_fft,
    weights_for_layout,
    weights_recurrence,
)

UNIT = PhysicalConstants(eps0=1.0)


def test_default_contour_params():
    p = ContourParams.default(2001)
    assert p.fft_length == 4096
    assert p.radius == pytest.approx(np.finfo(float).eps ** (1 / 4000))
    assert ContourParams.default(10).fft_length == 512


def test_contour_params_checked():
    with pytest.raises(ValueError):
        ContourParams(8, 0.5).check(20)
    with pytest.raises(ValueError):
        ContourParams(64, 1.0).check(20)


def test_single_pole_fft_matches_recurrence():
    pole = DebyePole(1.0, 1.0)
    model = MaterialModel("m", 0.0, (pole,))
    n = 101
    params = ContourParams(2048, np.finfo(float).eps ** (1 / (2 * 100)))
    fft = weights_fft(model, UNIT, 0.1, n, params).weights
    ref = weights_debye_recurrence(pole, UNIT, 0.1, n).weights
    assert np.max(np.abs(fft - ref) / np.abs(ref)) <= 1e-7


def test_vacuum_weights_zero(constants):
    table = weights_fft(MaterialModel.vacuum(), constants, 1e-12, 50)
    assert table.is_zero
    assert weights_recurrence(MaterialModel.vacuum(), constants, 1e-12, 50).is_zero


def test_partial_sums_approach_static_value():
    pole = DebyePole(2.0, 1e-9)
    w = weights_debye_recurrence(pole, UNIT, 1e-10, 2000).weights
    partial = np.cumsum(w)
    static = 2.0
    assert abs(partial[-1] - static) < 1e-12
    assert abs(partial[10] - static) > abs(partial[100] - static) > abs(partial[1000] - static)


def test_recurrence_half_step_example():
    # r = 1/2: a = 2, b = 0, generating function (1 + xi) / 2
    w = weights_debye_recurrence(DebyePole(1.0, 0.05), UNIT, 0.1, 6).weights
    np.testing.assert_allclose(w, [0.5, 0.5, 0, 0, 0, 0], atol=1e-16)


def test_recurrence_vanishing_step():
    pole = DebyePole(3.0, 1e-6)
    for tau in (1e-9, 1e-10, 1e-11):
        w0 = weights_debye_recurrence(pole, UNIT, tau, 1).omega0
        assert w0 == pytest.approx(3.0 * tau / (2 * 1e-6), rel=1e-2)


@pytest.mark.parametrize("r", [0.3, 2.0, 17.5])
def test_geometric_ratio_against_symbolic_series(r):
    xi = sympy.symbols("xi")
    a, b = 1 + 2 * sympy.Rational(str(r)), 1 - 2 * sympy.Rational(str(r))
    gen = 2 * (1 + xi) / (a + b * xi)  # delta_eps = 2, eps0 = 1
    series = sympy.series(gen, xi, 0, 10).removeO()
    coeffs = [float(series.coeff(xi, k)) for k in range(10)]
    w = weights_debye_recurrence(DebyePole(2.0, r), UNIT, 1.0, 10).weights
    np.testing.assert_allclose(w, coeffs, rtol=1e-14, atol=1e-300)
    ratios = w[2:] / w[1:-1]
    np.testing.assert_allclose(ratios, (2 * r - 1) / (2 * r + 1), rtol=1e-13)


def test_generating_function(constants, tissue):
    rng = np.random.default_rng(7)
    tau = 2.93e-12
    w = weights_recurrence(tissue, constants, tau, 4000).weights
    rad = 0.9 * np.sqrt(rng.uniform(size=20))
    xi = rad * np.exp(2j * np.pi * rng.uniform(size=20))
    series = np.polynomial.polynomial.polyval(xi, w)
    exact = constants.eps0 * chi_hat(tissue, symbol(xi, tau))
    scale = constants.eps0 * chi_hat(tissue, 0.0).real
    assert np.max(np.abs(series - exact)) <= 1e-8 * scale


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e4), st.floats(1e-2, 1e6))
def test_debye_tables_monotone(r, deps):
    w = weights_debye_recurrence(DebyePole(deps, r * 1e-12), PhysicalConstants(), 1e-12, 200).weights
    assert np.all(np.isfinite(w))
    assert np.all(np.abs(w[2:]) <= np.abs(w[1:-1]) * (1 + 1e-15))


def test_multipole_is_sum(constants, tissue):
    tab = weights_recurrence(tissue, constants, 1e-12, 30)
    parts = [weights_debye_recurrence(p, constants, 1e-12, 30) for p in tissue.poles]
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    np.testing.assert_array_equal(tab.weights, total.weights)


def test_fft_tissue_default_parameters(constants, tissue):
    n = 600
    fft = weights_fft(tissue, constants, 2.93e-12, n).weights
    ref = weights_recurrence(tissue, constants, 2.93e-12, n).weights
    assert np.max(np.abs(fft - ref)) <= 1e-7 * np.max(np.abs(ref))


def test_fft_realness_failure():
    class Skewed(MaterialModel):
        pass

    import dispersive_cq.weights as wmod

    original = wmod.chi_hat
    try:
        wmod.chi_hat = lambda model, s: 1j * np.ones_like(s) + s * 0
        with pytest.raises(WeightError):
            weights_fft(MaterialModel("x", 0.0, (DebyePole(1.0, 1.0),)), UNIT, 0.1, 20)
    finally:
        wmod.chi_hat = original


def test_table_invariants(tmp_path):
    with pytest.raises(ValueError):
        WeightTable(1.0, [])
    with pytest.raises(ValueError):
        WeightTable(1.0, [1.0, np.nan])
    t = WeightTable(1.0, [1.0, 0.5], "m")
    with pytest.raises(ValueError):
        t.weights[0] = 2.0
    path = tmp_path / "w.csv"
    t.dump_csv(path)
    assert path.read_text().splitlines() == ["n,omega_n", "0,1.0000000000000000e+00", "1,5.0000000000000000e-01"]


def test_weights_for_layout(constants, interface_layout, interface_materials, tmp_path):
    tables = weights_for_layout(interface_layout, interface_materials, constants, 1e-12, 10)
    assert set(tables) == {"air", "tissue"}
    assert tables["air"].is_zero and not tables["tissue"].is_zero
    single = MaterialLayout.from_list([(-1, 1, "tissue")])
    assert list(weights_for_layout(single, interface_materials, constants, 1e-12, 10)) == ["tissue"]
    bad = MaterialLayout.from_list([(-1, 1, "bone")])
    with pytest.raises(KeyError):
        weights_for_layout(bad, interface_materials, constants, 1e-12, 10)
    files = dump_tables(tables, tmp_path / "dump")
    assert sorted(f.name for f in files) == ["weights_air.csv", "weights_tissue.csv"]
