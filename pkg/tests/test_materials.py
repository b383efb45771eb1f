import math

import pytest
from hypothesis import given, strategies as st
from scipy import constants as sc

from qadrude.errors import ConfigurationError
from qadrude.materials import (PRESETS, MaterialParams, classify_regime, derive_quantities,
                               get_material, parse_material)


@pytest.mark.parametrize("name, field, value", [
    ("LSCO", "E_d", 20.0), ("LSCO", "T_D", 427.0), ("LSCO", "v_s", 6000.0),
    ("Bi2212", "v_s", 2460.0), ("Bi2212", "E_F", 0.15),
    ("Sr3Ru2O7", "m_star", 6.8), ("Sr3Ru2O7", "rho", 8.9e-6), ("Sr3Ru2O7", "n", 0.5e27),
])
def test_preset_values(name, field, value):
    assert getattr(get_material(name), field) == value


def test_lookup_is_case_insensitive():
    assert get_material("lsco") is PRESETS["LSCO"]


def test_unknown_material_lists_presets():
    with pytest.raises(KeyError) as err:
        get_material("XYZ")
    for name in ("LSCO", "Bi2212", "Sr3Ru2O7"):
        assert name in str(err.value)


def test_nonpositive_field_rejected():
    with pytest.raises(ConfigurationError, match="rho"):
        MaterialParams("bad", n=1.0, m_star=1.0, v_s=1.0, E_d=1.0, rho=-1.0, E_F=0.1,
                       a=1e-10, T_D=100.0)


def test_debye_wavenumber_from_si_constants():
    m = get_material("LSCO")
    q_D = sc.k * 427.0 / (sc.hbar * 6000.0)
    d = derive_quantities(m)
    assert d.q_D == pytest.approx(q_D, rel=1e-9)
    assert d.omega_D == pytest.approx(6000.0 * q_D, rel=1e-9)


def test_fermi_wavenumber_from_si_constants():
    m = get_material("Bi2212")
    k_F = math.sqrt(2 * 8.4 * sc.m_e * 0.15 * sc.e) / sc.hbar
    d = derive_quantities(m)
    assert d.k_F == pytest.approx(k_F, rel=1e-7)
    assert d.lambda_F == pytest.approx(2 * math.pi / k_F, rel=1e-7)


def test_debye_scaling():
    m = get_material("LSCO")
    base = derive_quantities(m)
    hot = derive_quantities(_replace(m, T_D=2 * m.T_D))
    assert hot.q_D == pytest.approx(2 * base.q_D, rel=1e-14)
    fast = derive_quantities(_replace(m, v_s=3 * m.v_s))
    assert fast.q_D == pytest.approx(base.q_D / 3, rel=1e-14)
    assert fast.omega_D == pytest.approx(base.omega_D, rel=1e-14)


def _replace(m, **kw):
    from dataclasses import replace
    return replace(m, **kw)


def test_regime_zero_disorder():
    r = classify_regime(get_material("LSCO"), 300.0, 0.0)
    assert math.isinf(r.E_bar) and r.perturbative


def test_regime_fermi_scale_disorder():
    m = get_material("LSCO")
    r = classify_regime(m, 300.0, m.E_F)
    assert r.E_bar == 1.0 and not r.perturbative


def test_regime_wavelength_ratio():
    m = get_material("LSCO")
    k_F = math.sqrt(2 * 9.8 * sc.m_e * 0.12 * sc.e) / sc.hbar
    expected = (2 * math.pi / k_F) / (2 * 3.8e-10)
    r = classify_regime(m, 300.0, 0.05)
    assert r.lambda_bar == pytest.approx(expected, rel=1e-7)
    assert r.coherent == (expected >= 1.0)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_text_round_trip(name):
    m = PRESETS[name]
    assert parse_material(m.to_text()) == m


positive = st.floats(min_value=1e-12, max_value=1e30, allow_nan=False, allow_infinity=False)


@given(st.tuples(*[positive] * 8))
def test_material_text_round_trip_is_exact(vals):
    m = MaterialParams("custom", *vals)
    assert parse_material(m.to_text()) == m


def test_material_file_loading(tmp_path):
    path = tmp_path / "mat.txt"
    path.write_text(PRESETS["LSCO"].to_text().replace("'LSCO'", "'mine'"))
    m = get_material(str(path))
    assert m.name == "mine" and m.E_d == 20.0


def test_material_file_unknown_field():
    with pytest.raises(ConfigurationError, match="line 1"):
        parse_material("colour = 3\n")
