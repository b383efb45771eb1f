import math

import numpy as np
import pytest
from scipy import integrate, stats

from qadrude import constants as C
from qadrude.errors import ConfigurationError
from qadrude.field import (FieldRealization, SimulationBox, build_realization, coupling,
                           direct_field_sum, evaluate_field, v_rms_closed_form,
                           v_rms_empirical)
from qadrude.materials import PRESETS, derive_quantities, get_material


def test_box_spacing_rules(lsco):
    d = derive_quantities(lsco)
    ok = SimulationBox.for_material(lsco, 64)
    assert ok.dx <= math.pi / d.q_D_nm and ok.dx <= d.lambda_F_nm / 4
    with pytest.raises(ConfigurationError, match="pi/q_D"):
        SimulationBox(L=64 * 0.5, N=64).validate(lsco)


def test_default_box_spans_eight_fermi_wavelengths(lsco):
    box = SimulationBox.for_material(lsco, 64)
    assert box.L == pytest.approx(8 * derive_quantities(lsco).lambda_F_nm)


def test_mode_count_matches_lattice_enumeration(lsco):
    box = SimulationBox(L=30.0, N=128)
    f = build_realization(lsco, box, 300.0, seed=1)
    q_D = derive_quantities(lsco).q_D_nm
    count = 0
    nmax = int(q_D * 30.0 / (2 * math.pi)) + 2
    for nx in range(-nmax, nmax + 1):
        for ny in range(-nmax, nmax + 1):
            qq = 2 * math.pi / 30.0 * math.hypot(nx, ny)
            if 0 < qq <= q_D:
                count += 1
    assert f.n_modes == count
    assert np.all(np.hypot(*f.q.T) <= q_D * (1 + 1e-12))
    np.testing.assert_allclose(f.omega, lsco.sound_speed * np.hypot(*f.q.T), rtol=1e-15)


def test_realization_is_deterministic(lsco):
    box = SimulationBox.for_material(lsco, 32)
    a = build_realization(lsco, box, 300.0, seed=9)
    b = build_realization(lsco, box, 300.0, seed=9)
    np.testing.assert_array_equal(a.phi, b.phi)
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
    c = build_realization(lsco, box, 300.0, seed=10)
    assert not np.array_equal(a.phi, c.phi)


def test_zero_temperature_field_vanishes(lsco):
    box = SimulationBox.for_material(lsco, 32)
    f = build_realization(lsco, box, 1e-6, seed=0)
    assert np.max(f.n_th) < 1e-300
    assert np.max(np.abs(evaluate_field(f, box).values)) < 1e-150


def test_thermal_occupation_is_bose(lsco):
    box = SimulationBox.for_material(lsco, 32)
    f = build_realization(lsco, box, 200.0, seed=0)
    x = C.HBAR * f.omega / (C.KB * 200.0)
    np.testing.assert_allclose(f.n_th, 1 / np.expm1(x), rtol=1e-12)


def test_empty_box_raises(lsco):
    with pytest.raises(ConfigurationError, match="no acoustic modes"):
        build_realization(lsco, SimulationBox(L=0.1, N=2), 300.0, seed=0, check_box=False)


def test_coupling_forms_differ_by_factor_two(lsco):
    q = np.array([0.5, 1.0, 3.0])
    a = coupling(lsco, q, 100.0, "linear_dispersion")
    b = coupling(lsco, q, 100.0, "displacement")
    np.testing.assert_allclose(a / b, 2.0, rtol=1e-14)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_fft_synthesis_matches_direct_sum(name):
    m = PRESETS[name]
    box = SimulationBox.for_material(m, 48)
    f = build_realization(m, box, 300.0, seed=5)
    for t in (0.0, 37.5):
        fast = evaluate_field(f, box, t).values
        slow = direct_field_sum(f, box, t)
        assert np.max(np.abs(fast - slow)) <= 1e-12 * np.max(np.abs(slow))


def test_empty_field_is_zero():
    box = SimulationBox(L=10.0, N=16)
    assert not np.any(evaluate_field(FieldRealization.empty(box), box).values)


def test_single_mode_is_cosine():
    box = SimulationBox(L=10.0, N=16)
    f = FieldRealization.from_modes(box, [[2, 1]], [1.0])
    X, Y = np.meshgrid(box.x, box.x, indexing="ij")
    expected = np.cos(2 * np.pi * (2 * X + Y) / box.L)
    np.testing.assert_allclose(evaluate_field(f, box).values, expected, atol=1e-14)


def test_field_has_zero_grid_mean(lsco):
    box = SimulationBox.for_material(lsco, 48)
    f = build_realization(lsco, box, 400.0, seed=2)
    assert abs(np.mean(evaluate_field(f, box, 11.0).values)) < 1e-12


def test_fourier_support_inside_debye_disk(lsco):
    box = SimulationBox.largest(lsco, 64)
    f = build_realization(lsco, box, 300.0, seed=4)
    power = np.abs(np.fft.fft2(evaluate_field(f, box, 3.0).values)) ** 2
    kx, ky = box.kgrid()
    outside = np.hypot(kx, ky) > derive_quantities(lsco).q_D_nm * (1 + 1e-9)
    assert power[outside].sum() < 1e-12 * power.sum()


def test_stationarity_in_time(lsco):
    box = SimulationBox.largest(lsco, 128)
    period = 5.0 / derive_quantities(lsco).omega_D_fs
    early, late = [], []
    for seed in range(10):
        f = build_realization(lsco, box, 300.0, seed=seed)
        early.append(evaluate_field(f, box, 0.0).values[::4, ::4].ravel())
        late.append(evaluate_field(f, box, period).values[::4, ::4].ravel())
    a, b = np.concatenate(early), np.concatenate(late)
    assert a.size >= 10_000
    crit = 1.628 * math.sqrt((a.size + b.size) / (a.size * b.size))  # 1% two-sample level
    assert stats.ks_2samp(a, b).statistic < crit


def test_independent_seeds_are_uncorrelated(lsco):
    box = SimulationBox.largest(lsco, 128)
    a = evaluate_field(build_realization(lsco, box, 300.0, seed=1), box).values
    b = evaluate_field(build_realization(lsco, box, 300.0, seed=2), box).values
    assert abs(np.corrcoef(a.ravel(), b.ravel())[0, 1]) < 0.1


def test_realization_save_load(tmp_path, lsco):
    box = SimulationBox.for_material(lsco, 32)
    f = build_realization(lsco, box, 300.0, seed=12)
    f.save(tmp_path / "f.npz")
    g = FieldRealization.load(tmp_path / "f.npz")
    np.testing.assert_array_equal(evaluate_field(f, box, 4.0).values,
                                  evaluate_field(g, box, 4.0).values)
    assert g.material == lsco and g.seed == 12


def test_snapshot_csv(tmp_path):
    box = SimulationBox(L=4.0, N=4)
    f = FieldRealization.from_modes(box, [[1, 0]], [0.5])
    evaluate_field(f, box).to_csv(tmp_path / "v.csv", box)
    data = np.loadtxt(tmp_path / "v.csv", delimiter=",", skiprows=1)
    assert data.shape == (16, 3)
    np.testing.assert_allclose(data[:, 2], 0.5 * np.cos(2 * np.pi * data[:, 0] / 4.0), atol=1e-12)


def test_closed_form_matches_simpson(lsco):
    q_D = derive_quantities(lsco).q_D_nm
    beta = C.HBAR * lsco.sound_speed / (C.KB * 300.0)
    q = np.linspace(0.0, q_D, 1_000_001)
    f = np.empty_like(q)
    f[0] = 0.0
    f[1:] = q[1:] ** 2 / np.expm1(beta * q[1:])
    pref = 2 * lsco.E_d**2 * C.HBAR / (math.pi * lsco.areal_density * lsco.sound_speed)
    oracle = math.sqrt(pref * integrate.simpson(f, x=q))
    assert v_rms_closed_form(lsco, 300.0) == pytest.approx(oracle, rel=1e-6)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_closed_form_grows_with_temperature(name):
    m = PRESETS[name]
    assert v_rms_closed_form(m, 400.0) > v_rms_closed_form(m, 200.0) > 0
    assert v_rms_closed_form(m, 1e-3) < 1e-6


def test_empirical_rms_of_single_mode():
    box = SimulationBox(L=10.0, N=16)
    f = FieldRealization.from_modes(box, [[1, 0]], [0.3], omega=[0.2])
    assert v_rms_empirical(f, box, samples=7) == pytest.approx(0.3 / math.sqrt(2), rel=1e-12)


def test_empirical_rms_of_empty_field():
    box = SimulationBox(L=10.0, N=16)
    assert v_rms_empirical(FieldRealization.empty(box), box) == 0.0


def test_empirical_rms_tracks_closed_form(lsco):
    box = SimulationBox.largest(lsco, 128)
    fields = [build_realization(lsco, box, 300.0, seed=s) for s in range(20)]
    assert v_rms_empirical(fields, box) == pytest.approx(v_rms_closed_form(lsco, 300.0), rel=0.05)
