import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from qadrude import constants as C
from qadrude.conductivity import KuboConfig, kubo_static, pair_weights
from qadrude.dynamics import (CorrelationRecord, PropagationConfig, damped_transform,
                              dynamic_correlation, energy_scale, kubo_dynamic, propagate_states,
                              static_pair_sum, truncation_error_bound)
from qadrude.errors import ConfigurationError
from qadrude.field import FieldRealization, SimulationBox, build_realization, evaluate_field
from qadrude.hamiltonian import build_hamiltonian, solve_window, velocity_matrix
from qadrude.materials import get_material


@pytest.fixture(scope="module")
def frozen_stack():
    m = get_material("LSCO")
    box = SimulationBox.largest(m, 16)
    f = build_realization(m, box, 300.0, seed=3).frozen()
    h = build_hamiltonian(evaluate_field(f, box), m, box)
    s = solve_window(h, m.E_F, 300.0)
    return m, box, f, h, s, velocity_matrix(s, box, m)


def _energies(h, pk):
    psi = np.fft.ifft2(pk, axes=(-2, -1), norm="ortho")
    return np.real(np.sum(psi.conj() * h.apply(psi), axis=(-2, -1)))


def test_config_requires_long_enough_horizon():
    with pytest.raises(ConfigurationError, match="eta\\*t_max"):
        PropagationConfig(dt=0.1, t_max=10.0, eta=0.01)


def test_config_rounds_horizon_up_to_whole_steps():
    cfg = PropagationConfig.for_eta(0.01, 0.3, record_stride=4)
    assert cfg.eta * cfg.t_max / C.HBAR >= 5
    assert cfg.n_steps % 4 == 0
    assert cfg.t_max == pytest.approx(cfg.n_steps * 0.3)


def test_phase_bound_checked_before_stepping(frozen_stack):
    m, box, f, _, s, _ = frozen_stack
    cfg = PropagationConfig.for_eta(0.02, 5.0)
    gen = propagate_states(s.states, f, box, m, cfg)
    with pytest.raises(ConfigurationError, match="per-step phase"):
        next(gen)


def test_frozen_eigenstates_are_stationary(frozen_stack):
    m, box, f, h, s, _ = frozen_stack
    cfg = PropagationConfig.for_eta(0.02, 0.01)
    pk0 = e0 = None
    worst_overlap, worst_drift, worst_norm = 1.0, 0.0, 0.0
    for k, sample in enumerate(propagate_states(s.states, f, box, m, cfg)):
        if pk0 is None:
            pk0 = sample.psi_k.copy()
            e0 = _energies(h, pk0)
        overlap = np.abs(np.sum(pk0.conj() * sample.psi_k, axis=(1, 2)))
        worst_overlap = min(worst_overlap, overlap.min())
        norms = np.sqrt(np.sum(np.abs(sample.psi_k) ** 2, axis=(1, 2)))
        worst_norm = max(worst_norm, np.abs(norms - 1).max())
        if k % 100 == 0:
            worst_drift = max(worst_drift, np.abs(_energies(h, sample.psi_k) - e0).max())
    assert 1 - worst_overlap < 1e-8
    assert worst_norm < 1e-10
    assert worst_drift < 1e-6


def test_free_packet_drifts_at_group_velocity(lsco):
    box = SimulationBox(L=40.0, N=128)
    X, Y = np.meshgrid(box.x, box.x, indexing="ij")
    k0 = 2 * np.pi * 20 / box.L
    psi = np.exp(-((X - 12) ** 2 + (Y - 20) ** 2) / (2 * 1.5**2) + 1j * k0 * X)
    psi /= np.linalg.norm(psi)
    f = FieldRealization.empty(box)
    cfg = PropagationConfig(dt=0.5, t_max=200.0, eta=5 * C.HBAR / 200.0, record_stride=100)
    v0 = C.HBAR * k0 / lsco.mass
    for sample in propagate_states(psi, f, box, lsco, cfg):
        p = np.abs(sample.psi[0]) ** 2
        x_mean = float(np.sum(p * X))
        expected = 12 + v0 * sample.t
        assert abs(x_mean - expected) <= 1e-6 * expected


def test_split_step_is_second_order(lsco):
    box = SimulationBox(L=8.0, N=32)
    f = FieldRealization.from_modes(box, [[1, 1]], [0.05], omega=[0.01])
    X, Y = np.meshgrid(box.x, box.x, indexing="ij")
    psi = np.exp(-((X - 4) ** 2 + (Y - 4) ** 2) / 2 + 2j * X)
    psi /= np.linalg.norm(psi)
    period = 2 * np.pi / 0.01

    def final(dt):
        cfg = PropagationConfig(dt=dt, t_max=period, eta=5 * C.HBAR / period,
                                record_stride=int(round(period / dt)))
        *_, last = propagate_states(psi, f, box, lsco, cfg)
        return last.psi_k.copy()

    dt = period / 2000
    a, b, c = final(dt), final(dt / 2), final(dt / 4)
    ref = (4 * c - b) / 3  # Richardson extrapolation of the finest pair
    e1, e2 = np.linalg.norm(a - ref), np.linalg.norm(b - ref)
    assert 3.0 < e1 / e2 < 5.0


def test_correlation_starts_at_static_pair_sum(frozen_stack):
    m, box, f, _, s, v = frozen_stack
    cfg = PropagationConfig.for_eta(0.1, 0.01)
    rec = dynamic_correlation(s, v, f, box, m, cfg, m.E_F, 300.0)
    assert rec.values[0] == pytest.approx(static_pair_sum(s, v, m.E_F, 300.0), rel=1e-12)


def test_frozen_correlation_matches_analytic_phases(frozen_stack):
    m, box, f, _, s, v = frozen_stack
    cfg = PropagationConfig.for_eta(0.2, 0.001, record_stride=50)
    rec = dynamic_correlation(s, v, f, box, m, cfg, m.E_F, 300.0)
    W, deg = pair_weights(s.energies, m.E_F, 300.0)
    M = np.where(deg, 0.0, W) * np.abs(v.elements) ** 2
    de = s.energies[:, None] - s.energies[None, :]
    ana = np.array([np.sum(M * np.exp(1j * de * t / C.HBAR)) for t in rec.times])
    assert np.max(np.abs(rec.values - ana)) < 1e-8 * np.max(np.abs(ana))


def test_free_correlation_vanishes(lsco):
    box = SimulationBox.for_material(lsco, 16)
    f = FieldRealization.empty(box)
    h = build_hamiltonian(evaluate_field(f, box), lsco, box)
    s = solve_window(h, lsco.E_F, 300.0)
    cfg = PropagationConfig.for_eta(0.1, 0.05)
    rec = dynamic_correlation(s, velocity_matrix(s, box, lsco), f, box, lsco, cfg, lsco.E_F, 300.0)
    assert np.max(np.abs(rec.values)) < 1e-20


def test_frozen_dynamic_matches_static(frozen_stack):
    m, box, f, h, s, v = frozen_stack
    eta = 0.01
    dt = 0.9 * 0.5 * C.HBAR / energy_scale(s.states, h.V, h.kinetic)
    cfg = PropagationConfig.for_eta(eta, dt)
    omega = np.linspace(0, 0.5, 251)
    dyn = kubo_dynamic(dynamic_correlation(s, v, f, box, m, cfg, m.E_F, 300.0), eta, omega, box)
    stat = kubo_static(s, v, KuboConfig(eta, omega, m.E_F, 300.0), box)
    rms = np.sqrt(np.mean((dyn.sigma - stat.sigma) ** 2) / np.mean(stat.sigma**2))
    assert rms < 0.02


def test_synthetic_record_gives_closed_form_lorentzian():
    """C(t) = w exp(i delta t / hbar); the damped transform is a Lorentzian at -delta."""
    box = SimulationBox(L=10.0, N=4)
    w, delta, eta, dt = -2.0, -0.1, 0.01, 0.002
    cfg = PropagationConfig.for_eta(eta, dt)
    t = np.arange(cfg.n_steps + 1) * dt
    rec = CorrelationRecord(t, w * np.exp(1j * delta * t / C.HBAR))
    omega = np.array([0.0, 0.05, 0.098, 0.1, 0.3])
    sp = kubo_dynamic(rec, eta, omega, box)
    pref = -2 * C.HBAR / box.area
    rate = (1j * (omega + delta) - eta) / C.HBAR
    tail = w * np.exp(rate * t[-1]) / -rate  # analytic integral from t_max to infinity
    corrected = sp.sigma + pref * tail.real
    closed = pref * w * C.HBAR * eta / ((omega + delta) ** 2 + eta**2)
    np.testing.assert_allclose(corrected, closed, rtol=1e-6)
    assert np.all(np.abs(pref * tail.real) <= sp.metadata["truncation_bound_sigma0"])


def test_damped_transform_against_quadrature():
    t = np.linspace(0, 50, 5001)
    vals = np.cos(0.3 * t) + 0.5j * np.sin(0.1 * t)
    omega = np.array([0.0, 0.2])
    out = damped_transform(t, vals, 0.05, omega)
    for k, om in enumerate(omega):
        integrand = vals * np.exp((1j * om - 0.05) * t / C.HBAR)
        assert out[k] == pytest.approx(integrate.trapezoid(integrand, t), rel=1e-12)


def test_truncation_bound_arithmetic():
    t = 5 * C.HBAR / 0.01
    assert truncation_error_bound(0.01, t, 1.0) == pytest.approx(t / math.expm1(5.0))
    assert t / math.expm1(5.0) == pytest.approx(6.8e-3 * t, rel=0.01)


def test_truncation_bound_shrinks_with_horizon():
    t = 5 * C.HBAR / 0.01
    assert truncation_error_bound(0.01, 2 * t, 1.0) < truncation_error_bound(0.01, t, 1.0)


def test_truncation_bound_warns_and_diverges_as_eta_vanishes():
    with pytest.warns(RuntimeWarning, match="loose"):
        small = truncation_error_bound(1e-9, 100.0, 1.0)
    assert small > 1e6
    with pytest.warns(RuntimeWarning):
        assert truncation_error_bound(0.0, 100.0, 1.0) == math.inf


def test_correlation_csv(tmp_path):
    rec = CorrelationRecord(np.array([0.0, 1.0]), np.array([1 + 2j, 3 - 1j]))
    rec.to_csv(tmp_path / "c.csv")
    data = np.loadtxt(tmp_path / "c.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(data, [[0, 1, 2], [1, 3, -1]])
