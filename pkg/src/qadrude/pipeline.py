"""Single-realization drivers shared by the CLI runner and the acceptance suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as C
from .conductivity import KuboConfig, Spectrum, choose_eta, kubo_static, omega_grid
from .dynamics import (PropagationConfig, dynamic_correlation, energy_scale, kubo_dynamic,
                       stable_dt)
from .field import SimulationBox, build_realization, evaluate_field
from .hamiltonian import build_hamiltonian, solve_window, stack_ipr, velocity_matrix
from .materials import MaterialParams


@dataclass
class RunSettings:
    """Numerical knobs for one realization; energies in eV, times in fs."""

    window_factor: float = 3.0
    eta: float | None = None  # None -> level-spacing rule
    eta_c1: float = 2.0
    eta_c2: float = 0.2
    omega_max: float = 0.5
    omega_step: float = 0.002
    dt: float | None = None  # None -> from the phase bound
    t_max: float | None = None  # None -> 5 hbar / eta
    record_stride: int = 1
    max_phase: float = 0.5
    backend: str = "dense"
    coupling_form: str = "linear_dispersion"
    amplitude_factor: float = 2.0
    frozen: bool = False

    @property
    def omega(self) -> np.ndarray:
        return omega_grid(self.omega_max, self.omega_step)


@dataclass
class RealizationResult:
    spectrum: Spectrum
    diagnostics: dict = field(default_factory=dict)


def _frozen_problem(m: MaterialParams, box: SimulationBox, T: float, seed: int, st: RunSettings):
    f = build_realization(m, box, T, seed, coupling_form=st.coupling_form,
                          amplitude_factor=st.amplitude_factor)
    if st.frozen:
        f = f.frozen()
    snap = evaluate_field(f, box, 0.0)
    h = build_hamiltonian(snap, m, box)
    s = solve_window(h, m.E_F, T, st.window_factor, backend=st.backend)
    v = velocity_matrix(s, box, m)
    eta = st.eta if st.eta is not None else choose_eta(s, T, st.eta_c1, st.eta_c2)
    return f, h, s, v, eta


def _stack_diagnostics(h, s) -> dict:
    gram = s.gram()
    res = s.residuals(h)
    return {
        "n_states": len(s),
        "max_residual_eV": float(np.max(res)),
        "max_rel_residual": float(np.max(res / (np.abs(s.energies) + 1e-300))),
        "orthonormality_error": float(np.max(np.abs(gram - np.eye(len(s))))),
        "mean_ipr_per_nm2": float(np.mean(stack_ipr(s))),
        "hermiticity_error": None,
        "V_min_eV": float(np.min(h.V)),
        "V_max_eV": float(np.max(h.V)),
    }


def run_static(m: MaterialParams, box: SimulationBox, T: float, seed: int,
               st: RunSettings | None = None) -> RealizationResult:
    st = st or RunSettings()
    f, h, s, v, eta = _frozen_problem(m, box, T, seed, st)
    cfg = KuboConfig(eta=eta, omega=st.omega, mu=m.E_F, T=T, allow_broad=st.eta is not None)
    sp = kubo_static(s, v, cfg, box)
    sp.metadata.update({"material": m.name, "seed": seed})
    diag = _stack_diagnostics(h, s)
    diag["hermiticity_error"] = v.hermiticity_error()
    return RealizationResult(sp, diag)


def propagation_config(st: RunSettings, eta: float, scale: float) -> PropagationConfig:
    dt = st.dt if st.dt is not None else stable_dt(scale, st.max_phase)
    if st.t_max is not None:
        return PropagationConfig(dt=dt, t_max=st.t_max, eta=eta, record_stride=st.record_stride,
                                 max_phase=st.max_phase)
    return PropagationConfig.for_eta(eta, dt, record_stride=st.record_stride,
                                     max_phase=st.max_phase)


def run_dynamic(m: MaterialParams, box: SimulationBox, T: float, seed: int,
                st: RunSettings | None = None, etas: list[float] | None = None,
                with_static: bool = False) -> dict:
    """Dynamic spectrum for one realization.

    Returns ``{"dynamic": RealizationResult}`` and, when ``with_static`` is set,
    the static spectrum of the same landscape under ``"static"``. Passing
    ``etas`` propagates once per damping value and stores the results under
    ``"dynamic@<eta>"``.
    """
    st = st or RunSettings()
    f, h, s, v, eta = _frozen_problem(m, box, T, seed, st)
    scale = energy_scale(s.states, h.V, h.kinetic)
    out = {}
    diag = _stack_diagnostics(h, s)
    if with_static:
        cfg = KuboConfig(eta=eta, omega=st.omega, mu=m.E_F, T=T, allow_broad=st.eta is not None)
        sp = kubo_static(s, v, cfg, box)
        sp.metadata.update({"material": m.name, "seed": seed})
        out["static"] = RealizationResult(sp, dict(diag))
    for key, e in ([("dynamic", eta)] if etas is None else [(f"dynamic@{x}", x) for x in etas]):
        pcfg = propagation_config(st, e, scale)
        rec = dynamic_correlation(s, v, f, box, m, pcfg, m.E_F, T)
        sp = kubo_dynamic(rec, e, st.omega, box)
        sp.metadata.update({"material": m.name, "seed": seed, "T_K": T, "mu_eV": m.E_F,
                            "frozen_field": st.frozen, "n_states": len(s),
                            "step_phase_rad": pcfg.dt * scale / C.HBAR})
        d = dict(diag)
        d.update({"max_norm_drift": rec.metadata.get("max_norm_drift", math.nan),
                  "truncation_bound_sigma0": sp.metadata["truncation_bound_sigma0"],
                  "n_steps": pcfg.n_steps, "dt_fs": pcfg.dt})
        out[key] = RealizationResult(sp, d)
    return out
