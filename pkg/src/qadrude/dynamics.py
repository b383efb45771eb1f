"""Kubo conductivity with the moving deformation potential.

Window eigenstates of the t = 0 landscape are propagated under the full
time-dependent Hamiltonian with a Strang split-step scheme (spectral kinetic
half-steps, potential kick at the step midpoint). The velocity
autocorrelation is accumulated pair-aggregated:

    C(t) = sum_{n,m} W_nm <n(t)|v|m(t)> <m|v|n> = sum_m <xi_m(t)|v|m(t)>,

with |xi_m> = sum_n W_nm v_nm |n>, so only 2 x n_window states are propagated.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.fft as sfft

from . import constants as C
from .conductivity import DEGENERACY_TOL, Spectrum, pair_weights
from .errors import ConfigurationError
from .field import FieldRealization, FieldSynthesizer, SimulationBox
from .hamiltonian import EigenStack, VelocityMatrix, kinetic_grid, velocity_grid
from .materials import MaterialParams

MIN_ETA_T = 5.0


def _workers() -> int:
    return int(os.environ.get("QADRUDE_FFT_WORKERS", "1"))


@dataclass(frozen=True)
class PropagationConfig:
    """Time step ``dt`` (fs), horizon ``t_max`` (fs), damping ``eta`` (eV).

    ``max_phase`` bounds dt * E_scale / hbar, where E_scale is the largest
    local kinetic energy available to the propagated states.
    """

    dt: float
    t_max: float
    eta: float
    record_stride: int = 1
    max_phase: float = 0.5

    def __post_init__(self):
        if self.dt <= 0 or self.t_max <= 0 or self.eta <= 0:
            raise ConfigurationError("dt, t_max and eta must be positive")
        if self.record_stride < 1:
            raise ConfigurationError("record_stride must be >= 1")
        if self.eta * self.t_max / C.HBAR < MIN_ETA_T * (1 - 1e-9):
            raise ConfigurationError(
                f"eta*t_max/hbar = {self.eta * self.t_max / C.HBAR:.3g} < {MIN_ETA_T}; "
                "propagate longer or raise eta")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    @classmethod
    def for_eta(cls, eta: float, dt: float, record_stride: int = 1,
                eta_t: float = MIN_ETA_T, **kw) -> "PropagationConfig":
        """t_max = eta_t * hbar / eta rounded up to a whole number of steps."""
        steps = math.ceil(eta_t * C.HBAR / eta / dt - 1e-9)
        steps = record_stride * math.ceil(steps / record_stride)
        return cls(dt=dt, t_max=steps * dt, eta=eta, record_stride=record_stride, **kw)


def stable_dt(energy_scale: float, max_phase: float = 0.5, safety: float = 0.9) -> float:
    return safety * max_phase * C.HBAR / energy_scale


def energy_scale(states: np.ndarray, V: np.ndarray, kinetic: np.ndarray) -> float:
    """Largest <H> among ``states`` minus the potential minimum (eV)."""
    sk = sfft.fft2(states, axes=(-2, -1), norm="ortho")
    ekin = np.sum(kinetic * np.abs(sk) ** 2, axis=(-2, -1))
    epot = np.sum(V * np.abs(states) ** 2, axis=(-2, -1))
    norm = np.sum(np.abs(states) ** 2, axis=(-2, -1))
    live = norm > 0
    if not np.any(live):
        return float(np.max(kinetic) + np.max(V) - np.min(V))
    e = (ekin[live] + epot[live]) / norm[live]
    return float(np.max(e) - np.min(V))


@dataclass
class PropagationSample:
    """States at time ``t`` (fs) in the unitary momentum representation."""

    t: float
    psi_k: np.ndarray

    @property
    def psi(self) -> np.ndarray:
        return sfft.ifft2(self.psi_k, axes=(-2, -1), norm="ortho")


def propagate_states(psi0: np.ndarray, f: FieldRealization, box: SimulationBox,
                     m: MaterialParams, cfg: PropagationConfig,
                     t0: float = 0.0) -> Iterator[PropagationSample]:
    """Yield the evolved states every ``record_stride`` steps, starting at t0.

    Raises ConfigurationError before stepping when the phase bound fails.
    The yielded arrays are views of the working buffer; copy to keep them.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.ndim == 2:
        psi0 = psi0[None]
    K = kinetic_grid(box, m)
    synth = FieldSynthesizer(f, box)
    scale = energy_scale(psi0, synth(t0), K)
    phase = cfg.dt * scale / C.HBAR
    if phase > cfg.max_phase:
        raise ConfigurationError(
            f"dt = {cfg.dt} fs gives a per-step phase of {phase:.3g} rad "
            f"(limit {cfg.max_phase}); use dt <= {stable_dt(scale, cfg.max_phase):.3g} fs")
    half = np.exp(-0.5j * cfg.dt / C.HBAR * K)
    frozen_kick = np.exp(-1j * cfg.dt / C.HBAR * synth(t0)) if synth.static else None
    workers = _workers()
    pk = sfft.fft2(psi0, axes=(-2, -1), norm="ortho", workers=workers)
    yield PropagationSample(t0, pk)
    for step in range(cfg.n_steps):
        a = sfft.ifft2(half * pk, axes=(-2, -1), norm="ortho", workers=workers, overwrite_x=True)
        if frozen_kick is None:
            a *= np.exp(-1j * cfg.dt / C.HBAR * synth(t0 + (step + 0.5) * cfg.dt))
        else:
            a *= frozen_kick
        pk = sfft.fft2(a, axes=(-2, -1), norm="ortho", workers=workers, overwrite_x=True)
        pk *= half
        if (step + 1) % cfg.record_stride == 0:
            yield PropagationSample(t0 + (step + 1) * cfg.dt, pk)


@dataclass
class CorrelationRecord:
    """Fermi-weighted velocity autocorrelation sampled at ``times`` (fs).

    ``values`` are in (nm/fs)^2 / eV.
    """

    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path) -> None:
        data = np.column_stack([self.times, self.values.real, self.values.imag])
        np.savetxt(path, data, delimiter=",", header="t_fs,Re,Im", comments="", fmt="%.12g")


def correlation_partners(s: EigenStack, v: VelocityMatrix, mu: float, T: float,
                         degeneracy_tol: float = DEGENERACY_TOL) -> np.ndarray:
    """States xi_m = sum_n W_nm v_nm |n>, shape like ``s.states``.

    Degenerate pairs are dropped, matching the static pipeline.
    """
    W, degenerate = pair_weights(s.energies, mu, T, degeneracy_tol)
    B = np.where(degenerate, 0.0, W) * v.elements
    n = len(s)
    xi = B.T @ s.states.reshape(n, -1)
    return xi.reshape(s.states.shape)


def velocity_autocorrelation(evolved, vx: np.ndarray, n_window: int) -> CorrelationRecord:
    """Accumulate sum_m <xi_m(t)|v_x|m(t)> over an evolved [states; partners] block.

    ``vx`` is the velocity multiplier on the reciprocal grid.
    """
    times, values = [], []
    norms0 = states = None
    for sample in evolved:
        pk = sample.psi_k
        states, partners = pk[:n_window], pk[n_window:]
        values.append(np.vdot(partners, vx * states))
        times.append(sample.t)
        if norms0 is None:
            norms0 = _norms(states)
    drift = float(np.max(np.abs(_norms(states) - norms0), initial=0.0)) if norms0 is not None else 0.0
    return CorrelationRecord(times=np.asarray(times), values=np.asarray(values),
                             metadata={"max_norm_drift": drift})


def _norms(pk: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(pk) ** 2, axis=(-2, -1)))


def static_pair_sum(s: EigenStack, v: VelocityMatrix, mu: float, T: float,
                    degeneracy_tol: float = DEGENERACY_TOL) -> complex:
    W, degenerate = pair_weights(s.energies, mu, T, degeneracy_tol)
    return complex(np.sum(np.where(degenerate, 0.0, W) * np.abs(v.elements) ** 2))


def dynamic_correlation(s: EigenStack, v: VelocityMatrix, f: FieldRealization,
                        box: SimulationBox, m: MaterialParams, cfg: PropagationConfig,
                        mu: float, T: float) -> CorrelationRecord:
    """Propagate the window states and their partners; return C(t)."""
    n = len(s)
    block = np.concatenate([s.states.astype(complex), correlation_partners(s, v, mu, T)])
    vx = velocity_grid(box, m)
    rec = velocity_autocorrelation(propagate_states(block, f, box, m, cfg), vx, n)
    rec.metadata.update({"dt_fs": cfg.dt, "t_max_fs": cfg.t_max, "eta_eV": cfg.eta,
                         "n_states": n, "record_stride": cfg.record_stride})
    return rec


def truncation_error_bound(eta: float, t_max: float, M: float) -> float:
    """M t_max / (exp(eta t_max / hbar) - 1), the tail bound of the damped integral."""
    x = eta * t_max / C.HBAR
    if x < MIN_ETA_T:
        warnings.warn(f"eta*t_max/hbar = {x:.3g} is below {MIN_ETA_T}; the bound is loose",
                      RuntimeWarning, stacklevel=2)
    if x == 0:
        return math.inf
    return M * t_max / math.expm1(x)


def damped_transform(times: np.ndarray, values: np.ndarray, eta: float, omega: np.ndarray,
                     chunk: int = 32) -> np.ndarray:
    """Trapezoidal int_0^T dt values(t) exp((i hbar w - eta) t / hbar) for each w."""
    times = np.asarray(times, dtype=float)
    h = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += h / 2
    w[1:] += h / 2
    weighted = w * values * np.exp(-eta * times / C.HBAR)
    out = np.empty(len(omega), dtype=complex)
    for s in range(0, len(omega), chunk):
        om = np.asarray(omega[s:s + chunk])
        out[s:s + chunk] = np.exp(1j * np.outer(om, times) / C.HBAR) @ weighted
    return out


def kubo_dynamic(rec: CorrelationRecord, eta: float, omega: np.ndarray,
                 box: SimulationBox) -> Spectrum:
    """Re sigma(omega) / sigma_0 = -2 hbar / A * Re int_0^T C(t) e^{(i hbar w - eta) t / hbar} dt."""
    omega = np.asarray(omega, dtype=float)
    integral = damped_transform(rec.times, rec.values, eta, omega)
    pref = -2.0 * C.HBAR / box.area
    sigma = pref * integral.real
    t_max = float(rec.times[-1] - rec.times[0])
    bound = truncation_error_bound(eta, t_max, rec.scale) if rec.scale > 0 else 0.0
    meta = dict(rec.metadata)
    meta.update({
        "pipeline": "dynamic",
        "eta_eV": eta,
        "t_max_fs": t_max,
        "eta_t_over_hbar": eta * t_max / C.HBAR,
        "correlation_scale": rec.scale,
        "truncation_bound": bound,
        "truncation_bound_sigma0": abs(pref) * bound,
        "box": {"L_nm": box.L, "N": box.N},
    })
    return Spectrum(omega=omega.copy(), sigma=sigma, metadata=meta)
