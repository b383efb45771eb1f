"""Frozen-potential Kubo conductivity and the shared ``Spectrum`` container.

Conductivities are real parts per square in units of sigma_0 = e^2 / hbar.
Exactly degenerate pairs (including n = m) carry the zero-frequency Drude
weight; in the eta -> 0+ limit it sits at omega = 0 only, so it is reported
in metadata rather than spread into a finite-frequency Lorentzian.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import constants as C
from .errors import ConfigurationError
from .field import SimulationBox
from .hamiltonian import EigenStack, VelocityMatrix

DEGENERACY_TOL = 1e-9  # eV


def fermi_occupation(eps, mu: float, T: float):
    """Fermi-Dirac occupation, stable for |eps - mu| >> k_B T."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    return expit(-(np.asarray(eps, dtype=float) - mu) / (C.KB * T))


def fermi_derivative(eps, mu: float, T: float):
    """-df/deps (1/eV)."""
    f = fermi_occupation(eps, mu, T)
    return f * (1.0 - f) / (C.KB * T)


def pair_weights(energies: np.ndarray, mu: float, T: float,
                 degeneracy_tol: float = DEGENERACY_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Difference quotients (f_n - f_m)/(e_n - e_m) and the degenerate-pair mask.

    Degenerate entries use the limit -f'(e_n) in the returned ``limit`` array;
    callers decide where that weight goes.
    """
    e = np.asarray(energies, dtype=float)
    f = fermi_occupation(e, mu, T)
    de = e[:, None] - e[None, :]
    degenerate = np.abs(de) <= degeneracy_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        W = (f[:, None] - f[None, :]) / de
    limit = np.broadcast_to(-fermi_derivative(e, mu, T)[:, None], W.shape)
    W = np.where(degenerate, limit, W)
    return W, degenerate


def choose_eta(s: EigenStack | float, T: float, c1: float = 2.0, c2: float = 0.2) -> float:
    """Level-broadening eta (eV): ``c1`` level spacings, capped at ``c2 k_B T``.

    ``s`` may be an EigenStack or a mean level spacing in eV.
    """
    if isinstance(s, EigenStack):
        if len(s) < 2:
            raise ValueError("need at least two states to estimate a level spacing")
        spacing = s.spacing
    else:
        spacing = float(s)
    eta = c1 * spacing
    cap = c2 * C.KB * T
    if eta > cap:
        warnings.warn(
            f"level-spacing rule asks for eta = {eta:.3g} eV but thermal cap is {cap:.3g} eV; "
            "using the cap", RuntimeWarning, stacklevel=2)
        eta = cap
    return eta


@dataclass
class KuboConfig:
    """eta (eV), frequency grid hbar*omega (eV), chemical potential mu (eV), T (K)."""

    eta: float
    omega: np.ndarray
    mu: float
    T: float
    allow_broad: bool = False

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        if not self.eta > 0:
            raise ConfigurationError("eta must be positive")
        if self.omega.size == 0 or self.omega[0] != 0.0 or np.any(np.diff(self.omega) <= 0):
            raise ConfigurationError("omega grid must start at 0 and increase strictly")
        if self.T <= 0:
            raise ConfigurationError("temperature must be positive")
        if self.eta > C.KB * self.T and not self.allow_broad:
            raise ConfigurationError(
                f"eta = {self.eta:.3g} eV exceeds thermal smearing k_B T = {C.KB * self.T:.3g} eV")


def omega_grid(omega_max: float = 0.5, step: float = 0.002) -> np.ndarray:
    n = int(round(omega_max / step))
    return np.linspace(0.0, n * step, n + 1)


@dataclass
class Spectrum:
    omega: np.ndarray
    sigma: np.ndarray
    std: np.ndarray | None = None
    n_realizations: int = 1
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.std is None:
            self.std = np.zeros_like(self.sigma)
        if self.omega.shape != self.sigma.shape:
            raise ValueError("omega and sigma must have the same shape")

    @property
    def pipeline(self) -> str | None:
        return self.metadata.get("pipeline")

    def value_at(self, omega: float) -> float:
        return float(np.interp(omega, self.omega, self.sigma))

    def negativity(self) -> float:
        """Most negative value relative to the maximum (0 if non-negative)."""
        top = float(np.max(self.sigma))
        low = float(np.min(self.sigma))
        if low >= 0 or top <= 0:
            return 0.0 if low >= 0 else math.inf
        return -low / top

    def to_csv(self, path) -> Path:
        path = Path(path)
        n = np.full_like(self.sigma, self.n_realizations)
        data = np.column_stack([self.omega, self.sigma, self.std, n])
        np.savetxt(path, data, delimiter=",", comments="",
                   header="omega_eV,sigma_mean,sigma_std,n_realizations",
                   fmt=["%.6f", "%.10e", "%.10e", "%d"])
        return path

    def write(self, stem) -> tuple[Path, Path]:
        """CSV plus a JSON metadata sidecar next to it."""
        stem = Path(stem)
        csv = self.to_csv(stem.with_suffix(".csv"))
        meta = stem.with_suffix(".json")
        meta.write_text(json.dumps(_jsonable(self.metadata), indent=2, sort_keys=True) + "\n")
        return csv, meta

    @classmethod
    def read(cls, stem) -> "Spectrum":
        stem = Path(stem)
        data = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
        meta_path = stem.with_suffix(".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(omega=data[:, 0], sigma=data[:, 1], std=data[:, 2],
                   n_realizations=int(data[0, 3]), metadata=meta)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def lorentzian_sum(weights: np.ndarray, centers: np.ndarray, eta: float, omega: np.ndarray,
                   chunk: int = 64) -> np.ndarray:
    """sum_i w_i eta / ((omega - c_i)^2 + eta^2) on the omega grid."""
    out = np.empty(len(omega))
    eta2 = eta * eta
    for s in range(0, len(omega), chunk):
        om = omega[s:s + chunk, None]
        out[s:s + chunk] = (eta / ((om - centers[None, :]) ** 2 + eta2)) @ weights
    return out


def kubo_static(s: EigenStack, v: VelocityMatrix, cfg: KuboConfig, box: SimulationBox,
                degeneracy_tol: float = DEGENERACY_TOL) -> Spectrum:
    """Re sigma(omega) / sigma_0 from a frozen-potential eigenstack.

    sigma = -2 hbar^2 / A * sum_{n,m} W_nm |v_nm|^2 eta / ((hbar w + e_n - e_m)^2 + eta^2)
    """
    W, degenerate = pair_weights(s.energies, cfg.mu, cfg.T, degeneracy_tol)
    v2 = np.abs(v.elements) ** 2
    M = W * v2
    active = ~degenerate & (M != 0.0)
    de = s.energies[:, None] - s.energies[None, :]
    # Lorentzian in hbar*omega is centred at e_m - e_n
    pref = -2.0 * C.HBAR**2 / box.area
    sigma = pref * lorentzian_sum(M[active], -de[active], cfg.eta, cfg.omega)
    drude = pref * math.pi * float(np.sum(M[degenerate]))
    lo, hi = s.window
    meta = {
        "pipeline": "static",
        "eta_eV": cfg.eta,
        "mu_eV": cfg.mu,
        "T_K": cfg.T,
        "n_states": len(s),
        "window_eV": [lo, hi],
        "mean_level_spacing_eV": s.spacing,
        "drude_weight_sigma0_eV": drude,
        "edge_affected_above_eV": max(0.0, (hi - lo) - 3.0 * cfg.eta),
        "box": {"L_nm": box.L, "N": box.N},
    }
    return Spectrum(omega=cfg.omega.copy(), sigma=sigma, metadata=meta)
