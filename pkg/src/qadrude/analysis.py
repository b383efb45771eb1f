"""Ensemble statistics and displaced-peak observables.

Peak statistics are computed per realization and then averaged; the spread
reported is the sample standard deviation over the ensemble.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from . import constants as C
from .conductivity import Spectrum
from .errors import SpectrumError
from .field import v_rms_closed_form
from .materials import MaterialParams


def ensemble_average(spectra: list[Spectrum]) -> Spectrum:
    if not spectra:
        raise ValueError("no spectra to average")
    ref = spectra[0]
    for sp in spectra[1:]:
        if sp.omega.shape != ref.omega.shape or not np.array_equal(sp.omega, ref.omega):
            raise ValueError("spectra have mismatched frequency grids")
        if sp.pipeline != ref.pipeline:
            raise ValueError("cannot average spectra from different pipelines")
    stack = np.stack([sp.sigma for sp in spectra])
    mean = np.mean(stack, axis=0)
    std = np.std(stack, axis=0, ddof=1) if len(spectra) > 1 else np.zeros_like(mean)
    meta = {k: v for k, v in ref.metadata.items() if k != "seed"}
    meta["seeds"] = [sp.metadata.get("seed") for sp in spectra]
    if "eta_eV" in ref.metadata:
        meta["eta_eV"] = [sp.metadata.get("eta_eV") for sp in spectra]
    return Spectrum(omega=ref.omega.copy(), sigma=mean, std=std,
                    n_realizations=len(spectra), metadata=meta)


def _refine(omega: np.ndarray, sigma: np.ndarray, i: int) -> tuple[float, float]:
    """Vertex of the parabola through points i-1, i, i+1 (uniform or not)."""
    if i == 0 or i == len(sigma) - 1:
        return float(omega[i]), float(sigma[i])
    x = omega[i - 1:i + 2]
    y = sigma[i - 1:i + 2]
    a, b, c = np.polyfit(x - x[1], y, 2)
    if a >= 0:
        return float(omega[i]), float(sigma[i])
    dx = -b / (2 * a)
    dx = min(max(dx, x[0] - x[1]), x[2] - x[1])
    return float(x[1] + dx), float(c + b * dx + a * dx * dx)


def _peak(s: Spectrum, refine: bool) -> tuple[int, float, float]:
    if s.sigma.size == 0:
        raise SpectrumError("empty spectrum")
    i = int(np.argmax(s.sigma))  # first maximum -> lowest frequency on ties
    if not s.sigma[i] > 0:
        raise SpectrumError("spectrum has no positive maximum")
    if refine:
        w, h = _refine(s.omega, s.sigma, i)
    else:
        w, h = float(s.omega[i]), float(s.sigma[i])
    return i, w, h


def peak_location(s: Spectrum, refine: bool = True) -> float:
    """hbar*omega_p: frequency of the global maximum (eV)."""
    return _peak(s, refine)[1]


def peak_width(s: Spectrum, refine: bool = True) -> float:
    """Distance from the peak to the first high-energy half-maximum crossing (eV)."""
    i, w_p, h = _peak(s, refine)
    half = 0.5 * h
    sig = s.sigma
    below = np.flatnonzero(sig[i + 1:] <= half)
    if below.size == 0:
        raise SpectrumError("spectrum never drops to half maximum inside the grid; "
                            "widen the omega grid")
    j = i + 1 + int(below[0])
    x0, x1 = s.omega[j - 1], s.omega[j]
    y0, y1 = sig[j - 1], sig[j]
    w_half = x1 if y0 == y1 else x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    return float(w_half - w_p)


@dataclass(frozen=True)
class PeakStats:
    T: float
    omega_p_mean: float
    omega_p_std: float
    width_mean: float
    width_std: float
    n_realizations: int
    pipeline: str | None = None
    material: str | None = None

    def row(self) -> dict:
        return {
            "material": self.material, "pipeline": self.pipeline, "T_K": self.T,
            "omega_p_eV": self.omega_p_mean, "omega_p_std": self.omega_p_std,
            "width_eV": self.width_mean, "width_std": self.width_std, "n": self.n_realizations,
        }


def peak_stats(spectra: list[Spectrum], T: float, material: str | None = None) -> PeakStats:
    locs = np.array([peak_location(sp) for sp in spectra])
    widths = np.array([peak_width(sp) for sp in spectra])
    ddof = 1 if len(spectra) > 1 else 0
    return PeakStats(
        T=T,
        omega_p_mean=float(locs.mean()),
        omega_p_std=float(locs.std(ddof=ddof)),
        width_mean=float(widths.mean()),
        width_std=float(widths.std(ddof=ddof)),
        n_realizations=len(spectra),
        pipeline=spectra[0].pipeline,
        material=material,
    )


def write_peak_table(rows: list[PeakStats], path) -> None:
    cols = ["material", "pipeline", "T_K", "omega_p_eV", "omega_p_std", "width_eV",
            "width_std", "n"]
    lines = [",".join(cols)]
    for r in rows:
        d = r.row()
        lines.append(",".join(
            f"{d[c]:.10g}" if isinstance(d[c], float) else str(d[c]) for c in cols))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class FitResult:
    """hbar*omega_p = a + b V_rms, plus a power-law exponent omega_p ~ T^alpha."""

    a: float
    b: float
    residual_rms: float
    alpha: float
    alpha_halfwidth: float
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Least-squares y = a + b x; returns a, b, residual RMS, 95% half-width of b."""
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    dof = len(x) - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof
        sxx = float(np.sum((x - x.mean()) ** 2))
        half = stats.t.ppf(0.975, dof) * math.sqrt(s2 / sxx)
    else:
        half = math.nan
    return float(coef[0]), float(coef[1]), rms, half


def fit_peak_vs_vrms(points, m: MaterialParams) -> FitResult:
    """Fit (T_i, omega_p_i) against V_rms(T_i) from the closed form."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise ValueError("need at least three (T, omega_p) points")
    T, wp = pts[:, 0], pts[:, 1]
    vr = np.array([v_rms_closed_form(m, t) for t in T])
    if np.ptp(vr) <= 1e-12 * max(1.0, float(np.max(np.abs(vr)))):
        raise ValueError("V_rms values are degenerate; cannot fit a slope")
    a, b, rms, _ = _linfit(vr, wp)
    pos = (wp > 0) & (T > 0)
    if pos.sum() >= 3:
        _, alpha, _, half = _linfit(np.log(T[pos]), np.log(wp[pos]))
    else:
        alpha, half = math.nan, math.nan
    return FitResult(a=a, b=b, residual_rms=rms, alpha=alpha, alpha_halfwidth=half,
                     n_points=len(pts))


@dataclass(frozen=True)
class ExponentResult:
    regime: str
    slope: float
    halfwidth: float
    n_points: int
    ok: bool


def scaling_exponent(points, T_D: float, low_cut: float = 1 / 3,
                     high_cut: float = 2.0) -> dict[str, ExponentResult]:
    """Log-log slopes of omega_p(T) for T < low_cut*T_D and T > high_cut*T_D."""
    pts = np.asarray(points, dtype=float)
    out = {}
    for regime, mask in (("low", pts[:, 0] < low_cut * T_D), ("high", pts[:, 0] > high_cut * T_D)):
        sel = pts[mask]
        sel = sel[(sel[:, 0] > 0) & (sel[:, 1] > 0)]
        if len(sel) < 3:
            out[regime] = ExponentResult(regime, math.nan, math.nan, len(sel), False)
            continue
        _, slope, _, half = _linfit(np.log(sel[:, 0]), np.log(sel[:, 1]))
        out[regime] = ExponentResult(regime, slope, half, len(sel), True)
    return out


def thermal_energy(T) -> np.ndarray:
    return C.KB * np.asarray(T, dtype=float)


def relative_rms(a: np.ndarray, ref: np.ndarray) -> float:
    """sqrt(mean((a - ref)^2)) / sqrt(mean(ref^2))."""
    a = np.asarray(a, dtype=float)
    ref = np.asarray(ref, dtype=float)
    return float(np.sqrt(np.mean((a - ref) ** 2)) / np.sqrt(np.mean(ref**2)))


def lorentzian_smooth(omega: np.ndarray, sigma: np.ndarray, width: float,
                      even: bool = True) -> np.ndarray:
    """Convolve with a unit-area Lorentzian of half-width ``width`` (eV).

    For a grid starting at 0, ``even`` extends the data by sigma(-w) = sigma(w)
    before convolving. The grid must be uniform.
    """
    omega = np.asarray(omega, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    step = omega[1] - omega[0]
    if even and omega[0] == 0.0:
        full_w = np.concatenate([-omega[:0:-1], omega])
        full_s = np.concatenate([sigma[:0:-1], sigma])
    else:
        full_w, full_s = omega, sigma
    d = omega[:, None] - full_w[None, :]
    kern = width / np.pi / (d**2 + width**2) * step
    return kern @ full_s


def plateau_ratio(s: Spectrum, omega_D: float) -> float:
    """min sigma on (0, omega_D) divided by sigma(omega_D)."""
    inside = (s.omega > 0) & (s.omega < omega_D)
    if not np.any(inside):
        raise SpectrumError("no grid points strictly between 0 and the Debye energy")
    ref = s.value_at(omega_D)
    return float(np.min(s.sigma[inside]) / ref)


def peak_stats_from_metadata(s: Spectrum) -> PeakStats | None:
    """Rebuild the PeakStats row stored in an ensemble spectrum's metadata."""
    row = s.metadata.get("peak")
    if not row:
        return None
    return PeakStats(T=row["T_K"], omega_p_mean=row["omega_p_eV"], omega_p_std=row["omega_p_std"],
                     width_mean=row["width_eV"], width_std=row["width_std"],
                     n_realizations=row["n"], pipeline=row["pipeline"], material=row["material"])
