"""Thermal coherent-state deformation potential on a periodic 2D box.

The potential is a sum of longitudinal acoustic plane waves,

    V(r, t) = sum_q A_q cos(q.r - omega_q t + phi_q),   0 < |q| <= q_D,

with A_q = c * g_q * sqrt(n_th(q)), Bose occupations n_th, linear
dispersion omega_q = v_s |q| and i.i.d. uniform phases phi_q. Only
box-commensurate wavevectors q = 2 pi (n_x, n_y) / L are kept, so the
field is exactly periodic on the simulation grid.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

from . import constants as C
from .errors import ConfigurationError
from .materials import MaterialParams, derive_quantities, parse_material

COUPLING_FORMS = ("linear_dispersion", "displacement")


@dataclass(frozen=True)
class SimulationBox:
    """Periodic square box of side ``L`` (nm) sampled on ``N x N`` points."""

    L: float
    N: int

    def __post_init__(self):
        if self.L <= 0 or self.N < 2:
            raise ConfigurationError(f"invalid box L={self.L}, N={self.N}")

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def area(self) -> float:
        return self.L * self.L

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    def kgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular wavenumbers (1/nm) in FFT order, indexed [ix, iy]."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)
        return np.meshgrid(k, k, indexing="ij")

    def violations(self, m: MaterialParams) -> list[str]:
        d = derive_quantities(m)
        problems = []
        tol = 1e-12 * self.dx
        if self.dx > math.pi / d.q_D_nm + tol:
            problems.append(f"dx = {self.dx:.4g} nm exceeds pi/q_D = {math.pi / d.q_D_nm:.4g} nm")
        if self.dx > d.lambda_F_nm / 4 + tol:
            problems.append(f"dx = {self.dx:.4g} nm exceeds lambda_F/4 = {d.lambda_F_nm / 4:.4g} nm")
        return problems

    def validate(self, m: MaterialParams) -> None:
        problems = self.violations(m)
        if problems:
            raise ConfigurationError(f"box unsuitable for {m.name}: " + "; ".join(problems))

    @classmethod
    def max_spacing(cls, m: MaterialParams) -> float:
        d = derive_quantities(m)
        return min(math.pi / d.q_D_nm, d.lambda_F_nm / 4)

    @classmethod
    def for_material(cls, m: MaterialParams, N: int = 64, L: float | None = None,
                     min_wavelengths: float = 8.0) -> "SimulationBox":
        """Default box: the smallest L >= ``min_wavelengths`` Fermi wavelengths.

        When N is too small to reach that size with an admissible spacing, L is
        capped at ``N * max_spacing`` instead.
        """
        if L is None:
            L = min_wavelengths * derive_quantities(m).lambda_F_nm
            L = min(L, N * cls.max_spacing(m))
        box = cls(L=float(L), N=int(N))
        box.validate(m)
        return box

    @classmethod
    def largest(cls, m: MaterialParams, N: int) -> "SimulationBox":
        return cls(L=N * cls.max_spacing(m), N=N)


def bose_occupation(energy, T: float):
    """Bose-Einstein occupation 1/(exp(E/kT) - 1); zero at T = 0."""
    energy = np.asarray(energy, dtype=float)
    if T <= 0:
        return np.zeros_like(energy)
    x = energy / (C.KB * T)
    with np.errstate(over="ignore"):
        return np.exp(-x) / -np.expm1(-x)


def coupling(m: MaterialParams, q, area: float, form: str = "linear_dispersion"):
    """Mode coupling g_q in eV for |q| in 1/nm and box area in nm^2."""
    q = np.asarray(q, dtype=float)
    rho, vs = m.areal_density, m.sound_speed
    if form == "linear_dispersion":
        return m.E_d * np.sqrt(2.0 * C.HBAR * q / (rho * area * vs))
    if form == "displacement":
        return m.E_d * q * np.sqrt(C.HBAR / (2.0 * rho * area * vs * q))
    raise ValueError(f"unknown coupling form {form!r}; expected one of {COUPLING_FORMS}")


@dataclass(frozen=True, eq=False)
class FieldRealization:
    """One draw of the multimode coherent-state field.

    Mode arrays have length M. ``nvec`` holds the integer reciprocal-lattice
    indices, ``q`` the wavevectors (1/nm), ``g`` couplings (eV), ``n_th``
    thermal occupations, ``phi`` phases (rad), ``omega`` frequencies (rad/fs).
    """

    nvec: np.ndarray
    q: np.ndarray
    g: np.ndarray
    n_th: np.ndarray
    phi: np.ndarray
    omega: np.ndarray
    L: float
    seed: int | None
    material: MaterialParams | None
    T: float
    amplitude_factor: float = 2.0
    coupling_form: str = "linear_dispersion"

    @property
    def n_modes(self) -> int:
        return len(self.g)

    @property
    def amplitudes(self) -> np.ndarray:
        return self.amplitude_factor * self.g * np.sqrt(self.n_th)

    def frozen(self) -> "FieldRealization":
        """Same landscape with every mode frequency set to zero."""
        return dataclasses.replace(self, omega=np.zeros_like(self.omega))

    def save(self, path) -> None:
        np.savez(
            path, nvec=self.nvec, q=self.q, g=self.g, n_th=self.n_th, phi=self.phi,
            omega=self.omega, L=self.L, T=self.T,
            seed=-1 if self.seed is None else self.seed,
            amplitude_factor=self.amplitude_factor,
            coupling_form=self.coupling_form,
            material="" if self.material is None else self.material.to_text(),
        )

    @classmethod
    def load(cls, path) -> "FieldRealization":
        with np.load(Path(path), allow_pickle=False) as z:
            mat_text = str(z["material"])
            seed = int(z["seed"])
            return cls(
                nvec=z["nvec"], q=z["q"], g=z["g"], n_th=z["n_th"], phi=z["phi"],
                omega=z["omega"], L=float(z["L"]), T=float(z["T"]),
                seed=None if seed < 0 else seed,
                material=parse_material(mat_text) if mat_text else None,
                amplitude_factor=float(z["amplitude_factor"]),
                coupling_form=str(z["coupling_form"]),
            )

    @classmethod
    def from_modes(cls, box: SimulationBox, nvec, amplitudes, phi=None, omega=None,
                   T: float = 0.0) -> "FieldRealization":
        """Hand-built field with explicit amplitudes (eV), e.g. for tests.

        Amplitudes are stored as ``g`` with ``n_th = 1`` and unit prefactor.
        """
        nvec = np.atleast_2d(np.asarray(nvec, dtype=int))
        amp = np.asarray(amplitudes, dtype=float).reshape(-1)
        M = len(amp)
        q = 2.0 * np.pi * nvec / box.L
        return cls(
            nvec=nvec, q=q, g=amp, n_th=np.ones(M),
            phi=np.zeros(M) if phi is None else np.asarray(phi, dtype=float),
            omega=np.zeros(M) if omega is None else np.asarray(omega, dtype=float),
            L=box.L, seed=None, material=None, T=T, amplitude_factor=1.0,
            coupling_form="explicit",
        )

    @classmethod
    def empty(cls, box: SimulationBox) -> "FieldRealization":
        return cls.from_modes(box, np.zeros((0, 2), dtype=int), np.zeros(0))


def disk_modes(box: SimulationBox, q_max: float) -> np.ndarray:
    """Integer vectors n != 0 with |2 pi n / L| <= q_max, in lexicographic order."""
    nmax = int(math.floor(q_max * box.L / (2.0 * math.pi))) + 1
    r = np.arange(-nmax, nmax + 1)
    nx, ny = np.meshgrid(r, r, indexing="ij")
    nvec = np.stack([nx.ravel(), ny.ravel()], axis=1)
    qmag = 2.0 * np.pi / box.L * np.hypot(nvec[:, 0], nvec[:, 1])
    keep = (qmag > 0) & (qmag <= q_max * (1 + 1e-12))
    return nvec[keep]


def build_realization(m: MaterialParams, box: SimulationBox, T: float, seed: int,
                      coupling_form: str = "linear_dispersion",
                      amplitude_factor: float = 2.0,
                      check_box: bool = True) -> FieldRealization:
    """Draw a thermal field realization for material ``m`` at temperature ``T`` (K)."""
    if check_box:
        box.validate(m)
    if T < 0:
        raise ConfigurationError(f"temperature must be non-negative, got {T}")
    d = derive_quantities(m)
    nvec = disk_modes(box, d.q_D_nm)
    if len(nvec) == 0:
        raise ConfigurationError(
            f"box L = {box.L:.4g} nm holds no acoustic modes below q_D = {d.q_D_nm:.4g} 1/nm")
    q = 2.0 * np.pi * nvec / box.L
    qmag = np.hypot(q[:, 0], q[:, 1])
    omega = m.sound_speed * qmag
    g = coupling(m, qmag, box.area, coupling_form)
    n_th = bose_occupation(C.HBAR * omega, T)
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=len(qmag))
    return FieldRealization(
        nvec=nvec, q=q, g=g, n_th=n_th, phi=phi, omega=omega, L=box.L, seed=seed,
        material=m, T=T, amplitude_factor=amplitude_factor, coupling_form=coupling_form,
    )


class FieldSynthesizer:
    """Evaluates a realization on the box grid by inverse FFT.

    Each mode's complex amplitude A exp(i(phi - omega t)) is deposited into
    its (aliased) FFT bin; the real part of the inverse transform then equals
    the cosine sum at every grid node.
    """

    def __init__(self, f: FieldRealization, box: SimulationBox):
        if not math.isclose(f.L, box.L, rel_tol=1e-12):
            raise ConfigurationError(f"realization built for L = {f.L} nm, box has L = {box.L} nm")
        N = box.N
        self.box = box
        self.shape = (N, N)
        self.bins = np.ravel_multi_index((f.nvec[:, 0] % N, f.nvec[:, 1] % N), self.shape) \
            if f.n_modes else np.zeros(0, dtype=int)
        self.coef = f.amplitudes * np.exp(1j * f.phi) * (N * N)
        self.omega = f.omega
        self.static = not np.any(f.omega)
        self._cache = None

    def __call__(self, t: float) -> np.ndarray:
        if self.static and self._cache is not None:
            return self._cache
        c = self.coef if self.static else self.coef * np.exp(-1j * self.omega * t)
        grid = np.bincount(self.bins, weights=c.real, minlength=self.box.N**2) \
            + 1j * np.bincount(self.bins, weights=c.imag, minlength=self.box.N**2)
        values = np.fft.ifft2(grid.reshape(self.shape)).real
        if self.static:
            self._cache = values
        return values


@dataclass(frozen=True, eq=False)
class FieldSnapshot:
    """Potential values (eV) on the N x N grid at time ``t`` (fs)."""

    values: np.ndarray
    t: float
    realization: FieldRealization | None = None

    def to_csv(self, path, box: SimulationBox) -> None:
        x = box.x
        X, Y = np.meshgrid(x, x, indexing="ij")
        data = np.column_stack([X.ravel(), Y.ravel(), self.values.ravel()])
        np.savetxt(path, data, delimiter=",", header="x_nm,y_nm,V_eV", comments="",
                   fmt="%.10g")


def evaluate_field(f: FieldRealization, box: SimulationBox, t: float = 0.0,
                   method: str = "fft") -> FieldSnapshot:
    if not math.isfinite(t):
        raise ValueError("time must be finite")
    if method == "fft":
        values = FieldSynthesizer(f, box)(t)
    elif method == "direct":
        values = direct_field_sum(f, box, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    return FieldSnapshot(values=values, t=t, realization=f)


def direct_field_sum(f: FieldRealization, box: SimulationBox, t: float = 0.0,
                     chunk: int = 256) -> np.ndarray:
    """Mode-by-mode cosine sum; reference path for the FFT synthesis."""
    x = box.x
    X, Y = np.meshgrid(x, x, indexing="ij")
    out = np.zeros_like(X)
    amp = f.amplitudes
    for s in range(0, f.n_modes, chunk):
        sl = slice(s, s + chunk)
        arg = (f.q[sl, 0, None, None] * X + f.q[sl, 1, None, None] * Y
               - (f.omega[sl] * t)[:, None, None] + f.phi[sl, None, None])
        out += np.tensordot(amp[sl], np.cos(arg), axes=1)
    return out


def v_rms_closed_form(m: MaterialParams, T: float, rtol: float = 1e-8) -> float:
    """Continuum RMS of the deformation potential (eV) at temperature T (K).

    V_rms^2 = 2 E_d^2 hbar / (pi rho v_s) * int_0^{q_D} q^2 dq / (exp(hbar v_s q / kT) - 1)
    """
    if T <= 0:
        return 0.0
    q_D = derive_quantities(m).q_D_nm
    beta = C.HBAR * m.sound_speed / (C.KB * T)

    def integrand(q):
        x = beta * q
        if x == 0:
            return 0.0
        if x > 700:
            return q * q * math.exp(-x)
        return q * q / math.expm1(x)

    # beyond x = 60 the Bose tail is below exp(-60) relative and is dropped
    upper = min(q_D, 60.0 / beta)
    val, _ = integrate.quad(integrand, 0.0, upper, epsrel=rtol, epsabs=0.0, limit=200)
    pref = 2.0 * m.E_d**2 * C.HBAR / (math.pi * m.areal_density * m.sound_speed)
    return math.sqrt(pref * val)


def v_rms_empirical(realizations, box: SimulationBox, samples: int = 16,
                    periods: float = 1.0) -> float:
    """RMS of the field pooled over grid points, stratified times and realizations.

    Times are the midpoints of ``samples`` equal strata covering ``periods``
    Debye periods of each realization's material (or of its slowest mode when
    no material is attached).
    """
    if isinstance(realizations, FieldRealization):
        realizations = [realizations]
    if samples < 1:
        raise ValueError("need at least one time sample")
    total, count = 0.0, 0
    for f in realizations:
        if f.material is not None:
            period = 2.0 * math.pi / derive_quantities(f.material).omega_D_fs
        elif f.n_modes and np.any(f.omega):
            period = 2.0 * math.pi / np.max(f.omega)
        else:
            period = 1.0
        synth = FieldSynthesizer(f, box)
        for k in range(samples):
            t = (k + 0.5) / samples * periods * period
            v = synth(t)
            total += float(np.sum(v * v))
            count += v.size
    return math.sqrt(total / count)
