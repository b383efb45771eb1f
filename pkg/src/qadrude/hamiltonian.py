"""Effective-mass Hamiltonian on the periodic grid and its Fermi-window eigenpairs.

Kinetic energy is applied spectrally (exact free dispersion on the grid);
the potential is diagonal in position. Grid states are unit vectors,
sum |psi|^2 = 1; divide by ``dx`` for continuum normalization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from . import constants as C
from .errors import ConfigurationError
from .field import FieldSnapshot, SimulationBox
from .materials import MaterialParams


def kinetic_grid(box: SimulationBox, m: MaterialParams) -> np.ndarray:
    """hbar^2 |k|^2 / 2m* on the reciprocal grid (eV), FFT order."""
    kx, ky = box.kgrid()
    return m.kinetic_prefactor * (kx**2 + ky**2)


def velocity_grid(box: SimulationBox, m: MaterialParams) -> np.ndarray:
    """hbar k_x / m* on the reciprocal grid (nm/fs).

    The Nyquist column is zeroed so the operator stays real-antisymmetric in
    position space; real eigenstates then have vanishing diagonal velocity.
    """
    kx, _ = box.kgrid()
    v = C.HBAR * kx / m.mass
    if box.N % 2 == 0:
        v[box.N // 2, :] = 0.0
    return v


@dataclass(frozen=True, eq=False)
class GridHamiltonian:
    kinetic: np.ndarray
    potential: FieldSnapshot
    box: SimulationBox
    material: MaterialParams

    @property
    def V(self) -> np.ndarray:
        return self.potential.values

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """H psi for arrays shaped (..., N, N)."""
        tpsi = sfft.ifft2(self.kinetic * sfft.fft2(psi, axes=(-2, -1)), axes=(-2, -1))
        return tpsi + self.V * psi

    def kinetic_kernel(self) -> np.ndarray:
        """Position-space kernel t(d) of the kinetic operator (real, periodic)."""
        return np.fft.ifft2(self.kinetic).real

    def dense(self) -> np.ndarray:
        """Real symmetric N^2 x N^2 matrix in the position basis (row-major sites)."""
        N = self.box.N
        t = self.kinetic_kernel()
        i = np.arange(N)
        d = (i[:, None] - i[None, :]) % N  # d[j, j'] = (j - j') mod N
        H = t[d[:, None, :, None], d[None, :, None, :]].reshape(N * N, N * N)
        H[np.diag_indices_from(H)] += self.V.ravel()
        return H

    @property
    def is_free(self) -> bool:
        return bool(np.ptp(self.V) == 0.0)


def build_hamiltonian(snap: FieldSnapshot, m: MaterialParams, box: SimulationBox) -> GridHamiltonian:
    if snap.values.shape != (box.N, box.N):
        raise ConfigurationError(
            f"potential grid {snap.values.shape} does not match box {box.N}x{box.N}")
    return GridHamiltonian(kinetic=kinetic_grid(box, m), potential=snap, box=box, material=m)


@dataclass(frozen=True, eq=False)
class EigenStack:
    """Eigenpairs of the frozen Hamiltonian inside ``window`` (eV).

    ``states`` has shape (n, N, N) and holds unit grid vectors.
    """

    energies: np.ndarray
    states: np.ndarray
    window: tuple[float, float]
    box: SimulationBox
    T: float | None = None

    def __len__(self) -> int:
        return len(self.energies)

    @property
    def spacing(self) -> float:
        """Mean level spacing inside the window (eV)."""
        if len(self.energies) < 2:
            return math.nan
        return float((self.energies[-1] - self.energies[0]) / (len(self.energies) - 1))

    @property
    def wavefunctions(self) -> np.ndarray:
        """States normalized so that sum |psi|^2 dx^2 = 1 (units 1/nm)."""
        return self.states / self.box.dx

    def gram(self) -> np.ndarray:
        flat = self.states.reshape(len(self), -1)
        return flat.conj() @ flat.T

    def residuals(self, h: GridHamiltonian) -> np.ndarray:
        r = h.apply(self.states) - self.energies[:, None, None] * self.states
        return np.sqrt(np.sum(np.abs(r) ** 2, axis=(1, 2)))

    def momentum_states(self) -> np.ndarray:
        """Unitary FFT of each state, shape (n, N, N)."""
        return sfft.fft2(self.states, axes=(-2, -1), norm="ortho")

    def energies_to_csv(self, path) -> None:
        np.savetxt(path, self.energies, header="energy_eV", comments="", fmt="%.12g")

    def density_to_csv(self, path, index: int) -> None:
        x = self.box.x
        X, Y = np.meshgrid(x, x, indexing="ij")
        dens = np.abs(self.wavefunctions[index]) ** 2
        np.savetxt(path, np.column_stack([X.ravel(), Y.ravel(), dens.ravel()]),
                   delimiter=",", header="x_nm,y_nm,density_per_nm2", comments="", fmt="%.10g")


def fermi_window(E_F: float, T: float, window_factor: float = 3.0) -> tuple[float, float]:
    half = window_factor * C.KB * T
    return E_F - half, E_F + half


def solve_window(h: GridHamiltonian, E_F: float, T: float, window_factor: float = 3.0,
                 backend: str = "dense") -> EigenStack:
    """All eigenpairs with energies in E_F +- window_factor k_B T.

    Backends: ``dense`` diagonalizes the full matrix and slices the window;
    ``subset`` asks LAPACK only for eigenpairs inside the window. A constant
    potential is solved exactly in the plane-wave basis.
    """
    lo, hi = fermi_window(E_F, T, window_factor)
    if h.is_free:
        energies, states = _free_solution(h, lo, hi)
    elif backend == "dense":
        w, U = np.linalg.eigh(h.dense())
        sel = (w >= lo) & (w <= hi)
        energies, states = w[sel], U[:, sel].T
    elif backend == "subset":
        w, U = sla.eigh(h.dense(), subset_by_value=(lo, hi), driver="evr")
        energies, states = w, U.T
    else:
        raise ValueError(f"unknown eigensolver backend {backend!r}")
    if len(energies) == 0:
        raise ConfigurationError(
            f"no eigenstates in window [{lo:.4g}, {hi:.4g}] eV; "
            "increase window_factor or enlarge the box/grid")
    N = h.box.N
    return EigenStack(energies=np.asarray(energies), states=np.ascontiguousarray(states).reshape(-1, N, N),
                      window=(lo, hi), box=h.box, T=T)


def _free_solution(h: GridHamiltonian, lo: float, hi: float):
    N = h.box.N
    e = h.kinetic.ravel() + float(h.V.flat[0])
    idx = np.flatnonzero((e >= lo) & (e <= hi))
    idx = idx[np.argsort(e[idx], kind="stable")]
    states = np.zeros((len(idx), N * N), dtype=complex)
    states[np.arange(len(idx)), idx] = 1.0
    # plane waves: inverse unitary FFT of unit momentum vectors
    states = sfft.ifft2(states.reshape(-1, N, N), axes=(-2, -1), norm="ortho")
    return e[idx], states


@dataclass(frozen=True, eq=False)
class VelocityMatrix:
    """<n|v_x|m> over an EigenStack (nm/fs)."""

    elements: np.ndarray

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.elements - self.elements.conj().T), initial=0.0))


def velocity_matrix(s: EigenStack, box: SimulationBox, m: MaterialParams) -> VelocityMatrix:
    vx = velocity_grid(box, m).ravel()
    sk = s.momentum_states().reshape(len(s), -1)
    el = sk.conj() @ (vx[:, None] * sk.T)
    return VelocityMatrix(elements=el)


def ipr(state: np.ndarray, dx: float, tol: float = 1e-8) -> float:
    """Inverse participation ratio sum |psi|^4 dx^2 (1/nm^2).

    ``state`` must be continuum-normalized: sum |psi|^2 dx^2 = 1.
    """
    p = np.abs(state) ** 2
    norm = float(np.sum(p) * dx * dx)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state is not normalized (sum |psi|^2 dx^2 = {norm:.6g})")
    return float(np.sum(p * p) * dx * dx)


def stack_ipr(s: EigenStack) -> np.ndarray:
    p = np.abs(s.states) ** 2  # unit grid vectors
    return np.sum(p * p, axis=(1, 2)) / s.box.dx**2


def warn_if_unresolved(s: EigenStack, h: GridHamiltonian, tol: float = 1e-8) -> None:
    res = s.residuals(h)
    bad = res > tol * np.abs(s.energies) + 1e-10
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} eigenpairs exceed the residual tolerance", RuntimeWarning)
