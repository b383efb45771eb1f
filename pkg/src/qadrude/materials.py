"""Material constants for the studied strange metals and derived quantities.

``MaterialParams`` stores values in the units they are tabulated in (SI,
effective mass in electron masses, energies in eV). Internal-unit views
(eV, nm, fs) are exposed as properties.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import constants as C
from .errors import ConfigurationError
from .kvtext import dump_kv, parse_kv


@dataclass(frozen=True)
class MaterialParams:
    """Constants for one compound.

    Attributes
    ----------
    name : str
    n : float
        carrier density [m^-3]; only used for diagnostics
    m_star : float
        effective mass [electron masses]
    v_s : float
        longitudinal sound speed [m/s]
    E_d : float
        deformation potential constant [eV]
    rho : float
        2D mass density [kg/m^2]
    E_F : float
        Fermi energy [eV]
    a : float
        lattice constant [m]
    T_D : float
        Debye temperature [K]
    """

    name: str
    n: float
    m_star: float
    v_s: float
    E_d: float
    rho: float
    E_F: float
    a: float
    T_D: float

    def __post_init__(self):
        for f in fields(self):
            if f.name == "name":
                continue
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(
                    f"material {self.name!r}: field {f.name} must be a positive number, got {value!r}")

    # internal-unit views
    @property
    def mass(self) -> float:
        """Effective mass in eV fs^2 / nm^2."""
        return self.m_star * C.M_E

    @property
    def kinetic_prefactor(self) -> float:
        """hbar^2 / (2 m*) in eV nm^2."""
        return C.HBAR2_2ME / self.m_star

    @property
    def sound_speed(self) -> float:
        """Sound speed in nm/fs."""
        return self.v_s * C.MPS

    @property
    def areal_density(self) -> float:
        """Mass density in eV fs^2 / nm^4."""
        return self.rho * C.KG_PER_M2

    @property
    def lattice_constant(self) -> float:
        """Lattice constant in nm."""
        return self.a * C.NM_PER_M

    def to_text(self) -> str:
        units = ("n [m^-3], m_star [m_e], v_s [m/s], E_d [eV], rho [kg/m^2], "
                 "E_F [eV], a [m], T_D [K]")
        return dump_kv(asdict(self), header=f"material parameters; units: {units}")


PRESETS = {
    "LSCO": MaterialParams("LSCO", n=7.8e27, m_star=9.8, v_s=6000.0, E_d=20.0,
                           rho=3.6e-6, E_F=0.12, a=3.8e-10, T_D=427.0),
    "Bi2212": MaterialParams("Bi2212", n=6.8e27, m_star=8.4, v_s=2460.0, E_d=10.0,
                             rho=5.2e-6, E_F=0.15, a=5.4e-10, T_D=123.0),
    "Sr3Ru2O7": MaterialParams("Sr3Ru2O7", n=0.5e27, m_star=6.8, v_s=5850.0, E_d=20.0,
                               rho=8.9e-6, E_F=0.03, a=3.9e-10, T_D=406.0),
}


def get_material(name: str) -> MaterialParams:
    """Look up a built-in preset, or load a material file if ``name`` is a path."""
    if name in PRESETS:
        return PRESETS[name]
    for key, value in PRESETS.items():
        if key.lower() == name.lower():
            return value
    path = Path(name)
    if path.suffix and path.is_file():
        return load_material(path)
    raise KeyError(f"unknown material {name!r}; available presets: {', '.join(PRESETS)}")


def parse_material(text: str) -> MaterialParams:
    names = {f.name for f in fields(MaterialParams)}
    values = {}
    for lineno, key, value in parse_kv(text):
        if key not in names:
            raise ConfigurationError(f"line {lineno}: unknown material field {key!r}")
        values[key] = value if key == "name" else float(value)
    missing = names - values.keys()
    if missing:
        raise ConfigurationError(f"material file missing fields: {', '.join(sorted(missing))}")
    values["name"] = str(values["name"])
    return MaterialParams(**values)


def load_material(path) -> MaterialParams:
    return parse_material(Path(path).read_text())


@dataclass(frozen=True)
class DerivedQuantities:
    """Single-particle scales of a material (SI units).

    ``q_D`` [1/m], ``k_F`` [1/m], ``lambda_F`` [m], ``omega_D`` [rad/s].
    """

    q_D: float
    k_F: float
    lambda_F: float
    omega_D: float

    @property
    def q_D_nm(self) -> float:
        return self.q_D / C.NM_PER_M

    @property
    def k_F_nm(self) -> float:
        return self.k_F / C.NM_PER_M

    @property
    def lambda_F_nm(self) -> float:
        return self.lambda_F * C.NM_PER_M

    @property
    def omega_D_fs(self) -> float:
        """Debye angular frequency in rad/fs."""
        return self.omega_D / C.FS_PER_S

    @property
    def debye_energy(self) -> float:
        """hbar omega_D in eV."""
        return C.HBAR * self.omega_D_fs


def derive_quantities(m: MaterialParams) -> DerivedQuantities:
    q_D = C.KB * m.T_D / (C.HBAR * m.sound_speed)  # 1/nm
    omega_D = m.sound_speed * q_D  # rad/fs
    k_F = math.sqrt(m.E_F / m.kinetic_prefactor)  # 1/nm
    return DerivedQuantities(
        q_D=q_D * C.NM_PER_M,
        k_F=k_F * C.NM_PER_M,
        lambda_F=2.0 * math.pi / k_F / C.NM_PER_M,
        omega_D=omega_D * C.FS_PER_S,
    )


@dataclass(frozen=True)
class RegimeClass:
    E_bar: float
    lambda_bar: float
    perturbative: bool
    coherent: bool


def classify_regime(m: MaterialParams, T: float, v_rms: float,
                    perturbative_threshold: float = 3.0,
                    coherent_threshold: float = 1.0) -> RegimeClass:
    """Coarse dynamical regime from E_F / V_rms and lambda_F / 2a.

    ``T`` is carried for the call signature; ``v_rms`` (eV) already encodes it.
    """
    if v_rms < 0 or T <= 0:
        raise ValueError("need v_rms >= 0 and T > 0")
    E_bar = math.inf if v_rms == 0 else m.E_F / v_rms
    lam_bar = derive_quantities(m).lambda_F / (2.0 * m.a)
    return RegimeClass(
        E_bar=E_bar,
        lambda_bar=lam_bar,
        perturbative=E_bar > perturbative_threshold,
        coherent=lam_bar >= coherent_threshold,
    )
