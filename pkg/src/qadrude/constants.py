"""Physical constants and unit conversions.

Internal units: energy in eV, length in nm, time in fs, temperature in K.
Masses are expressed in eV fs^2 / nm^2 so that p^2/2m comes out in eV.
"""

import scipy.constants as sc

HBAR = 0.6582119569  # eV fs
KB = 8.617333262e-5  # eV / K

# 1 kg expressed in eV fs^2 / nm^2
KG = 1.0 / sc.e * 1e30 / 1e18
# electron mass in eV fs^2 / nm^2
M_E = sc.m_e * KG
# hbar^2 / (2 m_e) in eV nm^2
HBAR2_2ME = HBAR**2 / (2.0 * M_E)

NM_PER_M = 1e9
FS_PER_S = 1e15
# speed: m/s -> nm/fs
MPS = NM_PER_M / FS_PER_S
# areal mass density: kg/m^2 -> eV fs^2 / nm^4
KG_PER_M2 = KG / NM_PER_M**2
