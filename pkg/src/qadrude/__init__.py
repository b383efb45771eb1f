"""Displaced Drude peaks from a thermal coherent-state deformation potential."""

from .conductivity import KuboConfig, Spectrum, choose_eta, fermi_occupation, kubo_static
from .dynamics import (CorrelationRecord, PropagationConfig, kubo_dynamic, propagate_states,
                       truncation_error_bound, velocity_autocorrelation)
from .field import (FieldRealization, FieldSnapshot, SimulationBox, build_realization,
                    evaluate_field, v_rms_closed_form, v_rms_empirical)
from .hamiltonian import (EigenStack, GridHamiltonian, VelocityMatrix, build_hamiltonian, ipr,
                          solve_window, velocity_matrix)
from .materials import (PRESETS, MaterialParams, classify_regime, derive_quantities,
                        get_material)

__version__ = "0.1.0"
