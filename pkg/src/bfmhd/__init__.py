"""Pseudospectral simulator and verification harness for 3D MHD with Brinkman-Forchheimer damping."""

__version__ = "0.1.0"

from .diagnostics import (
    EnergyBudget,
    MonitorRecord,
    absorbing_ball_radius,
    decay_envelope_check,
    energy_budget,
    monitor,
    monotonicity_check,
    stroock_varopoulos_check,
)
from .integrator import BlowUpError, Sink, TimeControls, choose_dt, if_rk_step, run
from .rhs import Forcing, PhysParams, State, advect, damping, pressure_recover, tendency
from .spectral import (
    Grid,
    PhysicalField,
    SpectralVectorField,
    dealias,
    leray_project,
    lp_norm,
    make_grid,
    spectral_derivative,
    transform_backward,
    transform_forward,
)
from .verification import ICSpec, make_ic
