"""Stripe formation for a nonlocal perimeter functional with power-law kernel."""

from .kernel import ModelParams
from .functional import QuadratureSpec, EnergyReport, direct_energy, decomposed_energy
from .setgeom import PeriodicSet, SliceProfile

__all__ = ["ModelParams", "QuadratureSpec", "EnergyReport", "direct_energy",
           "decomposed_energy", "PeriodicSet", "SliceProfile"]
