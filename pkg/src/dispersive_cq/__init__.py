"""Time-domain 1D Maxwell solvers for multipole Debye media.

The memory polarization is handled either by auxiliary differential
equations (one ODE per pole) or by trapezoidal convolution quadrature with a
direct or a fast-and-oblivious history engine.
"""

from .app import compare_schemes, run_simulation
from .config import SimConfig, load_config, load_preset
from .convolution import BlockLadder, DirectConvolution, RegionConvolution
from .discretization import MaterialLayout, Mesh1D, build_mesh, build_operators, cfl_bound
from .material import DebyePole, MaterialModel, PhysicalConstants, chi_hat, tissue_model
from .steppers import SimState, ade_step, cq_step, dissipation_residual, energy, init_state
from .weights import WeightTable, weights_fft, weights_recurrence

__all__ = [
    "BlockLadder",
    "DebyePole",
    "DirectConvolution",
    "MaterialLayout",
    "MaterialModel",
    "Mesh1D",
    "PhysicalConstants",
    "RegionConvolution",
    "SimConfig",
    "SimState",
    "WeightTable",
    "ade_step",
    "build_mesh",
    "build_operators",
    "cfl_bound",
    "chi_hat",
    "compare_schemes",
    "cq_step",
    "dissipation_residual",
    "energy",
    "init_state",
    "load_config",
    "load_preset",
    "run_simulation",
    "tissue_model",
    "weights_fft",
    "weights_recurrence",
]
