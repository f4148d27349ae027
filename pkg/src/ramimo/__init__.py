"""Capacity maximisation for MIMO links with rotatable antenna elements."""
from .ao import AoConfig, AoSolution, ao_solve, sepm_solve, solve
from .bench import SCHEMES, ScenarioParams, generate_scenario, run_scheme
from .capacity import capacity_given_orientations, max_capacity, water_fill
from .channel import GainPattern, Scatterer, Scenario, assemble_channel
from .geometry import SphericalCap, build_upa
from .kernels import BACKEND

__version__ = "0.1.0"
