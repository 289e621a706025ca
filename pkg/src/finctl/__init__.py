"""Fin-actuated underwater vehicle control: allocation, adaptive control, guidance and estimation."""
from .allocation import METHODS, AllocationConfig, AllocationResult, Allocator, allocation_matrix
from .controller import ControllerGains, HybridControllerState, controller_step
from .fin_plant import FinGeometry, FinHydroCoeffs, FinPlant
from .guidance import Guidance, TrajectoryParams
from .math_core import Pose, Twist, Wrench

__version__ = "0.1.0"

__all__ = [
    "METHODS", "AllocationConfig", "AllocationResult", "Allocator", "allocation_matrix",
    "ControllerGains", "HybridControllerState", "controller_step",
    "FinGeometry", "FinHydroCoeffs", "FinPlant", "Guidance", "TrajectoryParams",
    "Pose", "Twist", "Wrench",
]
