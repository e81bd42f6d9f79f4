"""Shape estimation for tensegrity structures from strut inclinations.

Strut centers and yaw angles are found by minimizing the elastic energy of
the cables with the measured inclinations held fixed.
"""

from .energy import EnergyModel, EnergyReport, SingularConfigurationError, grad_p, grad_theta, total_energy
from .estimator import (
    PRESETS,
    DegenerateEstimateError,
    EstimatorConfig,
    ShapeEstimate,
    Tracker,
    detect_degenerate,
    estimate,
    preset,
    step,
    track,
)
from .frames import FrameFormatError, InclinationFrame, parse_frame, render_frame
from .kinematics import ShapeState, node_positions, orientation_from_angles
from .metrics import GaugeTransform, align, angle_errors, node_mae
from .model import (
    CableSpec,
    ConnectivityMatrices,
    InvalidSpecError,
    StructureSpec,
    build_connectivity,
    builtin_prism,
    validate_spec,
)

__version__ = "0.1.0"
