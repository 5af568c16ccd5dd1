"""Learning physically consistent rigid-body inertial parameters through a
differentiable recursive Newton-Euler inverse-dynamics computation."""

__version__ = "0.1.0"

from .dynamics import forward_dynamics, mass_matrix, rnea  # noqa: F401
from .learn import TrainConfig, train, train_online  # noqa: F401
from .model import LinkInertia, RobotModel, parse_urdf, parse_urdf_file  # noqa: F401
from .params import KINDS, ParamVector, consistency_check, init_params  # noqa: F401
