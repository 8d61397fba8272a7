"""Dynamic-programming synthesis of quantum repeater protocols."""
from .states import BellDiagonalState, ClassGrid, StateClass, canonicalize, classify, shape_parameter
from .noise import HardwareParams, generation_fidelity, generation_state, generation_time, tau_min
from .planner import ConfigError, DPTable, Infeasible, PlannerOptions, PlanResult, optimize
from .baseline import unoptimized, unoptimized_bdcz, unoptimized_ctsl
from .protocol import ProtocolError, ProtocolNode

__version__ = "0.1.0"
