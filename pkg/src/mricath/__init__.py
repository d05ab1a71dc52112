"""Cosserat-rod kinematics and control of a magnetically actuated catheter."""
from .model import (ActuationInput, ActuatorSpec, CatheterSpec, ExternalLoads, FlexibleSegmentSpec,
                    ParameterLayout, RigidSegmentSpec, RodState, SpecError, validate_spec)
from .config import load_spec, save_spec
from .magnetics import actuator_moment, moment_current_jacobian
from .ivp import integrate_ivp, IvpResult, NonFiniteStateError
from .bvp import solve_bvp, BvpSolution, BvpNotConverged
from .jacobians import assemble_bvp_jacobian, fd_bvp_jacobian, bench_jacobians
from .control import IKConfig, dls_step, track_trajectory, replay, UnreachableWaypoint
from .trajectories import generate_trajectory, workspace_plane
from .metrics import rmse, aligned_rmse, rigid_align
from .estimation import ParameterSet, estimate_parameters, predict_tips, three_sweep_protocol

__all__ = [n for n in dir() if not n.startswith("_")]
__version__ = "0.1.0"
