"""Actuation moment of a coil set in the scanner field, and its derivatives.

All moments are expressed in the actuator body frame.
"""
import numpy as np

from .lie import hat


def actuator_moment(act, R, currents, field):
    """tau = (R_c NA z)^ (R^T B_s)."""
    dipole = act.dipole_map @ np.asarray(currents, dtype=float)
    return np.cross(dipole, R.T @ np.asarray(field, dtype=float))


def moment_current_jacobian(act, R, field):
    """d tau / d z^c = -(R^T B_s)^ R_c NA; independent of the currents."""
    return -hat(R.T @ np.asarray(field, dtype=float)) @ act.dipole_map


def moment_rotation_derivative(act, R, currents, field, w):
    """Change of tau when R moves along dR = hat(w) R."""
    dipole = act.dipole_map @ np.asarray(currents, dtype=float)
    return -np.cross(dipole, R.T @ np.cross(w, field))
