"""Two-dimensional picture: after z -> A^{-1/2} z the quadrant becomes a wedge
with identity covariance, and corner attainability is read off the angles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from collide.errors import ValidationError
from collide.matrix_analysis import as_matrix, check_spd, is_reflection_m_matrix, spd_sqrt
from collide.srbm import SimulatedPath

CORNER_BAND = 1e-9
TRANSFER_TOL = 1e-10


@dataclass(frozen=True)
class WedgeGeometry:
    xi: float
    theta1: float
    theta2: float
    n1: np.ndarray
    n2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    hits_corner: bool
    marginal: bool = False

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "theta_sum": self.theta1 + self.theta2,
            "n1": self.n1.tolist(),
            "n2": self.n2.tolist(),
            "v1": self.v1.tolist(),
            "v2": self.v2.tolist(),
            "hits_corner": self.hits_corner,
            "marginal": self.marginal,
        }


def _validate(r, a, dim=None):
    r = as_matrix(r, "R")
    a = check_spd(a)
    if r.shape != a.shape or (dim is not None and r.shape != (dim, dim)):
        raise ValidationError(f"R {r.shape} and A {a.shape} must be matching {dim or 'd'}x{dim or 'd'}")
    if not is_reflection_m_matrix(r):
        raise ValidationError("R must be a reflection nonsingular M-matrix")
    return r, a


def face_vectors(r, a) -> tuple[np.ndarray, np.ndarray]:
    """Inward unit normals (columns of N) and reflection vectors (columns of V)
    of the transformed domain, with the normalisation n_i . v_i = 1."""
    half, inv_half = spd_sqrt(a)
    dg = np.diag(a)
    normals = half / np.sqrt(dg)[None, :]
    reflections = (inv_half @ r) * np.sqrt(dg)[None, :]
    return normals, reflections


def wedge_geometry(r, a) -> WedgeGeometry:
    r, a = _validate(r, a, 2)
    a11, a12, a22 = a[0, 0], a[0, 1], a[1, 1]
    r12, r21 = r[0, 1], r[1, 0]
    xi = float(np.arccos(np.clip(-a12 / np.sqrt(a11 * a22), -1.0, 1.0)))
    s1 = (a12 - a11 * r21) / np.sqrt(a11 * (a11 * r21**2 - 2 * a12 * r21 + a22))
    s2 = (a12 - a22 * r12) / np.sqrt(a22 * (a22 * r12**2 - 2 * a12 * r12 + a11))
    theta1 = float(np.arcsin(np.clip(s1, -1.0, 1.0)))
    theta2 = float(np.arcsin(np.clip(s2, -1.0, 1.0)))
    total = theta1 + theta2
    normals, reflections = face_vectors(r, a)
    return WedgeGeometry(
        xi=xi,
        theta1=theta1,
        theta2=theta2,
        n1=normals[:, 0],
        n2=normals[:, 1],
        v1=reflections[:, 0],
        v2=reflections[:, 1],
        hits_corner=bool(total > CORNER_BAND),
        marginal=bool(abs(total) <= CORNER_BAND),
    )


def transform_path(path: SimulatedPath, a) -> SimulatedPath:
    """Map states by A^{-1/2}; regulators and driver are mapped the same way."""
    a = check_spd(a)
    if path.d != 2 or a.shape != (2, 2):
        raise ValidationError("transform_path works on 2-dimensional paths")
    _, inv_half = spd_sqrt(a)
    driver = None if path.driver is None else path.driver @ inv_half.T
    return SimulatedPath(path.times.copy(), path.states @ inv_half.T, path.regulators @ inv_half.T, driver)


def skew_symmetry_transfer_check(r, a) -> bool:
    """Skew-symmetry tested through n_i . q_j + n_j . q_i = 0 with q_i = v_i - n_i."""
    r, a = _validate(r, a)
    normals, reflections = face_vectors(r, a)
    tangential = reflections - normals
    m = normals.T @ tangential
    return bool(np.max(np.abs(m + m.T)) < TRANSFER_TOL)

