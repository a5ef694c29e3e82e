"""Classification of small dense matrices: reflection, Z-, S-, completely-S and
nonsingular M-matrices, plus square roots of symmetric positive definite matrices.

All functions take anything ``numpy.asarray`` accepts and never mutate their input.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
import warnings
from itertools import combinations

import numpy as np
from scipy import linalg
from scipy.optimize import linprog

from collide.errors import ValidationError

MAX_DIM = 16
SINGULAR_TOL = 1e-12
SYMMETRY_TOL = 1e-12
MARGINAL_BAND = 1e-10


def as_matrix(m, name: str = "matrix", square: bool = True) -> np.ndarray:
    """Validate and copy ``m`` into a finite 2-d float array."""
    arr = np.array(m, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    if square and arr.shape[0] > MAX_DIM:
        raise ValidationError(f"{name} has dimension {arr.shape[0]} > {MAX_DIM}")
    return arr


@dataclass(frozen=True)
class MatrixClassReport:
    is_reflection: bool
    is_z: bool
    is_s: bool
    is_completely_s: bool
    is_nonsingular_m: bool
    spectral_radius_of_q: float | None = None
    marginal: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    m = as_matrix(m)
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def is_s_matrix(m) -> bool:
    """Whether some u > 0 has m @ u > 0.

    By scaling, this is feasibility of ``u >= 1, m @ u >= 1``, decided as a
    phase-one linear program.
    """
    m = as_matrix(m)
    d = m.shape[0]
    res = linprog(
        c=np.zeros(d),
        A_ub=-m,
        b_ub=-np.ones(d),
        bounds=[(1.0, None)] * d,
        method="highs",
    )
    return res.status == 0


def _is_m_from_z(m: np.ndarray) -> tuple[bool, float, bool]:
    # m = s I - B with B >= 0; nonsingular M iff rho(B) < s
    s = float(np.max(np.diag(m)))
    if s <= 0:
        return False, float("inf"), False
    b = s * np.eye(m.shape[0]) - m
    rho = spectral_radius(b) / s
    return rho < 1.0, rho, abs(rho - 1.0) <= MARGINAL_BAND


def classify(r) -> MatrixClassReport:
    """Sort a square matrix into the classes needed by the Skorohod problem."""
    r = as_matrix(r, "R")
    d = r.shape[0]
    off = r[~np.eye(d, dtype=bool)]
    is_reflection = bool(np.all(np.abs(np.diag(r) - 1.0) <= SINGULAR_TOL))
    is_z = bool(np.all(off <= 0.0))

    is_s = is_s_matrix(r)
    is_completely_s = is_s and all(
        is_s_matrix(r[np.ix_(idx, idx)])
        for size in range(1, d)
        for idx in combinations(range(d), size)
    )

    rho_q = None
    marginal = False
    if is_reflection:
        rho_q = spectral_radius(np.eye(d) - r)
    if is_z:
        is_m, rho, marginal = _is_m_from_z(r)
    else:
        is_m = False
    return MatrixClassReport(
        is_reflection=is_reflection,
        is_z=is_z,
        is_s=is_s,
        is_completely_s=is_completely_s,
        is_nonsingular_m=is_m,
        spectral_radius_of_q=rho_q,
        marginal=marginal,
    )


def is_reflection_m_matrix(r) -> bool:
    """Cheap check used on hot paths: unit diagonal, Z-pattern and rho(I - R) < 1."""
    r = as_matrix(r, "R")
    d = r.shape[0]
    if not np.all(np.abs(np.diag(r) - 1.0) <= SINGULAR_TOL):
        return False
    if np.any(r[~np.eye(d, dtype=bool)] > 0.0):
        return False
    return spectral_radius(np.eye(d) - r) < 1.0


def inverse_nonnegativity(r) -> bool:
    """True iff ``r`` is invertible with an entrywise nonnegative inverse whose
    diagonal is strictly positive. Singular input gives False."""
    r = as_matrix(r, "R")
    with warnings.catch_warnings():
        # a zero pivot is expected input here and handled just below
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(r, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < SINGULAR_TOL:
        return False
    inv = linalg.lu_solve((lu, piv), np.eye(r.shape[0]))
    # exact zeros of the inverse come back as roundoff of either sign
    tol = 1e-12 * max(1.0, float(np.max(np.abs(inv))))
    return bool(np.all(inv >= -tol) and np.all(np.diag(inv) > tol))


def check_spd(a, name: str = "A") -> np.ndarray:
    a = as_matrix(a, name)
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
        raise ValidationError(f"{name} is not symmetric")
    if np.min(np.linalg.eigvalsh(a)) <= 0.0:
        raise ValidationError(f"{name} is not positive definite")
    return a


def spd_sqrt(a) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A^{1/2}, A^{-1/2})`` for symmetric positive definite ``A``."""
    a = check_spd(a)
    w, v = np.linalg.eigh((a + a.T) / 2.0)
    root = np.sqrt(w)
    half = (v * root) @ v.T
    inv_half = (v / root) @ v.T
    # symmetrize away the last bits of roundoff
    return (half + half.T) / 2.0, (inv_half + inv_half.T) / 2.0
