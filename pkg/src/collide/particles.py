"""Competing Brownian particle systems: parameters, ranking, collision conditions
and the translation of a particle system into its gap-process SRBM.

Ranks, names and pair indices in reports are 1-based, matching the way the
particle literature numbers them; arrays are 0-based internally.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from collide.errors import NumericalError, ValidationError
from collide.matrix_analysis import as_matrix, check_spd, classify, is_reflection_m_matrix

Q_TOL = 1e-12
DEAD_BAND = 1e-12
EQUALITY_TOL = 1e-10


@dataclass(frozen=True)
class ParticleSystemSpec:
    n: int
    drifts: tuple
    sigma2: tuple
    q_plus: tuple
    q_minus: tuple

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 2:
            raise ValidationError(f"n must be an integer >= 2, got {n!r}")
        for name in ("drifts", "sigma2", "q_plus", "q_minus"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != n:
                raise ValidationError(f"{name} must have length n={n}, got {len(vals)}")
            if not all(np.isfinite(vals)):
                raise ValidationError(f"{name} has non-finite entries")
            object.__setattr__(self, name, vals)
        if min(self.sigma2) <= 0.0:
            raise ValidationError("sigma2 must be positive")
        for name in ("q_plus", "q_minus"):
            if not all(0.0 < q < 1.0 for q in getattr(self, name)):
                raise ValidationError(f"{name} entries must lie in (0, 1)")
        for k in range(n - 1):
            if abs(self.q_plus[k + 1] + self.q_minus[k] - 1.0) > Q_TOL:
                raise ValidationError(
                    f"q_plus[{k + 2}] + q_minus[{k + 1}] must equal 1, "
                    f"got {self.q_plus[k + 1] + self.q_minus[k]!r}"
                )

    @classmethod
    def classical(cls, drifts: Sequence[float], sigma2: Sequence[float]) -> "ParticleSystemSpec":
        n = len(sigma2)
        return cls(n, tuple(drifts), tuple(sigma2), (0.5,) * n, (0.5,) * n)

    @property
    def is_classical(self) -> bool:
        return all(q == 0.5 for q in self.q_plus + self.q_minus)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ParticleSystemSpec":
        n = int(d["n"])
        q_plus = d.get("q_plus", [0.5] * n)
        q_minus = d.get("q_minus", [0.5] * n)
        return cls(n, tuple(d["drifts"]), tuple(d["sigma2"]), tuple(q_plus), tuple(q_minus))


@dataclass(frozen=True)
class Verdict:
    index: tuple
    holds: bool
    slack: float
    marginal: bool = False

    @property
    def behavior(self) -> str:
        return "a.s. avoided" if self.holds else "hit with positive probability"


@dataclass(frozen=True)
class ConditionReport:
    kind: str
    verdicts: tuple = field(default_factory=tuple)

    @property
    def overall_avoids(self) -> bool:
        return all(v.holds for v in self.verdicts)

    def verdict(self, index) -> Verdict:
        key = index if isinstance(index, tuple) else (index,)
        for v in self.verdicts:
            if v.index == key:
                return v
        raise KeyError(index)

    def failing(self) -> list:
        return [v.index for v in self.verdicts if not v.holds]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "overall_avoids": self.overall_avoids,
            "per_index_verdicts": [
                {
                    "index": list(v.index),
                    "holds": v.holds,
                    "slack": v.slack,
                    "marginal": v.marginal,
                    "behavior": v.behavior,
                }
                for v in self.verdicts
            ],
        }


def _verdict(index: tuple, slack: float) -> Verdict:
    # slack exactly on the boundary counts as "holds": the conditions are non-strict
    return Verdict(index, slack >= -DEAD_BAND, float(slack), abs(slack) <= DEAD_BAND)


def ranking_permutation(x: Sequence[float]) -> np.ndarray:
    """1-based names sorted by position; ties go to the smaller name first.

    >>> ranking_permutation([1, -1, 0, 0]).tolist()
    [2, 3, 4, 1]
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0 or not np.all(np.isfinite(x)):
        raise ValidationError("ranking_permutation needs a nonempty finite vector")
    return np.argsort(x, kind="stable") + 1


def check_concavity(sigma2: Sequence[float]) -> ConditionReport:
    s = np.asarray(sigma2, dtype=float)
    if np.any(s <= 0.0):
        raise ValidationError("sigma2 must be positive")
    verdicts = tuple(
        _verdict((k + 1,), (s[k] - s[k - 1]) - (s[k + 1] - s[k]))
        for k in range(1, len(s) - 1)
    )
    return ConditionReport("classical_concavity", verdicts)


def check_asymmetric(spec: ParticleSystemSpec) -> ConditionReport:
    s, qp, qm = spec.sigma2, spec.q_plus, spec.q_minus
    verdicts = []
    for k in range(1, spec.n - 1):
        lhs = (qm[k - 1] + qp[k + 1]) * s[k]
        rhs = qm[k] * s[k + 1] + qp[k] * s[k - 1]
        verdicts.append(_verdict((k + 1,), lhs - rhs))
    return ConditionReport("asymmetric", tuple(verdicts))


def gap_matrices(spec: ParticleSystemSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reflection matrix, drift and covariance of the gap process."""
    d = spec.n - 1
    s = np.asarray(spec.sigma2)
    g = np.asarray(spec.drifts)
    r = np.eye(d)
    a = np.zeros((d, d))
    for k in range(d):
        a[k, k] = s[k] + s[k + 1]
        if k + 1 < d:
            r[k, k + 1] = -spec.q_minus[k + 1]
            r[k + 1, k] = -spec.q_plus[k + 1]
            a[k, k + 1] = a[k + 1, k] = -s[k + 1]
    mu = g[1:] - g[:-1]
    return r, mu, a


def to_srbm(spec: ParticleSystemSpec):
    """Gap process parameters as an ``SrbmSpec``."""
    from collide.srbm import SrbmSpec

    r, mu, a = gap_matrices(spec)
    if not classify(r).is_nonsingular_m:
        raise NumericalError("gap reflection matrix failed the nonsingular M-matrix check")
    return SrbmSpec(r, mu, a)


def _validate_pair(r, a) -> tuple[np.ndarray, np.ndarray]:
    r = as_matrix(r, "R")
    a = check_spd(a)
    if r.shape != a.shape:
        raise ValidationError(f"R and A shapes differ: {r.shape} vs {a.shape}")
    if not is_reflection_m_matrix(r):
        raise ValidationError("R must be a reflection nonsingular M-matrix")
    return r, a


def _ss_slack(r: np.ndarray, a: np.ndarray) -> np.ndarray:
    # slack[i, j] = r_ij a_jj + r_ji a_ii - 2 a_ij, i.e. RD + DR' - 2A
    dg = np.diag(a)
    return r * dg[None, :] + r.T * dg[:, None] - 2.0 * a


def check_ssineq(r, a) -> ConditionReport:
    r, a = _validate_pair(r, a)
    slack = _ss_slack(r, a)
    d = r.shape[0]
    verdicts = tuple(
        _verdict((i + 1, j + 1), slack[i, j]) for i in range(d) for j in range(i + 1, d)
    )
    return ConditionReport("srbm_ssineq", verdicts)


def check_skew_symmetry(r, a) -> bool:
    r, a = _validate_pair(r, a)
    return bool(np.max(np.abs(_ss_slack(r, a))) <= EQUALITY_TOL)


def skew_symmetric_minorant(r, a) -> np.ndarray:
    """Largest-below reflection matrix meeting the skew-symmetry equality.

    Upper off-diagonal entries are lowered until equality holds, lower ones are
    kept. Needs the inequality version to hold, otherwise the result would
    exceed ``r`` somewhere.
    """
    r, a = _validate_pair(r, a)
    if not check_ssineq(r, a).overall_avoids:
        raise ValidationError("skew_symmetric_minorant requires the SSineq condition to hold")
    d = r.shape[0]
    out = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            out[i, j] = (2.0 * a[i, j] - r[j, i] * a[i, i]) / a[j, j]
            out[j, i] = r[j, i]
    return out


def predict_behavior(spec: ParticleSystemSpec) -> ConditionReport:
    """Per interior rank: triple collisions a.s. avoided, or hit with positive probability.

    Computed twice, from the particle inequality and from the SRBM inequality on
    the gap matrices, and the two must agree.
    """
    direct = check_asymmetric(spec)
    r, _, a = gap_matrices(spec)
    via_srbm = check_ssineq(r, a)
    scale = max(1.0, max(spec.sigma2))
    for v in direct.verdicts:
        k = v.index[0]
        w = via_srbm.verdict((k - 1, k))
        if abs(v.slack - w.slack) > 1e-9 * scale or (v.holds != w.holds and not (v.marginal or w.marginal)):
            raise NumericalError(
                f"rank {k}: particle slack {v.slack!r} disagrees with SRBM slack {w.slack!r}"
            )
    for w in via_srbm.verdicts:
        i, j = w.index
        if j != i + 1 and not w.holds:
            raise NumericalError(f"non-adjacent gap pair {w.index} violates SSineq")
    return direct
