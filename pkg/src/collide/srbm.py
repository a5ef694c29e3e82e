"""Discrete Skorohod problem in the orthant and Euler-type simulation of SRBM,
named particles and ranked particles."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from collide import _kernels
from collide.errors import NumericalError, ValidationError
from collide.matrix_analysis import as_matrix, check_spd, is_reflection_m_matrix, spd_sqrt
from collide.particles import ParticleSystemSpec, gap_matrices

LCP_TOL = 1e-12
LCP_MAX_ITER = 10_000
DEFAULT_DELTA = 1e-3


@dataclass(frozen=True)
class SrbmSpec:
    """SRBM parameters. ``zero_noise`` admits ``a = 0`` for deterministic tests."""

    r: np.ndarray
    mu: np.ndarray
    a: np.ndarray
    zero_noise: bool = False

    def __post_init__(self):
        r = as_matrix(self.r, "R")
        d = r.shape[0]
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if mu.shape != (d,) or not np.all(np.isfinite(mu)):
            raise ValidationError(f"mu must be a finite vector of length {d}")
        if not is_reflection_m_matrix(r):
            raise ValidationError("R must be a reflection nonsingular M-matrix")
        if self.zero_noise:
            a = as_matrix(self.a, "A")
            if np.any(a != 0.0):
                raise ValidationError("zero_noise mode requires A = 0")
        else:
            a = check_spd(self.a)
        if a.shape != r.shape:
            raise ValidationError(f"A has shape {a.shape}, R has shape {r.shape}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "a", a)

    @property
    def d(self) -> int:
        return self.r.shape[0]

    def to_dict(self) -> dict:
        return {"r": self.r.tolist(), "mu": self.mu.tolist(), "a": self.a.tolist()}

    @classmethod
    def from_dict(cls, d: dict, zero_noise: bool = False) -> "SrbmSpec":
        r = np.atleast_2d(np.array(d["r"], dtype=float))
        a = np.atleast_2d(np.array(d["a"], dtype=float)) if "a" in d else np.zeros_like(r)
        return cls(r, np.atleast_1d(np.array(d["mu"], dtype=float)), a,
                   zero_noise=bool(d.get("zero_noise", zero_noise)))

    def restrict(self, idx) -> "SrbmSpec":
        """Principal sub-SRBM on the 0-based coordinate subset ``idx``."""
        ix = np.ix_(idx, idx)
        return SrbmSpec(self.r[ix], self.mu[list(idx)], self.a[ix], self.zero_noise)


@dataclass
class SimulatedPath:
    times: np.ndarray
    states: np.ndarray
    regulators: np.ndarray
    driver: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.states.shape[1]


@dataclass
class NamedPath:
    times: np.ndarray
    positions: np.ndarray
    rank_history: np.ndarray  # row k: 1-based names in rank order at times[k]

    def ranked(self) -> np.ndarray:
        return np.take_along_axis(self.positions, self.rank_history - 1, axis=1)


@dataclass
class CollisionReport:
    delta: float
    pair_min: dict = field(default_factory=dict)
    near_triple_count: dict = field(default_factory=dict)
    near_simultaneous_count: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def keyed(m):
            return {"-".join(map(str, k)) if isinstance(k, tuple) else str(k): v for k, v in m.items()}

        return {
            "delta": self.delta,
            "pair_min": keyed(self.pair_min),
            "near_triple_count": keyed(self.near_triple_count),
            "near_simultaneous_count": keyed(self.near_simultaneous_count),
        }


def _check_r(r) -> np.ndarray:
    r = as_matrix(r, "R")
    if not is_reflection_m_matrix(r):
        raise ValidationError("R must be a reflection nonsingular M-matrix")
    return r


def _run_path(z0, dx, r, tol=LCP_TOL, max_iter=LCP_MAX_ITER):
    q = np.eye(r.shape[0]) - r
    states, regs, bad, change = _kernels.skorohod_path(
        np.ascontiguousarray(z0, dtype=float), np.ascontiguousarray(dx, dtype=float), r, q, tol, max_iter
    )
    if bad >= 0:
        raise NumericalError(
            f"LCP iteration cap {max_iter} exceeded at step {bad} (last change {change:.3e})"
        )
    return states, regs


def skorohod_step(z, dx, r, tol: float = LCP_TOL, max_iter: int = LCP_MAX_ITER):
    """One step of the discrete Skorohod problem.

    Returns ``(z_next, dy)`` with ``z_next = z + dx + r @ dy >= 0``, ``dy >= 0``
    and ``z_next * dy == 0``.
    """
    r = _check_r(r)
    d = r.shape[0]
    z = np.array(z, dtype=float).reshape(-1)
    dx = np.array(dx, dtype=float).reshape(-1)
    if z.shape != (d,) or dx.shape != (d,):
        raise ValidationError(f"z and dx must have length {d}")
    if np.any(z < 0.0):
        raise ValidationError("z must be in the orthant")
    dy = np.empty(d)
    z_next = np.empty(d)
    status, _, change = _kernels.lcp_solve(z + dx, r, np.eye(d) - r, tol, max_iter, dy, z_next)
    if status != _kernels.OK:
        raise NumericalError(f"LCP iteration cap {max_iter} exceeded (last change {change:.3e})")
    return z_next, dy


def skorohod_map(driver, r, times=None) -> SimulatedPath:
    """Discrete Skorohod map of a driver sampled on a grid (rows are times)."""
    r = _check_r(r)
    x = np.array(driver, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != r.shape[0]:
        raise ValidationError(f"driver has {x.shape[1]} columns, R is {r.shape[0]}-dimensional")
    if np.any(x[0] < 0.0):
        raise ValidationError("driver must start in the orthant")
    states, regs = _run_path(x[0], np.diff(x, axis=0), r)
    t = np.arange(x.shape[0], dtype=float) if times is None else np.asarray(times, dtype=float)
    return SimulatedPath(t, states, regs, x)


def time_grid(t_end: float, dt: float) -> tuple[np.ndarray, float]:
    """Uniform grid on [0, t_end]; the step is adjusted so it divides t_end."""
    if not (dt > 0 and t_end > 0):
        raise ValidationError("t_end and dt must be positive")
    if dt > t_end:
        raise ValidationError("dt must not exceed t_end")
    n = max(1, int(round(t_end / dt)))
    return np.arange(n + 1) * (t_end / n), t_end / n


def srbm_increments(spec: SrbmSpec, n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    if spec.zero_noise:
        return np.broadcast_to(spec.mu * dt, (n, spec.d)).copy()
    xi = rng.standard_normal((n, spec.d))
    half, _ = spd_sqrt(spec.a)
    return spec.mu * dt + np.sqrt(dt) * xi @ half.T


def simulate_srbm(spec: SrbmSpec, x0, t_end: float, dt: float, seed: int) -> SimulatedPath:
    x0 = np.array(x0, dtype=float).reshape(-1)
    if x0.shape != (spec.d,) or np.any(x0 < 0.0):
        raise ValidationError(f"x0 must be a nonnegative vector of length {spec.d}")
    times, h = time_grid(t_end, dt)
    dx = srbm_increments(spec, len(times) - 1, h, np.random.default_rng(seed))
    states, regs = _run_path(x0, dx, spec.r)
    driver = np.vstack([x0, x0 + np.cumsum(dx, axis=0)])
    return SimulatedPath(times, states, regs, driver)


def simulate_named(spec: ParticleSystemSpec, x0, t_end: float, dt: float, seed: int,
                   zero_noise: bool = False) -> NamedPath:
    """Named classical particles: each particle takes the drift and volatility of
    its current rank. Only the symmetric collision case is supported."""
    if not spec.is_classical:
        raise ValidationError("named simulation is only defined for q_plus = q_minus = 1/2")
    x0 = np.array(x0, dtype=float).reshape(-1)
    if x0.shape != (spec.n,):
        raise ValidationError(f"x0 must have length {spec.n}")
    times, h = time_grid(t_end, dt)
    xi = np.random.default_rng(seed).standard_normal((len(times) - 1, spec.n))
    if zero_noise:
        xi[:] = 0.0
    pos, ranks = _kernels.named_path(
        x0, np.asarray(spec.drifts), np.sqrt(np.asarray(spec.sigma2)), h, xi
    )
    return NamedPath(times, pos, ranks)


def simulate_ranked(spec: ParticleSystemSpec, y0, t_end: float, dt: float, seed: int,
                    zero_noise: bool = False):
    """Ranked particles with (possibly asymmetric) collisions.

    The gap process is driven by the same Brownian increments as the particles;
    its regulators are the collision local times, from which the ranked paths
    are rebuilt. Returns ``(ranked_positions, gap_path)``.
    """
    y0 = np.array(y0, dtype=float).reshape(-1)
    if y0.shape != (spec.n,) or np.any(np.diff(y0) < 0.0):
        raise ValidationError(f"y0 must be a nondecreasing vector of length {spec.n}")
    times, h = time_grid(t_end, dt)
    n = len(times) - 1
    db = np.sqrt(h) * np.random.default_rng(seed).standard_normal((n, spec.n))
    if zero_noise:
        db[:] = 0.0
    g = np.asarray(spec.drifts)
    sig = np.sqrt(np.asarray(spec.sigma2))
    free = np.vstack([np.zeros(spec.n), np.cumsum(g * h + sig * db, axis=0)])

    r, _, _ = gap_matrices(spec)
    gap0 = np.diff(y0)
    free_gaps = np.diff(free, axis=1)
    states, regs = _run_path(gap0, np.diff(free_gaps, axis=0), r)

    # L_(k,k+1) is regulator k; L_(0,1) = L_(N,N+1) = 0
    local = np.zeros((n + 1, spec.n + 1))
    local[:, 1:-1] = regs
    qp = np.asarray(spec.q_plus)
    qm = np.asarray(spec.q_minus)
    ranked = y0 + free + qp * local[:, :-1] - qm * local[:, 1:]
    return ranked, SimulatedPath(times, states, regs, gap0 + free_gaps)


def detect_collisions(path: SimulatedPath, delta: float = DEFAULT_DELTA) -> CollisionReport:
    """Near-collision statistics from gap values on the grid.

    Pair and rank labels are 1-based. A grid time counts toward the near-triple
    count at interior rank k when gaps k-1 and k are both below ``delta``.
    """
    if not delta > 0:
        raise ValidationError("delta must be positive")
    z = np.asarray(path.states)
    d = z.shape[1]
    small = z < delta
    pair_min = {}
    simul = {}
    for i, j in combinations(range(d), 2):
        pair_min[(i + 1, j + 1)] = float(np.min(np.maximum(z[:, i], z[:, j])))
        simul[(i + 1, j + 1)] = int(np.count_nonzero(small[:, i] & small[:, j]))
    triple = {k + 2: simul[(k + 1, k + 2)] for k in range(d - 1)}
    return CollisionReport(float(delta), pair_min, triple, simul)
