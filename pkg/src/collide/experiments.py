"""Monte Carlo procedures that turn almost-sure statements about collisions,
hitting and stationarity into desk-scale statistics with explicit verdict rules.

Trial ``i`` of an experiment always uses the seed ``seed_base + i``; trials may
run on a thread pool (``COLLIDE_THREADS`` caps it) and are aggregated in trial
order, so results do not depend on scheduling.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import stats

from collide import _kernels
from collide.errors import NumericalError, ValidationError
from collide.matrix_analysis import as_matrix, check_spd, is_reflection_m_matrix
from collide.particles import ParticleSystemSpec, check_skew_symmetry, gap_matrices, predict_behavior, to_srbm
from collide.srbm import (
    LCP_MAX_ITER,
    LCP_TOL,
    SrbmSpec,
    _run_path,
    simulate_named,
    simulate_srbm,
    skorohod_map,
    srbm_increments,
    time_grid,
)

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class ExperimentResult:
    name: str
    parameters: dict
    estimates: dict
    ci_halfwidths: dict
    verdict: str
    trials: int
    seed_base: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = set(self.estimates) - set(self.ci_halfwidths)
        if missing:
            raise ValueError(f"estimates without confidence half-width: {sorted(missing)}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parameters": self.parameters,
            "estimates": self.estimates,
            "ci_halfwidths": self.ci_halfwidths,
            "verdict": self.verdict,
            "trials": self.trials,
            "seed_base": self.seed_base,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def worker_count() -> int:
    env = os.environ.get("COLLIDE_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def map_seeds(fn, seeds) -> list:
    """Evaluate ``fn`` on every seed; results come back in seed order."""
    seeds = list(seeds)
    n = len(seeds)
    workers = worker_count()
    if workers == 1 or n < 2:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds))


def map_trials(fn, n: int, seed_base: int) -> list:
    """Evaluate ``fn(seed_base + i)`` for i < n, in trial order."""
    return map_seeds(fn, range(seed_base, seed_base + n))


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


# -- hitting probability -------------------------------------------------------

def hitting_probability_experiment(b: float, x: float, t_end: float = 50.0, dt: float = 1e-4,
                                   trials: int = 10_000, seed: int = 0,
                                   chunk: int = 1 << 16) -> ExperimentResult:
    """Fraction of 1-d reflected paths (drift +b, unit variance, start x) that
    reach 0 at a grid time, against exp(-2 b x)."""
    if not (b > 0 and x >= 0 and trials > 0):
        raise ValidationError("need b > 0, x >= 0 and trials > 0")
    spec = SrbmSpec([[1.0]], [b], [[1.0]])
    times, h = time_grid(t_end, dt)
    n_steps = len(times) - 1

    def one(s):
        if x == 0.0:
            return True
        rng = np.random.default_rng(s)
        z = np.array([x])
        q = np.eye(1) - spec.r
        done = 0
        while done < n_steps:
            m = min(chunk, n_steps - done)
            dx = srbm_increments(spec, m, h, rng)
            hit, failed = _kernels.first_zero(z.copy(), dx, spec.r, q, LCP_TOL, LCP_MAX_ITER, z)
            if failed >= 0:
                raise NumericalError(f"LCP iteration cap exceeded at step {done + failed}")
            if hit >= 0:
                return True
            done += m
        return False

    hits = map_trials(one, trials, seed)
    est = float(np.mean(hits))
    target = math.exp(-2.0 * b * x)
    se = binomial_se(target, trials)
    allowance = 3.0 * se + 0.01
    return ExperimentResult(
        name="hitting_probability",
        parameters={"b": b, "x": x, "t_end": t_end, "dt": h},
        estimates={"hit_fraction": est, "target": target, "abs_error": abs(est - target)},
        ci_halfwidths={"hit_fraction": 3.0 * binomial_se(est, trials), "target": 0.0,
                       "abs_error": allowance},
        verdict=PASS if abs(est - target) < allowance else FAIL,
        trials=trials,
        seed_base=seed,
    )


# -- collision dichotomy ------------------------------------------------------

def _coarsen(increments: np.ndarray, factor: int) -> np.ndarray:
    n, d = increments.shape
    return increments.reshape(n // factor, factor, d).sum(axis=1)


def dichotomy_experiment(spec: ParticleSystemSpec, rank_k: int, delta: float = 1e-3,
                         dt_list=(1e-2, 1e-3, 1e-4), t_end: float = 1.0, trials: int = 2000,
                         seed: int = 0, gap0=None) -> ExperimentResult:
    """Near-triple-collision frequency at ``rank_k`` under mesh refinement.

    A trial is a near-triple event at mesh dt when some grid time t > 0 has both
    gaps adjacent to rank k below ``delta``. All meshes of one trial share the
    same Brownian increments (coarse increments are block sums of the finest),
    and the finest mesh is also scored at ``delta / 2``.

    Verdict: when collisions are predicted, frequencies must be nondecreasing
    along ``dt_list`` and the finest one at least five binomial standard errors
    above zero; when avoidance is predicted, halving delta must at least halve
    the finest-mesh frequency.
    """
    if not 2 <= rank_k <= spec.n - 1:
        raise ValidationError(f"rank_k must be interior, in 2..{spec.n - 1}")
    dts = [float(v) for v in dt_list]
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValidationError("dt_list must be strictly decreasing")
    grids = [time_grid(t_end, v) for v in dts]
    steps = [len(t) - 1 for t, _ in grids]
    n_fine = steps[-1]
    if any(n_fine % s for s in steps):
        raise ValidationError("every mesh in dt_list must divide the finest one")
    h_fine = grids[-1][1]

    hit_predicted = not predict_behavior(spec).verdict(rank_k).holds
    r, mu, _ = gap_matrices(spec)
    sig = np.sqrt(np.asarray(spec.sigma2))
    gap_start = np.full(spec.n - 1, 0.1) if gap0 is None else np.asarray(gap0, dtype=float)
    i, j = rank_k - 2, rank_k - 1

    def one(s):
        rng = np.random.default_rng(s)
        db = math.sqrt(h_fine) * rng.standard_normal((n_fine, spec.n))
        fine = np.diff(sig * db, axis=1) + mu * h_fine
        flags = []
        for n in steps:
            states, _ = _run_path(gap_start, _coarsen(fine, n_fine // n), r)
            z = states[1:]
            flags.append(bool(np.any((z[:, i] < delta) & (z[:, j] < delta))))
        flags.append(bool(np.any((z[:, i] < delta / 2) & (z[:, j] < delta / 2))))
        return flags

    flags = np.array(map_trials(one, trials, seed), dtype=float)
    freq = flags.mean(axis=0)
    ses = [binomial_se(p, trials) for p in freq]
    estimates = {f"freq_dt={dt:g}": float(p) for dt, p in zip(dts, freq)}
    estimates["freq_half_delta_finest"] = float(freq[-1])
    halfwidths = {k: 1.96 * se for k, se in zip(estimates, ses)}

    fine_freq, half_freq = freq[-2], freq[-1]
    if hit_predicted:
        monotone = all(b >= a for a, b in zip(freq[:-2], freq[1:-1]))
        away = fine_freq > 0 and fine_freq >= 5.0 * ses[-2]
        verdict = PASS if (monotone and away) else FAIL
    else:
        if fine_freq == 0:
            verdict = INCONCLUSIVE
        else:
            verdict = PASS if half_freq <= fine_freq / 2.0 else FAIL
    return ExperimentResult(
        name="dichotomy",
        parameters={
            "spec": spec.to_dict(), "rank_k": rank_k, "delta": delta, "dt_list": dts,
            "t_end": t_end, "gap0": gap_start.tolist(),
        },
        estimates=estimates,
        ci_halfwidths=halfwidths,
        verdict=verdict,
        trials=trials,
        seed_base=seed,
        details={"branch": "hit" if hit_predicted else "avoid"},
    )


# -- stationarity -----------------------------------------------------------

def exponential_ks(sample: np.ndarray) -> tuple[float, float]:
    """KS distance to the exponential with the sample mean, and Stephens' modified
    statistic for the estimated-mean case (reject at 1% above 1.308)."""
    n = len(sample)
    d = stats.kstest(sample, "expon", args=(0.0, float(np.mean(sample)))).statistic
    sn = math.sqrt(n)
    return float(d), float((d - 0.2 / n) * (sn + 0.26 + 0.5 / sn))


STEPHENS_CRIT_1PCT = 1.308


def stationarity_experiment(spec: SrbmSpec, t_burn: float = 20.0, t_end: float = 220.0,
                            dt: float = 1e-3, seed: int = 0, spacing: float = 2.0,
                            chains: int = 1, x0=None) -> ExperimentResult:
    """Product-of-exponentials check for a skew-symmetric, stable SRBM.

    Each of ``chains`` independent runs is sampled every ``spacing`` time units
    in (t_burn, t_end]. Marginals are tested for exponentiality with fitted
    means at 1%; Spearman correlations between coordinates must stay below 0.05.
    """
    if not check_skew_symmetry(spec.r, spec.a):
        raise ValidationError("stationarity experiment needs a skew-symmetric (R, A)")
    drift = np.linalg.solve(spec.r, spec.mu)
    if not np.all(drift < 0):
        raise ValidationError("stationarity experiment needs R^{-1} mu < 0 componentwise")
    if not 0 <= t_burn < t_end:
        raise ValidationError("need 0 <= t_burn < t_end")
    times, h = time_grid(t_end, dt)
    stride = max(1, int(round(spacing / h)))
    idx = np.arange(len(times))
    keep = idx[(times > t_burn) & (idx % stride == 0)]
    start = np.zeros(spec.d) if x0 is None else np.asarray(x0, dtype=float)

    def one(s):
        rng = np.random.default_rng(s)
        out = []
        z = start.copy()
        done = 0
        n_steps = len(times) - 1
        block = 1 << 18
        while done < n_steps:
            m = min(block, n_steps - done)
            states, _ = _run_path(z, srbm_increments(spec, m, h, rng), spec.r)
            sel = keep[(keep > done) & (keep <= done + m)] - done
            out.append(states[sel])
            z = states[-1]
            done += m
        return np.vstack(out)

    sample = np.vstack(map_trials(one, chains, seed))
    n = len(sample)
    estimates, halfwidths = {}, {}
    ok = True
    for c in range(spec.d):
        col = sample[:, c]
        dstat, modified = exponential_ks(col)
        m = float(col.mean())
        estimates[f"mean_{c + 1}"] = m
        halfwidths[f"mean_{c + 1}"] = 1.96 * float(col.std(ddof=1)) / math.sqrt(n)
        estimates[f"ks_{c + 1}"] = dstat
        halfwidths[f"ks_{c + 1}"] = STEPHENS_CRIT_1PCT / math.sqrt(n)
        estimates[f"ks_modified_{c + 1}"] = modified
        halfwidths[f"ks_modified_{c + 1}"] = STEPHENS_CRIT_1PCT
        estimates[f"atom_at_zero_{c + 1}"] = float(np.mean(col == 0.0))
        halfwidths[f"atom_at_zero_{c + 1}"] = 1.96 * binomial_se(estimates[f"atom_at_zero_{c + 1}"], n)
        ok &= modified <= STEPHENS_CRIT_1PCT
    for a, b in combinations(range(spec.d), 2):
        rho = float(stats.spearmanr(sample[:, a], sample[:, b]).statistic)
        key = f"spearman_{a + 1}_{b + 1}"
        estimates[key] = rho
        halfwidths[key] = 0.05
        ok &= abs(rho) < 0.05
    return ExperimentResult(
        name="stationarity",
        parameters={
            "spec": spec.to_dict(), "t_burn": t_burn, "t_end": t_end, "dt": h,
            "spacing": stride * h, "chains": chains,
        },
        estimates=estimates,
        ci_halfwidths=halfwidths,
        verdict=PASS if ok else FAIL,
        trials=n,
        seed_base=seed,
    )


# -- comparison -------------------------------------------------------------

COMPARISON_TOL = 1e-9


def comparison_experiment(r, r_bar, mu, a, x0, t_end: float = 1.0, dt: float = 1e-3,
                          seeds=range(100)) -> ExperimentResult:
    """Coupled domination checks on a shared driver.

    With ``r_bar <= r`` the ``r_bar`` path must stay below the ``r`` path at
    every grid point: more negative off-diagonal entries push harder toward the
    boundary. For every index set I of size one or two (smaller than d), the
    I-coordinates must stay below the SRBM built from [R]_I on [X]_I, which is
    the same statement with the other faces' (nonpositive) pushes removed.
    The excess in the opposite direction is reported in ``details``.
    """
    r = as_matrix(r, "R")
    r_bar = as_matrix(r_bar, "R_bar")
    a = check_spd(a)
    for name, m in (("R", r), ("R_bar", r_bar)):
        if not is_reflection_m_matrix(m):
            raise ValidationError(f"{name} must be a reflection nonsingular M-matrix")
    if r.shape != r_bar.shape or np.any(r_bar > r):
        raise ValidationError("need R_bar <= R entrywise with matching shapes")
    spec = SrbmSpec(r, mu, a)
    d = spec.d
    subsets = [list(I) for size in (1, 2) if size < d for I in combinations(range(d), size)]
    seeds = list(seeds)

    def one(s):
        # both paths go through the same map of the same sampled driver
        path = skorohod_map(simulate_srbm(spec, x0, t_end, dt, s).driver, r)
        bar = skorohod_map(path.driver, r_bar)
        gap = bar.states - path.states
        worst = float(np.max(gap))
        bad = int(np.count_nonzero(gap > COMPARISON_TOL))
        reverse = float(np.max(-gap))
        proj_worst, proj_bad = -np.inf, 0
        for I in subsets:
            sub = skorohod_map(path.driver[:, I], r[np.ix_(I, I)])
            diff = path.states[:, I] - sub.states
            proj_worst = max(proj_worst, float(np.max(diff)))
            proj_bad += int(np.count_nonzero(diff > COMPARISON_TOL))
        return worst, bad, proj_worst, proj_bad, reverse

    rows = map_seeds(one, seeds)
    worst = max(row[0] for row in rows)
    bad = sum(row[1] for row in rows)
    proj_worst = max(row[2] for row in rows) if subsets else 0.0
    proj_bad = sum(row[3] for row in rows)
    return ExperimentResult(
        name="comparison",
        parameters={"r": r.tolist(), "r_bar": r_bar.tolist(), "mu": spec.mu.tolist(),
                    "a": a.tolist(), "x0": list(map(float, x0)), "t_end": t_end, "dt": dt,
                    "subsets": [[i + 1 for i in I] for I in subsets]},
        estimates={"max_excess": worst, "violations": float(bad),
                   "projection_max_excess": proj_worst, "projection_violations": float(proj_bad)},
        ci_halfwidths={"max_excess": COMPARISON_TOL, "violations": 0.0,
                       "projection_max_excess": COMPARISON_TOL, "projection_violations": 0.0},
        verdict=PASS if bad == 0 and proj_bad == 0 else FAIL,
        trials=len(seeds),
        seed_base=seeds[0] if seeds else 0,
        details={"max_excess_of_r_path_over_r_bar_path": max(row[4] for row in rows)},
    )


# -- gap process equivalence ----------------------------------------------------

def _moment_table(sample: np.ndarray):
    n, d = sample.shape
    mean = sample.mean(axis=0)
    mean_se = sample.std(axis=0, ddof=1) / math.sqrt(n)
    c = sample - mean
    cov, cov_se = {}, {}
    for i in range(d):
        for j in range(i, d):
            prod = c[:, i] * c[:, j]
            cov[(i, j)] = float(prod.sum() / (n - 1))
            cov_se[(i, j)] = float(prod.std(ddof=1) / math.sqrt(n))
    return mean, mean_se, cov, cov_se


def gap_equivalence_experiment(spec: ParticleSystemSpec, t_check: float = 1.0, dt: float = 1e-3,
                               trials: int = 20_000, seed: int = 0, x0=None) -> ExperimentResult:
    """Gap moments at ``t_check`` from named particles against the gap SRBM.

    The named route uses seeds ``seed + i``, the SRBM route ``seed + trials + i``,
    so the two samples are independent. Passes when every mean and covariance
    entry differs by less than four pooled standard errors.
    """
    if not spec.is_classical:
        raise ValidationError("gap equivalence needs q_plus = q_minus = 1/2")
    x0 = np.arange(spec.n, dtype=float) if x0 is None else np.asarray(x0, dtype=float)
    gap0 = np.diff(np.sort(x0))
    srbm = to_srbm(spec)

    def named(s):
        path = simulate_named(spec, x0, t_check, dt, s)
        return np.diff(np.sort(path.positions[-1]))

    def reflected(s):
        return simulate_srbm(srbm, gap0, t_check, dt, s).states[-1]

    a = np.array(map_trials(named, trials, seed))
    b = np.array(map_trials(reflected, trials, seed + trials))
    ma, sa, ca, csa = _moment_table(a)
    mb, sb, cb, csb = _moment_table(b)
    estimates, halfwidths, z = {}, {}, {}
    for k in range(spec.n - 1):
        key = f"mean_diff_{k + 1}"
        pooled = math.hypot(sa[k], sb[k])
        estimates[key] = float(ma[k] - mb[k])
        halfwidths[key] = 4.0 * pooled
        z[key] = abs(estimates[key]) / pooled
    for (i, j) in ca:
        key = f"cov_diff_{i + 1}_{j + 1}"
        pooled = math.hypot(csa[(i, j)], csb[(i, j)])
        estimates[key] = ca[(i, j)] - cb[(i, j)]
        halfwidths[key] = 4.0 * pooled
        z[key] = abs(estimates[key]) / pooled
    return ExperimentResult(
        name="gap_equivalence",
        parameters={"spec": spec.to_dict(), "t_check": t_check, "dt": dt, "x0": x0.tolist()},
        estimates=estimates,
        ci_halfwidths=halfwidths,
        verdict=PASS if all(v < 4.0 for v in z.values()) else FAIL,
        trials=trials,
        seed_base=seed,
        details={"z_scores": z, "named_mean": ma.tolist(), "srbm_mean": mb.tolist()},
    )
