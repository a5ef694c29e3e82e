"""Command-line front end.

    collide analyze --config spec.json
    collide simulate --config run.json --out DIR
    collide experiment --name dichotomy --config run.json --out DIR
    collide wedge --config srbm.json

Configs are JSON. A particle system is given by ``n, drifts, sigma2`` and
optionally ``q_plus, q_minus``; an SRBM by ``r, mu, a``. Runs that draw random
numbers must carry an explicit ``seed``. Exit status is 0 on success, 1 on a
validation error and 2 on a numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from collide import experiments as ex
from collide.errors import NumericalError, ValidationError
from collide.matrix_analysis import classify
from collide.particles import (
    ParticleSystemSpec,
    check_ssineq,
    gap_matrices,
    predict_behavior,
    skew_symmetric_minorant,
)
from collide.srbm import DEFAULT_DELTA, SrbmSpec, detect_collisions, simulate_ranked, simulate_srbm
from collide.wedge import wedge_geometry

EXPERIMENTS = ("hitting_probability", "dichotomy", "stationarity", "comparison", "gap_equivalence")
_POSITIVE = ("t_end", "dt", "delta", "trials")


@dataclass
class RunConfig:
    command: str
    spec: dict
    t_end: float | None = None
    dt: float | None = None
    trials: int | None = None
    delta: float = DEFAULT_DELTA
    seed: int | None = None
    out: Path | None = None
    extra: dict = field(default_factory=dict)

    @property
    def is_particle(self) -> bool:
        return "sigma2" in self.spec

    def need_seed(self) -> int:
        if self.seed is None:
            raise ValidationError("config must set 'seed' (no default seed is used)")
        return self.seed


def load_config(command: str, path: str | Path, out: str | Path | None = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ValidationError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"config is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    for key in _POSITIVE:
        if key in raw and not (isinstance(raw[key], (int, float)) and raw[key] > 0):
            raise ValidationError(f"'{key}' must be a positive number, got {raw[key]!r}")
    if "seed" in raw and not isinstance(raw["seed"], int):
        raise ValidationError(f"'seed' must be an integer, got {raw['seed']!r}")
    spec_keys = {"n", "drifts", "sigma2", "q_plus", "q_minus", "r", "mu", "a", "zero_noise"}
    known = spec_keys | set(_POSITIVE) | {"seed"}
    out_dir = None
    if out is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
    return RunConfig(
        command=command,
        spec={k: v for k, v in raw.items() if k in spec_keys},
        t_end=raw.get("t_end"),
        dt=raw.get("dt"),
        trials=raw.get("trials"),
        delta=raw.get("delta", DEFAULT_DELTA),
        seed=raw.get("seed"),
        out=out_dir,
        extra={k: v for k, v in raw.items() if k not in known},
    )


def _particles(cfg: RunConfig) -> ParticleSystemSpec:
    try:
        return ParticleSystemSpec.from_dict(cfg.spec)
    except KeyError as e:
        raise ValidationError(f"particle config is missing field {e}") from e


def _srbm(cfg: RunConfig) -> SrbmSpec:
    if cfg.is_particle:
        r, mu, a = gap_matrices(_particles(cfg))
        return SrbmSpec(r, mu, a)
    try:
        return SrbmSpec.from_dict(cfg.spec)
    except KeyError as e:
        raise ValidationError(f"SRBM config is missing field {e}") from e
    except (TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f"malformed SRBM config: {e}") from e


def analyze(cfg: RunConfig) -> dict:
    srbm = _srbm(cfg)
    report = {"matrix_class": classify(srbm.r).to_dict()}
    if cfg.is_particle:
        spec = _particles(cfg)
        report["input"] = spec.to_dict()
        report["condition"] = predict_behavior(spec).to_dict()
        report["gap_process"] = srbm.to_dict()
    else:
        report["input"] = srbm.to_dict()
    if not srbm.zero_noise:
        report["ssineq"] = check_ssineq(srbm.r, srbm.a).to_dict()
        if srbm.d == 2:
            report["wedge"] = wedge_geometry(srbm.r, srbm.a).to_dict()
    return report


def wedge(cfg: RunConfig) -> dict:
    srbm = _srbm(cfg)
    return wedge_geometry(srbm.r, srbm.a).to_dict()


def _require(cfg: RunConfig, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ValidationError(f"config must set '{name}'")


def write_csv(path: Path, times, z, y) -> None:
    d = z.shape[1]
    header = ",".join(["t"] + [f"Z_{i + 1}" for i in range(d)] + [f"Y_{i + 1}" for i in range(d)])
    rows = np.column_stack([times, z, y])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        np.savetxt(fh, rows, fmt="%.17g", delimiter=",", header=header, comments="")


def simulate(cfg: RunConfig) -> dict:
    """Writes ``path.csv`` (state Z and regulator Y per grid time) and
    ``collisions.json``; for particle configs also ``ranked.csv``."""
    _require(cfg, "t_end", "dt", "out")
    seed = cfg.need_seed()
    zero_noise = bool(cfg.spec.get("zero_noise", False))
    if cfg.is_particle:
        spec = _particles(cfg)
        y0 = cfg.extra.get("x0", list(range(spec.n)))
        ranked, path = simulate_ranked(spec, np.sort(np.asarray(y0, dtype=float)), cfg.t_end, cfg.dt,
                                       seed, zero_noise=zero_noise)
        cols = ",".join(["t"] + [f"X_({k + 1})" for k in range(spec.n)])
        with open(cfg.out / "ranked.csv", "w", encoding="utf-8", newline="\n") as fh:
            np.savetxt(fh, np.column_stack([path.times, ranked]), fmt="%.17g", delimiter=",",
                       header=cols, comments="")
    else:
        srbm = _srbm(cfg)
        x0 = cfg.extra.get("x0", [0.0] * srbm.d)
        path = simulate_srbm(srbm, x0, cfg.t_end, cfg.dt, seed)
    write_csv(cfg.out / "path.csv", path.times, path.states, path.regulators)
    report = detect_collisions(path, cfg.delta).to_dict()
    _write_json(cfg.out / "collisions.json", report)
    return report


def _kwargs(cfg: RunConfig, allowed) -> dict:
    kw = {k: v for k, v in cfg.extra.items() if k in allowed}
    for name in ("t_end", "dt", "trials", "delta"):
        if name in allowed and getattr(cfg, name) is not None:
            kw[name] = getattr(cfg, name)
    return kw


def experiment(cfg: RunConfig, name: str) -> dict:
    if name not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    declared = cfg.extra.get("experiment")
    if declared is not None and declared != name:
        raise ValidationError(f"config is for experiment {declared!r}, not {name!r}")
    seed = cfg.need_seed()
    if name == "hitting_probability":
        if "b" not in cfg.extra or "x" not in cfg.extra:
            raise ValidationError("hitting_probability needs 'b' and 'x'")
        res = ex.hitting_probability_experiment(
            float(cfg.extra["b"]), float(cfg.extra["x"]), seed=seed,
            **_kwargs(cfg, {"t_end", "dt", "trials"}))
    elif name == "dichotomy":
        if "rank_k" not in cfg.extra:
            raise ValidationError("dichotomy needs 'rank_k'")
        kw = _kwargs(cfg, {"t_end", "trials", "delta", "dt_list", "gap0"})
        res = ex.dichotomy_experiment(_particles(cfg), int(cfg.extra["rank_k"]), seed=seed, **kw)
    elif name == "stationarity":
        kw = _kwargs(cfg, {"t_end", "dt", "t_burn", "spacing", "chains", "x0"})
        res = ex.stationarity_experiment(_srbm(cfg), seed=seed, **kw)
    elif name == "comparison":
        srbm = _srbm(cfg)
        if "r_bar" in cfg.extra:
            r_bar = cfg.extra["r_bar"]
        else:
            r_bar = skew_symmetric_minorant(srbm.r, srbm.a)
        n_seeds = int(cfg.trials or 100)
        x0 = cfg.extra.get("x0", [0.5] * srbm.d)
        res = ex.comparison_experiment(srbm.r, r_bar, srbm.mu, srbm.a, x0,
                                       seeds=range(seed, seed + n_seeds),
                                       **_kwargs(cfg, {"t_end", "dt"}))
    else:
        kw = _kwargs(cfg, {"dt", "trials", "x0", "t_check"})
        if cfg.t_end is not None:
            kw["t_check"] = cfg.t_end
        res = ex.gap_equivalence_experiment(_particles(cfg), seed=seed, **kw)
    out = res.to_dict()
    if cfg.out is not None:
        _write_json(cfg.out / f"{name}.json", out)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(_dumps(obj) + "\n", encoding="utf-8")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, default=_plain)


def _plain(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="collide", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", help="condition report, matrix classes and wedge angles")
    a.add_argument("--config", required=True)
    a.add_argument("--out", help="also write analyze.json here")
    s = sub.add_parser("simulate", help="simulate a path and write CSV plus collision report")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    e = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    e.add_argument("--name", required=True, choices=EXPERIMENTS)
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True)
    w = sub.add_parser("wedge", help="wedge geometry of a 2-d SRBM")
    w.add_argument("--config", required=True)
    w.add_argument("--out", help="also write wedge.json here")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, args.out)
        if args.command == "analyze":
            result = analyze(cfg)
        elif args.command == "wedge":
            result = wedge(cfg)
        elif args.command == "simulate":
            result = simulate(cfg)
        else:
            result = experiment(cfg, args.name)
        if args.command in ("analyze", "wedge") and cfg.out is not None:
            _write_json(cfg.out / f"{args.command}.json", result)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    sys.stdout.write(_dumps(result) + "\n")
    return 0


def main() -> None:
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(encoding="utf-8")
    sys.exit(run())
