"""Command-line experiment runner.

Every subcommand reads an optional JSON config (unknown keys are rejected),
writes ``summary.json`` plus CSV tables into ``--out``, and exits with 0 on
success, 2 when a verdict is Inconclusive, and 1 on error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import compression, grains, hypotheses, maximal, oscillatory, sublevel
from .errors import CKLError, ConfigError
from .phases import PhaseSpec, canonical_kind, exponent_table, verify_nondegeneracy
from .tubes import build_family

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


# -- configs ------------------------------------------------------------------------------

def _ladder(lo: int, hi: int) -> list:
    return [2.0**-k for k in range(lo, hi + 1)]


@dataclass
class PhaseInfoConfig:
    phase: Any = "ConstCoeff"
    samples: int = 1024
    seed: int = 0


@dataclass
class HypothesisConfig:
    phase: Any = "ConstCoeff"
    d: int | None = None
    D: int | None = None
    y_samples: int = 10_000
    samples: int = 2000
    tol: float = hypotheses.DEFAULT_TOL
    seed: int = 0


@dataclass
class NormConfig:
    phase: Any = "ConstCoeff"
    deltas: list = field(default_factory=lambda: _ladder(3, 5))
    p: float = 2.0
    s: float = 1.0
    suite: str = "SingleTube"


@dataclass
class SublevelConfig:
    ensemble: Any = "t2_ty"
    mode: str = "Averaged"
    sigmas: list = field(default_factory=lambda: list(sublevel.DEFAULT_SIGMAS))
    y_samples: int = sublevel.DEFAULT_Y_SAMPLES
    t_points: int = sublevel.DEFAULT_T_POINTS
    seed: int = 0


@dataclass
class CounterexampleConfig:
    samples: int = 10_000
    deltas: list = field(default_factory=lambda: list(compression.DEFAULT_LADDER))
    ps: list = field(default_factory=lambda: [2, 3])
    jacobian_samples: int = 1000
    seed: int = 0


@dataclass
class GrainCountConfig:
    phase: Any = "Counterexample"
    delta: float = 2.0**-5
    separation: str = "Direction"
    centre_rule: Any = None
    grain: Any = "M"
    lambdas: list = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    seed: int = 0


@dataclass
class WongkewConfig:
    variety: Any = "sphere"
    deltas: list = field(default_factory=lambda: _ladder(3, 6))
    box: list = field(default_factory=lambda: [[-0.7, -0.7, -0.7], [0.7, 0.7, 0.7]])


@dataclass
class OscillatoryConfig:
    phase: Any = "ConstCoeff"
    q: float = 4.0
    lambdas: list = field(default_factory=lambda: [8, 16, 32])
    suite: Any = field(default_factory=lambda: ["ConstantOne", "CapFunctions", "RandomSigns"])
    mode: str = "Hormander"
    input_norm: str = "L2"
    seed: int = 0


def load_config(cls, raw: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
    return cls(**raw)


def parse_phase(value) -> PhaseSpec:
    if isinstance(value, PhaseSpec):
        return value
    if isinstance(value, str):
        return PhaseSpec(canonical_kind(value), 3)
    if isinstance(value, dict):
        return PhaseSpec.from_json(value)
    raise ConfigError("phase must be a kind name or a phase JSON object")


# -- outputs ----------------------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(row[h]) for h in header])


def write_summary(out: Path, summary: dict) -> None:
    (out / "summary.json").write_text(json.dumps(_plain(summary), indent=2) + "\n")


# -- subcommands --------------------------------------------------------------------------

def run_phase_info(cfg: PhaseInfoConfig, out: Path, threads: int) -> int:
    ph = parse_phase(cfg.phase)
    report = verify_nondegeneracy(ph, cfg.samples, cfg.seed)
    table = exponent_table(ph.n)
    summary = {"phase": ph.to_json(), "nondegeneracy": report.to_json(), "exponents": table.to_json()}
    write_summary(out, summary)
    rows = [{"quantity": k, "value": v} for k, v in _plain(table.to_json()).items()]
    write_csv(out / "exponents.csv", ["quantity", "value"], rows)
    return EXIT_OK


def run_hypothesis(cfg: HypothesisConfig, out: Path, threads: int) -> int:
    ph = parse_phase(cfg.phase)
    reports = [hypotheses.check_hypothesis_I(ph, cfg.d, cfg.y_samples, tol=cfg.tol, seed=cfg.seed)]
    if ph.translation_invariant:
        reports.append(hypotheses.check_weak_hypothesis_I(ph, cfg.tol))
    kwargs = {} if cfg.d is None else {"d": cfg.d}
    reports.append(hypotheses.check_hypothesis_II(ph, D=cfg.D, samples=cfg.samples, tol=cfg.tol, seed=cfg.seed, **kwargs))
    summary = {"phase": ph.to_json(), "verdicts": {r.hypothesis: r.verdict for r in reports},
               "reports": [r.to_json() for r in reports]}
    write_summary(out, summary)
    header = ["hypothesis", "verdict", "exceptional_fraction", "rank", "rank_constant", "samples"]
    write_csv(out / "verdicts.csv", header, [r.to_json() for r in reports])
    return EXIT_INCONCLUSIVE if any(r.verdict == "Inconclusive" for r in reports) else EXIT_OK


def _norm_runner(operator: str) -> Callable:
    def run(cfg: NormConfig, out: Path, threads: int) -> int:
        ph = parse_phase(cfg.phase)
        rows = []
        for delta in cfg.deltas:
            lb = maximal.operator_norm_lower(ph, float(delta), cfg.p, cfg.s, cfg.suite, operator, threads)
            rows.append({"delta": float(delta), "ratio": lb.ratio, "numerator": lb.numerator, "denominator": lb.denominator})
        summary = {"phase": ph.to_json(), "operator": operator, "p": cfg.p, "s": cfg.s, "suite": cfg.suite, "rows": rows}
        if len(rows) >= 3:
            summary["fit"] = maximal.fit_scaling([(r["delta"], r["ratio"]) for r in rows]).to_json()
        write_summary(out, summary)
        write_csv(out / "norms.csv", ["delta", "ratio", "numerator", "denominator"], rows)
        return EXIT_OK

    return run


def _ensemble(value) -> sublevel.Ensemble:
    if isinstance(value, str):
        return sublevel.builtin_ensemble(value)
    if isinstance(value, dict):
        if "phase" not in value or set(value) - {"phase", "target"}:
            raise ConfigError("a phase ensemble is {phase, target}")
        return sublevel.phase_ensemble(parse_phase(value["phase"]), value.get("target", "one"))
    raise ConfigError("ensemble must be a builtin name or {phase, target}")


def run_sublevel(cfg: SublevelConfig, out: Path, threads: int) -> int:
    ens = _ensemble(cfg.ensemble)
    prof = sublevel.kappa_experiment(ens, cfg.mode, cfg.sigmas, cfg.y_samples, cfg.t_points, cfg.seed)
    write_summary(out, prof.to_json())
    rows = [{"sigma": s, "measure": m, "mode": prof.mode, "ensemble_id": prof.ensemble}
            for s, m in zip(prof.sigmas, prof.measures)]
    write_csv(out / "profile.csv", ["sigma", "measure", "mode", "ensemble_id"], rows)
    return EXIT_OK


def run_counterexample(cfg: CounterexampleConfig, out: Path, threads: int) -> int:
    contain = compression.verify_surface_containment(cfg.samples, seed=cfg.seed)
    scan = compression.compression_volume_scan(cfg.deltas)
    ladder = compression.compression_lower_bound(cfg.ps, cfg.deltas, threads)
    rng = np.random.default_rng(cfg.seed)
    ys = compression.sample_y0(rng, cfg.jacobian_samples)
    ts = rng.uniform(-0.5, 0.5, cfg.jacobian_samples)
    A, B, C = compression.jacobian_coefficients(compression.counterexample_omega, ys)
    maps = {
        "counterexample": compression.counterexample_omega,
        "identity": compression.identity_map,
        "random_polynomial": compression.random_polynomial_map(cfg.seed),
    }
    companion = {k: float(compression.companion_residual(m, ys, ts).max()) for k, m in maps.items()}
    summary = {
        "max_surface_deviation": contain.max_deviation,
        "max_closed_form_error": contain.max_closed_form_error,
        "volume_slope": scan.fit.slope,
        "lower_bound_slopes": {str(p): f.slope for p, f in ladder.fits.items()},
        "jacobian_max_abs": {"A": float(np.abs(A).max()), "B": float(np.abs(B).max()), "C": float(np.abs(C).max())},
        "companion_residual": companion,
    }
    write_summary(out, summary)
    write_csv(out / "volumes.csv", ["delta", "measure", "oracle"],
              [{"delta": d, "measure": m, "oracle": o} for d, m, o in zip(scan.deltas, scan.measures, scan.oracle)])
    write_csv(out / "lower_bound.csv", ["p", "delta", "ratio"], ladder.rows())
    return EXIT_OK


def _grain(value, ph, delta: float) -> grains.Grain:
    if value == "M":
        return grains.Grain([grains.log_surface_function(ph.n)], delta, 1.0, np.array([1.1] + [0.0] * (ph.n - 1)))
    if not isinstance(value, dict):
        raise ConfigError("grain must be \"M\" or {polys, delta, rho, center}")
    allowed = {"polys", "delta", "rho", "center"}
    if set(value) - allowed:
        raise ConfigError(f"unknown grain field(s): {', '.join(sorted(set(value) - allowed))}")
    return grains.Grain(value["polys"], float(value.get("delta", delta)), float(value.get("rho", 1.0)),
                        np.asarray(value.get("center", [0.0] * ph.n), float))


def run_grain_count(cfg: GrainCountConfig, out: Path, threads: int) -> int:
    ph = parse_phase(cfg.phase)
    rule = cfg.centre_rule
    if rule is None:
        rule = "CounterexampleOmega" if ph.kind == "Counterexample" else "FixedZero"
    fam = build_family(ph, cfg.delta, cfg.separation, rule)
    grain = _grain(cfg.grain, ph, cfg.delta)
    fractions = grains.family_grain_fractions(fam, grain)
    rows = [{"lambda": float(lam), "count": int(np.sum(fractions >= lam)), "family_size": len(fam)} for lam in cfg.lambdas]
    summary = {"phase": ph.to_json(), "delta": cfg.delta, "family_size": len(fam), "rows": rows}
    write_summary(out, summary)
    write_csv(out / "counts.csv", ["lambda", "count", "family_size"], rows)
    return EXIT_OK


def _variety(value) -> list:
    if value == "sphere":
        return [grains.sphere_polynomial()]
    if value == "circle":
        return grains.circle_polynomials()
    if value == "box":
        return []
    if isinstance(value, dict) and set(value) == {"polys"}:
        return list(value["polys"])
    raise ConfigError("variety must be sphere, circle, box or {polys: [...]}")


def run_wongkew(cfg: WongkewConfig, out: Path, threads: int) -> int:
    funcs = _variety(cfg.variety)
    box = (np.asarray(cfg.box[0], float), np.asarray(cfg.box[1], float))
    res = grains.neighborhood_volume_fit(funcs, cfg.deltas, box)
    write_summary(out, {"variety": cfg.variety, "codim": len(funcs), "fit": res.fit.to_json()})
    write_csv(out / "volumes.csv", ["delta", "measure"],
              [{"delta": d, "measure": m} for d, m in zip(res.deltas, res.measures)])
    return EXIT_OK


def run_oscillatory(cfg: OscillatoryConfig, out: Path, threads: int) -> int:
    ph = parse_phase(cfg.phase)
    # a bare RandomSigns entry takes the run seed
    items = [cfg.suite] if isinstance(cfg.suite, str) else list(cfg.suite)
    suite = [f"RandomSigns({cfg.seed})" if str(s).strip() == "RandomSigns" else s for s in items]
    res = oscillatory.norm_scaling_experiment(ph, cfg.q, cfg.lambdas, suite, cfg.mode, cfg.input_norm)
    write_summary(out, {"phase": ph.to_json(), "mode": cfg.mode, "q": cfg.q, "fit": res.fit.to_json(),
                        "per_function": res.per_function})
    write_csv(out / "norms.csv", ["lambda", "q", "norm_ratio"], res.rows())
    return EXIT_OK


SUBCOMMANDS: dict[str, tuple[type, Callable, str]] = {
    "phase-info": (PhaseInfoConfig, run_phase_info, "nondegeneracy check and exponent table"),
    "hypothesis-check": (HypothesisConfig, run_hypothesis, "Hypotheses I, w-I and II"),
    "maximal-norm": (NormConfig, _norm_runner("Kakeya"), "Kakeya maximal norm lower bounds"),
    "nikodym-norm": (NormConfig, _norm_runner("Nikodym"), "Nikodym maximal norm lower bounds"),
    "sublevel": (SublevelConfig, run_sublevel, "uniform sublevel-set kappa experiment"),
    "counterexample": (CounterexampleConfig, run_counterexample, "the compressed family end to end"),
    "grain-count": (GrainCountConfig, run_grain_count, "tube-grain concentration counts"),
    "wongkew": (WongkewConfig, run_wongkew, "neighbourhood volume scaling of a variety"),
    "oscillatory": (OscillatoryConfig, run_oscillatory, "lambda-ladder oscillatory norm fit"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ckl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, _, help_text) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("results") / name, help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--phase", help="phase kind or alias (overrides the config phase)")
    return parser


def run(args: argparse.Namespace) -> int:
    cls, runner, _ = SUBCOMMANDS[args.command]
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    if args.phase is not None:
        if "phase" not in names:
            raise ConfigError(f"{args.command} takes no phase")
        raw["phase"] = args.phase
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if "seed" in names:
            raw["seed"] = args.seed
    if args.threads < 1:
        raise ConfigError("--threads must be positive")
    cfg = load_config(cls, raw)
    args.out.mkdir(parents=True, exist_ok=True)
    return runner(cfg, args.out, args.threads)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except (CKLError, ValueError, TypeError, KeyError, OSError, MemoryError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"ckl {args.command}: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
