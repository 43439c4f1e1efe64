"""Command-line front end: ``sim <config.yaml> [--jobs N] [--seed S] [--output PATH] [--format csv|json]``.

Exit status: 0 success, 1 invalid configuration, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import analysis
from .cavity_model import ModelParams
from .effective import coefficient_table, effective_model
from .errors import NumericalError
from .liouvillian import (
    EvolveStats,
    evolve,
    model_liouvillian,
    populations,
    random_ground_state,
    singlet_fidelity,
    spectrum_and_gap,
    steady_state,
)

logger = logging.getLogger(__name__)

MODES = ("dynamics", "steady", "effective", "sweep", "tradeoff")
FORMATS = ("csv", "json")

DYNAMICS_COLUMNS = ["t", "P_S", "P_T", "P_00", "P_11"]
STEADY_COLUMNS = [
    "fidelity", "P_S", "P_T", "P_00", "P_11", "gap", "residual_eigenvalue",
    "degenerate", "relaxation_time", "relaxation_time_SI",
]
EFFECTIVE_COLUMNS = ["channel", "element", "numeric", "analytic", "rel_error"]
SWEEP_COLUMNS = ["C", "kappa_over_gamma", "fidelity", "one_minus_F", "Delta", "delta", "Omega", "Omega_MW", "gap"]
FIT_COLUMNS = ["kappa_over_gamma", "slope", "prefactor", "free_prefactor"]
TRADEOFF_COLUMNS = ["gap_target", "gap", "fidelity", "Omega", "Omega_MW"]

_TOP_KEYS = {
    "mode", "params", "seed", "t_max", "n_steps", "C_list", "C", "kappa_over_gamma",
    "gap_targets", "output_path", "output_format", "gamma_SI",
}
_PARAM_KEYS = {"g", "kappa", "gamma", "Omega", "Omega_MW", "Delta", "delta", "n_max"}
_MODEL_MODES = ("dynamics", "steady", "effective")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class RunConfig:
    mode: str
    params: ModelParams | None = None
    auto_detunings: bool = False
    n_max: int = 2
    seed: int = 0
    t_max: float | None = None
    n_steps: int = 1000
    C_list: list[float] = field(default_factory=list)
    C: float | None = None
    kappa_over_gamma: list[float] = field(default_factory=list)
    gap_targets: list[float] = field(default_factory=list)
    output_path: str | None = None
    output_format: str = "csv"
    gamma_SI: float | None = None


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _positive_list(value, name, errors) -> list[float]:
    vals = value if isinstance(value, list) else [value]
    if not vals or not all(_is_number(v) and v > 0 for v in vals):
        errors.append(f"{name}: expected a positive number or a non-empty list of positive numbers")
        return []
    return [float(v) for v in vals]


def validate(config_text: str) -> RunConfig:
    """Parse YAML config text; raise ConfigError listing every problem found."""
    try:
        raw = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"config is not valid YAML: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a mapping of keys to values"])

    errors: list[str] = []
    for key in sorted(set(raw) - _TOP_KEYS):
        errors.append(f"{key}: unknown key")

    mode = raw.get("mode")
    if mode not in MODES:
        errors.append(f"mode: must be one of {', '.join(MODES)} (got {mode!r})")
    cfg = RunConfig(mode=mode if mode in MODES else "steady")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        errors.append("seed: must be an integer")
    else:
        cfg.seed = seed

    fmt = raw.get("output_format", "csv")
    if fmt not in FORMATS:
        errors.append(f"output_format: must be csv or json (got {fmt!r})")
    else:
        cfg.output_format = fmt
    out = raw.get("output_path")
    if out is not None and not isinstance(out, str):
        errors.append("output_path: must be a string")
    cfg.output_path = out

    if "gamma_SI" in raw:
        if _is_number(raw["gamma_SI"]) and raw["gamma_SI"] > 0:
            cfg.gamma_SI = float(raw["gamma_SI"])
        else:
            errors.append("gamma_SI: must be a positive rate in 1/s")

    params = raw.get("params")
    if params is not None and not isinstance(params, dict):
        errors.append("params: must be a mapping")
        params = None
    params = params or {}
    for key in sorted(set(params) - _PARAM_KEYS):
        errors.append(f"params.{key}: unknown parameter")

    n_max = params.get("n_max", 2)
    if not isinstance(n_max, int) or isinstance(n_max, bool) or n_max < 1:
        errors.append("n_max: must be an integer >= 1")
    else:
        cfg.n_max = n_max

    if mode in _MODEL_MODES:
        values = {}
        for name in ("g", "kappa"):
            v = params.get(name)
            if v is None:
                errors.append(f"{name}: required for mode {mode}")
            elif not _is_number(v) or v <= 0:
                errors.append(f"{name}: must be a positive number")
            else:
                values[name] = float(v)
        gamma = params.get("gamma", 1.0)
        if not _is_number(gamma) or gamma <= 0:
            errors.append("gamma: must be a positive number")
        else:
            values["gamma"] = float(gamma)
        for name in ("Omega", "Omega_MW"):
            v = params.get(name)
            if v is None:
                errors.append(f"{name}: required for mode {mode}")
            elif not _is_number(v) or v < 0:
                errors.append(f"{name}: must be a non-negative number")
            else:
                values[name] = float(v)
        autos = [params.get(n) == "auto" for n in ("Delta", "delta")]
        if all(autos):
            cfg.auto_detunings = True
            if not (values.get("Omega", 0) > 0 and values.get("Omega_MW", 0) > 0):
                errors.append("Delta, delta: 'auto' needs Omega > 0 and Omega_MW > 0")
        elif any(autos):
            errors.append("Delta, delta: 'auto' must be used for both detunings or neither")
        else:
            for name in ("Delta", "delta"):
                v = params.get(name)
                if v is None:
                    errors.append(f"{name}: required for mode {mode} (number or 'auto')")
                elif not _is_number(v):
                    errors.append(f"{name}: must be a number or 'auto'")
                else:
                    values[name] = float(v)
        if mode == "effective" and "Delta" in values and values["Delta"] == 0:
            errors.append("Delta: must be non-zero for the effective-operator comparison")
        if not errors:
            if cfg.auto_detunings:
                values.update(Delta=1.0, delta=0.0)
            cfg.params = ModelParams(n_max=cfg.n_max, **values)

    if mode == "dynamics":
        t_max = raw.get("t_max")
        if t_max is None:
            errors.append("t_max: required for mode dynamics")
        elif not _is_number(t_max) or t_max <= 0:
            errors.append("t_max: must be a positive number")
        else:
            cfg.t_max = float(t_max)
        n_steps = raw.get("n_steps", 1000)
        if not isinstance(n_steps, int) or isinstance(n_steps, bool) or n_steps < 1:
            errors.append("n_steps: must be a positive integer")
        else:
            cfg.n_steps = n_steps

    if mode == "sweep":
        if "C_list" not in raw:
            errors.append("C_list: required for mode sweep")
        else:
            cfg.C_list = _positive_list(raw["C_list"], "C_list", errors)
    if mode == "tradeoff":
        C = raw.get("C")
        if C is None:
            errors.append("C: required for mode tradeoff")
        elif not _is_number(C) or C <= 0:
            errors.append("C: must be a positive number")
        else:
            cfg.C = float(C)
        if "gap_targets" not in raw:
            errors.append("gap_targets: required for mode tradeoff")
        else:
            cfg.gap_targets = _positive_list(raw["gap_targets"], "gap_targets", errors)
    if mode in ("sweep", "tradeoff"):
        if "kappa_over_gamma" not in raw:
            errors.append(f"kappa_over_gamma: required for mode {mode}")
        else:
            cfg.kappa_over_gamma = _positive_list(raw["kappa_over_gamma"], "kappa_over_gamma", errors)
            if mode == "tradeoff" and len(cfg.kappa_over_gamma) > 1:
                errors.append("kappa_over_gamma: tradeoff takes a single value")

    if errors:
        raise ConfigError(errors)
    return cfg


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(f"{float(v):.12g}")
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _params_dict(p: ModelParams) -> dict:
    return asdict(p)


@dataclass
class RunResult:
    columns: list[str]
    rows: list[dict]
    diagnostics: dict = field(default_factory=dict)
    extra_tables: dict = field(default_factory=dict)
    summary: str = ""


def _resolve_params(cfg: RunConfig) -> tuple[ModelParams, dict]:
    p = cfg.params
    diag = {}
    if cfg.auto_detunings:
        g = p.g
        cons = analysis.DriveConstraints.fixed(p.Omega / g, p.Omega_MW / p.Omega)
        pt = analysis.optimize_fidelity(p.cooperativity, p.kappa / p.gamma, cons, gamma=p.gamma, n_max=p.n_max)
        p = p.with_(Delta=pt.best_params.Delta, delta=pt.best_params.delta)
        diag["detuning_search"] = {"n_evals": pt.n_evals, "converged": pt.converged}
    return p, diag


def _run_dynamics(cfg: RunConfig) -> RunResult:
    p, diag = _resolve_params(cfg)
    l = model_liouvillian(p)
    rho0 = random_ground_state(p, cfg.seed)
    t = np.linspace(0.0, cfg.t_max, cfg.n_steps + 1)
    stats = EvolveStats()
    states = evolve(l, rho0, t, stats=stats)
    rows = []
    drift = 0.0
    for ti, r in zip(t, states):
        ps, pt, p00, p11 = populations(r)
        rows.append({"t": ti, "P_S": ps, "P_T": pt, "P_00": p00, "P_11": p11})
        drift = max(drift, abs(np.trace(r.matrix) - 1.0))
    diag.update(
        params=_params_dict(p),
        seed=cfg.seed,
        max_steps_per_interval=max(stats.steps_per_interval, default=0),
        max_error_estimate=max(stats.error_estimates, default=0.0),
        trace_drift=drift,
    )
    if cfg.gamma_SI:
        diag["t_SI"] = [ti / cfg.gamma_SI for ti in t]
    return RunResult(DYNAMICS_COLUMNS, rows, diag, summary=f"final P_S = {rows[-1]['P_S']:.6f}")


def _run_steady(cfg: RunConfig) -> RunResult:
    p, diag = _resolve_params(cfg)
    l = model_liouvillian(p)
    ss = steady_state(l)
    gap = spectrum_and_gap(l).gap
    ps, pt, p00, p11 = populations(ss.rho_ss)
    relax = 1.0 / gap if gap > 0 else float("inf")
    row = {
        "fidelity": singlet_fidelity(ss.rho_ss), "P_S": ps, "P_T": pt, "P_00": p00, "P_11": p11,
        "gap": gap, "residual_eigenvalue": ss.residual_eigenvalue, "degenerate": ss.degeneracy_flag,
        "relaxation_time": relax,
        "relaxation_time_SI": relax / cfg.gamma_SI if cfg.gamma_SI else None,
    }
    diag.update(params=_params_dict(p), second_eigenvalue=ss.second_eigenvalue)
    return RunResult(STEADY_COLUMNS, [row], diag, summary=f"fidelity = {row['fidelity']:.6f}, gap = {gap:.6g}")


def _run_effective(cfg: RunConfig) -> RunResult:
    p, diag = _resolve_params(cfg)
    rows = [
        {"channel": r.channel, "element": r.element, "numeric": r.numeric, "analytic": r.analytic,
         "rel_error": r.rel_error}
        for r in coefficient_table(p)
    ]
    model = effective_model(p)
    diag.update(
        params=_params_dict(p),
        residual_norm=model.residual_norm,
        h_eff_real=model.h_eff.matrix.real.tolist(),
        h_eff_imag=model.h_eff.matrix.imag.tolist(),
    )
    worst = max(r["rel_error"] for r in rows)
    return RunResult(EFFECTIVE_COLUMNS, rows, diag, summary=f"max relative deviation = {worst:.3g}")


def _run_sweep(cfg: RunConfig, jobs: int) -> RunResult:
    rows, fits, per_point = [], [], []
    for kg in cfg.kappa_over_gamma:
        pts = analysis.sweep(cfg.C_list, kg, jobs=jobs, n_max=cfg.n_max)
        rows.extend(pt.row() for pt in pts)
        per_point.extend(
            {"C": pt.C, "kappa_over_gamma": kg, "n_evals": pt.n_evals, "converged": pt.converged,
             "residual_eigenvalue": pt.residual_eigenvalue}
            for pt in pts
        )
        if len(pts) >= 2:
            fit = analysis.fit_scaling([pt.C for pt in pts], [pt.one_minus_F for pt in pts])
            fits.append({"kappa_over_gamma": kg, "slope": fit.slope, "prefactor": fit.prefactor,
                         "free_prefactor": fit.free_prefactor})
    summary = "; ".join(
        f"kappa/gamma={f['kappa_over_gamma']:g}: slope {f['slope']:.3f}, prefactor {f['prefactor']:.3f}" for f in fits
    )
    return RunResult(SWEEP_COLUMNS, rows, {"points": per_point}, {"fit": (FIT_COLUMNS, fits)}, summary)


def _run_tradeoff(cfg: RunConfig) -> RunResult:
    pts = analysis.gap_fidelity_tradeoff(cfg.C, cfg.kappa_over_gamma[0], cfg.gap_targets, n_max=cfg.n_max)
    rows = [
        {"gap_target": q.gap_target, "gap": q.gap, "fidelity": q.fidelity, "Omega": q.Omega, "Omega_MW": q.Omega_MW}
        for q in pts
    ]
    omitted = [g for g in cfg.gap_targets if g not in {q.gap_target for q in pts}]
    return RunResult(TRADEOFF_COLUMNS, rows, {"omitted_targets": omitted}, summary=f"{len(rows)} points")


def run(cfg: RunConfig, jobs: int = 1) -> RunResult:
    if cfg.mode == "dynamics":
        return _run_dynamics(cfg)
    if cfg.mode == "steady":
        return _run_steady(cfg)
    if cfg.mode == "effective":
        return _run_effective(cfg)
    if cfg.mode == "sweep":
        return _run_sweep(cfg, jobs)
    return _run_tradeoff(cfg)


def render(result: RunResult, fmt: str) -> tuple[str, dict[str, str]]:
    """Main output text plus companion tables keyed by name."""
    if fmt == "json":
        doc = {"columns": result.columns, "rows": result.rows, "diagnostics": result.diagnostics}
        for name, (cols, rows) in result.extra_tables.items():
            doc[name] = rows
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n", {}
    extras = {name: _csv_text(cols, rows) for name, (cols, rows) in result.extra_tables.items()}
    return _csv_text(result.columns, result.rows), extras


def write_outputs(result: RunResult, fmt: str, output_path: str | None) -> None:
    main_text, extras = render(result, fmt)
    if output_path is None:
        sys.stdout.write(main_text)
        for name, text in extras.items():
            sys.stderr.write(f"# {name}\n{text}")
        return
    path = Path(output_path)
    path.write_text(main_text)
    for name, text in extras.items():
        path.with_name(f"{path.stem}_{name}{path.suffix}").write_text(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sim", description="Dissipative singlet preparation in a cavity")
    ap.add_argument("config", help="YAML experiment configuration")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweep mode")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--output", default=None, help="override output_path")
    ap.add_argument("--format", choices=FORMATS, default=None, help="override output_format")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = validate(text)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 1
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output is not None:
        cfg.output_path = args.output
    if args.format is not None:
        cfg.output_format = args.format
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return 1

    try:
        result = run(cfg, jobs=args.jobs)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        for k, v in getattr(exc, "diagnostics", {}).items():
            print(f"  {k}: {v}", file=sys.stderr)
        return 2
    write_outputs(result, cfg.output_format, cfg.output_path)
    if result.summary:
        print(result.summary, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
