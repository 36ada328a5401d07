"""Configuration-driven experiment runner.

``confined-langevin run`` executes a named preset or a JSON config file and
writes machine-readable reports (CSV rows plus a JSON sidecar) together with
a reproducibility stamp: the fully resolved configuration, which re-runs to
bitwise-identical report files via ``run --config <stamp>``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 underpowered study.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ConfigurationError,
    ConfinedLangevinError,
    ContractViolationError,
    DimensionMismatchError,
    EstimationFailureError,
    EmptyStatisticsError,
    NumericError,
    SingularConfigurationError,
    ToleranceError,
    UnderpoweredStudyError,
)
from .geometry import domain_from_config
from .harness import (
    SimulationConfig,
    convergence_study,
    energy_drift_study,
    n_steps,
    run_finite_time,
    run_ergodic,
    tau_statistics,
)
from .models import (
    dynamics_from_config,
    dynamics_to_config,
    experiment_registry,
    observable_from_name,
)
from .schemes import (
    SchemeId,
    noise_law,
    o_coefficients,
    obabo_jacobian_1d,
    validate_scheme,
)
from . import sir as sir_module


def _f17(x) -> str:
    return format(float(x), ".17g")


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


# ---------------------------------------------------------------------------
# config resolution


_OVERRIDE_KEYS = ("scheme", "h", "T", "M", "seed")


def preset_to_config(preset, overrides: dict) -> dict:
    """Fully resolved run description for a named preset."""
    cfg = {
        "preset": preset.name,
        "study": preset.study,
        "scheme": preset.scheme.value,
        "T": preset.T, "h": preset.h, "M": preset.M,
        "seed": 0,
        "burn_in": preset.burn_in,
        "max_collisions": 64,
        "collision_policy": "reject",
        "noise": "gaussian",
        "chunk_size": 65536,
        "version": __version__,
    }
    if preset.domain is not None:
        cfg["domain"] = preset.domain.to_config()
    if preset.dynamics is not None:
        cfg["dynamics"] = dynamics_to_config(preset.dynamics)
    if preset.observable is not None:
        cfg["observable"] = preset.observable.name
    if preset.q0 is not None:
        cfg["q0"] = list(preset.q0)
    cfg["p0"] = list(preset.p0) if preset.p0 is not None else None
    cfg["p0_law"] = preset.p0_law
    explicit_h = "h" in overrides
    for key, val in overrides.items():
        if val is None:
            continue
        if key not in _OVERRIDE_KEYS:
            raise ConfigurationError(f"override {key!r} not permitted")
        cfg[key] = val
    if preset.study in ("finite_time", "ergodic", "energy_drift", "tau_stats"):
        if explicit_h and overrides.get("h") is not None:
            cfg["h_sweep"] = [float(overrides["h"])]
            cfg["m_sweep"] = [int(cfg["M"])]
        else:
            cfg["h_sweep"] = list(preset.h_sweep)
            cfg["m_sweep"] = (list(preset.m_sweep) if preset.m_sweep
                              else [int(cfg["M"])] * len(preset.h_sweep))
    if preset.study in ("finite_time", "ergodic"):
        cfg["reference"] = preset.reference_value()
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"unparsable config {path}: {exc}")


def validate(config: dict) -> list:
    """Schema and consistency diagnostics, without running anything."""
    diagnostics = []
    study = config.get("study")
    known = ("finite_time", "ergodic", "tau_stats", "energy_drift", "sir",
             "jacobian")
    if study not in known:
        diagnostics.append(f"unknown study {study!r}; known: {known}")
        return diagnostics
    scheme = dynamics = None
    try:
        scheme = SchemeId.parse(config.get("scheme", ""))
    except ConfigurationError as exc:
        diagnostics.append(str(exc))
    if study != "sir":
        try:
            if "domain" in config and config["domain"] is not None:
                domain_from_config(config["domain"])
        except (ConfigurationError, ContractViolationError) as exc:
            diagnostics.append(f"domain: {exc}")
        try:
            dynamics = dynamics_from_config(config["dynamics"])
        except (KeyError, ConfigurationError) as exc:
            diagnostics.append(f"dynamics: {exc}")
    if scheme is not None and dynamics is not None:
        try:
            validate_scheme(scheme, dynamics)
        except ConfigurationError as exc:
            diagnostics.append(f"scheme/dynamics: {exc}")
    try:
        T, h = float(config["T"]), float(config["h"])
        try:
            n_steps(T, h)
        except ConfigurationError:
            diagnostics.append(f"T/h = {T / h!r} not integral")
        if float(config.get("burn_in", 0.0)) >= T:
            diagnostics.append("burn_in must be smaller than T")
    except (KeyError, TypeError, ValueError) as exc:
        diagnostics.append(f"T/h: {exc}")
    for h in config.get("h_sweep") or []:
        try:
            n_steps(float(config["T"]), float(h))
        except (ConfigurationError, KeyError) as exc:
            diagnostics.append(f"sweep h={h}: {exc}")
    m_sweep = config.get("m_sweep")
    if m_sweep and config.get("h_sweep") and len(m_sweep) != len(config["h_sweep"]):
        diagnostics.append("m_sweep length must match h_sweep")
    try:
        noise_law(config.get("noise", "gaussian"))
    except ConfigurationError as exc:
        diagnostics.append(str(exc))
    return diagnostics


# ---------------------------------------------------------------------------
# report writing


def _json_text(payload: dict) -> str:
    return json.dumps(_jsonify(payload), indent=2, sort_keys=True) + "\n"


def _csv_text(header, rows, footer=None) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_f17(v) if isinstance(v, (float, np.floating))
                              else str(v) for v in row))
    if footer:
        lines.append(",".join(str(v) for v in footer))
    return "\n".join(lines) + "\n"


def _flush_outputs(outputs: dict) -> list:
    """Write all report files at once; nothing is left behind on failure."""
    for path, text in outputs.items():
        path.write_text(text)
    return list(outputs)


_ROW_HEADER = ("h", "mean", "error", "half_width", "mean_collisions",
               "rejected_fraction")


def _emit_rows(outputs, out_dir, stem, fmt, rows, slope=None, slope_ci=None,
               meta=None):
    payload = {"rows": [dict(zip(_ROW_HEADER, r)) for r in rows]}
    if slope is not None:
        payload["slope"] = slope
        payload["slope_ci"] = slope_ci
    if meta:
        payload.update(meta)
    if fmt == "csv":
        footer = None
        if slope is not None:
            footer = ["slope", _f17(slope), _f17(slope_ci), "", "", ""]
        outputs[out_dir / f"{stem}.csv"] = _csv_text(_ROW_HEADER, rows, footer)
    outputs[out_dir / f"{stem}.json"] = _json_text(payload)


# ---------------------------------------------------------------------------
# study execution


def _build_sim_config(config: dict, scheme, h, M, threads) -> SimulationConfig:
    domain = (domain_from_config(config["domain"])
              if config.get("domain") is not None else None)
    return SimulationConfig(
        scheme=scheme,
        domain=domain,
        dynamics=dynamics_from_config(config["dynamics"]),
        T=float(config["T"]), h=float(h), M=int(M),
        seed=int(config.get("seed", 0)),
        q0=tuple(config["q0"]),
        p0=tuple(config["p0"]) if config.get("p0") is not None else None,
        p0_law=config.get("p0_law"),
        burn_in=float(config.get("burn_in", 0.0)),
        max_collisions=int(config.get("max_collisions", 64)),
        collision_policy=config.get("collision_policy", "reject"),
        noise=config.get("noise", "gaussian"),
        chunk_size=int(config.get("chunk_size", 65536)),
        threads=threads)


def run_study(config: dict, out_dir: Path, fmt: str, threads=None) -> list:
    """Execute the configured study and write its report files."""
    study = config["study"]
    stem = config.get("preset") or "run"
    scheme = SchemeId.parse(config["scheme"])
    out_dir.mkdir(parents=True, exist_ok=True)

    outputs = {}

    if study in ("finite_time", "ergodic"):
        dynamics = dynamics_from_config(config["dynamics"])
        observable = observable_from_name(config["observable"], dynamics)
        reference = float(config["reference"])
        h_sweep = [float(h) for h in config["h_sweep"]]
        m_sweep = [int(m) for m in config["m_sweep"]]
        mode = "ergodic" if study == "ergodic" else "finite_time"
        slope = slope_ci = None
        if len(set(h_sweep)) >= 3:
            sim = _build_sim_config(config, scheme, h_sweep[0], m_sweep[0],
                                    threads)
            report = convergence_study(sim, h_sweep, observable, reference,
                                       m_list=m_sweep, mode=mode)
            rows = [(r.h, r.mean, r.error, r.half_width, r.mean_collisions,
                     r.rejected_fraction) for r in report.rows]
            slope, slope_ci = report.slope, report.slope_ci
        else:
            runner = run_finite_time if mode == "finite_time" else run_ergodic
            rows = []
            for h, m in zip(h_sweep, m_sweep):
                sim = _build_sim_config(config, scheme, h, m, threads)
                rep = runner(sim, observable, reference)
                rows.append((h, rep.mean, rep.error, rep.half_width,
                             rep.mean_collisions, rep.rejected_fraction))
            rows.sort(key=lambda r: -r[0])
        _emit_rows(outputs, out_dir, f"{stem}_convergence", fmt, rows,
                   slope, slope_ci,
                   meta={"scheme": scheme.value, "reference": reference})
        return _flush_outputs(outputs)

    if study == "tau_stats":
        summary_rows = []
        for h, m in zip(config["h_sweep"], config["m_sweep"]):
            sim = _build_sim_config(config, scheme, float(h), int(m), threads)
            stats = tau_statistics(sim)
            summary_rows.append((stats.h, stats.lambda1, stats.lambda2,
                                 stats.count, stats.lambda1_half_width))
            if fmt == "csv":
                centers = 0.5 * (stats.hist_edges[:-1] + stats.hist_edges[1:])
                outputs[out_dir / f"{stem}_hist_h{_f17(h)}.csv"] = _csv_text(
                    ("tau_center", "count"),
                    list(zip(centers, stats.hist_counts)))
        header = ("h", "lambda1", "lambda2", "count", "lambda1_half_width")
        if fmt == "csv":
            outputs[out_dir / f"{stem}_summary.csv"] = _csv_text(
                header, summary_rows)
        outputs[out_dir / f"{stem}_summary.json"] = _json_text(
            {"rows": [dict(zip(header, r)) for r in summary_rows]})
        return _flush_outputs(outputs)

    if study == "energy_drift":
        dynamics = dynamics_from_config(config["dynamics"])
        domain = (domain_from_config(config["domain"])
                  if config.get("domain") is not None else None)
        h_list = [float(h) for h in config["h_sweep"]]
        variants = ([("free", None), ("box", domain)]
                    if config.get("p0") is not None else [("box", domain)])
        for tag, dom in variants:
            rep = energy_drift_study(
                dynamics.potential, dom, config.get("p0_law"), h_list,
                float(config["T"]), config["q0"], p0=config.get("p0"),
                M=int(config["M"]), seed=int(config.get("seed", 0)),
                threads=threads, chunk_size=int(config.get("chunk_size", 65536)))
            rows = [(r.h, r.mean, r.error, r.half_width, r.mean_collisions,
                     r.rejected_fraction) for r in rep.rows]
            _emit_rows(outputs, out_dir, f"{stem}_{tag}", fmt, rows,
                       rep.slope, rep.slope_ci)
        return _flush_outputs(outputs)

    if study == "sir":
        result = sir_module.run_sir_inference(
            scheme, h=float(config["h"]), T=float(config["T"]),
            burn_in=float(config.get("burn_in", 10.0)),
            seed=int(config.get("seed", 0)), compute_band=True)
        outputs[out_dir / f"{stem}_posterior.json"] = _json_text(
            {"config": config, "posterior": result.summary_dict()})
        if fmt == "csv":
            rows = [(k, s[0], s[1]) for k, s in enumerate(result.samples)]
            outputs[out_dir / f"{stem}_chain.csv"] = _csv_text(
                ("step", "eta", "alpha"), rows)
            data = sir_module.make_synthetic_data(int(config.get("seed", 0)))
            t = np.asarray(data.times)
            est = sir_module.sir_curves(result.eta_mean, result.alpha_mean,
                                        data.population, data.s0, data.i0,
                                        data.r0_count, t)
            true = sir_module.sir_curves(0.7, 0.2, data.population, data.s0,
                                         data.i0, data.r0_count, t)
            rows = [(t[k], est[k, 0], est[k, 1], est[k, 2],
                     true[k, 0], true[k, 1], true[k, 2],
                     data.observed_infected[k]) for k in range(len(t))]
            outputs[out_dir / f"{stem}_curves.csv"] = _csv_text(
                ("t", "S_est", "I_est", "R_est",
                 "S_true", "I_true", "R_true", "I_observed"), rows)
        return _flush_outputs(outputs)

    if study == "jacobian":
        dynamics = dynamics_from_config(config["dynamics"])
        domain = domain_from_config(config["domain"])
        h = float(config["h"])
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((int(config.get("seed", 0)), 0x7AC0))))
        gamma = dynamics.gamma
        analytic = h * o_coefficients(h / 2.0, -gamma, dynamics.sigma)[1] ** 2
        rows = []
        for _ in range(int(config.get("M", 100))):
            q = float(rng.uniform(0.2, 2.0))
            p = float(rng.standard_normal())
            z1 = float(rng.standard_normal())
            z2 = float(rng.standard_normal())
            try:
                det = obabo_jacobian_1d(dynamics, domain, q, p, h, z1, z2)
            except SingularConfigurationError:
                continue
            rows.append((q, p, z1, z2, det, analytic,
                         abs(abs(det) - analytic) / analytic))
        header = ("q", "p", "z1", "z2", "det_fd", "det_analytic", "rel_err")
        if fmt == "csv":
            outputs[out_dir / f"{stem}_jacobian.csv"] = _csv_text(header, rows)
        worst = max(r[-1] for r in rows)
        outputs[out_dir / f"{stem}_jacobian.json"] = _json_text(
            {"rows": [dict(zip(header, r)) for r in rows],
             "analytic": analytic, "worst_rel_err": worst})
        return _flush_outputs(outputs)

    raise ConfigurationError(f"unknown study {study!r}")


# ---------------------------------------------------------------------------
# entry points


def list_presets(filter_text=None):
    registry = experiment_registry()
    rows = []
    for name, preset in registry.items():
        if filter_text and filter_text.lower() not in name.lower():
            continue
        rows.append((name, preset.study, preset.description))
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="confined-langevin",
        description="reflecting Langevin integrators: studies and reports")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a preset or config file")
    p_run.add_argument("--preset", help="preset name (see list-presets)")
    p_run.add_argument("--config", help="JSON config / stamp file")
    p_run.add_argument("--scheme", help="scheme override (e.g. obabo, baoab)")
    p_run.add_argument("--h", type=float, help="step size override")
    p_run.add_argument("--T", type=float, help="final time override")
    p_run.add_argument("--M", type=int, help="trajectory count override")
    p_run.add_argument("--seed", type=int, help="master seed override")
    p_run.add_argument("--threads", type=int, default=None,
                       help="worker cap (results are thread-count invariant)")
    p_run.add_argument("--output", default="reports", help="output directory")
    p_run.add_argument("--format", choices=("csv", "json"), default="csv")

    p_val = sub.add_parser("validate", help="check a config without running")
    p_val.add_argument("config_path")

    p_list = sub.add_parser("list-presets", help="table of named presets")
    p_list.add_argument("filter", nargs="?", default=None)

    args = parser.parse_args(argv)

    try:
        if args.command == "list-presets":
            for name, study, desc in list_presets(args.filter):
                print(f"{name:20s} {study:12s} {desc}")
            return 0

        if args.command == "validate":
            diagnostics = validate(load_config(args.config_path))
            for d in diagnostics:
                print(f"diagnostic: {d}")
            if diagnostics:
                return 2
            print("config ok")
            return 0

        # run
        if (args.preset is None) == (args.config is None):
            raise ConfigurationError(
                "exactly one of --preset / --config is required")
        if args.preset is not None:
            registry = experiment_registry()
            if args.preset not in registry:
                raise ConfigurationError(
                    f"unknown preset {args.preset!r}; see list-presets")
            overrides = {k: getattr(args, k) for k in _OVERRIDE_KEYS}
            config = preset_to_config(registry[args.preset], overrides)
        else:
            config = load_config(args.config)
            for k in _OVERRIDE_KEYS:
                if getattr(args, k) is not None:
                    config[k] = getattr(args, k)
        diagnostics = validate(config)
        if diagnostics:
            for d in diagnostics:
                print(f"diagnostic: {d}", file=sys.stderr)
            return 2
        out_dir = Path(args.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = run_study(config, out_dir, args.format, threads=args.threads)
        # reproducibility stamp last: a failed run leaves no partial reports
        stem = config.get("preset") or "run"
        stamp = dict(config)
        stamp["version"] = __version__
        stamp_path = out_dir / f"{stem}_stamp.json"
        stamp_path.write_text(_json_text(stamp))
        for f in files + [stamp_path]:
            print(f"wrote {f}")
        return 0

    except (ConfigurationError, ContractViolationError,
            DimensionMismatchError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (UnderpoweredStudyError, EmptyStatisticsError) as exc:
        print(f"underpowered study: {exc}", file=sys.stderr)
        return 4
    except (NumericError, ToleranceError, EstimationFailureError,
            ConfinedLangevinError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
