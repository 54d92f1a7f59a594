"""Declarative experiment runner.

``ldsignal run config.json`` loads a JSON experiment description,
executes the pipeline, and writes three artifacts into the output
directory: ``results.csv`` (Monte Carlo estimates), ``predictions.csv``
(theoretical size/power rows sharing join keys with the results), and
``report.json`` (assumption reports, consistency verdicts, bound
comparisons).  ``ldsignal validate config.json`` checks the config and
prints the resolved plan without executing.

Exit codes: 0 success, 2 invalid config, 3 numeric failure.  Seed
precedence: --seed flag, then LDSIGNAL_SEED, then the config value.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import chernoff, consistency, kernels, montecarlo, quadratic
from .errors import LDSignalError, NumericError, ParameterError
from .model import REAL, CoefficientVector, simulate_observation
from .montecarlo import CSV_HEADER, MCConfig, csv_row, format_float
from .quadratic import threshold_x

EXPERIMENTS = (
    "calibrate-null",
    "power-curve",
    "chernoff-suite",
    "consistency-scan",
    "kernel-vs-quadratic",
    "counterexample",
)

_SCHEMA = {
    "type": "object",
    "required": ["experiment", "seed"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "eps_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "x_policy": {
            "type": "object",
            "required": ["x0"],
            "additionalProperties": False,
            "properties": {"x0": {"type": "number"}, "eps_power": {"type": "number"}},
        },
        "rate": {
            "type": "object",
            "required": ["r", "omega"],
            "additionalProperties": False,
            "properties": {"r": {"type": "number"}, "omega": {"type": "number"}},
        },
        "scheme": {"type": "object", "required": ["name"]},
        "kernel": {"type": "object", "required": ["name"]},
        "family": {"type": "object", "required": ["name"]},
        "mc": {
            "type": "object",
            "required": ["n_reps"],
            "additionalProperties": False,
            "properties": {
                "n_reps": {"type": "integer", "minimum": 100},
                "mode": {"enum": ["plain", "tilted"]},
                "tilt_t": {"type": "number"},
            },
        },
        "suite": {"type": "object"},
        "tau": {"type": "object"},
        "n_observations": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
    },
}

_NEEDS = {
    "calibrate-null": ("eps_grid", "alpha", "scheme", "mc"),
    "power-curve": ("eps_grid", "alpha", "scheme", "family", "rate", "mc"),
    "chernoff-suite": ("epsilon", "scheme", "suite", "mc"),
    "consistency-scan": ("eps_grid", "scheme", "family", "rate", "mc"),
    "kernel-vs-quadratic": ("eps_grid", "kernel", "rate"),
    "counterexample": ("rate", "tau"),
}


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    try:
        jsonschema.validate(doc, _SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: at {where}: {exc.message}") from exc
    missing = [f for f in _NEEDS[doc["experiment"]] if f not in doc]
    if missing:
        raise ConfigError(f"{path}: experiment {doc['experiment']!r} needs fields: {', '.join(missing)}")
    grid = doc.get("eps_grid")
    if grid is not None:
        if not grid or any(b >= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"{path}: eps_grid must be nonempty and strictly decreasing")
    if "rate" in doc:
        try:
            consistency.rate_params(doc["rate"]["r"], doc["rate"]["omega"])
        except ParameterError as exc:
            raise ConfigError(f"{path}: at rate: {exc}") from exc
    return doc


# ---------------------------------------------------------------------------
# config resolution
# ---------------------------------------------------------------------------


def _resolve_rate(doc: dict) -> consistency.RateParams | None:
    if "rate" not in doc:
        return None
    return consistency.rate_params(doc["rate"]["r"], doc["rate"]["omega"])


def _resolve_scheme(doc: dict) -> quadratic.WeightScheme:
    spec = doc["scheme"]
    name = spec["name"]
    rate = _resolve_rate(doc)
    if name == "flat-cutoff":
        if rate is None:
            raise ConfigError("flat-cutoff scheme needs the rate block")
        return quadratic.flat_cutoff_scheme(rate.r, rate.omega, spec.get("scale", 1.0))
    if name == "polynomial-decay":
        if rate is None:
            raise ConfigError("polynomial-decay scheme needs the rate block")
        return quadratic.polynomial_scheme(
            spec.get("exponent", 2.0),
            rate.r,
            rate.omega,
            tail_multiple=spec.get("tail_multiple", 10.0),
            scale=spec.get("scale", 1.0),
        )
    if name == "flat":
        return quadratic.flat_weights(int(spec["k"]), spec.get("value", 1.0))
    if name == "geometric":
        return quadratic.geometric_scheme(spec.get("ratio", 0.5), int(spec.get("length", 50)))
    if name == "custom":
        return quadratic.custom_scheme(
            np.asarray(spec["weights"], dtype=float),
            label=spec.get("label", "custom"),
            has_cutoff=spec.get("has_cutoff", False),
        )
    raise ConfigError(f"unknown scheme {name!r}")


def _resolve_kernel(doc: dict) -> kernels.Kernel:
    spec = doc["kernel"]
    name = spec["name"]
    qn = int(spec.get("quadrature_n", 4096))
    if name == "uniform":
        return kernels.uniform_kernel(qn)
    if name == "epanechnikov":
        return kernels.epanechnikov_kernel(qn)
    if name == "custom":
        return kernels.tabulated_kernel(spec["table"], qn)
    raise ConfigError(f"unknown kernel {name!r}")


def _resolve_family(doc: dict) -> consistency.AlternativeFamily:
    spec = doc["family"]
    rate = _resolve_rate(doc)
    if rate is None:
        raise ConfigError("family presets need the rate block")
    name = spec["name"]
    amp = spec.get("amplitude", 1.0)
    if name == "single-mode":
        if "k_multiple" in spec:
            return consistency.single_mode_family(
                rate,
                j0=None,
                k_multiple=spec["k_multiple"],
                eps_power=spec.get("eps_power", 0.0),
                amplitude=amp,
            )
        return consistency.single_mode_family(rate, j0=int(spec.get("j0", 1)), amplitude=amp)
    if name == "split-mass":
        locations = []
        for loc in spec["locations"]:
            frac = loc["fraction"]
            where = {k: v for k, v in loc.items() if k != "fraction"}
            locations.append((where, frac))
        return consistency.split_mass_family(rate, locations, amplitude=amp)
    if name == "power-law":
        return consistency.power_law_family(
            rate, spec["exponent"], span_multiple=spec.get("span_multiple", 1.0), amplitude=amp
        )
    raise ConfigError(f"unknown family {name!r}")


def _resolve_mc(doc: dict, seed: int) -> MCConfig:
    spec = doc.get("mc", {"n_reps": 10000})
    return MCConfig(int(spec["n_reps"]), seed, spec.get("mode", "plain"), spec.get("tilt_t"))


def _size_policy(doc: dict):
    """alpha as a function of eps: explicit constant or threshold policy x0 * eps^p."""
    if "x_policy" in doc:
        x0 = float(doc["x_policy"]["x0"])
        p = float(doc["x_policy"].get("eps_power", 0.0))
        return lambda eps: quadratic.norm_sf(x0 * eps**p)
    alpha = doc.get("alpha", 0.05)
    return lambda eps: alpha


# ---------------------------------------------------------------------------
# prediction rows
# ---------------------------------------------------------------------------

PRED_HEADER = (
    "experiment_id,epsilon,x_alpha,regime,alpha_pred,beta_pred,log_alpha,log_beta,"
    "b_eps,d_eps,k_eps"
)


def _pred_row(experiment_id: str, epsilon: float, pred: quadratic.PowerPrediction) -> str:
    def opt(v):
        return "" if v is None else format_float(v)

    return ",".join(
        [
            experiment_id,
            format_float(epsilon),
            format_float(pred.x_alpha),
            pred.regime,
            opt(pred.alpha_pred),
            opt(pred.beta_pred),
            opt(pred.log_alpha),
            opt(pred.log_beta),
            format_float(pred.b_eps),
            format_float(pred.d_eps),
            str(pred.k_eps),
        ]
    )


# ---------------------------------------------------------------------------
# experiment pipelines
# ---------------------------------------------------------------------------


def _run_calibrate_null(doc, seed, threads):
    scheme = _resolve_scheme(doc)
    policy = _size_policy(doc)
    mc = _resolve_mc(doc, seed)
    results, preds, report = [], [], {"per_eps": []}
    for i, eps in enumerate(doc["eps_grid"]):
        alpha = policy(eps)
        x = threshold_x(alpha)
        est = montecarlo.estimate_alpha(scheme, eps, x, mc, stream=i, threads=threads)
        eid = f"calibrate-null-{i}"
        results.append(csv_row(eid, eps, "quadratic-alpha", x, est, seed))
        pred = quadratic.predict_power(
            CoefficientVector.zero(), scheme, eps, alpha
        )
        preds.append(_pred_row(eid, eps, pred))
        report["per_eps"].append(
            {"epsilon": eps, "x_alpha": x, "alpha_hat": est.p_hat, "alpha_pred": pred.alpha_pred}
        )
    return results, preds, report


def _run_power_curve(doc, seed, threads):
    scheme = _resolve_scheme(doc)
    family = _resolve_family(doc)
    policy = _size_policy(doc)
    mc = _resolve_mc(doc, seed)
    results, preds, report = [], [], {"per_eps": []}
    for i, eps in enumerate(doc["eps_grid"]):
        alpha = policy(eps)
        x = threshold_x(alpha)
        theta = family.generate(eps)
        eid = f"power-curve-{i}"
        a_est = montecarlo.estimate_alpha(scheme, eps, x, mc, stream=2 * i, threads=threads)
        b_est = montecarlo.estimate_beta(theta, scheme, eps, x, mc, stream=2 * i + 1, threads=threads)
        results.append(csv_row(eid, eps, "quadratic-alpha", x, a_est, seed))
        results.append(csv_row(eid, eps, "quadratic-beta", x, b_est, seed))
        pred = quadratic.predict_power(theta, scheme, eps, alpha)
        preds.append(_pred_row(eid, eps, pred))
        report["per_eps"].append(
            {
                "epsilon": eps,
                "x_alpha": x,
                "regime": pred.regime,
                "alpha_hat": a_est.p_hat,
                "beta_hat": b_est.p_hat,
                "beta_pred": pred.beta_pred,
                "log_beta_pred": pred.log_beta,
            }
        )
    return results, preds, report


def _run_chernoff_suite(doc, seed, threads):
    scheme = _resolve_scheme(doc)
    eps = doc["epsilon"]
    mc = _resolve_mc(doc, seed)
    suite = doc["suite"]
    taus = suite.get("tau", [4.0, 6.0, 8.0])
    z_fracs = suite.get("z_fracs", [0.25, 0.5])
    w = scheme.real_weights(eps)
    rho_sq = float(np.sum(w))
    sd = math.sqrt(2.0 * float(np.sum(w * w)))
    results, report = [], {"members": []}
    i = 0
    for tau in taus:
        for frac in z_fracs:
            z = frac * tau
            theta = chernoff.extremal_signal(tau, scheme, eps)
            x_event = z * z / float(w[0])
            bound = chernoff.lower_tail_exponent(theta, scheme, eps, x_event)
            closed = chernoff.extremal_exponent_closed_form(tau, float(w[0]), eps, z)
            x_norm = (z * z / eps**2 - rho_sq) / sd
            est = montecarlo.estimate_beta(theta, scheme, eps, x_norm, mc, stream=i, threads=threads)
            eid = f"chernoff-{i}"
            results.append(csv_row(eid, eps, "chernoff-beta", x_norm, est, seed))
            report["members"].append(
                {
                    "tau": tau,
                    "z": z,
                    "closed_form": closed,
                    "exponent": bound.exponent,
                    "t_star": bound.t_star,
                    "log_beta_hat": est.log_p,
                    "se_log": est.se_log,
                    "bound_valid": est.log_p <= bound.exponent + 3.0 * est.se_log,
                }
            )
            i += 1
    return results, [], report


def _run_consistency_scan(doc, seed, threads):
    rate = _resolve_rate(doc)
    scheme = _resolve_scheme(doc)
    family = _resolve_family(doc)
    policy = _size_policy(doc)
    mc = _resolve_mc(doc, seed)
    grid = doc["eps_grid"]
    ld = consistency.ld_consistency_check(family, rate, grid)
    pure = consistency.pure_consistency_check(family, rate, grid)
    slope = montecarlo.slope_diagnostic(family, rate, scheme, grid, policy, mc, threads=threads)
    results = []
    for i, entry in enumerate(slope.entries):
        eid = f"consistency-scan-{i}"
        results.append(csv_row(eid, entry.epsilon, "slope-beta", entry.x_alpha, entry.beta, seed))
    verdict = "consistent" if ld.consistent else "inconsistent"
    if ld.consistent and not pure.pure:
        verdict = "consistent-not-pure"
    report = {
        "family": family.label,
        "verdict": verdict,
        "mass_ratios": ld.mass_ratios,
        "mass_trend": ld.trend,
        "purity_profile": dict(zip(map(str, pure.c1_grid), pure.delta_profile)),
        "slope_ratios": [e.ratio for e in slope.entries],
        "slope_log_betas": [e.log_beta for e in slope.entries],
        "min_slope_ratio": slope.min_ratio,
        "final_over_initial": slope.final_over_initial,
    }
    return results, [], report


def _run_kernel_vs_quadratic(doc, seed, threads):
    rate = _resolve_rate(doc)
    kernel = _resolve_kernel(doc)
    aband = doc["kernel"].get("bandwidth_a", 1.0)
    n_obs = doc.get("n_observations", 20)
    g_time = kernels.gamma_sq(kernel)
    g_spec = kernels.gamma_sq_spectral(kernel)
    report = {
        "kernel": kernel.description,
        "gamma_sq_time": g_time,
        "gamma_sq_spectral": g_spec,
        "gamma_routes_rel_gap": abs(g_time - g_spec) / g_time,
        "per_eps": [],
    }
    rng_seed = seed
    for i, eps in enumerate(doc["eps_grid"]):
        h = doc["kernel"].get("h") or kernels.bandwidth(rate.r, rate.omega, eps, aband)
        h = min(max(h, 1e-6), 0.5)
        cfg = kernels.KernelTestConfig(h, eps)
        scheme = kernels.spectral_weight_scheme(kernel, cfg)
        worst = 0.0
        for k in range(n_obs):
            theta = CoefficientVector.complex_exp({1: 0.3 + 0.1j, 2: -0.2 + 0.05j}, cfg.jmax)
            obs = simulate_observation(theta, eps, (rng_seed + 977 * i + k) % 2**64)
            t1 = kernels.kernel_statistic(obs, kernel, cfg)
            tq = quadratic.statistic(obs, scheme)
            ref = math.sqrt(h) / math.sqrt(g_time) * tq
            denom = max(abs(t1), abs(ref), 1e-12)
            worst = max(worst, abs(t1 - ref) / denom)
        report["per_eps"].append(
            {
                "epsilon": eps,
                "h": h,
                "jmax": cfg.jmax,
                "max_rel_equivalence_gap": worst,
                "truncation": kernels.truncation_diagnostic(kernel, cfg),
            }
        )
    return [], [], report


def _run_counterexample(doc, seed, threads):
    rate = _resolve_rate(doc)
    tau_spec = doc["tau"]
    exponent = tau_spec.get("exponent", 0.5 + rate.s / 2.0 + 0.5)  # j^-(1/2 + s/2) default
    jmax = int(tau_spec.get("jmax", 4096))
    j = np.arange(1, jmax + 1, dtype=float)
    tau = CoefficientVector(REAL, {int(i): float(v) for i, v in zip(j, j**-exponent)}, jmax)
    levels = consistency.build_inconsistent_family(tau, rate.s, rate.r, rate.omega)
    profile = consistency.snr_profile(levels, rate)
    report = {
        "tau_exponent": exponent,
        "levels": [
            {
                "m": lv.m,
                "c_value": lv.c_value,
                "n": lv.n,
                "epsilon": lv.epsilon,
                "norm_sq": lv.norm_sq,
                "snr_times_eps_4omega": p,
            }
            for lv, p in zip(levels, profile)
        ],
        "c_strictly_increasing": all(
            b.c_value > a.c_value for a, b in zip(levels, levels[1:])
        ),
        "snr_strictly_decreasing": all(b < a for a, b in zip(profile, profile[1:])),
    }
    return [], [], report


_PIPELINES = {
    "calibrate-null": _run_calibrate_null,
    "power-curve": _run_power_curve,
    "chernoff-suite": _run_chernoff_suite,
    "consistency-scan": _run_consistency_scan,
    "kernel-vs-quadratic": _run_kernel_vs_quadratic,
    "counterexample": _run_counterexample,
}

_PLAN_NOTES = {
    "calibrate-null": "null calibration: MC false-alarm rates vs normal-range size predictions",
    "power-curve": "power curve: MC alpha/beta vs normal-range and log-scale power predictions",
    "chernoff-suite": "lower-tail exponential bounds: optimizer vs closed form vs tilted-IS estimates",
    "consistency-scan": "detectability scan: mass/purity profiles and the |log beta| slope diagnostic",
    "kernel-vs-quadratic": "kernel test: spectral/quadratic equivalence and variance-constant routes",
    "counterexample": "undetectable-family builder: growing tail levels and decaying weighted SNR",
}


def _describe_plan(doc: dict) -> str:
    lines = [f"experiment: {doc['experiment']}", f"plan: {_PLAN_NOTES[doc['experiment']]}"]
    for key in ("eps_grid", "epsilon", "alpha", "x_policy", "rate", "scheme", "kernel", "family", "mc"):
        if key in doc:
            lines.append(f"{key}: {json.dumps(doc[key])}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def run(config_path: str, out_dir: str | None = None, seed: int | None = None, threads: int = 1,
        emit_gnuplot: bool = False) -> int:
    try:
        doc = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if seed is None:
        env = os.environ.get("LDSIGNAL_SEED")
        seed = int(env) if env is not None else int(doc["seed"])
    out = Path(out_dir if out_dir is not None else doc.get("out", "."))
    try:
        out.mkdir(parents=True, exist_ok=True)
        results, preds, report = _PIPELINES[doc["experiment"]](doc, seed, threads)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LDSignalError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    (out / "results.csv").write_text("\n".join([CSV_HEADER] + results) + "\n")
    (out / "predictions.csv").write_text("\n".join([PRED_HEADER] + preds) + "\n")
    doc_report = {
        "experiment": doc["experiment"],
        "seed": seed,
        "report": report,
        "metadata": {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()},
    }
    (out / "report.json").write_text(json.dumps(doc_report, indent=2, default=float) + "\n")
    if emit_gnuplot:
        (out / "plot.gp").write_text(_GNUPLOT_TEMPLATE)
    print(f"wrote {out / 'results.csv'}, {out / 'predictions.csv'}, {out / 'report.json'}")
    return 0


_GNUPLOT_TEMPLATE = """# plot the Monte Carlo estimates in results.csv against epsilon
set datafile separator ','
set logscale x
set xlabel 'epsilon'
set ylabel 'p_hat'
plot 'results.csv' using 2:5 every ::1 with linespoints title 'estimate'
"""


def validate(config_path: str) -> int:
    try:
        doc = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(_describe_plan(doc))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ldsignal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")
    p_run.add_argument("--threads", type=int, default=1, help="worker cap for the replication loop")
    p_run.add_argument("--seed", type=int, default=None, help="override config and environment seed")
    p_run.add_argument("--emit-gnuplot", action="store_true", help="write a plot script next to the CSVs")
    p_val = sub.add_parser("validate", help="check a config and print the plan")
    p_val.add_argument("config")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out, args.seed, args.threads, args.emit_gnuplot)
    return validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
