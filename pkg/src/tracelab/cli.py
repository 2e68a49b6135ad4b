"""Command line driver: run configured experiments, write reproducible reports.

`tracelab run config.ini` executes one experiment and writes three files
into the output directory: report.json (every estimate and verdict, keys
sorted), series.csv (two plot columns, header row, '.' decimal and ','
separator), and manifest.json (config hash, seed, package version, and a
sha256 for each output). Outputs are deterministic bytes for a fixed
config: reruns and different --threads values produce identical files.

Exit codes: 0 when the experiment ran and passed its criteria, 1 when it
ran and failed them, 2 when the config is invalid or execution errored.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys as _sysmod
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import chaos as _chaos
from . import dimdrop as _dimdrop
from . import ktheory as _ktheory
from . import observables as _obs
from . import stats as _stats
from . import systems as _systems
from .config import KINDS, ConfigError, ExperimentConfig, parse_config

try:
    from importlib.metadata import version as _pkg_version

    VERSION = _pkg_version("artifact")
except Exception:
    VERSION = "0.1.0"


_SYSTEM_HELP = (
    ("doubling", "angle doubling t -> 2t mod 1 on the circle"),
    ("rotation", "circle rotation by theta (exact for rational theta)"),
    ("intermittent", "Pomeau-Manneville style map with a neutral fixed point, alpha in (0, 1)"),
    ("toral", "hyperbolic automorphism of the 2-torus, default matrix ((2,1),(1,1))"),
    ("dyadic", "interval exchange permuting 2^rank dyadic cells (periodic)"),
    ("full-shift", "full shift on `symbols` letters with product measure"),
    ("sft", "subshift of finite type from a 0-1 transition matrix"),
)


def build_system(spec: dict) -> _systems.SystemSpec:
    """Instantiate a dynamical system from a validated config block."""
    name = spec["name"]
    if name == "doubling":
        return _systems.doubling()
    if name == "rotation":
        theta = spec.get("theta", [1, 2])
        if isinstance(theta, list):
            theta = Fraction(theta[0], theta[1])
        return _systems.rotation(theta)
    if name == "intermittent":
        return _systems.intermittent(float(spec["alpha"]))
    if name == "toral":
        matrix = spec.get("matrix", [[2, 1], [1, 1]])
        return _systems.toral(tuple(tuple(int(v) for v in row) for row in matrix))
    if name == "dyadic":
        return _systems.dyadic_permutation(int(spec["rank"]))
    if name == "full-shift":
        return _systems.full_shift(
            symbols=int(spec.get("symbols", 2)),
            probs=spec.get("probs"),
            window=int(spec.get("window", 64)),
        )
    if name == "sft":
        return _systems.subshift(
            spec["transitions"],
            weights=spec.get("weights"),
            window=int(spec.get("window", 64)),
        )
    raise ValueError(f"unknown system {name!r}")


def build_observable(spec: dict) -> _obs.Observable:
    kind = spec["kind"]
    if kind == "coordinate":
        f = _obs.coordinate()
    elif kind == "cos":
        f = _obs.cos_angle(int(spec.get("harmonic", 1)))
    elif kind == "sin":
        f = _obs.sin_angle(int(spec.get("harmonic", 1)))
    elif kind == "torus-coordinate":
        f = _obs.torus_coordinate(int(spec.get("axis", 0)))
    elif kind == "torus-cos":
        f = _obs.torus_cos(int(spec.get("axis", 0)), int(spec.get("harmonic", 1)))
    elif kind == "cylinder":
        f = _obs.cylinder_indicator(
            [int(s) for s in spec["word"]], symbols=int(spec.get("symbols", 2))
        )
    elif kind == "indicator":
        f = _obs.interval_indicator(float(spec["a"]), float(spec["b"]))
    else:
        raise ValueError(f"unknown observable kind {kind!r}")
    if "offset" in spec:
        f = _obs.shifted(f, float(spec["offset"]))
    return f


def _jsonify(obj):
    """Recursively coerce report values into canonical JSON types."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    return obj if obj is None or isinstance(obj, str) else str(obj)


def _dump_json(obj) -> str:
    return json.dumps(_jsonify(obj), sort_keys=True, indent=2) + "\n"


def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _flatten(report: dict, prefix: str = "") -> dict:
    flat = {}
    for key, val in report.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            flat.update(_flatten(val, name + "."))
        else:
            flat[name] = val
    return flat


def _check_expectations(report: dict, expect: dict):
    """Compare [expect] entries against flattened report fields.

    A scalar expectation must match exactly (floats via ==); a two-element
    list [value, tol] passes when the field is within tol of value.
    """
    flat = _flatten(report)
    results = []
    for key, want in expect.items():
        entry = {"key": key, "want": want}
        if key not in flat:
            entry.update(got=None, ok=False)
            results.append(entry)
            continue
        got = flat[key]
        if (
            isinstance(want, list)
            and len(want) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in want)
        ):
            ok = (
                isinstance(got, (int, float))
                and not isinstance(got, bool)
                and abs(float(got) - float(want[0])) <= float(want[1])
            )
        elif isinstance(want, bool) or isinstance(got, bool):
            ok = bool(want) == bool(got) and isinstance(want, bool)
        elif isinstance(want, (int, float)) and isinstance(got, (int, float)):
            ok = float(want) == float(got)
        else:
            ok = str(want) == str(got)
        entry.update(got=_jsonify(got), ok=bool(ok))
        results.append(entry)
    return results


def _run_simulate(cfg, threads):
    sys = build_system(cfg.system)
    size = int(cfg.params.get("size", 4096))
    mu = _systems.sample_invariant(sys, size, seed=cfg.seed)
    pts = mu.points
    if sys.space == "circle":
        vals = np.asarray(pts, dtype=float)
        rows = [(i, v) for i, v in enumerate(vals)]
        header = ("index", "value")
        summary = {"coordinate_mean": float(vals.mean()), "coordinate_var": float(vals.var())}
    elif sys.space == "torus":
        vals = np.asarray(pts, dtype=float)
        rows = [(i, v) for i, v in enumerate(vals[:, 0])]
        header = ("index", "value")
        summary = {
            "axis0_mean": float(vals[:, 0].mean()),
            "axis1_mean": float(vals[:, 1].mean()),
        }
        summary["coordinate_mean"] = summary["axis0_mean"]
    else:
        first = np.array([p.word[0] for p in mu.point_list()], dtype=float)
        rows = [(i, v) for i, v in enumerate(first)]
        header = ("index", "first_symbol")
        summary = {"first_symbol_mean": float(first.mean())}
    report = {
        "kind": "simulate",
        "system": cfg.system["name"],
        "space": sys.space,
        "size": size,
        "seed": cfg.seed,
    }
    report.update(summary)
    return report, header, rows, True


def _run_correlations(cfg, threads):
    sys = build_system(cfg.system)
    f = build_observable(cfg.observables["f"])
    g = build_observable(cfg.observables["g"]) if "g" in cfg.observables else f
    samples = int(cfg.params.get("samples", 20000))
    lags = int(cfg.params.get("lags", 64))
    mu = _systems.sample_invariant(sys, samples, seed=cfg.seed)
    series = _stats.correlation_series(
        f, g, sys, mu, lags=lags, seed=cfg.seed, threads=threads
    )
    fit = _stats.edc_fit(series, window=cfg.params.get("fit_window"))
    report = {
        "kind": "correlations",
        "seed": cfg.seed,
        "series": series.to_dict(),
        "fit": fit.to_dict(),
    }
    rows = [(int(k), float(v)) for k, v in zip(series.lags, series.values)]
    return report, ("lag", "value"), rows, True


def _run_clt(cfg, threads):
    sys = build_system(cfg.system)
    f = build_observable(cfg.observables["f"])
    rep = _stats.clt_test(
        f,
        sys,
        None,
        n=int(cfg.params.get("n", 10000)),
        trials=int(cfg.params.get("trials", 10000)),
        normalization=cfg.params.get("normalization", "sqrt_n"),
        reference_sigma2=cfg.params.get("reference_sigma2"),
        ks_threshold=float(cfg.params.get("ks_threshold", 0.05)),
        seed=cfg.seed,
        threads=threads,
    )
    report = rep.to_dict()
    samples = np.sort(np.asarray(rep.samples, dtype=float))
    step = max(1, samples.size // 512)
    rows = [
        (float(s), float((i + 1) / samples.size))
        for i, s in enumerate(samples)
        if i % step == 0
    ]
    return report, ("value", "ecdf"), rows, bool(rep.gaussian_pass)


def _run_asclt(cfg, threads):
    sys = build_system(cfg.system)
    f = build_observable(cfg.observables["f"])
    rep = _stats.asclt_test(
        f,
        sys,
        n=int(cfg.params.get("n", 100000)),
        seed=cfg.seed,
        reference_sigma2=cfg.params.get("reference_sigma2"),
    )
    report = rep.to_dict()
    threshold = float(cfg.params.get("ks_threshold", 0.1))
    report["ks_threshold"] = threshold
    passed = bool(rep.ks <= threshold)
    report["gaussian_pass"] = passed
    rows = [(int(rep.n), float(rep.ks))]
    return report, ("n", "weighted_ks"), rows, passed


def _run_deviation(cfg, threads):
    sys = build_system(cfg.system)
    f = build_observable(cfg.observables["f"])
    rep = _stats.deviation_profile(
        f,
        sys,
        None,
        eps=float(cfg.params["eps"]),
        ns=[int(v) for v in cfg.params["ns"]],
        trials=int(cfg.params.get("trials", 20000)),
        seed=cfg.seed,
        threads=threads,
    )
    report = rep.to_dict()
    rows = [(int(n), float(p)) for n, p in zip(rep.ns, rep.probs)]
    return report, ("n", "probability"), rows, bool(rep.exponential)


def _run_chaos_cert(cfg, threads):
    sys = build_system(cfg.system)
    cert = _chaos.chaos_certificate(
        sys,
        eps=float(cfg.params.get("eps", 1 / 16)),
        horizon=int(cfg.params.get("horizon", 4096)),
        max_period=int(cfg.params.get("max_period", 10)),
        probe_eps=float(cfg.params.get("probe_eps", 1e-6)),
        trials=int(cfg.params.get("trials", 1000)),
        sensitivity_horizon=int(cfg.params.get("sensitivity_horizon", 40)),
        seed=cfg.seed,
    )
    report = cert.to_dict()
    rows = [
        ("transitive", 1.0 if cert.transitivity.ok else 0.0),
        ("periodic_density", 1.0 if cert.periodic_density.ok else 0.0),
        ("sensitivity_delta", float(cert.sensitivity.delta_hat)),
        ("chaotic", 1.0 if cert.chaotic else 0.0),
    ]
    return report, ("check", "value"), rows, bool(cert.chaotic)


def _run_mixing(cfg, threads):
    sys = build_system(cfg.system)
    rep = _stats.mixing_classifier(
        sys,
        None,
        lags=int(cfg.params.get("lags", 610)),
        trials=int(cfg.params.get("trials", 20000)),
        cells=int(cfg.params.get("cells", 8)),
        settle=int(cfg.params.get("settle", 8)),
        seed=cfg.seed,
        threads=threads,
        product_check=bool(cfg.params.get("product_check", False)),
    )
    report = rep.to_dict()
    rows = [(k, float(v)) for k, v in sorted(rep.statistics.items())]
    return report, ("statistic", "value"), rows, True


def _run_model_check(cfg, threads):
    table = _dimdrop.generate_parameters(
        int(cfg.params.get("stages", 2)),
        start=tuple(cfg.params.get("start", [2, 3])),
        K=cfg.params.get("K", 1.0),
    )
    budget = _dimdrop.lipschitz_budget(table)
    conn = _dimdrop.demo_connecting_map()
    boundary = _dimdrop.boundary_check(conn, seed=cfg.seed)
    report = {
        "kind": "model-check",
        "seed": cfg.seed,
        "stages": [s.as_dict() for s in table],
        "budget": budget,
        "boundary": boundary,
    }
    rows = [(s.index, float(s.ratio)) for s in table]
    passed = bool(budget["ok"]) and bool(boundary["ok"])
    return report, ("stage", "identity_ratio"), rows, passed


def _build_group_hom(spec, group):
    if spec is None or spec == "identity":
        return _ktheory.GroupHom.identity(group)
    if spec == "zero":
        return _ktheory.GroupHom.zero(group, group)
    return _ktheory.GroupHom(group, group, spec)


def _run_ktheory(cfg, threads):
    k0 = _ktheory.FGAbelianGroup.from_string(str(cfg.ktheory["k0"]))
    k1 = _ktheory.FGAbelianGroup.from_string(str(cfg.ktheory["k1"]))
    a0 = _build_group_hom(cfg.ktheory.get("alpha0"), k0)
    a1 = _build_group_hom(cfg.ktheory.get("alpha1"), k1)
    result = _ktheory.pv_crossed_kgroups(k0, k1, a0, a1)
    report = {"kind": "ktheory", "seed": cfg.seed, "result": result.to_dict()}
    k0s = str(result.k0) if result.k0 is not None else "extension unresolved"
    k1s = str(result.k1) if result.k1 is not None else "extension unresolved"
    rows = [("K0", k0s), ("K1", k1s)]
    passed = result.k0 is not None and result.k1 is not None
    return report, ("group", "value"), rows, passed, f"K0 = {k0s}, K1 = {k1s}"


_RUNNERS = {
    "simulate": _run_simulate,
    "correlations": _run_correlations,
    "clt": _run_clt,
    "asclt": _run_asclt,
    "deviation": _run_deviation,
    "chaos-cert": _run_chaos_cert,
    "mixing-class": _run_mixing,
    "model-check": _run_model_check,
    "ktheory": _run_ktheory,
}


def run_experiment(config_text: str, out_dir, threads: int = 1) -> int:
    """Execute one configured experiment and write its three output files."""
    try:
        cfg = parse_config(config_text)
    except ConfigError as err:
        for ln, msg in err.errors:
            print(f"line {ln}: {msg}", file=_sysmod.stderr)
        return 2

    config_sha = hashlib.sha256(config_text.encode("utf-8")).hexdigest()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    try:
        result = _RUNNERS[cfg.kind](cfg, threads)
    except Exception as err:  # noqa: BLE001 - any failure is an execution error
        print(f"execution error: {err}", file=_sysmod.stderr)
        return 2

    extra_stdout = None
    if len(result) == 5:
        report, header, rows, passed, extra_stdout = result
    else:
        report, header, rows, passed = result

    expectations = _check_expectations(report, cfg.expect)
    passed = bool(passed) and all(e["ok"] for e in expectations)

    envelope = {
        "config_sha256": config_sha,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "version": VERSION,
        "passed": passed,
        "expectations": expectations,
        "report": report,
    }
    report_text = _dump_json(envelope)
    series_text = _csv_text(header, rows)
    (out / "report.json").write_text(report_text, encoding="utf-8")
    (out / "series.csv").write_text(series_text, encoding="utf-8")

    manifest = {
        "config_sha256": config_sha,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "version": VERSION,
        "outputs": {
            "report.json": hashlib.sha256(report_text.encode("utf-8")).hexdigest(),
            "series.csv": hashlib.sha256(series_text.encode("utf-8")).hexdigest(),
        },
    }
    (out / "manifest.json").write_text(_dump_json(manifest), encoding="utf-8")

    if extra_stdout:
        print(extra_stdout)
    print(f"{cfg.kind}: {'PASS' if passed else 'FAIL'}")
    return 0 if passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tracelab",
        description="Run measure-preserving dynamics experiments from a config file.",
    )
    parser.add_argument(
        "--list-systems", action="store_true", help="list available systems and exit"
    )
    sub = parser.add_subparsers(dest="command")
    runp = sub.add_parser("run", help="run one experiment from a config file")
    runp.add_argument("config", help="path to the experiment config")
    runp.add_argument("--out", default="out", help="output directory (default: out)")
    runp.add_argument(
        "--threads", type=int, default=1, help="worker threads for internal sampling"
    )
    runp.add_argument(
        "--validate-only",
        action="store_true",
        help="parse and validate the config, run nothing",
    )
    args = parser.parse_args(argv)

    if args.list_systems:
        for name, text in _SYSTEM_HELP:
            print(f"{name}: {text}")
        return 0
    if args.command != "run":
        parser.print_help()
        return 2

    try:
        config_text = Path(args.config).read_text(encoding="utf-8")
    except OSError as err:
        print(f"cannot read config: {err}", file=_sysmod.stderr)
        return 2

    if args.validate_only:
        try:
            cfg = parse_config(config_text)
        except ConfigError as err:
            for ln, msg in err.errors:
                print(f"line {ln}: {msg}", file=_sysmod.stderr)
            return 2
        print(f"config OK: kind={cfg.kind} seed={cfg.seed}")
        return 0

    return run_experiment(config_text, args.out, threads=args.threads)


if __name__ == "__main__":
    raise SystemExit(main())
