"""Experiment config parsing: a small sectioned key-value grammar.

The format is line oriented. `[section]` opens a section (dotted names nest
one level: `[observable.g]`), `key = value` assigns inside the current
section, `#` starts a comment, blank lines separate. Values are parsed as
JSON when possible (numbers, lists, booleans, quoted strings) and fall back
to bare strings, so `theta = [1, 2]`, `n = 10000`, and `name = doubling`
all read naturally. Validation is strict and total: every unknown section,
unknown key, missing requirement, and out-of-range value is reported with
its line number, and seeds are never defaulted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

KINDS = (
    "simulate",
    "correlations",
    "clt",
    "asclt",
    "deviation",
    "chaos-cert",
    "mixing-class",
    "model-check",
    "ktheory",
)

SYSTEM_NAMES = (
    "doubling",
    "rotation",
    "intermittent",
    "toral",
    "dyadic",
    "full-shift",
    "sft",
)

OBSERVABLE_KINDS = (
    "coordinate",
    "cos",
    "sin",
    "torus-cos",
    "torus-coordinate",
    "cylinder",
    "indicator",
)

_SYSTEM_KEYS = {
    "doubling": set(),
    "rotation": {"theta"},
    "intermittent": {"alpha"},
    "toral": {"matrix"},
    "dyadic": {"rank"},
    "full-shift": {"symbols", "probs", "window"},
    "sft": {"transitions", "weights", "window"},
}

_OBSERVABLE_KEYS = {"kind", "harmonic", "axis", "word", "symbols", "a", "b", "offset"}

_PARAM_KEYS = {
    "simulate": {"size", "diagnostic_eps"},
    "correlations": {"samples", "lags", "fit_window"},
    "clt": {"n", "trials", "normalization", "reference_sigma2", "ks_threshold"},
    "asclt": {"n", "reference_sigma2"},
    "deviation": {"eps", "ns", "trials"},
    "chaos-cert": {
        "eps",
        "horizon",
        "max_period",
        "probe_eps",
        "trials",
        "sensitivity_horizon",
    },
    "mixing-class": {"lags", "trials", "cells", "settle", "product_check"},
    "model-check": {"stages", "start", "K", "knots", "budget_lip"},
    "ktheory": set(),
}

_KTHEORY_KEYS = {"k0", "k1", "alpha0", "alpha1"}

_NEEDS_SYSTEM = (
    "simulate",
    "correlations",
    "clt",
    "asclt",
    "deviation",
    "chaos-cert",
    "mixing-class",
)

_NEEDS_OBSERVABLE = ("correlations", "clt", "asclt", "deviation")

_SPACE_OBSERVABLES = {
    "circle": {"coordinate", "cos", "sin", "indicator"},
    "torus": {"torus-cos", "torus-coordinate"},
    "symbolic": {"cylinder"},
}


class ConfigError(Exception):
    """Carries every validation problem as (line, message) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"line {ln}: {msg}" for ln, msg in self.errors)
        super().__init__(lines)


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    system: dict = field(default_factory=dict)
    observables: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)
    ktheory: dict = field(default_factory=dict)


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def _tokenize(text: str):
    """Yield (line_number, section, key, value) plus section headers."""
    sections = {}
    order = {}
    current = None
    errors = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append((ln, "unterminated section header"))
                current = None
                continue
            name = line[1:-1].strip()
            parts = name.split(".")
            if not name or any(not p for p in parts) or len(parts) > 2:
                errors.append((ln, f"bad section name {name!r}"))
                current = None
                continue
            if name in sections:
                errors.append((ln, f"duplicate section [{name}]"))
            sections.setdefault(name, {})
            order.setdefault(name, ln)
            current = name
            continue
        if "=" not in line:
            errors.append((ln, f"expected key = value, got {line!r}"))
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            errors.append((ln, "empty key"))
            continue
        if current is None:
            errors.append((ln, f"key {key!r} appears before any [section]"))
            continue
        if key in sections[current]:
            errors.append((ln, f"duplicate key {key!r} in [{current}]"))
            continue
        sections[current][key] = (ln, _parse_value(val))
    return sections, order, errors


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool))


def _check_system(sys_block: dict, header_line: int, errors: list) -> dict:
    out = {}
    items = {k: v for k, v in sys_block.items()}
    if "name" not in items:
        errors.append((header_line, "system block needs a `name` key"))
        return out
    ln, name = items.pop("name")
    if name not in SYSTEM_NAMES:
        errors.append((ln, f"unknown system {name!r}; see --list-systems"))
        return out
    out["name"] = name
    allowed = _SYSTEM_KEYS[name]
    for key, (kln, val) in items.items():
        if key not in allowed:
            errors.append((kln, f"unknown key {key!r} for system {name!r}"))
            continue
        out[key] = val
    if name == "intermittent":
        if "alpha" not in out:
            errors.append((header_line, "intermittent system needs `alpha`"))
        else:
            a = out["alpha"]
            if not _is_num(a) or not (0.0 < float(a) < 1.0):
                aln = items["alpha"][0]
                errors.append(
                    (aln, f"alpha must lie in the open interval (0, 1), got {a!r}")
                )
    if name == "rotation" and "theta" in out:
        th = out["theta"]
        ok = _is_num(th) or (
            isinstance(th, list)
            and len(th) == 2
            and all(_is_int(v) for v in th)
            and th[1] != 0
        )
        if not ok:
            errors.append(
                (items["theta"][0], "theta must be a number or [numerator, denominator]")
            )
    if name == "dyadic":
        if "rank" not in out:
            errors.append((header_line, "dyadic system needs `rank`"))
        elif not _is_int(out["rank"]) or not (1 <= out["rank"] <= 50):
            errors.append((items["rank"][0], "rank must be an integer in [1, 50]"))
    if name == "sft" and "transitions" not in out:
        errors.append((header_line, "sft system needs `transitions`"))
    return out


def _check_observable(block: dict, header_line: int, errors: list, space=None) -> dict:
    out = {}
    items = dict(block)
    if "kind" not in items:
        errors.append((header_line, "observable block needs a `kind` key"))
        return out
    ln, kind = items.pop("kind")
    if kind not in OBSERVABLE_KINDS:
        errors.append((ln, f"unknown observable kind {kind!r}"))
        return out
    out["kind"] = kind
    for key, (kln, val) in items.items():
        if key not in _OBSERVABLE_KEYS:
            errors.append((kln, f"unknown observable key {key!r}"))
            continue
        out[key] = val
    if space is not None and kind not in _SPACE_OBSERVABLES.get(space, set()):
        errors.append(
            (ln, f"observable {kind!r} does not act on the {space} phase space")
        )
    if "harmonic" in out and (not _is_int(out["harmonic"]) or out["harmonic"] < 1):
        errors.append((items["harmonic"][0], "harmonic must be a positive integer"))
    if "axis" in out and out["axis"] not in (0, 1):
        errors.append((items["axis"][0], "axis must be 0 or 1"))
    if kind == "cylinder":
        if "word" not in out:
            errors.append((header_line, "cylinder observable needs `word`"))
        elif not (
            isinstance(out["word"], list)
            and out["word"]
            and all(_is_int(s) and s >= 0 for s in out["word"])
        ):
            errors.append((items["word"][0], "word must be a list of symbols"))
    if kind == "indicator":
        for edge in ("a", "b"):
            if edge not in out or not _is_num(out[edge]):
                errors.append((header_line, f"indicator needs numeric `{edge}`"))
    return out


def _system_space(system: dict) -> str | None:
    name = system.get("name")
    if name in ("doubling", "rotation", "intermittent", "dyadic"):
        return "circle"
    if name == "toral":
        return "torus"
    if name in ("full-shift", "sft"):
        return "symbolic"
    return None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises ConfigError listing every problem."""
    sections, order, errors = _tokenize(text)

    if "experiment" not in sections:
        errors.append((1, "missing [experiment] section"))
        raise ConfigError(errors)
    exp_line = order["experiment"]
    exp = sections["experiment"]
    for key, (ln, _) in exp.items():
        if key not in ("kind", "seed"):
            errors.append((ln, f"unknown key {key!r} in [experiment]"))

    kind = None
    if "kind" not in exp:
        errors.append((exp_line, "missing `kind` in [experiment]"))
    else:
        ln, kind = exp["kind"]
        if kind not in KINDS:
            errors.append((ln, f"unknown experiment kind {kind!r}"))
            kind = None

    seed = None
    if "seed" not in exp:
        errors.append(
            (exp_line, "missing `seed` in [experiment]; seeds must be explicit")
        )
    else:
        ln, seed = exp["seed"]
        if not _is_int(seed) or seed < 0:
            errors.append((ln, "seed must be a nonnegative integer"))
            seed = None

    known_sections = {"experiment", "system", "observable", "observable.g", "params", "expect", "ktheory"}
    for name, ln in order.items():
        if name not in known_sections:
            errors.append((ln, f"unknown section [{name}]"))

    system = {}
    if "system" in sections:
        if kind is not None and kind not in _NEEDS_SYSTEM:
            errors.append(
                (order["system"], f"[system] is not used by kind {kind!r}")
            )
        else:
            system = _check_system(sections["system"], order["system"], errors)
    elif kind in _NEEDS_SYSTEM:
        errors.append((exp_line, f"kind {kind!r} requires a [system] section"))

    space = _system_space(system)
    observables = {}
    for sec, tag in (("observable", "f"), ("observable.g", "g")):
        if sec not in sections:
            continue
        if kind is not None and kind not in _NEEDS_OBSERVABLE:
            errors.append((order[sec], f"[{sec}] is not used by kind {kind!r}"))
            continue
        if tag == "g" and kind != "correlations":
            errors.append(
                (order[sec], "[observable.g] only applies to correlations")
            )
            continue
        observables[tag] = _check_observable(
            sections[sec], order[sec], errors, space=space
        )
    if kind in _NEEDS_OBSERVABLE and "f" not in observables:
        errors.append((exp_line, f"kind {kind!r} requires an [observable] section"))

    params = {}
    if "params" in sections:
        allowed = _PARAM_KEYS.get(kind, set()) if kind else set()
        if kind == "ktheory":
            errors.append((order["params"], "[params] is not used by kind 'ktheory'"))
        else:
            for key, (ln, val) in sections["params"].items():
                if kind is not None and key not in allowed:
                    errors.append((ln, f"unknown param {key!r} for kind {kind!r}"))
                    continue
                params[key] = val
    _check_params(kind, params, sections.get("params", {}), exp_line, errors)

    ktheory = {}
    if kind == "ktheory":
        if "ktheory" not in sections:
            errors.append((exp_line, "kind 'ktheory' requires a [ktheory] section"))
        else:
            for key, (ln, val) in sections["ktheory"].items():
                if key not in _KTHEORY_KEYS:
                    errors.append((ln, f"unknown key {key!r} in [ktheory]"))
                    continue
                ktheory[key] = val
            kln = order["ktheory"]
            for req in ("k0", "k1"):
                if req not in ktheory:
                    errors.append((kln, f"[ktheory] needs `{req}`"))
    elif "ktheory" in sections:
        errors.append((order["ktheory"], "[ktheory] is only used by kind 'ktheory'"))

    expect = {}
    if "expect" in sections:
        for key, (ln, val) in sections["expect"].items():
            expect[key] = val

    if errors:
        raise ConfigError(sorted(errors))
    return ExperimentConfig(
        kind=kind,
        seed=seed,
        system=system,
        observables=observables,
        params=params,
        expect=expect,
        ktheory=ktheory,
    )


def _check_params(kind, params, raw, exp_line, errors):
    def line_of(key):
        return raw[key][0] if key in raw else exp_line

    def need_posint(key):
        if key in params and (not _is_int(params[key]) or params[key] < 1):
            errors.append((line_of(key), f"{key} must be a positive integer"))

    def need_posnum(key):
        if key in params and (not _is_num(params[key]) or params[key] <= 0):
            errors.append((line_of(key), f"{key} must be a positive number"))

    for key in ("n", "trials", "lags", "samples", "size", "horizon", "max_period",
                "sensitivity_horizon", "cells", "settle", "stages", "knots"):
        need_posint(key)
    for key in ("eps", "probe_eps", "reference_sigma2", "ks_threshold",
                "diagnostic_eps", "budget_lip"):
        need_posnum(key)
    if kind == "deviation":
        if "eps" not in params:
            errors.append((exp_line, "deviation experiments need params.eps"))
        if "ns" not in params:
            errors.append((exp_line, "deviation experiments need params.ns"))
        elif not (
            isinstance(params["ns"], list)
            and params["ns"]
            and all(_is_int(v) and v > 0 for v in params["ns"])
        ):
            errors.append((line_of("ns"), "ns must be a list of positive integers"))
    if "start" in params:
        v = params["start"]
        if not (
            isinstance(v, list) and len(v) == 2 and all(_is_int(x) and x > 0 for x in v)
        ):
            errors.append((line_of("start"), "start must be [p, q] positive integers"))
    if "K" in params:
        v = params["K"]
        ok = (_is_num(v) and v > 0) or (
            isinstance(v, list) and v and all(_is_num(x) and x > 0 for x in v)
        )
        if not ok:
            errors.append((line_of("K"), "K must be a positive number or list"))
    if "normalization" in params and params["normalization"] not in (
        "sqrt_n",
        "sqrt_n_log_n",
    ):
        errors.append(
            (line_of("normalization"), "normalization must be sqrt_n or sqrt_n_log_n")
        )
    if "product_check" in params and not isinstance(params["product_check"], bool):
        errors.append((line_of("product_check"), "product_check must be true or false"))
