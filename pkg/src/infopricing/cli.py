"""Command-line batch runner: ``infopricing run config.json [--seed N] [--workers N] [--out PATH]``.

A job config is one JSON document (see docs/config_schema.md). Single
prices are written as JSON, spread experiments as CSV with a ``.meta.json``
sidecar. Exit codes: 0 success, 2 config error, 3 numerics or pricing error.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import re
import sys
from importlib import metadata

import jsonschema
import numpy as np

from .bonds import BondSpec, MarketRecovery, NoRecovery, defaultable_price, exponential_recovery, sovereign_price
from .credit_sensitive import credit_sensitive_bond_price, debt_sensitive_kernel
from .derivatives import CouponBondSpec, HybridSpec, OptionSpec, call_price, coupon_bond_price, \
    coupon_bond_with_recovery_price, hybrid_ilcr_price
from .errors import ConstructionError, DomainError, InfoPricingError, StateError
from .factors import ContinuousFactor, DiscreteFactor, InfoProcessSpec, MarketState
from .kernels import CATALOGUE, catalogue_kernel, check_supermartingale, sample_triples
from .numerics import QuadratureRule, RandomStream
from . import oracle

JOB_KINDS = ("price_sovereign", "price_defaultable", "price_option", "price_coupon", "price_ilcr",
             "price_credit_sensitive", "spread_experiment", "validate_kernel")

# every numeric default lives here; outputs embed the resolved values
DEFAULTS = {
    "seed": 0,
    "numerics": {"hermite_nodes": 64, "ad_rel_tol": 1e-10},
    "mc": {"paths": 100_000, "antithetic": True, "block_size": 10_000},
    "spread_experiment": {"T": 2.0, "p0": 0.2, "sigmas": [0.04, 0.2, 1.0, 5.0], "condition": "no_default",
                          "paths": 200, "steps": 500, "cap": 10.0, "antithetic": True},
    "validate_kernel": {"triples": 1000, "tolerance": 1e-8},
    "recovery": {"kind": "none"},
}

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

_KERNEL = {
    "type": "object",
    "required": ["name"],
    "additionalProperties": False,
    "properties": {
        "name": {"enum": sorted(CATALOGUE) + ["product"]},
        "params": {"type": "object"},
    },
}

_CREDIT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["flow_rate"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "survival": {"type": "number", "minimum": 0, "maximum": 1},
        "values": {"type": "array", "items": _NUM, "minItems": 1},
        "priors": {"type": "array", "items": _NONNEG, "minItems": 1},
        "flow_rate": _NONNEG,
    },
    "oneOf": [{"required": ["survival"]}, {"required": ["values", "priors"]}],
}

_RECOVERY = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["none", "exponential", "constant"]},
        "value": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

_PRIOR = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["exponential", "lognormal", "uniform", "beta", "tabulated"]},
        "params": {"type": "object"},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["job"],
    "properties": {
        "job": {"enum": list(JOB_KINDS)},
        "kernel": _KERNEL,
        "state": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t"],
            "properties": {"t": _NONNEG, "observations": {"type": "object", "additionalProperties": _NUM}},
        },
        "instrument": {"type": "object"},
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"hermite_nodes": {"type": "integer", "minimum": 2, "maximum": 512},
                           "ad_rel_tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-2}},
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"paths": {"type": "integer", "minimum": 100},
                           "antithetic": {"type": "boolean"},
                           "block_size": {"type": "integer", "minimum": 2, "multipleOf": 2}},
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "output": {"type": "string"},
    },
    "allOf": [
        {"if": {"properties": {"job": {"not": {"enum": ["spread_experiment"]}}}},
         "then": {"required": ["kernel"]}},
        {"if": {"properties": {"job": {"enum": ["price_sovereign", "price_defaultable", "price_option",
                                                "price_coupon", "price_ilcr", "price_credit_sensitive"]}}},
         "then": {"required": ["state", "instrument"]}},
    ],
}

INSTRUMENT_SCHEMAS = {
    "price_sovereign": {
        "type": "object", "additionalProperties": False, "required": ["maturity"],
        "properties": {"maturity": _POS, "macro_horizon": _POS},
    },
    "price_defaultable": {
        "type": "object", "additionalProperties": False, "required": ["maturity", "credit"],
        "properties": {"maturity": _POS, "credit": _CREDIT, "recovery": _RECOVERY, "macro_horizon": _POS},
    },
    "price_option": {
        "type": "object", "additionalProperties": False, "required": ["expiry", "strike", "bond"],
        "properties": {
            "expiry": _POS, "strike": _NONNEG,
            "bond": {"type": "object", "additionalProperties": False, "required": ["maturity", "credit"],
                     "properties": {"maturity": _POS, "credit": _CREDIT, "macro_horizon": _POS}},
        },
    },
    "price_coupon": {
        "type": "object", "additionalProperties": False,
        "required": ["dates", "coupon", "principal", "credits"],
        "properties": {
            "dates": {"type": "array", "items": _POS, "minItems": 1},
            "coupon": _NONNEG, "principal": _POS,
            "credits": {"type": "array", "items": _CREDIT, "minItems": 1},
            "recovery": _RECOVERY, "macro_horizon": _POS,
        },
    },
    "price_ilcr": {
        "type": "object", "additionalProperties": False, "required": ["maturity", "credit"],
        "properties": {"maturity": _POS, "credit": _CREDIT, "real": _KERNEL},
    },
    "price_credit_sensitive": {
        "type": "object", "additionalProperties": False,
        "required": ["maturity", "activity_rate", "debt_horizon", "prior"],
        "properties": {"maturity": _POS, "activity_rate": _POS, "debt_horizon": _POS, "prior": _PRIOR,
                       "kappa": _NONNEG, "rho": _NUM},
    },
    "spread_experiment": {
        "type": "object", "additionalProperties": False,
        "properties": {
            "T": _POS, "p0": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "sigmas": {"type": "array", "items": _NONNEG, "minItems": 1},
            "condition": {"enum": ["no_default", "default"]},
            "paths": {"type": "integer", "minimum": 1}, "steps": {"type": "integer", "minimum": 2},
            "cap": _POS, "antithetic": {"type": "boolean"},
        },
    },
    "validate_kernel": {
        "type": "object", "additionalProperties": False,
        "properties": {"triples": {"type": "integer", "minimum": 1}, "tolerance": _NONNEG},
    },
}

# jobs whose result depends on the random seed
_RANDOM_JOBS = {"spread_experiment", "validate_kernel"}


class ConfigError(Exception):
    """Config does not parse or does not satisfy the schema and module preconditions."""


def tool_version() -> str:
    try:
        return metadata.version("infopricing")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _locate(text: str, path) -> int | None:
    """Best-effort line number of the JSON field at ``path`` (keys searched in order)."""
    pos, line = 0, None
    for key in path:
        if not isinstance(key, str):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def _schema_error(err: jsonschema.ValidationError, text: str, prefix=()) -> ConfigError:
    path = list(prefix) + list(err.absolute_path)
    field = ".".join(str(p) for p in path) or "<root>"
    line = _locate(text, path)
    where = f"line {line}, " if line else ""
    return ConfigError(f"{where}field {field}: {err.message}")


def load_config(path: str) -> tuple[dict, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validate_config(cfg, text)
    return cfg, text


def validate_config(cfg: dict, text: str = "") -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise _schema_error(errors[0], text)
    inst_schema = INSTRUMENT_SCHEMAS[cfg["job"]]
    inst = cfg.get("instrument", {})
    errors = sorted(jsonschema.Draft202012Validator(inst_schema).iter_errors(inst),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise _schema_error(errors[0], text, ("instrument",))


def resolve(cfg: dict, seed: int | None = None) -> dict:
    """Fill defaults; the result is what gets hashed and echoed in outputs."""
    job = cfg["job"]
    out = {"job": job, "seed": int(cfg.get("seed", DEFAULTS["seed"]) if seed is None else seed)}
    if "kernel" in cfg:
        out["kernel"] = {"name": cfg["kernel"]["name"], "params": cfg["kernel"].get("params", {})}
    if "state" in cfg:
        out["state"] = {"t": float(cfg["state"]["t"]),
                        "observations": dict(cfg["state"].get("observations", {}))}
    out["numerics"] = {**DEFAULTS["numerics"], **cfg.get("numerics", {})}
    inst = copy.deepcopy(cfg.get("instrument", {}))
    if job in ("spread_experiment", "validate_kernel"):
        inst = {**DEFAULTS[job], **inst}
    if job in ("price_defaultable", "price_coupon"):
        inst.setdefault("recovery", dict(DEFAULTS["recovery"]))
    out["instrument"] = inst
    if "mc" in cfg:
        out["mc"] = {**DEFAULTS["mc"], **cfg["mc"]}
    return out


def _canonical(obj):
    # 2 and 2.0 mean the same thing in a config
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, int) and not isinstance(obj, bool):
        return float(obj)
    return obj


def config_hash(resolved: dict) -> str:
    """SHA-256 of the resolved config; the seed only counts for jobs that draw random numbers."""
    semantic = _canonical({k: v for k, v in resolved.items() if k != "seed"})
    if resolved["job"] in _RANDOM_JOBS or "mc" in resolved:
        semantic["seed"] = str(resolved["seed"])
    blob = json.dumps(semantic, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def _kernel(spec: dict):
    params = dict(spec.get("params", {}))
    if spec["name"] == "product":
        factors = params.get("factors")
        if not isinstance(factors, list) or len(factors) != 2:
            raise ConstructionError("product kernel needs params.factors with two kernel specs")
        from .kernels import product_kernel
        return product_kernel(_kernel(factors[0]), _kernel(factors[1]))
    try:
        return catalogue_kernel(spec["name"], **params)
    except TypeError as exc:
        raise ConstructionError(f"bad parameters for kernel {spec['name']!r}: {exc}") from None


def _credit(spec: dict, horizon: float, default_name: str) -> InfoProcessSpec:
    if "survival" in spec:
        factor = DiscreteFactor.digital(spec["survival"])
    else:
        factor = DiscreteFactor(spec["values"], spec["priors"])
    return InfoProcessSpec(spec.get("name", default_name), horizon, factor, flow_rate=spec["flow_rate"])


def _recovery_fn(spec: dict):
    kind = spec["kind"]
    if kind == "none":
        return None
    if kind == "exponential":
        return exponential_recovery
    if "value" not in spec:
        raise ConstructionError("constant recovery needs a value")
    r = float(spec["value"])
    return lambda z: np.full(np.shape(z), r)


def _prior(spec: dict) -> ContinuousFactor:
    build = getattr(ContinuousFactor, spec["kind"])
    try:
        return build(**spec.get("params", {}))
    except TypeError as exc:
        raise ConstructionError(f"bad parameters for prior {spec['kind']!r}: {exc}") from None


def _bond(kernel, inst: dict, recovery=None) -> BondSpec:
    T = inst["maturity"]
    rec = NoRecovery() if recovery is None else MarketRecovery(recovery)
    return BondSpec(T, _credit(inst["credit"], T, "credit"), kernel, rec, macro_horizon=inst.get("macro_horizon"))


def build_job(resolved: dict):
    """Turn a resolved config into ``(price_fn, mc_target, state)``; construction errors are config errors."""
    job, inst = resolved["job"], resolved["instrument"]
    rule = QuadratureRule.hermite(resolved["numerics"]["hermite_nodes"])
    kernel = _kernel(resolved["kernel"]) if "kernel" in resolved else None
    state = None
    if "state" in resolved:
        state = MarketState(resolved["state"]["t"], resolved["state"]["observations"])
    if job == "price_sovereign":
        T = inst["maturity"]
        return (lambda: sovereign_price(kernel, state, T, rule)), oracle.SovereignTarget(kernel, T), state
    if job == "price_defaultable":
        spec = _bond(kernel, inst, _recovery_fn(inst["recovery"]))
        return (lambda: defaultable_price(spec, None, state, rule)), oracle.DefaultableTarget(spec), state
    if job == "price_option":
        opt = OptionSpec(inst["expiry"], inst["strike"], _bond(kernel, inst["bond"]))
        return (lambda: call_price(opt, state, rule)), oracle.OptionTarget(opt), state
    if job == "price_coupon":
        dates = inst["dates"]
        if len(inst["credits"]) != len(dates):
            raise ConstructionError("one credit spec per coupon date")
        credits = [_credit(c, d, f"credit{k + 1}") for k, (c, d) in enumerate(zip(inst["credits"], dates))]
        R = _recovery_fn(inst["recovery"])
        spec = CouponBondSpec(dates, inst["coupon"], inst["principal"], credits, kernel,
                              None if R is None else [R] * len(dates), macro_horizon=inst.get("macro_horizon"))
        if R is None:
            return (lambda: coupon_bond_price(spec, state, rule)), oracle.CouponTarget(spec, False), state
        return (lambda: coupon_bond_with_recovery_price(spec, state, rule)), oracle.CouponTarget(spec), state
    if job == "price_ilcr":
        T = inst["maturity"]
        real = _kernel(inst["real"]) if "real" in inst else kernel
        spec = HybridSpec(T, _credit(inst["credit"], T, "credit"), kernel, real)
        return (lambda: hybrid_ilcr_price(spec, state)), oracle.HybridTarget(spec), state
    if job == "price_credit_sensitive":
        T = inst["maturity"]
        ck = debt_sensitive_kernel(kernel, inst["activity_rate"], inst["debt_horizon"], _prior(inst["prior"]),
                                   kappa=inst.get("kappa", 1.0), rho=inst.get("rho", 0.0))
        inner = QuadratureRule.adaptive(resolved["numerics"]["ad_rel_tol"], abs_tol=1e-300)
        return ((lambda: credit_sensitive_bond_price(ck, state, T, rule, inner_rule=inner)),
                oracle.CreditSensitiveTarget(ck, T), state)
    raise ConfigError(f"job {job!r} is not a pricing job")


def _dump_json(obj, out):
    text = json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _meta(resolved):
    return {"config_hash": config_hash(resolved), "seed": resolved["seed"], "tool_version": tool_version(),
            "resolved": resolved}


def execute(resolved: dict, out: str | None, workers: int, built=None) -> dict:
    """Run a resolved job and write its artifacts; returns the result document."""
    job = resolved["job"]
    stream = RandomStream(resolved["seed"])
    if job == "spread_experiment":
        exp = oracle.SpreadExperiment(**{k: (tuple(v) if k == "sigmas" else v)
                                         for k, v in resolved["instrument"].items()})
        table = oracle.spread_paths(exp, stream, workers=workers)
        if out is None:
            oracle.write_spread_csv(table, sys.stdout)
            return _meta(resolved)
        oracle.write_spread_csv(table, out)
        doc = {**_meta(resolved), "rows": int(table.spread.size), "csv": os.path.basename(out),
               "capped_rows": int(table.capped.sum())}
        _dump_json(doc, out + ".meta.json")
        return doc
    if job == "validate_kernel":
        try:
            kernel = _kernel(resolved["kernel"])
        except ConstructionError as exc:
            # construction runs its own spot check; a rejected kernel is a validation result
            doc = {**_meta(resolved), "passed": False, "max_violation": None, "message": str(exc)}
            _dump_json(doc, out)
            return doc
        inst = resolved["instrument"]
        triples = sample_triples(kernel.horizons, inst["triples"], stream)
        rep = check_supermartingale(kernel, triples, QuadratureRule.hermite(resolved["numerics"]["hermite_nodes"]))
        doc = {**_meta(resolved), "max_violation": rep.max_violation, "worst_point": list(rep.worst_point),
               "n_points": rep.n_points, "passed": rep.max_violation <= inst["tolerance"]}
        _dump_json(doc, out)
        return doc
    price, target, state = built or build_job(resolved)
    doc = {**_meta(resolved), "value": float(price())}
    if "mc" in resolved:
        mc = resolved["mc"]
        cfg = oracle.McConfig(paths=mc["paths"], seed=resolved["seed"], antithetic=mc["antithetic"],
                              block_size=mc["block_size"], workers=workers)
        res = oracle.mc_price(target, state, cfg)
        doc["mc_estimate"], doc["se"] = res.estimate, res.stderr
    _dump_json(doc, out)
    return doc


def run(config_path: str, seed: int | None = None, workers: int | None = None, out: str | None = None) -> int:
    """Run one job file; returns the process exit code."""
    try:
        cfg, _ = load_config(config_path)
        resolved = resolve(cfg, seed)
        out = out or cfg.get("output")
        built = None
        if resolved["job"] not in ("spread_experiment", "validate_kernel"):
            built = build_job(resolved)
    except (ConfigError, ConstructionError, StateError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    workers = workers or os.cpu_count() or 1
    try:
        execute(resolved, out, workers, built)
    except StateError as exc:
        print(f"config error: missing observation {exc}", file=sys.stderr)
        return 2
    except (InfoPricingError, ArithmeticError) as exc:
        print(f"numerics error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="infopricing", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a job config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("--out", default=None, help="output path (default: config 'output' or stdout)")
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must lie in [0, 2**64)")
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be positive")
    return run(args.config, args.seed, args.workers, args.out)


if __name__ == "__main__":
    sys.exit(main())
