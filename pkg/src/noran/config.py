"""JSON run configuration shared by the CLI commands.

Every key is optional; missing keys take the defaults in ``DEFAULTS``.
Unknown keys are rejected so a typo cannot silently fall back to a default.
The defaults describe a smoke run (one 2x2x2 antenna setup, seven Bob SNRs,
20 trials) that finishes in a few seconds.
"""

import json

import jsonschema

from noran.errors import ConfigError
from noran.experiments import ExperimentConfig
from noran.optimizer import CcpConfig

__all__ = ["DEFAULTS", "CONFIG_SCHEMA", "load_config", "parse_config", "RunConfig"]

DEFAULTS = {
    "n_tx": [2],
    "n_rx": [2],
    "n_eve": [2],
    "snr_bob_db": [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
    "snr_eve_db": [10.0],
    "p_budget": 1.0,
    "trials": 20,
    "master_seed": 1,
    "modulation": "bpsk",
    "noran_mode": ["off", "optimized", "optimized-with-codebook"],
    "precoder_mode": "max-gain",
    "delta": 0.1,
    "eve_model": "genie",
    "symbols_per_trial": 10000,
    "codebook_realizations": 100,
    "ccp": {"max_iter": 200, "tol": 1e-8, "init": "half-split", "subproblem_tol": 1e-10},
}

_counts = {
    "oneOf": [
        {"type": "integer", "minimum": 1},
        {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
    ]
}
_grid = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
    ]
}
_mode = {"type": "string", "pattern": r"^(off|optimized|optimized-with-codebook|fixed:[0-9.eE+-]+)$"}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_tx": _counts,
        "n_rx": _counts,
        "n_eve": _counts,
        "snr_bob_db": _grid,
        "snr_eve_db": _grid,
        "p_budget": {"type": "number", "exclusiveMinimum": 0},
        "trials": {"type": "integer", "minimum": 1},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "modulation": {"enum": ["bpsk"]},
        "noran_mode": {"oneOf": [_mode, {"type": "array", "items": _mode, "minItems": 1}]},
        "precoder_mode": {"enum": ["max-gain", "random-unit"]},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "eve_model": {"enum": ["expected", "genie"]},
        "symbols_per_trial": {"type": "integer", "minimum": 1},
        "codebook_realizations": {"type": "integer", "minimum": 1},
        "ccp": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_iter": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "init": {
                    "oneOf": [
                        {"enum": ["half-split", "full-signal"]},
                        {
                            "type": "array",
                            "items": {"type": "number", "minimum": 0},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    ]
                },
                "subproblem_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


class RunConfig:
    """Validated config: an :class:`ExperimentConfig` plus codebook settings."""

    def __init__(self, experiment, codebook_realizations, raw):
        self.experiment = experiment
        self.codebook_realizations = codebook_realizations
        self.raw = raw


def parse_config(doc, seed=None):
    """Validate a decoded JSON document and merge it over the defaults."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = list(validator.iter_errors(doc))
    if errors:
        bad = set()
        for err in errors:
            if err.validator == "additionalProperties" and not err.absolute_path:
                bad.update(k for k in doc if k not in CONFIG_SCHEMA["properties"])
            elif err.absolute_path:
                bad.add(".".join(str(p) for p in err.absolute_path))
            else:
                bad.add("<root>")
        bad = sorted(bad)
        raise ConfigError(f"config rejected; offending fields: {', '.join(bad)}", bad)
    merged = {**DEFAULTS, **doc, "ccp": {**DEFAULTS["ccp"], **doc.get("ccp", {})}}
    if seed is not None:
        merged["master_seed"] = int(seed)
    ccp = merged["ccp"]
    try:
        exp = ExperimentConfig(
            n_tx=merged["n_tx"],
            n_rx=merged["n_rx"],
            n_eve=merged["n_eve"],
            snr_bob_db=merged["snr_bob_db"],
            snr_eve_db=merged["snr_eve_db"],
            p_budget=float(merged["p_budget"]),
            trials=merged["trials"],
            master_seed=merged["master_seed"],
            modulation=merged["modulation"],
            noran_mode=merged["noran_mode"],
            precoder_mode=merged["precoder_mode"],
            delta=float(merged["delta"]),
            eve_model=merged["eve_model"],
            symbols_per_trial=merged["symbols_per_trial"],
            ccp=CcpConfig(
                max_iter=ccp["max_iter"],
                tol=float(ccp["tol"]),
                init=ccp["init"] if isinstance(ccp["init"], str) else tuple(ccp["init"]),
                subproblem_tol=float(ccp["subproblem_tol"]),
            ),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"config rejected: {exc}", ["ccp"]) from None
    return RunConfig(exp, merged["codebook_realizations"], merged)


def load_config(path=None, seed=None):
    """Read ``path`` (or use pure defaults when None)."""
    if path is None:
        return parse_config({}, seed)
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}", ["<file>"]) from None
    return parse_config(doc, seed)
