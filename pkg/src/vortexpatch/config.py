"""Run configuration: strict schema, defaults, canonical hashing.

Unknown keys are rejected at every level (silent misconfiguration is the
main failure mode of research CLIs); the hash is over a canonical dump with
sorted keys so semantically identical configs hash identically.
"""

import hashlib
import json

import numpy as np

from .errors import ConfigError

# schema: key -> (types, default, validator or None); None default = required
_DOMAIN_KEYS = {
    "kind": (str, "disk", None),
    "radius": ((int, float), 1.0, lambda v: v > 0),
    "center": (list, [0.0, 0.0], lambda v: len(v) == 2),
    "a": ((int, float), 1.0, lambda v: v > 0),
    "b": ((int, float), 0.6, lambda v: v > 0),
    "wobble": ((int, float), 0.12, None),
    "mode": (int, 3, lambda v: v >= 1),
    "samples": ((list, type(None)), None, None),
    "n_boundary": (int, 512, lambda v: v >= 32),
    "big_r": ((int, float, type(None)), None, None),
    "backend": ((str, type(None)), None,
                lambda v: v in (None, "images", "boundary-integral")),
    "quadrature_order": (int, 512, lambda v: v >= 64),
}

_VORTEX_KEYS = {
    "kappa_plus": (list, None, lambda v: len(v) >= 0),
    "kappa_minus": (list, [], None),
    "seeds": ((list, type(None)), None, None),
    "positions": ((list, type(None)), None, None),
    "subdomain_radius": ((int, float, list, type(None)), None, None),
    "rho": ((int, float, type(None)), None, None),
    "lbar": ((int, float), 2.0, lambda v: v > 0),
    "refine_centers": (bool, True, None),
}

_BACKGROUND_KEYS = {
    "kind": (str, "zero",
             lambda v: v in ("zero", "vn-fourier", "vn-samples", "harmonic-poly")),
    "offset": ((int, float), 0.0, None),
    "cos": (dict, {}, None),
    "sin": (dict, {}, None),
    "values": (list, [], None),
    "coeffs": (list, [], None),
}

_PROFILE_KEYS = {
    "p": ((int, float), 2.0, lambda v: v > 1),
    "tol": ((int, float), 1e-4, lambda v: v > 0),
}

_GRID_KEYS = {
    "h": ((int, float, type(None)), None, lambda v: v is None or v > 0),
    "points_per_core": ((int, float), 8.0, lambda v: v >= 4),
    "boundary": (str, "shortley-weller",
                 lambda v: v in ("shortley-weller", "mask-only")),
}

_SOLVER_KEYS = {
    "method": (str, "newton", lambda v: v in ("newton", "picard")),
    "tol": ((int, float), 1e-10, lambda v: v > 0),
    "max_iter": (int, 60, lambda v: v >= 1),
    "picard_relax": ((int, float), 1.0, lambda v: 0 < v <= 1),
    "jacobian_cap": ((int, float, type(None)), None, None),
    "continuation": (bool, True, None),
}

_SEARCH_KEYS = {
    "tol": ((int, float, type(None)), None, None),
    "max_iter": (int, 200, lambda v: v >= 1),
    "multistart": (int, 0, lambda v: v >= 0),
    "degeneracy_threshold": ((int, float), 1e-8, lambda v: v > 0),
}

_OUTPUT_KEYS = {
    "precision": (int, 17, lambda v: 6 <= v <= 17),
}

_TOP_KEYS = {
    "domain": (dict, {}, None),
    "vortices": (dict, None, None),
    "background": (dict, {}, None),
    "profile": (dict, {}, None),
    "eps": (list, None, None),
    "grid": (dict, {}, None),
    "solver": (dict, {}, None),
    "search": (dict, {}, None),
    "output": (dict, {}, None),
    "seed": (int, 0, None),
    "threads": (int, 1, lambda v: v >= 1),
}

_SECTIONS = {
    "domain": _DOMAIN_KEYS, "vortices": _VORTEX_KEYS,
    "background": _BACKGROUND_KEYS, "profile": _PROFILE_KEYS,
    "grid": _GRID_KEYS, "solver": _SOLVER_KEYS, "search": _SEARCH_KEYS,
    "output": _OUTPUT_KEYS,
}


def _apply_schema(section, data, schema):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = set(data) - set(schema)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {sorted(unknown)}")
    out = {}
    for key, (types, default, check) in schema.items():
        if key in data:
            val = data[key]
        elif default is None and type(None) not in (types if isinstance(types, tuple) else (types,)):
            raise ConfigError(f"missing required key {section!r}.{key!r}")
        else:
            val = default
        if not isinstance(val, types):
            raise ConfigError(f"{section!r}.{key!r} has wrong type {type(val).__name__}")
        if check is not None and val is not None and not check(val):
            raise ConfigError(f"{section!r}.{key!r} fails validation: {val!r}")
        out[key] = val
    return out


def validate_config(raw):
    """Validate a raw dict; returns the fully-defaulted config."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(_TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    cfg = {}
    for key, (types, default, check) in _TOP_KEYS.items():
        if key in raw:
            val = raw[key]
        elif default is None:
            raise ConfigError(f"missing required section {key!r}")
        else:
            val = default
        if not isinstance(val, types):
            raise ConfigError(f"top-level {key!r} has wrong type")
        if check is not None and not check(val):
            raise ConfigError(f"top-level {key!r} fails validation: {val!r}")
        cfg[key] = val
    for name, schema in _SECTIONS.items():
        cfg[name] = _apply_schema(name, cfg.get(name, {}), schema)

    eps = cfg["eps"]
    if not eps or not all(isinstance(e, (int, float)) and e > 0 for e in eps):
        raise ConfigError("eps must be a nonempty list of positive numbers")
    if any(e >= 1.0 for e in eps):
        raise ConfigError("eps values must be below 1")
    if sorted(eps, reverse=True) != list(eps):
        raise ConfigError("eps values must be sorted descending (continuation order)")

    v = cfg["vortices"]
    m = len(v["kappa_plus"])
    n = len(v["kappa_minus"])
    if m + n < 1:
        raise ConfigError("need at least one vortex (m + n >= 1)")
    if any(k <= 0 for k in v["kappa_plus"] + v["kappa_minus"]):
        raise ConfigError("vortex strengths must be positive")
    seeds = v["positions"] if v["positions"] is not None else v["seeds"]
    if seeds is None or len(seeds) != m + n:
        raise ConfigError("need one seed/position per vortex (plus block first)")

    d = cfg["domain"]
    if d["kind"] not in ("disk", "ellipse", "blob", "samples"):
        raise ConfigError(f"unknown domain kind {d['kind']!r}")
    if d["kind"] == "samples" and not d["samples"]:
        raise ConfigError("domain kind 'samples' needs boundary samples")
    return cfg


def load_config(path):
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    return validate_config(raw)


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(obj[k]) for k in sorted(obj, key=str)}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(repr(float(obj)))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def config_hash(cfg):
    """sha256 over the canonical dump; reordered keys hash identically."""
    payload = json.dumps(_canonical(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
