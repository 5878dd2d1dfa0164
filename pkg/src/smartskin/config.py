"""
Scenario configuration: a YAML document validated against a JSON Schema,
plus builders turning its sections into library objects.

Complex polarization amplitudes are written as ``[re, im]`` pairs.
Defaults of optional keys live in the library dataclasses, so a key that
is absent simply falls back to the constructor default.
"""
from __future__ import annotations

import copy
import hashlib
import json

import jsonschema
import numpy as np
import yaml

from .em import Direction, Lattice, Mounting, PlaneWave
from .errors import SmartSkinError
from .ipt import IptConfig
from .radiation import rectangle
from .sbd import SbdConfig, Scenario, SynthesisConfig
from .surrogate.kriging import KrigingConfig
from .surrogate.oracle import OracleParams


class ConfigError(SmartSkinError):
    """Configuration document failed validation."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int1 = {"type": "integer", "minimum": 1}
_seed = {"type": "integer", "minimum": 0}
_cplx = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_pt = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "wave": _obj({
        "frequency": _pos,
        "incidence_deg": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "e_te": _cplx,
        "e_tm": _cplx,
    }, ["frequency"]),
    "lattice": _obj({"P": _int1, "Q": _int1, "dx": _pos, "dy": _pos}, ["P", "Q", "dx", "dy"]),
    "mounting": _obj({"H": _pos, "convention": {"enum": ["wall"]}}, ["H"]),
    "uc": _obj({
        "D": _int1,
        "bounds": {"type": "array", "minItems": 1,
                   "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
        "oracle": _obj({"l_res": _pos, "kappa": {"type": "number", "minimum": 0},
                        "rho_c": _pos, "Q_f": _pos,
                        "alpha_loss": {"type": "number", "minimum": 0, "maximum": 1}}),
    }, ["D", "bounds"]),
    "surrogate": _obj({
        "Pp": _int1, "Qp": _int1,
        "B": {"type": "integer", "minimum": 2},
        "seed": _seed,
        "tuning": {"enum": ["tied", "untied"]},
        "n_starts": _int1,
        "max_steps": _int1,
        "nugget": _pos,
    }, ["B", "seed"]),
    "ipt": _obj({
        "gamma": _pos, "I": _int1, "C": _pos,
        "mode": {"enum": ["phase-only", "global-normalize"]},
        "cutoff": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "keep_phase": {"type": "boolean"},
        "seed": _seed,
    }, ["seed"]),
    "sbd": _obj({
        "A": {"type": "integer", "minimum": 2}, "N": _int1, "seed": _seed,
        "w": _pos, "c1": _pos, "c2": _pos, "vclamp": _pos,
        "warm_start": {"type": "boolean"},
        "warm_spread": {"type": "number", "minimum": 0},
    }, ["seed"]),
    "objective": {
        "oneOf": [
            _obj({"pencil": _obj({"theta_deg": _num, "phi_deg": _num}, ["theta_deg", "phi_deg"]),
                  "mask_level_db": _num}, ["pencil"]),
            _obj({"shaped": _obj({
                "rectangles": {"type": "array", "items": _obj(
                    {"center": _pt, "width": _pos, "height": _pos},
                    ["center", "width", "height"])},
                "polygons": {"type": "array",
                             "items": {"type": "array", "items": _pt, "minItems": 3}},
            }), "mask_level_db": _num}, ["shaped"]),
        ]
    },
    "output": _obj({
        "ipt_oversample": _pos,
        "eval_oversample": _pos,
        "footprint_window": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
        "footprint_step": _pos,
    }),
}, ["wave", "lattice", "mounting", "uc", "surrogate", "ipt", "sbd", "objective"])


def _where(err):
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def validate(doc):
    """Raise ConfigError naming the first offending key."""
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(doc),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise ConfigError(f"config key '{_where(e)}': {e.message}")
    if len(doc["uc"]["bounds"]) != doc["uc"]["D"]:
        raise ConfigError("config key 'uc/bounds': expected one [lo, hi] pair per descriptor")
    for lo, hi in doc["uc"]["bounds"]:
        if not lo < hi:
            raise ConfigError("config key 'uc/bounds': each pair needs lo < hi")
    shaped = doc["objective"].get("shaped")
    if shaped is not None and not (shaped.get("rectangles") or shaped.get("polygons")):
        raise ConfigError("config key 'objective/shaped': give rectangles or polygons")
    return doc


def load_config(path, seed_override=None, sections=("surrogate", "ipt", "sbd")):
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    validate(doc)
    if seed_override is not None:
        doc = with_seed(doc, seed_override, sections)
    return doc


def with_seed(doc, seed, sections=("surrogate", "ipt", "sbd")):
    """Copy of ``doc`` with the seeds of ``sections`` replaced by ``seed``."""
    doc = copy.deepcopy(doc)
    for section in sections:
        doc[section]["seed"] = int(seed)
    return doc


def canonical(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(doc):
    return hashlib.sha256(canonical(doc).encode()).hexdigest()


def surrogate_hash(doc):
    """Hash of everything a trained model depends on (the lattice size is not)."""
    part = {k: doc[k] for k in ("wave", "uc", "surrogate")}
    part["spacing"] = [doc["lattice"]["dx"], doc["lattice"]["dy"]]
    return config_hash(part)


# ---------------------------------------------------------------------------
# builders


def _pick(section, mapping):
    return {dst: section[src] for src, dst in mapping.items() if src in section}


def build_wave(doc):
    w = doc["wave"]
    theta, phi = w.get("incidence_deg", (0.0, 0.0))
    kw = {"incidence": Direction.from_degrees(theta, phi)}
    for key in ("e_te", "e_tm"):
        if key in w:
            kw[key] = complex(*w[key])
    return PlaneWave(w["frequency"], **kw)


def build_lattice(doc):
    s = doc["lattice"]
    return Lattice(s["P"], s["Q"], s["dx"], s["dy"])


def build_mounting(doc):
    return Mounting(**doc["mounting"])


def bounds(doc):
    return np.asarray(doc["uc"]["bounds"], dtype=float)


def window_shape(doc):
    s = doc["surrogate"]
    return s.get("Pp", 5), s.get("Qp", 5)


def oracle_params(doc):
    lat = doc["lattice"]
    kw = {"rho_c": lat["dx"], "dx": lat["dx"], "dy": lat["dy"]}
    kw.update(doc["uc"].get("oracle", {}))
    return OracleParams(**kw)


def kriging_config(doc):
    s = doc["surrogate"]
    return KrigingConfig(**_pick(s, {"tuning": "tuning", "n_starts": "n_starts",
                                     "max_steps": "max_steps", "nugget": "nugget",
                                     "seed": "seed"}))


def ipt_config(doc):
    return IptConfig(**_pick(doc["ipt"], {"gamma": "gamma", "I": "I", "C": "C",
                                          "mode": "projection_mode", "cutoff": "svd_cutoff",
                                          "keep_phase": "keep_phase", "seed": "seed"}))


def synthesis_config(doc, threads=1):
    s = doc["sbd"]
    sbd = SbdConfig(threads=threads, **_pick(s, {k: k for k in
                                                 ("A", "N", "seed", "w", "c1", "c2", "vclamp")}))
    return SynthesisConfig(ipt=ipt_config(doc), sbd=sbd,
                           **_pick(s, {"warm_start": "warm_start", "warm_spread": "warm_spread"}))


def polygons(doc):
    shaped = doc["objective"].get("shaped")
    if shaped is None:
        return None
    polys = [rectangle(tuple(r["center"]), r["width"], r["height"])
             for r in shaped.get("rectangles", [])]
    polys += [[tuple(p) for p in poly] for poly in shaped.get("polygons", [])]
    return polys


def build_scenario(doc, model):
    obj = doc["objective"]
    target = None
    if "pencil" in obj:
        target = Direction.from_degrees(obj["pencil"]["theta_deg"], obj["pencil"]["phi_deg"])
    out = doc.get("output", {})
    kw = _pick(out, {"ipt_oversample": "ipt_oversample", "eval_oversample": "eval_oversample",
                     "footprint_step": "footprint_step"})
    if "footprint_window" in out:
        kw["footprint_window"] = tuple(out["footprint_window"])
    return Scenario(build_lattice(doc), build_wave(doc), build_mounting(doc), model, bounds(doc),
                    target=target, polygons=polygons(doc),
                    mask_level_db=obj.get("mask_level_db", 0.0),
                    oracle_params=oracle_params(doc), **kw)
