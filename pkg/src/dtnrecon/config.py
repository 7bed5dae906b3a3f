"""Run configuration: one JSON document naming the mesh, coefficients, patch, tolerances and samples.

Schema::

    {"mesh": "file.msh" | "square:32" | {"generator": "square", "n": 32, "refine": 0},
     "coeffs": "laplace" | "aniso-rot" | "gauge(0.05)" | "coeffs.json"
               | {"A": [[a11, a12], [a21, a22]], "b": [b1, b2], "c": c, "ellipticity": 1.0},
     "omega": [1],
     "tolerances": {"cluster_tol": 1e-8, "rank_tol": 1e-8, "pole_loc_tol": 1e-8},
     "contour": {"n_quad": 64},
     "lambda_samples": [[re, im], ...],
     "quad_order": 2}

Coefficient entries are numbers, expression strings or ``[re, im]`` pairs.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, replace

from .coefficients import EllipticExpression, aniso_rot, gauge_pair, laplace
from .errors import ConfigError
from .experiments import DENSITY_LAMBDAS
from .mesh import generate_lshape, generate_unit_square, read_mesh, refine_uniform

_GAUGE = re.compile(r"^gauge\(\s*([-+0-9.eE]+)\s*\)$")
_GENERATORS = {"square": generate_unit_square, "lshape": generate_lshape}


@dataclass(frozen=True)
class Tolerances:
    cluster_tol: float = 1e-8
    rank_tol: float = 1e-8
    pole_loc_tol: float = 1e-8


@dataclass(frozen=True)
class ContourConfig:
    n_quad: int = 64


@dataclass(frozen=True)
class RunConfig:
    mesh: object = None
    coeffs: object = "laplace"
    omega: tuple = (1,)
    tolerances: Tolerances = field(default_factory=Tolerances)
    contour: ContourConfig = field(default_factory=ContourConfig)
    lambda_samples: tuple = DENSITY_LAMBDAS
    quad_order: int = 2

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"mesh", "coeffs", "omega", "tolerances", "contour", "lambda_samples", "quad_order"}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(extra)}")
        kw = {}
        if "mesh" in d:
            kw["mesh"] = d["mesh"]
        if "coeffs" in d:
            kw["coeffs"] = d["coeffs"]
        if "omega" in d:
            kw["omega"] = parse_omega(d["omega"])
        if "tolerances" in d:
            kw["tolerances"] = _sub(Tolerances, d["tolerances"], "tolerances", float)
        if "contour" in d:
            kw["contour"] = _sub(ContourConfig, d["contour"], "contour", int)
        if "lambda_samples" in d:
            kw["lambda_samples"] = parse_lambdas(d["lambda_samples"])
        if "quad_order" in d:
            kw["quad_order"] = _number(d["quad_order"], "quad_order", int)
        return cls(**kw)

    def override(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _number(v, name, kind):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and int(v) != v):
        raise ConfigError(f"{name} must be {'an integer' if kind is int else 'a number'}, got {v!r}")
    return kind(v)


def _sub(cls, d, name, kind):
    if not isinstance(d, dict):
        raise ConfigError(f"{name} must be an object")
    fields = set(cls.__dataclass_fields__)
    extra = sorted(set(d) - fields)
    if extra:
        raise ConfigError(f"unknown {name} keys: {', '.join(extra)}")
    return cls(**{k: _number(v, f"{name}.{k}", kind) for k, v in d.items()})


def parse_omega(v):
    if isinstance(v, int) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, (list, tuple)) or not v or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"omega must be a nonempty list of integer labels, got {v!r}")
    return tuple(sorted(set(v)))


def parse_lambdas(v):
    out = []
    if not isinstance(v, (list, tuple)):
        raise ConfigError("lambda_samples must be a list of [re, im] pairs")
    for item in v:
        if isinstance(item, (int, float)) and not isinstance(item, bool):
            out.append(complex(item))
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            out.append(complex(_number(item[0], "lambda re", float), _number(item[1], "lambda im", float)))
        else:
            raise ConfigError(f"bad lambda sample {item!r}")
    return tuple(out)


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(data)


# -- builders ---------------------------------------------------------------------------


def build_mesh(spec):
    """Mesh from a file path, ``"square:n"``/``"lshape:n"`` or a generator object."""
    if spec is None:
        raise ConfigError("no mesh given (use --mesh or the config 'mesh' field)")
    if isinstance(spec, str):
        m = re.fullmatch(r"(square|lshape):(\d+)", spec)
        if m:
            return _GENERATORS[m.group(1)](int(m.group(2)))
        try:
            with open(spec) as fh:
                return read_mesh(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read mesh {spec}: {exc.strerror}") from exc
    if isinstance(spec, dict):
        extra = sorted(set(spec) - {"generator", "n", "refine"})
        if extra or spec.get("generator") not in _GENERATORS:
            raise ConfigError(f"bad mesh generator spec {spec!r}")
        mesh = _GENERATORS[spec["generator"]](_number(spec.get("n", 8), "mesh.n", int))
        for _ in range(_number(spec.get("refine", 0), "mesh.refine", int)):
            mesh = refine_uniform(mesh)
        return mesh
    raise ConfigError(f"bad mesh spec {spec!r}")


def gauge_eps(coeff_id):
    m = _GAUGE.match(coeff_id) if isinstance(coeff_id, str) else None
    return float(m.group(1)) if m else None


def build_coeffs(spec):
    """Return ``(expression, coeff_id)``."""
    if isinstance(spec, str):
        if spec == "laplace":
            return laplace(), spec
        if spec == "aniso-rot":
            return aniso_rot(), spec
        eps = gauge_eps(spec)
        if eps is not None:
            return gauge_pair(laplace(), eps)[1], spec
        if os.path.exists(spec):
            try:
                with open(spec) as fh:
                    data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"coefficient file {spec} is not valid JSON: {exc}") from exc
            if isinstance(data, dict) and set(data) == {"builtin"}:
                data = data["builtin"]
            expr, cid = build_coeffs(data)
            return expr, cid if isinstance(data, str) else os.path.basename(spec)
        raise ConfigError(f"unknown coefficient id {spec!r}")
    if isinstance(spec, dict):
        extra = sorted(set(spec) - {"A", "b", "c", "ellipticity", "name"})
        if extra or "A" not in spec:
            raise ConfigError("coefficient object needs 'A' and may have 'b', 'c', 'ellipticity', 'name'")
        A = spec["A"]
        if not (isinstance(A, list) and len(A) == 2 and all(isinstance(r, list) and len(r) == 2 for r in A)):
            raise ConfigError("A must be a 2x2 array")
        kw = {"A": tuple(tuple(_entry(v) for v in row) for row in A)}
        if "b" in spec:
            if not (isinstance(spec["b"], list) and len(spec["b"]) == 2):
                raise ConfigError("b must have two entries")
            kw["b"] = tuple(_entry(v) for v in spec["b"])
        if "c" in spec:
            kw["c"] = _entry(spec["c"])
        if spec.get("ellipticity") is not None:
            kw["ellipticity_constant"] = _number(spec["ellipticity"], "ellipticity", float)
        name = spec.get("name", "custom")
        return EllipticExpression(name=name, **kw), name
    raise ConfigError(f"bad coefficient spec {spec!r}")


def _entry(v):
    if isinstance(v, bool):
        raise ConfigError("coefficient entries must be numbers, expressions or [re, im] pairs")
    if isinstance(v, (int, float, str)):
        return v
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float, str)) and not isinstance(x, bool) for x in v):
        return tuple(v)
    raise ConfigError(f"bad coefficient entry {v!r}")
