"""Configuration-driven convergence studies.

A study configuration is a JSON document validated against
``CONFIG_SCHEMA``.  Every study loops over degrees and mesh levels,
computes errors against analytic references and returns one list of
:class:`ConvergenceRecord` per degree (or per space).
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import expr as ex
from .checks import inc_path_mismatch
from .geom import connection_coefficients, gauss_curvature
from .lift import (BoundaryData, lift_connection, lift_curl,
                   lift_curvature, lift_inc)
from .mesh import RECTANGLE_TAGS, TriMesh, mesh_sequence, structured_unit_square
from .norms import (ConvergenceRecord, eoc, error_quad_degree, field_error, hminus1_error, l2_error,
                    l2_norm)
from .spaces import (AnalyticMetric, AnalyticTensor, ElementQuadrature, FieldDifference, build_space,
                     interpolate, regge_interpolate)

log = logging.getLogger(__name__)

# The two inc assembly paths agree exactly only as integrals; compare them
# with the highest available rule so the mismatch reflects the formulas.
PATH_CHECK_QUAD_DEGREE = 25


class ConfigError(ValueError):
    pass


_EXPR = {"type": ["string", "number"]}
_TAGS = {"type": "array", "items": {"type": "string"}, "uniqueItems": True}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["metric"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "metric": {
            "type": "object",
            "oneOf": [
                {"required": ["graph"]},
                {"required": ["entries"]},
            ],
            "properties": {
                "graph": {"type": "string"},
                "entries": {"type": "array", "items": _EXPR, "minItems": 3, "maxItems": 3},
            },
            "additionalProperties": False,
        },
        "domain": {
            "type": "object",
            "properties": {
                "origin": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "extent": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                           "minItems": 2, "maxItems": 2},
            },
            "additionalProperties": False,
        },
        "mesh": {
            "type": "object",
            "properties": {
                "n0": {"type": "integer", "minimum": 1},
                "levels": {"type": "integer", "minimum": 1, "maximum": 12},
                "perturb_amplitude": {"type": "number", "minimum": 0, "maximum": 0.25},
                "seed": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "degrees": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "boundary": {
            "type": "object",
            "properties": {
                "dirichlet": {"type": "object", "additionalProperties": _EXPR},
                "neumann": {"type": "object", "additionalProperties": _EXPR},
                "dirichlet_tags": _TAGS,
                "neumann_tags": _TAGS,
                "corner_angles": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["at", "angle"],
                        "properties": {
                            "at": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                            "angle": {"type": "number"},
                        },
                        "additionalProperties": False,
                    },
                },
            },
            "additionalProperties": False,
        },
        "connection": {
            "type": "object",
            "properties": {
                "space": {"enum": ["bdm", "rt"]},
                "boundary": {"enum": ["exact", "zero", "natural"]},
            },
            "additionalProperties": False,
        },
        "sigma": {
            "type": "object",
            "required": ["entries"],
            "properties": {"entries": {"type": "array", "items": _EXPR, "minItems": 3, "maxItems": 3}},
            "additionalProperties": False,
        },
        "quadrature": {
            "type": "object",
            "properties": {"degree": {"type": ["integer", "null"], "minimum": 0, "maximum": 25}},
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "prefix": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                "vtk": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    },
}

DEFAULTS = {
    "domain": {"origin": [0.0, 0.0], "extent": [1.0, 1.0]},
    "mesh": {"n0": 2, "levels": 5, "perturb_amplitude": 0.25, "seed": 0},
    "degrees": [0, 1, 2],
    "boundary": {},
    "connection": {"space": "bdm", "boundary": "exact"},
    "quadrature": {"degree": None},
    "output": {"vtk": False},
}


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse and validate a configuration, filling defaults."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "(root)"
        line = _locate_key(text, err.absolute_path)
        raise ConfigError(f"{source}:{line}: at {where}: {err.message}")
    cfg = copy.deepcopy(DEFAULTS)
    for key, val in data.items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    _check_semantics(cfg)
    return cfg


def _locate_key(text: str, path) -> int:
    """Best-effort line of the innermost named key of ``path``."""
    names = [p for p in path if isinstance(p, str)]
    pos = 0
    for name in names:
        hit = text.find(json.dumps(name), pos)
        if hit < 0:
            break
        pos = hit
    return _line_of(text, pos)


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


def bundled_config(name: str) -> dict:
    """One of the configurations shipped with the package, e.g. ``paper_fig6``."""
    text = resources.files("reggecurv").joinpath("configs", f"{name}.json").read_text(encoding="utf-8")
    return parse_config(text, name)


def bundled_config_names() -> list[str]:
    root = resources.files("reggecurv").joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _check_semantics(cfg: dict) -> None:
    for name, text in _config_expressions(cfg):
        try:
            ex.as_expr(text)
        except ex.ExprError as exc:
            raise ConfigError(f"expression {name}: {exc}") from exc
    b = cfg["boundary"]
    dtags = set(b.get("dirichlet_tags", [])) | set(b.get("dirichlet", {}))
    ntags = set(b.get("neumann_tags", [])) | set(b.get("neumann", {}))
    both = dtags & ntags
    if both:
        raise ConfigError(f"boundary tag {sorted(both)[0]!r} is both Dirichlet and Neumann")
    unknown = (dtags | ntags) - set(RECTANGLE_TAGS)
    if unknown:
        raise ConfigError(f"unknown boundary tag {sorted(unknown)[0]!r}")
    if dtags or ntags:
        missing = set(RECTANGLE_TAGS) - dtags - ntags
        if missing:
            raise ConfigError(f"boundary tag {sorted(missing)[0]!r} has no Dirichlet or Neumann data")


def _config_expressions(cfg: dict):
    m = cfg["metric"]
    if "graph" in m:
        yield "metric.graph", m["graph"]
    else:
        for i, e in enumerate(m["entries"]):
            yield f"metric.entries[{i}]", e
    for kind in ("dirichlet", "neumann"):
        for tag, e in cfg["boundary"].get(kind, {}).items():
            if e != "exact":
                yield f"boundary.{kind}.{tag}", e
    for i, e in enumerate(cfg.get("sigma", {}).get("entries", [])):
        yield f"sigma.entries[{i}]", e


# ------------------------------------------------------------ building blocks

def metric_from_config(cfg: dict) -> AnalyticMetric:
    m = cfg["metric"]
    if "graph" in m:
        return AnalyticMetric.from_graph(m["graph"])
    return AnalyticMetric(*[str(e) for e in m["entries"]])


def sigma_from_config(cfg: dict) -> AnalyticTensor:
    if "sigma" not in cfg:
        raise ConfigError("this study needs a 'sigma' section")
    return AnalyticTensor(*[str(e) for e in cfg["sigma"]["entries"]])


def meshes_from_config(cfg: dict, seed: Optional[int] = None) -> list[TriMesh]:
    mc, d = cfg["mesh"], cfg["domain"]
    s = mc["seed"] if seed is None else seed
    return mesh_sequence(mc["n0"], mc["levels"], mc["perturb_amplitude"], s,
                         tuple(d["origin"]), tuple(d["extent"]))


def nominal_h(cfg: dict, level: int) -> float:
    """Longest edge of the unperturbed mesh of a level; the h of rate tables."""
    mc, d = cfg["mesh"], cfg["domain"]
    n = mc["n0"] * 2 ** level
    return structured_unit_square(n, tuple(d["origin"]), tuple(d["extent"])).h_max


def boundary_data_from_config(cfg: dict, metric: AnalyticMetric) -> BoundaryData:
    """Boundary data; ``"exact"`` entries (or bare tag lists) use the metric."""
    b = cfg["boundary"]

    def K(xy):
        return gauss_curvature(metric.jet_at(xy, 2))

    dirichlet = {t: K for t in b.get("dirichlet_tags", [])}
    for tag, e in b.get("dirichlet", {}).items():
        dirichlet[tag] = K if e == "exact" else e
    neumann = {t: None for t in b.get("neumann_tags", [])}
    for tag, e in b.get("neumann", {}).items():
        neumann[tag] = None if e == "exact" else e
    corners = {tuple(c["at"]): c["angle"] for c in b.get("corner_angles", [])}
    if not dirichlet and not neumann:
        dirichlet = {t: K for t in RECTANGLE_TAGS}
    return BoundaryData(dirichlet=dirichlet, neumann=neumann, neumann_corner_angles=corners, metric=metric)


def exact_curvature(metric: AnalyticMetric):
    return lambda xy: gauss_curvature(metric.jet_at(xy, 2))


def exact_connection(metric: AnalyticMetric):
    return lambda xy: connection_coefficients(metric.jet_at(xy, 1))


@dataclass
class StudyResult:
    """Records per label (``k0``, ``bdm1`` ...) plus optional fields of the finest level."""

    tables: dict
    fields: dict

    def csv_names(self, prefix: str) -> dict:
        return {label: f"{prefix}_{label}.csv" for label in self.tables}


def _record(cfg, level, mesh, ndof, errors) -> ConvergenceRecord:
    return ConvergenceRecord(level=level, n=cfg["mesh"]["n0"] * 2 ** level, h_max=nominal_h(cfg, level),
                             ndof=int(ndof), errors=errors)


# ------------------------------------------------------------------ studies

def run_interpolation_study(cfg: dict, seed: Optional[int] = None,
                            quad_degree: Optional[int] = None) -> StudyResult:
    """Canonical Regge interpolation error: L2 and max norm at quadrature points."""
    gex = metric_from_config(cfg)
    meshes = meshes_from_config(cfg, seed)
    tables, fields = {}, {}
    for k in cfg["degrees"]:
        qd = quad_degree or cfg["quadrature"]["degree"] or 2 * k + 6
        recs = []
        for level, m in enumerate(meshes):
            R = build_space(m, "regge", k)
            g = regge_interpolate(gex, R, qd)
            err = field_error(g, gex.values_at)
            eq = ElementQuadrature(m, error_quad_degree(k))
            e = err(eq)
            recs.append(_record(cfg, level, m, R.ndof, {
                "l2": l2_norm(err, m, error_quad_degree(k)),
                "max": float(np.abs(e).max()),
            }))
            log.info("interpolate k=%d level=%d done", k, level)
            fields[f"k{k}"] = {"metric": g}
        tables[f"k{k}"] = eoc(recs)
    return StudyResult(tables, fields)


def run_curvature_study(cfg: dict, seed: Optional[int] = None,
                        quad_degree: Optional[int] = None) -> StudyResult:
    """Gauss curvature lifting: L2 and H^-1 errors of K_h against K(gex)."""
    gex = metric_from_config(cfg)
    bd = boundary_data_from_config(cfg, gex)
    Kex = exact_curvature(gex)
    meshes = meshes_from_config(cfg, seed)
    dtags = tuple(sorted(bd.dirichlet))
    tables, fields = {}, {}
    for k in cfg["degrees"]:
        qd = quad_degree or cfg["quadrature"]["degree"] or 2 * k + 6
        recs = []
        for level, m in enumerate(meshes):
            g = regge_interpolate(gex, build_space(m, "regge", k), qd)
            V = build_space(m, "lagrange", k + 1, dtags)
            Kh = lift_curvature(g, V, bd, qd)
            recs.append(_record(cfg, level, m, V.ndof, {
                "l2": l2_error(Kh, Kex),
                "hm1": hminus1_error(field_error(Kh, Kex), m, k),
            }))
            log.info("curvature k=%d level=%d done", k, level)
            fields[f"k{k}"] = {"metric": g, "curvature": Kh}
        tables[f"k{k}"] = eoc(recs)
    return StudyResult(tables, fields)


def connection_boundary_values(W, omega) -> Optional[np.ndarray]:
    """Interpolated normal traces of the exact connection (used on essential edges)."""
    return interpolate(W, omega).coeffs


def run_connection_study(cfg: dict, seed: Optional[int] = None,
                         quad_degree: Optional[int] = None) -> StudyResult:
    """Connection 1-form lifting: L2 error of omega_h against omega(gex)."""
    gex = metric_from_config(cfg)
    omega = exact_connection(gex)
    meshes = meshes_from_config(cfg, seed)
    kind = cfg["connection"]["space"]
    mode = cfg["connection"]["boundary"]
    tables, fields = {}, {}
    for k in cfg["degrees"]:
        qd = quad_degree or cfg["quadrature"]["degree"] or 2 * k + 6
        recs = []
        for level, m in enumerate(meshes):
            g = regge_interpolate(gex, build_space(m, "regge", k), qd)
            W = build_space(m, kind, k, () if mode == "natural" else "all")
            values = connection_boundary_values(W, omega) if mode == "exact" else None
            w = lift_connection(g, W, qd, values)
            recs.append(_record(cfg, level, m, W.ndof if W.constraint is None else W.constraint.shape[1],
                                {"l2": l2_error(w, omega)}))
            log.info("connection %s%d level=%d done", kind, k, level)
            fields[f"{kind}{k}"] = {"metric": g, "connection": w}
        tables[f"{kind}{k}"] = eoc(recs)
    return StudyResult(tables, fields)


def run_curl_study(cfg: dict, seed: Optional[int] = None,
                   quad_degree: Optional[int] = None) -> StudyResult:
    """Lifted covariant curl of the Regge interpolation error of a smooth sigma."""
    gex = metric_from_config(cfg)
    sig = sigma_from_config(cfg)
    meshes = meshes_from_config(cfg, seed)
    tables, fields = {}, {}
    for k in cfg["degrees"]:
        qd = quad_degree or cfg["quadrature"]["degree"] or 2 * k + 6
        recs = []
        for level, m in enumerate(meshes):
            R = build_space(m, "regge", k)
            g = regge_interpolate(gex, R, qd)
            s_h = interpolate(R, sig.values_at, qd)
            W = build_space(m, "bdm", k, "all")
            c = lift_curl(g, FieldDifference(sig, s_h), W, qd)
            recs.append(_record(cfg, level, m, W.ndof, {"l2": l2_error(c, None)}))
            fields[f"k{k}"] = {"metric": g, "curl": c}
        tables[f"k{k}"] = eoc(recs)
    return StudyResult(tables, fields)


def run_inc_study(cfg: dict, seed: Optional[int] = None,
                  quad_degree: Optional[int] = None) -> StudyResult:
    """Lifted covariant incompatibility of the interpolation error, plus the path mismatch."""
    gex = metric_from_config(cfg)
    sig = sigma_from_config(cfg)
    meshes = meshes_from_config(cfg, seed)
    tables, fields = {}, {}
    for k in cfg["degrees"]:
        qd = quad_degree or cfg["quadrature"]["degree"] or 2 * k + 6
        recs = []
        for level, m in enumerate(meshes):
            R = build_space(m, "regge", k)
            g = regge_interpolate(gex, R, qd)
            s_h = interpolate(R, sig.values_at, qd)
            V = build_space(m, "lagrange", k + 1, "all")
            diff = FieldDifference(sig, s_h)
            u = lift_inc(g, diff, V, qd)
            mismatch = inc_path_mismatch(g, s_h, V, PATH_CHECK_QUAD_DEGREE)
            recs.append(_record(cfg, level, m, V.ndof, {"l2": l2_error(u, None), "path_mismatch": mismatch}))
            fields[f"k{k}"] = {"metric": g, "inc": u}
        tables[f"k{k}"] = eoc(recs)
    return StudyResult(tables, fields)


STUDIES = {
    "interpolate": run_interpolation_study,
    "curvature": run_curvature_study,
    "connection": run_connection_study,
    "curl": run_curl_study,
    "inc": run_inc_study,
}
