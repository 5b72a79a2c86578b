"""Scenario files and the built-in scenario catalog.

A scenario declares two factors (dimension, metric formula or named preset,
signature, domain box, coordinate names), warp formulas over the product
coordinates, optional deck generators (coordinate formulas with declared
inverses), curves (parametric formulas or Catmull-Rom polylines), holonomy
loop words and expectations.  Files are JSON; unknown keys are rejected with
their path, and syntax errors carry line/column positions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import fixtures as fx
from . import productgeo as pg
from . import quotient as qt
from . import transport as tp
from .chartkit import MetricField, ScalarField, Signature
from .errors import ScenarioError
from .expr import compile_expr

_PRESET_METRICS = {
    "euclidean": lambda dim, box: MetricField.euclidean(dim, domain_box=box),
    "minkowski": lambda dim, box: MetricField.constant(
        np.diag([-1.0] + [1.0] * (dim - 1)), domain_box=box, name="minkowski"),
}


@dataclass
class ScenarioContext:
    """A scenario resolved into live model objects."""

    name: str
    dtp: pg.DoublyTwistedProduct
    model: Optional[qt.QuotientModel] = None
    curves: dict = field(default_factory=dict)
    holonomy_loops: dict = field(default_factory=dict)
    basepoint: Optional[np.ndarray] = None
    expect: dict = field(default_factory=dict)
    coords: tuple = ()

    def base(self) -> np.ndarray:
        if self.basepoint is not None:
            return self.basepoint
        box = (self.model.fundamental_box if self.model is not None
               else self.dtp.domain_box)
        mid = 0.5 * (np.maximum(box[:, 0], -10.0) + np.minimum(box[:, 1], 10.0))
        return mid


# ---------------------------------------------------------------------------
# strict-keys helpers

def _check_keys(obj: dict, allowed: set, path: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"{path}: unknown keys {sorted(unknown)} (allowed: {sorted(allowed)})")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScenarioError(f"{path}: missing required key {key!r}")
    return obj[key]


# ---------------------------------------------------------------------------
# factor / warp / generator builders

def _build_factor(spec: dict, path: str) -> tuple[pg.FactorManifold, list]:
    _check_keys(spec, {"name", "dim", "coords", "metric", "signature", "box"}, path)
    name = str(_require(spec, "name", path))
    dim = int(_require(spec, "dim", path))
    coords = list(_require(spec, "coords", path))
    if len(coords) != dim:
        raise ScenarioError(f"{path}: {dim} coordinates expected, got {coords}")
    box = np.asarray(_require(spec, "box", path), dtype=float)
    if box.shape != (dim, 2):
        raise ScenarioError(f"{path}: box must be {dim} [lo, hi] pairs")
    metric_spec = _require(spec, "metric", path)
    if isinstance(metric_spec, str):
        if metric_spec not in _PRESET_METRICS:
            raise ScenarioError(f"{path}: unknown metric preset {metric_spec!r} "
                                f"(available: {sorted(_PRESET_METRICS)})")
        metric = _PRESET_METRICS[metric_spec](dim, box)
    else:
        rows = metric_spec
        if len(rows) != dim or any(len(r) != dim for r in rows):
            raise ScenarioError(f"{path}: metric formula matrix must be {dim}x{dim}")
        entries = [[compile_expr(str(rows[i][j]), coords) for j in range(dim)]
                   for i in range(dim)]
        sig = spec.get("signature")
        if sig is None:
            raise ScenarioError(f"{path}: formula metrics need an explicit signature")

        def ev(x, _e=entries, _n=dim):
            return np.array([[_e[i][j](x) for j in range(_n)] for i in range(_n)])

        metric = MetricField(dim, ev, Signature(sig), domain_box=box, name=name)
    return pg.FactorManifold(name, dim, metric, box), coords


def _build_warp(formula: str, coords: list, dependency: pg.Dependency, path: str) -> pg.WarpFn:
    fn = compile_expr(formula, coords)
    return pg.WarpFn(ScalarField(lambda c, _f=fn: float(_f(c)), name=formula),
                     dependency)


def _build_factor_map(fwd: list, inv: list, coords: list, path: str) -> qt.FactorMap:
    if len(fwd) != len(coords) or len(inv) != len(coords):
        raise ScenarioError(f"{path}: map formulas must have one entry per coordinate")
    fs = [compile_expr(str(s), coords) for s in fwd]
    gs = [compile_expr(str(s), coords) for s in inv]
    return qt.FactorMap(
        apply=lambda x, _fs=fs: np.array([f(x) for f in _fs]),
        inverse=lambda x, _gs=gs: np.array([g(x) for g in _gs]),
    )


def _build_curve(spec: dict, n: int, path: str) -> tp.PiecewiseCurve:
    _check_keys(spec, {"formula", "polyline", "breaks"}, path)
    if "formula" in spec:
        comps = [compile_expr(str(s), ["t"]) for s in spec["formula"]]
        if len(comps) != n:
            raise ScenarioError(f"{path}: curve formula needs {n} components")
        return tp.PiecewiseCurve.from_function(
            lambda t, _c=comps: np.array([f([t]) for f in _c]),
            breaks=spec.get("breaks", ()))
    if "polyline" in spec:
        pts = [np.asarray(p, dtype=float) for p in spec["polyline"]]
        if any(p.shape != (n,) for p in pts):
            raise ScenarioError(f"{path}: polyline points must have {n} coordinates")
        return tp.PiecewiseCurve.catmull_rom(pts)
    raise ScenarioError(f"{path}: curve needs 'formula' or 'polyline'")


_DEPENDENCIES = {d.value: d for d in pg.Dependency}

_TOP_KEYS = {"name", "factors", "warps", "generators", "fundamental_box", "ident_tol",
             "word_bound", "curves", "holonomy_loops", "basepoint", "expect"}
_WARP_KEYS = {"lam1", "lam2", "lam1_dependency", "lam2_dependency"}
_GEN_KEYS = {"name", "phi", "phi_inv", "psi", "psi_inv", "c1", "c2", "homothety"}


def parse_scenario(data: dict, name_hint: str = "") -> ScenarioContext:
    if not isinstance(data, dict):
        raise ScenarioError("scenario root must be a JSON object")
    _check_keys(data, _TOP_KEYS, "scenario")
    name = str(data.get("name", name_hint or "scenario"))
    factors = _require(data, "factors", "scenario")
    if len(factors) != 2:
        raise ScenarioError("scenario: exactly two factors required")
    f1, coords1 = _build_factor(factors[0], "factors[0]")
    f2, coords2 = _build_factor(factors[1], "factors[1]")
    coords = coords1 + coords2
    if len(set(coords)) != len(coords):
        raise ScenarioError("scenario: coordinate names must be unique across factors")

    warps = _require(data, "warps", "scenario")
    _check_keys(warps, _WARP_KEYS, "warps")
    dep1 = _DEPENDENCIES.get(warps.get("lam1_dependency", "on-product"))
    dep2 = _DEPENDENCIES.get(warps.get("lam2_dependency", "on-product"))
    if dep1 is None or dep2 is None:
        raise ScenarioError(f"warps: dependency must be one of {sorted(_DEPENDENCIES)}")
    lam1 = _build_warp(str(_require(warps, "lam1", "warps")), coords, dep1, "warps.lam1")
    lam2 = _build_warp(str(_require(warps, "lam2", "warps")), coords, dep2, "warps.lam2")
    dtp = pg.assemble(f1, f2, lam1, lam2)

    model = None
    if data.get("generators"):
        gens = []
        for k, gspec in enumerate(data["generators"]):
            path = f"generators[{k}]"
            _check_keys(gspec, _GEN_KEYS, path)
            gens.append(qt.DeckGenerator(
                name=str(_require(gspec, "name", path)),
                phi=_build_factor_map(_require(gspec, "phi", path),
                                      _require(gspec, "phi_inv", path), coords1, path),
                psi=_build_factor_map(_require(gspec, "psi", path),
                                      _require(gspec, "psi_inv", path), coords2, path),
                c1=float(gspec.get("c1", 1.0)),
                c2=float(gspec.get("c2", 1.0)),
                homothety=bool(gspec.get("homothety", True)),
            ))
        box = _require(data, "fundamental_box", "scenario")
        model = qt.QuotientModel(dtp, gens, box,
                                 ident_tol=float(data.get("ident_tol", qt.DEFAULT_IDENT_TOL)),
                                 word_bound=int(data.get("word_bound", qt.DEFAULT_WORD_BOUND)))

    curves = {}
    for cname, cspec in (data.get("curves") or {}).items():
        curves[cname] = _build_curve(cspec, dtp.n, f"curves.{cname}")

    loops = {}
    for key, words in (data.get("holonomy_loops") or {}).items():
        if key not in ("1", "2", 1, 2):
            raise ScenarioError("holonomy_loops: keys must be foliation indices 1 or 2")
        loops[int(key)] = [tuple((str(g), int(s)) for g, s in word) for word in words]

    basepoint = None
    if data.get("basepoint") is not None:
        basepoint = np.asarray(data["basepoint"], dtype=float)
        if basepoint.shape != (dtp.n,):
            raise ScenarioError(f"basepoint must have {dtp.n} coordinates")

    return ScenarioContext(name=name, dtp=dtp, model=model, curves=curves,
                           holonomy_loops=loops, basepoint=basepoint,
                           expect=dict(data.get("expect") or {}), coords=tuple(coords))


def load_scenario_file(path) -> ScenarioContext:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_scenario(data, name_hint=path.stem)


# ---------------------------------------------------------------------------
# built-in scenarios

def _builtin_mobius(seed: int) -> ScenarioContext:
    model = fx.mobius_model()
    return ScenarioContext(
        name="mobius", dtp=model.dtp, model=model,
        holonomy_loops=fx.HOLONOMY_LOOPS["mobius"],
        basepoint=np.array([0.0, 0.0]),
        expect={"classification": "direct-product",
                "holonomy": {"1": [[[-1.0]]]},
                "intersections": 1,
                "verdict": "obstructed", "verdict_reason": "nontrivial-holonomy"})


def _builtin_flat_torus(seed: int) -> ScenarioContext:
    model = fx.flat_torus_model()
    return ScenarioContext(
        name="flat-torus", dtp=model.dtp, model=model,
        holonomy_loops=fx.HOLONOMY_LOOPS["flat-torus"],
        basepoint=np.array([0.0, 0.0]),
        expect={"classification": "direct-product",
                "holonomy": {"1": [[[1.0]]], "2": [[[1.0]]]},
                "intersections": 1,
                "verdict": "global-doubly-warped-product"})


def _builtin_skewed_torus(seed: int) -> ScenarioContext:
    model = fx.skewed_torus_model()
    return ScenarioContext(
        name="skewed-torus", dtp=model.dtp, model=model,
        holonomy_loops=fx.HOLONOMY_LOOPS["skewed-torus"],
        basepoint=np.array([0.0, 0.0]),
        expect={"classification": "direct-product",
                "holonomy": {"1": [[[1.0]]], "2": [[[1.0]]]},
                "intersections": 2,
                "verdict": "obstructed", "verdict_reason": "multiple-intersections"})


def _builtin_example1(seed: int) -> ScenarioContext:
    model = fx.example1_model()
    return ScenarioContext(
        name="example1-twisted", dtp=model.dtp, model=model,
        basepoint=np.array([0.0, 0.0]),
        expect={"classification": "twisted",
                "seam_residual_max": 1e-8,
                "leaf_closed_y": 0.0, "leaf_open_y": 1.0})


def _builtin_sphere(seed: int) -> ScenarioContext:
    return ScenarioContext(
        name="sphere-polar", dtp=fx.sphere_polar(),
        basepoint=np.array([np.pi / 2, 1.0]),
        expect={"classification": "warped", "mixed_K": 1.0, "K_tol": 1e-6})


def _builtin_hyperbolic(seed: int) -> ScenarioContext:
    return ScenarioContext(
        name="hyperbolic-polar", dtp=fx.hyperbolic_polar(),
        basepoint=np.array([1.0, 1.0]),
        expect={"classification": "warped", "mixed_K": -1.0, "K_tol": 1e-6})


def _builtin_polar_plane(seed: int) -> ScenarioContext:
    return ScenarioContext(
        name="polar-plane", dtp=fx.polar_plane(),
        basepoint=np.array([2.0, 0.5]),
        expect={"classification": "warped", "mixed_K": 0.0, "K_tol": 1e-7})


def _builtin_lorentz(seed: int) -> ScenarioContext:
    return ScenarioContext(
        name="lorentz-direct", dtp=fx.lorentz_direct(),
        basepoint=np.array([0.0, 0.0, 0.0]),
        expect={"classification": "direct-product", "lightlike_zero": True})


def _builtin_random_dtp(seed: int) -> ScenarioContext:
    return ScenarioContext(
        name="random-dtp", dtp=fx.random_doubly_twisted(seed),
        expect={"classification": "doubly-twisted"})


BUILTIN_SCENARIOS = {
    "mobius": _builtin_mobius,
    "flat-torus": _builtin_flat_torus,
    "skewed-torus": _builtin_skewed_torus,
    "example1-twisted": _builtin_example1,
    "sphere-polar": _builtin_sphere,
    "hyperbolic-polar": _builtin_hyperbolic,
    "polar-plane": _builtin_polar_plane,
    "lorentz-direct": _builtin_lorentz,
    "random-dtp": _builtin_random_dtp,
}


def list_scenarios() -> list[str]:
    return sorted(BUILTIN_SCENARIOS)


def resolve_scenario(ref: str, seed: int = 0) -> ScenarioContext:
    """Look up a built-in by name, else load a scenario file from a path."""
    if ref in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[ref](seed)
    if Path(ref).exists():
        return load_scenario_file(ref)
    raise ScenarioError(
        f"{ref!r} is neither a built-in scenario ({', '.join(list_scenarios())}) "
        f"nor an existing file")
