"""Run configuration: parsing, validation, and assembly of engine inputs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import mtr_space, selection
from .engine import EngineError, LambdaGrid, LambdaPoint, Problem
from .moments import MomentTable, _canon
from .selection import PolicyShift, SelectionModel
from .targets import TargetSpec

SCHEMA_VERSION = 1

_FAMILY_DIMS = {"independence": None, "gaussian": 2,
                "gaussian_mixture": 2, "multinomial_latent": 3}


class ConfigError(ValueError):
    pass


def _check_keys(obj: dict, allowed, where: str):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass(eq=False)
class RunConfig:
    model_kind: str
    family: str
    target: dict
    anchor_z1: object = None
    lambda_grid: dict = field(default_factory=dict)
    restrictions: dict = field(default_factory=dict)
    basis: dict = field(default_factory=lambda: {"kind": "piecewise"})
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        doc = json.loads(text)
        _check_keys(doc, {"schema_version", "model", "family", "lambda_grid",
                          "target", "restrictions", "basis", "tolerances"}, "config")
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {doc.get('schema_version')}")
        model = doc.get("model", {})
        _check_keys(model, {"kind", "anchor_z1"}, "model")
        if "kind" not in model:
            raise ConfigError("model.kind is required")
        grid = doc.get("lambda_grid", {})
        _check_keys(grid, {"rho", "points", "anchor"}, "lambda_grid")
        target = doc.get("target")
        if not target:
            raise ConfigError("target is required")
        _check_keys(target, {"kind", "d1", "d2", "pattern", "delta1", "delta2"},
                    "target")
        restr = doc.get("restrictions", {})
        _check_keys(restr, {"bounds", "md", "cm", "um", "cs", "us"}, "restrictions")
        basis = doc.get("basis", {"kind": "piecewise"})
        _check_keys(basis, {"kind", "degrees", "grid_res"}, "basis")
        tol = doc.get("tolerances", {})
        _check_keys(tol, {"eps_feas", "merge_tol"}, "tolerances")
        return cls(model_kind=model["kind"], family=doc.get("family", "independence"),
                   target=target, anchor_z1=_canon(model.get("anchor_z1")),
                   lambda_grid=grid, restrictions=restr, basis=basis, tolerances=tol)

    # -- assembly ----------------------------------------------------------

    def build_model(self, table: MomentTable) -> SelectionModel:
        return SelectionModel(self.model_kind, table.instruments,
                              table.covariates, anchor_z1=self.anchor_z1)

    def build_grid(self) -> LambdaGrid:
        g = self.lambda_grid
        anchors = [float(a) for a in g.get("anchor", [])] or [None]
        pts = []
        if self.family == "independence":
            base = [LambdaPoint("independence")]
        elif "points" in g:
            base = [LambdaPoint(self.family,
                                weights=tuple(float(w) for w in p["weights"]),
                                rhos=tuple(float(r) for r in p["rhos"]))
                    for p in g["points"]]
        else:
            rhos = g.get("rho", [0.0])
            base = [LambdaPoint(self.family, rho=float(r)) for r in rhos]
        for a in anchors:
            for b in base:
                pts.append(LambdaPoint(b.family, b.rho, b.weights, b.rhos,
                                       anchor=a, index=len(pts)))
        return LambdaGrid(tuple(pts))

    def build_target(self) -> TargetSpec:
        t = self.target

        def shift(key):
            s = t.get(key)
            if s is None:
                return None
            _check_keys(s, {"scale", "delta"}, f"target.{key}")
            delta = {(int(e["j"]), _canon(e["z"]), _canon(e["x"])): float(e["v"])
                     for e in s.get("delta", [])}
            return PolicyShift(delta, s.get("scale", "normalized"))

        return TargetSpec(
            kind=t["kind"],
            d1=_canon(t.get("d1")), d2=_canon(t.get("d2")),
            dz=tuple((_canon(e["z"]), _canon(e["d"])) for e in t.get("pattern", [])),
            delta1=shift("delta1"), delta2=shift("delta2"))

    def build_restrictions(self) -> mtr_space.ShapeRestrictionSet:
        r = self.restrictions
        bounds = tuple(float(v) for v in r["bounds"]) if "bounds" in r else None
        return mtr_space.ShapeRestrictionSet(
            bounds=bounds,
            md=tuple((_canon(a), _canon(b)) for a, b in r.get("md", [])),
            cm={int(j): int(s) for j, s in r.get("cm", {}).items()},
            um={int(j): int(s) for j, s in r.get("um", {}).items()},
            cs=bool(r.get("cs", False)),
            us=tuple(int(j) for j in r.get("us", [])))

    def build_problem(self, table: MomentTable) -> Problem:
        model = self.build_model(table)
        return Problem(
            model=model,
            target=self.build_target(),
            restrictions=self.build_restrictions(),
            P=table.P, E=table.E, p_x=table.p_x, p_xz=table.p_xz,
            basis_kind=self.basis.get("kind", "piecewise"),
            degrees=tuple(self.basis["degrees"]) if "degrees" in self.basis else None,
            grid_res=int(self.basis.get("grid_res", 11)),
            eps_feas=float(self.tolerances.get("eps_feas", 1e-8)),
            merge_tol=float(self.tolerances.get("merge_tol", 1e-9)))


def validate(config: RunConfig, table: MomentTable) -> list[str]:
    """Aggregate human-readable validation errors; empty list means valid."""
    errs = list(table.validate())
    try:
        model = config.build_model(table)
    except (selection.SelectionError, ValueError) as e:
        errs.append(str(e))
        return errs
    if config.model_kind == selection.MULTINOMIAL and len(table.treatments) != 3:
        errs.append(f"multinomial model needs 3 treatments, table has "
                    f"{len(table.treatments)}")
    if set(table.treatments) - set(model.treatments):
        errs.append(f"table treatments {table.treatments} outside model support "
                    f"{model.treatments}")
    dim_needed = _FAMILY_DIMS.get(config.family, -1)
    if dim_needed == -1:
        errs.append(f"unknown distribution family {config.family!r}")
    elif dim_needed is not None and dim_needed != model.dim:
        errs.append(f"family {config.family} is {dim_needed}-dimensional but the "
                    f"model has dimension {model.dim}")
    if config.model_kind == selection.DOUBLE_HURDLE:
        if not all(isinstance(z, tuple) and len(z) == 2 for z in table.instruments):
            errs.append("double hurdle needs factored instruments (z1, z2)")
        if not config.lambda_grid.get("anchor"):
            errs.append("double hurdle needs an anchor grid in lambda_grid.anchor")
    try:
        config.build_grid()
    except (EngineError, KeyError, ValueError) as e:
        errs.append(f"bad lambda grid: {e}")
    try:
        spec = config.build_target()
        if spec.d1 is not None and spec.d1 not in model.treatments:
            errs.append(f"target references treatment {spec.d1}")
        if spec.d2 is not None and spec.d2 not in model.treatments:
            errs.append(f"target references treatment {spec.d2}")
        for z, d in spec.dz:
            if z not in table.instruments:
                errs.append(f"target pattern references instrument {z}")
            if d not in model.treatments:
                errs.append(f"target pattern references treatment {d}")
    except (ValueError, KeyError) as e:
        errs.append(f"bad target: {e}")
    try:
        r = config.build_restrictions()
        for j in list(r.cm) + list(r.um) + list(r.us):
            if not 0 <= j < model.dim:
                errs.append(f"restriction references dimension {j} outside the model")
    except ValueError as e:
        errs.append(f"bad restrictions: {e}")
    if config.basis.get("kind", "piecewise") not in ("piecewise", "bernstein"):
        errs.append(f"unknown basis kind {config.basis.get('kind')!r}")
    if config.family == "gaussian" and any(
            not -1.0 <= float(r) <= 1.0 for r in config.lambda_grid.get("rho", [])):
        errs.append("gaussian rho grid outside [-1, 1]")
    return errs
