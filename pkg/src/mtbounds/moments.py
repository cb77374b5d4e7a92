"""Moment tables: choice probabilities and outcome moments per cell, either
computed from microdata or loaded from a structured file."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

SCHEMA_VERSION = 1


class MomentError(ValueError):
    pass


def _canon(v):
    """Canonical support value: lists become tuples (factored instruments),
    numbers stay as given."""
    if isinstance(v, list):
        return tuple(_canon(u) for u in v)
    return v


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(u) for u in v]
    return v


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass(eq=False)
class MomentTable:
    treatments: tuple
    instruments: tuple
    covariates: tuple
    P: dict   # (d, z, x) -> P(D=d | Z=z, X=x)
    E: dict   # (d, z, x) -> E[Y 1{D=d} | Z=z, X=x]
    p_x: dict
    p_xz: dict

    def p_d(self, d) -> float:
        return sum(self.p_xz[(x, z)] * self.P[(d, z, x)]
                   for x in self.covariates for z in self.instruments)

    def validate(self) -> list[str]:
        errs = []
        for z in self.instruments:
            for x in self.covariates:
                tot = 0.0
                for d in self.treatments:
                    p = self.P.get((d, z, x))
                    if p is None:
                        errs.append(f"missing P for (d={d}, z={z}, x={x})")
                        continue
                    if not -1e-12 <= p <= 1.0 + 1e-12:
                        errs.append(f"P(D={d}|z={z},x={x}) = {p} outside [0,1]")
                    tot += p
                if abs(tot - 1.0) > 1e-9:
                    errs.append(f"choice probabilities sum to {tot} at (z={z}, x={x})")
                for d in self.treatments:
                    if (d, z, x) not in self.E:
                        errs.append(f"missing E for (d={d}, z={z}, x={x})")
        if abs(sum(self.p_x.values()) - 1.0) > 1e-9:
            errs.append(f"covariate weights sum to {sum(self.p_x.values())}")
        for x in self.covariates:
            sx = sum(self.p_xz.get((x, z), 0.0) for z in self.instruments)
            if abs(sx - self.p_x.get(x, 0.0)) > 1e-9:
                errs.append(f"cell weights for x={x} sum to {sx}, "
                            f"expected P(X=x) = {self.p_x.get(x)}")
        return errs

    def to_json(self) -> str:
        cells = []
        for x in self.covariates:
            for z in self.instruments:
                for d in self.treatments:
                    cells.append({"d": _jsonable(d), "z": _jsonable(z), "x": _jsonable(x),
                                  "p": _fmt(self.P[(d, z, x)]),
                                  "e": _fmt(self.E[(d, z, x)])})
        weights = [{"x": _jsonable(x), "z": _jsonable(z),
                    "w": _fmt(self.p_xz[(x, z)])}
                   for x in self.covariates for z in self.instruments]
        doc = {
            "schema_version": SCHEMA_VERSION,
            "treatments": [_jsonable(d) for d in self.treatments],
            "instruments": [_jsonable(z) for z in self.instruments],
            "covariates": [_jsonable(x) for x in self.covariates],
            "cells": cells,
            "weights": weights,
        }
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MomentTable":
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise MomentError(f"unsupported schema_version {doc.get('schema_version')}")
        treatments = tuple(_canon(d) for d in doc["treatments"])
        instruments = tuple(_canon(z) for z in doc["instruments"])
        covariates = tuple(_canon(x) for x in doc["covariates"])
        P, E = {}, {}
        for cell in doc["cells"]:
            key = (_canon(cell["d"]), _canon(cell["z"]), _canon(cell["x"]))
            P[key] = float(cell["p"])
            E[key] = float(cell["e"])
        p_xz = {}
        for w in doc["weights"]:
            p_xz[(_canon(w["x"]), _canon(w["z"]))] = float(w["w"])
        p_x = {x: sum(p_xz[(x, z)] for z in instruments) for x in covariates}
        return cls(treatments, instruments, covariates, P, E, p_x, p_xz)


def _parse_value(s: str):
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        try:
            return float(s)
        except ValueError:
            return s


def moments_from_microdata(path) -> MomentTable:
    """Empirical moment table from a CSV with header columns y, d, z
    (or z1 and z2 for factored instruments) and optionally x.

    Per-cell sums use math.fsum before any division, so tables are exact
    functions of the data regardless of row order.
    """
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        cols = [c.strip().lower() for c in reader.fieldnames or []]
        if "y" not in cols or "d" not in cols:
            raise MomentError("microdata needs 'y' and 'd' columns")
        factored = "z1" in cols and "z2" in cols
        if not factored and "z" not in cols:
            raise MomentError("microdata needs a 'z' column (or 'z1' and 'z2')")
        has_x = "x" in cols
        rows = []
        for i, rec in enumerate(reader, start=2):
            rec = {k.strip().lower(): v for k, v in rec.items()}
            try:
                y = float(rec["y"])
                d = _parse_value(rec["d"])
                z = ((_parse_value(rec["z1"]), _parse_value(rec["z2"]))
                     if factored else _parse_value(rec["z"]))
                x = _parse_value(rec["x"]) if has_x else 0
            except (ValueError, KeyError, TypeError) as e:
                raise MomentError(f"bad value on row {i}: {e}") from None
            rows.append((y, d, z, x))
    if not rows:
        raise MomentError("no data rows")

    treatments = tuple(sorted({r[1] for r in rows}, key=str))
    instruments = tuple(sorted({r[2] for r in rows}, key=str))
    covariates = tuple(sorted({r[3] for r in rows}, key=str))

    counts = {}
    ysums = {}
    cell_n = {}
    for y, d, z, x in rows:
        counts[(d, z, x)] = counts.get((d, z, x), 0) + 1
        ysums.setdefault((d, z, x), []).append(y)
        cell_n[(z, x)] = cell_n.get((z, x), 0) + 1
    missing = [(z, x) for z in instruments for x in covariates
               if (z, x) not in cell_n]
    if missing:
        raise MomentError(f"empty instrument/covariate cells: {missing}")

    n = len(rows)
    P, E = {}, {}
    for z in instruments:
        for x in covariates:
            nzx = cell_n[(z, x)]
            for d in treatments:
                P[(d, z, x)] = counts.get((d, z, x), 0) / nzx
                E[(d, z, x)] = math.fsum(ysums.get((d, z, x), [])) / nzx
    p_xz = {(x, z): cell_n[(z, x)] / n for z in instruments for x in covariates}
    p_x = {x: sum(p_xz[(x, z)] for z in instruments) for x in covariates}
    return MomentTable(treatments, instruments, covariates, P, E, p_x, p_xz)
