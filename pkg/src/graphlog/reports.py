"""Deterministic JSON for reports: 17 significant digits, non-finite floats as null."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .calculus import FieldPair, field_to_dict
from .energy import ProblemSpec
from .graph import GraphInstance

__all__ = ["dumps", "write_json", "spec_to_dict", "pair_to_dict", "solve_report_to_dict", "sweep_to_dict"]


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    if x == int(x) and abs(x) < 1e16:
        return format(x, ".1f")
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, frozenset, set)):
        seq = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        if not seq:
            return "[]"
        if all(isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool) for x in seq):
            return "[" + ", ".join(_encode(x, indent, level + 1) for x in seq) + "]"
        items = [pad + _encode(x, indent, level + 1) for x in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def spec_to_dict(g: GraphInstance, spec: ProblemSpec) -> dict:
    return {
        "p": spec.p,
        "variant": spec.variant,
        "lambda": spec.lam,
        "omega_a": sorted(g.ids[x] for x in spec.omega_a),
        "omega_b": sorted(g.ids[x] for x in spec.omega_b),
    }


def pair_to_dict(g: GraphInstance, fp: FieldPair | None):
    if fp is None:
        return None
    return {"u": field_to_dict(g, fp.u), "v": field_to_dict(g, fp.v)}


def solve_report_to_dict(g: GraphInstance, rep) -> dict:
    return {
        "method": rep.method,
        "spec": spec_to_dict(g, rep.spec) if rep.spec is not None else None,
        "converged": rep.converged,
        "energy": rep.energy,
        "nehari_defect": rep.nehari_defect,
        "residual_sup": rep.residual_sup,
        "coupling_B": rep.coupling_B,
        "iterations": rep.iterations,
        "winner_seed": rep.winner,
        "seed_results": list(rep.seed_results),
        "solution": pair_to_dict(g, rep.best),
    }


def sweep_to_dict(g: GraphInstance, sw) -> dict:
    out = {
        "lambdas": sw.lambdas,
        "d_lambda": sw.d_lambda,
        "d_omega": sw.d_omega,
        "omega_converged": sw.omega_converged,
        "mass_out": sw.mass_out,
        "penalty_mass": sw.penalty_mass,
        "residual_sup": sw.residual_sup,
        "converged": sw.converged,
        "errors": dict(sw.errors),
        "omega_solution": pair_to_dict(g, sw.omega_solution),
    }
    if sw.solutions is not None:
        out["solutions"] = [pair_to_dict(g, fp) for fp in sw.solutions]
    return out
