"""Plan execution, classification and canonical report serialization."""
from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import replace
from typing import Any

import numpy as np

from . import __version__
from .config import Config, _filled_legs, dumps_config, resolve_hamiltonian
from .diagnostics import (DiagnosticsError, DualPairDiagram, PreimageError,
                          check_poisson_map, dimension_check, leaf_correspondence_check,
                          lw_scan, pushforward_bivector, rank_scan, total_space_report)
from .flows import FlowError, fiber_coverage_probe, integrate_hamiltonian
from .funcspace import howe_truncated_check
from .symplin import RANK_TOL, numerical_rank

__all__ = ["REPORT_VERSION", "CLASSIFICATIONS", "run_plan", "canonical_json", "config_digest",
           "InfrastructureError"]

REPORT_VERSION = 1
CLASSIFICATIONS = ("LW+Howe-consistent", "LW-only-pointwise", "Howe-consistent-not-LW",
                   "neither", "invalid-diagram")
MAX_LISTED = 5

STANDING_NOTES = (
    "image sampled only: surjectivity of the legs is assumed, not verified",
    "openness of the legs is not checked",
    "fiber connectivity is declared metadata, never computed",
    "truncated Howe checks are evidence at the given truncation, not proof",
)


class InfrastructureError(RuntimeError):
    """A check could not run at all (as opposed to returning a failing verdict)."""


# --------------------------------------------------------------------------
# Canonical JSON

def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return "%.17g" % v


def canonical_json(obj: Any, indent: int = 2) -> str:
    """Sorted keys, floats with 17 significant digits, fixed layout."""
    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _fmt_float(float(o))
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=False)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(o[k], level + 1)}"
                     for k in sorted(o, key=str)]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple, np.ndarray)):
            seq = list(o)
            if not seq:
                return "[]"
            if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
                return "[" + ", ".join(enc(v, level + 1) for v in seq) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in seq) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def config_digest(config: Config) -> str:
    return hashlib.sha256(dumps_config(config).encode("utf-8")).hexdigest()


def _pt(p) -> list[float]:
    return [float(v) for v in p]


def _verdict(ok: bool | None) -> str:
    return "inconclusive" if ok is None else ("pass" if ok else "fail")


# --------------------------------------------------------------------------
# Individual checks

def _total_space(config: Config) -> dict:
    rep = total_space_report(config.diagram.bivector, config.plan.grid)
    return {"check": "total_space", "verdict": _verdict(rep.antisymmetric and rep.nondegenerate),
            "antisymmetric": rep.antisymmetric, "nondegenerate": rep.nondegenerate,
            "min_abs_det": rep.min_abs_det, "worst_point": _pt(rep.worst_point or [])}


def _rank_scan(config: Config, tol: float) -> dict:
    grid = config.plan.grid_for("rank_scan")
    legs = {}
    for side in ("left", "right"):
        rep = rank_scan(getattr(config.diagram, side).map, grid, tol)
        legs[side] = {"histogram": {str(r): {"count": h["count"], "witness": h["witness"]}
                                    for r, h in rep.histogram.items()},
                      "constant_rank": rep.constant_rank, "submersion": rep.submersion,
                      "target_dim": rep.target_dim}
    ok = all(v["submersion"] for v in legs.values())
    return {"check": "rank_scan", "verdict": _verdict(ok), "legs": legs}


def _pushforward(config: Config, tol: float, legs_to_fill: list[str]) -> tuple[dict, dict]:
    grid = config.plan.grid_for("pushforward")
    p = config.plan.checks.get("pushforward", {"fiber_samples": 4, "targets": 8})
    block: dict = {"check": "pushforward", "legs": {}}
    filled = {}
    verdicts = []
    for side in legs_to_fill:
        leg = getattr(config.diagram, side)
        try:
            rep = pushforward_bivector(leg.map, config.diagram.bivector, grid,
                                       p["fiber_samples"], p["targets"], tol)
        except PreimageError as exc:
            block["legs"][side] = {"verdict": "inconclusive", "error": str(exc)}
            verdicts.append(None)
            continue
        entry = {"verdict": _verdict(rep.projectable), "projectable": rep.projectable,
                 "max_fiber_variation": rep.max_fiber_variation, "scale": rep.scale,
                 "submersive_on_grid": rep.rank_ok, "unresolved_targets": rep.unresolved_targets,
                 "fitted": rep.fitted, "notes": list(rep.notes)}
        if rep.bivector is not None:
            y = rep.table[0]["target"]
            entry["rank_at_sample"] = numerical_rank(rep.bivector(y), tol)
            entry["sample_target"] = y
            if leg.bivector is None:
                filled[side] = rep.bivector
        elif rep.projectable:
            entry["notes"].append("projectable but entries are not affine; no expression fitted")
        block["legs"][side] = entry
        verdicts.append(rep.projectable)
    if any(v is False for v in verdicts):
        block["verdict"] = "fail"
    elif any(v is None for v in verdicts):
        block["verdict"] = "inconclusive"
    else:
        block["verdict"] = "pass"
    return block, filled


def _poisson_maps(d: DualPairDiagram, config: Config) -> dict:
    grid = config.plan.grid_for("poisson_maps")
    legs, oks = {}, []
    for side in ("left", "right"):
        leg = getattr(d, side)
        if leg.bivector is None:
            legs[side] = {"verdict": "inconclusive", "reason": "target bivector unavailable"}
            oks.append(None)
            continue
        rep = check_poisson_map(leg.map, d.bivector, leg.bivector, grid)
        legs[side] = {"verdict": _verdict(rep.passed), "max_residual": rep.max_residual,
                      "worst_point": rep.worst_point, "scale": rep.scale}
        oks.append(rep.passed)
    ok = False if False in oks else (None if None in oks else True)
    return {"check": "poisson_maps", "verdict": _verdict(ok), "legs": legs}


def _lw_scan(d: DualPairDiagram, config: Config, tol: float) -> dict:
    verdicts = lw_scan(d, config.plan.grid_for("lw_scan"), tol)
    swapped = lw_scan(d.swapped(), config.plan.grid_for("lw_scan"), tol)
    dims = Counter((v.dim_K1, v.dim_K2, v.dim_K1_omega, v.passed) for v in verdicts)
    fails = [v for v in verdicts if not v.passed]
    passed = len(verdicts) - len(fails)
    return {
        "check": "lw_scan", "verdict": _verdict(not fails),
        "points": len(verdicts), "passed": passed,
        "symmetric": all(a.passed == b.passed for a, b in zip(verdicts, swapped)),
        "max_angle_at_pass": max([v.max_angle for v in verdicts if v.passed], default=0.0),
        "dimension_classes": [
            {"dim_K1": k1, "dim_K2": k2, "dim_K1_omega": k1w, "passed": ok, "count": n}
            for (k1, k2, k1w, ok), n in sorted(dims.items())],
        "failing_points": [{"point": v.point, "dim_K1": v.dim_K1, "dim_K2": v.dim_K2,
                            "dim_K1_omega": v.dim_K1_omega, "max_angle": v.max_angle}
                           for v in fails[:MAX_LISTED]],
    }


def _howe(d: DualPairDiagram, config: Config) -> dict:
    p = config.plan.checks["howe"]
    rep = howe_truncated_check(d.left.map, d.right.map, d.bivector, p["space"],
                               p["left_target"], p["right_target"])
    trunc = {k: {"max_frequency": s.max_frequency, "max_degree": s.max_degree,
                 "total_degree": s.total_degree, "per_coordinate": dict(s.per_coordinate)}
             for k, s in (("space", p["space"]), ("left_target", p["left_target"]),
                          ("right_target", p["right_target"]))}
    return {
        "check": "howe", "verdict": _verdict(rep.howe_consistent),
        "truncation": trunc, "space_dim": rep.space_dim, "dims": rep.dims,
        "inclusions": {k: {"holds": r.holds, "max_angle": r.max_angle, "dims": list(r.dims),
                           "witnesses": r.witnesses} for k, r in rep.inclusions.items()},
        "escaped": rep.escaped, "resonance_margin": rep.resonance, "notes": rep.notes,
    }


def _leaf(d: DualPairDiagram, config: Config, tol: float) -> dict:
    pts = config.plan.grid_for("leaf").sample(d.total)
    classes: Counter = Counter()
    witness = {}
    for m in pts:
        r = leaf_correspondence_check(d, m, None, tol)
        key = (r.image_dim, r.leaf_rank)
        classes[key] += 1
        witness.setdefault(key, r.point)
    ok = all(a == b for a, b in classes)
    block = {"check": "leaf", "verdict": _verdict(ok), "points": len(pts),
             "classes": [{"image_dim": a, "leaf_rank": b, "count": n, "witness": witness[(a, b)]}
                         for (a, b), n in sorted(classes.items())],
             "caveat": "necessary pointwise condition only"}
    if ok and "no" in (d.left.fibers_connected, d.right.fibers_connected):
        block["caveat"] += "; declared disconnected fibers can break the correspondence globally"
    return block


def _flow_probe(config: Config) -> dict:
    p = config.plan.checks["flow_probe"]
    h = resolve_hamiltonian(config, p["hamiltonian"])
    try:
        traj = integrate_hamiltonian(h, config.diagram.bivector, p["start"], p["T"], p["dt"])
    except FlowError as exc:
        return {"check": "flow_probe", "verdict": "inconclusive", "error": str(exc)}
    cov = fiber_coverage_probe(traj, p["fiber_coords"], p["resolution"])
    ok = cov.covered_fraction >= p["min_covered"]
    return {"check": "flow_probe", "verdict": _verdict(ok), "hamiltonian": traj.hamiltonian,
            "T": p["T"], "dt": p["dt"], "samples": int(traj.points.shape[0]),
            "energy_drift": traj.drift, "windings": [int(w) for w in traj.windings],
            "covered_fraction": cov.covered_fraction, "max_gap_fraction": cov.max_gap_fraction,
            "resolution": cov.resolution, "min_covered": p["min_covered"]}


# --------------------------------------------------------------------------
# Classification

def _classify(blocks: dict, d: DualPairDiagram) -> tuple[str, str, list[str]]:
    notes: list[str] = []
    invalid = []
    if blocks["total_space"]["verdict"] != "pass":
        invalid.append("total-space bivector is not symplectic on the grid")
    pm = blocks.get("poisson_maps")
    if pm is not None and pm["verdict"] == "fail":
        bad = [s for s, v in pm["legs"].items() if v["verdict"] == "fail"]
        invalid.append(f"{' and '.join(bad)} leg not a Poisson map")
    pf = blocks.get("pushforward")
    if pf is not None:
        for side, v in pf["legs"].items():
            if getattr(d, side).bivector is None and v.get("projectable") is False:
                invalid.append(f"{side} target structure not projectable")
    if invalid:
        return "invalid-diagram", "invalid diagram: " + "; ".join(invalid), notes

    lw_block, rank_block = blocks.get("lw_scan"), blocks.get("rank_scan")
    if lw_block is None or rank_block is None:
        lw = False
        notes.append("LW condition not evaluated (needs lw_scan and rank_scan)")
    else:
        lw = lw_block["verdict"] == "pass" and rank_block["verdict"] == "pass"
    howe_block = blocks.get("howe")
    howe = howe_block is not None and howe_block["verdict"] == "pass"
    if howe_block is None:
        notes.append("Howe condition not evaluated")

    parts = []
    if lw:
        parts.append("LW")
    elif lw_block is None or rank_block is None:
        parts.append("LW not evaluated")
    else:
        reasons = []
        if lw_block is not None and lw_block["verdict"] != "pass":
            reasons.append(f"LW fails at {lw_block['points'] - lw_block['passed']}"
                           f"/{lw_block['points']} points")
        if rank_block is not None:
            for side, v in rank_block["legs"].items():
                if not v["constant_rank"]:
                    reasons.append(f"{side} leg not of constant rank "
                                   f"(ranks {sorted(int(r) for r in v['histogram'])})")
                elif not v["submersion"]:
                    reasons.append(f"{side} leg not a submersion")
        parts.append("not LW" + (f" ({', '.join(reasons)})" if reasons else ""))
    if howe_block is not None:
        if howe:
            parts.insert(0 if not lw else 1, "Howe-consistent at truncation (" +
                         _trunc_label(howe_block["truncation"]) + ")")
        else:
            wit = next((r["witnesses"][0] for r in howe_block["inclusions"].values()
                        if not r["holds"] and r["witnesses"]), None)
            parts.append("not Howe" + (f" (witness {wit})" if wit else ""))
    else:
        parts.append("Howe not evaluated")
    summary = ", ".join(parts) if not (lw and howe) else " and ".join(parts)

    extra = []
    dim = blocks.get("dimension")
    if dim is not None and dim["verdict"] != "pass":
        extra.append("dimension check fails "
                     f"({dim['dim_P1']} + {dim['dim_P2']} != {dim['dim_M']})")
    leaf = blocks.get("leaf")
    if leaf is not None and leaf["verdict"] != "pass":
        bad = next(c for c in leaf["classes"] if c["image_dim"] != c["leaf_rank"])
        extra.append(f"leaf correspondence inconsistent ({bad['image_dim']} vs "
                     f"{bad['leaf_rank']})")
    for side in ("left", "right"):
        if getattr(d, side).fibers_connected == "no":
            extra.append(f"fibers of {side} leg declared disconnected")
    if extra:
        summary += "; " + "; ".join(extra)

    if lw and howe:
        cls = "LW+Howe-consistent"
    elif lw:
        cls = "LW-only-pointwise"
    elif howe:
        cls = "Howe-consistent-not-LW"
    else:
        cls = "neither"
    return cls, summary, notes


def _trunc_label(t: dict) -> str:
    s = t["space"]
    bits = []
    if s["max_frequency"]:
        bits.append(f"K={s['max_frequency']}")
    if s["max_degree"]:
        bits.append(f"D={s['max_degree']}")
    if s["total_degree"] is not None:
        bits.append(f"total degree {s['total_degree']}")
    for k, v in sorted(s["per_coordinate"].items()):
        bits.append(f"{k}<={v}")
    return ", ".join(bits) or "constants only"


# --------------------------------------------------------------------------
# Driver

def run_plan(config: Config, rank_tol: float | None = None) -> dict:
    """Run every enabled check in the fixed order and build the report document.

    Failing checks are verdicts; only a check that cannot run at all raises
    :class:`InfrastructureError`.
    """
    tol = RANK_TOL if rank_tol is None else float(rank_tol)
    plan = config.plan
    d = config.diagram
    blocks: dict[str, dict] = {}
    try:
        blocks["total_space"] = _total_space(config)
        degenerate = blocks["total_space"]["verdict"] != "pass"
        if "dimension" in plan.checks:
            dc = dimension_check(d)
            blocks["dimension"] = {"check": "dimension", "verdict": _verdict(dc["passed"]),
                                   **{k: v for k, v in dc.items() if k != "passed"}}
        if "rank_scan" in plan.checks:
            blocks["rank_scan"] = _rank_scan(config, tol)
        to_fill = _filled_legs(d, plan.checks)
        if to_fill:
            blocks["pushforward"], filled = _pushforward(config, tol, to_fill)
            if filled:
                d = DualPairDiagram(
                    d.bivector,
                    replace(d.left, bivector=filled.get("left", d.left.bivector)),
                    replace(d.right, bivector=filled.get("right", d.right.bivector)))
        if "poisson_maps" in plan.checks:
            blocks["poisson_maps"] = _poisson_maps(d, config)
        if "lw_scan" in plan.checks and not degenerate:
            blocks["lw_scan"] = _lw_scan(d, config, tol)
        if "howe" in plan.checks:
            blocks["howe"] = _howe(d, config)
        if "leaf" in plan.checks and not degenerate:
            if d.left.bivector is None:
                blocks["leaf"] = {"check": "leaf", "verdict": "inconclusive",
                                  "reason": "left target bivector unavailable"}
            else:
                blocks["leaf"] = _leaf(d, config, tol)
        if "flow_probe" in plan.checks:
            blocks["flow_probe"] = _flow_probe(config)
    except (DiagnosticsError, FlowError, np.linalg.LinAlgError) as exc:
        raise InfrastructureError(str(exc)) from exc

    cls, summary, notes = _classify(blocks, d)
    order = ["total_space", *plan.enabled()]
    if "pushforward" in blocks and "pushforward" not in order:
        order.insert(order.index("rank_scan") + 1 if "rank_scan" in order else 2, "pushforward")
    checks = [blocks[k] for k in order if k in blocks]
    return {
        "version": REPORT_VERSION,
        "tool_version": __version__,
        "config": config.name,
        "config_digest": config_digest(config),
        "rank_tol": tol,
        "checks": checks,
        "classification": cls,
        "summary": summary,
        "notes": [*notes, *STANDING_NOTES],
    }
