"""Sweep configuration files.

The native format is a flat, typed key=value text file with one section
per sweep::

    [sweep zonal_main]
    family = zonal
    degrees = 25, 50, 100, 150, 200
    functionals = lp, kn
    p_values = 1, 4, inf
    checks = kn_l4, l1_lower, kn_lp:3
    fit = true

JSON is accepted as an alternative encoding: either ``{"sweeps": [...]}``
or a single sweep object. Unknown keys are rejected. The config hash is
the SHA-256 of the canonicalized config (sorted keys, canonical
parameter strings), so key order never affects it.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass

from .errors import UsageError
from .scaling import (
    CHECK_DEFAULT_P,
    SweepConfig,
    _fmt_param,
    check_requirements,
)


@dataclass(frozen=True)
class CheckRequest:
    """One named inequality check, with its exponent where one applies."""

    name: str
    p: float | None = None


@dataclass(frozen=True)
class SweepPlan:
    """A named sweep plus the analysis requested on top of it."""

    name: str
    sweep: SweepConfig
    checks: tuple[CheckRequest, ...] = ()
    fit: bool = True


_LIST_KEYS = {"degrees", "functionals", "p_values", "radii",
              "tube_variants", "seeds", "checks"}
_SCALAR_KEYS = {"family", "density_factor", "lp_rtol", "nodal_rtol",
                "fit", "name", "node_cap", "refine_searches",
                "search_candidates"}
_ALL_KEYS = _LIST_KEYS | _SCALAR_KEYS


def _split_list(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [part.strip() for part in str(value).split(",") if part.strip()]


def _parse_float(text: str, key: str) -> float:
    t = str(text).strip().lower()
    if t in ("inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except (TypeError, ValueError):
        raise UsageError(f"config key {key!r}: expected a number, got {text!r}")


def _parse_int(text: str, key: str) -> int:
    try:
        return int(str(text).strip())
    except (TypeError, ValueError):
        raise UsageError(f"config key {key!r}: expected an integer, got {text!r}")


def _parse_bool(text, key: str) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise UsageError(f"config key {key!r}: expected true/false, got {text!r}")


def _parse_check(token: str) -> CheckRequest:
    name, _, tail = str(token).partition(":")
    name = name.strip()
    if name not in CHECK_DEFAULT_P:
        raise UsageError(f"unknown inequality check {name!r}; choose from "
                         + ", ".join(sorted(CHECK_DEFAULT_P)))
    p = _parse_float(tail, f"checks:{name}") if tail.strip() else None
    return CheckRequest(name, p)


def _plan_from_mapping(name: str, raw: dict) -> SweepPlan:
    unknown = set(raw) - _ALL_KEYS
    if unknown:
        raise UsageError(
            f"sweep {name!r}: unknown config keys {sorted(unknown)}")
    if "family" not in raw:
        raise UsageError(f"sweep {name!r}: missing required key 'family'")
    if "degrees" not in raw:
        raise UsageError(f"sweep {name!r}: missing required key 'degrees'")
    kwargs = {
        "family": str(raw["family"]).strip().replace("-", "_"),
        "degrees": tuple(_parse_int(v, "degrees")
                         for v in _split_list(raw["degrees"])),
    }
    if "functionals" in raw:
        kwargs["functionals"] = tuple(_split_list(raw["functionals"]))
    if "p_values" in raw:
        kwargs["p_values"] = tuple(_parse_float(v, "p_values")
                                   for v in _split_list(raw["p_values"]))
    if "radii" in raw:
        kwargs["radii"] = tuple(
            v if str(v).startswith("lam^") else _parse_float(v, "radii")
            for v in _split_list(raw["radii"]))
    if "tube_variants" in raw:
        kwargs["tube_variants"] = tuple(_split_list(raw["tube_variants"]))
    if "seeds" in raw:
        kwargs["seeds"] = tuple(_parse_int(v, "seeds")
                                for v in _split_list(raw["seeds"]))
    for key in ("density_factor", "lp_rtol", "nodal_rtol"):
        if key in raw:
            kwargs[key] = _parse_float(raw[key], key)
    if "node_cap" in raw:
        kwargs["node_cap"] = _parse_int(raw["node_cap"], "node_cap")
    if "refine_searches" in raw:
        kwargs["refine_searches"] = _parse_bool(raw["refine_searches"],
                                                "refine_searches")
    if "search_candidates" in raw:
        kwargs["search_candidates"] = _parse_int(raw["search_candidates"],
                                                 "search_candidates")
    sweep = SweepConfig(**kwargs)
    checks = tuple(_parse_check(t) for t in _split_list(raw.get("checks", "")))
    fit = _parse_bool(raw.get("fit", True), "fit")
    plan = SweepPlan(name, sweep, checks, fit)
    validate_plan(plan)
    return plan


def validate_plan(plan: SweepPlan) -> None:
    """Reject plans whose checks read cells the sweep will not produce."""
    cells = set()
    for functional in plan.sweep.functionals:
        if functional == "lp":
            cells.update(("lp", _fmt_param(p)) for p in plan.sweep.p_values)
        elif functional == "ball":
            cells.update(("ball", _fmt_param(r)) for r in plan.sweep.radii)
        elif functional == "tube":
            cells.update(("tube", _fmt_param(v))
                         for v in plan.sweep.tube_variants)
        else:
            cells.add((functional, ""))
    for req in plan.checks:
        p = req.p if req.p is not None else CHECK_DEFAULT_P[req.name]
        if req.name == "ball_upper":
            needed = check_requirements(req.name, radii=plan.sweep.radii)
            if not plan.sweep.radii:
                raise UsageError(
                    f"sweep {plan.name!r}: check 'ball_upper' needs a "
                    "non-empty radii list")
        else:
            needed = check_requirements(req.name, p=p)
        missing = [cell for cell in needed if cell not in cells]
        if missing:
            parts = [f"{f} with parameter {param}" if param else f
                     for f, param in missing]
            raise UsageError(
                f"sweep {plan.name!r}: check {req.name!r} needs "
                + "; ".join(parts) + " (add them to the sweep config)")


def _plans_from_ini(text: str, source: str) -> list[SweepPlan]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise UsageError(f"config parse error: {exc}")
    plans = []
    for section in parser.sections():
        name = section[6:].strip() if section.startswith("sweep ") else section
        plans.append(_plan_from_mapping(name, dict(parser[section])))
    return plans


def _plans_from_json(text: str) -> list[SweepPlan]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config parse error: {exc}")
    if isinstance(data, dict) and "sweeps" in data:
        entries = data["sweeps"]
    elif isinstance(data, dict):
        entries = [data]
    else:
        entries = data
    if not isinstance(entries, list):
        raise UsageError("JSON config must be a sweep object or"
                         " {\"sweeps\": [...]}")
    plans = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise UsageError(f"sweep entry {i} is not an object")
        entry = dict(entry)
        name = str(entry.pop("name", f"sweep{i}"))
        plans.append(_plan_from_mapping(name, entry))
    return plans


def parse_config(text: str, source: str = "<config>") -> list[SweepPlan]:
    """Parse a config document (key=value sections, or JSON)."""
    stripped = text.lstrip()
    if source.endswith(".json") or stripped.startswith("{"):
        plans = _plans_from_json(text)
    else:
        plans = _plans_from_ini(text, source)
    if not plans:
        raise UsageError("config defines no sweeps")
    names = [p.name for p in plans]
    if len(set(names)) != len(names):
        raise UsageError(f"duplicate sweep names in config: {names}")
    return plans


def load_config(path: str) -> list[SweepPlan]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    return parse_config(text, source=path)


def canonical_config(plans) -> str:
    """Canonical JSON rendering: sorted keys, canonical parameter strings.

    Two configs that differ only in key order or number spelling map to
    the same canonical form, hence the same hash.
    """
    doc = {"sweeps": []}
    for plan in plans:
        s = plan.sweep
        doc["sweeps"].append({
            "name": plan.name,
            "family": s.family,
            "degrees": list(s.degrees),
            "functionals": list(s.functionals),
            "p_values": [_fmt_param(p) for p in s.p_values],
            "radii": [_fmt_param(r) for r in s.radii],
            "tube_variants": list(s.tube_variants),
            "seeds": list(s.seeds) if s.seeds is not None else None,
            "density_factor": s.density_factor,
            "lp_rtol": s.lp_rtol,
            "nodal_rtol": s.nodal_rtol,
            "node_cap": s.node_cap,
            "refine_searches": s.refine_searches,
            "search_candidates": s.search_candidates,
            "checks": [{"name": c.name, "p": _fmt_param(c.p) if c.p is not None else None}
                       for c in plan.checks],
            "fit": plan.fit,
        })
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(plans) -> str:
    return hashlib.sha256(canonical_config(plans).encode()).hexdigest()
