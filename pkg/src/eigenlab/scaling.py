"""Scaling laboratory: sweeps, exponent fits, inequality checks, scars.

A sweep evaluates the concentration functionals over a family of model
eigenfunctions at increasing frequency and collects one row per
(family, degree, functional, parameter) cell. On top of the table sit

* ``fit_exponent`` — least-squares power-law fits on log-log axes with a
  verdict against a reference exponent,
* ``check_inequality`` — the uniform-boundedness inequality suite, each
  check reporting its per-degree sides, the empirical constant
  max(lhs/rhs), and a stability verdict (no growth beyond 2x between
  sweep halves),
* ``scar_witness`` — the tube-plus-level-band construction for
  L^1-minimizing eigenfunctions.

Cells are independent and may run on a thread pool; failures are
recorded per cell rather than aborting the sweep, and identical configs
produce identical tables.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .eigenfunctions import (
    Eigenfunction,
    HIGHEST_WEIGHT,
    RANDOM_HARMONIC,
    TORUS_RANDOM,
    ZONAL,
    highest_weight,
    random_harmonic,
    torus_eigenfunction,
    zonal,
)
from .errors import EigenlabError, UsageError
from .geometry import DEFAULT_NODE_CAP, SPHERE, TORUS, Geodesic, Tube
from .nodal import level_band_volume, nodal_length
from .norms import kn_norm, lp_norm, sup_ball_mass, sup_norm, sup_restriction_norm, tube_mass

FAMILIES = (ZONAL, HIGHEST_WEIGHT, RANDOM_HARMONIC, TORUS_RANDOM)
FUNCTIONALS = ("lp", "sup_restriction", "kn", "ball", "nodal", "tube")


# ------------------------------------------------------------ sigma(p, n)

def sigma(p: float, n: int = 2) -> float:
    """Sharp L^p growth exponent: the larger of the tube branch
    (n-1)/2*(1/2-1/p) and the point branch n*(1/2-1/p)-1/2; the branches
    cross at p_c = 2(n+1)/(n-1)."""
    if int(n) != n or n < 2:
        raise UsageError(f"dimension n must be an integer >= 2, got {n}")
    p = float(p)
    if not p >= 2.0:
        raise UsageError(f"sigma is defined for p in [2, inf], got {p}")
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    tube = (n - 1) / 2.0 * (0.5 - inv_p)
    point = n * (0.5 - inv_p) - 0.5
    return max(tube, point)


def critical_exponent(n: int = 2) -> float:
    """The branch-crossing exponent p_c = 2(n+1)/(n-1)."""
    if int(n) != n or n < 2:
        raise UsageError(f"dimension n must be an integer >= 2, got {n}")
    return 2.0 * (n + 1) / (n - 1)


# ------------------------------------------------------------- sweep types

def _fmt_param(value) -> str:
    """Canonical string form of a functional parameter."""
    if isinstance(value, str):
        return value
    v = float(value)
    if math.isinf(v):
        return "inf"
    if v.is_integer():
        return str(int(v))
    return repr(v)


def _parse_radius(raw, lam: float) -> float:
    """Radii are plain numbers or 'lam^<a>' powers of the frequency."""
    if isinstance(raw, str) and raw.startswith("lam^"):
        try:
            a = float(raw[4:])
        except ValueError:
            raise UsageError(f"bad radius {raw!r}; use a number or lam^<a>")
        return max(lam, 1.0) ** a
    try:
        r = float(raw)
    except (TypeError, ValueError):
        raise UsageError(f"bad radius {raw!r}; use a number or lam^<a>")
    if r <= 0:
        raise UsageError(f"radius must be positive, got {raw!r}")
    return r


@dataclass(frozen=True)
class SweepConfig:
    """Declarative description of one sweep.

    ``degrees`` is the strictly increasing list of spherical-harmonic
    degrees k (or torus eigenvalues N). ``seeds`` applies to the seeded
    families: one seed broadcasts across all degrees, or a list paired
    degree-by-degree. Radii entries may be numbers or 'lam^<a>' strings
    evaluated at each frequency.
    """

    family: str
    degrees: tuple[int, ...]
    functionals: tuple[str, ...] = ("lp",)
    p_values: tuple[float, ...] = (2.0,)
    radii: tuple = ()
    tube_variants: tuple[str, ...] = ("closed",)
    seeds: tuple[int, ...] | None = None
    density_factor: float = 1.0
    lp_rtol: float = 1e-3
    nodal_rtol: float = 0.01
    node_cap: int = DEFAULT_NODE_CAP
    # Search economy: skip simplex polish / shrink the candidate pool for
    # the argmax searches (kn, sup_restriction, ball). The coarse family
    # proxy stays within a few percent, which stability verdicts tolerate.
    refine_searches: bool = True
    search_candidates: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(k) for k in self.degrees))
        object.__setattr__(self, "functionals", tuple(self.functionals))
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        object.__setattr__(self, "radii", tuple(self.radii))
        object.__setattr__(self, "tube_variants", tuple(self.tube_variants))
        if self.seeds is not None:
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.family not in FAMILIES:
            raise UsageError(
                f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if not self.degrees:
            raise UsageError("degree list must not be empty")
        if any(b <= a for a, b in zip(self.degrees, self.degrees[1:])):
            raise UsageError("degree list must be strictly increasing")
        for f in self.functionals:
            if f not in FUNCTIONALS:
                raise UsageError(
                    f"unknown functional {f!r}; choose from {', '.join(FUNCTIONALS)}")
        for v in self.tube_variants:
            if v != "closed" and not str(v).startswith("segment"):
                raise UsageError(
                    f"tube variant must be 'closed' or 'segment[:L]', got {v!r}")
        if self.family in (RANDOM_HARMONIC, TORUS_RANDOM):
            if not self.seeds:
                raise UsageError(f"family {self.family!r} needs seeds")
            if len(self.seeds) not in (1, len(self.degrees)):
                raise UsageError(
                    "seeds must be a single value or pair up with the degrees "
                    f"({len(self.seeds)} seeds for {len(self.degrees)} degrees)")
        if self.density_factor <= 0:
            raise UsageError("density_factor must be positive")

    def seed_for(self, index: int) -> int | None:
        if self.seeds is None:
            return None
        return self.seeds[0] if len(self.seeds) == 1 else self.seeds[index]


@dataclass(frozen=True)
class SweepRow:
    """One computed cell: a functional value at one frequency."""

    family: str
    degree: int
    lam: float
    functional: str
    parameter: str
    value: float
    error_estimate: float
    grid_meta: str = "{}"
    seed: int | None = None
    error: str | None = None

    @property
    def key(self):
        return (self.family, self.degree, self.functional, self.parameter)


@dataclass(frozen=True)
class SweepTable:
    """Rows of a completed sweep, indexable by cell key."""

    config: SweepConfig
    rows: tuple[SweepRow, ...]

    def cell(self, degree: int, functional: str, parameter="") -> SweepRow:
        key = (self.config.family, int(degree), functional, _fmt_param(parameter))
        for row in self.rows:
            if row.key == key:
                return row
        raise UsageError(f"sweep table has no cell {key}")

    def series(self, functional: str, parameter="") -> list[tuple[float, float]]:
        """(lambda, value) points for one functional, in sweep order."""
        param = _fmt_param(parameter)
        return [(row.lam, row.value) for row in self.rows
                if row.functional == functional and row.parameter == param]

    def values(self, functional: str, parameter="") -> np.ndarray:
        return np.array([v for _, v in self.series(functional, parameter)])

    def lams(self) -> np.ndarray:
        return np.array(sorted({row.lam for row in self.rows}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return repr(obj)
    return obj


def _meta_string(meta: dict) -> str:
    return json.dumps(_jsonable(meta), sort_keys=True, separators=(",", ":"))


def _make_eigenfunction(family: str, degree: int, seed) -> Eigenfunction:
    if family == ZONAL:
        return zonal(degree)
    if family == HIGHEST_WEIGHT:
        return highest_weight(degree)
    if family == RANDOM_HARMONIC:
        return random_harmonic(degree, seed=int(seed))
    return torus_eigenfunction(degree, seed=int(seed))


def _equator(e: Eigenfunction, variant: str) -> Geodesic:
    """The family's concentration geodesic: the equator on the sphere, the
    first coordinate circle on the torus."""
    if variant == "closed":
        length = None
    else:
        _, _, tail = variant.partition(":")
        length = float(tail) if tail else 1.0
    if e.manifold == SPHERE:
        return Geodesic.sphere_arc((0.0, 0.0, 1.0),
                                   length=2.0 * math.pi if length is None else length)
    return Geodesic.torus_segment((0.0, 0.0), (1.0, 0.0),
                                  length=2.0 * math.pi if length is None else length)


def _cell_value(e: Eigenfunction, config: SweepConfig, functional: str,
                parameter) -> tuple[float, float, dict]:
    """Compute one functional; returns (value, error_estimate, meta)."""
    lam_eff = max(e.lam, 1.0)
    if functional == "lp":
        rep = lp_norm(e, float(parameter), rtol=config.lp_rtol,
                      node_cap=config.node_cap)
        return rep.value, rep.error_estimate, rep.meta
    search = {"refine": config.refine_searches}
    if config.search_candidates is not None:
        search["n_candidates"] = config.search_candidates
    if functional == "sup_restriction":
        res = sup_restriction_norm(e, density_factor=config.density_factor,
                                   **search)
        return res.value, res.gap_estimate, {"family_size": res.family_size}
    if functional == "kn":
        res = kn_norm(e, density_factor=config.density_factor, **search)
        return res.value, res.gap_estimate, {"family_size": res.family_size}
    if functional == "ball":
        r = _parse_radius(parameter, e.lam)
        res = sup_ball_mass(e, r, node_cap=config.node_cap,
                            **{**search,
                               "n_candidates": search.get("n_candidates", 20)})
        return (math.sqrt(max(res.value, 0.0)), res.gap_estimate,
                {"radius": r, "family_size": res.family_size})
    if functional == "nodal":
        est = nodal_length(e, rtol=config.nodal_rtol)
        err = abs(est.history[-1][1] - est.history[-2][1]) \
            if len(est.history) > 1 else 0.0
        return est.length, err, {"h": est.h, "crossings": est.crossings}
    if functional == "tube":
        g = _equator(e, str(parameter))
        tube = Tube(g, 1.0 / math.sqrt(lam_eff))
        rep = tube_mass(e, tube)
        return (math.sqrt(max(rep.value, 0.0)), rep.error_estimate,
                {"half_width": tube.half_width, "closed": g.is_closed})
    raise UsageError(f"unknown functional {functional!r}")


def _cell_parameters(config: SweepConfig, functional: str) -> tuple:
    if functional == "lp":
        if not config.p_values:
            raise UsageError("functional 'lp' needs a non-empty p list")
        return config.p_values
    if functional == "ball":
        if not config.radii:
            raise UsageError("functional 'ball' needs a non-empty radii list")
        return config.radii
    if functional == "tube":
        return config.tube_variants
    return ("",)


def run_sweep(config: SweepConfig, threads: int | None = None) -> SweepTable:
    """Evaluate every requested cell; deterministic row order, per-cell
    error capture, optional thread pool (EIGENLAB_THREADS or ``threads``)."""
    if threads is None:
        threads = int(os.environ.get("EIGENLAB_THREADS", "1") or "1")
    if threads < 1:
        raise UsageError(f"threads must be >= 1, got {threads}")

    funcs = []
    for i, degree in enumerate(config.degrees):
        e = _make_eigenfunction(config.family, degree, config.seed_for(i))
        for functional in config.functionals:
            for parameter in _cell_parameters(config, functional):
                funcs.append((e, degree, config.seed_for(i), functional, parameter))

    def compute(task) -> SweepRow:
        e, degree, seed, functional, parameter = task
        try:
            value, err, meta = _cell_value(e, config, functional, parameter)
            return SweepRow(config.family, degree, e.lam, functional,
                            _fmt_param(parameter), value, err,
                            _meta_string(meta), seed)
        except EigenlabError as exc:
            return SweepRow(config.family, degree, e.lam, functional,
                            _fmt_param(parameter), float("nan"), float("nan"),
                            "{}", seed, error=f"{type(exc).__name__}: {exc}")

    if threads == 1:
        rows = [compute(t) for t in funcs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(compute, funcs))
    return SweepTable(config, tuple(rows))


# -------------------------------------------------------------- scaling fits

@dataclass(frozen=True)
class ScalingFit:
    """Power-law fit of one functional series against frequency."""

    functional: str
    exponent: float
    stderr: float
    reference: float | None
    verdict: str
    points: tuple[tuple[float, float], ...]
    residuals: tuple[float, ...]


def fit_exponent(points, reference: float | None = None,
                 functional: str = "") -> ScalingFit:
    """OLS slope of log(value) against log(lambda).

    Needs at least four points with positive values at strictly
    increasing frequencies. The verdict is consistent when the fitted
    exponent is within max(3*stderr, 0.05) of the reference exponent,
    inconclusive when no reference is given.
    """
    pts = [(float(l), float(v)) for l, v in points]
    if len(pts) < 4:
        raise UsageError(f"exponent fit needs at least 4 points, got {len(pts)}")
    lams = np.array([l for l, _ in pts])
    vals = np.array([v for _, v in pts])
    if np.any(lams <= 0) or np.any(np.diff(lams) <= 0):
        raise UsageError("frequencies must be positive and strictly increasing")
    bad = np.nonzero(~(vals > 0))[0]
    if len(bad):
        raise UsageError(
            f"exponent fit needs positive values; offending lambda = "
            f"{lams[bad[0]]:g} (value {float(vals[bad[0]])!r})")
    x, y = np.log(lams), np.log(vals)
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    dof = len(pts) - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof else 0.0
    if reference is None:
        verdict = "inconclusive"
    elif abs(slope - reference) <= max(3.0 * stderr, 0.05):
        verdict = "consistent"
    else:
        verdict = "inconsistent"
    return ScalingFit(functional, slope, stderr,
                      None if reference is None else float(reference),
                      verdict, tuple(pts), tuple(float(r) for r in resid))


def reference_exponent(family: str, functional: str, parameter="",
                       n: int = 2) -> float | None:
    """Expected asymptotic exponent of a functional along a model family,
    or None when the leading behavior carries logarithmic factors (no
    clean power law at desk scale)."""
    if n != 2:
        raise UsageError("reference exponents are tabulated for n = 2 only")
    param = _fmt_param(parameter)

    def ball_power() -> float | None:
        if param.startswith("lam^"):
            return float(param[4:])
        return 0.0  # frequency-independent radius

    if family == ZONAL:
        if functional == "lp":
            p = float(param) if param != "inf" else math.inf
            if math.isinf(p):
                return 0.5
            if p > 4.0:
                return 0.5 - 2.0 / p
            if p == 4.0:
                return None  # log-thickened crossover
            return 0.0
        if functional == "kn":
            return None  # the maximizing tube is log-thickened
        if functional == "ball":
            a = ball_power()
            return None if a is None else a / 2.0
        if functional == "sup_restriction":
            return None  # log-thickened along meridians
        if functional == "nodal":
            return 1.0
    if family == HIGHEST_WEIGHT:
        if functional == "lp":
            p = float(param) if param != "inf" else math.inf
            return 0.25 if math.isinf(p) else 0.25 - 0.5 / p
        if functional == "kn":
            return 0.0
        if functional == "sup_restriction":
            return 0.25
        if functional == "ball":
            a = ball_power()
            if a is None or a == 0.0:
                # Fixed radii cross the beam width inside a desk-scale
                # sweep, so the mass is still in transition: no reference.
                return None
            return 0.25 + a if a <= -0.5 else a / 2.0
        if functional == "nodal":
            return 1.0
        if functional == "tube":
            return 0.0
    if family == RANDOM_HARMONIC:
        if functional == "lp":
            p = float(param) if param != "inf" else math.inf
            return None if math.isinf(p) else 0.0
        if functional == "kn":
            return -0.25
        if functional == "sup_restriction":
            return 0.0
        if functional == "ball":
            return ball_power()
        if functional == "nodal":
            return 1.0
    if family == TORUS_RANDOM:
        if functional == "lp":
            p = float(param) if param != "inf" else math.inf
            return None if math.isinf(p) else 0.0
        if functional == "kn":
            return -0.25
        if functional == "ball":
            return ball_power()
        if functional == "nodal":
            return 1.0
    return None


def fit_table(table: SweepTable, functional: str, parameter="",
              n: int = 2) -> ScalingFit:
    """Fit one functional series of a sweep against its reference."""
    pts = table.series(functional, parameter)
    if not pts:
        raise UsageError(
            f"sweep table has no series for functional {functional!r} "
            f"parameter {_fmt_param(parameter)!r}")
    ref = reference_exponent(table.config.family, functional, parameter, n=n)
    label = functional if _fmt_param(parameter) == "" \
        else f"{functional}:{_fmt_param(parameter)}"
    return fit_exponent(pts, reference=ref, functional=label)


# ---------------------------------------------------------- inequality suite

@dataclass(frozen=True)
class InequalityCheck:
    """Per-degree sides of one scaling inequality plus a stability verdict.

    ``constant`` is the empirical max of lhs/rhs; ``holds`` requires the
    constant to be finite and the last-half maximum of the ratios to stay
    within twice the first-half maximum (uniform boundedness at desk
    scale). ``reference`` describes the bound in words.
    """

    name: str
    degrees: tuple[int, ...]
    lhs: tuple[float, ...]
    rhs: tuple[float, ...]
    constant: float
    holds: bool
    reference: str
    meta: dict = field(default_factory=dict, compare=False)


def _stable(ratios: np.ndarray) -> bool:
    if not np.all(np.isfinite(ratios)):
        return False
    half = (len(ratios) + 1) // 2
    first = ratios[:half].max()
    last = ratios[half:].max() if half < len(ratios) else first
    return bool(last <= 2.0 * first)


def _series_or_raise(table: SweepTable, name: str,
                     requirements) -> list[np.ndarray]:
    missing = []
    out = []
    for functional, parameter in requirements:
        pts = table.series(functional, parameter)
        if not pts:
            missing.append(f"{functional}"
                           + (f" with parameter {_fmt_param(parameter)}"
                              if _fmt_param(parameter) else ""))
            out.append(None)
        else:
            out.append(np.array([v for _, v in pts]))
    if missing:
        raise UsageError(
            f"check {name!r} needs functionals missing from the sweep: "
            + "; ".join(missing) + " (add them to the config)")
    return out


def check_requirements(name: str, p: float | None = None,
                       radii=()) -> list[tuple[str, str]]:
    """The (functional, parameter) cells a named check reads."""
    if name == "bgt_restriction":
        return [("sup_restriction", "")]
    if name == "bourgain_restriction":
        return [("sup_restriction", ""), ("lp", _fmt_param(p))]
    if name == "kn_l4":
        return [("lp", "4"), ("kn", "")]
    if name == "kn_lp":
        return [("lp", _fmt_param(p)), ("kn", "")]
    if name == "l1_lower":
        return [("lp", "1")]
    if name == "sup_vs_l1":
        return [("lp", "inf"), ("lp", "1")]
    if name == "nodal_lower":
        return [("lp", "1"), ("nodal", "")]
    if name == "cm_lower":
        return [("nodal", "")]
    if name == "hoelder_kn_lower":
        return [("kn", ""), ("lp", "1")]
    if name == "hoelder_chain":
        return [("lp", "1"), ("lp", _fmt_param(p))]
    if name == "localization":
        return [("lp", "6"), ("ball", "lam^-0.5")]
    if name == "ball_upper":
        return [("ball", _fmt_param(r)) for r in radii]
    if name == "sup_decay":
        return [("lp", "inf")]
    raise UsageError(f"unknown inequality check {name!r}; choose from "
                     + ", ".join(sorted(CHECK_DEFAULT_P)))


CHECK_DEFAULT_P = {
    "bgt_restriction": None,
    "bourgain_restriction": 2.0,
    "kn_l4": None,
    "kn_lp": 3.0,
    "l1_lower": None,
    "sup_vs_l1": None,
    "nodal_lower": None,
    "cm_lower": None,
    "hoelder_kn_lower": 5.0,
    "hoelder_chain": 3.0,
    "localization": None,
    "ball_upper": None,
    "sup_decay": None,
}

BALL_UPPER_RADII = ("lam^-1", "lam^-0.75", "lam^-0.5", "0.1")


def check_inequality(name: str, table: SweepTable, p: float | None = None,
                     radii=BALL_UPPER_RADII) -> InequalityCheck:
    """Evaluate one named inequality over a sweep table.

    Every check compares a left side against a right side per degree (so
    lhs <= C * rhs), reports the empirical constant max(lhs/rhs), and
    judges stability across sweep halves. ``p`` selects the exponent for
    the checks parametrized by one; ``radii`` selects the ball radii for
    the ball-mass bound.
    """
    if name not in CHECK_DEFAULT_P:
        raise UsageError(f"unknown inequality check {name!r}; choose from "
                         + ", ".join(sorted(CHECK_DEFAULT_P)))
    if p is None:
        p = CHECK_DEFAULT_P[name]
    degrees = tuple(table.config.degrees)
    lam = np.array(sorted({row.lam for row in table.rows}))
    if len(lam) != len(degrees):
        lam = np.array([next(r.lam for r in table.rows if r.degree == k)
                        for k in degrees])
    meta: dict = {}

    if name == "bgt_restriction":
        (restr,) = _series_or_raise(table, name, check_requirements(name))
        lhs, rhs = restr, lam ** 0.25
        reference = "sup-restriction norm <= C * lam^{1/4}"
    elif name == "bourgain_restriction":
        restr, lpv = _series_or_raise(table, name, check_requirements(name, p))
        inv_p = 0.0 if math.isinf(p) else 1.0 / p
        lhs, rhs = restr, lam ** (0.5 * inv_p) * lpv
        reference = f"sup-restriction norm <= C * lam^{{1/(2p)}} * Lp, p = {_fmt_param(p)}"
    elif name == "kn_l4":
        l4, knv = _series_or_raise(table, name, check_requirements(name))
        lhs, rhs = l4, lam ** 0.125 * knv ** 0.25
        reference = "L4 norm <= C * lam^{1/8} * KN^{1/4}"
    elif name == "kn_lp":
        lpv, knv = _series_or_raise(table, name, check_requirements(name, p))
        lam_exp = 0.5 * (0.5 - 1.0 / p)
        kn_exp = 6.0 / p - 1.0
        lhs, rhs = lpv, lam ** lam_exp * knv ** kn_exp
        meta = {"lam_exponent": lam_exp, "kn_exponent": kn_exp}
        reference = (f"Lp norm <= C * lam^{{(1/2)(1/2-1/p)}} * KN^{{6/p-1}}, "
                     f"p = {_fmt_param(p)}")
    elif name == "l1_lower":
        (l1,) = _series_or_raise(table, name, check_requirements(name))
        lhs, rhs = lam ** -0.25, l1
        reference = "lam^{-1/4} <= C * L1 norm"
    elif name == "sup_vs_l1":
        sup, l1 = _series_or_raise(table, name, check_requirements(name))
        lhs, rhs = sup, lam ** 0.5 * l1
        reference = "sup norm <= C * lam^{1/2} * L1 norm"
    elif name == "nodal_lower":
        l1, nod = _series_or_raise(table, name, check_requirements(name))
        lhs, rhs = lam * l1 ** 2, nod
        reference = "lam * (L1 norm)^2 <= C * nodal length"
    elif name == "cm_lower":
        (nod,) = _series_or_raise(table, name, check_requirements(name))
        lhs, rhs = lam ** 0.5, nod
        reference = "lam^{1/2} <= C * nodal length"
    elif name == "hoelder_kn_lower":
        knv, l1 = _series_or_raise(table, name, check_requirements(name))
        kn_exp = -(6.0 - p) / (p - 2.0)
        lhs, rhs = knv ** kn_exp, lam ** 0.25 * l1
        meta = {"kn_exponent": kn_exp}
        reference = (f"KN^{{-(6-p)/(p-2)}} <= C * lam^{{1/4}} * L1 norm, "
                     f"p = {_fmt_param(p)}")
    elif name == "hoelder_chain":
        l1, lpv = _series_or_raise(table, name, check_requirements(name, p))
        lhs = np.ones_like(l1)
        rhs = l1 ** ((p - 2.0) / (2.0 * (p - 1.0))) * lpv ** (p / (2.0 * (p - 1.0)))
        reference = (f"1 <= L1^{{(p-2)/(2(p-1))}} * Lp^{{p/(2(p-1))}}, "
                     f"p = {_fmt_param(p)} (norm-engine identity)")
        ratios = lhs / rhs
        constant = float(np.max(ratios))
        holds = bool(np.all(np.isfinite(ratios)) and constant <= 1.0 + 1e-10)
        return InequalityCheck(name, degrees, tuple(map(float, lhs)),
                               tuple(map(float, rhs)), constant, holds,
                               reference, meta)
    elif name == "localization":
        l6, ball = _series_or_raise(table, name, check_requirements(name))
        r = lam ** -0.5
        lhs, rhs = l6, lam ** (1.0 / 6.0) * (r ** -0.75 * ball) ** (2.0 / 3.0)
        reference = ("critical Lp norm <= C * lam^{1/6} * "
                     "(r^{-3/4} sup ball L2 norm)^{2/3}, r = lam^{-1/2}")
    elif name == "ball_upper":
        series = _series_or_raise(table, name, check_requirements(name, radii=radii))
        all_deg, all_lhs, all_rhs, all_param = [], [], [], []
        stable_per_radius = []
        for raw, ball in zip(radii, series):
            r = np.array([_parse_radius(raw, l) for l in lam])
            lhs_r, rhs_r = ball, np.sqrt(r)
            stable_per_radius.append(_stable(lhs_r / rhs_r))
            all_deg.extend(degrees)
            all_lhs.extend(lhs_r)
            all_rhs.extend(rhs_r)
            all_param.extend([_fmt_param(raw)] * len(degrees))
        lhs, rhs = np.array(all_lhs), np.array(all_rhs)
        ratios = lhs / rhs
        constant = float(np.max(ratios))
        holds = bool(np.isfinite(constant) and all(stable_per_radius))
        meta = {"radii": [_fmt_param(s) for s in radii],
                "parameters": all_param}
        return InequalityCheck(name, tuple(all_deg), tuple(map(float, lhs)),
                               tuple(map(float, rhs)), constant, holds,
                               "ball L2 norm <= C * r^{1/2}", meta)
    elif name == "sup_decay":
        (sup,) = _series_or_raise(table, name, check_requirements(name))
        lhs, rhs = sup, lam ** 0.5
        ratios = lhs / rhs
        rho, pvalue = stats.spearmanr(lam, ratios)
        constant = float(np.max(ratios))
        holds = bool(np.isfinite(constant) and rho < 0.0 and pvalue < 0.05)
        meta = {"spearman_rho": float(rho), "p_value": float(pvalue)}
        return InequalityCheck(name, degrees, tuple(map(float, lhs)),
                               tuple(map(float, rhs)), constant, holds,
                               "sup norm * lam^{-1/2} decreasing in trend",
                               meta)
    else:  # pragma: no cover - guarded by the membership test above
        raise UsageError(name)

    ratios = lhs / rhs
    constant = float(np.max(ratios))
    holds = bool(np.isfinite(constant) and _stable(ratios))
    return InequalityCheck(name, degrees, tuple(map(float, lhs)),
                           tuple(map(float, rhs)), constant, holds,
                           reference, meta)


# -------------------------------------------------------------- scar witness

@dataclass(frozen=True)
class ScarWitness:
    """Outcome of the tube-plus-level-band scar search.

    ``premise_holds`` records whether the L^1 norm is small enough
    (<= c0 * lam^{-1/4}); when it is not, the verdict is not_applicable
    and the remaining fields are None. Otherwise the Kakeya-Nikodym
    argmax tube is reported with its mass c1, the sup-norm constant c3,
    the level constant c2 = min(1, 1/c3, c1/(2 C0)) with C0 the scaled
    tube volume, the measured volume of the band
    [c2 lam^{1/4}, lam^{1/4}/c2] inside the tube, and the target
    delta = c1 c2^2 / 2; the verdict is witness_found when the band
    volume reaches delta * lam^{-1/2}.
    """

    premise_holds: bool
    l1_norm: float
    c0: float
    lam: float
    verdict: str
    tube: Tube | None = None
    tube_mass: float | None = None
    c2: float | None = None
    c3: float | None = None
    band: tuple[float, float] | None = None
    band_volume: float | None = None
    delta: float | None = None
    meta: dict = field(default_factory=dict, compare=False)


def scar_witness(e: Eigenfunction, c0: float,
                 density_factor: float = 1.0) -> ScarWitness:
    """Search for the mass-carrying tube and thick level band that every
    L^1-minimizing eigenfunction must exhibit."""
    if c0 <= 0:
        raise UsageError(f"c0 must be positive, got {c0}")
    if e.lam < 1.0:
        raise UsageError("scar witness search requires frequency lam >= 1")
    lam = e.lam
    l1 = lp_norm(e, 1.0, rtol=1e-3).value
    if l1 > c0 * lam ** -0.25:
        return ScarWitness(False, l1, c0, lam, "not_applicable",
                           meta={"premise_bound": c0 * lam ** -0.25})
    kn = kn_norm(e, density_factor=density_factor)
    tube = Tube(kn.argmax, 1.0 / math.sqrt(lam))
    c1 = kn.value ** 2
    c3 = sup_norm(e).value * lam ** -0.25
    big_c0 = tube.volume() * math.sqrt(lam)
    c2 = min(1.0, 1.0 / c3, c1 / (2.0 * big_c0))
    band = (c2 * lam ** 0.25, lam ** 0.25 / c2)
    band_vol = level_band_volume(e, tube, band[0], band[1]).volume
    delta = 0.5 * c1 * c2 ** 2
    target = delta * lam ** -0.5
    verdict = "witness_found" if band_vol >= target else "witness_not_found"
    return ScarWitness(True, l1, c0, lam, verdict, tube, c1, c2, c3, band,
                       band_vol, delta,
                       meta={"band_volume_target": target,
                             "tube_volume": tube.volume(),
                             "premise_bound": c0 * lam ** -0.25})
