"""Concentration functionals: L^p norms, restriction norms, tube and ball
masses, and the argmax searches (sup, Kakeya-Nikodym, sup-restriction,
sup-ball) built on top of them.

Adaptive integrals double their grids until a relative tolerance is met and
raise ConvergenceError (with the full refinement history) if it never is.
Argmax searches run a deterministic coarse scan over a geodesic/center
family followed by Nelder-Mead polish of the leading candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import _kernels
from .eigenfunctions import HIGHEST_WEIGHT, RANDOM_HARMONIC, ZONAL, Eigenfunction
from .errors import ConvergenceError, UsageError
from .geometry import (
    DEFAULT_FAMILY_CAP,
    DEFAULT_NODE_CAP,
    SPHERE,
    TORUS,
    TWO_PI,
    Geodesic,
    QuadratureGrid,
    Tube,
    _orthonormal_frame,
    family_layout,
    gauss_interval,
    geodesic_distance,
    sphere_quadrature,
    sphere_uniform_grid,
    torus_quadrature,
)


@dataclass(frozen=True)
class NormReport:
    """A computed functional value with an error estimate and grid metadata."""

    value: float
    error_estimate: float
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SearchResult:
    """Outcome of an argmax search over a family of tubes/curves/balls.

    ``gap_estimate`` is a heuristic Lipschitz bound on how much the coarse
    stage may undershoot the true maximum given the family spacing.
    """

    value: float
    argmax: object
    coarse_value: float
    family_size: int
    gap_estimate: float
    meta: dict = field(default_factory=dict)


# ----------------------------------------------------------------- L^p norms

def lp_norm(e: Eigenfunction, p: float = 2.0, rtol: float = 1e-6,
            max_level: int = 9, node_cap: int = DEFAULT_NODE_CAP) -> NormReport:
    """L^p norm of e over its manifold, p in [1, inf].

    Even integer p integrates exactly on a degree-matched grid; other p
    use grid doubling to the requested relative tolerance; p = inf
    delegates to sup_norm.
    """
    p = float(p)
    if math.isinf(p) and p > 0:
        return sup_norm(e)
    if not math.isfinite(p) or p < 1.0:
        raise UsageError(f"p must lie in [1, inf], got {p}")
    if p.is_integer() and int(p) % 2 == 0:
        return _lp_even_exact(e, int(p), node_cap)
    return _lp_doubling(e, p, rtol, max_level, node_cap)


def _lp_even_exact(e: Eigenfunction, p: int, node_cap: int) -> NormReport:
    deg = max(e.poly_degree, 0)
    if e.manifold == SPHERE:
        grid = sphere_quadrature(p * deg, node_cap=node_cap)
    else:
        grid = torus_quadrature(p * deg + 1, node_cap=node_cap)
    vals = e.evaluate_grid(grid)
    integral = float(grid.integrate_values(vals ** p))
    return NormReport(max(integral, 0.0) ** (1.0 / p), 0.0,
                      {"exact": True, "p": float(p), "nodes": grid.size})


_PIECE_GL = 10  # Gauss nodes per smooth piece between sign changes


def _line_lp_integral(line, p: float, deg: int) -> tuple[float, int, int]:
    """Integral of |f|^p over one periodic grid line (angle in [0, 2pi)).

    f restricted to the line is a trigonometric polynomial, so its sign
    changes are bracketed from dense samples, polished with two secant
    steps, and |f|^p is integrated piece by piece with Gauss-Legendre.
    ``line`` maps an angle array to values of f. Returns the integral,
    the number of sign changes found, and the sign of the first sample.
    """
    q = _PIECE_GL + 2 * math.ceil(p)  # |f|^p needs more nodes as p grows
    m = max(4 * deg, 64)
    phis = TWO_PI * np.arange(m) / m
    fv = line(phis)
    nxt = np.roll(fv, -1)
    idx = np.nonzero(np.signbit(fv) != np.signbit(nxt))[0]
    if len(idx):
        h = TWO_PI / m
        f0, f1 = fv[idx], nxt[idx]
        phi0 = phis[idx]
        r = phi0 + h * f0 / (f0 - f1)
        prev_r, prev_f = phi0.astype(float), f0.astype(float)
        for _ in range(2):
            fr = line(np.mod(r, TWO_PI))
            denom = fr - prev_f
            safe = np.abs(denom) > 1e-300
            step = np.where(safe, fr * (r - prev_r) / np.where(safe, denom, 1.0), 0.0)
            prev_r, prev_f, r = r, fr, np.clip(r - step, phi0, phi0 + h)
        roots = np.sort(r)
        bounds = np.concatenate([roots, [roots[0] + TWO_PI]])
        starts, lens = bounds[:-1], np.diff(bounds)
        keep = lens > 1e-12
        starts, lens = starts[keep], lens[keep]
    else:
        starts, lens = np.array([0.0]), np.array([TWO_PI])
    xi, wg = gauss_interval(0.0, 1.0, q)
    nodes = starts[:, None] + lens[:, None] * xi[None, :]
    wts = lens[:, None] * wg[None, :]
    vals = np.abs(line(np.mod(nodes.ravel(), TWO_PI))) ** p
    return float(vals @ wts.ravel()), len(idx), -1 if fv[0] < 0.0 else 1


def _sphere_line_factory(e: Eigenfunction):
    """Maps t = cos(theta) to a callable evaluating f along that latitude.

    Random harmonics get a dedicated path: one associated-Legendre row per
    latitude, then a trigonometric matrix-vector product per angle batch,
    which is far cheaper than summing the full basis at every point.
    """
    if e.family == RANDOM_HARMONIC:
        k = e.degree
        alpha, beta = e.payload["alpha"], e.payload["beta"]

        def make_line(t):
            s = math.sqrt(max(1.0 - t * t, 0.0))
            row = _kernels.plm_point(k, t, s)
            a, b = alpha * row, beta * row

            def line(ang):
                return _kernels.trig_sum(a, b, ang)

            return line

        return make_line

    def make_line(t):
        st = math.sqrt(max(1.0 - t * t, 0.0))

        def line(ang):
            pts = np.column_stack((st * np.cos(ang), st * np.sin(ang),
                                   np.full(len(ang), t)))
            return e.evaluate_batch(pts)

        return line

    return make_line


def _lp_zonal_profile(e: Eigenfunction, p: float) -> NormReport:
    """L^p norm of a zonal eigenfunction via its 1D axial profile.

    Rotational symmetry about the pole collapses the surface integral to
    2*pi * int_{-1}^{1} |f(t)|^p dt with t the cosine of the polar angle,
    and the profile's sign changes sit at the degree-k Legendre roots, so
    piecewise Gauss-Legendre between them sees only smooth arches.
    """
    from scipy.special import roots_legendre

    pole = e.pole
    perp = np.zeros(3)
    perp[int(np.argmin(np.abs(pole)))] = 1.0
    perp -= (perp @ pole) * pole
    perp /= np.linalg.norm(perp)

    def profile(t):
        s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
        return e.evaluate_batch(t[:, None] * pole[None, :]
                                + s[:, None] * perp[None, :])

    cuts = roots_legendre(e.degree)[0] if e.degree else np.empty(0)
    bounds = np.concatenate([[-1.0], cuts, [1.0]])
    starts, lens = bounds[:-1], np.diff(bounds)
    passes = []
    for order in (2 * _PIECE_GL, 3 * _PIECE_GL):
        xi, wg = gauss_interval(0.0, 1.0, order)
        nodes = (starts[:, None] + lens[:, None] * xi[None, :]).ravel()
        wts = (lens[:, None] * wg[None, :]).ravel()
        passes.append(float(np.abs(profile(nodes)) ** p @ wts))
    integral = TWO_PI * passes[1]
    abserr = TWO_PI * abs(passes[1] - passes[0])
    value = max(integral, 0.0) ** (1.0 / p)
    err = value * abserr / (p * integral) if integral > 0 else abserr
    return NormReport(value, err,
                      {"exact": False, "p": p, "profile_pieces": len(starts),
                       "line_evals": len(starts) * 5 * _PIECE_GL})


def _lp_hw_profile(e: Eigenfunction, p: float, rtol: float) -> NormReport:
    """L^p norm of a highest-weight eigenfunction via its separable form.

    The function factors into a polar profile times cos(k*phi), so the
    azimuthal factor is the exact mean of |cos|^p over a period (a Beta
    integral) and only the smooth positive polar integral needs
    quadrature, refined by doubling.
    """
    k = e.degree
    if k:
        azimuthal = TWO_PI * (math.gamma((p + 1.0) / 2.0)
                              / (math.sqrt(math.pi) * math.gamma(p / 2.0 + 1.0)))
    else:
        azimuthal = TWO_PI

    def profile_pow(theta):
        st, ct = np.sin(theta), np.cos(theta)
        pts = np.column_stack((st, np.zeros_like(st), ct))
        return np.abs(e.evaluate_batch(pts)) ** p * st

    polar = prev = None
    n = max(32, k // 2)
    for level in range(24):
        xi, wg = gauss_interval(0.0, 1.0, _PIECE_GL)
        edges = np.linspace(0.0, math.pi, n + 1)
        h = edges[1] - edges[0]
        nodes = (edges[:-1, None] + h * xi[None, :]).ravel()
        polar = h * float(profile_pow(nodes) @ np.tile(wg, n))
        if prev is not None and abs(polar - prev) <= 0.1 * rtol * abs(polar):
            break
        prev, n = polar, 2 * n
    integral = azimuthal * polar
    abserr = azimuthal * abs(polar - prev) if prev is not None else 0.0
    value = max(integral, 0.0) ** (1.0 / p)
    err = value * abserr / (p * integral) if integral > 0 else abserr
    return NormReport(value, err,
                      {"exact": False, "p": p, "line_evals": n * _PIECE_GL,
                       "levels": level})


def _outer_strong_kinks(g_line_value, probes: np.ndarray, counts: np.ndarray,
                        signs: np.ndarray) -> list[float]:
    """Cross-line positions where a root-free line's sign flips.

    Between two adjacent probe lines that both carry no sign change but
    disagree in overall sign, the cross integral of |f| has a genuine
    |x - x0| kink; bisection on the line value at a fixed angle pins it.
    """
    kinks = []
    flips = np.nonzero((counts[:-1] == 0) & (counts[1:] == 0)
                       & (signs[:-1] != signs[1:]))[0]
    for i in flips:
        a, b = float(probes[i]), float(probes[i + 1])
        fa = g_line_value(a)
        for _ in range(50):
            mid = 0.5 * (a + b)
            fm = g_line_value(mid)
            if (fm < 0.0) == (fa < 0.0):
                a, fa = mid, fm
            else:
                b = mid
        kinks.append(0.5 * (a + b))
    return kinks


def _lp_doubling(e: Eigenfunction, p: float, rtol: float, max_level: int,
                 node_cap: int) -> NormReport:
    """|f|^p integration for non-even p. The integrand has kinks along the
    nodal set, so plain product grids converge too slowly: instead every
    latitude (torus u-line) is integrated exactly-in-pieces between the
    sign changes of f, and the remaining 1D cross-line integral is split
    at its own strong kinks (whole lines changing sign) and refined by
    panel doubling; the weak kinks left inside panels, from nodal curves
    tangent to the line direction, fade at a fractional-power rate that
    the doubling still detects and absorbs."""
    if e.family == ZONAL:
        return _lp_zonal_profile(e, p)
    if e.family == HIGHEST_WEIGHT:
        return _lp_hw_profile(e, p, rtol)
    deg = max(e.poly_degree, 0)
    if e.manifold == SPHERE:
        make_line = _sphere_line_factory(e)
        lo, hi = 0.0, math.pi

        def line_at(theta):
            return make_line(math.cos(theta))

        def g(theta):
            val, _, _ = _line_lp_integral(line_at(theta), p, deg)
            return math.sin(theta) * val
    else:
        lo, hi = 0.0, TWO_PI

        def line_at(u):
            def line(ang):
                return e.evaluate_batch(
                    np.column_stack((np.full(len(ang), u), ang)))

            return line

        def g(u):
            val, _, _ = _line_lp_integral(line_at(u), p, deg)
            return val

    # probe pass: locate whole-line sign flips to split the outer integral
    m_probe = max(2 * deg, 32)
    probes = (hi - lo) * (np.arange(m_probe) + 0.5) / m_probe + lo
    counts = np.empty(m_probe, dtype=int)
    signs = np.empty(m_probe, dtype=int)
    for i, x in enumerate(probes):
        _, counts[i], signs[i] = _line_lp_integral(line_at(x), p, deg)

    def line_value(x):
        return float(line_at(x)(np.array([0.0]))[0])

    kinks = _outer_strong_kinks(line_value, probes, counts, signs)
    edges = np.concatenate([[lo], np.sort(kinks), [hi]]) if kinks else \
        np.array([lo, hi])
    pieces = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)
              if edges[i + 1] - edges[i] > 1e-12]

    xi, wg = gauss_interval(0.0, 1.0, _PIECE_GL)
    history: list[tuple[float, float]] = []
    integral = prev = None
    lines_used = m_probe
    for level in range(max_level + 1):
        h_level = (hi - lo) / (16 * 2 ** level)
        integral = 0.0
        for a, b in pieces:
            npan = max(1, math.ceil((b - a) / h_level))
            panel_edges = np.linspace(a, b, npan + 1)
            widths = np.diff(panel_edges)
            nodes = panel_edges[:-1, None] + widths[:, None] * xi[None, :]
            gv = np.array([g(x) for x in nodes.ravel()])
            integral += float(gv @ (widths[:, None] * wg[None, :]).ravel())
            lines_used += nodes.size
        history.append((float(level), integral))
        resolved = 16 * 2 ** level * _PIECE_GL >= 2 * deg
        if resolved and prev is not None and abs(integral - prev) <= rtol * max(
                abs(integral), 1e-300):
            break
        prev = integral if resolved else None
    else:
        raise ConvergenceError(
            f"L^{p} norm did not reach rtol={rtol} after {max_level + 1} "
            f"refinement levels ({lines_used} line integrals)",
            history=history)
    abserr = abs(integral - prev)
    value = max(integral, 0.0) ** (1.0 / p)
    err = value * abserr / (p * integral) if integral > 0 else abserr
    return NormReport(value, err,
                      {"exact": False, "p": p, "line_evals": lines_used,
                       "levels": level, "outer_splits": len(kinks)})


# ------------------------------------------------------------------ sup norm

def _nm_options(scale: float, fscale: float) -> dict:
    return dict(xatol=1e-5 * scale, fatol=1e-12 * max(fscale, 1e-30),
                maxiter=200, maxfev=400)


def _refine_sphere_point_max(e: Eigenfunction, x0: np.ndarray, h: float,
                             fscale: float) -> tuple[float, np.ndarray]:
    e1, e2 = _orthonormal_frame(x0)

    def obj(uv):
        pnt = x0 + uv[0] * e1 + uv[1] * e2
        pnt = pnt / np.linalg.norm(pnt)
        return -abs(float(e.evaluate(pnt)))

    res = minimize(obj, [0.0, 0.0], method="Nelder-Mead",
                   options=dict(_nm_options(h, fscale),
                                initial_simplex=[[0, 0], [h / 2, 0], [0, h / 2]]))
    pnt = x0 + res.x[0] * e1 + res.x[1] * e2
    return -float(res.fun), pnt / np.linalg.norm(pnt)


def _refine_torus_point_max(e: Eigenfunction, x0: np.ndarray, h: float,
                            fscale: float) -> tuple[float, np.ndarray]:
    def obj(uv):
        return -abs(float(e.evaluate(np.mod(x0 + uv, TWO_PI))))

    res = minimize(obj, [0.0, 0.0], method="Nelder-Mead",
                   options=dict(_nm_options(h, fscale),
                                initial_simplex=[[0, 0], [h / 2, 0], [0, h / 2]]))
    return -float(res.fun), np.mod(x0 + res.x, TWO_PI)


def _points_at_flat(grid, flat_indices) -> np.ndarray:
    """Grid points for flat (row-major) indices, without materializing nodes."""
    a0, a1 = grid.axes
    ii, jj = np.divmod(np.asarray(flat_indices, dtype=int), len(a1))
    if grid.manifold == SPHERE:
        th, ph = a0[ii], a1[jj]
        st = np.sin(th)
        return np.column_stack((st * np.cos(ph), st * np.sin(ph), np.cos(th)))
    return np.column_stack((a0[ii], a1[jj]))


def _top_grid_points(vals: np.ndarray, grid, n_keep: int,
                     min_sep: float) -> np.ndarray:
    """Points of the largest |vals| entries, deduplicated by distance."""
    flat = np.abs(vals).ravel()
    order = np.argpartition(flat, -min(40 * n_keep, flat.size))[-min(40 * n_keep, flat.size):]
    order = order[np.argsort(flat[order])[::-1]]
    pts = _points_at_flat(grid, order)
    kept: list[int] = []
    for row in range(len(order)):
        p = pts[row]
        if all(geodesic_distance(p, pts[j]) >= min_sep for j in kept):
            kept.append(row)
        if len(kept) >= n_keep:
            break
    return pts[kept]


def sup_norm(e: Eigenfunction, refine: bool = True,
             node_cap: int = DEFAULT_NODE_CAP) -> NormReport:
    """Sup norm of |e|: dense grid scan plus Nelder-Mead polish."""
    lam_eff = max(e.lam, 1.0)
    h = 0.2 / lam_eff
    if e.manifold == SPHERE:
        grid = sphere_uniform_grid(h, node_cap=node_cap)
    else:
        grid = torus_quadrature(max(8, int(math.ceil(TWO_PI / h))), node_cap=node_cap)
    vals = np.abs(e.evaluate_grid(grid))
    coarse = float(vals.max())
    best_pt = _points_at_flat(grid, [int(np.argmax(vals))])[0]
    best_val = coarse
    if refine and coarse > 0.0:
        for start in _top_grid_points(vals, grid, 6, 4 * h):
            if e.manifold == SPHERE:
                v, pt = _refine_sphere_point_max(e, start, h, coarse)
            else:
                v, pt = _refine_torus_point_max(e, start, h, coarse)
            if v > best_val:
                best_val, best_pt = v, pt
    return NormReport(best_val, best_val - coarse,
                      {"p": math.inf, "grid_shape": grid.shape, "spacing": h,
                       "refined": refine, "argmax": tuple(map(float, best_pt))})


# ----------------------------------------------------------- restriction norm

def restriction_norm(e: Eigenfunction, g: Geodesic, p: float = 2.0,
                     rtol: float = 1e-6, max_level: int = 9) -> NormReport:
    """L^p norm of e restricted to the geodesic g (arclength measure)."""
    if e.manifold != g.manifold:
        raise UsageError("eigenfunction and geodesic live on different manifolds")
    p = float(p)
    if math.isinf(p) and p > 0:
        return _sup_on_curve(e, g)
    if not math.isfinite(p) or p < 1.0:
        raise UsageError(f"p must lie in [1, inf], got {p}")
    L = g.length
    closed = g.is_closed
    if (closed and e.manifold == SPHERE and p.is_integer() and int(p) % 2 == 0):
        # |f|^p along a great circle is a trig polynomial of degree p*k
        n = int(p) * max(e.poly_degree, 0) + 2
        s = L * np.arange(n) / n
        vals = e.evaluate_batch(g.point_at(s))
        integral = float(np.sum(np.abs(vals) ** p) * (L / n))
        return NormReport(integral ** (1.0 / p), 0.0,
                          {"exact": True, "p": p, "nodes": n})
    n0 = max(32, int(math.ceil(L * max(e.lam, 1.0))))
    history: list[tuple[float, float]] = []
    prev = None
    for level in range(max_level + 1):
        n = n0 * 2 ** level
        if closed:
            s = L * np.arange(n) / n
            wts = np.full(n, L / n)
        else:
            s, wts = gauss_interval(0.0, L, n)
        vals = e.evaluate_batch(g.point_at(s))
        integral = float(wts @ np.abs(vals) ** p)
        history.append((float(n), integral))
        if prev is not None and abs(integral - prev) <= rtol * max(abs(integral), 1e-300):
            err_int = abs(integral - prev)
            value = integral ** (1.0 / p)
            err = value * err_int / (p * integral) if integral > 0 else err_int
            return NormReport(value, err,
                              {"exact": False, "p": p, "nodes": n, "levels": level + 1})
        prev = integral
    raise ConvergenceError(
        f"restriction L^{p} norm did not reach rtol={rtol}", history=history)


def _sup_on_curve(e: Eigenfunction, g: Geodesic) -> NormReport:
    n = max(64, 4 * (max(e.poly_degree, 0) + 1))
    s = g.length * np.arange(n) / n if g.is_closed else np.linspace(0.0, g.length, n)
    vals = np.abs(e.evaluate_batch(g.point_at(s)))
    coarse = float(vals.max())
    ds = g.length / n
    best = coarse
    for idx in np.argsort(vals)[::-1][:4]:
        lo, hi = s[idx] - ds, s[idx] + ds
        if not g.is_closed:
            lo, hi = max(lo, 0.0), min(hi, g.length)
        res = minimize_scalar(lambda t: -abs(float(e.evaluate(g.point_at(t)))),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return NormReport(best, best - coarse, {"p": math.inf, "nodes": n})


# ------------------------------------------------------------------ tube mass

def _sphere_tangent(g: Geodesic, s: float) -> np.ndarray:
    ang = g.phase + s
    return -math.sin(ang) * g.e1 + math.cos(ang) * g.e2


def _tube_rectangle(e: Eigenfunction, g: Geodesic, w: float,
                    ns: int, nd: int) -> float:
    s, sw = gauss_interval(0.0, g.length, ns)
    d, dw = gauss_interval(-w, w, nd)
    gamma = g.point_at(s)
    if g.manifold == SPHERE:
        pts = (np.cos(d)[None, :, None] * gamma[:, None, :]
               + np.sin(d)[None, :, None] * g.axis[None, None, :])
        f = e.evaluate_batch(pts.reshape(-1, 3)).reshape(ns, nd)
        return float(sw @ (f * f * np.cos(d)[None, :]) @ dw)
    perp = np.array([-g.direction[1], g.direction[0]])
    pts = np.mod(gamma[:, None, :] + d[None, :, None] * perp[None, None, :], TWO_PI)
    f = e.evaluate_batch(pts.reshape(-1, 2)).reshape(ns, nd)
    return float(sw @ (f * f) @ dw)


def _tube_cap(e: Eigenfunction, g: Geodesic, w: float, n: int, end: int) -> float:
    """Mass in the half-disk of radius w beyond one endpoint of the segment."""
    if g.manifold == SPHERE:
        E = g.point_at(0.0 if end == 0 else g.length)
        tau = _sphere_tangent(g, 0.0 if end == 0 else g.length)
        if end == 0:
            tau = -tau
        nu = g.axis
    else:
        E = g.point_at(0.0 if end == 0 else g.length)
        tau = g.direction if end == 1 else -g.direction
        nu = np.array([-g.direction[1], g.direction[0]])
    rho, rw = gauss_interval(0.0, w, n)
    psi, pw = gauss_interval(-math.pi / 2, math.pi / 2, max(n, 8))
    radial = (np.cos(psi)[:, None] * tau[None, :] + np.sin(psi)[:, None] * nu[None, :])
    if g.manifold == SPHERE:
        pts = (np.cos(rho)[:, None, None] * E[None, None, :]
               + np.sin(rho)[:, None, None] * radial[None, :, :])
        f = e.evaluate_batch(pts.reshape(-1, 3)).reshape(len(rho), len(psi))
        return float(rw @ (f * f * np.sin(rho)[:, None]) @ pw)
    pts = np.mod(E[None, None, :] + rho[:, None, None] * radial[None, :, :], TWO_PI)
    f = e.evaluate_batch(pts.reshape(-1, 2)).reshape(len(rho), len(psi))
    return float(rw @ (f * f * rho[:, None]) @ pw)


def tube_mass(e: Eigenfunction, tube: Tube, rtol: float = 1e-4,
              max_level: int = 8) -> NormReport:
    """Integral of e^2 over the tube (Fermi rectangle plus endpoint caps)."""
    g = tube.geodesic
    if e.manifold != g.manifold:
        raise UsageError("eigenfunction and tube live on different manifolds")
    w = tube.half_width
    if g.manifold == SPHERE and w > math.pi / 2 + 1e-12:
        raise UsageError("tube mass supports half-width <= pi/2 on the sphere")
    closed = g.is_closed
    lam_eff = max(e.lam, 1.0)
    ns0 = max(16, int(math.ceil(g.length * lam_eff / 3.0)) + 8)
    nd0 = max(6, int(math.ceil(2.0 * w * lam_eff / 3.0)) + 4)
    history: list[tuple[float, float]] = []
    prev = None
    for level in range(max_level + 1):
        ns, nd = ns0 * 2 ** level, nd0 * 2 ** level
        total = _tube_rectangle(e, g, w, ns, nd)
        if not closed:
            total += _tube_cap(e, g, w, nd, 0) + _tube_cap(e, g, w, nd, 1)
        history.append((float(ns * nd), total))
        if prev is not None and abs(total - prev) <= rtol * max(abs(total), 1e-300):
            return NormReport(total, abs(total - prev),
                              {"ns": ns, "nd": nd, "levels": level + 1,
                               "closed": closed, "half_width": w})
        prev = total
    raise ConvergenceError(f"tube mass did not reach rtol={rtol}", history=history)


# ------------------------------------------------------------------ ball mass

def ball_mass(e: Eigenfunction, center, radius: float, rtol: float = 1e-6,
              max_level: int = 9) -> NormReport:
    """Integral of e^2 over the geodesic ball B(center, radius)."""
    center = np.asarray(center, dtype=float).ravel()
    expected_dim = 3 if e.manifold == SPHERE else 2
    if center.size != expected_dim:
        raise UsageError("ball center does not match the eigenfunction manifold")
    if not 0.0 < radius <= math.pi:
        raise UsageError(f"ball radius must lie in (0, pi], got {radius}")
    lam_eff = max(e.lam, 1.0)
    n0 = max(8, int(math.ceil(radius * lam_eff / 2.0)) + 4)
    if e.manifold == SPHERE:
        center = center / np.linalg.norm(center)
        e1, e2 = _orthonormal_frame(center)
    history: list[tuple[float, float]] = []
    prev = None
    for level in range(max_level + 1):
        n_rho = n0 * 2 ** level
        n_psi = 2 * n_rho
        rho, rw = gauss_interval(0.0, radius, n_rho)
        psi = TWO_PI * np.arange(n_psi) / n_psi
        if e.manifold == SPHERE:
            radial = np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2
            pts = (np.cos(rho)[:, None, None] * center[None, None, :]
                   + np.sin(rho)[:, None, None] * radial[None, :, :])
            f = e.evaluate_batch(pts.reshape(-1, 3)).reshape(n_rho, n_psi)
            jac = np.sin(rho)
        else:
            radial = np.column_stack((np.cos(psi), np.sin(psi)))
            pts = np.mod(center[None, None, :] + rho[:, None, None] * radial[None, :, :],
                         TWO_PI)
            f = e.evaluate_batch(pts.reshape(-1, 2)).reshape(n_rho, n_psi)
            jac = rho
        integral = float(rw @ ((f * f).sum(axis=1) * jac) * (TWO_PI / n_psi))
        history.append((float(n_rho * n_psi), integral))
        if prev is not None and abs(integral - prev) <= rtol * max(abs(integral), 1e-300):
            return NormReport(integral, abs(integral - prev),
                              {"n_rho": n_rho, "n_psi": n_psi, "levels": level + 1,
                               "radius": radius})
        prev = integral
    raise ConvergenceError(f"ball mass did not reach rtol={rtol}", history=history)


# --------------------------------------------------- family coarse scaffolding

def _frames(axes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized orthonormal frames matching _orthonormal_frame row by row."""
    axes = np.atleast_2d(np.asarray(axes, dtype=float))
    ref = np.zeros_like(axes)
    small = np.abs(axes[:, 2]) < 0.9
    ref[small, 2] = 1.0
    ref[~small, 0] = 1.0
    e1 = np.cross(ref, axes)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(axes, e1)
    return e1, e2


def _sphere_circle_samples(e: Eigenfunction, axes: np.ndarray,
                           n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """f^2 sampled on the great circle of every axis; returns (f2, angles)."""
    e1, e2 = _frames(axes)
    ang = TWO_PI * np.arange(n_samples) / n_samples
    pts = (np.cos(ang)[None, :, None] * e1[:, None, :]
           + np.sin(ang)[None, :, None] * e2[:, None, :])
    f = e.evaluate_batch(pts.reshape(-1, 3)).reshape(len(axes), n_samples)
    return f * f, ang


def _window_sums(f2: np.ndarray, win_len: int) -> np.ndarray:
    """Circular windowed sums over axis 1: out[:, j] = sum f2[:, j:j+win_len]."""
    ext = np.concatenate([f2, f2[:, :win_len]], axis=1)
    c = np.cumsum(ext, axis=1)
    c = np.concatenate([np.zeros((f2.shape[0], 1)), c], axis=1)
    m = f2.shape[1]
    return c[:, win_len:win_len + m] - c[:, :m]


def _greedy_candidates(score: np.ndarray, angles: np.ndarray, length: float,
                       n_keep: int) -> list[tuple[int, float]]:
    """Top (axis index, start angle) pairs, deduped along each circle."""
    n_axes, m = score.shape
    order = np.argsort(score.ravel())[::-1]
    kept: list[tuple[int, float]] = []
    per_axis: dict[int, list[float]] = {}
    for flat in order[: 40 * n_keep]:
        i, j = divmod(int(flat), m)
        ang = float(angles[j])
        taken = per_axis.setdefault(i, [])
        gap = min((abs((ang - a + math.pi) % TWO_PI - math.pi) for a in taken),
                  default=math.inf)
        if gap < length / 2:
            continue
        taken.append(ang)
        kept.append((i, ang))
        if len(kept) >= n_keep:
            break
    return kept


def _continuous_sphere_arc(g0: Geodesic, u1: np.ndarray, u2: np.ndarray,
                           params: np.ndarray, closed: bool) -> Geodesic:
    """Perturb g0 by tangent offsets (a, b) of its axis and a phase shift,
    keeping the circle frame continuous in the parameters."""
    if closed:
        a, b = params
        dphi = 0.0
    else:
        a, b, dphi = params
    ax = g0.axis + a * u1 + b * u2
    ax = ax / np.linalg.norm(ax)
    e1 = g0.e1 - (g0.e1 @ ax) * ax
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(ax, e1)
    return Geodesic(manifold=SPHERE, length=g0.length, axis=ax,
                    phase=g0.phase + dphi, e1=e1, e2=e2)


def _shifted_torus_segment(g0: Geodesic, params: np.ndarray) -> Geodesic:
    a, b = params
    perp = np.array([-g0.direction[1], g0.direction[0]])
    base = np.mod(g0.base + a * perp + b * g0.direction, TWO_PI)
    return Geodesic(manifold=TORUS, length=g0.length, base=base,
                    direction=g0.direction)


# --------------------------------------------------------- Kakeya-Nikodym norm

def kn_norm(e: Eigenfunction, width: float | None = None, length: float = 1.0,
            closed: bool = False, density_factor: float = 1.0,
            family_cap: int = DEFAULT_FAMILY_CAP, n_candidates: int = 40,
            n_refine: int = 4, rtol: float = 1e-4,
            refine: bool = True) -> SearchResult:
    """Kakeya-Nikodym norm: max over a geodesic-tube family of the L^2 norm
    of e restricted to the tube. Default half-width is lam^{-1/2}.

    Returns the tube L^2 norm (square root of the best tube mass) together
    with the argmax geodesic.
    """
    lam_eff = max(e.lam, 1.0)
    w = float(width) if width is not None else 1.0 / math.sqrt(lam_eff)
    if w <= 0:
        raise UsageError("tube width must be positive")
    delta = density_factor / math.sqrt(lam_eff)
    if e.manifold == SPHERE:
        return _kn_sphere(e, w, length, closed, density_factor, delta,
                          family_cap, n_candidates, n_refine, rtol, refine)
    if closed:
        raise UsageError("closed tube search is supported on the sphere only")
    return _kn_torus(e, w, length, density_factor, delta, family_cap,
                     n_candidates, n_refine, rtol, refine)


def _kn_sphere(e, w, length, closed, density_factor, delta, family_cap,
               n_candidates, n_refine, rtol, refine) -> SearchResult:
    axes, phases = family_layout(SPHERE, max(e.lam, 1.0), density_factor,
                                 length=length, closed=closed,
                                 family_cap=family_cap)
    family_size = len(axes) * len(phases)
    m = max(2 * max(e.poly_degree, 1) + 2, 64)
    f2, ang = _sphere_circle_samples(e, axes, m)
    ds = TWO_PI / m
    arc_len = TWO_PI if closed else length
    if closed:
        proxy = f2.sum(axis=1, keepdims=True) * ds
        cand = [(int(i), 0.0) for i in np.argsort(proxy[:, 0])[::-1][:n_candidates]]
    else:
        win = _window_sums(f2, max(1, int(round(length / ds)))) * ds
        cand = _greedy_candidates(win, ang, length, n_candidates)
    scored: list[tuple[float, Geodesic]] = []
    for i, ph in cand:
        g = Geodesic.sphere_arc(axes[i], phase=ph, length=arc_len)
        scored.append((tube_mass(e, Tube(g, w), rtol=10 * rtol).value, g))
    scored.sort(key=lambda t: -t[0])
    coarse_best = math.sqrt(max(scored[0][0], 0.0))
    best_mass, best_g = scored[0]
    if refine:
        for mass0, g0 in scored[:n_refine]:
            u1, u2 = _orthonormal_frame(g0.axis)

            def obj(params, g0=g0, u1=u1, u2=u2):
                gg = _continuous_sphere_arc(g0, u1, u2, params, closed)
                return -tube_mass(e, Tube(gg, w), rtol=10 * rtol).value

            x0 = np.zeros(2 if closed else 3)
            step = delta / 2
            simplex = [x0] + [x0 + step * v for v in np.eye(len(x0))]
            res = minimize(obj, x0, method="Nelder-Mead",
                           options=dict(xatol=1e-3 * delta, fatol=1e-5 * max(mass0, 1e-30),
                                        maxiter=80, maxfev=160,
                                        initial_simplex=simplex))
            if -res.fun > best_mass:
                best_mass = -float(res.fun)
                best_g = _continuous_sphere_arc(g0, u1, u2, res.x, closed)
    final = tube_mass(e, Tube(best_g, w), rtol=rtol)
    gap = delta * max(e.lam, 1.0) * float(f2.max()) * 2.0 * w * arc_len
    return SearchResult(math.sqrt(max(final.value, 0.0)), best_g, coarse_best,
                        family_size, gap,
                        {"width": w, "closed": closed, "candidates": len(cand),
                         "refined": refine, "mass": final.value,
                         "mass_error": final.error_estimate})


def _kn_torus(e, w, length, density_factor, delta, family_cap,
              n_candidates, n_refine, rtol, refine) -> SearchResult:
    bases, dirs = family_layout(TORUS, max(e.lam, 1.0), density_factor,
                                length=length, family_cap=family_cap)
    family_size = len(bases) * len(dirs)
    lam_eff = max(e.lam, 1.0)
    m = max(16, int(math.ceil(length * lam_eff / 2.0)))
    s = length * (np.arange(m) + 0.5) / m
    best_rows: list[tuple[float, int, int]] = []
    maxf2 = 0.0
    for di, d in enumerate(dirs):
        pts = np.mod(bases[:, None, :] + s[None, :, None] * d[None, None, :], TWO_PI)
        f = e.evaluate_batch(pts.reshape(-1, 2)).reshape(len(bases), m)
        f2 = f * f
        maxf2 = max(maxf2, float(f2.max()))
        proxy = f2.sum(axis=1) * (length / m)
        for bi in np.argsort(proxy)[::-1][: max(2, n_candidates // len(dirs))]:
            best_rows.append((float(proxy[bi]), di, int(bi)))
    best_rows.sort(key=lambda t: -t[0])
    scored: list[tuple[float, Geodesic]] = []
    for _, di, bi in best_rows[:n_candidates]:
        g = Geodesic.torus_segment(bases[bi], dirs[di], length=length)
        scored.append((tube_mass(e, Tube(g, w), rtol=10 * rtol).value, g))
    scored.sort(key=lambda t: -t[0])
    coarse_best = math.sqrt(max(scored[0][0], 0.0))
    best_mass, best_g = scored[0]
    if refine:
        for mass0, g0 in scored[:n_refine]:

            def obj(params, g0=g0):
                return -tube_mass(e, Tube(_shifted_torus_segment(g0, params), w),
                                  rtol=10 * rtol).value

            x0 = np.zeros(2)
            simplex = [x0, x0 + [delta / 2, 0], x0 + [0, delta / 2]]
            res = minimize(obj, x0, method="Nelder-Mead",
                           options=dict(xatol=1e-3 * delta, fatol=1e-5 * max(mass0, 1e-30),
                                        maxiter=80, maxfev=160,
                                        initial_simplex=simplex))
            if -res.fun > best_mass:
                best_mass = -float(res.fun)
                best_g = _shifted_torus_segment(g0, res.x)
    final = tube_mass(e, Tube(best_g, w), rtol=rtol)
    gap = delta * lam_eff * maxf2 * 2.0 * w * length
    return SearchResult(math.sqrt(max(final.value, 0.0)), best_g, coarse_best,
                        family_size, gap,
                        {"width": w, "closed": False, "candidates": len(scored),
                         "refined": refine, "mass": final.value,
                         "mass_error": final.error_estimate})


# --------------------------------------------------------- sup of restrictions

def sup_restriction_norm(e: Eigenfunction, length: float = 1.0,
                         closed: bool = False, density_factor: float = 1.0,
                         family_cap: int = DEFAULT_FAMILY_CAP,
                         n_candidates: int = 40, n_refine: int = 4,
                         rtol: float = 1e-6, refine: bool = True) -> SearchResult:
    """Max over a geodesic family of the L^2 restriction norm of e."""
    lam_eff = max(e.lam, 1.0)
    delta = density_factor / math.sqrt(lam_eff)
    if e.manifold == SPHERE:
        axes, phases = family_layout(SPHERE, lam_eff, density_factor,
                                     length=length, closed=closed,
                                     family_cap=family_cap)
        family_size = len(axes) * len(phases)
        m = max(2 * max(e.poly_degree, 1) + 2, 64)
        f2, ang = _sphere_circle_samples(e, axes, m)
        ds = TWO_PI / m
        arc_len = TWO_PI if closed else length
        if closed:
            proxy = f2.sum(axis=1, keepdims=True) * ds
            cand = [(int(i), 0.0) for i in np.argsort(proxy[:, 0])[::-1][:n_candidates]]
            coarse_best = math.sqrt(float(proxy.max()))
        else:
            win = _window_sums(f2, max(1, int(round(length / ds)))) * ds
            cand = _greedy_candidates(win, ang, length, n_candidates)
            coarse_best = math.sqrt(float(win.max()))
        geos = [Geodesic.sphere_arc(axes[i], phase=ph, length=arc_len)
                for i, ph in cand]
        scored = [(restriction_norm(e, g, 2.0, rtol=10 * rtol).value, g) for g in geos]
        scored.sort(key=lambda t: -t[0])
        best_val, best_g = scored[0]
        if refine:
            for v0, g0 in scored[:n_refine]:
                u1, u2 = _orthonormal_frame(g0.axis)

                def obj(params, g0=g0, u1=u1, u2=u2):
                    gg = _continuous_sphere_arc(g0, u1, u2, params, closed)
                    return -restriction_norm(e, gg, 2.0, rtol=10 * rtol).value

                x0 = np.zeros(2 if closed else 3)
                simplex = [x0] + [x0 + (delta / 2) * v for v in np.eye(len(x0))]
                res = minimize(obj, x0, method="Nelder-Mead",
                               options=dict(xatol=1e-3 * delta,
                                            fatol=1e-6 * max(v0, 1e-30),
                                            maxiter=80, maxfev=160,
                                            initial_simplex=simplex))
                if -res.fun > best_val:
                    best_val = -float(res.fun)
                    best_g = _continuous_sphere_arc(g0, u1, u2, res.x, closed)
        final = restriction_norm(e, best_g, 2.0, rtol=rtol)
        gap = delta * lam_eff * float(f2.max()) * (TWO_PI if closed else length)
        return SearchResult(final.value, best_g, coarse_best, family_size, gap,
                            {"closed": closed, "length": arc_len,
                             "candidates": len(cand), "refined": refine})
    if closed:
        raise UsageError("closed restriction search is supported on the sphere only")
    kn_like = _kn_torus_restriction(e, length, density_factor, delta,
                                    family_cap, n_candidates, n_refine, rtol, refine)
    return kn_like


def _kn_torus_restriction(e, length, density_factor, delta, family_cap,
                          n_candidates, n_refine, rtol, refine) -> SearchResult:
    bases, dirs = family_layout(TORUS, max(e.lam, 1.0), density_factor,
                                length=length, family_cap=family_cap)
    family_size = len(bases) * len(dirs)
    lam_eff = max(e.lam, 1.0)
    m = max(16, int(math.ceil(length * lam_eff / 2.0)))
    s = length * (np.arange(m) + 0.5) / m
    rows: list[tuple[float, int, int]] = []
    maxf2 = 0.0
    for di, d in enumerate(dirs):
        pts = np.mod(bases[:, None, :] + s[None, :, None] * d[None, None, :], TWO_PI)
        f = e.evaluate_batch(pts.reshape(-1, 2)).reshape(len(bases), m)
        f2 = f * f
        maxf2 = max(maxf2, float(f2.max()))
        proxy = f2.sum(axis=1) * (length / m)
        for bi in np.argsort(proxy)[::-1][: max(2, n_candidates // len(dirs))]:
            rows.append((float(proxy[bi]), di, int(bi)))
    rows.sort(key=lambda t: -t[0])
    coarse_best = math.sqrt(rows[0][0])
    scored = []
    for _, di, bi in rows[:n_candidates]:
        g = Geodesic.torus_segment(bases[bi], dirs[di], length=length)
        scored.append((restriction_norm(e, g, 2.0, rtol=10 * rtol).value, g))
    scored.sort(key=lambda t: -t[0])
    best_val, best_g = scored[0]
    if refine:
        for v0, g0 in scored[:n_refine]:

            def obj(params, g0=g0):
                return -restriction_norm(e, _shifted_torus_segment(g0, params),
                                         2.0, rtol=10 * rtol).value

            x0 = np.zeros(2)
            simplex = [x0, x0 + [delta / 2, 0], x0 + [0, delta / 2]]
            res = minimize(obj, x0, method="Nelder-Mead",
                           options=dict(xatol=1e-3 * delta, fatol=1e-6 * max(v0, 1e-30),
                                        maxiter=80, maxfev=160,
                                        initial_simplex=simplex))
            if -res.fun > best_val:
                best_val = -float(res.fun)
                best_g = _shifted_torus_segment(g0, res.x)
    final = restriction_norm(e, best_g, 2.0, rtol=rtol)
    gap = delta * lam_eff * maxf2 * length
    return SearchResult(final.value, best_g, coarse_best, family_size, gap,
                        {"closed": False, "length": length,
                         "candidates": len(scored), "refined": refine})


# --------------------------------------------------------------- sup ball mass

def sup_ball_mass(e: Eigenfunction, radius: float,
                  n_candidates: int = 20, n_refine: int = 5,
                  rtol: float = 1e-4, refine: bool = True,
                  node_cap: int = DEFAULT_NODE_CAP) -> SearchResult:
    """Max over centers of the mass of e^2 in a geodesic ball of the given
    radius. Candidate centers are the largest |e| grid values; each leading
    candidate is polished by Nelder-Mead on the exact ball mass."""
    if not 0.0 < radius <= math.pi:
        raise UsageError(f"ball radius must lie in (0, pi], got {radius}")
    lam_eff = max(e.lam, 1.0)
    h = min(0.25 / lam_eff, radius / 2.0)
    if e.manifold == SPHERE:
        grid = sphere_uniform_grid(h, node_cap=node_cap)
    else:
        grid = torus_quadrature(max(8, int(math.ceil(TWO_PI / h))), node_cap=node_cap)
    vals = np.abs(e.evaluate_grid(grid))
    centers = _top_grid_points(vals, grid, n_candidates, radius / 2)
    scored = [(ball_mass(e, c, radius, rtol=10 * rtol).value, c) for c in centers]
    scored.sort(key=lambda t: -t[0])
    coarse_best = scored[0][0]
    best_mass, best_c = scored[0]
    if refine:
        for m0, c0 in scored[:n_refine]:
            if e.manifold == SPHERE:
                e1, e2 = _orthonormal_frame(c0)

                def obj(uv, c0=c0, e1=e1, e2=e2):
                    c = c0 + uv[0] * e1 + uv[1] * e2
                    c = c / np.linalg.norm(c)
                    return -ball_mass(e, c, radius, rtol=10 * rtol).value
            else:

                def obj(uv, c0=c0):
                    return -ball_mass(e, np.mod(c0 + uv, TWO_PI), radius,
                                      rtol=10 * rtol).value

            x0 = np.zeros(2)
            simplex = [x0, x0 + [h / 2, 0], x0 + [0, h / 2]]
            res = minimize(obj, x0, method="Nelder-Mead",
                           options=dict(xatol=1e-3 * h, fatol=1e-5 * max(m0, 1e-30),
                                        maxiter=80, maxfev=160,
                                        initial_simplex=simplex))
            if -res.fun > best_mass:
                best_mass = -float(res.fun)
                if e.manifold == SPHERE:
                    e1, e2 = _orthonormal_frame(c0)
                    c = c0 + res.x[0] * e1 + res.x[1] * e2
                    best_c = c / np.linalg.norm(c)
                else:
                    best_c = np.mod(c0 + res.x, TWO_PI)
    final = ball_mass(e, best_c, radius, rtol=rtol)
    gap = h * lam_eff * float(vals.max()) ** 2 * math.pi * radius ** 2
    return SearchResult(final.value, tuple(map(float, best_c)), coarse_best,
                        len(centers), gap,
                        {"radius": radius, "refined": refine,
                         "spacing": h, "mass_error": final.error_estimate})
