"""Nodal-set length and level-band volumes on S^2 and T^2.

``nodal_length`` triangulates the surface (geodesic icosphere on the
sphere, right-isoceles split of the uniform grid on the torus), locates
the zero of the linear interpolant on every sign-changing edge, and sums
the per-triangle chords with geodesic correction.  The mesh parameter is
halved until the total length settles.

``level_band_volume`` measures Vol({a <= |e| <= b}) inside a tube or the
whole manifold with exact-area cells; cells whose corner values straddle
a threshold are resolved by 4x4 sub-cell sampling.

Triangle processing is vectorized per chunk (faces / row bands), and the
chunk totals are combined with ``math.fsum`` so results are reproducible
independent of chunk sizes to ~1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigenfunctions import RANDOM_HARMONIC, Eigenfunction
from .errors import ConvergenceError, UsageError
from .geometry import (SPHERE, TORUS, TWO_PI, QuadratureGrid, Tube,
                       fibonacci_sphere)

__all__ = ["NodalEstimate", "LevelBandMeasure", "nodal_length",
           "level_band_volume"]

# golden-ratio icosahedron: 12 vertices, 20 faces
_TAU = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [(-1, _TAU, 0), (1, _TAU, 0), (-1, -_TAU, 0), (1, -_TAU, 0),
     (0, -1, _TAU), (0, 1, _TAU), (0, -1, -_TAU), (0, 1, -_TAU),
     (_TAU, 0, -1), (_TAU, 0, 1), (-_TAU, 0, -1), (-_TAU, 0, 1)],
    dtype=float)
_ICO_VERTS /= np.linalg.norm(_ICO_VERTS, axis=1, keepdims=True)
_ICO_FACES = np.array(
    [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
     (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
     (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
     (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)],
    dtype=int)
# arc length of an icosahedron edge; projected sub-edges stay below
# 1.3x the nominal subdivision, hence the 1.44 safety factor
_ICO_EDGE_ARC = 2.0 * math.asin(1.0 / math.sqrt(1.0 + _TAU * _TAU))

_NUDGE_REL = 1e-14
_CHUNK_TRIANGLES = 2_000_000


@dataclass(frozen=True)
class NodalEstimate:
    """Nodal-set length with its mesh-refinement history."""

    length: float
    h: float
    history: tuple[tuple[float, float], ...]
    crossings: int
    meta: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class LevelBandMeasure:
    """Volume of {a <= |e| <= b} inside a region."""

    volume: float
    band: tuple[float, float]
    region: object
    region_volume: float
    meta: dict = field(default_factory=dict, compare=False)


# ------------------------------------------------------------ evaluators

class _Evaluator:
    """Pointwise evaluation, with a spline fast path for high-degree
    random spherical harmonics (exact per-point sums cost O(k^2))."""

    def __init__(self, e: Eigenfunction):
        self.e = e
        self.interpolated = (e.manifold == SPHERE
                             and e.family == RANDOM_HARMONIC
                             and e.degree >= 16)
        self._spline = None
        if self.interpolated:
            self._spline = _build_sphere_spline(e)

    def points(self, pts: np.ndarray) -> np.ndarray:
        if self._spline is None:
            return self.e.evaluate_batch(pts)
        theta = np.arccos(np.clip(pts[:, 2], -1.0, 1.0))
        phi = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI)
        return self._spline.ev(theta, phi)


def _build_sphere_spline(e: Eigenfunction):
    from scipy.interpolate import RectBivariateSpline

    k = max(e.degree, 1)
    n_theta = 12 * k + 13
    n_phi = 24 * k
    theta = np.linspace(0.0, math.pi, n_theta)
    # pad phi past the seam so queries in [0, 2pi) stay interior
    jj = np.arange(-6, n_phi + 7)
    phi = TWO_PI * jj / n_phi
    grid = QuadratureGrid(manifold=SPHERE, kind="interp",
                          axes=(theta, phi),
                          axis_weights=(np.zeros(n_theta), np.zeros(len(phi))))
    vals = e.evaluate_grid(grid)
    return RectBivariateSpline(theta, phi, vals, kx=3, ky=3)


def _value_scale(e: Eigenfunction) -> float:
    """Cheap deterministic estimate of ||e||_inf for the zero nudge."""
    if e.manifold == SPHERE:
        pts = fibonacci_sphere(512)
    else:
        u = TWO_PI * np.arange(24) / 24
        pts = np.column_stack([np.repeat(u, 24), np.tile(u, 24)])
    m = float(np.max(np.abs(e.evaluate_batch(pts))))
    return m if m > 0 else 1.0


# ---------------------------------------------------------------- marching

def _march_triangles(P: np.ndarray, vals: np.ndarray, tris: np.ndarray,
                     on_sphere: bool) -> tuple[float, int]:
    """Total contour length and segment count for one triangle chunk.

    Each triangle with vertices of mixed sign has exactly two
    sign-changing edges; the zero of the linear interpolant on each gives
    the segment endpoints.
    """
    f = vals[tris]
    pos = f[:, 0] > 0, f[:, 1] > 0, f[:, 2] > 0
    cross = (pos[0] != pos[1], pos[1] != pos[2], pos[2] != pos[0])
    active = np.nonzero(cross[0] | cross[1] | cross[2])[0]
    if len(active) == 0:
        return 0.0, 0
    masks = np.stack([c[active] for c in cross])
    tri, fa = tris[active], f[active]
    ends = np.empty((3, len(active), P.shape[1]))
    for eidx, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
        m = masks[eidx]
        fi, fj = fa[m, i], fa[m, j]
        pi, pj = P[tri[m, i]], P[tri[m, j]]
        ends[eidx, m] = (fj[:, None] * pi - fi[:, None] * pj) / (fj - fi)[:, None]
    # first two crossing edges of each active triangle (exactly two exist)
    order = np.argsort(~masks, axis=0, kind="stable")
    rows = np.arange(len(active))
    q1, q2 = ends[order[0], rows], ends[order[1], rows]
    if on_sphere:
        q1 /= np.linalg.norm(q1, axis=1, keepdims=True)
        q2 /= np.linalg.norm(q2, axis=1, keepdims=True)
        seg = np.arccos(np.clip(np.sum(q1 * q2, axis=1), -1.0, 1.0))
    else:
        seg = np.linalg.norm(q1 - q2, axis=1)
    return float(np.sum(seg)), len(active)


def _band_triangles(n: int, i0: int, i1: int) -> np.ndarray:
    """Triangles of a barycentric face lattice restricted to rows
    i0 <= i < i1, indexed into the band's local vertex layout."""
    counts = np.arange(n + 1 - i0, n - i1, -1)  # points per band row
    offs = np.concatenate([[0], np.cumsum(counts)])
    parts = []
    for r, i in enumerate(range(i0, i1)):
        j = np.arange(n - i)
        a, b, c = offs[r] + j, offs[r + 1] + j, offs[r] + j + 1
        parts.append(np.column_stack([a, b, c]))
        if n - i - 1 > 0:
            j2 = np.arange(n - i - 1)
            parts.append(np.column_stack([offs[r + 1] + j2,
                                          offs[r + 1] + j2 + 1,
                                          offs[r] + j2 + 1]))
    return np.vstack(parts) if parts else np.empty((0, 3), dtype=int)


def _band_lattice(A: np.ndarray, B: np.ndarray, C: np.ndarray,
                  n: int, i0: int, i1: int) -> np.ndarray:
    """Projected lattice points of rows i0..i1 (inclusive) of a face."""
    counts = np.arange(n + 1 - i0, n - i1, -1)
    i_idx = np.repeat(np.arange(i0, i1 + 1), counts)
    j_idx = np.concatenate([np.arange(c) for c in counts])
    P = ((n - i_idx - j_idx)[:, None] * A
         + i_idx[:, None] * B + j_idx[:, None] * C) / n
    return P / np.linalg.norm(P, axis=1, keepdims=True)


def _sphere_nodal_level(ev: _Evaluator, n: int, nudge: float
                        ) -> tuple[float, int, int]:
    lengths, crossings, nudged = [], 0, 0
    band = max(1, min(n, _CHUNK_TRIANGLES // max(2 * n, 1)))
    for face in _ICO_FACES:
        A, B, C = _ICO_VERTS[face]
        for i0 in range(0, n, band):
            i1 = min(i0 + band, n)
            P = _band_lattice(A, B, C, n, i0, i1)
            vals = ev.points(P)
            zeros = vals == 0.0
            if np.any(zeros):
                nudged += int(np.count_nonzero(zeros))
                vals = np.where(zeros, nudge, vals)
            tris = _band_triangles(n, i0, i1)
            ln, nc = _march_triangles(P, vals, tris, on_sphere=True)
            lengths.append(ln)
            crossings += nc
    return math.fsum(lengths), crossings, nudged


def _torus_nodal_level(e: Eigenfunction, n: int, nudge: float
                       ) -> tuple[float, int, int]:
    u = TWO_PI * np.arange(n) / n
    grid = QuadratureGrid(manifold=TORUS, kind="nodal", axes=(u, u),
                          axis_weights=(np.zeros(n), np.zeros(n)))
    V = e.evaluate_grid(grid)
    zeros = V == 0.0
    nudged = int(np.count_nonzero(zeros))
    if nudged:
        V = np.where(zeros, nudge, V)
    V = np.pad(V, ((0, 1), (0, 1)), mode="wrap")
    ue = TWO_PI * np.arange(n + 1) / n  # local coords; seam duplicated
    lengths, crossings = [], 0
    rows = max(1, _CHUNK_TRIANGLES // max(2 * n, 1))
    for r0 in range(0, n, rows):
        r1 = min(r0 + rows, n)
        m = r1 - r0 + 1
        P = np.column_stack([np.repeat(ue[r0:r1 + 1], n + 1), np.tile(ue, m)])
        vals = V[r0:r1 + 1].ravel()
        base = (np.arange(r1 - r0)[:, None] * (n + 1)
                + np.arange(n)[None, :]).ravel()
        up = np.column_stack([base, base + n + 1, base + 1])
        down = np.column_stack([base + n + 1, base + n + 2, base + 1])
        ln, nc = _march_triangles(P, vals, np.vstack([up, down]),
                                  on_sphere=False)
        lengths.append(ln)
        crossings += nc
    return math.fsum(lengths), crossings, nudged


def nodal_length(e: Eigenfunction, h: float | None = None,
                 rtol: float = 0.01, max_level: int = 6) -> NodalEstimate:
    """Length of the zero set of e, by marching triangles at mesh size h,
    then h/2, ... until the relative change drops below rtol."""
    lam_eff = max(e.lam, 1.0)
    h_max = 0.5 / lam_eff
    if h is None:
        h = h_max
    if not (0.0 < h <= h_max * (1 + 1e-12)):
        raise UsageError(
            f"mesh parameter h={h} must lie in (0, 0.5/lambda] = (0, {h_max:g}]")
    nudge = _NUDGE_REL * _value_scale(e)
    ev = _Evaluator(e) if e.manifold == SPHERE else None
    history: list[tuple[float, float]] = []
    prev = None
    crossings = nudged = 0
    n_final = 0
    for level in range(max_level + 1):
        h_level = h / 2 ** level
        if e.manifold == SPHERE:
            n = max(2, int(math.ceil(1.3 * _ICO_EDGE_ARC / h_level)))
            length, crossings, nudged = _sphere_nodal_level(ev, n, nudge)
            n_final = 20 * n * n
        else:
            n = max(4, int(math.ceil(TWO_PI * math.sqrt(2.0) / h_level)))
            length, crossings, nudged = _torus_nodal_level(e, n, nudge)
            n_final = 2 * n * n
        history.append((h_level, length))
        if prev is not None and abs(length - prev) <= rtol * max(length, prev, 1e-300):
            meta = {"triangles": n_final, "zero_nudges": nudged,
                    "interpolated": bool(ev.interpolated) if ev else False}
            return NodalEstimate(length=length, h=h_level,
                                 history=tuple(history),
                                 crossings=crossings, meta=meta)
        prev = length
    raise ConvergenceError(
        f"nodal length did not settle to rtol={rtol} within "
        f"{max_level + 1} refinements", history=history)


# --------------------------------------------------------- level-band volume

class _Panel:
    """One separable parameter patch of a region: points p(u, v) carrying
    the measure dG_u(u) dG_v(v)."""

    def __init__(self, u_span, v_span, Gu, Gv, point_map, nu0, nv0,
                 grid_values=None):
        self.u_span, self.v_span = u_span, v_span
        self.Gu, self.Gv = Gu, Gv
        self.point_map = point_map
        self.nu0, self.nv0 = nu0, nv0
        self.grid_values = grid_values


def _panel_volume(panel: _Panel, ev_points, a: float, b: float,
                  level: int) -> tuple[float, int]:
    nu, nv = panel.nu0 * 2 ** level, panel.nv0 * 2 ** level
    ue = np.linspace(panel.u_span[0], panel.u_span[1], nu + 1)
    ve = np.linspace(panel.v_span[0], panel.v_span[1], nv + 1)
    if panel.grid_values is not None:
        F = panel.grid_values(ue, ve)
    else:
        UU = np.repeat(ue, nv + 1)
        VV = np.tile(ve, nu + 1)
        F = ev_points(panel.point_map(UU, VV)).reshape(nu + 1, nv + 1)
    du = np.diff(panel.Gu(ue))
    dv = np.diff(panel.Gv(ve))
    measures = np.outer(du, dv)
    c = np.stack([F[:-1, :-1], F[1:, :-1], F[:-1, 1:], F[1:, 1:]])
    mx = np.abs(c).max(axis=0)
    # |f| reaches 0 inside any cell whose corners change sign
    mn = np.where(c.min(axis=0) * c.max(axis=0) < 0.0, 0.0,
                  np.abs(c).min(axis=0))
    inside = (mn >= a) & (mx <= b)
    outside = (mx < a) | (mn > b)
    flagged = ~(inside | outside)
    vol = float(np.sum(measures, where=inside))
    fi, fj = np.nonzero(flagged)
    if len(fi):
        # 4x4 sub-cell centers with exact sub-cell measures
        hu = (ue[1] - ue[0])
        hv = (ve[1] - ve[0])
        su = ue[fi][:, None] + (np.arange(4) + 0.5)[None, :] * (hu / 4)
        sv = ve[fj][:, None] + (np.arange(4) + 0.5)[None, :] * (hv / 4)
        gu = np.diff(panel.Gu(ue[fi][:, None]
                              + np.arange(5)[None, :] * (hu / 4)), axis=1)
        gv = np.diff(panel.Gv(ve[fj][:, None]
                              + np.arange(5)[None, :] * (hv / 4)), axis=1)
        UU = np.repeat(su, 4, axis=1).ravel()
        VV = np.tile(sv, (1, 4)).ravel()
        sub = np.abs(ev_points(panel.point_map(UU, VV))).reshape(len(fi), 4, 4)
        ind = (sub >= a) & (sub <= b)
        sub_measure = gu[:, :, None] * gv[:, None, :]
        vol += float(np.sum(sub_measure * ind))
    return vol, len(fi)


def _whole_manifold_panels(e: Eigenfunction) -> tuple[list[_Panel], float]:
    lam_eff = max(e.lam, 1.0)
    if e.manifold == SPHERE:
        def grid_values(ue, ve):
            g = QuadratureGrid(manifold=SPHERE, kind="band", axes=(ue, ve),
                               axis_weights=(np.zeros(len(ue)), np.zeros(len(ve))))
            return e.evaluate_grid(g)

        panel = _Panel((0.0, math.pi), (0.0, TWO_PI),
                       lambda t: -np.cos(t), lambda p: p,
                       point_map=lambda u, v: np.column_stack(
                           [np.sin(u) * np.cos(v), np.sin(u) * np.sin(v),
                            np.cos(u)]),
                       nu0=max(24, int(math.ceil(math.pi * lam_eff))),
                       nv0=max(48, int(math.ceil(TWO_PI * lam_eff))),
                       grid_values=grid_values)
        return [panel], 4.0 * math.pi
    def grid_values(ue, ve):
        g = QuadratureGrid(manifold=TORUS, kind="band", axes=(ue, ve),
                           axis_weights=(np.zeros(len(ue)), np.zeros(len(ve))))
        return e.evaluate_grid(g)

    n0 = max(32, int(math.ceil(TWO_PI * lam_eff)))
    panel = _Panel((0.0, TWO_PI), (0.0, TWO_PI), lambda t: t, lambda p: p,
                   point_map=lambda u, v: np.column_stack([u, v]),
                   nu0=n0, nv0=n0, grid_values=grid_values)
    return [panel], 4.0 * math.pi * math.pi


def _tube_panels(e: Eigenfunction, tube: Tube) -> tuple[list[_Panel], float]:
    g = tube.geodesic
    w = tube.half_width
    if e.manifold != g.manifold:
        raise UsageError("eigenfunction and tube live on different manifolds")
    if g.manifold == SPHERE and w > math.pi / 2 + 1e-12:
        raise UsageError("level bands support tube half-width <= pi/2 on the sphere")
    lam_eff = max(e.lam, 1.0)
    ns0 = max(16, int(math.ceil(g.length * lam_eff / 2.0)))
    nd0 = max(6, int(math.ceil(2.0 * w * lam_eff)))
    nc0 = max(6, int(math.ceil(w * lam_eff)))
    panels = []
    if g.manifold == SPHERE:
        axis = g.axis

        def rect_map(s, d):
            gamma = g.point_at(s)
            return np.cos(d)[:, None] * gamma + np.sin(d)[:, None] * axis[None, :]

        panels.append(_Panel((0.0, g.length), (-w, w),
                             lambda s: s, lambda d: np.sin(d),
                             rect_map, ns0, nd0))
    else:
        perp = np.array([-g.direction[1], g.direction[0]])

        def rect_map(s, d):
            return np.mod(g.point_at(s) + d[:, None] * perp[None, :], TWO_PI)

        panels.append(_Panel((0.0, g.length), (-w, w),
                             lambda s: s, lambda d: d, rect_map, ns0, nd0))
    if not g.is_closed:
        for end in (0, 1):
            s_end = 0.0 if end == 0 else g.length
            E = g.point_at(s_end)
            if g.manifold == SPHERE:
                ang = g.phase + s_end
                tau = -math.sin(ang) * g.e1 + math.cos(ang) * g.e2
                nu = g.axis
            else:
                tau = g.direction if end == 1 else -g.direction
                nu = np.array([-g.direction[1], g.direction[0]])
            if end == 0 and g.manifold == SPHERE:
                tau = -tau

            def cap_map(rho, psi, E=E, tau=np.asarray(tau), nu=np.asarray(nu)):
                radial = (np.cos(psi)[:, None] * tau[None, :]
                          + np.sin(psi)[:, None] * nu[None, :])
                if g.manifold == SPHERE:
                    return (np.cos(rho)[:, None] * E[None, :]
                            + np.sin(rho)[:, None] * radial)
                return np.mod(E[None, :] + rho[:, None] * radial, TWO_PI)

            if g.manifold == SPHERE:
                panels.append(_Panel((0.0, w), (-math.pi / 2, math.pi / 2),
                                     lambda r: -np.cos(r), lambda p: p,
                                     cap_map, nc0, max(8, nc0)))
            else:
                panels.append(_Panel((0.0, w), (-math.pi / 2, math.pi / 2),
                                     lambda r: r * r / 2.0, lambda p: p,
                                     cap_map, nc0, max(8, nc0)))
    return panels, tube.volume()


def level_band_volume(e: Eigenfunction, region: Tube | None, a: float,
                      b: float, rtol: float = 0.02,
                      max_level: int = 6) -> LevelBandMeasure:
    """Volume of {x in region : a <= |e(x)| <= b}, refined until the
    relative change between grid levels drops below rtol. ``region`` is a
    Tube or None for the whole manifold."""
    if not (0.0 <= a <= b):
        raise UsageError(f"band must satisfy 0 <= a <= b, got [{a}, {b}]")
    if region is None:
        panels, region_vol = _whole_manifold_panels(e)
        region_desc = e.manifold
    elif isinstance(region, Tube):
        panels, region_vol = _tube_panels(e, region)
        region_desc = region
    else:
        raise UsageError("region must be a Tube or None (whole manifold)")
    ev = _Evaluator(e) if e.manifold == SPHERE else None
    ev_points = ev.points if ev is not None else e.evaluate_batch
    history: list[tuple[float, float]] = []
    prev = None
    for level in range(max_level + 1):
        flagged = 0
        vol = 0.0
        for panel in panels:
            pv, nf = _panel_volume(panel, ev_points, a, b, level)
            vol += pv
            flagged += nf
        history.append((float(level), vol))
        if prev is not None and abs(vol - prev) <= rtol * max(vol, prev, 1e-300):
            meta = {"levels": level + 1, "flagged_cells": flagged,
                    "history": tuple(history),
                    "interpolated": bool(ev.interpolated) if ev else False}
            return LevelBandMeasure(volume=vol, band=(a, b),
                                    region=region_desc,
                                    region_volume=region_vol, meta=meta)
        prev = vol
    raise ConvergenceError(
        f"level-band volume did not settle to rtol={rtol} within "
        f"{max_level + 1} refinements", history=history)
