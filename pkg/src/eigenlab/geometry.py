"""Geometry of the unit sphere S^2 and the flat square torus T^2 = [0, 2pi)^2.

Conventions: sphere points are unit 3-vectors, torus points are pairs
(u, v) reduced to [0, 2pi). Geodesics are arclength-parametrized; on the
sphere a geodesic is an arc of the great circle orthogonal to its axis,
on the torus a straight segment in the universal cover. All distances
and lengths are in radians. Injectivity radius is pi for both manifolds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .errors import ResourceLimitError, UsageError

SPHERE = "sphere"
TORUS = "torus"
TWO_PI = 2.0 * math.pi
INJECTIVITY_RADIUS = math.pi

DEFAULT_NODE_CAP = 40_000_000
DEFAULT_FAMILY_CAP = 2_000_000

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def sphere_point(coords) -> np.ndarray:
    """Return a unit 3-vector; nonzero input is normalized."""
    x = np.asarray(coords, dtype=float).reshape(3)
    r = float(np.linalg.norm(x))
    if r < 1e-12:
        raise UsageError("sphere point must be a nonzero 3-vector")
    return x / r


def torus_point(coords) -> np.ndarray:
    """Return (u, v) reduced to the fundamental domain [0, 2pi)^2."""
    x = np.asarray(coords, dtype=float).reshape(2)
    return np.mod(x, TWO_PI)


def manifold_of_point(p: np.ndarray) -> str:
    p = np.asarray(p)
    if p.shape[-1] == 3:
        return SPHERE
    if p.shape[-1] == 2:
        return TORUS
    raise UsageError(f"point of dimension {p.shape[-1]} belongs to neither manifold")


def geodesic_distance(p, q) -> float:
    """Geodesic distance between two points on the same manifold."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise UsageError(f"mixed-manifold points: shapes {p.shape} and {q.shape}")
    if manifold_of_point(p) == SPHERE:
        return float(np.arccos(np.clip(np.dot(p, q), -1.0, 1.0)))
    d = np.abs(p - q) % TWO_PI
    d = np.minimum(d, TWO_PI - d)
    return float(np.hypot(d[0], d[1]))


def _orthonormal_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic frame (e1, e2) spanning the great circle with the given axis."""
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(ref, axis)
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2


@dataclass(frozen=True, eq=False)
class Geodesic:
    """Arclength-parametrized geodesic segment (or closed geodesic)."""

    manifold: str
    length: float
    # sphere parameters
    axis: np.ndarray | None = None
    phase: float = 0.0
    # torus parameters
    base: np.ndarray | None = None
    direction: np.ndarray | None = None
    # derived sphere frame
    e1: np.ndarray | None = field(default=None, repr=False)
    e2: np.ndarray | None = field(default=None, repr=False)

    @staticmethod
    def sphere_arc(axis, phase: float = 0.0, length: float = TWO_PI) -> "Geodesic":
        if not 0.0 < length <= TWO_PI + 1e-12:
            raise UsageError(f"sphere geodesic length must lie in (0, 2pi], got {length}")
        a = sphere_point(axis)
        e1, e2 = _orthonormal_frame(a)
        return Geodesic(manifold=SPHERE, length=float(min(length, TWO_PI)),
                        axis=a, phase=float(phase), e1=e1, e2=e2)

    @staticmethod
    def torus_segment(base, direction, length: float = 1.0) -> "Geodesic":
        if length <= 0.0:
            raise UsageError("torus geodesic length must be positive")
        b = torus_point(base)
        d = np.asarray(direction, dtype=float).reshape(2)
        n = float(np.hypot(d[0], d[1]))
        if n < 1e-12:
            raise UsageError("torus geodesic direction must be nonzero")
        return Geodesic(manifold=TORUS, length=float(length), base=b, direction=d / n)

    @property
    def is_closed(self) -> bool:
        if self.manifold == SPHERE:
            return self.length >= TWO_PI - 1e-12
        end = np.mod(self.base + self.length * self.direction, TWO_PI)
        gap = np.abs(np.mod(end - self.base + math.pi, TWO_PI) - math.pi)
        return bool(np.max(gap) < 1e-9)

    def point_at(self, s) -> np.ndarray:
        """Point(s) at arclength s from the start; s may be an array."""
        s = np.asarray(s, dtype=float)
        if self.manifold == SPHERE:
            ang = self.phase + s
            pts = (np.cos(ang)[..., None] * self.e1 + np.sin(ang)[..., None] * self.e2)
            return pts if s.ndim else pts.reshape(3)
        pts = np.mod(self.base + s[..., None] * self.direction, TWO_PI)
        return pts if s.ndim else pts.reshape(2)

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        return self.point_at(0.0), self.point_at(self.length)


def distance_to_geodesic(x, g: Geodesic):
    """Distance from point(s) x to the geodesic as a point set (endpoint-clamped).

    Accepts a single point or an (N, d) array; returns float or (N,) array.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(1, -1) if single else x
    if manifold_of_point(pts[0]) != g.manifold:
        raise UsageError("point and geodesic live on different manifolds")
    if g.manifold == SPHERE:
        d = _sphere_distance_to_arc(pts, g)
    else:
        d = _torus_distance_to_segment(pts, g)
    return float(d[0]) if single else d


def _sphere_distance_to_arc(pts: np.ndarray, g: Geodesic) -> np.ndarray:
    alpha = pts @ g.e1
    beta = pts @ g.e2
    zeta = pts @ g.axis
    circle_dist = np.arcsin(np.clip(np.abs(zeta), 0.0, 1.0))
    if g.is_closed:
        return circle_dist
    psi = np.arctan2(beta, alpha)
    delta = np.mod(psi - g.phase, TWO_PI)
    inside = delta <= g.length
    p0, p1 = g.endpoints()
    end_dist = np.minimum(
        np.arccos(np.clip(pts @ p0, -1.0, 1.0)),
        np.arccos(np.clip(pts @ p1, -1.0, 1.0)),
    )
    return np.where(inside, circle_dist, end_dist)


def _torus_distance_to_segment(pts: np.ndarray, g: Geodesic) -> np.ndarray:
    # Reduce the offset to [-pi, pi)^2, then take the min over adjacent covers.
    rel = np.mod(pts - g.base + math.pi, TWO_PI) - math.pi
    L = g.length
    d = g.direction
    best = np.full(len(pts), np.inf)
    for i in (-1.0, 0.0, 1.0):
        for j in (-1.0, 0.0, 1.0):
            r = rel + np.array([TWO_PI * i, TWO_PI * j])
            t = np.clip(r @ d, 0.0, L)
            diff = r - t[:, None] * d
            best = np.minimum(best, np.hypot(diff[:, 0], diff[:, 1]))
    return best


@dataclass(frozen=True, eq=False)
class Tube:
    """All points within half_width of a geodesic."""

    geodesic: Geodesic
    half_width: float

    def __post_init__(self):
        if not 0.0 < self.half_width <= INJECTIVITY_RADIUS:
            raise UsageError(
                f"tube half-width must lie in (0, pi], got {self.half_width}")

    @property
    def manifold(self) -> str:
        return self.geodesic.manifold

    def contains(self, x):
        d = distance_to_geodesic(x, self.geodesic)
        return d <= self.half_width

    def volume(self) -> float:
        """Exact area of the tube (Fermi rectangle plus end caps)."""
        w, L = self.half_width, self.geodesic.length
        if self.manifold == SPHERE:
            if self.geodesic.is_closed:
                return 2.0 * TWO_PI * math.sin(w)
            return 2.0 * L * math.sin(w) + TWO_PI * (1.0 - math.cos(w))
        return 2.0 * L * w + math.pi * w * w


@dataclass(frozen=True, eq=False)
class GeodesicBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not 0.0 < self.radius <= INJECTIVITY_RADIUS:
            raise UsageError(f"ball radius must lie in (0, pi], got {self.radius}")

    @property
    def manifold(self) -> str:
        return manifold_of_point(self.center)

    def volume(self) -> float:
        if self.manifold == SPHERE:
            return TWO_PI * (1.0 - math.cos(self.radius))
        return math.pi * self.radius ** 2


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Product quadrature grid; axes are kept separate so that separable
    integrands can be evaluated without materializing all nodes."""

    manifold: str
    kind: str
    axes: tuple[np.ndarray, ...]
    axis_weights: tuple[np.ndarray, ...]
    exact_degree: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(np.prod([len(a) for a in self.axes]))

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(len(a) for a in self.axes)

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.axis_weights[0], self.axis_weights[1]).ravel()

    @property
    def nodes(self) -> np.ndarray:
        """Materialized nodes, row-aligned with .weights."""
        a0, a1 = self.axes
        if self.manifold == SPHERE:
            theta = np.repeat(a0, len(a1))
            phi = np.tile(a1, len(a0))
            st = np.sin(theta)
            return np.column_stack((st * np.cos(phi), st * np.sin(phi), np.cos(theta)))
        u = np.repeat(a0, len(a1))
        v = np.tile(a1, len(a0))
        return np.column_stack((u, v))

    def integrate_values(self, vals: np.ndarray) -> float:
        """Integrate values given either flat (size,) or shaped (n0, n1)."""
        v = vals.reshape(self.shape)
        return float(self.axis_weights[0] @ v @ self.axis_weights[1])


@lru_cache(maxsize=128)
def _gauss_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    return x, w


def gauss_interval(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _gauss_nodes(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def sphere_quadrature(exact_degree: int, node_cap: int = DEFAULT_NODE_CAP) -> QuadratureGrid:
    """Grid integrating spherical polynomials of total degree <= exact_degree.

    Gauss-Legendre in cos(theta) times a uniform phi rule; node count is
    O(exact_degree^2).
    """
    if exact_degree < 0:
        raise UsageError("exact_degree must be nonnegative")
    n_t = max(1, (exact_degree + 2) // 2)
    n_p = max(1, exact_degree + 1)
    if n_t * n_p > node_cap:
        raise ResourceLimitError(
            f"sphere quadrature for degree {exact_degree} needs {n_t * n_p} nodes, "
            f"cap is {node_cap}", requested=n_t * n_p, cap=node_cap)
    t, wt = _gauss_nodes(n_t)
    theta = np.arccos(t[::-1])  # increasing theta
    wt = wt[::-1].copy()
    phi = TWO_PI * np.arange(n_p) / n_p
    wp = np.full(n_p, TWO_PI / n_p)
    return QuadratureGrid(manifold=SPHERE, kind="gauss_product",
                          axes=(theta, phi), axis_weights=(wt, wp),
                          exact_degree=exact_degree,
                          meta={"n_theta": n_t, "n_phi": n_p})


def sphere_uniform_grid(spacing: float, node_cap: int = DEFAULT_NODE_CAP) -> QuadratureGrid:
    """Uniform lat-long grid with exact band-area weights (for searching and
    indicator integrals; not polynomially exact)."""
    if spacing <= 0:
        raise UsageError("spacing must be positive")
    n_t = max(3, int(math.ceil(math.pi / spacing)) + 1)
    n_p = max(4, int(math.ceil(TWO_PI / spacing)))
    if n_t * n_p > node_cap:
        raise ResourceLimitError(
            f"uniform sphere grid at spacing {spacing:g} needs {n_t * n_p} nodes, "
            f"cap is {node_cap}", requested=n_t * n_p, cap=node_cap)
    theta = np.linspace(0.0, math.pi, n_t)
    # cell boundaries halfway between nodes; outer(wt, wp) gives each cell the
    # exact area of its theta-band divided across the n_p phi cells
    bounds = np.concatenate(([0.0], 0.5 * (theta[1:] + theta[:-1]), [math.pi]))
    wt = TWO_PI * (np.cos(bounds[:-1]) - np.cos(bounds[1:]))
    phi = TWO_PI * np.arange(n_p) / n_p
    wp = np.full(n_p, 1.0 / n_p)
    return QuadratureGrid(manifold=SPHERE, kind="uniform_product",
                          axes=(theta, phi), axis_weights=(wt, wp),
                          exact_degree=None,
                          meta={"spacing": spacing, "n_theta": n_t, "n_phi": n_p})


def torus_quadrature(cells_per_axis: int, node_cap: int = DEFAULT_NODE_CAP) -> QuadratureGrid:
    """Uniform torus grid; exact for trig polynomials with per-axis frequency
    below cells_per_axis."""
    n = int(cells_per_axis)
    if n < 1:
        raise UsageError("cells_per_axis must be >= 1")
    if n * n > node_cap:
        raise ResourceLimitError(
            f"torus grid with {n}x{n} cells exceeds node cap {node_cap}",
            requested=n * n, cap=node_cap)
    u = TWO_PI * np.arange(n) / n
    w = np.full(n, TWO_PI / n)
    return QuadratureGrid(manifold=TORUS, kind="torus_uniform",
                          axes=(u, u.copy()), axis_weights=(w, w.copy()),
                          exact_degree=n - 1, meta={"cells_per_axis": n})


def fibonacci_sphere(n: int) -> np.ndarray:
    """n quasi-uniform points on S^2 (Fibonacci spiral)."""
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, 1.0))
    phi = _GOLDEN_ANGLE * i
    return np.column_stack((r * np.cos(phi), r * np.sin(phi), z))


def _primitive_directions(q_max: int) -> np.ndarray:
    """Primitive lattice directions (p, q) with max(|p|,|q|) <= q_max, upper half."""
    dirs = []
    for p in range(-q_max, q_max + 1):
        for q in range(0, q_max + 1):
            if q == 0 and p <= 0:
                continue
            if math.gcd(abs(p), abs(q)) != 1:
                continue
            dirs.append((p, q))
    return np.asarray(dirs, dtype=float)


def family_layout(manifold: str, lam: float, density_factor: float = 1.0,
                  length: float = 1.0, closed: bool = False,
                  family_cap: int = DEFAULT_FAMILY_CAP):
    """Parameter arrays for a geodesic family with spacing delta =
    density_factor * lam^{-1/2}, without materializing Geodesic objects.

    Sphere: (axes (A, 3), phases (P,)). Torus: (bases (B, 2), unit
    directions (D, 2)). Searches iterate over the cross product.
    """
    if lam <= 0 or density_factor <= 0:
        raise UsageError("lam and density_factor must be positive")
    delta = density_factor / math.sqrt(lam)
    if manifold == SPHERE:
        n_axes = max(6, int(math.ceil(4.0 * math.pi * 1.44 / (delta * delta))))
        n_phase = 1 if closed else max(4, int(math.ceil(TWO_PI / delta)))
        total = n_axes * n_phase
        if total > family_cap:
            raise ResourceLimitError(
                f"geodesic family of size {total} exceeds cap {family_cap}",
                requested=total, cap=family_cap)
        axes = fibonacci_sphere(n_axes)
        phases = np.zeros(1) if closed else TWO_PI * np.arange(n_phase) / n_phase
        return axes, phases
    if manifold == TORUS:
        n_base = max(2, int(math.ceil(TWO_PI / delta)))
        q_max = max(1, int(math.ceil(1.0 / math.sqrt(delta))))
        dirs = _primitive_directions(q_max)
        dirs = dirs / np.hypot(dirs[:, 0], dirs[:, 1])[:, None]
        total = n_base * n_base * len(dirs)
        if total > family_cap:
            raise ResourceLimitError(
                f"geodesic family of size {total} exceeds cap {family_cap}",
                requested=total, cap=family_cap)
        side = TWO_PI * np.arange(n_base) / n_base
        uu, vv = np.meshgrid(side, side, indexing="ij")
        bases = np.column_stack((uu.ravel(), vv.ravel()))
        return bases, dirs
    raise UsageError(f"unknown manifold {manifold!r}")


def geodesic_family(manifold: str, lam: float, density_factor: float = 1.0,
                    length: float = 1.0, closed: bool = False,
                    family_cap: int = DEFAULT_FAMILY_CAP) -> list[Geodesic]:
    """Finite family of geodesics with parameter-space spacing <=
    density_factor * lam^{-1/2}.

    On the sphere: Fibonacci-sampled axes crossed with start phases (axes
    only, if closed). On the torus: a base-point grid crossed with a
    primitive rational direction sample.
    """
    first, second = family_layout(manifold, lam, density_factor=density_factor,
                                  length=length, closed=closed,
                                  family_cap=family_cap)
    if manifold == SPHERE:
        L = TWO_PI if closed else length
        return [Geodesic.sphere_arc(a, phase=ph, length=L)
                for a in first for ph in second]
    return [Geodesic.torus_segment(b, d, length=length)
            for d in second for b in first]
