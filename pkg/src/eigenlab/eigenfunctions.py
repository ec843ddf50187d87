"""Model Laplace eigenfunctions on S^2 and the flat torus.

Sphere families (degree k, eigenvalue lambda^2 with lambda = sqrt(k(k+1))):

* zonal           Z(x) = sqrt((2k+1)/4pi) P_k(<x, pole>), peaks at the pole
* highest_weight  Q(x) = c_k sin^k(theta) cos(k phi), a Gaussian beam along
                  the equator, c_k = (pi 2^{2k+1} (k!)^2 / (2k+1)!)^{-1/2}
* random_harmonic Gaussian coefficients over the real orthonormal basis

Torus family: random (or given) coefficients over the lattice shell
|m|^2 = N, lambda = sqrt(N). All families are L^2-normalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.special import eval_legendre

from . import _kernels
from .errors import UsageError
from .geometry import SPHERE, TORUS, TWO_PI, QuadratureGrid, sphere_point

ZONAL = "zonal"
HIGHEST_WEIGHT = "highest_weight"
RANDOM_HARMONIC = "random_harmonic"
TORUS_RANDOM = "torus"

MAX_DEGREE = 1000
UNDERFLOW_LOG = -700.0


def lambda_of_degree(k: int, n: int = 2) -> float:
    """Frequency lambda = sqrt(k (k + n - 1)) of degree-k spherical harmonics."""
    if k < 0:
        raise UsageError("degree must be nonnegative")
    return math.sqrt(float(k) * (k + n - 1))


def _log_ck(k: int) -> float:
    # normalization of sin^k(theta) cos(k phi) on S^2, via log-gamma
    return -0.5 * (math.log(math.pi) + (2 * k + 1) * math.log(2.0)
                   + 2.0 * math.lgamma(k + 1) - math.lgamma(2 * k + 2))


def highest_weight_constant(k: int) -> float:
    """c_k with Q = c_k sin^k(theta) cos(k phi); c_k ~ pi^{-3/4} k^{1/4}."""
    if k == 0:
        return 1.0 / math.sqrt(4.0 * math.pi)
    return math.exp(_log_ck(k))


@dataclass(frozen=True)
class LatticeShell:
    """Integer lattice points with |m|^2 = N, with a half-shell of
    representatives (one of each +-m pair)."""

    N: int
    points: tuple[tuple[int, int], ...]
    representatives: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.points)


def lattice_shell(N: int) -> LatticeShell:
    if N < 0:
        raise UsageError("shell parameter must be nonnegative")
    pts = []
    r = math.isqrt(N)
    for m1 in range(-r, r + 1):
        rem = N - m1 * m1
        m2 = math.isqrt(rem)
        if m2 * m2 == rem:
            if m2 == 0:
                pts.append((m1, 0))
            else:
                pts.append((m1, m2))
                pts.append((m1, -m2))
    pts = sorted(set(pts))
    reps = tuple(p for p in pts if p[0] > 0 or (p[0] == 0 and p[1] > 0))
    return LatticeShell(N=N, points=tuple(pts), representatives=reps)


@dataclass(frozen=True, eq=False)
class Eigenfunction:
    """Immutable model eigenfunction; construct via the family helpers."""

    manifold: str
    family: str
    degree: int          # spherical degree k, or shell parameter N
    lam: float
    pole: np.ndarray | None = None
    seed: int | None = None
    payload: dict = field(default_factory=dict, repr=False)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, x) -> float:
        pts = np.asarray(x, dtype=float).reshape(1, -1)
        return float(self.evaluate_batch(pts)[0])

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """Values at an (N, d) array of points (d = 3 sphere, 2 torus)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != (3 if self.manifold == SPHERE else 2):
            raise UsageError(
                f"expected (N, {3 if self.manifold == SPHERE else 2}) points "
                f"for {self.manifold} eigenfunction")
        if self.family == ZONAL:
            t = np.clip(pts @ self.pole, -1.0, 1.0)
            return self.payload["norm"] * eval_legendre(self.degree, t)
        if self.family == HIGHEST_WEIGHT:
            st = np.hypot(pts[:, 0], pts[:, 1])
            phi = np.arctan2(pts[:, 1], pts[:, 0])
            return self._hw_values(st, phi)
        if self.family == RANDOM_HARMONIC:
            theta = np.arccos(np.clip(pts[:, 2], -1.0, 1.0))
            phi = np.arctan2(pts[:, 1], pts[:, 0])
            return _kernels.harmonic_sum(
                self.degree, self.payload["alpha"], self.payload["beta"], theta, phi)
        # torus
        modes = self.payload["modes"]
        if len(modes) == 0:
            return np.full(len(pts), self.payload["const"])
        ph = pts @ modes.T
        return np.cos(ph) @ self.payload["a"] + np.sin(ph) @ self.payload["b"]

    def evaluate_grid(self, grid: QuadratureGrid) -> np.ndarray:
        """Values on a product grid, shape grid.shape; row i is axes[0][i]."""
        if grid.manifold != self.manifold:
            raise UsageError("grid and eigenfunction live on different manifolds")
        a0, a1 = grid.axes
        if self.manifold == SPHERE:
            theta, phi = a0, a1
            if self.family == ZONAL:
                return self._zonal_grid(theta, phi)
            if self.family == HIGHEST_WEIGHT:
                prof = self._hw_profile(np.sin(theta))
                return np.outer(prof, np.cos(self.degree * phi)) \
                    if self.degree > 0 else np.full((len(theta), len(phi)),
                                                    self.payload["norm"])
            k = self.degree
            P = _kernels.plm_matrix(k, np.cos(theta))
            m = np.arange(k + 1)
            cosM = np.cos(np.outer(m, phi))
            sinM = np.sin(np.outer(m, phi))
            alpha, beta = self.payload["alpha"], self.payload["beta"]
            return (P * alpha[:, None]).T @ cosM + (P * beta[:, None]).T @ sinM
        # torus
        u, v = a0, a1
        modes = self.payload["modes"]
        if len(modes) == 0:
            return np.full((len(u), len(v)), self.payload["const"])
        m1 = modes[:, 0]
        m2 = modes[:, 1]
        CU, SU = np.cos(np.outer(m1, u)), np.sin(np.outer(m1, u))
        CV, SV = np.cos(np.outer(m2, v)), np.sin(np.outer(m2, v))
        a, b = self.payload["a"], self.payload["b"]
        # cos(m1 u + m2 v) = cu cv - su sv ; sin = su cv + cu sv
        top = (a[:, None] * CV + b[:, None] * SV)
        bot = (b[:, None] * CV - a[:, None] * SV)
        return CU.T @ top + SU.T @ bot

    def _zonal_grid(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        pole = self.pole
        norm = self.payload["norm"]
        ct, st = np.cos(theta), np.sin(theta)
        if abs(pole[2]) > 1.0 - 1e-14:
            col = norm * eval_legendre(self.degree, math.copysign(1.0, pole[2]) * ct)
            return np.broadcast_to(col[:, None], (len(theta), len(phi)))
        tp = math.acos(max(-1.0, min(1.0, pole[2])))
        pp = math.atan2(pole[1], pole[0])
        t = (math.cos(tp) * ct[:, None]
             + math.sin(tp) * st[:, None] * np.cos(phi[None, :] - pp))
        return norm * eval_legendre(self.degree, np.clip(t, -1.0, 1.0))

    def _hw_profile(self, st: np.ndarray) -> np.ndarray:
        """c_k sin^k(theta), in the log domain, underflow-to-zero."""
        k = self.degree
        if k == 0:
            return np.full(len(st), self.payload["norm"])
        with np.errstate(divide="ignore"):
            arg = self.payload["log_ck"] + k * np.log(np.clip(st, 0.0, 1.0))
        return np.where(arg < UNDERFLOW_LOG, 0.0, np.exp(np.maximum(arg, UNDERFLOW_LOG)))

    def _hw_values(self, st: np.ndarray, phi: np.ndarray) -> np.ndarray:
        if self.degree == 0:
            return np.full(len(st), self.payload["norm"])
        return self._hw_profile(st) * np.cos(self.degree * phi)

    # -- metadata -----------------------------------------------------------

    @property
    def poly_degree(self) -> int:
        """Polynomial degree (sphere) or max per-axis frequency (torus)."""
        if self.manifold == SPHERE:
            return self.degree
        modes = self.payload["modes"]
        return int(np.max(np.abs(modes))) if len(modes) else 0

    def descriptor(self) -> dict:
        d = {"manifold": self.manifold, "family": self.family, "degree": self.degree}
        if self.pole is not None:
            d["pole"] = [float(c) for c in self.pole]
        if self.seed is not None:
            d["seed"] = self.seed
        if self.family == TORUS_RANDOM and len(self.payload["modes"]):
            d["coefficients"] = [
                [int(m[0]), int(m[1]), float(a), float(b)]
                for m, a, b in zip(self.payload["modes"],
                                   self.payload["a"], self.payload["b"])]
        return d

    def label(self) -> str:
        if self.seed is not None:
            return f"{self.family}[seed={self.seed}]"
        return self.family


def _check_degree(k: int):
    if not 0 <= k <= MAX_DEGREE:
        raise UsageError(f"degree must lie in [0, {MAX_DEGREE}], got {k}")


def zonal(k: int, pole=(0.0, 0.0, 1.0)) -> Eigenfunction:
    """Zonal eigenfunction of degree k about the given pole."""
    _check_degree(k)
    p = sphere_point(pole)
    norm = math.sqrt((2 * k + 1) / (4.0 * math.pi))
    return Eigenfunction(manifold=SPHERE, family=ZONAL, degree=k,
                         lam=lambda_of_degree(k), pole=p,
                         payload={"norm": norm})


def highest_weight(k: int) -> Eigenfunction:
    """Highest-weight (Gaussian beam) eigenfunction of degree k."""
    _check_degree(k)
    payload = {"norm": highest_weight_constant(k)}
    if k > 0:
        payload["log_ck"] = _log_ck(k)
    return Eigenfunction(manifold=SPHERE, family=HIGHEST_WEIGHT, degree=k,
                         lam=lambda_of_degree(k), payload=payload)


def random_harmonic(k: int, seed: int) -> Eigenfunction:
    """Gaussian random combination over the real orthonormal degree-k basis;
    deterministic in (k, seed)."""
    _check_degree(k)
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(2 * k + 1)
    c = c / np.linalg.norm(c)
    alpha = np.zeros(k + 1)
    beta = np.zeros(k + 1)
    alpha[0] = c[0]
    if k > 0:
        alpha[1:] = math.sqrt(2.0) * c[1::2]
        beta[1:] = math.sqrt(2.0) * c[2::2]
    return Eigenfunction(manifold=SPHERE, family=RANDOM_HARMONIC, degree=k,
                         lam=lambda_of_degree(k), seed=seed,
                         payload={"alpha": alpha, "beta": beta, "coeffs": c})


def torus_eigenfunction(N: int, seed: int | None = None,
                        coefficients: Iterable | None = None) -> Eigenfunction:
    """Eigenfunction on T^2 supported on the lattice shell |m|^2 = N.

    Provide either a seed (Gaussian coefficients) or explicit coefficients
    as rows (m1, m2, a, b) over half-shell representatives. The result is
    L^2-normalized.
    """
    shell = lattice_shell(N)
    if N == 0:
        return Eigenfunction(
            manifold=TORUS, family=TORUS_RANDOM, degree=0, lam=0.0,
            payload={"modes": np.zeros((0, 2)), "a": np.zeros(0), "b": np.zeros(0),
                     "const": 1.0 / TWO_PI})
    if not shell.representatives:
        raise UsageError(
            f"empty lattice shell: {N} is not a sum of two squares")
    reps = np.asarray(shell.representatives, dtype=float)
    if coefficients is not None:
        rows = [tuple(map(float, r)) for r in coefficients]
        lookup = {(int(r[0]), int(r[1])): (r[2], r[3]) for r in rows}
        missing = set(map(tuple, np.asarray(shell.representatives, dtype=int).tolist())) - set(lookup)
        extra = set(lookup) - set(map(tuple, np.asarray(shell.representatives, dtype=int).tolist()))
        if extra:
            raise UsageError(f"coefficients for non-representative modes: {sorted(extra)}")
        if missing:
            raise UsageError(f"missing coefficients for modes: {sorted(missing)}")
        a = np.array([lookup[tuple(m)][0] for m in shell.representatives])
        b = np.array([lookup[tuple(m)][1] for m in shell.representatives])
    else:
        if seed is None:
            raise UsageError("torus_eigenfunction needs a seed or coefficients")
        rng = np.random.default_rng(seed)
        a = rng.standard_normal(len(reps))
        b = rng.standard_normal(len(reps))
    nrm = math.sqrt(2.0 * math.pi ** 2 * float(np.sum(a * a + b * b)))
    if nrm == 0.0:
        raise UsageError("torus coefficients are all zero")
    return Eigenfunction(
        manifold=TORUS, family=TORUS_RANDOM, degree=N, lam=math.sqrt(N),
        seed=seed, payload={"modes": reps, "a": a / nrm, "b": b / nrm})


def reconstruct(descriptor: dict) -> Eigenfunction:
    """Rebuild an eigenfunction from its descriptor() dict, bit-identically."""
    fam = descriptor["family"]
    if fam == ZONAL:
        return zonal(descriptor["degree"], pole=descriptor.get("pole", (0, 0, 1)))
    if fam == HIGHEST_WEIGHT:
        return highest_weight(descriptor["degree"])
    if fam == RANDOM_HARMONIC:
        return random_harmonic(descriptor["degree"], descriptor["seed"])
    if fam == TORUS_RANDOM:
        if "coefficients" in descriptor:
            # stored coefficients are already normalized; rebuild directly so
            # the round-trip is bit-identical
            rows = descriptor["coefficients"]
            modes = np.asarray([[r[0], r[1]] for r in rows], dtype=float)
            a = np.asarray([r[2] for r in rows], dtype=float)
            b = np.asarray([r[3] for r in rows], dtype=float)
            N = descriptor["degree"]
            return Eigenfunction(manifold=TORUS, family=TORUS_RANDOM, degree=N,
                                 lam=math.sqrt(N), seed=descriptor.get("seed"),
                                 payload={"modes": modes, "a": a, "b": b})
        return torus_eigenfunction(descriptor["degree"], seed=descriptor.get("seed"))
    raise UsageError(f"unknown family {fam!r}")


def evaluate(e: Eigenfunction, x) -> float:
    return e.evaluate(x)


def evaluate_batch(e: Eigenfunction, points) -> np.ndarray:
    """Batch values; accepts an (N, d) array or a QuadratureGrid (values are
    then node-order-aligned with grid.weights)."""
    if isinstance(points, QuadratureGrid):
        return e.evaluate_grid(points).ravel()
    return e.evaluate_batch(np.asarray(points, dtype=float))
