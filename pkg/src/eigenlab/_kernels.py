"""Numba kernels for normalized associated Legendre evaluation.

Pbar_k^m denotes the fully normalized function: Y_{k,0} = Pbar_k^0 and
{Pbar_k^0, sqrt(2) Pbar_k^m cos(m phi), sqrt(2) Pbar_k^m sin(m phi)} is an
orthonormal basis of degree-k spherical harmonics. The l-recursion at fixed
m keeps values O(1) up to high degree; sectoral seeds underflow smoothly to
zero near the poles. Recurrence coefficients are precomputed per degree so
the inner loops are pure fused multiply-adds.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numba import njit

INV_SQRT_4PI = 0.28209479177387814  # 1/sqrt(4 pi)


@lru_cache(maxsize=32)
def plm_tables(k: int):
    """Recurrence coefficient tables (atab, btab, seed) for degree k."""
    atab = np.zeros((k + 1, k + 1))
    btab = np.zeros((k + 1, k + 1))
    seed = np.zeros(k + 1)
    for m in range(1, k + 1):
        seed[m] = -np.sqrt((2.0 * m + 1.0) / (2.0 * m))
    for m in range(k + 1):
        if m + 1 <= k:
            atab[m, m + 1] = np.sqrt(2.0 * m + 3.0)
        for l in range(m + 2, k + 1):
            den = float(l * l - m * m)
            atab[m, l] = np.sqrt((4.0 * l * l - 1.0) / den)
            btab[m, l] = np.sqrt(
                (2.0 * l + 1.0) * ((l - 1.0) ** 2 - m * m) / ((2.0 * l - 3.0) * den))
    return atab, btab, seed


@njit(cache=True, fastmath=False)
def _plm_point(k, atab, btab, seed, t, s, out):
    """out[m] = Pbar_k^m(t) for m = 0..k, with s = sqrt(1-t^2)."""
    pmm = INV_SQRT_4PI
    for m in range(k + 1):
        if m > 0:
            pmm = seed[m] * s * pmm
        if m == k:
            out[m] = pmm
        else:
            p0 = pmm
            p1 = atab[m, m + 1] * t * pmm
            for l in range(m + 2, k + 1):
                p2 = atab[m, l] * t * p1 - btab[m, l] * p0
                p0 = p1
                p1 = p2
            out[m] = p1


@njit(cache=True, fastmath=False)
def plm_matrix_kernel(k, atab, btab, seed, t, s, out):
    """out[m, j] = Pbar_k^m(t[j]); out has shape (k+1, len(t))."""
    n = t.shape[0]
    for j in range(n):
        tj = t[j]
        sj = s[j]
        pmm = INV_SQRT_4PI
        for m in range(k + 1):
            if m > 0:
                pmm = seed[m] * sj * pmm
            if m == k:
                out[m, j] = pmm
            else:
                p0 = pmm
                p1 = atab[m, m + 1] * tj * pmm
                for l in range(m + 2, k + 1):
                    p2 = atab[m, l] * tj * p1 - btab[m, l] * p0
                    p0 = p1
                    p1 = p2
                out[m, j] = p1


@njit(cache=True, fastmath=False)
def harmonic_sum_kernel(k, alpha, beta, atab, btab, seed, t, s, phi, out):
    """out[i] = sum_m (alpha[m] cos(m phi_i) + beta[m] sin(m phi_i)) Pbar_k^m(t_i).

    The sqrt(2) of the real basis is expected to be folded into alpha/beta.
    """
    n = t.shape[0]
    for i in range(n):
        ti = t[i]
        si = s[i]
        cp = np.cos(phi[i])
        sp = np.sin(phi[i])
        acc = 0.0
        pmm = INV_SQRT_4PI
        cm = 1.0
        sm = 0.0
        for m in range(k + 1):
            if m > 0:
                pmm = seed[m] * si * pmm
                cm_new = cm * cp - sm * sp
                sm = sm * cp + cm * sp
                cm = cm_new
            if m == k:
                pk = pmm
            else:
                p0 = pmm
                p1 = atab[m, m + 1] * ti * pmm
                for l in range(m + 2, k + 1):
                    p2 = atab[m, l] * ti * p1 - btab[m, l] * p0
                    p0 = p1
                    p1 = p2
                pk = p1
            acc += (alpha[m] * cm + beta[m] * sm) * pk
        out[i] = acc


def plm_point(k: int, t: float, s: float) -> np.ndarray:
    atab, btab, seed = plm_tables(k)
    out = np.empty(k + 1)
    _plm_point(k, atab, btab, seed, float(t), float(s), out)
    return out


@njit(cache=True, fastmath=False)
def _trig_sum(a, b, ang, out):
    """out[j] = sum_m a[m] cos(m ang[j]) + b[m] sin(m ang[j]).

    Angle multiples come from the unit-rotation recurrence, avoiding a
    dense modes-by-angles table of transcendental calls.
    """
    k = a.shape[0] - 1
    for j in range(ang.shape[0]):
        c1 = np.cos(ang[j])
        s1 = np.sin(ang[j])
        cm = 1.0
        sm = 0.0
        acc = a[0]
        for m in range(1, k + 1):
            cm_new = cm * c1 - sm * s1
            sm = sm * c1 + cm * s1
            cm = cm_new
            acc += a[m] * cm + b[m] * sm
        out[j] = acc


def trig_sum(a: np.ndarray, b: np.ndarray, ang: np.ndarray) -> np.ndarray:
    """Trigonometric polynomial sum over an angle array."""
    ang = np.ascontiguousarray(ang, dtype=np.float64)
    out = np.empty(len(ang))
    _trig_sum(np.ascontiguousarray(a), np.ascontiguousarray(b), ang, out)
    return out


def plm_matrix(k: int, t: np.ndarray) -> np.ndarray:
    """Pbar_k^m at the abscissae t = cos(theta); shape (k+1, len(t))."""
    atab, btab, seed = plm_tables(k)
    t = np.ascontiguousarray(t, dtype=np.float64)
    s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    out = np.empty((k + 1, len(t)))
    plm_matrix_kernel(k, atab, btab, seed, t, s, out)
    return out


def harmonic_sum(k: int, alpha: np.ndarray, beta: np.ndarray,
                 theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Evaluate a degree-k combination at scattered (theta, phi) points."""
    atab, btab, seed = plm_tables(k)
    t = np.cos(np.ascontiguousarray(theta, dtype=np.float64))
    s = np.sin(np.ascontiguousarray(theta, dtype=np.float64))
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    out = np.empty(len(t))
    harmonic_sum_kernel(k, alpha, beta, atab, btab, seed, t, np.abs(s), phi, out)
    return out
