"""Compiled penalty-contact evaluation for the tool point cloud.

``contact_forces`` is the per-cycle hot path of the simulator; the plain
numpy version in :mod:`tactigrasp.world.sim` (``World._evaluate_reference``)
computes the same quantities and serves as its test oracle.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _penetration(q0, q1, q2, hx, hy, hz, cyl):
    """Depth and outward local normal of one point given in body coordinates."""
    if cyl:
        rho = math.sqrt(q0 * q0 + q1 * q1)
        radial = hx - rho
        axial = hz - abs(q2)
        if radial < axial:
            if rho > 1e-12:
                return radial, q0 / rho, q1 / rho, 0.0
            return radial, 1.0, 0.0, 0.0
        return axial, 0.0, 0.0, (1.0 if q2 >= 0.0 else -1.0)
    sx = hx - abs(q0)
    sy = hy - abs(q1)
    sz = hz - abs(q2)
    # ties resolve to the lowest axis, as numpy's argmin does
    if sx <= sy and sx <= sz:
        return sx, (1.0 if q0 >= 0.0 else -1.0), 0.0, 0.0
    if sy <= sz:
        return sy, 0.0, (1.0 if q1 >= 0.0 else -1.0), 0.0
    return sz, 0.0, 0.0, (1.0 if q2 >= 0.0 else -1.0)


@njit(cache=True)
def contact_forces(P, k, soft, pads, ex, patch, n_patches, cap, p_ee,
                   b_lo, b_hi, b_R, b_c, b_half, b_cyl, active):
    """Penalty forces on every tool point.

    Returns ``(F, pf, deepest, owner, fm, touching)``: per-point force on
    the tool after the per-patch cap, per-patch force sums, deepest
    penetration and the owning body index per point, and the wrench
    ``[m, f]`` the tool exerts on its surroundings about ``p_ee`` in base
    axes.
    """
    n = P.shape[0]
    m = b_lo.shape[0]
    F = np.zeros((n, 3))
    deepest = np.zeros(n)
    owner = np.full(n, -1, dtype=np.int64)
    pf = np.zeros((n_patches, 3))
    fm = np.zeros(6)
    lo = np.empty(3)
    hi = np.empty(3)
    for a in range(3):
        lo[a] = P[0, a]
        hi[a] = P[0, a]
    for i in range(1, n):
        for a in range(3):
            v = P[i, a]
            if v < lo[a]:
                lo[a] = v
            if v > hi[a]:
                hi[a] = v
    touching = False
    for j in range(m):
        if not active[j]:
            continue
        if (hi[0] < b_lo[j, 0] or hi[1] < b_lo[j, 1] or hi[2] < b_lo[j, 2]
                or lo[0] > b_hi[j, 0] or lo[1] > b_hi[j, 1] or lo[2] > b_hi[j, 2]):
            continue
        R = b_R[j]
        hx, hy, hz = b_half[j, 0], b_half[j, 1], b_half[j, 2]
        cyl = b_cyl[j]
        for i in range(n):
            x, y, z = P[i, 0], P[i, 1], P[i, 2]
            if (x < b_lo[j, 0] or y < b_lo[j, 1] or z < b_lo[j, 2]
                    or x > b_hi[j, 0] or y > b_hi[j, 1] or z > b_hi[j, 2]):
                continue
            dx, dy, dz = x - b_c[j, 0], y - b_c[j, 1], z - b_c[j, 2]
            q0 = dx * R[0, 0] + dy * R[1, 0] + dz * R[2, 0]
            q1 = dx * R[0, 1] + dy * R[1, 1] + dz * R[2, 1]
            q2 = dx * R[0, 2] + dy * R[1, 2] + dz * R[2, 2]
            d, n0, n1, n2 = _penetration(q0, q1, q2, hx, hy, hz, cyl)
            if soft[i]:
                # cup bellows only compress along the face they sit over
                if cyl:
                    over = math.sqrt(q0 * q0 + q1 * q1) <= hx
                else:
                    over = abs(q0) <= hx and abs(q1) <= hy
                h = q2 - hz
                if over and h < 0.0:
                    d, n0, n1, n2 = -h, 0.0, 0.0, 1.0
            if d <= 0.0:
                continue
            s = k[i] * d
            F[i, 0] += s * (R[0, 0] * n0 + R[0, 1] * n1 + R[0, 2] * n2)
            F[i, 1] += s * (R[1, 0] * n0 + R[1, 1] * n1 + R[1, 2] * n2)
            F[i, 2] += s * (R[2, 0] * n0 + R[2, 1] * n1 + R[2, 2] * n2)
            if d > deepest[i]:
                deepest[i] = d
                owner[i] = j
            touching = True
    if not touching:
        return F, pf, deepest, owner, fm, False
    for i in range(n):
        if pads[i]:
            # pad friction holds tangential load: pads push along their normal only
            s = F[i, 0] * ex[0] + F[i, 1] * ex[1] + F[i, 2] * ex[2]
            F[i, 0] = s * ex[0]
            F[i, 1] = s * ex[1]
            F[i, 2] = s * ex[2]
        c = patch[i]
        pf[c, 0] += F[i, 0]
        pf[c, 1] += F[i, 1]
        pf[c, 2] += F[i, 2]
    for c in range(n_patches):
        mag = math.sqrt(pf[c, 0] ** 2 + pf[c, 1] ** 2 + pf[c, 2] ** 2)
        if mag > cap:
            f = cap / mag
            pf[c, 0] *= f
            pf[c, 1] *= f
            pf[c, 2] *= f
            for i in range(n):
                if patch[i] == c:
                    F[i, 0] *= f
                    F[i, 1] *= f
                    F[i, 2] *= f
    for i in range(n):
        rx, ry, rz = P[i, 0] - p_ee[0], P[i, 1] - p_ee[1], P[i, 2] - p_ee[2]
        fx, fy, fz = F[i, 0], F[i, 1], F[i, 2]
        fm[0] -= ry * fz - rz * fy
        fm[1] -= rz * fx - rx * fz
        fm[2] -= rx * fy - ry * fx
        fm[3] -= fx
        fm[4] -= fy
        fm[5] -= fz
    return F, pf, deepest, owner, fm, True


@njit(cache=True)
def blocked_prefix(clouds, group, n_groups, margin, b_lo, b_hi, active):
    """Index of the first blocked segment of a sampled tool path, or ``n`` if none.

    ``clouds`` holds the tool points at each of ``n`` poses.  Each point
    group is boxed over consecutive pose pairs (or over the single pose when
    ``n == 1``), grown by ``margin`` and tested against the active body boxes.
    """
    n, npts = clouds.shape[0], clouds.shape[1]
    lo = np.full((n, n_groups, 3), np.inf)
    hi = np.full((n, n_groups, 3), -np.inf)
    for s in range(n):
        for i in range(npts):
            g = group[i]
            if g < 0:
                continue
            for a in range(3):
                v = clouds[s, i, a]
                if v < lo[s, g, a]:
                    lo[s, g, a] = v
                if v > hi[s, g, a]:
                    hi[s, g, a] = v
    segments = n - 1 if n > 1 else 1
    m = b_lo.shape[0]
    for s in range(segments):
        for g in range(n_groups):
            l0, l1, l2 = lo[s, g, 0], lo[s, g, 1], lo[s, g, 2]
            h0, h1, h2 = hi[s, g, 0], hi[s, g, 1], hi[s, g, 2]
            if n > 1:
                l0, l1, l2 = min(l0, lo[s + 1, g, 0]), min(l1, lo[s + 1, g, 1]), min(l2, lo[s + 1, g, 2])
                h0, h1, h2 = max(h0, hi[s + 1, g, 0]), max(h1, hi[s + 1, g, 1]), max(h2, hi[s + 1, g, 2])
            l0 -= margin
            l1 -= margin
            l2 -= margin
            h0 += margin
            h1 += margin
            h2 += margin
            for j in range(m):
                if not active[j]:
                    continue
                if (h0 < b_lo[j, 0] or h1 < b_lo[j, 1] or h2 < b_lo[j, 2]
                        or l0 > b_hi[j, 0] or l1 > b_hi[j, 1] or l2 > b_hi[j, 2]):
                    continue
                return s
    return n


@njit(cache=True)
def sweep_entry_min(lo, hi, d, margin, b_lo, b_hi, active):
    """Smallest s >= 0 at which box [lo, hi] moved by s*d touches any active body box."""
    best = np.inf
    for j in range(b_lo.shape[0]):
        if not active[j]:
            continue
        s_in, s_out = 0.0, np.inf
        hit = True
        for k in range(3):
            blo = b_lo[j, k] - margin
            bhi = b_hi[j, k] + margin
            if abs(d[k]) < 1e-15:
                if hi[k] < blo or lo[k] > bhi:
                    hit = False
                    break
                continue
            a = (blo - hi[k]) / d[k]
            b = (bhi - lo[k]) / d[k]
            if a > b:
                a, b = b, a
            s_in = max(s_in, a)
            s_out = min(s_out, b)
            if s_in > s_out:
                hit = False
                break
        if hit and s_in < best:
            best = s_in
    return best
