"""Confinement domains with exact ray-boundary first-hit queries.

Every domain answers three questions, in both scalar and batch form:

* membership in the open set ``G`` (boundary points are outside),
* the first time ``s in (0, s_max]`` at which the ray ``q + s*p`` crosses
  the boundary outward, together with the hit point and outward unit normal,
* the specular reflection of a momentum vector at a unit normal.

Hits are solved in closed form only: linear roots for flat faces, quadratic
roots for circles.  A crossing counts only if the momentum has a strictly
positive component along the outward normal at the hit; roots with
``|p . n| <= 1e-12 |p|`` are grazing and are discarded.  A ray that starts on
(or within rounding distance of) the boundary moving inward registers no hit
at ``s = 0``; moving outward it reflects immediately (``tau`` clamped to 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractViolationError,
    DimensionMismatchError,
    InvalidRayError,
    OutOfDomainError,
)

# Tolerances shared by all shapes.
GRAZING_RTOL = 1e-12       # |p.n| below this fraction of |p| is a grazing hit
BOUNDARY_ATOL = 1e-12      # points this close to the boundary count as on it
SNAP_ATOL = 1e-9           # largest excursion outside closure we silently clamp

_NO_HIT = np.inf


@dataclass(frozen=True)
class RayHit:
    """First boundary crossing of a ray: time, point on the boundary, normal."""

    tau: float
    point: np.ndarray
    normal: np.ndarray


def reflect(p, n):
    """Specular reflection ``p - 2 (p . n) n`` at a unit outward normal.

    Preserves ``|p|`` up to rounding.  Raises ``ContractViolationError`` if
    ``n`` is not a unit vector within 1e-8.
    """
    p = np.asarray(p, dtype=float)
    n = np.asarray(n, dtype=float)
    if p.shape != n.shape:
        raise DimensionMismatchError(
            f"momentum shape {p.shape} != normal shape {n.shape}")
    nn = float(np.dot(n, n))
    if abs(nn - 1.0) > 1e-8:
        raise ContractViolationError(f"normal has squared norm {nn}, expected 1")
    return p - 2.0 * float(np.dot(p, n)) * n


def _reflect_rows(P, N):
    """Row-wise specular reflection, no contract checks (hot path)."""
    dots = np.einsum("ij,ij->i", P, N)
    return P - 2.0 * dots[:, None] * N


class Domain:
    """Base class; subclasses are immutable and safe to share across workers."""

    dim: int
    length_scale: float

    # -- membership -------------------------------------------------------

    def contains(self, q) -> bool:
        """True iff ``q`` lies in the open set G; boundary points are out.

        Points within ``1e-12 * length_scale`` of the boundary count as on
        it (and therefore outside the open set), consistent with how rays
        starting there are treated.
        """
        q = self._check_point(q)
        return bool(self.contains_batch(q[None, :])[0])

    def contains_batch(self, Q):
        return self.boundary_excess_batch(Q) < -BOUNDARY_ATOL * self.length_scale

    def closure_contains_batch(self, Q, atol=BOUNDARY_ATOL):
        """True where Q is inside G or within ``atol * length_scale`` of it."""
        return self.boundary_excess_batch(Q) <= atol * self.length_scale

    def boundary_excess_batch(self, Q):
        """Signed excursion beyond the closure (<= 0 inside the closure)."""
        raise NotImplementedError

    def boundary_distance_batch(self, Q):
        """Distance from Q to the boundary set (0 exactly on it)."""
        raise NotImplementedError

    # -- ray queries --------------------------------------------------------

    def first_hit(self, q, p, s_max):
        """Smallest ``s in (0, s_max]`` with ``q + s p`` crossing the boundary.

        Returns a :class:`RayHit` or ``None`` if the segment stays in G.
        """
        q = self._check_point(q)
        p = self._check_point(p, what="momentum")
        if not np.any(p):
            raise InvalidRayError("ray direction is the zero vector")
        if s_max <= 0:
            raise InvalidRayError(f"s_max must be positive, got {s_max}")
        if self.boundary_excess_batch(q[None, :])[0] > SNAP_ATOL * self.length_scale:
            raise OutOfDomainError(f"ray origin {q} lies outside closure(G)")
        tau, idx, point, normal = self.first_hit_batch(
            q[None, :], p[None, :], float(s_max))
        if idx.size == 0:
            return None
        return RayHit(tau=float(tau[0]), point=point[0], normal=normal[0])

    def first_hit_batch(self, Q, P, s_max):
        """Vectorized first-hit query.

        Parameters
        ----------
        Q, P : (n, d) arrays
        s_max : float or (n,) array of per-ray horizons

        Returns
        -------
        tau : (n,) array, ``inf`` where no hit
        idx : indices of the rows that hit
        point : (len(idx), d) hit points snapped onto the boundary
        normal : (len(idx), d) outward unit normals at those points
        """
        raise NotImplementedError

    # -- projections and guards ------------------------------------------

    def project_boundary(self, q):
        """Closest boundary point; intended for points outside the closure."""
        raise NotImplementedError(f"{type(self).__name__} has no projection")

    def nudge_inside(self, q, eps=None):
        """Strictly interior point within ``eps`` of ``q`` (boundary repair).

        Used by projection-type samplers so that chains never sit exactly on
        a face.  Interior points are returned unchanged.
        """
        q = np.asarray(q, dtype=float)
        if eps is None:
            eps = 1e-9 * self.length_scale
        if self.contains_batch(q[None, :])[0]:
            return q
        return self._nudge(q, eps)

    def _nudge(self, q, eps):
        raise NotImplementedError(f"{type(self).__name__} has no inward nudge")

    def snap_inside_batch(self, Q):
        """Clamp sub-SNAP_ATOL excursions back onto the closure, in place.

        Raises ``OutOfDomainError`` if any point lies further outside.
        """
        excess = self.boundary_excess_batch(Q)
        worst = float(excess.max(initial=-np.inf))
        if worst > SNAP_ATOL * self.length_scale:
            raise OutOfDomainError(
                f"position escaped the closure by {worst:.3e}")
        if worst > 0.0:
            idx = np.flatnonzero(excess > 0.0)
            Q[idx] = self._clamp_rows(Q[idx])
        return Q

    def _clamp_rows(self, rows):
        raise NotImplementedError

    # -- plumbing ----------------------------------------------------------

    def to_config(self) -> dict:
        raise NotImplementedError

    def _check_point(self, q, what="point"):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if q.shape != (self.dim,):
            raise DimensionMismatchError(
                f"{what} has shape {q.shape}, domain dimension is {self.dim}")
        return q


def _linear_face_time(coord, vel, level, outward_sign):
    """Exit time onto the hyperplane ``coord == level``.

    ``outward_sign`` is the sign of the outward normal component along the
    axis; an exit crossing needs ``vel * outward_sign > 0``.  Returns +inf
    where the face is never exited.
    """
    moving_out = vel * outward_sign > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(moving_out, (level - coord) / vel, _NO_HIT)
    return t


def _accept_window(t, s_max, backlash):
    """Keep times in ``(-backlash, s_max]``; clamp tiny negatives to 0."""
    ok = (t > -backlash) & (t <= s_max)
    t = np.where(ok, np.maximum(t, 0.0), _NO_HIT)
    return t


@dataclass(frozen=True)
class Interval(Domain):
    """Open interval ``(a, b)`` on the line."""

    a: float
    b: float
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        if not self.a < self.b:
            raise ContractViolationError(f"Interval needs a < b, got ({self.a}, {self.b})")
        object.__setattr__(self, "length_scale", self.b - self.a)

    def boundary_excess_batch(self, Q):
        x = Q[:, 0]
        return np.maximum(self.a - x, x - self.b)

    def boundary_distance_batch(self, Q):
        x = Q[:, 0]
        return np.minimum(np.abs(x - self.a), np.abs(x - self.b))

    def first_hit_batch(self, Q, P, s_max):
        x, v = Q[:, 0], P[:, 0]
        backlash = BOUNDARY_ATOL * self.length_scale / np.maximum(np.abs(v), 1e-300)
        t_lo = _accept_window(_linear_face_time(x, v, self.a, -1.0), s_max, backlash)
        t_hi = _accept_window(_linear_face_time(x, v, self.b, +1.0), s_max, backlash)
        tau = np.minimum(t_lo, t_hi)
        idx = np.flatnonzero(np.isfinite(tau))
        lo_first = t_lo[idx] <= t_hi[idx]
        point = np.where(lo_first, self.a, self.b)[:, None]
        normal = np.where(lo_first, -1.0, 1.0)[:, None]
        return tau, idx, point, normal

    def project_boundary(self, q):
        q = self._check_point(q)
        end = self.a if abs(q[0] - self.a) <= abs(q[0] - self.b) else self.b
        return np.array([end])

    def _clamp_rows(self, rows):
        return np.clip(rows, self.a, self.b)

    def _nudge(self, q, eps):
        return np.clip(q, self.a + eps, self.b - eps)

    def to_config(self):
        return {"shape": "interval", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class HalfLine(Domain):
    """Half line ``(a, inf)``."""

    a: float = 0.0
    dim: int = field(default=1, init=False)
    length_scale: float = field(default=1.0, init=False)


    def boundary_excess_batch(self, Q):
        return self.a - Q[:, 0]

    def boundary_distance_batch(self, Q):
        return np.abs(Q[:, 0] - self.a)

    def first_hit_batch(self, Q, P, s_max):
        x, v = Q[:, 0], P[:, 0]
        moving = v < 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(moving, (self.a - x) / v, _NO_HIT)
        backlash = BOUNDARY_ATOL / np.maximum(np.abs(v), 1e-300)
        tau = _accept_window(t, s_max, backlash)
        idx = np.flatnonzero(np.isfinite(tau))
        point = np.full((idx.size, 1), self.a)
        normal = np.full((idx.size, 1), -1.0)
        return tau, idx, point, normal

    def project_boundary(self, q):
        self._check_point(q)
        return np.array([self.a])

    def _clamp_rows(self, rows):
        return np.maximum(rows, self.a)

    def _nudge(self, q, eps):
        return np.maximum(q, self.a + eps)

    def to_config(self):
        return {"shape": "half_line", "a": self.a}


@dataclass(frozen=True)
class HalfSpace(Domain):
    """Half space ``{q : q[axis] > a}`` in ``dim`` dimensions."""

    axis: int
    a: float
    dim: int = 2
    length_scale: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not 0 <= self.axis < self.dim:
            raise ContractViolationError(f"axis {self.axis} outside 0..{self.dim - 1}")


    def boundary_excess_batch(self, Q):
        return self.a - Q[:, self.axis]

    def boundary_distance_batch(self, Q):
        return np.abs(Q[:, self.axis] - self.a)

    def first_hit_batch(self, Q, P, s_max):
        x, v = Q[:, self.axis], P[:, self.axis]
        backlash = BOUNDARY_ATOL / np.maximum(np.abs(v), 1e-300)
        tau = _accept_window(_linear_face_time(x, v, self.a, -1.0), s_max, backlash)
        idx = np.flatnonzero(np.isfinite(tau))
        point = Q[idx] + tau[idx, None] * P[idx]
        point[:, self.axis] = self.a
        normal = np.zeros((idx.size, self.dim))
        normal[:, self.axis] = -1.0
        return tau, idx, point, normal

    def project_boundary(self, q):
        q = self._check_point(q).copy()
        q[self.axis] = self.a
        return q

    def _clamp_rows(self, rows):
        rows = rows.copy()
        rows[:, self.axis] = np.maximum(rows[:, self.axis], self.a)
        return rows

    def _nudge(self, q, eps):
        q = q.copy()
        q[self.axis] = max(q[self.axis], self.a + eps)
        return q

    def to_config(self):
        return {"shape": "half_space", "axis": self.axis, "a": self.a, "dim": self.dim}


def _sphere_crossing(Q, P, r, exit_root, a, b, qq, speed, s_max, backlash):
    """Exit time through the circle ``|x| = r``.

    ``exit_root`` picks the root with positive (+1, leaving the disc) or
    negative (-1, entering the hole) radial speed; the radial speed magnitude
    at either root is ``sqrt(disc)``, so grazing roots are those with
    ``sqrt(disc) <= GRAZING_RTOL |p| r``.
    """
    disc = b * b - a * (qq - r * r)
    valid = disc > 0.0
    root = np.sqrt(np.where(valid, disc, 0.0))
    s = (exit_root * root - b) / a
    ok = valid & (root > GRAZING_RTOL * r * speed) & (s <= s_max) & (s > -backlash)
    return np.where(ok, np.maximum(s, 0.0), _NO_HIT)


@dataclass(frozen=True)
class Ball(Domain):
    """Open ball of radius ``r`` centred at the origin."""

    r: float
    dim: int = 2

    def __post_init__(self):
        if self.r <= 0:
            raise ContractViolationError(f"Ball radius must be positive, got {self.r}")
        object.__setattr__(self, "length_scale", self.r)


    def boundary_excess_batch(self, Q):
        return np.sqrt(np.einsum("ij,ij->i", Q, Q)) - self.r

    def boundary_distance_batch(self, Q):
        return np.abs(np.sqrt(np.einsum("ij,ij->i", Q, Q)) - self.r)

    def first_hit_batch(self, Q, P, s_max):
        a = np.einsum("ij,ij->i", P, P)
        b = np.einsum("ij,ij->i", Q, P)
        qq = np.einsum("ij,ij->i", Q, Q)
        speed = np.sqrt(a)
        backlash = BOUNDARY_ATOL * self.r / np.maximum(speed, 1e-300)
        tau = _sphere_crossing(Q, P, self.r, +1.0, a, b, qq, speed,
                               s_max, backlash)
        idx = np.flatnonzero(np.isfinite(tau))
        point = Q[idx] + tau[idx, None] * P[idx]
        norms = np.sqrt(np.einsum("ij,ij->i", point, point))
        point *= (self.r / np.maximum(norms, 1e-300))[:, None]
        normal = point / self.r
        return tau, idx, point, normal

    def project_boundary(self, q):
        q = self._check_point(q)
        norm = float(np.linalg.norm(q))
        if norm == 0.0:
            out = np.zeros(self.dim)
            out[0] = self.r
            return out
        return q * (self.r / norm)

    def _clamp_rows(self, rows):
        norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
        return rows * (self.r / norms)[:, None]

    def _nudge(self, q, eps):
        norm = float(np.linalg.norm(q))
        if norm == 0.0:
            return q
        return q * min(1.0, (self.r - eps) / norm)

    def to_config(self):
        return {"shape": "ball", "r": self.r, "dim": self.dim}


@dataclass(frozen=True)
class Annulus(Domain):
    """Open annulus ``r1 < |q| < r2`` (non-convex; chords can cross the hole)."""

    r1: float
    r2: float
    dim: int = 2

    def __post_init__(self):
        if not 0 < self.r1 < self.r2:
            raise ContractViolationError(
                f"Annulus needs 0 < r1 < r2, got ({self.r1}, {self.r2})")
        object.__setattr__(self, "length_scale", self.r2)


    def boundary_excess_batch(self, Q):
        norm = np.sqrt(np.einsum("ij,ij->i", Q, Q))
        return np.maximum(self.r1 - norm, norm - self.r2)

    def boundary_distance_batch(self, Q):
        norm = np.sqrt(np.einsum("ij,ij->i", Q, Q))
        return np.minimum(np.abs(norm - self.r1), np.abs(norm - self.r2))

    def first_hit_batch(self, Q, P, s_max):
        a = np.einsum("ij,ij->i", P, P)
        b = np.einsum("ij,ij->i", Q, P)
        qq = np.einsum("ij,ij->i", Q, Q)
        speed = np.sqrt(a)
        backlash = BOUNDARY_ATOL * self.length_scale / np.maximum(speed, 1e-300)
        # outer circle: exit root has positive radial speed; inner circle:
        # the chord enters the hole at the root with negative radial speed
        t_out = _sphere_crossing(Q, P, self.r2, +1.0, a, b, qq, speed,
                                 s_max, backlash)
        t_in = _sphere_crossing(Q, P, self.r1, -1.0, a, b, qq, speed,
                                s_max, backlash)
        inner = t_in <= t_out
        tau = np.where(inner, t_in, t_out)
        idx = np.flatnonzero(np.isfinite(tau))
        point = Q[idx] + tau[idx, None] * P[idx]
        norms = np.sqrt(np.einsum("ij,ij->i", point, point))
        target_r = np.where(inner[idx], self.r1, self.r2)
        point *= (target_r / np.maximum(norms, 1e-300))[:, None]
        sign = np.where(inner[idx], -1.0, 1.0)
        normal = point * (sign / target_r)[:, None]
        return tau, idx, point, normal

    def project_boundary(self, q):
        q = self._check_point(q)
        norm = float(np.linalg.norm(q))
        if norm == 0.0:
            out = np.zeros(self.dim)
            out[0] = self.r1
            return out
        target = self.r1 if abs(norm - self.r1) <= abs(norm - self.r2) else self.r2
        return q * (target / norm)

    def _clamp_rows(self, rows):
        norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
        target = np.clip(norms, self.r1, self.r2)
        return rows * (target / norms)[:, None]

    def to_config(self):
        return {"shape": "annulus", "r1": self.r1, "r2": self.r2, "dim": self.dim}


@dataclass(frozen=True)
class Box(Domain):
    """Axis-aligned open box; corners are handled face-wise (smallest tau)."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ContractViolationError("Box lo/hi must be 1-d of equal length")
        if not np.all(lo < hi):
            raise ContractViolationError("Box needs lo < hi componentwise")
        object.__setattr__(self, "lo", tuple(float(x) for x in lo))
        object.__setattr__(self, "hi", tuple(float(x) for x in hi))
        object.__setattr__(self, "dim", len(lo))
        object.__setattr__(self, "length_scale", float(np.max(hi - lo)))
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)


    def boundary_excess_batch(self, Q):
        return np.maximum(self._lo - Q, Q - self._hi).max(axis=1)

    def boundary_distance_batch(self, Q):
        inside_gap = np.minimum(Q - self._lo, self._hi - Q).min(axis=1)
        outside = np.maximum(np.maximum(self._lo - Q, Q - self._hi), 0.0)
        out_dist = np.sqrt(np.einsum("ij,ij->i", outside, outside))
        return np.where(out_dist > 0.0, out_dist, np.abs(inside_gap))

    def first_hit_batch(self, Q, P, s_max):
        n = len(Q)
        speed = np.sqrt(np.einsum("ij,ij->i", P, P))
        backlash = (BOUNDARY_ATOL * self.length_scale
                    / np.maximum(speed, 1e-300))[:, None]
        t_lo = _linear_face_time(Q, P, self._lo, -1.0)
        t_hi = _linear_face_time(Q, P, self._hi, +1.0)
        t_all = np.concatenate([t_lo, t_hi], axis=1)          # (n, 2d)
        s = s_max if np.isscalar(s_max) else np.asarray(s_max)[:, None]
        ok = (t_all > -backlash) & (t_all <= s)
        t_all = np.where(ok, np.maximum(t_all, 0.0), _NO_HIT)
        face = np.argmin(t_all, axis=1)
        tau = t_all[np.arange(n), face]
        idx = np.flatnonzero(np.isfinite(tau))
        axis = face[idx] % self.dim
        is_hi = face[idx] >= self.dim
        point = Q[idx] + tau[idx, None] * P[idx]
        rows = np.arange(idx.size)
        point[rows, axis] = np.where(is_hi, self._hi[axis], self._lo[axis])
        normal = np.zeros((idx.size, self.dim))
        normal[rows, axis] = np.where(is_hi, 1.0, -1.0)
        return tau, idx, point, normal

    def project_boundary(self, q):
        q = self._check_point(q)
        clamped = np.clip(q, self._lo, self._hi)
        if not np.array_equal(clamped, q):
            return clamped
        gaps_lo = q - self._lo
        gaps_hi = self._hi - q
        axis = int(np.argmin(np.minimum(gaps_lo, gaps_hi)))
        out = q.copy()
        out[axis] = self._lo[axis] if gaps_lo[axis] <= gaps_hi[axis] else self._hi[axis]
        return out

    def _clamp_rows(self, rows):
        return np.clip(rows, self._lo, self._hi)

    def _nudge(self, q, eps):
        return np.clip(q, self._lo + eps, self._hi - eps)

    def to_config(self):
        return {"shape": "box", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class IntervalProduct(Domain):
    """Product ``(a, b) x R^(dim-1)``: only coordinate 0 is confined."""

    a: float
    b: float
    dim: int = 2

    def __post_init__(self):
        if not self.a < self.b:
            raise ContractViolationError(f"IntervalProduct needs a < b, got ({self.a}, {self.b})")
        object.__setattr__(self, "length_scale", self.b - self.a)


    def boundary_excess_batch(self, Q):
        x = Q[:, 0]
        return np.maximum(self.a - x, x - self.b)

    def boundary_distance_batch(self, Q):
        x = Q[:, 0]
        return np.minimum(np.abs(x - self.a), np.abs(x - self.b))

    def first_hit_batch(self, Q, P, s_max):
        x, v = Q[:, 0], P[:, 0]
        backlash = BOUNDARY_ATOL * self.length_scale / np.maximum(np.abs(v), 1e-300)
        t_lo = _accept_window(_linear_face_time(x, v, self.a, -1.0), s_max, backlash)
        t_hi = _accept_window(_linear_face_time(x, v, self.b, +1.0), s_max, backlash)
        lo_first = t_lo <= t_hi
        tau = np.where(lo_first, t_lo, t_hi)
        idx = np.flatnonzero(np.isfinite(tau))
        point = Q[idx] + tau[idx, None] * P[idx]
        point[:, 0] = np.where(lo_first[idx], self.a, self.b)
        normal = np.zeros((idx.size, self.dim))
        normal[:, 0] = np.where(lo_first[idx], -1.0, 1.0)
        return tau, idx, point, normal

    def _clamp_rows(self, rows):
        rows = rows.copy()
        rows[:, 0] = np.clip(rows[:, 0], self.a, self.b)
        return rows

    def to_config(self):
        return {"shape": "product", "a": self.a, "b": self.b, "dim": self.dim}


@dataclass(frozen=True)
class ConvexPolytope(Domain):
    """Intersection of open half-planes ``{q : n_i . q > c_i}``.

    ``normals`` rows are the inward normals (normalized on construction).
    Used for parameter constraints such as a positive wedge in 2-d.
    """

    normals: tuple
    offsets: tuple

    def __post_init__(self):
        A = np.asarray(self.normals, dtype=float)
        c = np.asarray(self.offsets, dtype=float)
        if A.ndim != 2 or len(c) != len(A):
            raise ContractViolationError("normals must be (m, d), offsets (m,)")
        lengths = np.linalg.norm(A, axis=1)
        if np.any(lengths == 0.0):
            raise ContractViolationError("zero face normal")
        A = A / lengths[:, None]
        c = c / lengths
        object.__setattr__(self, "normals", tuple(map(tuple, A)))
        object.__setattr__(self, "offsets", tuple(c))
        object.__setattr__(self, "dim", A.shape[1])
        object.__setattr__(self, "length_scale", 1.0)
        object.__setattr__(self, "_A", A)
        object.__setattr__(self, "_c", c)


    def boundary_excess_batch(self, Q):
        return (self._c - Q @ self._A.T).max(axis=1)

    def boundary_distance_batch(self, Q):
        # distance to the nearest face plane; exact on the boundary itself
        return np.abs(Q @ self._A.T - self._c).min(axis=1)

    def first_hit_batch(self, Q, P, s_max):
        n = len(Q)
        speed = np.sqrt(np.einsum("ij,ij->i", P, P))
        backlash = (BOUNDARY_ATOL / np.maximum(speed, 1e-300))[:, None]
        margin = Q @ self._A.T - self._c                      # (n, m)
        rate = P @ self._A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(rate < 0.0, -margin / rate, _NO_HIT)
        s = s_max if np.isscalar(s_max) else np.asarray(s_max)[:, None]
        ok = (t > -backlash) & (t <= s)
        t = np.where(ok, np.maximum(t, 0.0), _NO_HIT)
        face = np.argmin(t, axis=1)
        tau = t[np.arange(n), face]
        idx = np.flatnonzero(np.isfinite(tau))
        point = Q[idx] + tau[idx, None] * P[idx]
        normal = -self._A[face[idx]]
        return tau, idx, point, normal

    def project_boundary(self, q):
        """Closest boundary point of a 2-face planar wedge (exact)."""
        q = self._check_point(q)
        if self._A.shape != (2, 2):
            raise NotImplementedError("projection implemented for 2-face 2-d domains")
        candidates = []
        for i in range(2):
            a_i, c_i = self._A[i], self._c[i]
            foot = q - (float(a_i @ q) - c_i) * a_i
            j = 1 - i
            if float(self._A[j] @ foot) >= self._c[j] - 1e-15:
                candidates.append(foot)
        if not candidates:
            apex = np.linalg.solve(self._A, self._c)
            candidates.append(apex)
        dists = [np.linalg.norm(q - x) for x in candidates]
        return candidates[int(np.argmin(dists))]

    def _clamp_rows(self, rows):
        out = np.array([self.project_boundary(row) if not self.contains(row) else row
                        for row in rows])
        return out

    def _nudge(self, q, eps):
        # walk along the mean inward normal of the active faces until every
        # margin clears eps (a few iterations suffice for acute wedges)
        out = np.asarray(q, dtype=float).copy()
        for _ in range(16):
            margins = self._A @ out - self._c
            worst = margins.min()
            if worst >= eps:
                return out
            direction = self._A[margins < eps].sum(axis=0)
            norm = np.linalg.norm(direction)
            if norm == 0.0:
                break
            out = out + (2.0 * (eps - worst) / norm) * direction
        return out

    def to_config(self):
        return {"shape": "polytope",
                "normals": [list(row) for row in self.normals],
                "offsets": list(self.offsets)}


_SHAPES = {
    "interval": lambda c: Interval(c["a"], c["b"]),
    "half_line": lambda c: HalfLine(c["a"]),
    "half_space": lambda c: HalfSpace(c["axis"], c["a"], c.get("dim", 2)),
    "ball": lambda c: Ball(c["r"], c.get("dim", 2)),
    "annulus": lambda c: Annulus(c["r1"], c["r2"], c.get("dim", 2)),
    "box": lambda c: Box(tuple(c["lo"]), tuple(c["hi"])),
    "product": lambda c: IntervalProduct(c["a"], c["b"], c.get("dim", 2)),
    "polytope": lambda c: ConvexPolytope(
        tuple(map(tuple, c["normals"])), tuple(c["offsets"])),
}


def domain_from_config(cfg: dict) -> Domain:
    """Build a domain from its config-file description."""
    try:
        shape = cfg["shape"]
    except (KeyError, TypeError):
        raise ContractViolationError(f"domain config needs a 'shape' key: {cfg!r}")
    if shape not in _SHAPES:
        raise ContractViolationError(
            f"unknown domain shape {shape!r}; known: {sorted(_SHAPES)}")
    try:
        return _SHAPES[shape](cfg)
    except KeyError as exc:
        raise ContractViolationError(f"domain config {cfg!r} missing key {exc}")
