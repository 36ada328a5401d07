"""Elementary steps and their compositions into reflecting integrators.

The building blocks act on a phase state ``(q, p)``:

* ``A``  free flight ``q <- q + s p`` with specular momentum reflection at
  every boundary hit, recursing until the residual segment stays inside
  (``a_c`` step, multi-collision aware),
* ``B``  impulse ``p <- p - s grad U(q)``,
* ``O``  exact update of ``dp = a p dt + sigma dW`` over ``s``,
* ``P``  Euler momentum update ``p <- p + s b(q, p) + sqrt(s) sigma xi``.

All compositions are expressed as ordered plans over these four ops; the
batch executor advances ``n`` independent walkers stored as ``(n, d)``
arrays, which is also how the single-state API is implemented (``n = 1``).
Per step, every stochastic sub-step draws fresh noise in plan order, so a
fixed noise-draw discipline pins results bit-for-bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import (
    ConfigurationError,
    ContractViolationError,
    NumericError,
    SingularConfigurationError,
)
from .geometry import _reflect_rows

# ---------------------------------------------------------------------------
# noise laws


class NoiseLaw:
    """Zero-mean, unit-variance draw used by the O and P sub-steps."""

    name: str

    def sample(self, rng, shape):
        raise NotImplementedError


class Gaussian(NoiseLaw):
    name = "gaussian"

    def sample(self, rng, shape):
        return rng.standard_normal(shape)


class TwoPoint(NoiseLaw):
    """+-1 with probability 1/2 each (first-order moment conditions)."""

    name = "two_point"

    def sample(self, rng, shape):
        return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0


class ThreePoint(NoiseLaw):
    """+-sqrt(3) with probability 1/6, 0 with probability 2/3.

    Matches the Gaussian through the fifth moment, enough for second-order
    weak accuracy.
    """

    name = "three_point"
    _root3 = math.sqrt(3.0)

    def sample(self, rng, shape):
        u = rng.random(shape)
        return np.where(u < 1.0 / 6.0, -self._root3,
                        np.where(u >= 5.0 / 6.0, self._root3, 0.0))


_NOISE_LAWS = {"gaussian": Gaussian, "two_point": TwoPoint, "three_point": ThreePoint}


def noise_law(name: str) -> NoiseLaw:
    try:
        return _NOISE_LAWS[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown noise law {name!r}; known: {sorted(_NOISE_LAWS)}")


# ---------------------------------------------------------------------------
# dynamics


@dataclass(frozen=True)
class PotentialLangevin:
    """Damped dynamics ``dp = (-grad U - gamma p) dt + sqrt(2 gamma / beta) dW``."""

    potential: object
    gamma: float
    beta: float

    @property
    def sigma(self) -> float:
        return math.sqrt(2.0 * self.gamma / self.beta)

    @property
    def o_rate(self) -> float:
        return -self.gamma

    def drift(self, Q, P):
        return -self.potential.grad(Q) - self.gamma * P

    def grad_u(self, Q):
        return self.potential.grad(Q)

    @property
    def dim(self) -> int:
        return self.potential.dim


@dataclass(frozen=True)
class UnstableOU:
    """Anti-damped dynamics ``dp = (-grad U + alpha p) dt + sigma dW``."""

    potential: object
    alpha: float
    sigma: float

    @property
    def o_rate(self) -> float:
        return self.alpha

    def drift(self, Q, P):
        return -self.potential.grad(Q) + self.alpha * P

    def grad_u(self, Q):
        return self.potential.grad(Q)

    @property
    def dim(self) -> int:
        return self.potential.dim


@dataclass(frozen=True)
class GeneralDrift:
    """Arbitrary drift ``b(q, p)``; only the Euler-type schemes accept it."""

    b: Callable
    sigma: float
    dim: int

    def drift(self, Q, P):
        return self.b(Q, P)


DynamicsSpec = Union[PotentialLangevin, UnstableOU, GeneralDrift]


# ---------------------------------------------------------------------------
# states and outcomes


@dataclass
class PhaseState:
    """Position/momentum pair; ``q`` stays in the closure of the domain."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if self.q.shape != self.p.shape:
            raise ContractViolationError(
                f"q shape {self.q.shape} != p shape {self.p.shape}")

    def copy(self):
        return PhaseState(self.q.copy(), self.p.copy())


@dataclass
class StepOutcome:
    state: PhaseState
    collisions: int
    rejected: bool
    first_collision_time: Optional[float]


class SchemeId(enum.Enum):
    PAc = "pac"
    AcP = "acp"
    OBAcBO = "obabo"
    BAcOAcB = "baoab"
    OAcBAcO = "oabao"
    BOAcOB = "boaob"
    AcBOBAc = "aboba"
    AcOBOAc = "aoboa"
    BAcB_deterministic = "bab"
    PLA = "pla"
    RLA = "rla"

    @classmethod
    def parse(cls, name: str) -> "SchemeId":
        name = str(name).strip()
        for member in cls:
            if name == member.name or name.lower() == member.value:
                return member
        raise ConfigurationError(
            f"unknown scheme {name!r}; known: {[m.value for m in cls]}")


@dataclass(frozen=True)
class _Op:
    kind: str    # one of "A", "B", "O", "P"
    frac: float  # fraction of h this op integrates


_PLANS = {
    SchemeId.PAc: (_Op("P", 1.0), _Op("A", 1.0)),
    SchemeId.AcP: (_Op("A", 1.0), _Op("P", 1.0)),
    SchemeId.OBAcBO: (_Op("O", 0.5), _Op("B", 0.5), _Op("A", 1.0),
                      _Op("B", 0.5), _Op("O", 0.5)),
    SchemeId.BAcOAcB: (_Op("B", 0.5), _Op("A", 0.5), _Op("O", 1.0),
                       _Op("A", 0.5), _Op("B", 0.5)),
    SchemeId.OAcBAcO: (_Op("O", 0.5), _Op("A", 0.5), _Op("B", 1.0),
                       _Op("A", 0.5), _Op("O", 0.5)),
    SchemeId.BOAcOB: (_Op("B", 0.5), _Op("O", 0.5), _Op("A", 1.0),
                      _Op("O", 0.5), _Op("B", 0.5)),
    SchemeId.AcBOBAc: (_Op("A", 0.5), _Op("B", 0.5), _Op("O", 1.0),
                       _Op("B", 0.5), _Op("A", 0.5)),
    SchemeId.AcOBOAc: (_Op("A", 0.5), _Op("O", 0.5), _Op("B", 1.0),
                       _Op("O", 0.5), _Op("A", 0.5)),
    SchemeId.BAcB_deterministic: (_Op("B", 0.5), _Op("A", 1.0), _Op("B", 0.5)),
}

SPLITTING_SCHEMES = tuple(_PLANS)


def noise_slots(scheme: SchemeId) -> int:
    """Number of fresh noise draws one step of the scheme consumes."""
    plan = _PLANS.get(scheme)
    if plan is None:
        raise ConfigurationError(f"{scheme} is not a phase-space stepping scheme")
    return sum(1 for op in plan if op.kind in ("O", "P"))


def validate_scheme(scheme: SchemeId, dynamics: DynamicsSpec) -> None:
    if scheme in (SchemeId.PLA, SchemeId.RLA):
        raise ConfigurationError(
            f"{scheme.name} is an overdamped position-only scheme; "
            "use the sir module's samplers")
    if scheme not in _PLANS:
        raise ConfigurationError(f"unknown scheme {scheme}")
    needs_potential = any(op.kind in ("B", "O") for op in _PLANS[scheme])
    if needs_potential and isinstance(dynamics, GeneralDrift):
        raise ConfigurationError(
            f"{scheme.name} needs a potential-based dynamics; "
            "GeneralDrift only supports PAc / AcP")
    if scheme is SchemeId.BAcB_deterministic:
        if not (isinstance(dynamics, PotentialLangevin) and dynamics.gamma == 0.0):
            raise ConfigurationError(
                "BAcB_deterministic requires PotentialLangevin with gamma = 0 "
                "(hence sigma = 0)")


# ---------------------------------------------------------------------------
# elementary steps


def o_coefficients(h_eff: float, a: float, sigma: float):
    """Decay and noise scale of the exact marginal of ``dp = a p dt + sigma dW``.

    ``std^2 = sigma^2 (e^{2 a h} - 1) / (2 a)``, continued as ``sigma^2 h``
    when ``|a h| < 1e-10``.
    """
    decay = math.exp(a * h_eff)
    if abs(a * h_eff) < 1e-10:
        var = sigma * sigma * h_eff
    else:
        var = sigma * sigma * math.expm1(2.0 * a * h_eff) / (2.0 * a)
    return decay, math.sqrt(var)


def o_step(p, h_eff, a, sigma, xi):
    """Exact stochastic momentum update ``p e^{a h} + std(h) xi``."""
    decay, std = o_coefficients(h_eff, a, sigma)
    return np.asarray(p, dtype=float) * decay + std * np.asarray(xi, dtype=float)


def b_step(state: PhaseState, h_eff, grad_u) -> PhaseState:
    """Impulse ``p <- p - h_eff grad U(q)``; position untouched."""
    g = np.asarray(grad_u(state.q[None, :]))[0]
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite potential gradient", location=state.q.copy())
    return PhaseState(state.q.copy(), state.p - h_eff * g)


def p_step(state: PhaseState, h, b, sigma, xi) -> PhaseState:
    """Euler momentum update ``p <- p + h b(q, p) + sqrt(h) sigma xi``."""
    drift = np.asarray(b(state.q[None, :], state.p[None, :]))[0]
    if not np.all(np.isfinite(drift)):
        raise NumericError("non-finite drift", location=state.q.copy())
    xi = np.asarray(xi, dtype=float)
    return PhaseState(state.q.copy(),
                      state.p + h * drift + math.sqrt(h) * sigma * xi)


def a_c_batch(domain, Q, P, s, max_collisions, policy,
              collisions, rejected, first_time, time_offset=0.0):
    """Free flight of duration ``s`` with specular reflections.

    Mutates ``Q``, ``P`` and the accumulator arrays in place.  ``domain``
    may be ``None`` (no boundary: plain transport).  Rows that exceed
    ``max_collisions`` hits are either restored to their entry state and
    flagged in ``rejected`` (policy "reject") or parked at the last boundary
    point (policy "truncate").
    """
    if domain is None:
        Q += s * P
        return
    tau, idx, point, normal = domain.first_hit_batch(Q, P, s)
    if idx.size == 0:
        Q += s * P
        return
    q_entry = Q[idx].copy()
    p_entry = P[idx].copy()
    Q += np.minimum(tau, s)[:, None] * P
    if first_time is not None:
        fresh = idx[np.isnan(first_time[idx])]
        first_time[fresh] = time_offset + tau[fresh]

    q = point
    p = _reflect_rows(P[idx], normal)
    s_rem = s - tau[idx]
    count = np.ones(idx.size, dtype=np.int64)
    active = np.arange(idx.size)
    while active.size:
        tau2, sub_hit, point2, normal2 = domain.first_hit_batch(
            q[active], p[active], s_rem[active])
        done = np.ones(active.size, dtype=bool)
        done[sub_hit] = False
        fin = active[done]
        q[fin] += s_rem[fin, None] * p[fin]
        hot = active[sub_hit]
        if hot.size == 0:
            break
        q[hot] = point2
        p[hot] = _reflect_rows(p[hot], normal2)
        s_rem[hot] = s_rem[hot] - tau2[sub_hit]
        count[hot] += 1
        over = hot[count[hot] > max_collisions]
        if over.size:
            if policy == "reject":
                q[over] = q_entry[over]
                p[over] = p_entry[over]
                if rejected is not None:
                    rejected[idx[over]] = True
            hot = hot[count[hot] <= max_collisions]
        active = hot
    if collisions is not None:
        collisions[idx] += count
    Q[idx] = q
    P[idx] = p


def a_c_step(domain, state: PhaseState, h, max_collisions=64,
             policy="reject") -> StepOutcome:
    """One multi-collision free-flight step for a single walker."""
    Q = state.q[None, :].copy()
    P = state.p[None, :].copy()
    collisions = np.zeros(1, dtype=np.int64)
    rejected = np.zeros(1, dtype=bool)
    first_time = np.full(1, np.nan)
    a_c_batch(domain, Q, P, float(h), max_collisions, policy,
              collisions, rejected, first_time)
    tau1 = None if np.isnan(first_time[0]) else float(first_time[0])
    return StepOutcome(PhaseState(Q[0], P[0]), int(collisions[0]),
                       bool(rejected[0]), tau1)


# ---------------------------------------------------------------------------
# composed steps


def step_batch(scheme, domain, dynamics, Q, P, h, rng=None, law=None,
               max_collisions=64, policy="reject",
               collisions=None, rejected=None, first_time=None,
               noise_override=None):
    """Advance a batch of walkers one step of ``scheme`` in place.

    Noise is drawn from ``rng`` through ``law`` in plan order, one ``(n, d)``
    array per stochastic sub-step; ``noise_override`` (a list of such arrays)
    replaces the draws, which is how deterministic probes are built.
    """
    plan = _PLANS[scheme]
    n, d = Q.shape
    draws = []
    slot = 0
    for op in plan:
        if op.kind in ("O", "P"):
            if noise_override is not None:
                draws.append(np.asarray(noise_override[slot], dtype=float))
            else:
                draws.append(law.sample(rng, (n, d)))
            slot += 1
    slot = 0
    elapsed_a = 0.0
    for op in plan:
        s = op.frac * h
        if op.kind == "B":
            P -= s * dynamics.grad_u(Q)
        elif op.kind == "O":
            decay, std = o_coefficients(s, dynamics.o_rate, dynamics.sigma)
            P *= decay
            if std != 0.0:
                P += std * draws[slot]
            slot += 1
        elif op.kind == "P":
            drift = dynamics.drift(Q, P)
            P += s * drift + math.sqrt(s) * dynamics.sigma * draws[slot]
            slot += 1
        elif op.kind == "A":
            a_c_batch(domain, Q, P, s, max_collisions, policy,
                      collisions, rejected, first_time, time_offset=elapsed_a)
            elapsed_a += s
    if not np.isfinite(P[:, 0]).all():
        bad = np.flatnonzero(~np.isfinite(P[:, 0]))[0]
        raise NumericError("non-finite momentum after step (bad drift or "
                           "gradient)", location=Q[bad].copy())
    if domain is not None:
        domain.snap_inside_batch(Q)


def step(scheme, domain, dynamics, state: PhaseState, h, rng,
         law=None, max_collisions=64, policy="reject",
         noise_override=None) -> StepOutcome:
    """One step of ``scheme`` for a single walker."""
    validate_scheme(scheme, dynamics)
    law = law or Gaussian()
    Q = state.q[None, :].copy()
    P = state.p[None, :].copy()
    collisions = np.zeros(1, dtype=np.int64)
    rejected = np.zeros(1, dtype=bool)
    first_time = np.full(1, np.nan)
    if noise_override is not None:
        noise_override = [np.asarray(z, dtype=float).reshape(1, -1)
                          for z in noise_override]
    step_batch(scheme, domain, dynamics, Q, P, h, rng, law,
               max_collisions, policy, collisions, rejected, first_time,
               noise_override=noise_override)
    tau1 = None if np.isnan(first_time[0]) else float(first_time[0])
    return StepOutcome(PhaseState(Q[0], P[0]), int(collisions[0]),
                       bool(rejected[0]), tau1)


# ---------------------------------------------------------------------------
# one-step map diagnostics (1-d half line)


def obabo_map_1d(dynamics, domain, q, p, h, z1, z2):
    """The one-step OBAcBO map ``(z1, z2) -> (Q, P)`` at fixed start state."""
    state = PhaseState(np.array([q]), np.array([p]))
    out = step(SchemeId.OBAcBO, domain, dynamics, state, h, rng=None,
               noise_override=[np.array([z1]), np.array([z2])])
    return float(out.state.q[0]), float(out.state.p[0]), out.collisions


def obabo_jacobian_1d(dynamics, domain, q, p, h, z1, z2, fd_step=1e-6):
    """Determinant of the one-step map by central finite differences.

    Raises ``SingularConfigurationError`` when the finite-difference stencil
    straddles the collision/no-collision switching value of ``z1``.
    """
    if dynamics.dim != 1:
        raise ConfigurationError("jacobian probe is one-dimensional only")
    qp, pp, c_plus = obabo_map_1d(dynamics, domain, q, p, h, z1 + fd_step, z2)
    qm, pm, c_minus = obabo_map_1d(dynamics, domain, q, p, h, z1 - fd_step, z2)
    if c_plus != c_minus:
        raise SingularConfigurationError(
            "finite-difference stencil crosses the switching configuration")
    dq_dz1 = (qp - qm) / (2.0 * fd_step)
    dp_dz1 = (pp - pm) / (2.0 * fd_step)
    qp2, pp2, _ = obabo_map_1d(dynamics, domain, q, p, h, z1, z2 + fd_step)
    qm2, pm2, _ = obabo_map_1d(dynamics, domain, q, p, h, z1, z2 - fd_step)
    dq_dz2 = (qp2 - qm2) / (2.0 * fd_step)
    dp_dz2 = (pp2 - pm2) / (2.0 * fd_step)
    return dq_dz1 * dp_dz2 - dq_dz2 * dp_dz1
