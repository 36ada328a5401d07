"""Concrete dynamics and the exact references used to measure errors.

Two kinds of reference live here:

* closed-form solutions of specular boundary-value problems (``bvp_*``),
  evaluated at the start point of a finite-time run,
* stationary Gibbs averages, either by adaptive quadrature
  (:func:`gibbs_average`) or in closed form where one exists.

``experiment_registry`` bundles domains, dynamics, observables and the
matching reference value into named, fully-specified presets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, ContractViolationError, ToleranceError
from .geometry import (
    Annulus,
    Ball,
    Box,
    Domain,
    HalfLine,
    Interval,
    IntervalProduct,
)
from .schemes import PotentialLangevin, SchemeId, UnstableOU

# ---------------------------------------------------------------------------
# potentials


class Potential:
    """Scalar potential with a batch gradient; immutable."""

    name: str
    dim: int
    radial: bool = False

    def value(self, Q):
        raise NotImplementedError

    def grad(self, Q):
        raise NotImplementedError

    def value_single(self, q):
        return float(self.value(np.asarray(q, dtype=float).reshape(1, -1))[0])

    def params(self) -> dict:
        return {}

    def to_config(self) -> dict:
        return {"potential": self.name, "dim": self.dim, **self.params()}


@dataclass(frozen=True)
class QuadraticWell(Potential):
    """``U(q) = k |q|^2 / 2``."""

    k: float = 1.0
    dim: int = 1
    name = "quadratic_well"
    radial = True

    def value(self, Q):
        return 0.5 * self.k * np.einsum("ij,ij->i", Q, Q)

    def grad(self, Q):
        return self.k * Q

    def params(self):
        return {"k": self.k}


@dataclass(frozen=True)
class InvertedQuadratic(Potential):
    """``U(q) = -c |q|^2``; pushes walkers toward the boundary."""

    c: float = 1.0
    dim: int = 2
    name = "inverted_quadratic"
    radial = True

    def value(self, Q):
        return -self.c * np.einsum("ij,ij->i", Q, Q)

    def grad(self, Q):
        return -2.0 * self.c * Q

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class CoupledQuartic2D(Potential):
    """Asymmetric coupled quartic in two dimensions.

    ``U = (q1 - q2)^2 / 2 + q1^2 (q1^2 - 12) / 12 + q2^2 (q2^2 - 24) / 12``;
    its minima lie outside the disc of radius 2.
    """

    dim: int = field(default=2, init=False)
    name = "coupled_quartic"
    radial = False

    def value(self, Q):
        q1, q2 = Q[:, 0], Q[:, 1]
        return (0.5 * (q1 - q2) ** 2
                + q1 ** 2 * (q1 ** 2 - 12.0) / 12.0
                + q2 ** 2 * (q2 ** 2 - 24.0) / 12.0)

    def grad(self, Q):
        q1, q2 = Q[:, 0], Q[:, 1]
        g = np.empty_like(Q)
        g[:, 0] = (q1 - q2) + q1 ** 3 / 3.0 - 2.0 * q1
        g[:, 1] = -(q1 - q2) + q2 ** 3 / 3.0 - 4.0 * q2
        return g


@dataclass(frozen=True)
class Funnel(Potential):
    """Hierarchical funnel in ``1 + n_latent`` dimensions.

    ``U(th, x) = th^2/18 + 4 th + e^{-th} |x|^2 / 2`` with coordinate 0
    playing the role of the scale parameter ``th``.
    """

    n_latent: int = 8
    name = "funnel"
    radial = False

    @property
    def dim(self):
        return 1 + self.n_latent

    def value(self, Q):
        th = Q[:, 0]
        xx = np.einsum("ij,ij->i", Q[:, 1:], Q[:, 1:])
        return th ** 2 / 18.0 + 4.0 * th + 0.5 * np.exp(-th) * xx

    def grad(self, Q):
        th = Q[:, 0]
        x = Q[:, 1:]
        xx = np.einsum("ij,ij->i", x, x)
        e = np.exp(-th)
        g = np.empty_like(Q)
        g[:, 0] = th / 9.0 + 4.0 - 0.5 * e * xx
        g[:, 1:] = e[:, None] * x
        return g

    def params(self):
        return {"n_latent": self.n_latent}


@dataclass(frozen=True)
class ConstantPotential(Potential):
    """``U = 0``: pure kinetic transport with reflection."""

    dim: int = 1
    name = "constant"
    radial = True

    def value(self, Q):
        return np.zeros(len(Q))

    def grad(self, Q):
        return np.zeros_like(Q)


_POTENTIALS = {
    "quadratic_well": lambda c: QuadraticWell(c.get("k", 1.0), c.get("dim", 1)),
    "inverted_quadratic": lambda c: InvertedQuadratic(c.get("c", 1.0), c.get("dim", 2)),
    "coupled_quartic": lambda c: CoupledQuartic2D(),
    "funnel": lambda c: Funnel(c.get("n_latent", 8)),
    "constant": lambda c: ConstantPotential(c.get("dim", 1)),
}


def potential_from_config(cfg: dict) -> Potential:
    name = cfg.get("potential")
    if name not in _POTENTIALS:
        raise ConfigurationError(
            f"unknown potential {name!r}; known: {sorted(_POTENTIALS)}")
    return _POTENTIALS[name](cfg)


def dynamics_to_config(dynamics) -> dict:
    if isinstance(dynamics, PotentialLangevin):
        return {"kind": "potential_langevin", "gamma": dynamics.gamma,
                "beta": dynamics.beta,
                "potential": dynamics.potential.to_config()}
    if isinstance(dynamics, UnstableOU):
        return {"kind": "unstable_ou", "alpha": dynamics.alpha,
                "sigma": dynamics.sigma,
                "potential": dynamics.potential.to_config()}
    raise ConfigurationError(
        f"dynamics {type(dynamics).__name__} has no config form")


def dynamics_from_config(cfg: dict):
    kind = cfg.get("kind")
    if kind == "potential_langevin":
        return PotentialLangevin(potential_from_config(cfg["potential"]),
                                 gamma=float(cfg["gamma"]),
                                 beta=float(cfg["beta"]))
    if kind == "unstable_ou":
        return UnstableOU(potential_from_config(cfg["potential"]),
                          alpha=float(cfg["alpha"]), sigma=float(cfg["sigma"]))
    raise ConfigurationError(f"unknown dynamics kind {kind!r}")


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class ObservableSpec:
    """Named scalar observable of the phase state.

    ``fn(Q, P)`` maps ``(n, d)`` arrays to ``(n,)`` values.  For stationary
    averages, ``q_fn`` (when set) exposes the position part alone and
    ``p_mean`` the analytic momentum average to add on top of it.
    """

    name: str
    fn: Callable
    q_fn: Optional[Callable] = None
    p_mean: Optional[Callable] = None   # (beta, dim) -> float
    radial: bool = False

    def __call__(self, Q, P):
        return self.fn(Q, P)

    @property
    def depends_on_p(self):
        return self.q_fn is None


def _half_q_sq(Q, P):
    return 0.5 * np.einsum("ij,ij->i", Q, Q)


def _half_q_sq_pos(Q):
    return 0.5 * np.einsum("ij,ij->i", Q, Q)


def _q_sq(Q, P):
    return np.einsum("ij,ij->i", Q, Q)


def _q_sq_pos(Q):
    return np.einsum("ij,ij->i", Q, Q)


def half_square_norm_observable():
    return ObservableSpec("q_squared_half", _half_q_sq, q_fn=_half_q_sq_pos,
                          radial=True)


def square_norm_observable():
    return ObservableSpec("q_squared", _q_sq, q_fn=_q_sq_pos, radial=True)


@dataclass(frozen=True)
class _PotentialValue:
    potential: Potential

    def __call__(self, Q, P=None):
        return self.potential.value(Q)


def potential_observable(potential: Potential):
    fn = _PotentialValue(potential)
    return ObservableSpec("potential", fn, q_fn=fn, radial=potential.radial)


@dataclass(frozen=True)
class _GibbsWeight:
    potential: Potential
    beta: float

    def __call__(self, Q, P):
        return np.exp(-self.beta * (0.5 * np.einsum("ij,ij->i", P, P)
                                    + self.potential.value(Q)))


def gibbs_weight_observable(potential: Potential, beta: float):
    return ObservableSpec("gibbs_weight", _GibbsWeight(potential, beta))


@dataclass(frozen=True)
class _Hamiltonian:
    potential: Potential

    def __call__(self, Q, P):
        return self.potential.value(Q) + 0.5 * np.einsum("ij,ij->i", P, P)


def _kinetic_mean(beta, dim):
    return 0.5 * dim / beta


def hamiltonian_observable(potential: Potential):
    return ObservableSpec(
        "hamiltonian", _Hamiltonian(potential),
        q_fn=_PotentialValue(potential),
        p_mean=_kinetic_mean,
        radial=potential.radial)


_OBSERVABLES = {
    "q_squared_half": lambda dyn: half_square_norm_observable(),
    "q_squared": lambda dyn: square_norm_observable(),
    "potential": lambda dyn: potential_observable(dyn.potential),
    "gibbs_weight": lambda dyn: gibbs_weight_observable(
        dyn.potential, dyn.beta if isinstance(dyn, PotentialLangevin) else 1.0),
    "hamiltonian": lambda dyn: hamiltonian_observable(dyn.potential),
}


def observable_from_name(name: str, dynamics) -> ObservableSpec:
    if name not in _OBSERVABLES:
        raise ConfigurationError(
            f"unknown observable {name!r}; known: {sorted(_OBSERVABLES)}")
    return _OBSERVABLES[name](dynamics)


# ---------------------------------------------------------------------------
# closed-form specular boundary-value solutions


def bvp_shifted_square(t, q, p, c, T):
    """``(q + c)^2 e^{-p^2} e^{-(T - t)}`` on the half line ``q > 0``.

    Solves the backward equation with drift ``b = 1/(q + c) + p`` and unit
    noise; even in ``p`` at ``q = 0``.
    """
    return (q + c) ** 2 * np.exp(-np.asarray(p) ** 2) * math.exp(-(T - t))


def bvp_gibbs_decay(t, q, p, alpha, beta, potential_value, d, T):
    """``exp(-beta (|p|^2/2 + U(q)) - alpha d (T - t))``.

    Solves the backward equation for anti-damped dynamics
    ``b = -grad U + alpha p`` with ``sigma = sqrt(2 alpha / beta)``; the
    value depends on ``p`` through ``|p|`` only, hence is reflection
    invariant on any boundary.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    u = potential_value(q.reshape(1, -1))[0] if callable(potential_value) \
        else float(potential_value)
    return math.exp(-beta * (0.5 * float(p @ p) + u) - alpha * d * (T - t))


def bvp_quartic_momentum(t, q, p, d, T):
    """``|p|^4 + |p|^2 + sin |q|^2 + 2 d (T - t)``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    pp = float(p @ p)
    return pp ** 2 + pp + math.sin(float(q @ q)) + 2.0 * d * (T - t)


def bvp_oscillatory_halfline(t, q, p, T):
    """Three-term damped oscillatory solution on the half line.

    Solves ``u_t + p u_q - q u_p - p u_p + u_pp = 0`` with terminal value
    ``q^2 - 1`` and even-in-``p`` boundary condition at ``q = 0``.
    """
    s = T - t
    decay = math.exp(-s)
    root3 = math.sqrt(3.0)
    return (2.0 / 3.0 * (q * q + p * p + q * p - 2.0) * decay
            + 1.0 / 3.0 * (q * q - 2.0 * p * p - 2.0 * q * p + 1.0)
            * decay * math.cos(root3 * s)
            + 1.0 / root3 * (2.0 * q * p + q * q - 1.0)
            * decay * math.sin(root3 * s))


# ---------------------------------------------------------------------------
# stationary averages by quadrature


def _quad_1d(f, a, b, rel_tol):
    val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=rel_tol / 10.0,
                              limit=200)
    if err > rel_tol * abs(val) + 1e-300:
        raise ToleranceError(
            f"1-d quadrature error {err:.2e} exceeds tolerance for value {val:.6e}")
    return val


def _radial_average(potential, beta, r_lo, r_hi, q_weight, rel_tol):
    """Position average of a radial observable over an annular region."""
    def density(r):
        u = potential.value(np.array([[r, 0.0]]))[0]
        return math.exp(-beta * u) * r

    num = _quad_1d(lambda r: q_weight(r) * density(r), r_lo, r_hi, rel_tol)
    den = _quad_1d(density, r_lo, r_hi, rel_tol)
    return num / den


def gibbs_average(potential, beta, domain, observable, rel_tol=1e-9):
    """Stationary average of ``observable`` under the confined Gibbs law.

    The position integral runs over the domain (``d <= 2``); any momentum
    dependence must be declared additively through ``observable.p_mean``
    (exact for the Gaussian momentum marginal).
    """
    if observable.depends_on_p and observable.p_mean is None:
        raise ConfigurationError(
            "gibbs_average needs a position-only observable or an analytic "
            "momentum part (p_mean)")
    extra = 0.0
    if observable.p_mean is not None:
        extra = observable.p_mean(beta, potential.dim)

    if isinstance(domain, (HalfLine, Interval)) and potential.dim == 1:
        a = domain.a
        b = np.inf if isinstance(domain, HalfLine) else domain.b

        def density(x):
            return math.exp(-beta * potential.value(np.array([[x]]))[0])

        def weighted(x):
            return observable.q_fn(np.array([[x]]))[0] * density(x)

        num = _quad_1d(weighted, a, b, rel_tol)
        den = _quad_1d(density, a, b, rel_tol)
        return num / den + extra

    if isinstance(domain, Ball) and potential.dim == 2:
        if potential.radial and observable.radial:
            return _radial_average(
                potential, beta, 0.0, domain.r,
                lambda r: observable.q_fn(np.array([[r, 0.0]]))[0],
                rel_tol) + extra
        return _planar_average(potential, beta, observable,
                               domain, rel_tol) + extra

    if isinstance(domain, Annulus) and potential.dim == 2:
        if potential.radial and observable.radial:
            return _radial_average(
                potential, beta, domain.r1, domain.r2,
                lambda r: observable.q_fn(np.array([[r, 0.0]]))[0],
                rel_tol) + extra
        return _planar_average(potential, beta, observable,
                               domain, rel_tol) + extra

    if isinstance(domain, Box) and potential.dim == 2:
        return _planar_average(potential, beta, observable, domain,
                               rel_tol) + extra

    if isinstance(domain, IntervalProduct) and isinstance(potential, Funnel):
        if observable.name != "potential":
            raise ConfigurationError(
                "only the potential observable has a funnel closed form")
        return funnel_potential_average(domain.a, domain.b,
                                        potential.n_latent, rel_tol)

    raise ConfigurationError(
        f"no quadrature path for {type(domain).__name__} in dimension "
        f"{potential.dim}")


def _planar_average(potential, beta, observable, domain, rel_tol):
    """2-d position average by adaptive quadrature (disc, annulus or box)."""
    def point_value(x, y):
        return potential.value(np.array([[x, y]]))[0]

    # reference offset keeps the exponent moderate
    probe = np.linspace(-1, 1, 7)
    if isinstance(domain, (Ball, Annulus)):
        r_hi = domain.r if isinstance(domain, Ball) else domain.r2
        grid = np.array([[x * r_hi, y * r_hi] for x in probe for y in probe])
        keep = domain.closure_contains_batch(grid, atol=1e-6)
        u_ref = float(potential.value(grid[keep]).min())

        def num_int(r, th):
            x, y = r * math.cos(th), r * math.sin(th)
            w = math.exp(-beta * (point_value(x, y) - u_ref)) * r
            return observable.q_fn(np.array([[x, y]]))[0] * w

        def den_int(r, th):
            x, y = r * math.cos(th), r * math.sin(th)
            return math.exp(-beta * (point_value(x, y) - u_ref)) * r

        r_lo = 0.0 if isinstance(domain, Ball) else domain.r1
        num, num_err = integrate.dblquad(num_int, 0.0, 2.0 * math.pi,
                                         r_lo, r_hi, epsabs=1e-12,
                                         epsrel=rel_tol / 10.0)
        den, den_err = integrate.dblquad(den_int, 0.0, 2.0 * math.pi,
                                         r_lo, r_hi, epsabs=1e-12,
                                         epsrel=rel_tol / 10.0)
    else:
        lo, hi = np.asarray(domain.lo), np.asarray(domain.hi)
        grid = np.array([[x, y] for x in np.linspace(lo[0], hi[0], 7)
                         for y in np.linspace(lo[1], hi[1], 7)])
        u_ref = float(potential.value(grid).min())

        def num_int(y, x):
            w = math.exp(-beta * (point_value(x, y) - u_ref))
            return observable.q_fn(np.array([[x, y]]))[0] * w

        def den_int(y, x):
            return math.exp(-beta * (point_value(x, y) - u_ref))

        num, num_err = integrate.dblquad(num_int, lo[0], hi[0], lo[1], hi[1],
                                         epsabs=1e-12, epsrel=rel_tol / 10.0)
        den, den_err = integrate.dblquad(den_int, lo[0], hi[0], lo[1], hi[1],
                                         epsabs=1e-12, epsrel=rel_tol / 10.0)
    value = num / den
    if den_err > rel_tol * abs(den) or num_err > rel_tol * abs(num) + 1e-300:
        raise ToleranceError("2-d quadrature failed to reach tolerance")
    return value


def ring_weighted_square_average(c: float, r: float) -> float:
    """Closed form of ``E |q|^2`` under ``rho ~ e^{c |q|^2}`` on a disc.

    Substituting ``u = |q|^2`` gives
    ``(int_0^R u e^{c u} du) / (int_0^R e^{c u} du)`` with ``R = r^2``.
    """
    R = r * r
    eCR = math.exp(c * R)
    num = eCR * (R / c - 1.0 / (c * c)) + 1.0 / (c * c)
    den = (eCR - 1.0) / c
    return num / den


def funnel_potential_average(a=-3.0, b=1.0, n_latent=8, rel_tol=1e-10):
    """Stationary mean of the funnel potential, reduced to 1-d quadrature.

    Integrating the latent coordinates out of ``e^{-U}`` leaves the scale
    marginal ``exp(-th^2/18)`` on ``(a, b)`` (the linear and log-volume terms
    cancel), and the conditional mean of the latent part is ``n_latent / 2``.
    """
    def marginal(th):
        return math.exp(-th * th / 18.0)

    def weighted(th):
        return (th * th / 18.0 + 4.0 * th + 0.5 * n_latent) * marginal(th)

    num = _quad_1d(weighted, a, b, rel_tol)
    den = _quad_1d(marginal, a, b, rel_tol)
    return num / den


# ---------------------------------------------------------------------------
# transition density on (0, 1) by the method of images


def _free_gaussian(t, q, p, q0, p0, gamma):
    """Fundamental kinetic transition density on the whole line (beta = 1)."""
    e1 = math.exp(-gamma * t)
    mq = q0 + p0 * (1.0 - e1) / gamma
    mp = p0 * e1
    sqq = 2.0 / gamma ** 2 * (gamma * t - 1.5 + 2.0 * e1 - 0.5 * e1 * e1)
    spp = 1.0 - e1 * e1
    sqp = (1.0 - e1) ** 2 / gamma
    det = sqq * spp - sqp * sqp
    dq = q - mq
    dp = p - mp
    quad_form = (spp * dq * dq - 2.0 * sqp * dq * dp + sqq * dp * dp) / det
    return np.exp(-0.5 * quad_form) / (2.0 * math.pi * math.sqrt(det))


def fp_image_density(t, q, p, q0, p0, gamma, n_images=20):
    """Transition density of reflecting free Langevin motion on ``(0, 1)``.

    Truncated lattice sum of mirrored free-space Gaussians:
    sources at ``q0 + 2n`` with momentum ``p0`` and at ``-q0 + 2n`` with
    momentum ``-p0``, ``|n| <= n_images``.
    """
    if t <= 0:
        raise ContractViolationError(f"density needs t > 0, got {t}")
    if n_images < 1:
        raise ContractViolationError("n_images must be >= 1")
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    total = np.zeros(np.broadcast(q, p).shape)
    for n in range(-n_images, n_images + 1):
        total = total + _free_gaussian(t, q, p, q0 + 2.0 * n, p0, gamma)
        total = total + _free_gaussian(t, q, p, -q0 + 2.0 * n, -p0, gamma)
    return total if total.shape else float(total)


# ---------------------------------------------------------------------------
# experiment registry


@dataclass(frozen=True)
class ExperimentPreset:
    """Everything needed to run one named study."""

    name: str
    description: str
    study: str                      # finite_time | ergodic | tau_stats | energy_drift | sir | jacobian
    domain: Optional[Domain] = None
    dynamics: object = None
    observable: Optional[ObservableSpec] = None
    q0: Optional[tuple] = None
    p0: Optional[tuple] = None      # None with p0_law set means random draw
    p0_law: Optional[str] = None    # "gaussian" for standard normal momenta
    T: float = 1.0
    h: float = 0.1
    M: int = 1
    h_sweep: tuple = ()
    m_sweep: tuple = ()             # per-h trajectory counts for sweeps
    schemes: tuple = ()
    burn_in: float = 0.0
    reference: Optional[Callable] = None   # () -> float, lazy oracle
    extras: dict = field(default_factory=dict)

    @property
    def scheme(self) -> SchemeId:
        return self.schemes[0] if self.schemes else SchemeId.OBAcBO

    def reference_value(self) -> float:
        if self.reference is None:
            raise ConfigurationError(f"preset {self.name} has no reference value")
        return float(self.reference())


def _exp1_reference():
    pot = InvertedQuadratic(1.0, 2)
    return bvp_gibbs_decay(0.0, (1.0, 1.0), (-0.1, -0.1), alpha=0.25,
                           beta=1.0, potential_value=pot.value, d=2, T=4.0)


def _exp2_reference():
    return gibbs_average(QuadraticWell(1.0, 1), 1.0, HalfLine(1.0),
                         half_square_norm_observable())


def _exp3_reference():
    pot = CoupledQuartic2D()
    return gibbs_average(pot, 1.0, Ball(2.0), potential_observable(pot),
                         rel_tol=1e-7)


def _exp4_reference():
    return ring_weighted_square_average(5.0, 2.0)


def experiment_registry() -> dict:
    """All named presets, keyed by name."""
    presets = {}

    pot1 = InvertedQuadratic(1.0, 2)
    dyn1 = UnstableOU(pot1, alpha=0.25, sigma=math.sqrt(0.5))
    presets["exp1"] = ExperimentPreset(
        name="exp1",
        description=("finite-time weak error on a disc: anti-damped drift "
                     "toward the wall, Gibbs-weight observable vs the exact "
                     "solution 0.99005 at T=4"),
        study="finite_time",
        domain=Ball(2.0), dynamics=dyn1,
        observable=gibbs_weight_observable(pot1, 1.0),
        q0=(1.0, 1.0), p0=(-0.1, -0.1),
        T=4.0, h=0.01, M=1_000_000,
        h_sweep=(0.08, 0.04, 0.02, 0.01),
        schemes=(SchemeId.OBAcBO, SchemeId.BAcOAcB, SchemeId.PAc),
        reference=_exp1_reference)

    pot2 = QuadraticWell(1.0, 1)
    presets["exp2"] = ExperimentPreset(
        name="exp2",
        description=("stationary average of q^2/2 on the half line (1, inf) "
                     "with a quadratic well; reference 1.2626 by quadrature"),
        study="ergodic",
        domain=HalfLine(1.0),
        dynamics=PotentialLangevin(pot2, gamma=1.0, beta=1.0),
        observable=half_square_norm_observable(),
        q0=(2.0,), p0=(-0.1,),
        T=20.0, h=0.08, M=1_000_000,
        h_sweep=(0.5, 0.4, 0.2, 0.1, 0.08),
        schemes=(SchemeId.BAcOAcB, SchemeId.OBAcBO, SchemeId.OAcBAcO,
                 SchemeId.BOAcOB, SchemeId.AcBOBAc, SchemeId.AcOBOAc),
        reference=_exp2_reference)

    pot3 = CoupledQuartic2D()
    presets["exp3"] = ExperimentPreset(
        name="exp3",
        description=("stationary mean of an asymmetric coupled quartic on "
                     "the disc of radius 2, gamma=4; reference -4.18006 by "
                     "quadrature"),
        study="ergodic",
        domain=Ball(2.0),
        dynamics=PotentialLangevin(pot3, gamma=4.0, beta=1.0),
        observable=potential_observable(pot3),
        q0=(1.0, 1.0), p0=(-0.1, -0.1),
        T=12.0, h=0.04, M=1_000_000,
        h_sweep=(0.1, 0.075, 0.05, 0.04),
        schemes=(SchemeId.OBAcBO, SchemeId.BAcOAcB),
        reference=_exp3_reference)

    pot4 = InvertedQuadratic(5.0, 2)
    presets["exp4"] = ExperimentPreset(
        name="exp4",
        description=("boundary-hugging stationary law e^{5|q|^2} on the disc: "
                     "collision-heavy sampling of E|q|^2 = 3.8000 (closed form)"),
        study="ergodic",
        domain=Ball(2.0),
        dynamics=PotentialLangevin(pot4, gamma=1.0, beta=1.0),
        observable=square_norm_observable(),
        q0=(0.0, 0.0), p0=(-0.1, -0.1),
        T=20.0, h=0.004, M=1_000_000,
        h_sweep=(0.2, 0.1, 0.05, 0.02, 0.01, 0.004),
        m_sweep=(10_000, 10_000, 40_000, 50_000, 100_000, 200_000),
        schemes=(SchemeId.OBAcBO, SchemeId.BAcOAcB),
        reference=_exp4_reference)

    pot5 = Funnel(8)
    presets["exp5"] = ExperimentPreset(
        name="exp5",
        description=("truncated funnel: scale coordinate confined to (-3, 1), "
                     "8 latent coordinates free; stationary mean of the "
                     "potential, reference by 1-d quadrature"),
        study="ergodic",
        domain=IntervalProduct(-3.0, 1.0, 9),
        dynamics=PotentialLangevin(pot5, gamma=1.0, beta=1.0),
        observable=potential_observable(pot5),
        q0=(0.0,) * 9, p0=(0.0,) * 9,
        T=20.0, h=0.05, M=100_000,
        h_sweep=(0.2, 0.1, 0.05),
        schemes=(SchemeId.OBAcBO, SchemeId.BAcOAcB),
        reference=funnel_potential_average)

    # start near the wall with gamma = 4: the first-passage position profile
    # is steep there, which makes the quadratic decay of the mean-offset
    # statistic resolvable at 1e6 events
    presets["tau-stats"] = ExperimentPreset(
        name="tau-stats",
        description=("within-step first-collision time statistics for the "
                     "harmonic well on (0, inf): mean offset from h/2 and "
                     "normalized second moment"),
        study="tau_stats",
        domain=HalfLine(0.0),
        dynamics=PotentialLangevin(QuadraticWell(1.0, 1), gamma=4.0, beta=1.0),
        q0=(0.5,), p0=None, p0_law="gaussian",
        T=200.0, h=0.01, M=1_000_000,
        h_sweep=(0.04, 0.02, 0.01, 0.005),
        schemes=(SchemeId.OBAcBO,))

    presets["hamiltonian-fixed"] = ExperimentPreset(
        name="hamiltonian-fixed",
        description=("energy error of the deterministic kick-flight-kick "
                     "integrator, fixed start: free space vs the unit box"),
        study="energy_drift",
        domain=Box((0.0, 0.0), (1.0, 1.0)),
        dynamics=PotentialLangevin(QuadraticWell(1.0, 2), gamma=0.0, beta=1.0),
        q0=(0.1, 0.5), p0=(1.5, 1.5),
        T=5.0, h=0.01, M=1,
        h_sweep=(0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625,
                 0.00078125),
        schemes=(SchemeId.BAcB_deterministic,))

    presets["hamiltonian-random"] = ExperimentPreset(
        name="hamiltonian-random",
        description=("energy error of the deterministic integrator in the "
                     "unit box with standard normal initial momenta"),
        study="energy_drift",
        domain=Box((0.0, 0.0), (1.0, 1.0)),
        dynamics=PotentialLangevin(QuadraticWell(1.0, 2), gamma=0.0, beta=1.0),
        q0=(0.1, 0.5), p0=None, p0_law="gaussian",
        T=1.0, h=0.01, M=100_000,
        h_sweep=(0.1, 0.05, 0.02, 0.01),
        schemes=(SchemeId.BAcB_deterministic,))

    presets["sir"] = ExperimentPreset(
        name="sir",
        description=("Bayesian SIR inference: reflecting samplers on the "
                     "log-posterior over (transmission, recovery) rates, "
                     "truth (0.7, 0.2)"),
        study="sir",
        T=100.0, h=0.001, M=1, burn_in=10.0,
        schemes=(SchemeId.BAcOAcB, SchemeId.OBAcBO, SchemeId.PLA, SchemeId.RLA))

    presets["jacobian-check"] = ExperimentPreset(
        name="jacobian-check",
        description=("one-step map of the symmetric O-B-flight-B-O scheme on "
                     "the half line: finite-difference Jacobian determinant "
                     "vs h Gamma^2"),
        study="jacobian",
        domain=HalfLine(0.0),
        dynamics=PotentialLangevin(QuadraticWell(1.0, 1), gamma=1.0, beta=1.0),
        q0=(0.5,), p0=(0.2,),
        T=0.1, h=0.1, M=100,
        schemes=(SchemeId.OBAcBO,))

    return presets
