"""Stratified Monte Carlo evaluation of I_nu = integral F / (omega^2 + (nu Gamma)^2).

The mass of the integrand concentrates in a Lorentzian ridge of width
~ nu Gamma / |z|^2 around the quadric, so a single ambient proposal is
hopeless at small nu.  The estimator splits R^{2d} into three exact strata:

  origin   |z| <= delta0 = max(2 nu, 1e-2), sampled uniformly;
  tube     normal coordinates t in (delta0, t_hi), |theta| < theta0, sampled
           as pi(t eta, theta) with eta from the quadric sampler, t
           log-stratified and theta from a truncated Cauchy whose scale
           eps = nu Gamma(t eta) / t^2 matches the divisor exactly when
           Gamma is frozen at theta = 0 (bounded importance weights);
  exterior everything else, sampled from an isotropic <z>-power-law
           proposal with in-stratum rejection.

Membership is decided by the closed-form chart inversion, so the strata
partition the space exactly (tested).  All randomness flows through
deterministic substreams of the caller's seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundViolated, BudgetExhausted, NuOutOfRange
from .estimates import IntegralEstimate, StratumEstimate, mean_and_se
from .fields import ProblemSpec, bracket
from .geometry import (_invert_pi_arrays, ball_volume, omega, pi_map,
                       sample_sigma1, sphere_area, tube_volume_factor)
from .quadrature import extend_tail, geometric_peak_edges, refine_to_tolerance
from .util import substream

BALL, TUBE, EXTERIOR = 0, 1, 2


def origin_radius(nu: float) -> float:
    return max(2.0 * nu, 1e-2)


def stratum_labels(z: np.ndarray, delta0: float, t_hi: float,
                   theta0: float) -> np.ndarray:
    """Assign each ambient point to exactly one stratum."""
    r = np.linalg.norm(z, axis=1)
    labels = np.full(len(z), EXTERIOR, dtype=np.int8)
    labels[r <= delta0] = BALL
    xi, theta, ok = _invert_pi_arrays(z)
    t = np.linalg.norm(xi, axis=1)
    in_tube = ok & (r > delta0) & (t > delta0) & (t < t_hi) & (np.abs(theta) < theta0)
    labels[in_tube] = TUBE
    return labels


def _probe_directions(d: int, seed: int, n: int = 32) -> np.ndarray:
    rng = substream(seed, 9)
    u = rng.standard_normal((n, 2 * d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def tube_radial_cutoff(spec: ProblemSpec, nu: float, seed: int = 0) -> float:
    """Upper t for the tube stratum: actual leading-profile tail < 1e-12.

    The tube beyond the cutoff stays covered by the exterior stratum, so the
    cutoff only steers efficiency, not correctness.
    """
    d = spec.d
    dirs = _probe_directions(d, seed)

    def profile(t):
        pts = t[:, None, None] * dirs[None, :, :]
        flat = pts.reshape(-1, 2 * d)
        ratio = np.abs(spec.F(flat)) / spec.Gamma(flat)
        return t ** (2 * d - 3) * ratio.reshape(len(t), -1).max(axis=1)

    return extend_tail(profile, 1e-3, 4.0)


def exterior_radial_cutoff(spec: ProblemSpec, nu: float, theta0: float,
                           seed: int = 0) -> float:
    d = spec.d
    c_tube = theta0 ** 2 / (1.0 + theta0 ** 2) ** 2
    dirs = _probe_directions(d, seed)

    def profile(r):
        pts = r[:, None, None] * dirs[None, :, :]
        flat = pts.reshape(-1, 2 * d)
        fmax = np.abs(spec.F(flat)).reshape(len(r), -1).max(axis=1)
        gmin = spec.Gamma(flat).reshape(len(r), -1).min(axis=1)
        return r ** (2 * d - 1) * fmax / (c_tube * r ** 4 + (nu * gmin) ** 2)

    return extend_tail(profile, 1e-3, 4.0)


def _check_nu(nu: float):
    if not (0.0 < nu <= 1.0):
        raise NuOutOfRange(f"nu={nu} outside (0, 1]")


def evaluate_I_nu(spec: ProblemSpec, nu: float, budget: int = 10**6, seed: int = 0,
                  theta0: float = 0.1, eps_slab: float = 1e-3,
                  fractions: tuple[float, float, float] = (0.1, 0.5, 0.4),
                  n_t_strata: int = 64, rel_tol: float | None = None,
                  raise_on_budget: bool = False) -> IntegralEstimate:
    """Unbiased stratified estimate of I_nu with statistical error."""
    _check_nu(nu)
    delta0 = origin_radius(nu)
    t_hi = tube_radial_cutoff(spec, nu, seed)
    f_ball, f_tube, f_ext = fractions

    strata = [
        _ball_stratum(spec, nu, delta0, int(budget * f_ball), substream(seed, 1)),
        _tube_stratum(spec, nu, delta0, t_hi, theta0, eps_slab,
                      int(budget * f_tube), seed, n_t_strata),
        _exterior_stratum(spec, nu, delta0, t_hi, theta0,
                          int(budget * f_ext), substream(seed, 4)),
    ]
    est = IntegralEstimate.from_strata(strata)
    if rel_tol is not None and est.std_error > rel_tol * max(abs(est.value), 1e-300):
        if raise_on_budget:
            raise BudgetExhausted(
                f"std_error {est.std_error:.3g} > rel_tol*|value| at budget {budget}")
        est = IntegralEstimate(est.value, est.std_error, est.n_samples,
                               est.strata, converged=False)
    return est


def _ball_stratum(spec, nu, delta0, n, rng) -> StratumEstimate:
    d = spec.d
    vol = ball_volume(2 * d) * delta0 ** (2 * d)
    total = total_sq = 0.0
    done = 0
    block = 1 << 19
    while done < n:
        m = min(block, n - done)
        done += m
        g = rng.standard_normal((m, 2 * d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = delta0 * rng.random(m) ** (1.0 / (2 * d))
        z = g * r[:, None]
        vals = spec.F(z) / (omega(z) ** 2 + (nu * spec.Gamma(z)) ** 2)
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals ** 2))
    mean, se = mean_and_se(total, total_sq, n)
    return StratumEstimate("origin_ball", vol * mean, vol * se, n)


def _tube_stratum(spec, nu, t_lo, t_hi, theta0, eps_slab, budget, seed,
                  n_t_strata) -> StratumEstimate:
    d = spec.d
    n_eta = max(32, budget // n_t_strata)
    sample = sample_sigma1(d, n_eta, seed=seed, eps_slab=eps_slab, theta0=theta0,
                           key=(2,))
    rng = substream(seed, 3)
    m = len(sample.eta)
    s = n_t_strata
    u_edges = np.linspace(math.log(t_lo), math.log(t_hi), s + 1)
    du = u_edges[1] - u_edges[0]

    radial = np.empty(m)
    block = max(1, (1 << 21) // s)
    for lo in range(0, m, block):
        etas = sample.eta[lo:lo + block]          # (b, 2d)
        b = len(etas)
        u = u_edges[:-1][None, :] + du * rng.random((b, s))
        t = np.exp(u)                              # (b, s)
        base = t[:, :, None] * etas[:, None, :]    # (b, s, 2d)
        flat_base = base.reshape(-1, 2 * d)
        gamma0 = spec.Gamma(flat_base).reshape(b, s)
        eps = nu * gamma0 / t ** 2
        psi_max = np.arctan(theta0 / eps)
        psi = psi_max * (2.0 * rng.random((b, s)) - 1.0)
        theta = eps * np.tan(psi)
        z = pi_map(flat_base, theta.reshape(-1))
        fv = spec.F(z).reshape(b, s)
        gv = spec.Gamma(z).reshape(b, s)
        divisor = t ** 4 * theta ** 2 + (nu * gv) ** 2
        pdf = eps / ((eps ** 2 + theta ** 2) * 2.0 * psi_max)
        mu = tube_volume_factor(d, theta)
        contrib = du * t ** (2 * d) * mu * fv / (divisor * pdf)
        radial[lo:lo + block] = contrib.sum(axis=1)

    value, se = sample.integrate(radial)
    return StratumEstimate("tube", value, se, m * s)


def _exterior_power_sampler(spec, delta0, r_hi):
    """Inverse-CDF sampler for radial density ~ r^(2d-1) <r>^-(M+4)."""
    d = spec.d
    p = spec.F.decay_M + 4.0
    grid = np.geomspace(delta0 * 0.9, r_hi, 4097)
    dens = grid ** (2 * d - 1) * (1.0 + grid * grid) ** (-p / 2)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1])
                                           * np.diff(grid))])
    norm = cdf[-1]
    cdf /= norm

    def draw(rng, m):
        return np.interp(rng.random(m), cdf, grid)

    def q_r(r):
        return np.interp(r, grid, dens) / norm

    return draw, q_r


def _exterior_stratum(spec, nu, delta0, t_hi, theta0, n, rng) -> StratumEstimate:
    d = spec.d
    r_hi = max(exterior_radial_cutoff(spec, nu, theta0),
               t_hi * math.sqrt(1.0 + theta0 ** 2))
    draw, q_r = _exterior_power_sampler(spec, delta0, r_hi)
    area = sphere_area(2 * d)
    total = total_sq = 0.0
    done = 0
    block = 1 << 19
    while done < n:
        m = min(block, n - done)
        done += m
        r = draw(rng, m)
        u = rng.standard_normal((m, 2 * d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        z = r[:, None] * u
        keep = stratum_labels(z, delta0, t_hi, theta0) == EXTERIOR
        w = np.zeros(m)
        if np.any(keep):
            zk = z[keep]
            f = spec.F(zk) / (omega(zk) ** 2 + (nu * spec.Gamma(zk)) ** 2)
            q = q_r(r[keep]) / (area * r[keep] ** (2 * d - 1))
            w[keep] = f / q
        total += float(np.sum(w))
        total_sq += float(np.sum(w * w))
    mean, se = mean_and_se(total, total_sq, n)
    return StratumEstimate("exterior", mean, se, n)


# -- near-origin bound ----------------------------------------------------------

def near_origin_bound(spec: ProblemSpec, nu: float, delta: float,
                      budget: int = 200_000, seed: int = 0
                      ) -> tuple[float, IntegralEstimate]:
    """Analytic bound C nu^-1 delta^(2d-2) for the |F| integral over K_delta.

    K_delta = {|x| <= delta, |y| <= delta}.  The constant follows the layer
    argument: with C1 = max |F|, Cg = min Gamma on K_delta, the y-integral at
    fixed x is at most pi V_{d-1} delta^(d-1) / (Cg nu |x|) and the |x|
    integral closes with the sphere-area factor.  Returns the bound together
    with a Monte Carlo estimate of the integral, and raises BoundViolated if
    the estimate significantly exceeds the bound.
    """
    _check_nu(nu)
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must be in (0, 1]")
    d = spec.d
    rng = substream(seed, 7)

    probe = _product_ball_points(rng, d, delta, 4096)
    c1 = 1.1 * float(np.max(np.abs(spec.F(probe))))
    cg = 0.9 * float(np.min(spec.Gamma(probe)))
    if cg <= 0:
        raise BoundViolated("Gamma probe not strictly positive on K_delta")
    dim_const = math.pi * ball_volume(d - 1) * sphere_area(d) / (d - 1)
    bound = c1 * dim_const * delta ** (2 * d - 2) / (cg * nu)

    vol = (ball_volume(d) * delta ** d) ** 2
    total = total_sq = 0.0
    done = 0
    while done < budget:
        m = min(1 << 19, budget - done)
        done += m
        z = _product_ball_points(rng, d, delta, m)
        vals = np.abs(spec.F(z)) / (omega(z) ** 2 + (nu * spec.Gamma(z)) ** 2)
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals ** 2))
    mean, se = mean_and_se(total, total_sq, budget)
    est = IntegralEstimate(vol * mean, vol * se, budget,
                           (StratumEstimate("K_delta", vol * mean, vol * se, budget),))
    if est.value - 3.0 * est.std_error > bound:
        raise BoundViolated(
            f"empirical {est.value:.6g} exceeds analytic bound {bound:.6g}")
    return bound, est


def _product_ball_points(rng, d, delta, m):
    out = np.empty((m, 2 * d))
    for half in range(2):
        g = rng.standard_normal((m, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = delta * rng.random(m) ** (1.0 / d)
        out[:, half * d:(half + 1) * d] = g * r[:, None]
    return out


# -- fiber diagnostics ------------------------------------------------------------

@dataclass(frozen=True)
class FiberDiagnostics:
    """One-dimensional cross-section of the divisor at a fixed base point.

    J_nu is the theta-integral of F mu / (t^4 theta^2 + (nu Gamma)^2) over
    the tube section; J_0m freezes the integrand at theta = 0 (closed form
    via arctan); J_leading = pi / (nu t^2) * (F/Gamma) at theta = 0 is the
    fiber's contribution to the leading asymptotic term.
    """

    eta: np.ndarray
    t: float
    epsilon: float
    theta_bar_0: float
    J_nu: float
    J_0m: float
    J_leading: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def fiber_integral(spec: ProblemSpec, nu: float, eta: np.ndarray, t: float,
                   theta0: float = 0.1, rel_tol: float = 1e-8) -> FiberDiagnostics:
    """Adaptive quadrature of the fiber integral plus its two companions."""
    _check_nu(nu)
    if t <= 0:
        raise ValueError("t must be positive")
    d = spec.d
    eta = np.asarray(eta, dtype=float)
    base = t * eta
    gamma0 = float(spec.Gamma(base))
    f0 = float(spec.F(base))
    eps = nu * gamma0 / t ** 2

    def integrand(theta):
        z = pi_map(np.broadcast_to(base, (len(theta), 2 * d)).copy(), theta)
        mu = tube_volume_factor(d, theta)
        return spec.F(z) * mu / (t ** 4 * theta ** 2 + (nu * spec.Gamma(z)) ** 2)

    edges = geometric_peak_edges(scale=eps, outer=theta0)
    j_nu = refine_to_tolerance(integrand, edges, rel_tol=rel_tol)

    theta_bar = theta0
    j_0m = 2.0 * t ** -4 * f0 / eps * math.atan(theta_bar / eps)
    j_leading = math.pi / (nu * t ** 2) * f0 / gamma0
    return FiberDiagnostics(eta=eta, t=t, epsilon=eps, theta_bar_0=theta_bar,
                            J_nu=j_nu, J_0m=j_0m, J_leading=j_leading)
