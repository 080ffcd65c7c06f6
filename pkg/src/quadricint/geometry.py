"""Exact geometry of the quadric S = {x.y = 0} in R^{2d}.

Points are stored as z = (x, y) in R^{2d} with the quadratic form
omega(z) = x.y.  Away from the origin the zero set S* is a smooth
hypersurface with normal N(x, y) = (y, x), and a tube around it is charted
by normal coordinates

    pi(xi, theta) = (x + theta*y, y + theta*x),          xi = (x, y) in S*,

with the identities |pi| = |xi|*sqrt(1+theta^2) and omega(pi) = |xi|^2*theta.

The chart inverts in closed form.  Writing a = x+y, b = x-y, a point of the
tube satisfies |a| = (1+theta)|xi| and |b| = (1-theta)|xi|, so

    theta = (|a| - |b|) / (|a| + |b|),    |xi| = (|a| + |b|) / 2,

which is exact, branch-free and valid for every |theta| < 1; the chart only
degenerates on the axes a = 0 or b = 0 (x = -y or x = y).

Scaling by t > 0 acts as (eta, t, theta) -> (eta, r t, theta) on the
coordinates (eta, t, theta), eta in S^1 = S* on the unit sphere, and the
ambient volume element factorizes as

    dz = t^(2d-1) mu(eta, theta) m(d eta) dt dtheta,     mu(eta, 0) = 1,

with mu independent of t.  mu is computed numerically from the Gram
determinant of the chart differential; the hot paths use the closed form
mu = (1 - theta^2)^(d-1), which the Gram computation validates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats
from scipy.special import gamma as gamma_fn

from .errors import (DegeneratePoint, FrameConstructionFailed, OutsideTube,
                     SlabTooWide)
from .estimates import IntegralEstimate, StratumEstimate
from .quadrature import extend_tail, log_edges, panel_nodes
from .util import as_batch, substream

_SIGMA1_CHUNK = 1 << 20  # fixed proposal chunk; determinism across workers


def split_xy(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = z.shape[-1] // 2
    return z[..., :d], z[..., d:]


def omega(z: np.ndarray) -> np.ndarray | float:
    """The quadratic form x.y."""
    z = np.asarray(z, dtype=float)
    x, y = split_xy(z)
    out = np.sum(x * y, axis=-1)
    return float(out) if out.ndim == 0 else out


def swap_xy(z: np.ndarray) -> np.ndarray:
    """The normal direction map (x, y) -> (y, x)."""
    x, y = split_xy(z)
    return np.concatenate([y, x], axis=-1)


def pi_map(xi: np.ndarray, theta) -> np.ndarray:
    """Normal-coordinate chart xi + theta * (y, x)."""
    xi = np.asarray(xi, dtype=float)
    th = np.asarray(theta, dtype=float)[..., None]
    return xi + th * swap_xy(xi)


def _invert_pi_arrays(z: np.ndarray):
    """Vectorized inversion; returns (xi, theta, ok) without raising."""
    x, y = split_xy(z)
    a = x + y
    b = x - y
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    scale = np.linalg.norm(z, axis=-1)
    ok = (na > 1e-14 * scale) & (nb > 1e-14 * scale) & (scale > 0)
    na_s = np.where(ok, na, 1.0)
    nb_s = np.where(ok, nb, 1.0)
    theta = (na - nb) / (na_s + nb_s)
    # x_xi + y_xi = a/(1+theta), x_xi - y_xi = b/(1-theta)
    u = a / (1.0 + theta)[..., None]
    v = b / (1.0 - theta)[..., None]
    xi = np.concatenate([(u + v) / 2.0, (u - v) / 2.0], axis=-1)
    return xi, theta, ok


def invert_pi(z: np.ndarray) -> tuple[np.ndarray, np.ndarray | float]:
    """Invert the normal chart; raises DegeneratePoint on the axes x = +/-y."""
    zb, single = as_batch(np.asarray(z, dtype=float), np.asarray(z).shape[-1])
    xi, theta, ok = _invert_pi_arrays(zb)
    if not np.all(ok):
        i = int(np.argmin(ok))
        raise DegeneratePoint(f"x+y or x-y vanishes at z={zb[i]}")
    if single:
        return xi[0], float(theta[0])
    return xi, theta


@dataclass(frozen=True)
class TubeCoords:
    """Point of the tube in (eta, t, theta) coordinates."""

    eta: np.ndarray
    t: float
    theta: float
    theta0: float

    def __post_init__(self):
        if not abs(self.theta) < self.theta0:
            raise OutsideTube(f"|theta|={abs(self.theta):.3g} >= theta0={self.theta0}")


def to_tube_coords(z: np.ndarray, theta0: float = 0.1) -> TubeCoords:
    xi, theta = invert_pi(z)
    t = float(np.linalg.norm(xi))
    return TubeCoords(eta=xi / t, t=t, theta=float(theta), theta0=theta0)


def dist_to_quadric(z: np.ndarray, theta0_star: float = 0.1) -> float:
    """Distance |xi|*|theta| to S, certified for |theta| < theta0_star."""
    xi, theta = invert_pi(z)
    if abs(theta) >= theta0_star:
        raise OutsideTube(
            f"|theta|={abs(theta):.3g} >= theta0*={theta0_star}; "
            "normal-coordinate distance not certified here")
    return float(np.linalg.norm(xi) * abs(theta))


# -- tube density --------------------------------------------------------------

@dataclass(frozen=True)
class JacobianSample:
    mu: float
    gram_det_sqrt: float

    def __post_init__(self):
        if not self.mu > 0:
            raise FrameConstructionFailed(f"nonpositive density mu={self.mu}")


def tangent_frame_sigma1(eta: np.ndarray) -> np.ndarray:
    """Orthonormal frame of T_eta S^1, the complement of span{eta, swap(eta)}."""
    eta = np.asarray(eta, dtype=float)
    n = eta.shape[0]
    seta = swap_xy(eta)
    cols = np.concatenate([eta[:, None], seta[:, None], np.eye(n)], axis=1)
    q, r = np.linalg.qr(cols)
    if abs(r[0, 0]) < 1e-10 or abs(r[1, 1]) < 1e-10:
        raise FrameConstructionFailed("eta and swap(eta) do not span a 2-plane")
    return q[:, 2:n].T.copy()


def tube_volume_factor(d: int, theta) -> np.ndarray | float:
    """Closed form of the tube density: mu = (1 - theta^2)^(d-1)."""
    th = np.asarray(theta, dtype=float)
    out = (1.0 - th * th) ** (d - 1)
    return float(out) if out.ndim == 0 else out


def _project_sigma1(w: np.ndarray) -> np.ndarray:
    """Retract an ambient point near S^1 back onto S^1."""
    xi, _, ok = _invert_pi_arrays(w)
    if not np.all(ok):
        raise FrameConstructionFailed("retraction hit the degenerate axes")
    return xi / np.linalg.norm(xi, axis=-1, keepdims=True)


def mu_density(eta: np.ndarray, theta: float, t: float = 1.0,
               fd_step: float = 1e-5) -> JacobianSample:
    """Tube density mu(eta, theta) from the numeric Gram determinant.

    Differentiates the chart (eta, t, theta) -> pi(t*eta, theta) by central
    differences (tangent directions move along S^1 via the closed-form
    retraction) and divides the volume of the spanned parallelepiped by
    t^(2d-1).  Lemma-level facts checked in the tests: mu(eta, 0) = 1 and
    mu does not depend on t.
    """
    eta = np.asarray(eta, dtype=float)
    n = eta.shape[0]
    d = n // 2
    frame = tangent_frame_sigma1(eta)

    cols = []
    for e in frame:
        wp = _project_sigma1((eta + fd_step * e)[None, :])[0]
        wm = _project_sigma1((eta - fd_step * e)[None, :])[0]
        cols.append((pi_map(t * wp, theta) - pi_map(t * wm, theta)) / (2 * fd_step))
    ht = fd_step * max(t, 1.0)
    cols.append((pi_map((t + ht) * eta, theta) - pi_map((t - ht) * eta, theta)) / (2 * ht))
    cols.append((pi_map(t * eta, theta + fd_step) - pi_map(t * eta, theta - fd_step))
                / (2 * fd_step))
    mat = np.stack(cols, axis=1)
    sign, logdet = np.linalg.slogdet(mat)
    if sign == 0:
        raise FrameConstructionFailed("chart differential is singular")
    gram_sqrt = math.exp(logdet)
    return JacobianSample(mu=gram_sqrt / t ** (2 * d - 1), gram_det_sqrt=gram_sqrt)


# -- measure of S^1 and sampling ------------------------------------------------

def sphere_area(m: int) -> float:
    """Surface area of the unit sphere S^{m-1} in R^m."""
    return 2.0 * math.pi ** (m / 2) / gamma_fn(m / 2)


def ball_volume(m: int) -> float:
    return math.pi ** (m / 2) / gamma_fn(m / 2 + 1)


def sigma1_acceptance(d: int, eps_slab: float) -> float:
    """P(|omega(Z)| < eps) for Z uniform on S^{2d-1}.

    On the unit sphere omega + 1/2 follows Beta(d/2, d/2), which also gives
    the exact slab acceptance probability used to size the proposal block.
    """
    b = stats.beta(d / 2.0, d / 2.0)
    return float(b.cdf(0.5 + eps_slab) - b.cdf(0.5 - eps_slab))


@dataclass(frozen=True)
class Sigma1Sample:
    """Weighted points on S^1 = {x.y = 0, |z| = 1}.

    sum(weights * g(eta)) estimates the surface integral of g over S^1
    (unbiased up to an O(eps_slab^2) slab bias).
    """

    eta: np.ndarray        # (m, 2d), exactly on the quadric and unit sphere
    weights: np.ndarray    # (m,), all equal to area / (2 eps n_proposals)
    n_proposals: int
    eps_slab: float
    d: int

    def integrate(self, gvals: np.ndarray) -> tuple[float, float]:
        """Weighted-sum estimate of integral(g dm) with its standard error."""
        c = sphere_area(2 * self.d) / (2.0 * self.eps_slab)
        n = self.n_proposals
        s1 = float(np.sum(gvals))
        s2 = float(np.sum(gvals ** 2))
        mean = c * s1 / n
        var = max(0.0, c * c * s2 / n - mean * mean)
        se = math.sqrt(var / max(n - 1, 1))
        return mean, se


def sample_sigma1(d: int, n: int, seed: int = 0, eps_slab: float = 1e-3,
                  theta0: float = 0.1, key: tuple[int, ...] = ()) -> Sigma1Sample:
    """Rejection-sample S^1 through a thin slab of the unit sphere.

    Uniform sphere points with |omega| < eps_slab are projected onto the
    quadric by the closed-form chart and renormalized.  The per-proposal
    weight area/(2 eps) is exact to first order because |grad_S omega| = 1
    on S^1.  Returns at least n points.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if eps_slab > theta0 / 4:
        raise SlabTooWide(f"eps_slab={eps_slab} exceeds theta0/4={theta0 / 4}")
    p = sigma1_acceptance(d, eps_slab)
    n_chunks = max(1, math.ceil(n / (p * _SIGMA1_CHUNK) * 1.25))
    accepted: list[np.ndarray] = []
    total = 0
    chunk_idx = 0
    while True:
        for _ in range(n_chunks):
            rng = substream(seed, *key, 11, chunk_idx)
            chunk_idx += 1
            g = rng.standard_normal((_SIGMA1_CHUNK, 2 * d))
            z = g / np.linalg.norm(g, axis=1, keepdims=True)
            mask = np.abs(omega(z)) < eps_slab
            if np.any(mask):
                xi, _, _ = _invert_pi_arrays(z[mask])
                accepted.append(xi / np.linalg.norm(xi, axis=1, keepdims=True))
        total = chunk_idx * _SIGMA1_CHUNK
        m = sum(len(a) for a in accepted)
        if m >= n:
            break
        n_chunks = max(1, math.ceil((n - m) / (p * _SIGMA1_CHUNK) * 1.5))
    eta = np.vstack(accepted)
    w = sphere_area(2 * d) / (2.0 * eps_slab * total)
    return Sigma1Sample(eta=eta, weights=np.full(len(eta), w),
                        n_proposals=total, eps_slab=eps_slab, d=d)


# -- surface integrals over S* ---------------------------------------------------

def radial_cutoff(profile: Callable[[np.ndarray], np.ndarray], t_min: float = 1e-6,
                  hi0: float = 4.0, rel_tol: float = 1e-12) -> float:
    """Upper radius where the remaining tail is < rel_tol of the total."""
    return extend_tail(profile, t_min, hi0, rel_tol=rel_tol)


def _charts_radial_grid(g, d, probe_eta, t_min):
    def profile(t):
        vals = np.zeros_like(t)
        for eta in probe_eta:
            vals = np.maximum(vals, np.abs(g(t[:, None] * eta[None, :])))
        return t ** (2 * d - 2) * vals

    t_max = radial_cutoff(profile, t_min=t_min)
    n_panels = max(8, int(np.ceil(np.log10(t_max / t_min) * 8)))
    nodes, weights = panel_nodes(log_edges(t_min, t_max, n_panels), order=12)
    return nodes, weights * nodes ** (2 * d - 2), t_max


def surface_integral(g: Callable[[np.ndarray], np.ndarray], d: int,
                     method: str = "charts", budget: int = 10**6, seed: int = 0,
                     eps_slab: float = 1e-3, theta0: float = 0.1,
                     t_min: float = 1e-6, eps_ambient: float = 5e-3,
                     r_lo: float = 1e-6) -> IntegralEstimate:
    """Integrate g over S* against the induced surface volume.

    charts:    angular Monte Carlo on S^1 times a deterministic log-radial
               Gauss grid of integral( t^(2d-2) g(t eta) dt ).
    thin_slab: coarea limit (1/2 eps) integral( g |z| ) over {|omega| < eps},
               importance-sampled exactly on the slab at eps and eps/2 with
               linear extrapolation in eps.
    """
    if method == "charts":
        return _surface_charts(g, d, budget, seed, eps_slab, theta0, t_min)
    if method == "thin_slab":
        return _surface_thin_slab(g, d, budget, seed, eps_ambient, r_lo)
    raise ValueError(f"unknown method {method!r}")


def _surface_charts(g, d, budget, seed, eps_slab, theta0, t_min):
    probe = sample_sigma1(d, 32, seed=seed, eps_slab=1e-2, theta0=theta0,
                          key=(21,)).eta[:32]
    nodes, wts, _ = _charts_radial_grid(g, d, probe, t_min)
    n_nodes = len(nodes)
    n_eta = max(64, int(budget) // n_nodes)
    sample = sample_sigma1(d, n_eta, seed=seed, eps_slab=eps_slab, theta0=theta0,
                           key=(22,))

    radial = np.empty(len(sample.eta))
    block = max(1, (1 << 22) // n_nodes)
    for lo in range(0, len(sample.eta), block):
        etas = sample.eta[lo:lo + block]
        pts = nodes[None, :, None] * etas[:, None, :]
        vals = g(pts.reshape(-1, 2 * d)).reshape(len(etas), n_nodes)
        radial[lo:lo + block] = vals @ wts

    value, se = sample.integrate(radial)
    n = len(sample.eta) * n_nodes
    return IntegralEstimate(value, se, n,
                            (StratumEstimate("charts", value, se, n),))


def _surface_thin_slab(g, d, budget, seed, eps_ambient, r_lo):
    probe = sample_sigma1(d, 32, seed=seed, eps_slab=1e-2, key=(23,)).eta[:32]

    def profile(t):
        vals = np.zeros_like(t)
        for eta in probe:
            vals = np.maximum(vals, np.abs(g(t[:, None] * eta[None, :])) * t)
        return t ** (2 * d - 2) * vals

    r_hi = radial_cutoff(profile, t_min=max(r_lo, 1e-6))
    half = max(1, int(budget) // 2)
    est = []
    for k, eps in enumerate((eps_ambient, eps_ambient / 2)):
        v, se = _slab_level(g, d, eps, half, substream(seed, 31, k), r_lo, r_hi)
        est.append((v, se))
    (v1, s1), (v2, s2) = est
    value = 2.0 * v2 - v1
    se = math.sqrt(4.0 * s2 * s2 + s1 * s1)
    return IntegralEstimate(value, se, 2 * half,
                            (StratumEstimate(f"slab_eps={eps_ambient}", v1, s1, half),
                             StratumEstimate(f"slab_eps={eps_ambient / 2}", v2, s2, half)))


def _slab_level(g, d, eps, n, rng, r_lo, r_hi):
    """One thin-slab estimate (1/2 eps) integral over {|omega| < eps} of g |z|.

    Samples (R, omega, directions) exactly on the slab: with a = x+y,
    b = x-y one has |a|^2 = R^2 + 2 omega, |b|^2 = R^2 - 2 omega and
    dz = 2^(1-d) R rho_a^(d-2) rho_b^(d-2) dR domega dS(u_a) dS(u_b).
    """
    log_l = math.log(r_hi / r_lo)
    area1 = sphere_area(d)
    total = 0.0
    total_sq = 0.0
    block = 1 << 19
    done = 0
    while done < n:
        m = min(block, n - done)
        done += m
        r = r_lo * np.exp(log_l * rng.random(m))
        q_r = 1.0 / (r * log_l)
        eps_eff = np.minimum(eps, 0.4999995 * r * r)
        om = eps_eff * (2.0 * rng.random(m) - 1.0)
        rho_a = np.sqrt(r * r + 2.0 * om)
        rho_b = np.sqrt(r * r - 2.0 * om)
        ua = rng.standard_normal((m, d))
        ua /= np.linalg.norm(ua, axis=1, keepdims=True)
        ub = rng.standard_normal((m, d))
        ub /= np.linalg.norm(ub, axis=1, keepdims=True)
        a = rho_a[:, None] * ua
        b = rho_b[:, None] * ub
        z = np.concatenate([(a + b) / 2.0, (a - b) / 2.0], axis=1)
        jac = 2.0 ** (1 - d) * r * rho_a ** (d - 2) * rho_b ** (d - 2)
        w = g(z) * r * jac * (2.0 * eps_eff) * area1 ** 2 / q_r
        total += float(np.sum(w))
        total_sq += float(np.sum(w * w))
    mean = total / n
    var = max(0.0, total_sq / n - mean * mean)
    se = math.sqrt(var / max(n - 1, 1))
    return mean / (2.0 * eps), se / (2.0 * eps)
