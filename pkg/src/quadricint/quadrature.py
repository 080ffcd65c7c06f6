"""Deterministic panel quadrature shared across the package.

Everything here is composite Gauss-Legendre on explicit panel edges.  Peaked
integrands (Lorentzian fibers, level-set spikes) get geometric panels that
cluster toward the peak; smooth radial profiles get log-spaced panels with a
doubling tail-extension rule.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import NonIntegrableProfile, QuadratureNonConvergent


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def panel_nodes(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights for the panels defined by edges."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    a = edges[:-1][:, None]
    b = edges[1:][:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def integrate_panels(fn: Callable[[np.ndarray], np.ndarray], edges: np.ndarray,
                     order: int = 16) -> float:
    nodes, weights = panel_nodes(edges, order)
    return float(np.dot(weights, fn(nodes)))


def split_edges(edges: np.ndarray) -> np.ndarray:
    """Halve every panel."""
    mid = 0.5 * (edges[:-1] + edges[1:])
    out = np.empty(2 * len(edges) - 1)
    out[0::2] = edges
    out[1::2] = mid
    return out


def refine_to_tolerance(fn: Callable[[np.ndarray], np.ndarray], edges: np.ndarray,
                        rel_tol: float = 1e-8, order: int = 16,
                        max_doublings: int = 12) -> float:
    """Split all panels until the value changes by less than rel_tol."""
    value = integrate_panels(fn, edges, order)
    for _ in range(max_doublings):
        edges = split_edges(edges)
        new = integrate_panels(fn, edges, order)
        scale = max(abs(new), abs(value), 1e-300)
        done = abs(new - value) <= rel_tol * scale
        value = new
        if done:
            return value
    raise QuadratureNonConvergent(
        f"no convergence to rel_tol={rel_tol} after {max_doublings} doublings")


def geometric_peak_edges(scale: float, outer: float, min_fraction: float = 0.125,
                         ratio: float = 2.0) -> np.ndarray:
    """Symmetric edges on (-outer, outer) clustered geometrically at 0.

    The innermost panel has half-width <= scale * min_fraction, so a peak of
    width `scale` at the origin is always resolved.
    """
    if outer <= 0:
        raise ValueError("outer must be positive")
    inner = min(scale * min_fraction, outer / 4)
    inner = max(inner, outer * 1e-14)
    pos = [inner]
    while pos[-1] < outer:
        pos.append(min(pos[-1] * ratio, outer))
    pos = np.array(pos)
    return np.concatenate([-pos[::-1], [0.0], pos])


def log_edges(lo: float, hi: float, panels: int) -> np.ndarray:
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    return np.exp(np.linspace(np.log(lo), np.log(hi), panels + 1))


def extend_tail(profile: Callable[[np.ndarray], np.ndarray], lo: float, hi0: float,
                rel_tol: float = 1e-12, hi_cap: float = 1e12,
                panels_per_decade: int = 8) -> float:
    """Grow the upper limit until the next octave adds < rel_tol of the total.

    profile must be a nonnegative radial mass density; raises
    NonIntegrableProfile if the cap is reached or the octave sums grow.
    """
    hi = max(hi0, 2 * lo)
    total = _log_integral(profile, lo, hi, panels_per_decade)
    prev_inc = np.inf
    while hi < hi_cap:
        inc = _log_integral(profile, hi, 2 * hi, panels_per_decade)
        if inc <= rel_tol * max(total, 1e-300):
            return 2 * hi
        if inc > prev_inc * 1.5 and inc > total:
            raise NonIntegrableProfile("radial profile grows between octaves")
        total += inc
        prev_inc = inc
        hi *= 2
    raise NonIntegrableProfile(f"radial tail still significant at r={hi_cap:g}")


def _log_integral(profile, lo, hi, panels_per_decade):
    n = max(4, int(np.ceil(np.log10(hi / lo) * panels_per_decade)))
    return integrate_panels(profile, log_edges(lo, hi, n), order=8)
