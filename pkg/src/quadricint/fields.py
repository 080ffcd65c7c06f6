"""Integrand catalog: decaying numerators F and positive weights Gamma.

A field is a vectorized callable on R^dim together with machine-checkable
metadata: a decay (or growth) exponent and a constant K such that

    |F(z)|     <= K <z>^(-decay_M)          (scalar fields)
    K^-1 <z>^r <= Gamma(z) <= K <z>^r       (weight fields, r = growth_r_star)

with <z> = sqrt(1 + |z|^2).  The constants K are fitted by sampling with a
10% margin; the asymptotic machinery only ever needs their existence.

For the main integrals the ambient dimension is even, dim = 2d, and a point
is stored as the concatenation z = (x, y) with x, y in R^d.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import BadParams, ConditionHrViolated, FieldUnbounded, UnknownField
from .util import as_batch

Vectorized = Callable[[np.ndarray], np.ndarray]


def bracket(z: np.ndarray) -> np.ndarray:
    """<z> = sqrt(1 + |z|^2), the Japanese bracket."""
    z = np.asarray(z, dtype=float)
    return np.sqrt(1.0 + np.sum(z * z, axis=-1))


@dataclass(frozen=True)
class ScalarField:
    """C^2 numerator with polynomial decay metadata."""

    fn: Vectorized
    dim: int
    decay_M: float
    bound_K: float
    grad: Vectorized | None = None
    support_radius: float | None = None
    name: str = "custom"

    def __call__(self, z: np.ndarray) -> np.ndarray:
        zb, single = as_batch(z, self.dim)
        out = np.asarray(self.fn(zb), dtype=float)
        return out[0] if single else out

    def gradient(self, z: np.ndarray) -> np.ndarray:
        zb, single = as_batch(z, self.dim)
        g = self.grad(zb) if self.grad is not None else fd_gradient(self.fn, zb)
        g = np.asarray(g, dtype=float)
        return g[0] if single else g

    def scaled(self, c: float) -> "ScalarField":
        """c * F with metadata adjusted accordingly."""
        fn = self.fn
        gr = self.grad
        return replace(
            self,
            fn=lambda zz: c * fn(zz),
            grad=(None if gr is None else (lambda zz: c * gr(zz))),
            bound_K=abs(c) * self.bound_K,
            name=f"{c}*{self.name}",
        )


@dataclass(frozen=True)
class WeightField:
    """Strictly positive C^2 weight with two-sided growth metadata."""

    fn: Vectorized
    dim: int
    growth_r_star: float
    bound_K: float
    grad: Vectorized | None = None
    name: str = "custom"

    def __call__(self, z: np.ndarray) -> np.ndarray:
        zb, single = as_batch(z, self.dim)
        out = np.asarray(self.fn(zb), dtype=float)
        return out[0] if single else out

    def gradient(self, z: np.ndarray) -> np.ndarray:
        zb, single = as_batch(z, self.dim)
        g = self.grad(zb) if self.grad is not None else fd_gradient(self.fn, zb)
        g = np.asarray(g, dtype=float)
        return g[0] if single else g


@dataclass(frozen=True)
class ProblemSpec:
    """An integrand pair (F, Gamma) on R^{2d}."""

    F: ScalarField
    Gamma: WeightField
    d: int

    def __post_init__(self):
        if self.F.dim != 2 * self.d or self.Gamma.dim != 2 * self.d:
            raise BadParams(
                f"fields have dim {self.F.dim}/{self.Gamma.dim}, expected {2 * self.d}")


def fd_gradient(fn: Vectorized, z: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    """Central differences with scale-aware step rel_step * <z>."""
    z = np.asarray(z, dtype=float)
    h = rel_step * bracket(z)
    out = np.empty_like(z)
    for j in range(z.shape[1]):
        zp = z.copy()
        zm = z.copy()
        zp[:, j] += h
        zm[:, j] -= h
        out[:, j] = (fn(zp) - fn(zm)) / (2.0 * h)
    return out


# -- validation ---------------------------------------------------------------

@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    detail: str
    witness: np.ndarray | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[ConditionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[ConditionCheck]:
        return [c for c in self.checks if not c.passed]


def _shell_points(dim: int, n_per_shell: int, seed: int) -> np.ndarray:
    """Probe points in the bracket shells <z> in [2^j, 2^(j+1)], j = 0..10."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(97,)))
    chunks = []
    for j in range(11):
        u = rng.standard_normal((n_per_shell, dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        c = rng.uniform(2.0 ** j, 2.0 ** (j + 1), size=n_per_shell)
        r = np.sqrt(np.maximum(c * c - 1.0, 0.0))
        chunks.append(u * r[:, None])
    return np.vstack(chunks)


def validate(spec: ProblemSpec, n_probe: int = 512, seed: int = 0,
             raise_on_fail: bool = True) -> ValidationReport:
    """Check the declared bounds and exponent inequalities by sampling.

    Exponent checks: decay_M + growth_r_star > 2d - 2 and decay_M > 2d - 4,
    with K > 1 on both fields.  Bound checks sample the dyadic bracket shells
    and report the first violating point.
    """
    d = spec.d
    checks: list[ConditionCheck] = []

    hr_ok = (spec.F.decay_M + spec.Gamma.growth_r_star > 2 * d - 2
             and spec.F.decay_M > 2 * d - 4)
    checks.append(ConditionCheck(
        "exponents", hr_ok,
        f"M={spec.F.decay_M}, r*={spec.Gamma.growth_r_star}, d={d}: "
        f"need M+r* > {2 * d - 2} and M > {2 * d - 4}"))
    k_ok = spec.F.bound_K > 1 and spec.Gamma.bound_K > 1
    checks.append(ConditionCheck("bound_K", k_ok, "both K must exceed 1"))

    pts = _shell_points(2 * d, n_probe, seed)
    br = bracket(pts)

    fv = spec.F(pts)
    f_ok = np.isfinite(fv) & (np.abs(fv) <= spec.F.bound_K * br ** (-spec.F.decay_M) * (1 + 1e-12))
    checks.append(_bound_check("F_decay", f_ok, pts))

    gv = spec.Gamma(pts)
    r = spec.Gamma.growth_r_star
    g_lo = gv >= spec.Gamma.bound_K ** -1 * br ** r * (1 - 1e-12)
    g_hi = np.abs(gv) <= spec.Gamma.bound_K * br ** r * (1 + 1e-12)
    checks.append(_bound_check("Gamma_lower", g_lo & np.isfinite(gv), pts))
    checks.append(_bound_check("Gamma_upper", g_hi, pts))

    report = ValidationReport(tuple(checks))
    if raise_on_fail and not report.passed:
        bad = report.failed()[0]
        if bad.name == "exponents":
            raise ConditionHrViolated(bad.detail)
        raise FieldUnbounded(f"{bad.name}: first violation at z={bad.witness}")
    return report


def _bound_check(name: str, ok: np.ndarray, pts: np.ndarray) -> ConditionCheck:
    if bool(np.all(ok)):
        return ConditionCheck(name, True, "holds on all probes")
    i = int(np.argmin(ok))
    return ConditionCheck(name, False, "violated", witness=pts[i].copy())


# -- catalog ------------------------------------------------------------------

def _fit_radial_K(ratio_profile: Callable[[np.ndarray], np.ndarray],
                  r_max: float = 2e3) -> float:
    """1.1 * sup of a radial ratio profile, floored just above 1."""
    r = np.concatenate([np.linspace(0.0, 4.0, 2001),
                        np.geomspace(4.0, r_max, 2000)])
    vals = ratio_profile(r)
    k = 1.1 * float(np.max(vals))
    return max(k, 1.0 + 1e-9)


def _resolve_dim(params: dict) -> int:
    if "dim" in params:
        return int(params["dim"])
    if "d" in params:
        return 2 * int(params["d"])
    raise BadParams("catalog field needs 'd' (half-dimension) or 'dim'")


def _gaussian(params: dict) -> ScalarField:
    dim = _resolve_dim(params)
    # default exponent clears the admissibility inequalities in any dimension
    m = float(params.get("decay_M", dim + 2))
    k = _fit_radial_K(lambda r: np.exp(-r * r) * (1 + r * r) ** (m / 2))

    def fn(z):
        return np.exp(-np.sum(z * z, axis=-1))

    def grad(z):
        return -2.0 * z * fn(z)[..., None]

    return ScalarField(fn, dim, decay_M=m, bound_K=k, grad=grad, name="gaussian")


def _poly_decay(params: dict) -> ScalarField:
    dim = _resolve_dim(params)
    try:
        m = float(params["m"])
    except KeyError as exc:
        raise BadParams("poly_decay needs exponent 'm'") from exc
    if m <= 0:
        raise BadParams("poly_decay exponent must be positive")

    def fn(z):
        return (1.0 + np.sum(z * z, axis=-1)) ** (-m / 2)

    def grad(z):
        return -m * z * (1.0 + np.sum(z * z, axis=-1))[..., None] ** (-m / 2 - 1)

    return ScalarField(fn, dim, decay_M=m, bound_K=1.0 + 1e-9, grad=grad,
                       name=f"poly_decay({m})")


def _bump_profile(u: np.ndarray) -> np.ndarray:
    """C^2 bump (1 - u^2)^3 on |u| < 1, zero outside."""
    inside = np.abs(u) < 1.0
    w = np.zeros_like(u)
    w[inside] = (1.0 - u[inside] ** 2) ** 3
    return w


def _bump_profile_deriv(u: np.ndarray) -> np.ndarray:
    inside = np.abs(u) < 1.0
    w = np.zeros_like(u)
    w[inside] = -6.0 * u[inside] * (1.0 - u[inside] ** 2) ** 2
    return w


def _bump_annulus(params: dict) -> ScalarField:
    dim = _resolve_dim(params)
    try:
        r1 = float(params["r1"])
        r2 = float(params["r2"])
    except KeyError as exc:
        raise BadParams("bump_annulus needs radii 'r1' and 'r2'") from exc
    if not (0 <= r1 < r2):
        raise BadParams("bump_annulus needs 0 <= r1 < r2")
    mid = 0.5 * (r1 + r2)
    half = 0.5 * (r2 - r1)
    m = float(params.get("decay_M", 10.0))

    def fn(z):
        r = np.linalg.norm(z, axis=-1)
        return _bump_profile((r - mid) / half)

    def grad(z):
        r = np.linalg.norm(z, axis=-1)
        dw = _bump_profile_deriv((r - mid) / half) / half
        safe = np.where(r > 0, r, 1.0)
        return z * (dw / safe)[..., None]

    k = _fit_radial_K(lambda r: _bump_profile((r - mid) / half) * (1 + r * r) ** (m / 2),
                      r_max=max(2 * r2, 10.0))
    return ScalarField(fn, dim, decay_M=m, bound_K=k, grad=grad,
                       support_radius=r2, name=f"bump_annulus({r1},{r2})")


def _const(params: dict) -> WeightField:
    dim = _resolve_dim(params)
    c = float(params.get("c", 1.0))
    if c <= 0:
        raise BadParams("const weight must be positive")
    k = max(c, 1.0 / c) * (1.0 + 1e-9)

    def fn(z):
        return np.full(z.shape[:-1], c)

    def grad(z):
        return np.zeros_like(z)

    return WeightField(fn, dim, growth_r_star=0.0, bound_K=k, grad=grad,
                       name=f"const({c})")


def _poly_growth(params: dict) -> WeightField:
    dim = _resolve_dim(params)
    try:
        r = float(params["r"])
    except KeyError as exc:
        raise BadParams("poly_growth needs exponent 'r'") from exc

    def fn(z):
        return (1.0 + np.sum(z * z, axis=-1)) ** (r / 2)

    def grad(z):
        return r * z * (1.0 + np.sum(z * z, axis=-1))[..., None] ** (r / 2 - 1)

    return WeightField(fn, dim, growth_r_star=r, bound_K=1.0 + 1e-6, grad=grad,
                       name=f"poly_growth({r})")


_CATALOG: dict[str, Callable[[dict], ScalarField | WeightField]] = {
    "gaussian": _gaussian,
    "poly_decay": _poly_decay,
    "bump_annulus": _bump_annulus,
    "const": _const,
    "poly_growth": _poly_growth,
}


def catalog_lookup(name: str, params: dict) -> ScalarField | WeightField:
    """Build a catalog field with fitted metadata attached."""
    try:
        builder = _CATALOG[name]
    except KeyError as exc:
        raise UnknownField(f"unknown catalog field {name!r}; "
                           f"known: {sorted(_CATALOG)}") from exc
    return builder(dict(params))


def quasi_random_points(dim: int, n: int, r_max: float, seed: int = 0) -> np.ndarray:
    """Sobol points mapped to the ball of radius r_max (for bound audits)."""
    eng = qmc.Sobol(d=dim + 1, scramble=True, seed=seed)
    u = eng.random(n)
    dirs = _ball_directions(u[:, :dim])
    radii = r_max * u[:, dim] ** (1.0 / dim)
    return dirs * radii[:, None]


def _ball_directions(u: np.ndarray) -> np.ndarray:
    # inverse-CDF normal map keeps the Sobol low-discrepancy structure
    from scipy.special import ndtri
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    nrm[nrm == 0] = 1.0
    return g / nrm
