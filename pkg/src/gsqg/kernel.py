"""Fractional Green function, Biot-Savart kernel and its regularizations.

The stream function of the generalized SQG model solves
``(-Delta)^{m/2} psi = theta`` on the plane, with Green function

    G_m(x) = C_m |x|^{m-2},   C_m = Gamma((2-m)/2) / (2^{m/2} pi Gamma(m/2)),

and the velocity is ``u = k_m * theta`` with ``k_m = grad^perp G_m``,
``grad^perp = (-d/dx2, d/dx1)``.  Every kernel used here is of the form

    k(x) = kappa(|x|) * (-x2, x1) / |x|,

so it is fully described by the radial profile ``kappa``.  For the singular
kernel ``kappa(r) = C_m (m-2) r^{m-3}`` (negative: positive vortices turn
clockwise).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numba
import numpy as np
from scipy.special import exp1, roots_jacobi, roots_legendre

from .errors import DomainError

REGULARIZATIONS = ("none", "cutoff", "mollified")

# Lanczos approximation, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments.

    Lanczos approximation with reflection below 1/2.  Relative error is
    below 1e-13 on (0, 20].
    """
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"gamma_fn requires x > 0, got {x!r}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def green_constant(m: float) -> float:
    """Prefactor C_m of the fractional Green function."""
    return gamma_fn((2.0 - m) / 2.0) / (2.0 ** (m / 2.0) * math.pi * gamma_fn(m / 2.0))


@dataclass(frozen=True)
class KernelSpec:
    """Fractional order, regularization kind and scale of the kernel."""

    m: float
    regularization: str = "none"
    epsilon: float = 0.0
    quadrature_order: int = 40

    def __post_init__(self):
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        if not 1.0 < self.m < 2.0:
            raise DomainError(f"m must lie in (1, 2), got {self.m!r}")
        if self.regularization not in REGULARIZATIONS:
            raise DomainError(
                f"regularization must be one of {REGULARIZATIONS}, got {self.regularization!r}"
            )
        if self.regularization == "none":
            if self.epsilon != 0.0:
                raise DomainError("epsilon must be 0 when regularization is 'none'")
        elif not self.epsilon > 0.0 or not math.isfinite(self.epsilon):
            raise DomainError(f"epsilon must be positive for {self.regularization!r}")
        if int(self.quadrature_order) < 1:
            raise DomainError("quadrature_order must be a positive integer")
        object.__setattr__(self, "quadrature_order", int(self.quadrature_order))

    @property
    def constant(self) -> float:
        return _cached_constant(self.m)

    @property
    def regularized(self) -> bool:
        return self.regularization != "none"

    def with_regularization(self, regularization: str, epsilon: float = 0.0) -> "KernelSpec":
        return KernelSpec(self.m, regularization, epsilon, self.quadrature_order)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        return cls(**data)


@lru_cache(maxsize=64)
def _cached_constant(m: float) -> float:
    return green_constant(m)


# ---------------------------------------------------------------------------
# cutoff ramp

def cutoff_ramp(r, epsilon: float):
    """Quintic C^2 ramp: 0 on [0, eps/2], 1 on [eps, inf)."""
    s = np.clip(2.0 * np.asarray(r, dtype=float) / epsilon - 1.0, 0.0, 1.0)
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def cutoff_ramp_derivative(r, epsilon: float):
    s = np.clip(2.0 * np.asarray(r, dtype=float) / epsilon - 1.0, 0.0, 1.0)
    return (2.0 / epsilon) * 30.0 * s * s * (1.0 - s) * (1.0 - s)


# ramp(2q - 1) expanded in powers of q = r / epsilon
_s = np.polynomial.Polynomial([-1.0, 2.0])
_RAMP_IN_Q = (10 * _s**3 - 15 * _s**4 + 6 * _s**5).coef
del _s


def _cutoff_green(m: float, c: float, epsilon: float, r: np.ndarray) -> np.ndarray:
    # potential whose perpendicular gradient is exactly ramp * k_m
    q = np.clip(r / epsilon, 0.5, 1.0)
    acc = np.zeros_like(q)
    for k, b in enumerate(_RAMP_IN_Q):
        p = k + m - 2.0
        acc += b * (1.0 - q**p) / p
    inner = c * epsilon ** (m - 2.0) * (1.0 - (m - 2.0) * acc)
    out = np.where(r >= epsilon, c * np.maximum(r, epsilon) ** (m - 2.0), inner)
    return out


# ---------------------------------------------------------------------------
# mollifier and quadrature

_BUMP_MASS = math.pi * (math.exp(-1.0) - float(exp1(1.0)))


def mollifier(y, epsilon: float = 1.0):
    """Normalized bump c exp(-1/(1-|y/eps|^2)) / eps^2 supported in B_eps."""
    y = np.asarray(y, dtype=float)
    q2 = np.sum(y * y, axis=-1) / (epsilon * epsilon)
    return _bump_of_q2(q2) / (epsilon * epsilon)


def _bump_of_q2(q2):
    u = 1.0 - q2
    out = np.zeros_like(u)
    inside = u > 0.0
    out[inside] = np.exp(-1.0 / u[inside]) / _BUMP_MASS
    return out


@lru_cache(maxsize=32)
def _jacobi_nodes(n: int, beta: float):
    x, w = roots_jacobi(n, 0.0, beta)
    return x, w


@lru_cache(maxsize=32)
def _legendre_nodes(n: int):
    return roots_legendre(n)


def _mollified_profiles(m: float, c: float, epsilon: float, r: np.ndarray, order: int):
    """Radial profiles (kappa, G) of rho_eps * k_m and rho_eps * G_m.

    Polar quadrature about the kernel singularity: Gauss-Jacobi in the
    radius with weight s^(m-2) absorbs the singular factor, the angular
    integral uses the trapezoid rule (periodic) when the singularity lies
    inside the mollifier support and Gauss-Legendre on the visible cone
    otherwise.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    kappa = np.zeros_like(r)
    green = np.zeros_like(r)
    eps2 = epsilon * epsilon

    inner = r < epsilon
    if np.any(inner):
        ri = r[inner][:, None, None]
        n_phi = 4 * order
        phi = (np.arange(n_phi) + 0.5) * (2.0 * math.pi / n_phi)
        cphi = np.cos(phi)[None, :, None]
        sphi = np.sin(phi)[None, :, None]
        xj, wj = _jacobi_nodes(order, m - 2.0)
        S = ri * cphi + np.sqrt(eps2 - (ri * sphi) ** 2)
        s = 0.5 * S * (1.0 + xj[None, None, :])
        q2 = (ri * ri - 2.0 * ri * s * cphi + s * s) / eps2
        rho = _bump_of_q2(q2) / eps2
        scale = (0.5 * S[..., 0]) ** (m - 1.0) * (2.0 * math.pi / n_phi)
        radial = np.sum(wj * rho, axis=-1) * scale
        radial_s = np.sum(wj * rho * s, axis=-1) * scale
        kappa[inner] = c * (m - 2.0) * np.sum(radial * cphi[..., 0], axis=-1)
        green[inner] = c * np.sum(radial_s, axis=-1)

    outer = ~inner
    if np.any(outer):
        ro = r[outer][:, None, None]
        xg, wg = _legendre_nodes(order)
        phimax = np.arcsin(np.minimum(epsilon / ro[:, 0, 0], 1.0))[:, None, None]
        phi = phimax * xg[None, :, None]
        wphi = phimax[..., 0] * wg[None, :]
        cphi = np.cos(phi)
        half = np.sqrt(np.maximum(eps2 - (ro * np.sin(phi)) ** 2, 0.0))
        mid = ro * cphi
        s = mid + half * xg[None, None, :]
        q2 = (ro * ro - 2.0 * ro * s * cphi + s * s) / eps2
        rho = _bump_of_q2(q2) / eps2
        sp = np.power(np.maximum(s, 1e-300), m - 2.0)
        radial = np.sum(wg * rho * sp, axis=-1) * half[..., 0]
        radial_s = np.sum(wg * rho * sp * s, axis=-1) * half[..., 0]
        kappa[outer] = c * (m - 2.0) * np.sum(wphi * radial * cphi[..., 0], axis=-1)
        green[outer] = c * np.sum(wphi * radial_s, axis=-1)

    kappa[r == 0.0] = 0.0
    return kappa, green


# ---------------------------------------------------------------------------
# radial profiles

def kernel_profile(spec: KernelSpec, r) -> np.ndarray:
    """Signed radial profile kappa with k(x) = kappa(|x|) x^perp / |x|."""
    r = np.asarray(r, dtype=float)
    c, m = spec.constant, spec.m
    if spec.regularization == "mollified":
        return _mollified_profiles(m, c, spec.epsilon, r.ravel(), spec.quadrature_order)[0].reshape(r.shape)
    with np.errstate(divide="ignore"):
        base = c * (m - 2.0) * np.power(r, m - 3.0)
    if spec.regularization == "cutoff":
        return np.where(r > 0.0, cutoff_ramp(r, spec.epsilon) * base, 0.0)
    return base


def green_profile(spec: KernelSpec, r) -> np.ndarray:
    """Green function (or its regularization) as a function of |x|."""
    r = np.asarray(r, dtype=float)
    c, m = spec.constant, spec.m
    if spec.regularization == "cutoff":
        return _cutoff_green(m, c, spec.epsilon, r)
    if spec.regularization == "mollified":
        return _mollified_profiles(m, c, spec.epsilon, r.ravel(), spec.quadrature_order)[1].reshape(r.shape)
    with np.errstate(divide="ignore"):
        return c * np.power(r, m - 2.0)


def green_value(spec: KernelSpec, r: float) -> float:
    """G_m(r) = C_m r^(m-2) for the singular kernel."""
    if spec.regularized:
        raise DomainError("green_value is defined for the unregularized kernel")
    r = float(r)
    if not r > 0.0:
        raise DomainError(f"green_value requires r > 0, got {r!r}")
    return spec.constant * r ** (spec.m - 2.0)


def regularized_green(spec: KernelSpec, r):
    """Regularized Green function G_m^eps; equals G_m for |x| >= eps."""
    if not spec.regularized:
        raise DomainError("regularized_green needs a regularized KernelSpec")
    return green_profile(spec, r)


def _field_from_profile(kappa, x, r):
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(r > 0.0, kappa / r, 0.0)
    out = np.empty(x.shape, dtype=float)
    out[..., 0] = -f * x[..., 1]
    out[..., 1] = f * x[..., 0]
    return out


def biot_savart(spec: KernelSpec, x) -> np.ndarray:
    """Singular kernel k_m(x) = C_m (m-2) |x|^(m-4) (-x2, x1).

    Accepts a single 2-vector or an array of shape (..., 2).
    """
    if spec.regularized:
        raise DomainError("biot_savart evaluates the unregularized kernel; use regularized_kernel")
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    if np.any(r2 == 0.0):
        raise DomainError("k_m is singular at x = 0")
    f = spec.constant * (spec.m - 2.0) * np.power(r2, 0.5 * spec.m - 2.0)
    out = np.empty(x.shape, dtype=float)
    out[..., 0] = -f * x[..., 1]
    out[..., 1] = f * x[..., 0]
    return out


def regularized_kernel(spec: KernelSpec, x) -> np.ndarray:
    """Cutoff (ramp * k_m) or mollified (rho_eps * k_m) kernel; 0 at the origin."""
    if not spec.regularized:
        raise DomainError("regularized_kernel needs regularization 'cutoff' or 'mollified'")
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    r = np.sqrt(r2)
    if spec.regularization == "cutoff":
        # same arithmetic as biot_savart so the two agree bitwise for |x| >= eps
        with np.errstate(divide="ignore", invalid="ignore"):
            f = spec.constant * (spec.m - 2.0) * np.power(r2, 0.5 * spec.m - 2.0) * cutoff_ramp(r, spec.epsilon)
        f = np.where(r > 0.0, f, 0.0)
        out = np.empty(x.shape, dtype=float)
        out[..., 0] = -f * x[..., 1]
        out[..., 1] = f * x[..., 0]
        return out
    return _field_from_profile(kernel_profile(spec, r), x, r)


def kernel(spec: KernelSpec, x) -> np.ndarray:
    """Dispatch to the singular or regularized kernel according to ``spec``."""
    return regularized_kernel(spec, x) if spec.regularized else biot_savart(spec, x)


# ---------------------------------------------------------------------------
# bounds and diagnostics

@dataclass(frozen=True)
class KernelBounds:
    sup_norm: float
    lipschitz: float

    @property
    def c_eps(self) -> float:
        """Lipschitz constant w.r.t. the truncated metric 1 ^ |x - y|."""
        return max(2.0 * self.sup_norm, self.lipschitz)


def kernel_bounds(spec: KernelSpec, resolution: int = 64, margin: float = 0.01) -> KernelBounds:
    """Upper bounds for sup|k^eps| and Lip(k^eps).

    For a field kappa(r) x^perp/r the Jacobian norm is max(|kappa'|, |kappa|/r).
    Both are sampled on a radial grid of step eps/resolution; a relative
    ``margin`` covers the gap between grid points, and the analytic far-field
    envelope covers everything beyond the grid.
    """
    if not spec.regularized:
        raise DomainError("kernel_bounds needs a regularized kernel")
    eps, c, m = spec.epsilon, spec.constant, spec.m
    h = eps / resolution
    if spec.regularization == "cutoff":
        r = np.arange(1, resolution + 1) * h
        ramp = cutoff_ramp(r, eps)
        base = c * (2.0 - m) * r ** (m - 3.0)
        dbase = c * (2.0 - m) * (3.0 - m) * r ** (m - 4.0)
        mag = ramp * base
        dmag = np.abs(cutoff_ramp_derivative(r, eps) * base - ramp * dbase)
        sup = mag.max()
        lip = max(dmag.max(), (mag / r).max())
        # beyond eps both envelopes decrease, so their value at eps bounds the tail
        sup = max(sup, c * (2.0 - m) * eps ** (m - 3.0))
        lip = max(lip, c * (2.0 - m) * (3.0 - m) * eps ** (m - 4.0))
    else:
        reach = 4.0 * eps
        r = np.arange(1, int(round(reach / h)) + 2) * h
        mag = np.abs(kernel_profile(spec, r))
        dmag = np.abs(np.gradient(mag, h))
        sup = mag.max()
        lip = max(dmag.max(), (mag / r).max())
        # |rho_eps * k|(x) <= sup over B_eps(x) of |k| for |x| >= reach
        far = reach - eps
        sup = max(sup, c * (2.0 - m) * far ** (m - 3.0))
        lip = max(lip, c * (2.0 - m) * (3.0 - m) * far ** (m - 4.0))
    return KernelBounds(sup_norm=float(sup * (1.0 + margin)), lipschitz=float(lip * (1.0 + margin)))


@dataclass(frozen=True)
class RatioCheck:
    max_ratio: float


def lipschitz_far_field_check(spec: KernelSpec, delta: float, samples: int, seed: int = 0) -> RatioCheck:
    """Largest sampled |k_m(x)-k_m(y)| delta^(4-m) / |x-y| over |x|,|y| >= delta, |x-y| <= delta/2."""
    if not delta > 0.0:
        raise DomainError("delta must be positive")
    if samples <= 0:
        return RatioCheck(0.0)
    exact = spec.with_regularization("none") if spec.regularized else spec
    rng = np.random.default_rng(seed)
    rad = delta * (1.0 + 3.0 * rng.random(samples))
    ang = 2.0 * math.pi * rng.random(samples)
    x = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1)
    off_r = 0.5 * delta * np.sqrt(rng.random(samples))
    off_a = 2.0 * math.pi * rng.random(samples)
    y = x + np.stack([off_r * np.cos(off_a), off_r * np.sin(off_a)], axis=-1)
    keep = (np.hypot(y[:, 0], y[:, 1]) >= delta) & (off_r > 0.0)
    if not np.any(keep):
        return RatioCheck(0.0)
    x, y, off_r = x[keep], y[keep], off_r[keep]
    diff = np.linalg.norm(biot_savart(exact, x) - biot_savart(exact, y), axis=-1)
    ratio = diff * delta ** (4.0 - spec.m) / np.linalg.norm(x - y, axis=-1)
    return RatioCheck(float(ratio.max()))


# ---------------------------------------------------------------------------
# pairwise sums

_KIND_CODE = {"none": 0, "cutoff": 1}


@numba.njit(cache=True)
def _pair_sum(pos, w, m, c, kind, eps, out):
    n = pos.shape[0]
    half_exp = 0.5 * m - 2.0
    best = np.inf
    bi = -1
    bj = -1
    for i in range(n):
        out[i, 0] = 0.0
        out[i, 1] = 0.0
    for i in range(n):
        xi = pos[i, 0]
        yi = pos[i, 1]
        for j in range(i + 1, n):
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            r2 = dx * dx + dy * dy
            if r2 < best:
                best = r2
                bi = i
                bj = j
            if r2 == 0.0:
                continue
            f = c * (m - 2.0) * r2**half_exp
            if kind == 1:
                r = math.sqrt(r2)
                s = 2.0 * r / eps - 1.0
                if s <= 0.0:
                    continue
                if s < 1.0:
                    f *= s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
            # velocity on i from j is f * (xi - xj)^perp, on j from i the opposite
            vx = -f * dy
            vy = f * dx
            out[i, 0] += w[j] * vx
            out[i, 1] += w[j] * vy
            out[j, 0] -= w[i] * vx
            out[j, 1] -= w[i] * vy
    return best, bi, bj


def pairwise_velocities(spec: KernelSpec, positions, weights):
    """Velocities u_i = sum_{j != i} w_j k(X_i - X_j).

    Returns ``(velocities, min_distance, (i, j))`` where the last two
    describe the closest pair.  Coincident pairs contribute nothing; the
    caller decides whether that is an error.
    """
    pos = np.ascontiguousarray(positions, dtype=float).reshape(-1, 2)
    w = np.ascontiguousarray(weights, dtype=float).reshape(-1)
    out = np.empty_like(pos)
    if spec.regularization == "mollified":
        return _pairwise_mollified(spec, pos, w, out)
    best, bi, bj = _pair_sum(pos, w, spec.m, spec.constant, _KIND_CODE[spec.regularization], spec.epsilon, out)
    return out, math.sqrt(best), (int(bi), int(bj))


def _pairwise_mollified(spec, pos, w, out):
    n = pos.shape[0]
    out[:] = 0.0
    if n < 2:
        return out, math.inf, (-1, -1)
    iu, ju = np.triu_indices(n, 1)
    d = pos[iu] - pos[ju]
    r = np.hypot(d[:, 0], d[:, 1])
    v = _field_from_profile(kernel_profile(spec, r), d, r)
    np.add.at(out, iu, w[ju][:, None] * v)
    np.add.at(out, ju, -w[iu][:, None] * v)
    k = int(np.argmin(r))
    return out, float(r[k]), (int(iu[k]), int(ju[k]))


def induced_velocity(spec: KernelSpec, targets, sources, weights, chunk: int = 2048) -> np.ndarray:
    """Velocity at arbitrary targets induced by weighted sources.

    For the singular kernel a target coinciding with a source receives no
    contribution from it (the self-term convention).
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    sources = np.asarray(sources, dtype=float).reshape(-1, 2)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    out = np.zeros_like(targets)
    if sources.shape[0] == 0:
        return out
    for start in range(0, targets.shape[0], chunk):
        t = targets[start:start + chunk]
        d = t[:, None, :] - sources[None, :, :]
        r = np.sqrt(np.sum(d * d, axis=-1))
        kap = kernel_profile(spec, r)
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(r > 0.0, kap / r, 0.0) * weights[None, :]
        out[start:start + chunk, 0] = -np.sum(f * d[..., 1], axis=1)
        out[start:start + chunk, 1] = np.sum(f * d[..., 0], axis=1)
    return out
