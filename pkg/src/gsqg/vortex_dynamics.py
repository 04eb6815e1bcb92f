"""N point-vortex system for the fractional kernel.

The exact dynamics

    dX_j/dt = sum_{k != j} gamma_k k_m(X_j - X_k)

is Hamiltonian with H = 1/2 sum_{j != k} gamma_j gamma_k G_m(X_j - X_k):
``gamma_j dX_j/dt = grad^perp_{X_j} H``.  The vortex centre
``sum gamma_j X_j`` and ``sum gamma_j |X_j|^2`` are conserved.  The
regularized dynamics replaces k_m by k_m^eps, which vanishes at the origin,
so coincident vortices are allowed there.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from itertools import combinations
from numbers import Rational
from typing import Optional

import numpy as np

from . import integrators
from .errors import (
    CollisionError,
    DomainError,
    FieldEvaluationError,
    NearCollisionError,
    SizeLimitError,
    StepSizeError,
)
from .kernel import KernelSpec, green_profile, pairwise_velocities

TRAJECTORY_SCHEMA = "gsqg.trajectory/1"
MAX_SUBSET_SCAN = 24


@dataclass(frozen=True, eq=False)
class VortexConfiguration:
    """Positions X_j (N x 2) and nonzero intensities gamma_j."""

    positions: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        gam = np.array(self.intensities, dtype=float).reshape(-1)
        if pos.shape[0] != gam.shape[0]:
            raise ValueError(f"{pos.shape[0]} positions but {gam.shape[0]} intensities")
        if pos.shape[0] < 1:
            raise ValueError("a configuration needs at least one vortex")
        if np.any(gam == 0.0):
            raise ValueError("intensities must be nonzero")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(gam))):
            raise ValueError("positions and intensities must be finite")
        pos.flags.writeable = False
        gam.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "intensities", gam)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def moved(self, positions) -> "VortexConfiguration":
        return VortexConfiguration(positions, self.intensities)

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist(), "intensities": self.intensities.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "VortexConfiguration":
        return cls(data["positions"], data["intensities"])


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    hamiltonian: float
    centre: tuple
    inertia: float
    min_pair_distance: float
    phi_eps: Optional[float] = None


@dataclass
class TrajectoryRecord:
    spec: KernelSpec
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def append(self, t, config, diag):
        if self.times and not t > self.times[-1]:
            raise ValueError("trajectory times must be strictly increasing")
        self.times.append(float(t))
        self.states.append(config)
        self.diagnostics.append(diag)

    @property
    def intensities(self) -> np.ndarray:
        return self.states[0].intensities

    def positions(self) -> np.ndarray:
        return np.stack([s.positions for s in self.states])

    def min_distance(self) -> float:
        """Recorded proxy of D_T: minimum pair distance over the stored states."""
        return min(d.min_pair_distance for d in self.diagnostics)

    # -- export ---------------------------------------------------------

    def csv_rows(self):
        n = self.states[0].n
        header = ["t"]
        for j in range(n):
            header += [f"x{j}", f"y{j}"]
        header += ["H", "C_x", "C_y", "J", "min_dist"]
        rows = [header]
        for t, s, d in zip(self.times, self.states, self.diagnostics):
            row = [t] + s.positions.ravel().tolist()
            row += [d.hamiltonian, d.centre[0], d.centre[1], d.inertia, d.min_pair_distance]
            rows.append([repr(float(v)) for v in row])
        return rows

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.csv_rows())
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_json(self) -> str:
        doc = {
            "schema": TRAJECTORY_SCHEMA,
            "kernel": self.spec.to_dict(),
            "intensities": self.intensities.tolist(),
            "times": self.times,
            "positions": [s.positions.tolist() for s in self.states],
            "diagnostics": [
                {
                    "t": d.t,
                    "hamiltonian": d.hamiltonian,
                    "centre": list(d.centre),
                    "inertia": d.inertia,
                    "min_pair_distance": d.min_pair_distance,
                    "phi_eps": d.phi_eps,
                }
                for d in self.diagnostics
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "TrajectoryRecord":
        doc = json.loads(text)
        if doc.get("schema") != TRAJECTORY_SCHEMA:
            raise ValueError(f"unsupported trajectory schema {doc.get('schema')!r}")
        rec = cls(KernelSpec.from_dict(doc["kernel"]))
        gam = doc["intensities"]
        for t, pos, d in zip(doc["times"], doc["positions"], doc["diagnostics"]):
            diag = DiagnosticsRecord(
                t=d["t"],
                hamiltonian=d["hamiltonian"],
                centre=tuple(d["centre"]),
                inertia=d["inertia"],
                min_pair_distance=d["min_pair_distance"],
                phi_eps=d["phi_eps"],
            )
            rec.append(t, VortexConfiguration(pos, gam), diag)
        return rec


# ---------------------------------------------------------------------------
# right-hand sides

def rhs_exact(spec: KernelSpec, config: VortexConfiguration) -> np.ndarray:
    """Velocities of the singular point-vortex system (self term excluded)."""
    if spec.regularized:
        raise DomainError("rhs_exact needs the unregularized kernel")
    vel, dmin, pair = pairwise_velocities(spec, config.positions, config.intensities)
    if dmin == 0.0:
        raise CollisionError(pair)
    return vel


def rhs_regularized(spec: KernelSpec, config: VortexConfiguration) -> np.ndarray:
    """Velocities with k_m^eps, summed over all k (k_m^eps(0) = 0)."""
    if not spec.regularized:
        raise DomainError("rhs_regularized needs a regularized kernel")
    return pairwise_velocities(spec, config.positions, config.intensities)[0]


def rhs(spec: KernelSpec, config: VortexConfiguration) -> np.ndarray:
    return rhs_regularized(spec, config) if spec.regularized else rhs_exact(spec, config)


# ---------------------------------------------------------------------------
# invariants

def _pair_distances(positions):
    iu, ju = np.triu_indices(positions.shape[0], 1)
    d = positions[iu] - positions[ju]
    return iu, ju, np.hypot(d[:, 0], d[:, 1])


def hamiltonian(spec: KernelSpec, config: VortexConfiguration) -> float:
    """H = 1/2 sum_{j != k} gamma_j gamma_k G(X_j - X_k), with G_m^eps when regularized."""
    if config.n < 2:
        return 0.0
    iu, ju, r = _pair_distances(config.positions)
    if not spec.regularized and np.any(r == 0.0):
        k = int(np.argmin(r))
        raise CollisionError((iu[k], ju[k]))
    g = config.intensities
    return float(np.sum(g[iu] * g[ju] * green_profile(spec, r)))


def hamiltonian_gradient_fd(spec: KernelSpec, config: VortexConfiguration, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient dH/dX (N x 2)."""
    base = np.array(config.positions)
    grad = np.zeros_like(base)
    for j in range(config.n):
        for a in range(2):
            plus, minus = base.copy(), base.copy()
            plus[j, a] += h
            minus[j, a] -= h
            grad[j, a] = (hamiltonian(spec, config.moved(plus)) - hamiltonian(spec, config.moved(minus))) / (2.0 * h)
    return grad


def symplectic_residual(spec: KernelSpec, config: VortexConfiguration, h: float = 1e-5) -> float:
    """Relative mismatch between gamma_j rhs_j and grad^perp_{X_j} H from finite differences."""
    lhs = config.intensities[:, None] * rhs(spec, config)
    g = hamiltonian_gradient_fd(spec, config, h)
    perp = np.stack([-g[:, 1], g[:, 0]], axis=-1)
    scale = np.max(np.abs(lhs))
    if scale == 0.0:
        return float(np.max(np.abs(perp)))
    return float(np.max(np.abs(lhs - perp)) / scale)


def vortex_centre(config: VortexConfiguration) -> np.ndarray:
    return config.intensities @ config.positions


def moment_of_inertia(config: VortexConfiguration) -> float:
    return float(config.intensities @ np.sum(config.positions**2, axis=1))


def min_pair_distance(config: VortexConfiguration) -> float:
    if config.n < 2:
        raise ValueError("min_pair_distance needs at least two vortices")
    return float(_pair_distances(config.positions)[2].min())


def phi_eps(spec: KernelSpec, config: VortexConfiguration) -> float:
    """Phi_eps = 1/2 sum_{i != j} G_m^eps(x_i - x_j) (unit intensities)."""
    if spec.regularization != "cutoff":
        raise DomainError("phi_eps uses the cutoff regularization")
    if config.n < 2:
        return 0.0
    return float(np.sum(green_profile(spec, _pair_distances(config.positions)[2])))


def interaction_bound_h(config: VortexConfiguration, m: float) -> float:
    """Triple sum over distinct i, j, k of |x_i-x_j|^(m-3) |x_i-x_k|^(m-3)."""
    pos = config.positions
    n = config.n
    if n < 3:
        return 0.0
    d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] == 0.0):
        i, j = np.argwhere((d == 0.0) & off)[0]
        raise CollisionError((i, j))
    p = np.zeros_like(d)
    p[off] = d[off] ** (m - 3.0)
    row = p.sum(axis=1)
    return float(np.sum(row**2 - np.sum(p**2, axis=1)))


def co_rotation_period(m: float, d: float, gamma: float = 1.0) -> float:
    """Rotation period of two vortices of equal intensity ``gamma`` at distance ``d``."""
    spec = KernelSpec(m)
    return math.pi * d ** (4.0 - m) / (abs(gamma) * spec.constant * (2.0 - m))


def diagnostics(spec: KernelSpec, config: VortexConfiguration, t: float) -> DiagnosticsRecord:
    c = vortex_centre(config)
    dmin = min_pair_distance(config) if config.n > 1 else math.inf
    exact_ok = spec.regularized or dmin > 0.0
    return DiagnosticsRecord(
        t=float(t),
        hamiltonian=hamiltonian(spec, config) if exact_ok else math.nan,
        centre=(float(c[0]), float(c[1])),
        inertia=moment_of_inertia(config),
        min_pair_distance=dmin,
        phi_eps=phi_eps(spec, config) if spec.regularization == "cutoff" else None,
    )


# ---------------------------------------------------------------------------
# intensity admissibility

@dataclass(frozen=True)
class IntensityCheck:
    admissible: bool
    violating_subset: Optional[tuple] = None


def _as_exact(values):
    out = []
    for v in values:
        if isinstance(v, (Rational, Decimal)):
            out.append(Fraction(v))
            continue
        x = float(v)
        if not math.isfinite(x):
            raise ValueError("intensities must be finite")
        text = repr(x)
        digits = text.split("e")[0].replace("-", "").replace(".", "").lstrip("0")
        if len(digits) > 15:
            return None
        out.append(Fraction(text))
    return out


def _subset_sums(values):
    sums = {}
    n = len(values)
    for mask in range(1, 1 << n):
        low = mask & -mask
        prev = mask ^ low
        sums[mask] = (sums[prev] if prev else 0) + values[low.bit_length() - 1]
    return sums


def _indices(mask, offset=0):
    return tuple(i + offset for i in range(mask.bit_length()) if mask >> i & 1)


def validate_intensities(intensities, tol: float = 1e-12) -> IntensityCheck:
    """Check that no nonempty subset of intensities sums to zero.

    Integers, fractions, decimals and floats with a short decimal
    representation are compared exactly as rationals; other floats use an
    absolute tolerance ``tol * max|gamma|``.  Witness indices are 0-based.
    Meet-in-the-middle over the two halves keeps N = 24 fast.
    """
    values = list(intensities)
    n = len(values)
    if n > MAX_SUBSET_SCAN:
        raise SizeLimitError(f"subset scan limited to N <= {MAX_SUBSET_SCAN}, got {n}")
    if n == 0:
        return IntensityCheck(True)
    exact = _as_exact(values)
    half = n // 2
    if exact is not None:
        den = math.lcm(*(f.denominator for f in exact))
        ints = [int(f * den) for f in exact]
        left = {}
        for mask, s in _subset_sums(ints[:half]).items():
            left.setdefault(s, mask)
        if 0 in left:
            return IntensityCheck(False, _indices(left[0]))
        right = ints[half:]
        for mask, s in _subset_sums(right).items():
            if s == 0:
                return IntensityCheck(False, _indices(mask, half))
            if -s in left:
                return IntensityCheck(False, _indices(left[-s]) + _indices(mask, half))
        return IntensityCheck(True)

    floats = [float(v) for v in values]
    thresh = tol * max(abs(v) for v in floats)
    lsums = sorted((s, mask) for mask, s in _subset_sums(floats[:half]).items())
    lsums.insert(0, (0.0, 0))
    keys = np.array([s for s, _ in lsums])
    rsums = [(0.0, 0)] + [(s, mask) for mask, s in _subset_sums(floats[half:]).items()]
    for s, rmask in rsums:
        lo = np.searchsorted(keys, -s - thresh, side="left")
        hi = np.searchsorted(keys, -s + thresh, side="right")
        for k in range(lo, hi):
            lmask = lsums[k][1]
            if lmask or rmask:
                return IntensityCheck(False, _indices(lmask) + _indices(rmask, half))
    return IntensityCheck(True)


def brute_force_admissible(intensities) -> bool:
    """Reference scan over all nonempty subsets (small N only)."""
    vals = [Fraction(repr(float(v))) for v in intensities]
    return all(
        sum(c) != 0 for k in range(1, len(vals) + 1) for c in combinations(vals, k)
    )


# ---------------------------------------------------------------------------
# time integration

def integrate(
    spec: KernelSpec,
    config: VortexConfiguration,
    t_end: float,
    dt: float,
    method: str = "rk4",
    record_every: int = 1,
    collision_floor: float = 1e-8,
    atol: float = 1e-9,
    rtol: float = 1e-9,
) -> TrajectoryRecord:
    """Integrate the exact or regularized system from t = 0 to ``t_end``.

    ``rk4`` uses uniform steps of size t_end / ceil(t_end / dt).  ``rk45`` is
    Dormand-Prince with error control, ``dt`` being the initial step.  For
    the exact kernel the run aborts with NearCollisionError as soon as a
    pair gets closer than ``collision_floor``.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    if record_every < 1:
        raise ValueError("record_every must be a positive integer")
    gam = config.intensities
    exact = not spec.regularized
    floor = collision_floor if exact else -1.0

    def f(t, y):
        vel, dmin, pair = pairwise_velocities(spec, y, gam)
        if exact and dmin == 0.0:
            raise CollisionError(pair, t)
        if not np.all(np.isfinite(vel)):
            raise FieldEvaluationError(f"non-finite velocity at t={t!r}")
        return vel

    def check(t, y):
        if exact and config.n > 1:
            _, dmin, pair = pairwise_velocities(spec, y, gam)
            if dmin < floor:
                raise NearCollisionError(pair, t, dmin)

    record = TrajectoryRecord(spec)
    y = np.array(config.positions, dtype=float)
    check(0.0, y)
    record.append(0.0, config, diagnostics(spec, config, 0.0))
    if t_end == 0.0:
        return record

    if method == "rk4":
        n = integrators.step_count(t_end, dt)
        h = t_end / n
        for k in range(1, n + 1):
            y = integrators.rk4_step(f, (k - 1) * h, y, h)
            t = t_end if k == n else k * h
            check(t, y)
            if k % record_every == 0 or k == n:
                state = config.moved(y)
                record.append(t, state, diagnostics(spec, state, t))
        return record
    if method != "rk45":
        raise ValueError(f"unknown method {method!r}")

    t, h, accepted = 0.0, min(dt, t_end), 0
    while t < t_end:
        h = min(h, t_end - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepSizeError(f"step size underflow at t={t!r}")
        try:
            y_new, err = integrators.dopri_step(f, t, y, h)
        except CollisionError:
            h *= 0.25
            continue
        if not np.all(np.isfinite(y_new)):
            h *= 0.25
            continue
        if exact and config.n > 1:
            _, dmin, pair = pairwise_velocities(spec, y_new, gam)
            if dmin < floor:
                if h < 1e-10 * max(1.0, abs(t)):
                    raise NearCollisionError(pair, t + h, dmin)
                h *= 0.25
                continue
        e = integrators.error_norm(err, y, y_new, atol, rtol)
        if e <= 1.0:
            t = t_end if t_end - (t + h) <= 1e-14 * t_end else t + h
            y = y_new
            accepted += 1
            if accepted % record_every == 0 or t == t_end:
                state = config.moved(y)
                record.append(t, state, diagnostics(spec, state, t))
        factor = 5.0 if e == 0.0 else min(5.0, max(0.2, 0.9 * e ** -0.2))
        h *= factor
    return record
