"""Vortex blobs as weighted particle clouds.

A blob of radius eps and intensity gamma is the density
``gamma * eps^-2 * eta((x - x0) / eps)`` with ``eta`` a unit-mass profile
supported in the unit disc.  It is quantized into particles carrying signed
weights, which are then transported by the regularized self-induced
velocity plus an optional external field:

    dX_i/dt = sum_k w_k k_m^eps(X_i - X_k) + F(t, X_i).

Weights never change, so per-blob circulation is conserved exactly.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import integrators
from .errors import DomainError, FieldEvaluationError
from .kernel import KernelSpec, cutoff_ramp, induced_velocity, pairwise_velocities

log = logging.getLogger(__name__)

PROFILES = ("uniform_disc", "quartic_bump")
_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class BlobSpec:
    centre: tuple
    radius: float
    intensity: float
    profile: str = "quartic_bump"
    particles_per_blob: int = 400

    def __post_init__(self):
        object.__setattr__(self, "centre", tuple(float(c) for c in self.centre))
        if len(self.centre) != 2:
            raise ValueError("blob centre must be a 2-vector")
        if not self.radius > 0.0:
            raise ValueError("blob radius must be positive")
        if self.intensity == 0.0:
            raise ValueError("blob intensity must be nonzero")
        if self.profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}")
        if int(self.particles_per_blob) < 1:
            raise ValueError("particles_per_blob must be >= 1")


def profile_density(profile: str, q):
    """Unit-mass profile on the unit disc as a function of |y|."""
    q = np.asarray(q, dtype=float)
    if profile == "uniform_disc":
        return np.where(q <= 1.0, 1.0 / math.pi, 0.0)
    if profile == "quartic_bump":
        return np.where(q <= 1.0, (3.0 / math.pi) * (1.0 - q * q) ** 2, 0.0)
    raise ValueError(f"unknown profile {profile!r}")


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    positions: np.ndarray
    weights: np.ndarray
    blob_id: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        w = np.array(self.weights, dtype=float).reshape(-1)
        ids = np.array(self.blob_id, dtype=int).reshape(-1)
        if not (pos.shape[0] == w.shape[0] == ids.shape[0]):
            raise ValueError("positions, weights and blob_id must have equal length")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        for a in (pos, w, ids):
            a.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "blob_id", ids)

    def __len__(self):
        return self.positions.shape[0]

    @property
    def blobs(self) -> list:
        return sorted(set(self.blob_id.tolist()))

    def moved(self, positions) -> "ParticleEnsemble":
        return ParticleEnsemble(positions, self.weights, self.blob_id)

    def blob_mask(self, blob_id: int) -> np.ndarray:
        return self.blob_id == blob_id

    def blob_mass(self, blob_id: int) -> float:
        return float(np.sum(self.weights[self.blob_mask(blob_id)]))

    @staticmethod
    def concatenate(parts: Sequence["ParticleEnsemble"]) -> "ParticleEnsemble":
        return ParticleEnsemble(
            np.concatenate([p.positions for p in parts]),
            np.concatenate([p.weights for p in parts]),
            np.concatenate([p.blob_id for p in parts]),
        )


def discretize_blob(blob: BlobSpec, seed: int = 0, blob_id: int = 0, placement: str = "stratified") -> ParticleEnsemble:
    """Quantize a blob into ``particles_per_blob`` weighted particles.

    Stratified placement puts one particle in each of M/2 equal-area annuli
    (jittered radius, golden-angle azimuth plus jitter) and mirrors it
    through the centre, so the particle cloud is point symmetric; odd M adds
    a particle at the centre.  ``placement="random"`` samples the disc
    uniformly instead.  Weights are proportional to the profile at each site
    and sum to the intensity.
    """
    M = int(blob.particles_per_blob)
    c = np.array(blob.centre)
    if M == 1:
        return ParticleEnsemble(c[None, :], [blob.intensity], [blob_id])
    rng = np.random.default_rng(seed)
    if placement == "stratified":
        k = M // 2
        j = np.arange(k)
        u = (j + rng.random(k)) / k
        ang = j * _GOLDEN_ANGLE + (2.0 * math.pi / k) * (rng.random(k) - 0.5)
        q = np.sqrt(u)
        half = np.stack([q * np.cos(ang), q * np.sin(ang)], axis=-1)
        unit = np.concatenate([half, -half])
        if M % 2:
            unit = np.concatenate([np.zeros((1, 2)), unit])
    elif placement == "random":
        q = np.sqrt(rng.random(M))
        ang = 2.0 * math.pi * rng.random(M)
        unit = np.stack([q * np.cos(ang), q * np.sin(ang)], axis=-1)
    else:
        raise ValueError(f"unknown placement {placement!r}")
    unit = np.clip(unit, -1.0, 1.0)
    dens = profile_density(blob.profile, np.hypot(unit[:, 0], unit[:, 1]))
    if dens.sum() <= 0.0:
        dens = np.ones_like(dens)
    w = dens / dens.sum()
    w = w * blob.intensity
    # absorb rounding so the blob sums to its intensity
    w[np.argmax(np.abs(w))] += blob.intensity - w.sum()
    pos = c + blob.radius * unit
    return ParticleEnsemble(pos, w, np.full(M, blob_id))


def discretize_blobs(blobs: Sequence[BlobSpec], seed: int = 0, placement: str = "stratified") -> ParticleEnsemble:
    seeds = np.random.SeedSequence(seed).spawn(len(blobs))
    parts = [
        discretize_blob(b, seed=int(s.generate_state(1)[0]), blob_id=i, placement=placement)
        for i, (b, s) in enumerate(zip(blobs, seeds))
    ]
    return ParticleEnsemble.concatenate(parts)


# ---------------------------------------------------------------------------
# external fields

@dataclass(frozen=True)
class ExternalField:
    """Vectorized field ``evaluator(t, X) -> (n, 2)`` with its declared constants."""

    evaluator: Callable
    lipschitz_const: float = 0.0
    sup_bound: float = math.inf
    name: str = "custom"

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        return np.asarray(self.evaluator(t, x), dtype=float).reshape(-1, 2)

    def audit(self, lower, upper, times, samples: int = 2000, seed: int = 0, rel: float = 1e-6) -> dict:
        """Compare declared constants with finite-difference estimates on a box."""
        rng = np.random.default_rng(seed)
        lower, upper = np.asarray(lower, float), np.asarray(upper, float)
        span = np.maximum(upper - lower, 1e-12)
        lip, sup = 0.0, 0.0
        for t in times:
            x = lower + span * rng.random((samples, 2))
            h = 1e-6 * max(1.0, float(np.max(span)))
            dirs = rng.normal(size=(samples, 2))
            dirs /= np.linalg.norm(dirs, axis=1)[:, None]
            fx = self(t, x)
            fy = self(t, x + h * dirs)
            lip = max(lip, float(np.max(np.linalg.norm(fy - fx, axis=1)) / h))
            sup = max(sup, float(np.max(np.linalg.norm(fx, axis=1))))
        ok = lip <= self.lipschitz_const * (1.0 + rel) + 1e-9 and sup <= self.sup_bound * (1.0 + rel) + 1e-12
        return {"lipschitz_estimate": lip, "sup_estimate": sup, "ok": bool(ok)}


def zero_field() -> ExternalField:
    return ExternalField(lambda t, x: np.zeros_like(x), 0.0, 0.0, "zero")


def constant_field(v) -> ExternalField:
    v = np.asarray(v, dtype=float)
    return ExternalField(lambda t, x: np.broadcast_to(v, x.shape).copy(), 0.0, float(np.linalg.norm(v)), "constant")


def rotation_field(omega: float = 1.0, centre=(0.0, 0.0), radius_bound: float = math.inf) -> ExternalField:
    """Rigid rotation omega * (-(x2-c2), x1-c1); bounded on B(centre, radius_bound)."""
    c = np.asarray(centre, dtype=float)

    def f(t, x):
        d = x - c
        return omega * np.stack([-d[:, 1], d[:, 0]], axis=-1)

    return ExternalField(f, abs(omega), abs(omega) * radius_bound, "rotation")


def shear_field(rate: float = 1.0, y_bound: float = math.inf) -> ExternalField:
    return ExternalField(
        lambda t, x: np.stack([rate * x[:, 1], np.zeros(x.shape[0])], axis=-1),
        abs(rate),
        abs(rate) * y_bound,
        "shear",
    )


# ---------------------------------------------------------------------------
# transport

def self_velocity(spec: KernelSpec, ensemble: ParticleEnsemble) -> np.ndarray:
    """u_i = sum_k w_k k_m^eps(X_i - X_k); the self term vanishes."""
    if not spec.regularized:
        raise DomainError("particle transport needs a regularized kernel")
    return pairwise_velocities(spec, ensemble.positions, ensemble.weights)[0]


@dataclass(frozen=True)
class BlobDiagnostics:
    t: float
    blob_id: int
    centre: tuple
    inertia: float
    m_delta: tuple
    mu_delta: tuple
    support_radius: float


@dataclass
class BlobRun:
    """Output of :func:`evolve`: recorded times, snapshots and per-blob diagnostics."""

    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    deltas: tuple = ()

    def __iter__(self):
        return iter(zip(self.times, self.snapshots, self.diagnostics))

    def __len__(self):
        return len(self.times)

    def blob_series(self, blob_id: int) -> list:
        return [next(d for d in ds if d.blob_id == blob_id) for ds in self.diagnostics]

    def centres(self, blob_id: int) -> np.ndarray:
        return np.array([d.centre for d in self.blob_series(blob_id)])

    def snapshot_rows(self):
        rows = [["t", "blob_id", "x", "y", "w"]]
        for t, ens in zip(self.times, self.snapshots):
            for (x, y), w, b in zip(ens.positions.tolist(), ens.weights.tolist(), ens.blob_id.tolist()):
                rows.append([repr(t), str(b), repr(x), repr(y), repr(w)])
        return rows

    def diagnostic_rows(self):
        header = ["t", "blob_id", "c_x", "c_y", "J"]
        header += [f"m_delta@{d!r}" for d in self.deltas]
        header += ["support_radius"]
        rows = [header]
        for ds in self.diagnostics:
            for d in ds:
                row = [repr(d.t), str(d.blob_id), repr(d.centre[0]), repr(d.centre[1]), repr(d.inertia)]
                row += [repr(v) for v in d.m_delta]
                row.append(repr(d.support_radius))
                rows.append(row)
        return rows

    def to_csv(self, snapshot_path=None, diagnostics_path=None):
        out = []
        for rows, path in ((self.snapshot_rows(), snapshot_path), (self.diagnostic_rows(), diagnostics_path)):
            buf = io.StringIO()
            csv.writer(buf, lineterminator="\n").writerows(rows)
            text = buf.getvalue()
            if path is not None:
                with open(path, "w", newline="") as fh:
                    fh.write(text)
            out.append(text)
        return tuple(out)


def blob_diagnostics(ensemble: ParticleEnsemble, t: float, deltas=()) -> list:
    out = []
    for b in ensemble.blobs:
        if ensemble.blob_mass(b) == 0.0:
            # passive tracers carry no pseudo-vorticity, so the centre is undefined
            nan = math.nan
            out.append(BlobDiagnostics(float(t), b, (nan, nan), nan, (nan,) * len(deltas), (nan,) * len(deltas), nan))
            continue
        c = centre_of_pseudo_vorticity(ensemble, b)
        out.append(
            BlobDiagnostics(
                t=float(t),
                blob_id=b,
                centre=(float(c[0]), float(c[1])),
                inertia=moment_of_inertia_about_centre(ensemble, b),
                m_delta=tuple(mass_outside(ensemble, b, c, d) for d in deltas),
                mu_delta=tuple(mu_delta(ensemble, b, c, d) for d in deltas),
                support_radius=support_radius(ensemble, b, c),
            )
        )
    return out


def evolve(
    spec: KernelSpec,
    ensemble: ParticleEnsemble,
    field: Optional[ExternalField] = None,
    t_end: float = 1.0,
    dt: float = 1e-3,
    record_every: int = 1,
    deltas=(),
    check_overlap: bool = True,
) -> BlobRun:
    """RK4 transport of the particles by self-induced velocity plus ``field``."""
    if not spec.regularized:
        raise DomainError("particle transport needs a regularized kernel")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if record_every < 1:
        raise ValueError("record_every must be a positive integer")
    w = ensemble.weights

    def f(t, y):
        vel = pairwise_velocities(spec, y, w)[0]
        if field is not None:
            ext = field(t, y)
            bad = ~np.all(np.isfinite(ext), axis=1)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise FieldEvaluationError(f"external field not finite at t={t!r}, x={tuple(y[i])!r}")
            vel = vel + ext
        return vel

    deltas = tuple(float(d) for d in deltas)
    run = BlobRun(deltas=deltas)

    def record(t, ens):
        run.times.append(float(t))
        run.snapshots.append(ens)
        diag = blob_diagnostics(ens, t, deltas)
        run.diagnostics.append(diag)
        if check_overlap and len(diag) > 1:
            _warn_overlap(diag, t)

    record(0.0, ensemble)
    n = integrators.step_count(t_end, dt)
    if n == 0:
        return run
    h = t_end / n
    y = np.array(ensemble.positions)
    for k in range(1, n + 1):
        y = integrators.rk4_step(f, (k - 1) * h, y, h)
        if k % record_every == 0 or k == n:
            record(t_end if k == n else k * h, ensemble.moved(y))
    return run


def _warn_overlap(diag, t):
    for i in range(len(diag)):
        for j in range(i + 1, len(diag)):
            a, b = diag[i], diag[j]
            gap = math.dist(a.centre, b.centre)
            if gap < a.support_radius + b.support_radius:
                log.warning("supports of blobs %d and %d overlap at t=%g", a.blob_id, b.blob_id, t)


# ---------------------------------------------------------------------------
# diagnostics

def _blob(ensemble, blob_id):
    mask = ensemble.blob_mask(blob_id)
    return ensemble.positions[mask], ensemble.weights[mask]


def centre_of_pseudo_vorticity(ensemble: ParticleEnsemble, blob_id: int) -> np.ndarray:
    """Mass-normalized first moment sum w X / sum w of one blob."""
    x, w = _blob(ensemble, blob_id)
    mass = w.sum()
    if mass == 0.0:
        raise ZeroDivisionError(f"blob {blob_id} has zero mass")
    return (w @ x) / mass


def moment_of_inertia_about_centre(ensemble: ParticleEnsemble, blob_id: int) -> float:
    x, w = _blob(ensemble, blob_id)
    if w.sum() == 0.0:
        raise ZeroDivisionError(f"blob {blob_id} has zero mass")
    c = centre_of_pseudo_vorticity(ensemble, blob_id)
    return float(w @ np.sum((x - c) ** 2, axis=1))


def mass_outside(ensemble: ParticleEnsemble, blob_id: int, centre, delta: float) -> float:
    """m_delta: absolute blob mass strictly farther than ``delta`` from ``centre``."""
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    x, w = _blob(ensemble, blob_id)
    far = np.linalg.norm(x - np.asarray(centre, float), axis=1) > delta
    return float(np.sum(np.abs(w[far])))


def mu_delta(ensemble: ParticleEnsemble, blob_id: int, centre, delta: float) -> float:
    """1 - <theta, phi_delta(c - .)> / mass with phi_delta = 1 on B_delta, 0 off B_2delta."""
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    x, w = _blob(ensemble, blob_id)
    r = np.linalg.norm(x - np.asarray(centre, float), axis=1)
    phi = 1.0 - cutoff_ramp(r, 2.0 * delta)
    mass = w.sum()
    return float(1.0 - (w @ phi) / mass)


def support_radius(ensemble: ParticleEnsemble, blob_id: int, centre) -> float:
    x, _ = _blob(ensemble, blob_id)
    if x.shape[0] == 0:
        return 0.0
    return float(np.max(np.linalg.norm(x - np.asarray(centre, float), axis=1)))


def reference_centre_ode(field: ExternalField, x0, t_end: float, dt: float):
    """RK4 solution of dc/dt = F(t, c); returns (times, centres)."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")

    def f(t, y):
        v = field(t, y)
        if not np.all(np.isfinite(v)):
            raise FieldEvaluationError(f"external field not finite at t={t!r}, x={tuple(y[0])!r}")
        return v

    n = integrators.step_count(t_end, dt)
    times = [0.0]
    y = np.asarray(x0, dtype=float).reshape(1, 2)
    out = [y[0].copy()]
    h = t_end / n if n else 0.0
    for k in range(1, n + 1):
        y = integrators.rk4_step(f, (k - 1) * h, y, h)
        times.append(t_end if k == n else k * h)
        out.append(y[0].copy())
    return np.array(times), np.array(out)


def velocity_holder_check(spec: KernelSpec, ensemble: ParticleEnsemble, samples: int, seed: int = 0, margin: Optional[float] = None) -> float:
    """max |u(x)-u(y)| / (1 ^ |x-y|)^(m-1) over sampled pairs around the ensemble.

    Half of the base points are uniform on the bounding box widened by
    ``margin`` (default: the box diameter); the other half are particles
    displaced by Gaussian noise at the kernel scale, where the maximum
    lives.  Partners sit at log-uniform distances in [1e-3, 2].
    """
    if len(ensemble) == 0 or samples <= 0:
        return 0.0
    rng = np.random.default_rng(seed)
    pos = ensemble.positions
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    if margin is None:
        margin = max(float(np.hypot(*(hi - lo))), spec.epsilon, 1e-3)
    lo, hi = lo - margin, hi + margin
    near = samples // 2
    x = np.concatenate([
        lo + (hi - lo) * rng.random((samples - near, 2)),
        pos[rng.integers(0, len(pos), near)] + rng.normal(scale=max(spec.epsilon, 1e-3), size=(near, 2)),
    ])
    length = np.exp(rng.uniform(math.log(1e-3), math.log(2.0), samples))
    ang = 2.0 * math.pi * rng.random(samples)
    y = x + length[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    ux = induced_velocity(spec, x, pos, ensemble.weights)
    uy = induced_velocity(spec, y, pos, ensemble.weights)
    ratio = np.linalg.norm(ux - uy, axis=1) / np.minimum(1.0, length) ** (spec.m - 1.0)
    return float(ratio.max())
