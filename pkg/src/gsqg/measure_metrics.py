"""Signed discrete measures and the Wasserstein-1 distance on the metric 1 ^ |x - y|.

For signed measures with equal positive and negative masses,
``W1(mu, nu) = W1(mu+, nu+) + W1(mu-, nu-)``; each term is an exact
transport problem solved by the network simplex in POT.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import MassMismatchError, SizeLimitError
from .kernel import KernelSpec, induced_velocity, kernel_bounds

MAX_ATOMS = 512
MASS_RTOL = 1e-9
MERGE_TOL = 1e-14

_ot = None


def _pot():
    # keep POT from importing heavyweight optional backends
    global _ot
    if _ot is None:
        for name in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
            os.environ.setdefault(f"POT_BACKEND_DISABLE_{name}", "1")
        import ot

        _ot = ot
    return _ot


@dataclass(frozen=True, eq=False)
class DiscreteSignedMeasure:
    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if pos.shape[0] != w.shape[0]:
            raise ValueError("positions and weights must have equal length")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(w))):
            raise ValueError("atoms must be finite")
        if np.any(w == 0.0):
            raise ValueError("atom weights must be nonzero")
        pos.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @classmethod
    def empty(cls) -> "DiscreteSignedMeasure":
        return cls(np.zeros((0, 2)), np.zeros(0))

    @classmethod
    def from_atoms(cls, atoms) -> "DiscreteSignedMeasure":
        atoms = list(atoms)
        if not atoms:
            return cls.empty()
        return cls([a[0] for a in atoms], [a[1] for a in atoms])

    def __len__(self):
        return self.weights.shape[0]

    @property
    def atoms(self) -> list:
        return [(tuple(p), float(w)) for p, w in zip(self.positions.tolist(), self.weights.tolist())]

    def part(self, sign: int) -> "DiscreteSignedMeasure":
        """Positive (+1) or negative (-1) part as a nonnegative measure."""
        mask = self.weights > 0 if sign > 0 else self.weights < 0
        return DiscreteSignedMeasure(self.positions[mask], np.abs(self.weights[mask]))

    @property
    def positive_mass(self) -> float:
        return float(self.weights[self.weights > 0].sum())

    @property
    def negative_mass(self) -> float:
        return float(-self.weights[self.weights < 0].sum())

    def merged(self, tol: float = MERGE_TOL) -> "DiscreteSignedMeasure":
        """Merge same-sign atoms closer than ``tol``; atoms of opposite sign stay apart."""
        pos, w = [], []
        for p, wi in zip(self.positions, self.weights):
            for k, q in enumerate(pos):
                if np.sign(w[k]) == np.sign(wi) and np.hypot(*(p - q)) < tol:
                    w[k] += wi
                    break
            else:
                pos.append(p.copy())
                w.append(float(wi))
        if not pos:
            return DiscreteSignedMeasure.empty()
        return DiscreteSignedMeasure(pos, w)

    def translated(self, h) -> "DiscreteSignedMeasure":
        return DiscreteSignedMeasure(self.positions + np.asarray(h, float), self.weights)

    def integrate(self, f) -> float:
        if len(self) == 0:
            return 0.0
        return float(self.weights @ np.asarray(f(self.positions), float))

    # io
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "y", "w"])
        for (x, y), w in zip(self.positions.tolist(), self.weights.tolist()):
            wr.writerow([repr(x), repr(y), repr(w)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "DiscreteSignedMeasure":
        text = source if "\n" in str(source) else open(source).read()
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            return cls.empty()
        return cls([[float(r["x"]), float(r["y"])] for r in rows], [float(r["w"]) for r in rows])

    def to_json(self) -> str:
        return json.dumps({"positions": self.positions.tolist(), "weights": self.weights.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "DiscreteSignedMeasure":
        d = json.loads(text)
        if not d["weights"]:
            return cls.empty()
        return cls(d["positions"], d["weights"])

    @classmethod
    def load(cls, path) -> "DiscreteSignedMeasure":
        with open(path) as fh:
            text = fh.read()
        if str(path).endswith(".json"):
            return cls.from_json(text)
        return cls.from_csv(text)


def truncated_distance(x, y):
    """min(1, |x - y|), broadcasting over leading axes."""
    d = np.asarray(x, float) - np.asarray(y, float)
    return np.minimum(1.0, np.hypot(d[..., 0], d[..., 1]))


def truncated_cost_matrix(a, b) -> np.ndarray:
    return truncated_distance(np.asarray(a, float)[:, None, :], np.asarray(b, float)[None, :, :])


def _check_mass(name, ma, mb):
    if abs(ma - mb) > MASS_RTOL * max(ma, mb, 1e-300):
        raise MassMismatchError(f"{name} masses differ: {ma!r} vs {mb!r}")


def _w1_unsigned(a: DiscreteSignedMeasure, b: DiscreteSignedMeasure, entropic: bool, reg: float) -> float:
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if not entropic and max(len(a), len(b)) > MAX_ATOMS:
        raise SizeLimitError(f"exact solver accepts at most {MAX_ATOMS} atoms per sign class")
    ot = _pot()
    cost = truncated_cost_matrix(a.positions, b.positions)
    wa = a.weights / a.weights.sum()
    wb = b.weights / b.weights.sum()
    scale = 0.5 * (a.weights.sum() + b.weights.sum())
    if entropic:
        return float(ot.sinkhorn2(wa, wb, cost, reg) * scale)
    value = ot.emd2(wa, wb, cost, numItermax=10_000_000)
    return float(value * scale)


def w1(mu: DiscreteSignedMeasure, nu: DiscreteSignedMeasure, entropic: bool = False, reg: float = 1e-2) -> float:
    """Exact W1 under the truncated metric, summed over the two sign classes.

    Raises :class:`MassMismatchError` when per-sign masses differ beyond
    1e-9 relative, and :class:`SizeLimitError` above 512 atoms per class
    unless ``entropic=True`` (Sinkhorn, approximate).
    """
    _check_mass("positive", mu.positive_mass, nu.positive_mass)
    _check_mass("negative", mu.negative_mass, nu.negative_mass)
    return sum(_w1_unsigned(mu.part(s), nu.part(s), entropic, reg) for s in (1, -1))


def discretize_measure(density, extent, n_target: int) -> DiscreteSignedMeasure:
    """Quantize a gridded signed density into at most ``n_target`` atoms.

    ``density`` is an (ny, nx) array of point values on cell centres of the
    box ``extent = (x0, x1, y0, y1)``.  Positive and negative parts are
    quantized separately: the grid is split into k x k blocks, the largest
    k for which the atom count stays within ``n_target``, and every block
    carrying mass contributes one atom at its barycentre with the block mass.
    Per-sign masses of the output equal those of the input grid measure.
    """
    rho = np.asarray(density, dtype=float)
    if rho.ndim != 2:
        raise ValueError("density must be a 2-D grid")
    if n_target < 1:
        raise ValueError("n_target must be positive")
    ny, nx = rho.shape
    x0, x1, y0, y1 = (float(v) for v in extent)
    dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
    xc = x0 + dx * (np.arange(nx) + 0.5)
    yc = y0 + dy * (np.arange(ny) + 0.5)
    cell = rho * dx * dy
    for k in range(max(nx, ny), 0, -1):
        atoms = _block_atoms(cell, xc, yc, k)
        if len(atoms) <= n_target:
            return DiscreteSignedMeasure.from_atoms(atoms)
    return DiscreteSignedMeasure.empty()


def _block_atoms(cell, xc, yc, k):
    ny, nx = cell.shape
    xb = np.minimum((np.arange(nx) * k) // nx, k - 1)
    yb = np.minimum((np.arange(ny) * k) // ny, k - 1)
    X, Y = np.meshgrid(xc, yc)
    atoms = []
    for part in (np.maximum(cell, 0.0), np.minimum(cell, 0.0)):
        for by in range(k):
            rows = yb == by
            for bx in range(k):
                block = part[np.ix_(rows, xb == bx)]
                mass = block.sum()
                if mass == 0.0:
                    continue
                sel = np.ix_(rows, xb == bx)
                p = ((block * X[sel]).sum() / mass, (block * Y[sel]).sum() / mass)
                atoms.append((p, float(mass)))
    return atoms


def grid_measure(density, extent) -> DiscreteSignedMeasure:
    """Fine-grid reference: one atom per nonzero cell at its centre."""
    rho = np.asarray(density, dtype=float)
    ny, nx = rho.shape
    x0, x1, y0, y1 = (float(v) for v in extent)
    dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
    X, Y = np.meshgrid(x0 + dx * (np.arange(nx) + 0.5), y0 + dy * (np.arange(ny) + 0.5))
    mask = rho != 0.0
    return DiscreteSignedMeasure(np.stack([X[mask], Y[mask]], axis=-1), rho[mask] * dx * dy)


@dataclass(frozen=True)
class ConvolutionCheck:
    max_lhs_over_rhs: float
    w1: float
    c_eps: float


def lip_convolution_check(spec: KernelSpec, mu: DiscreteSignedMeasure, nu: DiscreteSignedMeasure, sample_points) -> ConvolutionCheck:
    """max_x |k^eps * mu(x) - k^eps * nu(x)| / (c_eps W1(mu, nu))."""
    if not spec.regularized:
        raise ValueError("lip_convolution_check needs a regularized kernel")
    x = np.asarray(sample_points, float).reshape(-1, 2)
    c_eps = kernel_bounds(spec).c_eps
    dist = w1(mu, nu)
    if dist == 0.0:
        return ConvolutionCheck(0.0, 0.0, c_eps)
    lhs = induced_velocity(spec, x, mu.positions, mu.weights) - induced_velocity(spec, x, nu.positions, nu.weights)
    ratio = float(np.max(np.linalg.norm(lhs, axis=1))) / (c_eps * dist)
    return ConvolutionCheck(ratio, dist, c_eps)
