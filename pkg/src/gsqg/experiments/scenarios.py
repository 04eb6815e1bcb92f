"""Scenario runners.

Each runner takes a :class:`ScenarioConfig` and returns a
:class:`ScenarioReport` whose verdicts are the acceptance clauses of the
scenario.  Envelopes marked "regression envelope" are bounds recorded from
the first verified build, not consequences of theory.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time

import numpy as np

from .. import blob_transport as bt
from .. import vortex_dynamics as vd
from ..errors import CollisionError, ConfigError
from ..kernel import KernelSpec, kernel_bounds, kernel_profile
from ..measure_metrics import DiscreteSignedMeasure, discretize_measure, w1
from .config import ScenarioConfig, ScenarioReport

log = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)

FIVE_VORTEX_FIXTURE = {
    "positions": [[0.0, 0.0], [1.0, 0.2], [-0.3, 1.1], [-1.2, -0.4], [0.6, -1.0]],
    "intensities": [1.0, 0.8, 1.3, 0.6, 1.1],
}

DEFAULTS = {
    "two_vortex": {
        "d": 1.0,
        "gamma": 1.0,
        "periods": 1,
        "steps_per_period": 10000,
        "order_steps": 80,
        "order_range": [3.8, 4.2],
        "return_tol": 1e-6,
        "record_every": 100,
    },
    "conservation_suite": {
        "configs": [FIVE_VORTEX_FIXTURE],
        "m_values": None,
        "t_end": 10.0,
        "dt": 1e-3,
        "record_every": 100,
        "collision_floor": 1e-8,
        "h_tol": 1e-8,
        "j_tol": 1e-8,
        "c_tol": 1e-10,
        "rhs_tol": 1e-12,
    },
    "blob_to_point": {
        "eps": [0.2, 0.1, 0.05],
        "intensities": [1.0, 1.0],
        "centres": [[-1.0, 0.0], [1.0, 0.0]],
        "particles_per_blob": 400,
        "profile": "quartic_bump",
        "placement": "stratified",
        "cutoff_factor": 0.25,
        "t_end": 1.0,
        "dt": 1e-3,
        "record_every": 10,
        "ratio_bound": 0.7,
        "write_snapshots": False,
    },
    "localization": {
        "eps": [0.2, 0.1, 0.05],
        "fields": ["zero", "rotation"],
        "omega": 1.0,
        "offset": [1.0, 0.0],
        "intensity": 1.0,
        "particles_per_blob": 400,
        "profile": "quartic_bump",
        "placement": "stratified",
        "cutoff_factor": 0.25,
        "t_end": 1.0,
        "dt": 1e-3,
        "record_every": 10,
        "delta_factors": [0.25, 0.5, 1.0],
        "band": 2.0,
        "support_R": 0.3,
        "centre_C": 1.0,
        "gronwall_tol": 0.05,
        "audit_half_width": 2.0,
        "write_snapshots": False,
    },
    "approximation": {
        "grid": 48,
        "radius": 0.5,
        "n_ladder": [16, 64, 256],
        "eps_ladder": [0.2, 0.1, 0.05],
        "n_ref": 512,
        "eps_ref": 0.025,
        "t_end": 1.0,
        "dt": 1e-2,
        "record_every": 10,
    },
    "wasserstein_stability": {
        "positions": [[0.0, 0.0], [0.3, 0.1], [-0.2, 0.25], [0.1, -0.3], [-0.25, -0.15], [0.35, -0.2]],
        "weights": [1.0, 0.8, 0.6, -0.5, -0.7, -0.4],
        "mode": "translate",
        "h": [0.1, 0.05],
        "jitter": 0.02,
        "epsilon": 0.1,
        "t_end": 1.0,
        "dt": 1e-3,
        "record_every": 10,
        "tol": 0.05,
        "short_t_end": 1e-3,
    },
    "collision_statistics": {
        "intensities": [1.0, 1.0, -0.5],
        "trials": 500,
        "box": 1.0,
        "eps": [0.2, 0.1, 0.05],
        "t_end": 5.0,
        "dt": 1e-3,
        "slope_tol": 0.5,
    },
}


def resolve_params(config: ScenarioConfig) -> dict:
    defaults = DEFAULTS[config.scenario]
    unknown = set(config.params) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown parameters for {config.scenario}: {sorted(unknown)}")
    return {**defaults, **config.params}


def validate(config: ScenarioConfig, exploratory: bool = False) -> dict:
    """Static checks that do not run any dynamics; returns the resolved parameters."""
    p = resolve_params(config)
    m = config.kernel.m
    if config.scenario in ("blob_to_point", "localization") and not exploratory and not SQRT3 < m < 2.0:
        raise ConfigError(f"{config.scenario} requires sqrt(3) < m < 2 (got m={m}); use --exploratory")
    if config.scenario == "blob_to_point":
        eps = p["eps"]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("eps ladder must be strictly decreasing")
        if len(p["intensities"]) != len(p["centres"]):
            raise ConfigError("intensities and centres must have equal length")
        c = np.asarray(p["centres"], float)
        if len(c) > 1:
            gap = min(np.linalg.norm(c[i] - c[j]) for i in range(len(c)) for j in range(i + 1, len(c)))
            if gap <= 2.0 * max(eps):
                raise ConfigError("blob centres must be separated by more than twice the largest radius")
    if config.scenario == "localization":
        bad = set(p["fields"]) - {"zero", "rotation"}
        if bad:
            raise ConfigError(f"unknown fields {sorted(bad)}")
    if config.scenario == "approximation":
        if len(p["n_ladder"]) != len(p["eps_ladder"]):
            raise ConfigError("n_ladder and eps_ladder must have equal length")
    if config.scenario == "wasserstein_stability":
        if p["mode"] not in ("translate", "jitter"):
            raise ConfigError("mode must be 'translate' or 'jitter'")
        if not p["epsilon"] > 0.0:
            raise ConfigError("wasserstein_stability needs a positive epsilon")
    if config.scenario == "collision_statistics":
        if not 3 <= len(p["intensities"]) <= 4 and len(p["intensities"]) != 2:
            raise ConfigError("collision_statistics expects N = 2, 3 or 4 intensities")
        if int(p["trials"]) < 1:
            raise ConfigError("trials must be positive")
    return p


def run(config: ScenarioConfig, exploratory: bool = False) -> ScenarioReport:
    p = validate(config, exploratory)
    report = ScenarioReport(config.scenario, config.config_hash)
    t0 = time.perf_counter()
    RUNNERS[config.scenario](config, p, report, exploratory)
    report.wall_clock = time.perf_counter() - t0
    return report


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _r(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------

def run_two_vortex(config, p, report, exploratory=False):
    m = config.kernel.m
    d, gamma = float(p["d"]), float(p["gamma"])
    if int(p["periods"]) == 0:
        report.notes.append("zero-length run; no clauses evaluated")
        return
    period = vd.co_rotation_period(m, d, gamma)
    cfg = vd.VortexConfiguration([[-0.5 * d, 0.0], [0.5 * d, 0.0]], [gamma, gamma])
    spec = KernelSpec(m)
    t_end = int(p["periods"]) * period
    steps = int(p["steps_per_period"]) * int(p["periods"])
    rec = vd.integrate(spec, cfg, t_end, t_end / steps, record_every=int(p["record_every"]))
    ret = float(np.max(np.linalg.norm(rec.states[-1].positions - cfg.positions, axis=1)))

    base = int(p["order_steps"])
    errs, dts = [], []
    for k in (1, 2, 4):
        n = base * k
        r = vd.integrate(spec, cfg, period, period / n, record_every=n)
        errs.append(float(np.max(np.linalg.norm(r.states[-1].positions - cfg.positions, axis=1))))
        dts.append(period / n)
    order = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])

    report.metrics["two_vortex"] = {
        "m": m,
        "d": d,
        "period": period,
        "dt": t_end / steps,
        "return_error": ret,
        "order_dts": dts,
        "order_errors": errs,
        "order_fit": order,
    }
    report.verdict("period_return", ret <= p["return_tol"] * d)
    lo, hi = p["order_range"]
    report.verdict("rk4_order", lo <= order <= hi)
    report.csv["two_vortex_trajectory.csv"] = rec.to_csv()


# ---------------------------------------------------------------------------

def _rel_drift(values):
    v = np.asarray(values, float)
    ref = abs(v[0])
    dev = float(np.max(np.abs(v - v[0])))
    return dev / ref if ref > 0.0 else dev


def _rhs_identities(spec, cfg):
    u = vd.rhs(spec, cfg)
    g = cfg.intensities
    lin = np.linalg.norm(g @ u)
    lin_scale = float(np.sum(np.abs(g) * np.linalg.norm(u, axis=1)))
    dot = abs(float(g @ np.sum(cfg.positions * u, axis=1)))
    dot_scale = float(np.sum(np.abs(g) * np.linalg.norm(cfg.positions, axis=1) * np.linalg.norm(u, axis=1)))
    return (lin / lin_scale if lin_scale else lin), (dot / dot_scale if dot_scale else dot)


def run_conservation_suite(config, p, report, exploratory=False):
    m_values = p["m_values"] or [config.kernel.m]
    for ci, c in enumerate(p["configs"]):
        cfg = vd.VortexConfiguration(c["positions"], c["intensities"])
        adm = vd.validate_intensities(cfg.intensities)
        for m in m_values:
            spec = config.kernel if m == config.kernel.m else KernelSpec(m, config.kernel.regularization, config.kernel.epsilon)
            key = f"config{ci}_m{m}"
            metrics = {"n": cfg.n, "m": float(m), "admissible": adm.admissible}
            if not adm.admissible:
                metrics["violating_subset"] = list(adm.violating_subset)
                report.notes.append(f"{key}: intensities inadmissible, run flagged")
            lin0, dot0 = _rhs_identities(spec, cfg)
            try:
                rec = vd.integrate(
                    spec, cfg, float(p["t_end"]), float(p["dt"]),
                    record_every=int(p["record_every"]), collision_floor=float(p["collision_floor"]),
                )
            except CollisionError as exc:
                metrics.update({"aborted": True, "pair": list(exc.pair), "t": exc.t, "distance": exc.distance})
                report.metrics[key] = metrics
                report.verdict(f"{key}:no_collision", False)
                continue
            lin1, dot1 = _rhs_identities(spec, rec.states[-1])
            h = [d.hamiltonian for d in rec.diagnostics]
            j = [d.inertia for d in rec.diagnostics]
            cs = np.array([d.centre for d in rec.diagnostics])
            metrics.update({
                "H_rel_drift": _rel_drift(h),
                "J_rel_drift": _rel_drift(j),
                "C_abs_drift": float(np.max(np.linalg.norm(cs - cs[0], axis=1))),
                "rhs_sum_rel": max(lin0, lin1),
                "rhs_moment_rel": max(dot0, dot1),
                "min_distance_recorded": rec.min_distance() if cfg.n > 1 else math.inf,
            })
            report.metrics[key] = metrics
            report.verdict(f"{key}:H", metrics["H_rel_drift"] <= p["h_tol"])
            report.verdict(f"{key}:J", metrics["J_rel_drift"] <= p["j_tol"])
            report.verdict(f"{key}:C", metrics["C_abs_drift"] <= p["c_tol"])
            report.verdict(f"{key}:rhs_sum", metrics["rhs_sum_rel"] <= p["rhs_tol"])
            report.verdict(f"{key}:rhs_moment", metrics["rhs_moment_rel"] <= p["rhs_tol"])
            report.csv[f"conservation_{key}.csv"] = rec.to_csv()


# ---------------------------------------------------------------------------

def _blob_kernel(m, eps, factor):
    return KernelSpec(m, "cutoff", factor * eps)


def run_blob_to_point(config, p, report, exploratory=False):
    m = config.kernel.m
    gam = [float(g) for g in p["intensities"]]
    centres = np.asarray(p["centres"], float)
    t_end, dt, every = float(p["t_end"]), float(p["dt"]), int(p["record_every"])
    point = vd.integrate(KernelSpec(m), vd.VortexConfiguration(centres, gam), t_end, dt, record_every=every)
    ref = point.positions()
    report.csv["blob_to_point_points.csv"] = point.to_csv()

    errors, merged = [], False
    for i, eps in enumerate(p["eps"]):
        blobs = [
            bt.BlobSpec(tuple(c), eps, g, p["profile"], int(p["particles_per_blob"]))
            for c, g in zip(centres, gam)
        ]
        ens = bt.discretize_blobs(blobs, seed=config.seed + i, placement=p["placement"])
        run = bt.evolve(_blob_kernel(m, eps, p["cutoff_factor"]), ens, None, t_end, dt, every, deltas=(eps,))
        err = max(float(np.max(np.linalg.norm(run.centres(b) - ref[:, b], axis=1))) for b in range(len(blobs)))
        for ds in run.diagnostics:
            for a in range(len(ds)):
                for b in range(a + 1, len(ds)):
                    if math.dist(ds[a].centre, ds[b].centre) < ds[a].support_radius + ds[b].support_radius:
                        merged = True
        errors.append(err)
        report.metrics[f"eps{eps}"] = {
            "epsilon": eps,
            "kernel_cutoff": p["cutoff_factor"] * eps,
            "sup_centre_error": err,
            "max_support_radius": max(d.support_radius for ds in run.diagnostics for d in ds),
        }
        report.csv[f"blob_to_point_eps{eps}_diagnostics.csv"] = run.to_csv()[1]
        if p["write_snapshots"]:
            report.csv[f"blob_to_point_eps{eps}_particles.csv"] = run.to_csv()[0]
    ratios = [b / a if a > 0 else math.inf for a, b in zip(errors, errors[1:])]
    report.metrics["ladder"] = {"eps": list(p["eps"]), "sup_centre_error": errors, "ratios": ratios}
    if exploratory and not SQRT3 < m < 2.0:
        report.notes.append("exploratory run below sqrt(3); no clauses attached")
        return
    report.verdict("strictly_decreasing", all(b < a for a, b in zip(errors, errors[1:])))
    report.verdict(
        "ratio_bound", all(r <= p["ratio_bound"] for r in ratios),
        envelope=f"consecutive ratio <= {p['ratio_bound']} (regression envelope)",
    )
    report.verdict("no_merge", not merged)


# ---------------------------------------------------------------------------

def run_localization(config, p, report, exploratory=False):
    m = config.kernel.m
    t_end, dt, every = float(p["t_end"]), float(p["dt"]), int(p["record_every"])
    hw = float(p["audit_half_width"])
    for fname in p["fields"]:
        if fname == "zero":
            field, x0 = bt.zero_field(), np.zeros(2)
        else:
            field = bt.rotation_field(float(p["omega"]), radius_bound=hw * math.sqrt(2.0))
            x0 = np.asarray(p["offset"], float)
        audit = field.audit([-hw, -hw], [hw, hw], times=[0.0, t_end], seed=config.seed)
        report.verdict(f"{fname}:field_audit", audit["ok"])
        _, c_ref = bt.reference_centre_ode(field, x0, t_end, dt)
        c_ref = c_ref[::every] if (len(c_ref) - 1) % every == 0 else None
        scaled, cheb_ok, support, cerr, gron_ok = [], True, [], [], True
        for i, eps in enumerate(p["eps"]):
            blob = bt.BlobSpec(tuple(x0), eps, float(p["intensity"]), p["profile"], int(p["particles_per_blob"]))
            ens = bt.discretize_blob(blob, seed=config.seed + i, placement=p["placement"])
            deltas = tuple(f * eps for f in p["delta_factors"])
            run = bt.evolve(_blob_kernel(m, eps, p["cutoff_factor"]), ens, field, t_end, dt, every, deltas=deltas)
            series = run.blob_series(0)
            J = np.array([d.inertia for d in series])
            for d in series:
                for delta, md in zip(deltas, d.m_delta):
                    cheb_ok &= md <= d.inertia / delta**2
            env = J[0] * np.exp(2.0 * field.lipschitz_const * np.asarray(run.times)) * (1.0 + p["gronwall_tol"])
            gron_ok &= bool(np.all(J <= env))
            centres = np.array([d.centre for d in series])
            if c_ref is not None and len(c_ref) == len(centres):
                ce = float(np.max(np.linalg.norm(centres - c_ref, axis=1))) / eps
            else:
                ce = math.nan
            scaled.append(float(J.max()) / eps**2)
            support.append(max(d.support_radius for d in series))
            cerr.append(ce)
            report.metrics[f"{fname}:eps{eps}"] = {
                "sup_J_over_eps2": scaled[-1],
                "max_support_radius": support[-1],
                "sup_centre_error_over_eps": ce,
                "mu_delta_max": [max(d.mu_delta[k] for d in series) for k in range(len(deltas))],
            }
            report.csv[f"localization_{fname}_eps{eps}_diagnostics.csv"] = run.to_csv()[1]
            if p["write_snapshots"]:
                report.csv[f"localization_{fname}_eps{eps}_particles.csv"] = run.to_csv()[0]
        band = max(scaled) / min(scaled)
        report.metrics[f"{fname}:ladder"] = {"eps": list(p["eps"]), "sup_J_over_eps2": scaled, "band": band}
        report.verdict(f"{fname}:J_band", band <= p["band"], envelope=f"max/min <= {p['band']} (regression envelope)")
        report.verdict(f"{fname}:chebyshev", cheb_ok)
        report.verdict(f"{fname}:gronwall", gron_ok)
        report.verdict(f"{fname}:support", max(support) <= p["support_R"], envelope=f"R = {p['support_R']} (fixture)")
        report.verdict(
            f"{fname}:centre", all(c <= p["centre_C"] for c in cerr),
            envelope=f"sup|c_eps - c|/eps <= {p['centre_C']} (fixture)",
        )


# ---------------------------------------------------------------------------

def bump_grid(grid: int, radius: float):
    """Unit-mass quartic bump of the given radius sampled on cell centres of [-r, r]^2."""
    x = -radius + (2.0 * radius / grid) * (np.arange(grid) + 0.5)
    X, Y = np.meshgrid(x, x)
    rho = bt.profile_density("quartic_bump", np.hypot(X, Y) / radius) / radius**2
    cell = (2.0 * radius / grid) ** 2
    rho = rho / (rho.sum() * cell)
    return rho, (-radius, radius, -radius, radius)


def _measure_at(rec, k):
    s = rec.states[k]
    return DiscreteSignedMeasure(s.positions, s.intensities)


def run_approximation(config, p, report, exploratory=False):
    m = config.kernel.m
    rho, extent = bump_grid(int(p["grid"]), float(p["radius"]))
    t_end, dt, every = float(p["t_end"]), float(p["dt"]), int(p["record_every"])

    def evolve_measure(mu, eps):
        cfg = vd.VortexConfiguration(mu.positions, mu.weights)
        return vd.integrate(KernelSpec(m, "cutoff", eps), cfg, t_end, dt, record_every=every)

    ref_mu = discretize_measure(rho, extent, int(p["n_ref"]))
    ref = evolve_measure(ref_mu, float(p["eps_ref"]))
    sups, mass_ok = [], True
    rows = [["n", "epsilon", "t", "w1"]]
    for n, eps in zip(p["n_ladder"], p["eps_ladder"]):
        mu = discretize_measure(rho, extent, int(n))
        mass_ok &= abs(mu.positive_mass - ref_mu.positive_mass) <= 1e-12 and abs(mu.negative_mass - ref_mu.negative_mass) <= 1e-12
        rec = evolve_measure(mu, float(eps))
        dists = [w1(_measure_at(rec, k), _measure_at(ref, k)) for k in range(len(rec.times))]
        for t, d in zip(rec.times, dists):
            rows.append([str(n), _r(eps), _r(t), _r(d)])
        sups.append(max(dists))
        report.metrics[f"N{n}"] = {"atoms": len(mu), "epsilon": eps, "w1_t0": dists[0], "sup_w1": sups[-1]}
    report.metrics["ladder"] = {"n": list(p["n_ladder"]), "eps": list(p["eps_ladder"]), "sup_w1": sups, "n_ref_atoms": len(ref_mu)}
    report.csv["approximation_w1.csv"] = _csv_text(rows)
    report.verdict("mass_matching", mass_ok)
    report.verdict("non_increasing", all(b <= a for a, b in zip(sups, sups[1:])))


# ---------------------------------------------------------------------------

def _stability_pair(p, seed):
    mu = DiscreteSignedMeasure(p["positions"], p["weights"])
    if p["mode"] == "translate":
        return mu, mu.translated(p["h"])
    rng = np.random.default_rng(seed)
    return mu, DiscreteSignedMeasure(mu.positions + p["jitter"] * rng.uniform(-1, 1, mu.positions.shape), mu.weights)


def _w1_series(spec, mu, nu, t_end, dt, every):
    a = vd.integrate(spec, vd.VortexConfiguration(mu.positions, mu.weights), t_end, dt, record_every=every)
    b = vd.integrate(spec, vd.VortexConfiguration(nu.positions, nu.weights), t_end, dt, record_every=every)
    return a.times, [w1(_measure_at(a, k), _measure_at(b, k)) for k in range(len(a.times))]


def run_wasserstein_stability(config, p, report, exploratory=False):
    spec = KernelSpec(config.kernel.m, "cutoff", float(p["epsilon"]))
    mu, nu = _stability_pair(p, config.seed)
    c_eps = kernel_bounds(spec).c_eps
    t_end = float(p["t_end"])
    times, dists = _w1_series(spec, mu, nu, t_end, float(p["dt"]), int(p["record_every"]))
    d0 = dists[0]
    ratio = max(dists) / d0 if d0 > 0 else 0.0
    log_env = 2.0 * c_eps * t_end + math.log1p(p["tol"])
    st = float(p["short_t_end"])
    _, short = _w1_series(spec, mu, nu, st, st / 10.0, 1)
    short_ratio = max(short) / d0 if d0 > 0 else 1.0
    report.metrics["stability"] = {
        "c_eps": c_eps,
        "w1_initial": d0,
        "sup_w1": max(dists),
        "sup_ratio": ratio,
        "log_envelope": log_env,
        "short_horizon_ratio": short_ratio,
    }
    report.csv["wasserstein_stability.csv"] = _csv_text(
        [["t", "w1"]] + [[_r(t), _r(d)] for t, d in zip(times, dists)]
    )
    report.verdict(
        "gronwall_envelope", ratio == 0.0 or math.log(ratio) <= log_env,
        envelope=f"sup ratio <= exp(2 c_eps T) * {1 + p['tol']}",
    )
    report.verdict("short_horizon", d0 == 0.0 or abs(short_ratio - 1.0) <= p["tol"])


# ---------------------------------------------------------------------------

def batched_min_distance(spec: KernelSpec, positions, intensities, t_end: float, dt: float) -> np.ndarray:
    """RK4 for many independent small systems at once; returns min pair distance per trial.

    ``positions`` has shape (trials, N, 2).  The minimum is taken over every
    RK4 stage point and step, which is the recorded proxy for D_T.
    """
    y = np.array(positions, dtype=float)
    g = np.asarray(intensities, float)
    n = y.shape[1]
    iu, ju = np.triu_indices(n, 1)
    dmin = np.full(y.shape[0], np.inf)

    def f(yy):
        nonlocal dmin
        d = yy[:, iu, :] - yy[:, ju, :]
        r = np.hypot(d[..., 0], d[..., 1])
        dmin = np.minimum(dmin, r.min(axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            fac = np.where(r > 0.0, kernel_profile(spec, r) / r, 0.0)
        kv = np.stack([-fac * d[..., 1], fac * d[..., 0]], axis=-1)
        u = np.zeros_like(yy)
        for p_, (i, j) in enumerate(zip(iu, ju)):
            u[:, i] += g[j] * kv[:, p_]
            u[:, j] -= g[i] * kv[:, p_]
        return u

    steps = max(1, int(round(t_end / dt))) if t_end > 0 else 0
    h = t_end / steps if steps else 0.0
    f(y)
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    f(y)
    return dmin


def run_collision_statistics(config, p, report, exploratory=False):
    m = config.kernel.m
    gam = np.asarray(p["intensities"], float)
    adm = vd.validate_intensities(gam)
    report.metrics["intensities"] = {"values": gam.tolist(), "admissible": adm.admissible}
    eps = sorted(float(e) for e in p["eps"])
    rng = np.random.default_rng(config.seed)
    box = float(p["box"])
    x0 = rng.uniform(-box, box, size=(int(p["trials"]), len(gam), 2))
    # k^eps = k for r >= eps, so one run cut off at the smallest eps decides every "D < eps" event
    spec = KernelSpec(m, "cutoff", eps[0])
    dmin = batched_min_distance(spec, x0, gam, float(p["t_end"]), float(p["dt"]))
    dmin[~np.isfinite(dmin)] = 0.0
    fractions = [float(np.mean(dmin < e)) for e in eps]
    if all(f > 0 for f in fractions) and len(eps) > 1:
        slope = float(np.polyfit(np.log(eps), np.log(fractions), 1)[0])
    else:
        slope = math.nan
    report.metrics["collision"] = {
        "m": m,
        "eps": eps,
        "fractions": fractions,
        "loglog_slope": slope,
        "expected_slope": 2.0 - m,
    }
    report.csv["collision_trials.csv"] = _csv_text(
        [["trial", "min_distance"]] + [[str(i), _r(d)] for i, d in enumerate(dmin)]
    )
    report.csv["collision_fractions.csv"] = _csv_text(
        [["epsilon", "fraction"]] + [[_r(e), _r(f)] for e, f in zip(eps, fractions)]
    )
    report.verdict("monotone", all(a <= b for a, b in zip(fractions, fractions[1:])))
    report.verdict(
        "slope", math.isfinite(slope) and abs(slope - (2.0 - m)) <= p["slope_tol"],
        envelope=f"|slope - (2 - m)| <= {p['slope_tol']} (regression envelope)",
    )


RUNNERS = {
    "two_vortex": run_two_vortex,
    "conservation_suite": run_conservation_suite,
    "blob_to_point": run_blob_to_point,
    "localization": run_localization,
    "approximation": run_approximation,
    "wasserstein_stability": run_wasserstein_stability,
    "collision_statistics": run_collision_statistics,
}
