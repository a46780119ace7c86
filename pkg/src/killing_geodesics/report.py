"""Batch analyses over gallery entries and machine-readable reports.

Reports serialize to JSON with a fixed field order and floats printed
with 17 significant digits, so identical invocations are byte-identical
except for ``runtime_ms``.  Fractions are serialized as integer pairs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .critical import find_critical_orbits
from .errors import OffManifoldError, UnsupportedCapabilityError
from .flows import CurveSample, curve_to_csv, detect_period, flow, shoot_geodesic
from .gallery import GalleryEntry
from .killing import killing_residual
from .rational import approximate_closed, certify_uniform_convergence

KILLING_TOL = 1e-8


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(float(x), ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON with fixed float formatting (17 sig. digits)."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [f'{inner}"{k}": {dumps(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(rows) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            return "[]"
        rows = [f"{inner}{dumps(v, indent + 1)}" for v in items]
        return "[\n" + ",\n".join(rows) + f"\n{pad}]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


@dataclass(frozen=True, eq=False)
class AnalysisReport:
    entry_name: str
    signature: tuple
    killing_residual_max: float
    degenerate_constant: bool
    critical_orbits: list
    fiber_scan: Optional[list]
    approximation: Optional[dict]
    runtime_ms: float
    seed: int
    tolerances: dict

    def to_dict(self) -> dict:
        return {
            "entry_name": self.entry_name,
            "signature": list(self.signature),
            "killing_residual_max": self.killing_residual_max,
            "degenerate_constant": self.degenerate_constant,
            "critical_orbits": self.critical_orbits,
            "fiber_scan": self.fiber_scan,
            "approximation": self.approximation,
            "runtime_ms": self.runtime_ms,
            "seed": self.seed,
            "tolerances": self.tolerances,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict()) + "\n"


def _orbit_dicts(orbits) -> list:
    out = []
    for o in sorted(orbits, key=lambda o: o.f_value):
        out.append(
            {
                "f_value": o.f_value,
                "classification": o.classification,
                "period": o.period,
                "geodesic_residual": o.geodesic_residual,
                "representative": [float(x) for x in o.representative],
            }
        )
    return out


def _residual_max(entry: GalleryEntry, samples: int, seed: int) -> float:
    rng = np.random.default_rng(seed + 1)
    pts = entry.manifold.sample_points(rng, samples)
    return max(killing_residual(entry.metric, entry.killing, p) for p in pts)


def analyze_entry(
    entry: GalleryEntry,
    seed: int = 42,
    budget: int = 64,
    horizon: float = 50.0,
    tol_geo: float = 1e-5,
    tol_period: float = 1e-6,
    tol_ode: float = 1e-10,
    residual_samples: int = 50,
) -> AnalysisReport:
    """Killing certification + critical search + period detection."""
    t0 = time.perf_counter()
    M = entry.manifold
    g = entry.metric
    res_max = _residual_max(entry, residual_samples, seed)
    orbits = find_critical_orbits(g, entry.killing, M, budget=budget, seed=seed, horizon=horizon, tol_ode=tol_ode)
    degenerate = any(o.classification == "degenerate_constant" for o in orbits)
    fiber_scan = None
    if degenerate:
        rng = np.random.default_rng(seed + 2)
        starts = list(entry.exceptional_starts) + [M.sample_point(rng) for _ in range(8)]
        fiber_scan = []
        for p0 in starts:
            cert = detect_period(M, entry.killing, p0, min(horizon, 25.0), tol=tol_period, tol_ode=tol_ode)
            row = {
                "start": [float(x) for x in p0],
                "period": cert.period if cert else None,
            }
            if entry.orbit_coordinate is not None:
                row["orbit_coordinate"] = float(entry.orbit_coordinate(p0))
            fiber_scan.append(row)
    runtime_ms = (time.perf_counter() - t0) * 1000.0
    return AnalysisReport(
        entry_name=entry.name,
        signature=tuple(int(s) for s in g.signature),
        killing_residual_max=res_max,
        degenerate_constant=degenerate,
        critical_orbits=_orbit_dicts(orbits),
        fiber_scan=fiber_scan,
        approximation=None,
        runtime_ms=runtime_ms,
        seed=seed,
        tolerances={
            "tol_geo": tol_geo,
            "tol_period": tol_period,
            "tol_ode": tol_ode,
            "killing_residual": KILLING_TOL,
        },
    )


def approximate_entry(
    entry: GalleryEntry,
    n: int,
    seed: int = 42,
    samples: int = 500,
    budget: int = 24,
    tol_period: float = 1e-6,
    tol_ode: float = 1e-10,
) -> AnalysisReport:
    """Closed-approximation certificate plus per-approximant search."""
    t0 = time.perf_counter()
    M = entry.manifold
    g = entry.metric
    K = entry.killing
    if K.generator is None or K.basis is None:
        raise UnsupportedCapabilityError(
            f"entry {entry.name!r} carries no torus-generator coordinates"
        )
    approximants = approximate_closed(K, n, metric=g)
    if approximants:
        cert = certify_uniform_convergence(M, g, K, approximants, samples=samples, seed=seed)
        cert_dict = cert.as_dict()
    else:
        cert_dict = {"convergents": [], "gaps": [], "sup_field_gaps": [], "min_f_signs": []}
    per = []
    for field, frac in approximants:
        horizon = entry.angle_period * (frac.denominator + 1)
        orbits = find_critical_orbits(g, field, M, budget=budget, seed=seed, horizon=horizon, tol_ode=tol_ode)
        closure = detect_period(M, field, entry.probe_point, horizon, tol=tol_period, tol_ode=tol_ode)
        per.append(
            {
                "fraction": {"p": frac.numerator, "q": frac.denominator},
                "orbit_count": len(orbits),
                "closure_period": closure.period if closure else None,
            }
        )
    cert_dict["per_approximant"] = per
    res_max = _residual_max(entry, 50, seed)
    runtime_ms = (time.perf_counter() - t0) * 1000.0
    return AnalysisReport(
        entry_name=entry.name,
        signature=tuple(int(s) for s in g.signature),
        killing_residual_max=res_max,
        degenerate_constant=bool(entry.expected.get("degenerate_constant", False)),
        critical_orbits=[],
        fiber_scan=None,
        approximation=cert_dict,
        runtime_ms=runtime_ms,
        seed=seed,
        tolerances={
            "tol_period": tol_period,
            "tol_ode": tol_ode,
            "killing_residual": KILLING_TOL,
        },
    )


def trace_entry(
    entry: GalleryEntry,
    start,
    T: float,
    tol_ode: float = 1e-10,
    geodesic: bool = False,
    velocity=None,
) -> str:
    """Trace the Killing flow (or a geodesic) and return the CSV text."""
    M = entry.manifold
    start = np.asarray(start, dtype=float)
    if len(start) == M.ambient_dim // 2 and M.ambient_dim % 2 == 0:
        # complex shorthand: real parts of (z, w) pairs
        full = np.zeros(M.ambient_dim)
        full[0::2] = start
        start = full
    if M.constraint_residual(start) > 1e-6:
        raise OffManifoldError("start point too far from the manifold")
    start = M.project_point(start)
    if geodesic:
        if velocity is None:
            velocity = entry.killing(start)
        curve: CurveSample = shoot_geodesic(entry.metric, start, velocity, T, tol=tol_ode)
    else:
        curve = flow(M, entry.killing, start, T, tol=tol_ode, metric=entry.metric)
    return curve_to_csv(entry.metric, curve)
