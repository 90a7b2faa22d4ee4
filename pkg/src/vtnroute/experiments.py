"""Seeded experiment runner producing deterministic CSV rows.

Every random stream is derived from ``(spec.seed, point, snapshot, update)``
through ``numpy.random.SeedSequence``, so a row depends on the spec alone.
Within one update, all algorithms see the same flows: sizes and arrival
times are drawn once from a stream that no algorithm touches.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import fluid
from .baselines import bottomline, ecmp_assign, local_mst
from .cache import RoutingCache
from .embed import ConfigTask, LatencyModel, batch_latency
from .errors import InvalidParameterError, SpecValidationError
from .objective import ObjectiveConfig, score, select_best, virtual_links_for
from .search import VmPlacement, search_candidates, search_random_topology
from .simnet import (
    DEFAULT_ARRIVAL_LOAD,
    DEFAULT_RATE_UNIT,
    BackgroundConfig,
    FlowSizeDistribution,
    generate_background,
    route_on_paths,
    route_on_tree,
    simulate_fct,
    snapshot_of,
    tenant_flows,
)
from .topology import Topology, resolve_topology

EXPERIMENTS = (
    "exp1_load",
    "exp2_workload",
    "exp3_topology",
    "exp4_vtn_scale",
    "exp5_vm_count",
    "cache_size",
    "hit_ratio",
    "config_latency",
    "suboptimality",
)
FCT_EXPERIMENTS = EXPERIMENTS[:5]
ALGORITHMS = ("sys", "ecmp", "local", "bottomline")

# The factor each experiment varies, and its default values.
SWEEPS: dict[str, tuple[str, list]] = {
    "exp1_load": ("load_degree", [1, 2, 3, 4, 5, 6, 7]),
    "exp2_workload": ("workload", ["enterprise", "datamining"]),
    "exp3_topology": ("topology", ["builtin:clos", "builtin:ft8", "builtin:shortcut:ft8:16:1"]),
    "exp4_vtn_scale": ("vtn_scale", [2, 3, 4, 5, 6]),
    "exp5_vm_count": ("n_vms", [10, 20, 30, 40]),
    "cache_size": ("vtn_scale", [2, 3, 4, 5]),
    "hit_ratio": ("vtn_scale", [4]),
    "config_latency": ("tasks_per_switch", [1, 24, 96, 288, 576]),
    "suboptimality": ("load_degree", [1, 2, 3, 4, 5, 6, 7]),
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment. ``sweep`` overrides the varied factor's default values."""

    experiment: str = "exp1_load"
    topology: str = "builtin:ft8"
    load_degree: float = 3.0
    workload: str = "enterprise"
    n_vms: int = 20
    vtn_scale: int = 4
    snapshots: int = 5
    updates: int = 20
    seed: int = 0
    sweep: tuple | None = None
    rate_unit: float = DEFAULT_RATE_UNIT
    arrival_load: float = DEFAULT_ARRIVAL_LOAD
    intensity_sigma: float = 0.0
    max_utilization: float = 0.95
    k_paths: int = 4
    objective: dict = field(default_factory=dict)
    # cache / hit-ratio / latency experiments
    placements: int = 10_000
    pool_size: int = 200
    requests: int = 10_000
    window: int = 1_000
    switches: tuple = (1, 24)
    latency: dict = field(default_factory=dict)

    def __post_init__(self):
        for key in ("sweep", "switches"):
            if isinstance(getattr(self, key), list):
                object.__setattr__(self, key, tuple(getattr(self, key)))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SpecValidationError([f"unknown spec field {k!r}" for k in unknown])
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentSpec":
        return cls.from_json(Path(path).read_text())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sweep"] = list(self.sweep) if self.sweep is not None else None
        d["switches"] = list(self.switches)
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def factor(self) -> str:
        return SWEEPS[self.experiment][0]

    def sweep_values(self) -> list:
        return list(self.sweep) if self.sweep is not None else list(SWEEPS[self.experiment][1])

    def point(self, value) -> "ExperimentSpec":
        """This spec with the varied factor pinned to ``value``."""
        if self.factor == "tasks_per_switch":
            return self
        return _replace(self, **{self.factor: value})


def _replace(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    d = {f.name: getattr(spec, f.name) for f in fields(spec)}
    d.update(kw)
    return ExperimentSpec(**d)


@lru_cache(maxsize=16)
def _topology(ref: str) -> Topology:
    return resolve_topology(ref)


@lru_cache(maxsize=8)
def _workload(ref: str) -> FlowSizeDistribution:
    return FlowSizeDistribution.load(ref)


# -- validation -----------------------------------------------------------------------


def validate(spec: ExperimentSpec) -> list[str]:
    """Every problem with ``spec`` as a readable message; empty means valid."""
    errors: list[str] = []
    if spec.experiment not in EXPERIMENTS:
        return [f"unknown experiment {spec.experiment!r}; expected one of {', '.join(EXPERIMENTS)}"]
    try:
        values = spec.sweep_values()
    except TypeError:
        return ["sweep must be a list"]
    if not values:
        errors.append("sweep must not be empty")
    for name in ("snapshots", "updates", "placements", "pool_size", "requests", "window", "k_paths"):
        v = getattr(spec, name)
        if not isinstance(v, int) or v < 1:
            errors.append(f"{name} must be a positive integer (got {v!r})")
    if not isinstance(spec.seed, int) or spec.seed < 0:
        errors.append(f"seed must be a non-negative integer (got {spec.seed!r})")
    if not spec.rate_unit > 0:
        errors.append("rate_unit must be positive")
    if spec.arrival_load < 0:
        errors.append("arrival_load must be non-negative")
    if spec.intensity_sigma < 0:
        errors.append("intensity_sigma must be non-negative")
    if not 0 < spec.max_utilization <= 1:
        errors.append("max_utilization must lie in (0, 1]")
    try:
        ObjectiveConfig.from_dict(spec.objective)
    except (ValueError, TypeError) as exc:
        errors.append(f"bad objective: {exc}")
    try:
        LatencyModel.from_dict(spec.latency)
    except (ValueError, TypeError) as exc:
        errors.append(f"bad latency model: {exc}")
    if errors:
        return errors

    if spec.experiment == "config_latency":
        for n in values:
            if not isinstance(n, int) or n < 1:
                errors.append(f"tasks per switch must be a positive integer (got {n!r})")
        for s in spec.switches:
            if not isinstance(s, int) or s < 1:
                errors.append(f"switch count must be a positive integer (got {s!r})")
        return errors

    for value in values:
        errors.extend(_validate_point(spec, spec.point(value)))
    return list(dict.fromkeys(errors))


def _validate_point(spec: ExperimentSpec, p: ExperimentSpec) -> list[str]:
    errors = []
    try:
        topo = _topology(p.topology if spec.experiment not in ("cache_size", "hit_ratio") else _cache_topology(p))
    except (ValueError, OSError) as exc:
        return [f"topology {p.topology!r}: {exc}"]
    hv = len(topo.hypervisors)
    if not isinstance(p.vtn_scale, int) or p.vtn_scale < 1:
        errors.append(f"vtn_scale must be a positive integer (got {p.vtn_scale!r})")
    elif p.vtn_scale > hv:
        errors.append(f"vtn_scale {p.vtn_scale} exceeds the {hv} hypervisors of {p.topology}")
    if spec.experiment in ("cache_size", "hit_ratio"):
        if spec.experiment == "hit_ratio" and not errors:
            if math.comb(hv, p.vtn_scale) < p.pool_size:
                errors.append("pool_size exceeds the number of distinct placements")
        elif not errors and math.comb(hv, p.vtn_scale) < p.placements:
            errors.append("placements exceeds the number of distinct placements")
        return errors
    try:
        _workload(p.workload)
    except (ValueError, OSError) as exc:
        errors.append(f"workload {p.workload!r}: {exc}")
    if not isinstance(p.load_degree, (int, float)) or p.load_degree < 0:
        errors.append(f"load degree must be non-negative (got {p.load_degree!r})")
        return errors
    if p.load_degree == 0:
        errors.append("load degree 0 embeds no tenant to update")
        return errors
    if not isinstance(p.n_vms, int) or p.n_vms < 1:
        errors.append(f"n_vms must be a positive integer (got {p.n_vms!r})")
        return errors
    if errors:
        return errors
    cfg = _background_config(p, hv)
    counts = cfg.vm_counts(hv)
    if min(counts) < p.vtn_scale:
        errors.append(
            f"load {p.load_degree}:1 with {p.n_vms} VMs per tenant leaves tenants smaller than vtn_scale {p.vtn_scale}"
        )
    achieved = sum(counts) / hv
    if abs(achieved - p.load_degree) > 0.05 * p.load_degree:
        errors.append(f"load degree {p.load_degree} is not reachable on {p.topology} (best {achieved:.3f})")
    return errors


def check(spec: ExperimentSpec) -> None:
    errors = validate(spec)
    if errors:
        raise SpecValidationError(errors)


# -- FCT experiments ----------------------------------------------------------------------


def _background_config(p: ExperimentSpec, hypervisors: int) -> BackgroundConfig:
    return BackgroundConfig.for_load(
        p.load_degree,
        hypervisors,
        vms_per_tenant=p.n_vms,
        vtn_scale=p.vtn_scale,
        rate_unit=p.rate_unit,
        intensity_sigma=p.intensity_sigma,
        max_utilization=p.max_utilization,
    )


def _seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(x) for x in parts]).generate_state(1, np.uint64)[0])


def _search_fn(topo: Topology, k_paths: int):
    if topo.kind != "shortcut":
        return lambda p: search_candidates(topo, p)

    def union(p: VmPlacement):
        found = {c.links: c for c in search_candidates(topo, p)}
        for c in search_random_topology(topo, p, k_paths):
            found.setdefault(c.links, c)
        return sorted(found.values(), key=lambda c: c.sort_key)

    return union


# Stream ids mixed into the seed sequence.
_BACKGROUND, _PICK, _FLOWS, _ECMP, _BOTTOM = range(5)


def _fct_unit(args) -> dict:
    """One (point, snapshot): background plus ``updates`` routing updates."""
    p, point_idx, snap = args
    topo = _topology(p.topology)
    dist = _workload(p.workload)
    objective = ObjectiveConfig.from_dict(p.objective)
    cache = RoutingCache()
    search_fn = _search_fn(topo, p.k_paths)
    cfg = _background_config(p, len(topo.hypervisors))
    tenants, _ = generate_background(
        topo, cfg, _seed(p.seed, point_idx, snap, _BACKGROUND), search_fn=search_fn, cache=cache, objective=objective
    )
    nic = float(np.median(topo.capacities()))
    pick = np.random.default_rng(_seed(p.seed, point_idx, snap, _PICK))
    acc = {a: [0.0, 0, 0] for a in ALGORITHMS}  # fct sum, finished, starved
    false = 0
    worse = 0
    for u in range(p.updates):
        tenant = tenants[int(pick.integers(len(tenants)))]
        residual = snapshot_of(tenants, topo, p.max_utilization, exclude=tenant.id)
        candidates, _ = cache.get_or_search(tenant.placement, search_fn)
        vlinks = virtual_links_for(tenant.id, tenant.vm_hosts, objective.include_same_host)
        flows = tenant_flows(
            tenant,
            dist,
            np.random.default_rng(_seed(p.seed, point_idx, snap, u, _FLOWS)),
            arrival_load=p.arrival_load,
            nic_bps=nic,
        )
        sys_choice, sys_score = select_best(topo, candidates, vlinks, residual, objective)
        local = local_mst(topo, tenant.placement, residual)
        bottom = bottomline(candidates, _seed(p.seed, point_idx, snap, u, _BOTTOM))
        false += local.links != sys_choice.links
        worse += score(topo, local, vlinks, residual, objective) < sys_score
        routed = {
            "sys": route_on_tree(topo, flows, sys_choice),
            "ecmp": route_on_paths(flows, ecmp_assign(topo, flows, _seed(p.seed, point_idx, snap, u, _ECMP))),
            "local": route_on_tree(topo, flows, local),
            "bottomline": route_on_tree(topo, flows, bottom),
        }
        for name, fl in routed.items():
            for f in simulate_fct(topo, fl, residual):
                if math.isinf(f.fct):
                    acc[name][2] += 1
                else:
                    acc[name][0] += f.fct
                    acc[name][1] += 1
    stats = cache.stats()
    return {
        "acc": acc,
        "false": false,
        "local_better": worse,
        "updates": p.updates,
        "hits": stats.hits,
        "misses": stats.misses,
    }


def _fct_rows(spec: ExperimentSpec, workers: int) -> list[dict]:
    values = spec.sweep_values()
    units = [(spec.point(v), i, s) for i, v in enumerate(values) for s in range(spec.snapshots)]
    results = _map(_fct_unit, units, workers)
    rows = []
    for i, v in enumerate(values):
        p = spec.point(v)
        parts = [r for (_, pi, _), r in zip(units, results) if pi == i]
        acc = {a: [sum(r["acc"][a][k] for r in parts) for k in range(3)] for a in ALGORITHMS}
        mean = {a: acc[a][0] / acc[a][1] if acc[a][1] else math.nan for a in ALGORITHMS}
        updates = sum(r["updates"] for r in parts)
        hits = sum(r["hits"] for r in parts)
        misses = sum(r["misses"] for r in parts)
        row = {
            "experiment": spec.experiment,
            "point": i,
            "factor": spec.factor,
            "value": v,
            "topology": p.topology,
            "load_degree": p.load_degree,
            "workload": p.workload,
            "n_vms": p.n_vms,
            "vtn_scale": p.vtn_scale,
            "snapshots": p.snapshots,
            "updates": updates,
        }
        for a in ALGORITHMS:
            row[f"fct_{a}"] = mean[a]
        for a in ALGORITHMS:
            row[f"norm_{a}"] = mean[a] / mean["bottomline"]
        for a in ALGORITHMS:
            row[f"starved_{a}"] = acc[a][2]
        row["false_rate"] = sum(r["false"] for r in parts) / updates
        row["local_better_rate"] = sum(r["local_better"] for r in parts) / updates
        row["cache_hits"] = hits
        row["cache_misses"] = misses
        row["cache_hit_ratio"] = hits / max(1, hits + misses)
        rows.append(row)
    return rows


# -- suboptimality -------------------------------------------------------------------------


def _subopt_unit(args) -> dict:
    p, point_idx, snap = args
    topo = _topology(p.topology)
    objective = ObjectiveConfig.from_dict(p.objective)
    cache = RoutingCache()
    search_fn = _search_fn(topo, p.k_paths)
    cfg = _background_config(p, len(topo.hypervisors))
    tenants, _ = generate_background(
        topo, cfg, _seed(p.seed, point_idx, snap, _BACKGROUND), search_fn=search_fn, cache=cache, objective=objective
    )
    pick = np.random.default_rng(_seed(p.seed, point_idx, snap, _PICK))
    false = local_better = sys_better = 0
    for _ in range(p.updates):
        tenant = tenants[int(pick.integers(len(tenants)))]
        residual = snapshot_of(tenants, topo, p.max_utilization, exclude=tenant.id)
        candidates, _ = cache.get_or_search(tenant.placement, search_fn)
        vlinks = virtual_links_for(tenant.id, tenant.vm_hosts, objective.include_same_host)
        choice, s_sys = select_best(topo, candidates, vlinks, residual, objective)
        local = local_mst(topo, tenant.placement, residual)
        s_local = score(topo, local, vlinks, residual, objective)
        false += local.links != choice.links
        local_better += s_local < s_sys
        sys_better += s_sys < s_local
    return {"false": false, "local_better": local_better, "sys_better": sys_better, "updates": p.updates}


def _subopt_rows(spec: ExperimentSpec, workers: int) -> list[dict]:
    values = spec.sweep_values()
    units = [(spec.point(v), i, s) for i, v in enumerate(values) for s in range(spec.snapshots)]
    results = _map(_subopt_unit, units, workers)
    rows = []
    for i, v in enumerate(values):
        parts = [r for (_, pi, _), r in zip(units, results) if pi == i]
        n = sum(r["updates"] for r in parts)
        rows.append(
            {
                "experiment": spec.experiment,
                "point": i,
                "factor": spec.factor,
                "value": v,
                "topology": spec.topology,
                "updates": n,
                "false_rate": sum(r["false"] for r in parts) / n,
                "local_better_rate": sum(r["local_better"] for r in parts) / n,
                "sys_better_rate": sum(r["sys_better"] for r in parts) / n,
            }
        )
    return rows


# -- cache experiments ----------------------------------------------------------------------


def _cache_topology(p: ExperimentSpec) -> str:
    # the cache studies default to the larger fat-tree
    return "builtin:ft16" if p.topology == "builtin:ft8" else p.topology


def random_placements(hosts: Sequence[int], size: int, count: int, rng: np.random.Generator) -> list[VmPlacement]:
    """``count`` distinct random placements of ``size`` hypervisors."""
    seen: set[tuple[int, ...]] = set()
    out = []
    hosts = np.asarray(hosts)
    while len(out) < count:
        p = tuple(sorted(int(h) for h in rng.choice(hosts, size=size, replace=False)))
        if p not in seen:
            seen.add(p)
            out.append(VmPlacement(p))
    return out


def _cache_size_unit(args) -> list[dict]:
    p, point_idx, checkpoints = args
    ref = _cache_topology(p)
    topo = _topology(ref)
    rng = np.random.default_rng(_seed(p.seed, point_idx))
    cache = RoutingCache()
    search_fn = _search_fn(topo, p.k_paths)
    rows = []
    for n, placement in enumerate(random_placements(topo.hypervisors, p.vtn_scale, p.placements, rng), 1):
        cache.get_or_search(placement, search_fn)
        if n in checkpoints:
            rows.append(
                {
                    "experiment": "cache_size",
                    "point": point_idx,
                    "topology": ref,
                    "vtn_scale": p.vtn_scale,
                    "placements": n,
                    "entries": len(cache),
                    "memory_bytes": cache.memory_bytes(),
                    "memory_mb": cache.memory_bytes() / 1e6,
                }
            )
    return rows


def _checkpoints(total: int, step: int) -> set[int]:
    return set(range(step, total + 1, step)) | {total}


def _cache_size_rows(spec: ExperimentSpec, workers: int) -> list[dict]:
    marks = _checkpoints(spec.placements, spec.window)
    units = [(spec.point(v), i, marks) for i, v in enumerate(spec.sweep_values())]
    return [row for rows in _map(_cache_size_unit, units, workers) for row in rows]


def _hit_ratio_unit(args) -> list[dict]:
    p, point_idx = args
    ref = _cache_topology(p)
    topo = _topology(ref)
    rng = np.random.default_rng(_seed(p.seed, point_idx))
    pool = random_placements(topo.hypervisors, p.vtn_scale, p.pool_size, rng)
    cache = RoutingCache()
    search_fn = _search_fn(topo, p.k_paths)
    marks = _checkpoints(p.requests, p.window)
    rows = []
    picks = rng.integers(len(pool), size=p.requests)
    for n, idx in enumerate(picks, 1):
        cache.get_or_search(pool[int(idx)], search_fn)
        if n in marks:
            st = cache.stats()
            rows.append(
                {
                    "experiment": "hit_ratio",
                    "point": point_idx,
                    "topology": ref,
                    "vtn_scale": p.vtn_scale,
                    "pool_size": p.pool_size,
                    "requests": n,
                    "hits": st.hits,
                    "misses": st.misses,
                    "hit_ratio": st.hit_ratio,
                    "normalized_search_cost": st.searches_performed / n,
                    "memory_bytes": st.bytes,
                }
            )
    return rows


def _hit_ratio_rows(spec: ExperimentSpec, workers: int) -> list[dict]:
    units = [(spec.point(v), i) for i, v in enumerate(spec.sweep_values())]
    return [row for rows in _map(_hit_ratio_unit, units, workers) for row in rows]


# -- configuration latency --------------------------------------------------------------------


def _latency_rows(spec: ExperimentSpec) -> list[dict]:
    model = LatencyModel.from_dict(spec.latency)
    single = batch_latency([ConfigTask(0, 0, 1)], model)
    rows = []
    for i, per_switch in enumerate(spec.sweep_values()):
        for n_sw in spec.switches:
            tasks = [ConfigTask(s, t, 1) for s in range(n_sw) for t in range(per_switch)]
            lat = batch_latency(tasks, model)
            rows.append(
                {
                    "experiment": "config_latency",
                    "point": i,
                    "switches": n_sw,
                    "tasks_per_switch": per_switch,
                    "total_tasks": len(tasks),
                    "latency_s": lat,
                    "relative_to_single": lat / single,
                }
            )
    return rows


# -- driver -----------------------------------------------------------------------------------


def _map(fn, units: list, workers: int) -> list:
    if workers <= 1 or len(units) <= 1:
        return [fn(u) for u in units]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, units))


def run(spec: ExperimentSpec, workers: int = 1) -> list[dict]:
    """Validate then run ``spec``; rows come back sorted by point."""
    check(spec)
    if spec.experiment in FCT_EXPERIMENTS:
        rows = _fct_rows(spec, workers)
    elif spec.experiment == "suboptimality":
        rows = _subopt_rows(spec, workers)
    elif spec.experiment == "cache_size":
        rows = _cache_size_rows(spec, workers)
    elif spec.experiment == "hit_ratio":
        rows = _hit_ratio_rows(spec, workers)
    else:
        rows = _latency_rows(spec)
    return sorted(rows, key=lambda r: (r["point"], *(r.get(k, 0) for k in ("placements", "requests", "switches"))))


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(r[k]) for k in header])
    return buf.getvalue()


def run_to_dir(spec: ExperimentSpec, out_dir: str | Path, workers: int = 1) -> tuple[Path, Path]:
    """Run ``spec`` and write ``<experiment>.csv`` plus ``<experiment>.manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows = run(spec, workers)
    runtime = time.perf_counter() - t0
    text = rows_to_csv(rows)
    csv_path = out / f"{spec.experiment}.csv"
    csv_path.write_text(text)
    manifest = {
        "spec": spec.to_dict(),
        "seed": spec.seed,
        "spec_sha256": hashlib.sha256(spec.canonical_json().encode()).hexdigest(),
        "csv_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "rows": len(rows),
        "fluid_backend": fluid.BACKEND,
        "workers": workers,
        "runtime_s": runtime,
    }
    man_path = out / f"{spec.experiment}.manifest.json"
    man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return csv_path, man_path


def default_spec(experiment: str, **overrides) -> ExperimentSpec:
    if experiment not in EXPERIMENTS:
        raise InvalidParameterError(f"unknown experiment {experiment!r}")
    return ExperimentSpec(experiment=experiment, **overrides)
