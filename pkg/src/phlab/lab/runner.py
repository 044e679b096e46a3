"""Scenario execution and report assembly."""

from __future__ import annotations

import csv
import json
import math
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from . import experiments as ex
from .schema import SCHEMA_VERSION, Scenario
from .verify import Verdict, verify_discontinuity, verify_inequalities

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERDICT = 2


def clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to None, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


@dataclass
class Report:
    """Report body plus the wall-time field, which is excluded from the body."""

    body: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    wall_time: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.body.get("name", "report")

    @property
    def verdicts(self) -> list:
        return [Verdict(**v) for v in self.body.get("verdicts", [])]

    @property
    def status(self) -> str:
        return self.body["status"]

    @property
    def exit_code(self) -> int:
        return {"pass": EXIT_OK, "fail": EXIT_VERDICT}.get(self.status, EXIT_ERROR)

    def body_json(self) -> str:
        return json.dumps(self.body, sort_keys=True, indent=2) + "\n"

    def to_json(self) -> str:
        return json.dumps({**self.body, "wall_time": self.wall_time}, sort_keys=True,
                          indent=2) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.name}.json"
        path.write_text(self.to_json())
        for tname, (header, rows) in sorted(self.tables.items()):
            with open(out / f"{self.name}.{tname}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(clean(rows))
        return path


def _status(errors: bool, verdicts: list) -> str:
    if errors:
        return "error"
    return "fail" if any(v["status"] == "fail" for v in verdicts) else "pass"


def _run_one(kind, f, spec, params, seed, results, cache):
    t0 = time.perf_counter()
    try:
        if kind == "fiber_entropy":
            res, tables = ex.run_fiber_entropy(f, spec, params, seed, results, cache)
        else:
            res, tables = ex.RUNNERS[kind](f, spec, params, seed, results)
        return kind, {"status": "ok", "result": clean(res)}, tables, time.perf_counter() - t0
    except Exception as exc:  # captured into the report; the run continues
        msg = f"{type(exc).__name__}: {exc}"
        return kind, {"status": "error", "error": msg,
                      "trace": traceback.format_exc(limit=3).splitlines()[-1]}, {}, \
            time.perf_counter() - t0


def run_scenario(sc: Scenario, seed: int | None = None, threads: int = 1,
                 cache: dict | None = None) -> Report:
    """Run the experiments of a scenario stage by stage and assemble the report.

    Experiments of one stage run concurrently on ``threads`` workers; results
    are merged in a fixed order, so the report does not depend on the thread count.
    """
    seed = sc.seed if seed is None else int(seed)
    cache = {} if cache is None else cache
    t_start = time.perf_counter()
    experiments, tables, wall = {}, {}, {}
    try:
        f = ex.build_map(sc.map)
    except Exception as exc:
        body = {"schema_version": SCHEMA_VERSION, "version": __version__, "name": sc.name,
                "seed": seed, "scenario": clean(sc.to_dict()), "experiments": {},
                "verdicts": [], "status": "error",
                "error": f"{type(exc).__name__}: {exc}"}
        return Report(body, {}, {"total": time.perf_counter() - t_start})
    params = {e.kind: e.params for e in sc.experiments}
    results = {}
    for stage in ex.STAGES:
        todo = [k for k in stage if k in params]
        if not todo:
            continue
        args = [(k, f, sc.map, params[k], seed, dict(results), cache) for k in todo]
        if threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                done = list(pool.map(lambda a: _run_one(*a), args))
        else:
            done = [_run_one(*a) for a in args]
        for kind, entry, tabs, dt in done:
            experiments[kind] = entry
            wall[kind] = dt
            if entry["status"] == "ok":
                results[kind] = entry["result"]
                for tname, tab in tabs.items():
                    tables[f"{kind}.{tname}" if tname != kind else kind] = tab
    verdicts = []
    if "verify" in params:
        verdicts = [v.to_dict() for v in verify_inequalities(sc.map, results)]
        experiments["verify"] = {"status": "ok", "result": {"count": len(verdicts)}}
    errors = any(e["status"] == "error" for e in experiments.values())
    body = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "name": sc.name,
        "seed": seed,
        "scenario": clean(sc.to_dict()),
        "experiments": experiments,
        "verdicts": clean(verdicts),
        "status": _status(errors, verdicts),
    }
    wall["total"] = time.perf_counter() - t_start
    return Report(body, tables, wall)


def run_catalog(scenarios: list, seed: int | None = None, threads: int = 1) -> list:
    """Run several scenarios; with threads > 1 they run concurrently."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda sc: run_scenario(sc, seed, 1), scenarios))
    return [run_scenario(sc, seed, 1) for sc in scenarios]


def discontinuity_experiment(eps_list, c: float = 0.05, seed: int = 0,
                             eps_ladder=(0.1,), resolution=(320, 320, 20),
                             flow_time: float = 5.5) -> Report:
    """Entropy of the skew family across the saddle-node at y = 1/4.

    h(f_eps) is the maximum over the fibers above the circle fixed points of the
    entropy of the time-(1 + sin 2 pi y) map. Fibers of equal speed share one
    estimate, as do the time-1 and time-2 reference maps.
    """
    from ..torus import CircleMap, SkewProductMap, SuspensionFlow
    from .catalog import CAT

    t_start = time.perf_counter()
    eps_list = [float(e) for e in eps_list]
    if 0.0 not in eps_list or not any(e > 0 for e in eps_list) or not any(
            e < 0 for e in eps_list):
        raise ValueError("eps_list must contain 0 and values on both sides of it")
    flow = SuspensionFlow(ex.IntegerMatrix(CAT))
    circle = CircleMap(c, 0.0)
    side = circle.annihilation_side()
    cache = {}
    params = {"eps_ladder": list(eps_ladder), "resolution": list(resolution),
              "flow_time": flow_time}

    def h_time(t):
        key = (ex._speed_key(t), tuple(eps_ladder), tuple(resolution), flow_time, seed)
        if key not in cache:
            cache[key] = ex.fiber_entropy(flow, key[0], eps_ladder, resolution, flow_time, seed)
        return cache[key]

    rows, fixed_zero = [], []
    for eps in sorted(eps_list, key=lambda e: (abs(e), e)):
        f = SkewProductMap(flow, circle.with_epsilon(eps))
        res, _ = ex.run_fiber_entropy(f, {}, params, seed, {}, cache)
        fib = ex.fiber_table(f)
        if eps == 0.0:
            fixed_zero = fib
        side_name = ("critical" if eps == 0 else
                     "annihilation" if math.copysign(1, eps) == side else "creation")
        rows.append({"epsilon": eps, "side": side_name, "h_hat": res["h_hat"],
                     "fibers": [{"y": fb["y"], "speed": fb["speed"], "h_hat": fb["h_hat"]}
                                for fb in res["fibers"]]})
    g1 = h_time(1.0)
    g2 = h_time(2.0)
    verdicts = verify_discontinuity(rows, g1["h_hat"], g2["h_hat"], side, fixed_zero)
    h0 = next(r["h_hat"] for r in rows if r["epsilon"] == 0.0)
    jump = [{"epsilon": r["epsilon"], "h_f0": h0, "h_f_eps": r["h_hat"],
             "ratio": h0 / r["h_hat"] if r["h_hat"] else None}
            for r in rows if r["side"] == "annihilation"]
    body = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "name": "discontinuity",
        "seed": seed,
        "parameters": clean({"c": c, "eps_list": eps_list, **params}),
        "annihilation_side": side,
        "h_g1": g1["h_hat"],
        "h_g2": g2["h_hat"],
        "rows": clean(rows),
        "jump_table": clean(jump),
        "verdicts": clean([v.to_dict() for v in verdicts]),
    }
    body["status"] = _status(False, body["verdicts"])
    table = [(r["epsilon"], fb["y"], fb["speed"], fb["h_hat"], r["h_hat"])
             for r in rows for fb in r["fibers"]]
    tables = {"fibers": (("epsilon", "y", "speed", "h_fiber", "h_f"), table)}
    return Report(body, tables, {"total": time.perf_counter() - t_start})
