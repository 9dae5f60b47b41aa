"""Seeded experiment sweeps, per-trial metrics and CSV/JSON output.

Trial ``k`` of a sweep with master seed ``s`` uses the seed drawn from
``SeedSequence([s, k])``; that one number seeds the instance and any
randomised method, so a row can be reproduced on its own.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import affine, direct, distributed, gauss_newton, gradient_flow
from .errors import FrameSyncError
from .instances import InstanceSpec, ProblemInstance, make_instance

METHODS = ("z", "h", "gn", "affine", "euclidean", "ref", "dist-z", "dist-h", "gradflow")
CSV_HEADER = ("trial", "seed", "method", "n", "d", "sigma", "rho", "g_prime", "h", "status", "runtime_ms")
SCHEMA_VERSION = 1


@dataclass
class MethodOptions:
    epsilon: float | str = 0.01
    rounds: int = 5000
    max_iters: int = 5
    rel_tol: float = 1e-8
    flow_T: float = 10.0
    flow_h: float = 0.01
    refine: bool = True


@dataclass
class TrialResult:
    trial: int
    seed: int
    method: str
    g_prime: float | None
    h: float | None
    status: str
    runtime_ms: float
    report: direct.SyncReport | None = field(default=None, repr=False)


@dataclass
class ExperimentResult:
    spec: InstanceSpec
    method: str
    trials: list
    master_seed: int
    options: MethodOptions
    runtime_s: float = 0.0

    def values(self, key: str) -> np.ndarray:
        vals = [getattr(r, key) for r in self.trials if r.status == "ok" and getattr(r, key) is not None]
        return np.asarray(vals, dtype=float)

    def aggregates(self) -> dict:
        out = {}
        for key in ("g_prime", "h"):
            v = self.values(key)
            out[key] = ({"mean": float(v.mean()), "median": float(np.median(v)), "std": float(v.std())}
                        if v.size else {"mean": None, "median": None, "std": None})
        out["ok"] = sum(r.status == "ok" for r in self.trials)
        out["failed"] = len(self.trials) - out["ok"]
        return out

    def mean(self, key: str = "g_prime") -> float:
        v = self.values(key)
        return float(v.mean()) if v.size else float("nan")


def trial_seed(master_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([master_seed, trial]).generate_state(1)[0])


def _orthogonal(spec: InstanceSpec) -> bool:
    return spec.transform_class == "orthogonal"


def solve_instance(inst: ProblemInstance, method: str, seed: int,
                   opts: MethodOptions | None = None) -> tuple[direct.FrameSolution, float | None]:
    """Run one method on one instance; returns the frames and, where defined, the gap bound."""
    opts = opts or MethodOptions()
    spec, g, t = inst.spec, inst.graph, inst.observed
    if method in ("z", "h"):
        if _orthogonal(spec):
            raw, proj = direct.solve_orthogonal(g, t, method)
            gap = direct.gap_bound(raw, proj, g, t) if method == "h" else None
            return proj, gap
        sol = direct.solve_h(g, t) if method == "h" else direct.solve_z(g, t)
        if spec.transform_class == "euclidean":
            sol = direct.FrameSolution(affine.project_affine(sol.frames, True), sol.method)
        return sol, None
    if method == "gn":
        sol, _ = gauss_newton.run_gn(g, t, None, opts.max_iters, opts.rel_tol)
        return sol, None
    if method == "affine":
        return affine.run_affine(g, t, opts.refine, opts.max_iters, opts.rel_tol)[0], None
    if method == "euclidean":
        return affine.run_euclidean(g, t, opts.refine, opts.max_iters, opts.rel_tol)[0], None
    if method == "ref":
        return direct.reference_baseline(g, t, np.random.default_rng(seed)), None
    if method in ("dist-z", "dist-h"):
        cfg = distributed.ProtocolConfig(method[-1], opts.epsilon, opts.rounds, seed,
                                         trace_every=max(opts.rounds, 1), orthogonal=_orthogonal(spec))
        sim = distributed.init_network(g, t, cfg)
        distributed.step(sim, opts.rounds)
        return distributed.finalize(sim), None
    if method == "gradflow":
        sol, _, _ = gradient_flow.run_flow(g, t, opts.flow_T, opts.flow_h)
        raw, _ = direct.solve_orthogonal(g, t, "h")
        return sol, direct.gap_bound(raw, sol, g, t)
    raise ValueError(f"unknown method {method!r}")


def run_trial(spec: InstanceSpec, method: str, trial: int, master_seed: int,
              opts: MethodOptions | None = None) -> TrialResult:
    seed = trial_seed(master_seed, trial)
    start = time.perf_counter()
    try:
        inst = make_instance(replace(spec, seed=seed))
        sol, gap = solve_instance(inst, method, seed, opts)
        report = direct.metrics(inst.graph, inst.observed, sol)
        report.gap_h = gap
        if not np.isfinite(report.g_prime):
            raise FrameSyncError("non-finite objective")
        status, gp = "ok", report.g_prime
    except (FrameSyncError, np.linalg.LinAlgError) as exc:
        report, gap, gp, status = None, None, None, type(exc).__name__
    ms = (time.perf_counter() - start) * 1e3
    return TrialResult(trial, seed, method, gp, gap, status, ms, report)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FRAMESYNC_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(spec: InstanceSpec, method: str, trials: int, master_seed: int = 0,
                   opts: MethodOptions | None = None) -> ExperimentResult:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if trials < 0:
        raise ValueError("trials must be non-negative")
    opts = opts or MethodOptions()
    start = time.perf_counter()
    workers = min(thread_count(), max(trials, 1))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda k: run_trial(spec, method, k, master_seed, opts), range(trials)))
    else:
        rows = [run_trial(spec, method, k, master_seed, opts) for k in range(trials)]
    return ExperimentResult(spec, method, rows, master_seed, opts, time.perf_counter() - start)


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def to_csv(results: list[ExperimentResult]) -> str:
    """One row per trial, then mean/median/std rows per experiment."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for res in results:
        s = res.spec
        base = [s.n, s.d, repr(float(s.sigma)), repr(float(s.rho))]
        for r in res.trials:
            w.writerow([r.trial, r.seed, r.method] + base
                       + [_num(r.g_prime), _num(r.h), r.status, f"{r.runtime_ms:.3f}"])
        if not res.trials:
            continue
        agg = res.aggregates()
        runtimes = np.array([r.runtime_ms for r in res.trials])
        for stat, rt in (("mean", runtimes.mean()), ("median", np.median(runtimes)), ("std", runtimes.std())):
            w.writerow([stat, res.master_seed, res.method] + base
                       + [_num(agg["g_prime"][stat]), _num(agg["h"][stat]), "aggregate", f"{rt:.3f}"])
    return buf.getvalue()


def to_dict(res: ExperimentResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "spec": {k: (float(v) if isinstance(v, float) else v) for k, v in asdict(res.spec).items()},
        "method": res.method,
        "master_seed": res.master_seed,
        "options": asdict(res.options),
        "trials": [{"trial": r.trial, "seed": r.seed, "method": r.method, "g_prime": r.g_prime,
                    "h": r.h, "status": r.status, "runtime_ms": r.runtime_ms} for r in res.trials],
        "aggregates": res.aggregates(),
        "runtime_s": res.runtime_s,
    }


def to_json(results: list[ExperimentResult]) -> str:
    payload = {"schema_version": SCHEMA_VERSION, "experiments": [to_dict(r) for r in results]}
    return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def emit(results: ExperimentResult | list[ExperimentResult], fmt: str, path) -> None:
    if isinstance(results, ExperimentResult):
        results = [results]
    if fmt == "csv":
        text = to_csv(results)
    elif fmt == "json":
        text = to_json(results)
    else:
        raise ValueError("format must be 'csv' or 'json'")
    with open(path, "w", newline="") as fh:
        fh.write(text)
