"""Command-line front end: audits, simulations, sweeps, and bound reports.

Configs are single JSON documents (schema below, version 1).  Every result
row carries the digest of the cell's full run configuration, and numeric CSV
fields use the shortest round-trip float representation, so repeated runs of
the same config produce byte-identical results.csv files.

Schema sketch::

    {
      "schema_version": 1,
      "kind": "simulate" | "sweep" | "audit" | "report",
      "problem":    {"kind": "two_group_quadratic", "n": 10, "f": 2, "f_hat": 3, "G": 1.0},
      "aggregator": {"kind": "cwtm", "f_hat": 3},
      "attack":     {"kind": "honest_mimic"},
      "engine":     {"T": 100, "H": 1, "schedule": {"kind": "constant", "gamma": 0.01},
                     "w0": 1.0, "kappa": 0.0},
      "grid":       {"f_hat": [2, 3, 4], "f": [2], "seeds": [0]},
      "audit":      {"n": 10, "d": 1, "subset_budget": 20000},
      "results":    "out/earlier-sweep",
      "seed": 0
    }

Exit codes: 0 success, 1 invalid config, 2 runtime failure, 3 sweep finished
with failed cells.
"""

from __future__ import annotations

import argparse
import difflib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from . import bounds
from .aggregators import AggregatorSpec
from .attacks import ATTACK_KINDS, AttackStrategy
from .engine import RunConfig, Schedule, config_digest, run
from .errors import ConfigError, ParameterError
from .problems import (
    homogeneous_quadratic_problem,
    random_quadratic_problem,
    two_group_quadratic_problem,
)

SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "run_id",
    "config_digest",
    "round",
    "grad_metric",
    "running_avg_grad",
    "loss_gap",
    "agg_deviation",
    "diverged",
)

_TOP_KEYS = {
    "schema_version", "kind", "problem", "aggregator", "attack", "engine",
    "grid", "audit", "results", "seed",
}
_PROBLEM_KEYS = {
    "two_group_quadratic": {"kind", "n", "f", "f_hat", "G"},
    "homogeneous_quadratic": {"kind", "n", "f"},
    "random_quadratic": {"kind", "n", "f", "d", "G_target", "radius", "seed"},
}
_AGG_KEYS = {"kind", "f_hat", "pre_nnm", "gm_tolerance", "gm_max_iters", "krum_squared"}
_ATTACK_KEYS = {"kind", "variance", "scale", "vector"}
_ENGINE_KEYS = {"T", "H", "schedule", "w0", "kappa"}
_SCHEDULE_KEYS = {"kind", "gamma", "beta"}
_GRID_KEYS = {"f_hat", "f", "seeds"}
_AUDIT_KEYS = {"n", "d", "subset_budget"}


@dataclass
class ExperimentConfig:
    kind: str
    normalized: dict = field(default_factory=dict)

    def serialize(self) -> str:
        return json.dumps(self.normalized, sort_keys=True, indent=2)


def _unknown_keys(section: dict, allowed: set, where: str, errors: list) -> None:
    for key in section:
        if key not in allowed:
            hint = difflib.get_close_matches(key, sorted(allowed), n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            errors.append(f"unknown key {key!r} in {where}{suffix}")


def _normalize_problem(section, errors) -> dict:
    if not isinstance(section, dict):
        errors.append("'problem' must be an object")
        return {}
    kind = section.get("kind")
    if kind not in _PROBLEM_KEYS:
        errors.append(f"problem.kind must be one of {sorted(_PROBLEM_KEYS)}, got {kind!r}")
        return {}
    _unknown_keys(section, _PROBLEM_KEYS[kind], "problem", errors)
    out = {"kind": kind, "n": section.get("n"), "f": section.get("f", 0)}
    if not isinstance(out["n"], int) or out["n"] < 1:
        errors.append("problem.n must be a positive integer")
        return out
    if not isinstance(out["f"], int) or not 0 <= out["f"] < out["n"] / 2:
        errors.append("problem.f must satisfy 0 <= f < n/2")
    if kind == "two_group_quadratic":
        out["f_hat"] = section.get("f_hat", max(out["f"], 1))
        out["G"] = float(section.get("G", 1.0))
    elif kind == "random_quadratic":
        out["d"] = section.get("d", 1)
        out["G_target"] = float(section.get("G_target", 1.0))
        out["radius"] = float(section.get("radius", 1.0))
        if "seed" in section:
            out["seed"] = section["seed"]
    return out


def _normalize_aggregator(section, n, errors, where="aggregator") -> dict:
    if not isinstance(section, dict):
        errors.append(f"'{where}' must be an object")
        return {}
    _unknown_keys(section, _AGG_KEYS, where, errors)
    kind = section.get("kind")
    if kind not in ("mean", "cwtm", "cwmed", "gm", "krum"):
        errors.append(f"{where}.kind must be one of ['mean', 'cwtm', 'cwmed', 'gm', 'krum'], got {kind!r}")
        return {}
    out = {
        "kind": kind,
        "f_hat": section.get("f_hat", 0),
        "pre_nnm": bool(section.get("pre_nnm", False)),
        "gm_tolerance": float(section.get("gm_tolerance", 1e-9)),
        "gm_max_iters": int(section.get("gm_max_iters", 500)),
        "krum_squared": bool(section.get("krum_squared", True)),
    }
    if n is not None and not 0 <= out["f_hat"] < n / 2:
        errors.append(f"{where}.f_hat violates the constraint f_hat < n/2 (f_hat={out['f_hat']}, n={n})")
    return out


def _normalize_attack(section, errors) -> dict:
    if section is None:
        section = {"kind": "honest_mimic"}
    if not isinstance(section, dict):
        errors.append("'attack' must be an object")
        return {}
    _unknown_keys(section, _ATTACK_KEYS, "attack", errors)
    kind = section.get("kind")
    if kind not in ATTACK_KINDS:
        errors.append(f"attack.kind must be one of {list(ATTACK_KINDS)}, got {kind!r}")
        return {}
    out = {
        "kind": kind,
        "variance": float(section.get("variance", 0.0)),
        "scale": float(section.get("scale", 1.0)),
        "vector": section.get("vector"),
    }
    if out["variance"] < 0:
        errors.append("attack.variance must be >= 0")
    if kind == "fixed_vector" and out["vector"] is None:
        errors.append("attack.vector is required for the fixed_vector attack")
    return out


def _normalize_engine(section, errors) -> dict:
    if section is None:
        section = {}
    if not isinstance(section, dict):
        errors.append("'engine' must be an object")
        return {}
    _unknown_keys(section, _ENGINE_KEYS, "engine", errors)
    schedule = section.get("schedule") or {"kind": "constant", "gamma": 0.01}
    if not isinstance(schedule, dict):
        errors.append("engine.schedule must be an object")
        schedule = {}
    _unknown_keys(schedule, _SCHEDULE_KEYS, "engine.schedule", errors)
    sched = {
        "kind": schedule.get("kind", "constant"),
        "gamma": float(schedule.get("gamma", 0.01)),
        "beta": float(schedule.get("beta", 0.5)),
    }
    if sched["kind"] not in ("constant", "grad_cube", "pl_power", "step_wise"):
        errors.append(f"unknown schedule kind {sched['kind']!r}")
    if sched["kind"] in ("constant", "step_wise") and sched["gamma"] <= 0:
        errors.append("engine.schedule.gamma must be positive")
    if sched["kind"] == "pl_power" and not 0 < sched["beta"] < 1:
        errors.append("engine.schedule.beta must lie in (0, 1)")
    out = {
        "T": section.get("T", 100),
        "H": section.get("H", 1),
        "schedule": sched,
        "w0": section.get("w0"),
        "kappa": float(section.get("kappa", 0.0)),
    }
    if not isinstance(out["T"], int) or out["T"] < 0:
        errors.append("engine.T must be an integer >= 0")
    if not isinstance(out["H"], int) or out["H"] < 1:
        errors.append("engine.H must be an integer >= 1")
    if isinstance(out["w0"], (int, float)):
        out["w0"] = [float(out["w0"])]
    return out


def _normalize_grid(section, base, errors) -> dict:
    if section is None:
        section = {}
    if not isinstance(section, dict):
        errors.append("'grid' must be an object")
        return {}
    _unknown_keys(section, _GRID_KEYS, "grid", errors)
    out = {
        "f_hat": section.get("f_hat", [base["aggregator"].get("f_hat", 0)]),
        "f": section.get("f", [base["problem"].get("f", 0)]),
        "seeds": section.get("seeds", [base["seed"]]),
    }
    for axis in ("f_hat", "f", "seeds"):
        if not isinstance(out[axis], list) or len(out[axis]) == 0:
            errors.append(f"grid.{axis} must be a non-empty list")
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document; raises ConfigError carrying
    every validation problem found, not just the first."""
    errors: list[str] = []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])

    _unknown_keys(raw, _TOP_KEYS, "config", errors)
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        errors.append(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    kind = raw.get("kind")
    if kind not in ("audit", "simulate", "sweep", "report"):
        errors.append(f"kind must be one of ['audit', 'simulate', 'sweep', 'report'], got {kind!r}")
        raise ConfigError(errors)

    normalized: dict = {"schema_version": SCHEMA_VERSION, "kind": kind, "seed": raw.get("seed", 0)}
    if not isinstance(normalized["seed"], int):
        errors.append("seed must be an integer")

    if kind == "report":
        results = raw.get("results")
        if not isinstance(results, str) or not results:
            errors.append("report configs need a 'results' path")
        normalized["results"] = results
        if errors:
            raise ConfigError(errors)
        return ExperimentConfig(kind=kind, normalized=normalized)

    if kind == "audit":
        section = raw.get("audit")
        if not isinstance(section, dict):
            errors.append("audit configs need an 'audit' object with the cloud shape")
            section = {}
        _unknown_keys(section, _AUDIT_KEYS, "audit", errors)
        n = section.get("n")
        if not isinstance(n, int) or n < 1:
            errors.append("audit.n must be a positive integer")
            n = None
        normalized["audit"] = {
            "n": n,
            "d": section.get("d", 1),
            "subset_budget": section.get("subset_budget", 20000),
        }
        normalized["aggregator"] = _normalize_aggregator(raw.get("aggregator"), n, errors)
        normalized["grid"] = _normalize_grid(
            raw.get("grid"),
            {"aggregator": normalized["aggregator"], "problem": {"f": 0}, "seed": normalized["seed"]},
            errors,
        )
        if n is not None:
            for f in normalized["grid"].get("f", []):
                if not (isinstance(f, int) and 0 <= f < n / 2):
                    errors.append(f"grid.f value {f!r} violates 0 <= f < n/2")
            for fh in normalized["grid"].get("f_hat", []):
                if not (isinstance(fh, int) and 0 <= fh < n / 2):
                    errors.append(f"grid.f_hat value {fh!r} violates the constraint f_hat < n/2")
        if errors:
            raise ConfigError(errors)
        return ExperimentConfig(kind=kind, normalized=normalized)

    # simulate / sweep
    normalized["problem"] = _normalize_problem(raw.get("problem"), errors)
    n = normalized["problem"].get("n")
    normalized["aggregator"] = _normalize_aggregator(raw.get("aggregator"), n, errors)
    normalized["attack"] = _normalize_attack(raw.get("attack"), errors)
    normalized["engine"] = _normalize_engine(raw.get("engine"), errors)
    if kind == "sweep":
        normalized["grid"] = _normalize_grid(raw.get("grid"), normalized, errors)
        if n is not None:
            for fh in normalized["grid"].get("f_hat", []):
                if not (isinstance(fh, int) and 0 <= fh < n / 2):
                    errors.append(f"grid.f_hat value {fh!r} violates the constraint f_hat < n/2")
            for f in normalized["grid"].get("f", []):
                if not (isinstance(f, int) and 0 <= f < n / 2):
                    errors.append(f"grid.f value {f!r} violates 0 <= f < n/2")
    elif raw.get("grid") is not None:
        errors.append("'grid' is only valid for sweep configs")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(kind=kind, normalized=normalized)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# --------------------------------------------------------------------------
# cell construction and execution

def _build_problem(pspec: dict, f: int, f_hat: int, seed: int):
    kind = pspec["kind"]
    if kind == "two_group_quadratic":
        return two_group_quadratic_problem(pspec["n"], f, f_hat, pspec["G"])
    if kind == "homogeneous_quadratic":
        return homogeneous_quadratic_problem(pspec["n"], f)
    if kind == "random_quadratic":
        return random_quadratic_problem(
            pspec["n"], f, pspec["d"], pspec["G_target"], pspec["radius"], pspec.get("seed", seed)
        )
    raise ConfigError([f"unknown problem kind {kind!r}"])


def _build_run_config(cfg: dict, f: int, f_hat: int, seed: int) -> RunConfig:
    problem = _build_problem(cfg["problem"], f, f_hat, seed)
    agg = dict(cfg["aggregator"])
    agg["f_hat"] = f_hat
    aggregator = AggregatorSpec(**agg)
    attack_spec = cfg["attack"]
    attack = AttackStrategy(
        kind=attack_spec["kind"],
        variance=attack_spec["variance"],
        scale=attack_spec["scale"],
        vector=tuple(attack_spec["vector"]) if attack_spec["vector"] is not None else None,
    )
    eng = cfg["engine"]
    schedule = Schedule(**eng["schedule"])
    w0 = eng["w0"]
    if w0 is not None and len(w0) == 1 and problem.d > 1:
        w0 = [w0[0]] * problem.d
    return RunConfig(
        problem=problem,
        aggregator=aggregator,
        attack=attack,
        T=eng["T"],
        H=eng["H"],
        schedule=schedule,
        w0=np.asarray(w0) if w0 is not None else None,
        seed=seed,
        kappa=eng["kappa"],
    )


def _cells(cfg: ExperimentConfig) -> list[tuple[int, int, int]]:
    if cfg.kind == "simulate":
        pspec = cfg.normalized["problem"]
        return [(pspec.get("f", 0), cfg.normalized["aggregator"]["f_hat"], cfg.normalized["seed"])]
    grid = cfg.normalized["grid"]
    return list(product(grid["f"], grid["f_hat"], grid["seeds"]))


def _fmt(x) -> str:
    return repr(float(x))


def _csv_rows(run_id: str, record) -> list[str]:
    rows = []
    diverged = "1" if record.diverged else "0"
    n_dev = record.agg_deviation.shape[0]
    for t in range(record.rows):
        dev = _fmt(record.agg_deviation[t]) if t < n_dev else ""
        rows.append(
            ",".join(
                (
                    run_id,
                    record.config_digest,
                    str(t),
                    _fmt(record.grad_metric[t]),
                    _fmt(record.running_avg[t]),
                    _fmt(record.loss_gap[t]),
                    dev,
                    diverged,
                )
            )
        )
    return rows


def _cell_bounds(problem, f_hat: int, eng: dict, record) -> dict:
    out = {"grad_floor": None, "gap_floor": None, "grad_ceiling": None}
    try:
        grad_floor, gap_floor = bounds.convergence_floor(
            problem.n, problem.f, f_hat, np.sqrt(problem.G2), problem.mu
        )
        out["grad_floor"] = grad_floor
        out["gap_floor"] = gap_floor
    except ParameterError:
        pass
    if eng["schedule"]["kind"] == "grad_cube" and eng["kappa"] > 0 and record.rows > 0:
        out["grad_ceiling"] = bounds.grad_ceiling(
            eng["kappa"], problem.L, eng["H"], eng["T"], float(record.loss_gap[0]), np.sqrt(problem.G2)
        )
    return out


def _run_cell(cfg: ExperimentConfig, index: int, cell: tuple[int, int, int]) -> dict:
    f, f_hat, seed = cell
    run_id = f"cell{index:04d}"
    started = time.perf_counter()
    try:
        run_config = _build_run_config(cfg.normalized, f, f_hat, seed)
    except (ConfigError, ParameterError, ValueError) as exc:
        return {
            "run_id": run_id, "f": f, "f_hat": f_hat, "seed": seed,
            "error": str(exc), "rows": [], "wall_time_ms": 0.0,
        }
    record = run(run_config)
    eng = cfg.normalized["engine"]
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    # Running average over aggregation rounds only (the final row includes
    # the terminal iterate, which the averaged bound does not cover).
    last_avg_round = min(record.rows, max(eng["T"], 1)) - 1
    summary = {
        "run_id": run_id,
        "f": f,
        "f_hat": f_hat,
        "seed": seed,
        "config_digest": record.config_digest,
        "problem": run_config.problem.descriptor,
        "aggregator": cfg.normalized["aggregator"]["kind"]
        + ("_nnm" if cfg.normalized["aggregator"]["pre_nnm"] else ""),
        "attack": cfg.normalized["attack"]["kind"],
        "constants": {
            "L": run_config.problem.L,
            "mu": run_config.problem.mu,
            "G2": run_config.problem.G2,
            "l_star": run_config.problem.l_star,
        },
        "initial": {
            "grad_metric": float(record.grad_metric[0]) if record.rows else None,
            "loss_gap": float(record.loss_gap[0]) if record.rows else None,
        },
        "terminal": {
            "grad_metric": record.final_grad_metric if record.rows else None,
            "loss_gap": record.final_loss_gap if record.rows else None,
            "running_avg_grad": float(record.running_avg[last_avg_round]) if record.rows else None,
            "rounds_recorded": record.rows,
            "diverged": record.diverged,
            "diverged_round": record.diverged_round,
        },
        "bounds": _cell_bounds(run_config.problem, f_hat, eng, record),
        "wall_time_ms": elapsed_ms,
        "rows": _csv_rows(run_id, record),
    }
    return summary


def run_sweep(cfg: ExperimentConfig, out_dir, jobs: int = 1, quiet: bool = False) -> int:
    """Execute every grid cell, streaming rows to results.csv as cells
    complete (in cell order) and writing summary.json at the end.

    Returns the number of failed cells.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = _cells(cfg)
    failures = 0
    summaries = []
    with open(out / "results.csv", "w", newline="") as sink:
        sink.write(",".join(CSV_COLUMNS) + "\n")
        sink.flush()

        def finish(result: dict) -> None:
            nonlocal failures
            if "error" in result:
                failures += 1
                if not quiet:
                    print(f"{result['run_id']}: FAILED ({result['error']})", file=sys.stderr)
            else:
                for row in result["rows"]:
                    sink.write(row + "\n")
                sink.flush()
                if not quiet:
                    term = result["terminal"]
                    grad = "n/a" if term["grad_metric"] is None else f"{term['grad_metric']:.6g}"
                    print(
                        f"{result['run_id']}: f={result['f']} f_hat={result['f_hat']} "
                        f"seed={result['seed']} grad={grad} diverged={term['diverged']}"
                    )
            rows = result.pop("rows", None)
            if rows is not None:
                result["row_count"] = len(rows)
            summaries.append(result)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                for result in pool.map(lambda item: _run_cell(cfg, *item), enumerate(cells)):
                    finish(result)
        else:
            for index, cell in enumerate(cells):
                finish(_run_cell(cfg, index, cell))

    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": cfg.kind,
        "config": cfg.normalized,
        "cells": summaries,
        "failed_cells": failures,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return failures


def run_audit(cfg: ExperimentConfig, out_dir, quiet: bool = False) -> int:
    """Audit the configured aggregator on seeded fuzz clouds over the grid."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    section = cfg.normalized["audit"]
    n, d, budget = section["n"], section["d"], section["subset_budget"]
    grid = cfg.normalized["grid"]
    agg = cfg.normalized["aggregator"]
    failures = 0
    rows = []
    for f, f_hat, seed in product(grid["f"], grid["f_hat"], grid["seeds"]):
        spec = AggregatorSpec(**{**agg, "f_hat": f_hat})
        cloud = audit_mod.random_cloud(n, d, [seed, n, d])
        try:
            result = audit_mod.empirical_kappa(spec, cloud, f, subset_budget=budget, seed=seed)
        except (ParameterError, ValueError) as exc:
            failures += 1
            if not quiet:
                print(f"audit f={f} f_hat={f_hat} seed={seed}: FAILED ({exc})", file=sys.stderr)
            continue
        row = audit_mod.to_jsonl_row(spec, n, f, result, seed)
        try:
            row["kappa_guarantee"] = bounds.kappa_guarantee(spec.name, n, f, f_hat)
        except ParameterError:
            row["kappa_guarantee"] = None
        rows.append(row)
        if not quiet:
            print(f"audit f={f} f_hat={f_hat} seed={seed}: worst_ratio={row['worst_ratio']}")
    with open(out / "audits.jsonl", "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    with open(out / "summary.json", "w") as fh:
        json.dump(
            {"schema_version": SCHEMA_VERSION, "kind": "audit", "config": cfg.normalized,
             "rows": rows, "failed_cells": failures},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    return failures


def _load_results(results_dir: Path) -> tuple[dict, list[dict]]:
    csv_path = results_dir / "results.csv"
    summary_path = results_dir / "summary.json"
    if not csv_path.exists():
        raise ConfigError([f"no results.csv under {results_dir}"])
    if not summary_path.exists():
        raise ConfigError([f"no summary.json under {results_dir}"])
    with open(summary_path) as fh:
        summary = json.load(fh)
    lines = csv_path.read_text().splitlines()
    header = lines[0].split(",") if lines else []
    for column in CSV_COLUMNS:
        if column not in header:
            raise ConfigError([f"results.csv is missing column {column!r}"])
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    return summary, rows


def _cell_bound_context(summary: dict, cell: dict) -> dict | None:
    """Full serialized bound context for one healthy cell, when its
    parameters fall in a regime the calculators cover."""
    try:
        constants = cell["constants"]
        engine = summary["config"]["engine"]
        n = cell["problem"]["n"]
        gap0 = cell["initial"]["loss_gap"]
        doc = bounds.bound_report(
            n=n, f=cell["f"], f_hat=cell["f_hat"],
            G=float(np.sqrt(constants["G2"])), mu=constants["mu"], L=constants["L"],
            H=engine["H"], T=engine["T"],
            kappa=engine["kappa"] if engine["kappa"] > 0 else None,
            loss_gap0=gap0 if gap0 is not None else 0.0,
        )
        return doc.to_json()
    except (ParameterError, KeyError, TypeError):
        return None


def report(results_dir, out_dir, quiet: bool = False) -> dict:
    """Compare each cell's measured terminal metrics against its theoretical
    floor and ceiling; writes report.txt and report.json."""
    results_dir = Path(results_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary, _rows = _load_results(results_dir)
    entries = []
    for cell in summary.get("cells", []):
        if "error" in cell:
            entries.append({"run_id": cell["run_id"], "status": "error", "error": cell["error"]})
            continue
        term = cell["terminal"]
        cell_bounds = cell["bounds"]
        entry = {
            "run_id": cell["run_id"],
            "f": cell["f"],
            "f_hat": cell["f_hat"],
            "seed": cell["seed"],
            "diverged": term["diverged"],
            "measured_grad": term["grad_metric"],
            "measured_running_avg": term["running_avg_grad"],
            "measured_gap": term["loss_gap"],
            "grad_floor": cell_bounds["grad_floor"],
            "grad_ceiling": cell_bounds["grad_ceiling"],
        }
        if term["diverged"]:
            entry["floor_ok"] = None
            entry["ceiling_ok"] = None
            entry["status"] = "diverged"
        else:
            floor = cell_bounds["grad_floor"]
            ceiling = cell_bounds["grad_ceiling"]
            entry["floor_ok"] = (
                None if floor is None else bool(term["grad_metric"] >= floor * (1.0 - 1e-9))
            )
            entry["ceiling_ok"] = (
                None if ceiling is None else bool(term["running_avg_grad"] <= ceiling)
            )
            checks = [v for v in (entry["floor_ok"], entry["ceiling_ok"]) if v is not None]
            entry["status"] = "pass" if all(checks) else "fail"
        entry["bound_context"] = _cell_bound_context(summary, cell)
        entries.append(entry)

    def cell_line(e: dict) -> str:
        if e["status"] == "error":
            return f"{e['run_id']:<10} ERROR {e['error']}"
        floor = "n/a" if e.get("grad_floor") is None or e["status"] == "diverged" else f"{e['grad_floor']:.6g}"
        ceiling = "n/a" if e.get("grad_ceiling") is None or e["status"] == "diverged" else f"{e['grad_ceiling']:.6g}"
        measured = "n/a" if e.get("measured_grad") is None else f"{e['measured_grad']:.6g}"
        return (
            f"{e['run_id']:<10} f={e['f']:<3} f_hat={e['f_hat']:<3} seed={e['seed']:<6} "
            f"floor={floor:<12} measured={measured:<12} ceiling={ceiling:<12} {e['status']}"
        )

    lines = ["bound comparison report", "=" * 88]
    lines += [cell_line(e) for e in entries]
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    doc = {"schema_version": SCHEMA_VERSION, "kind": "report", "cells": entries}
    with open(out / "report.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not quiet:
        print(text, end="")
    return doc


# --------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedrobust", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("audit", "simulate", "sweep", "report"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the JSON experiment config")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--quiet", action="store_true", help="suppress progress output")
        if name == "sweep":
            cmd.add_argument("--jobs", type=int, default=1, help="max concurrent grid cells")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if cfg.kind != args.command:
        print(f"config error: config kind {cfg.kind!r} does not match subcommand {args.command!r}", file=sys.stderr)
        return 1
    if args.seed is not None:
        cfg.normalized["seed"] = args.seed
        if "grid" in cfg.normalized:
            cfg.normalized["grid"]["seeds"] = [args.seed]
    try:
        if cfg.kind in ("simulate", "sweep"):
            jobs = getattr(args, "jobs", 1)
            failures = run_sweep(cfg, args.out, jobs=jobs, quiet=args.quiet)
            return 3 if failures else 0
        if cfg.kind == "audit":
            failures = run_audit(cfg, args.out, quiet=args.quiet)
            return 3 if failures else 0
        report(cfg.normalized["results"], args.out, quiet=args.quiet)
        return 0
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
