"""Experiment runners: price decomposition, sensitivities, surfaces, state-space slices.

Every cell of an experiment reuses the configured seed, so decomposition
columns and sweep rows are priced on the same Brownian draws.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, Setup, canonical_param, with_param
from .dynamics import GridSpec, simulate
from .pricer import FEATURE_SETS, SNAPSHOT_STREAM, PriceReport, conversion_decisions, forward_pass, price_contract

log = logging.getLogger(__name__)

DECOMPOSITION_COLUMNS = ("plain", "call_only", "call_and_reset")
MAX_SURFACE_CELLS = 2500


def run_price(setup: Setup):
    """Price one setup; returns (networks, report, train_paths, test_paths)."""
    networks, report, train, test = price_contract(
        setup.terms, setup.model, setup.S0, setup.steps_per_year, setup.n_train, setup.n_test,
        net_config=setup.network, seed=setup.seed, feature_name=setup.features, antithetic=setup.antithetic,
    )
    log.info("%s", report)
    return networks, report, train, test


def price_report(setup: Setup) -> PriceReport:
    return run_price(setup)[1]


def run_decomposition(config: ExperimentConfig, models=None, columns=DECOMPOSITION_COLUMNS) -> list[dict]:
    """One row per model: the three contract variants plus call and reset effects."""
    rows = []
    for kind in models or [config.setup.model.kind]:
        reports = [price_report(config.setup_for(kind, tag)) for tag in columns]
        plain, call_only, both = (r.price for r in reports)
        rows.append({
            "model": kind,
            "plain": plain, "plain_se": reports[0].standard_error,
            "call_only": call_only, "call_only_se": reports[1].standard_error,
            "call_and_reset": both, "call_and_reset_se": reports[2].standard_error,
            "call_effect": call_only - plain,
            "reset_effect": both - call_only,
            "columns": "/".join(columns),
            "params": config.setup_for(kind).describe(),
        })
    return rows


def _labels(values, base, given):
    if given and len(given) == len(values):
        return list(given)
    return [f"{(v / base - 1.0) * 100:+.1f}%" if base else f"{v!r}" for v in values]


def run_sensitivity(config: ExperimentConfig, models=None, params=None) -> list[dict]:
    """Reprice with one parameter moved at a time; delta_pct is relative to the baseline price."""
    rows = []
    for kind in models or [config.setup.model.kind]:
        base_setup = config.setup_for(kind)
        base = price_report(base_setup)
        sweeps = config.sweeps_for(kind)
        if not sweeps:
            raise ValueError(f"no sweep defined for model {kind}")
        for name in params or list(sweeps):
            grid = sweeps[name]
            key = canonical_param(name, kind)
            base_value = _current_value(base_setup, key)
            for label, value in zip(_labels(grid, base_value, config.sweep_labels), grid):
                cell = with_param(base_setup, key, value)
                rep = base if cell == base_setup else price_report(cell)
                rows.append({
                    "model": kind, "parameter": key, "perturbation": label, "value": value,
                    "price": rep.price, "standard_error": rep.standard_error,
                    "delta_pct": (rep.price / base.price - 1.0) * 100.0,
                    "params": cell.describe(),
                })
    return rows


def _current_value(setup: Setup, key: str) -> float:
    if key == "S0":
        return setup.S0
    if hasattr(setup.model, key) and key != "kind":
        return getattr(setup.model, key)
    return getattr(setup.terms, key)


def run_surface(config: ExperimentConfig, param1: str, grid1, param2: str, grid2, model: str | None = None) -> list[dict]:
    """Full-factorial price grid over two inputs."""
    allowed = {"S0", "sigma", "v0", "reset_ratio", "call_ratio", "maturity_years"}
    kind = model or config.setup.model.kind
    k1, k2 = canonical_param(param1, kind), canonical_param(param2, kind)
    if k1 not in allowed or k2 not in allowed:
        raise ValueError(f"surface axes must be among {sorted(allowed)}")
    if len(grid1) * len(grid2) > MAX_SURFACE_CELLS:
        raise ValueError(f"surface has more than {MAX_SURFACE_CELLS} cells")
    base = config.setup_for(kind)
    rows = []
    for v1 in grid1:
        for v2 in grid2:
            rep = price_report(with_param(with_param(base, k1, v1), k2, v2))
            rows.append({"model": kind, k1 if k1 != k2 else "p1": v1, k2 if k1 != k2 else "p2": v2,
                         "price": rep.price, "stderr": rep.standard_error})
    return rows


def run_statespace(config: ExperimentConfig, snapshot_times=None, n_paths: int | None = None,
                   steps_per_year: int | None = None, model: str | None = None) -> list[dict]:
    """Cross-sections of fresh paths: call counter, cumulative resets, S and the conversion decision."""
    opts = config.statespace
    times = list(snapshot_times or opts.get("snapshot_times", [1, 2, 3, 4, 5, 5.5]))
    n_paths = n_paths or opts.get("n_paths", 5000)
    spy = steps_per_year or opts.get("steps_per_year", 252)
    setup = replace(config.setup_for(model), steps_per_year=spy)
    T = setup.terms.maturity_years
    if any(t < 0 or t >= T for t in times):
        raise ValueError("snapshot times must lie in [0, T)")
    networks, _, train, _ = run_price(setup)
    reset, call = FEATURE_SETS[setup.features]
    grid = GridSpec(spy, T, n_paths, seed=setup.seed, stream=SNAPSHOT_STREAM, antithetic=setup.antithetic)
    paths = forward_pass(simulate(setup.S0, setup.model, grid, setup.terms.risk_free_rate), setup.terms,
                         reset=reset, call=call)
    v0 = None if paths.variance is None else float(paths.variance[0, 0])
    rows = []
    for t in times:
        step = int(round(t / grid.h))
        convert = conversion_decisions(networks, paths, setup.terms, step, setup.S0, v0)
        for p in range(n_paths):
            rows.append({
                "time": t, "step": step, "path_id": p,
                "n_call": int(paths.call_count[p, step]),
                "cumulative_resets": int(paths.cumulative_resets[p, step]),
                "S": float(paths.stock[p, step]),
                "H": float(paths.conversion_price[p, step]),
                "decision": "convert" if convert[p] else "continue",
            })
    return rows


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if rows:
            out = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            out.writeheader()
            for row in rows:
                out.writerow({k: _fmt(v) for k, v in row.items()})
    return path
