"""Self-checks behind the ``validate`` CLI verb.

Each check returns ``(name, passed, detail)``. They are the fast cousins of
the test suite: oracle agreement, exact lattice equivalence, the one-step
contraction, the network gradient check and the risk-neutral drift of the
simulators.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from . import approximator as ann
from .config import Setup
from .contract import ContractTerms
from .dynamics import GridSpec, ModelSpec, simulate
from .lattice import SmallLattice, exact_regression_solve
from .oracles import enumerate_lattice_price, plain_gbm_closed_form
from .pricer import build_targets, forward_pass, price_contract


def gradient_check(seed: int = 0, input_dim: int = 5, width: int = 4, eps: float = 1e-5) -> float:
    """Max relative error between backprop and central differences on a small float64 network."""
    rng = np.random.default_rng(seed)
    cfg = ann.NetworkConfig(input_dim=input_dim, hidden_width=width, init_seed=seed, dtype="float64")
    net = ann.init(cfg)
    net.theta += 0.1 * rng.standard_normal(net.n_params)
    x = rng.standard_normal((16, input_dim))
    y = rng.standard_normal(16)
    _, grad = ann.loss_and_gradient(net, x, y)
    numeric = np.empty_like(grad)
    for k in range(net.n_params):
        keep = net.theta[k]
        net.theta[k] = keep + eps
        up, _ = ann.loss_and_gradient(net, x, y)
        net.theta[k] = keep - eps
        dn, _ = ann.loss_and_gradient(net, x, y)
        net.theta[k] = keep
        numeric[k] = (up - dn) / (2 * eps)
    scale = np.maximum(np.abs(grad), np.abs(numeric))
    mask = scale > 1e-8
    return float(np.max(np.abs(grad - numeric)[mask] / scale[mask]))


def contraction_violations(terms: ContractTerms, n_paths: int = 10_000, trials: int = 100,
                           seed: int = 0, slack: float = 1e-12) -> int:
    """Count paths where the target map expands the sup distance by more than e^{-rh}."""
    grid = GridSpec(52, terms.maturity_years, n_paths, seed=seed)
    paths = forward_pass(simulate(6.4, ModelSpec.gbm(0.3), grid, terms.risk_free_rate), terms)
    rng = np.random.default_rng(seed)
    disc = math.exp(-terms.risk_free_rate * paths.h)
    bad = 0
    for _ in range(trials):
        i = int(rng.integers(0, paths.n_steps))
        phi = rng.uniform(0.0, 200.0, n_paths)
        psi = phi + rng.normal(0.0, rng.uniform(0.1, 50.0), n_paths)
        gap = np.abs(build_targets(i, phi, paths, terms) - build_targets(i, psi, paths, terms))
        bad += int(np.count_nonzero(gap > disc * np.max(np.abs(phi - psi)) + slack))
    return bad


def martingale_zscores(n_paths: int = 12_000, seed: int = 0) -> dict[str, float]:
    """Worst |z| over grid times of the discounted mean stock minus S0, per model."""
    r, s0 = 0.016, 6.4
    models = {"gbm": ModelSpec.gbm(0.30), "cev": ModelSpec.cev(0.35, 0.90),
              "heston": ModelSpec.heston(0.09, 2.0, 0.09, 0.45, -0.5)}
    out = {}
    for kind, model in models.items():
        grid = GridSpec(52, 6.0, n_paths, seed=seed)
        paths = simulate(s0, model, grid, r)
        disc = paths.stock[:, 1:] * np.exp(-r * grid.times[1:])
        z = (disc.mean(axis=0) - s0) / (disc.std(axis=0, ddof=1) / math.sqrt(n_paths))
        out[kind] = float(np.max(np.abs(z)))
        if paths.variance is not None and np.any(paths.variance < 0):
            out[kind] = math.inf
    return out


def lattice_cases() -> list[tuple[str, SmallLattice, ContractTerms, bool, bool]]:
    """Small instances shared by the lattice checks (all enumerable: <= 12 steps, window <= 4)."""
    base = ContractTerms(initial_conversion_price=7.45, window_length=3, call_required_days=2,
                         reset_required_days=2, maturity_years=1.0)
    return [
        ("call 2-of-3, 4 steps", SmallLattice(7.45, 0.35, 0.016, 1.0, 4), base, False, True),
        ("call+reset 2-of-3, 8 steps", SmallLattice(6.4, 0.45, 0.016, 1.0, 8), base, True, True),
        ("call+reset 2-of-4, 12 steps", SmallLattice(7.0, 0.30, 0.016, 1.0, 12),
         replace(base, window_length=4, reset_ratio=0.9, call_ratio=1.15), True, True),
        ("plain, 10 steps", SmallLattice(6.4, 0.30, 0.016, 1.0, 10), base, False, False),
    ]


def run_checks(setup: Setup | None = None, quick: bool = True) -> list[tuple[str, bool, str]]:
    results = []

    err = gradient_check()
    results.append(("gradient check", err < 1e-4, f"max rel err {err:.2e}"))

    z = martingale_zscores(4000 if quick else 12000)
    results.append(("martingale drift", all(v < 4 for v in z.values()),
                    ", ".join(f"{k} |z|={v:.2f}" for k, v in z.items())))

    terms = setup.terms if setup else ContractTerms()
    bad = contraction_violations(terms, n_paths=2000 if quick else 10_000, trials=20 if quick else 100)
    results.append(("one-step contraction", bad == 0, f"{bad} violations"))

    for name, lat, t, reset, call in lattice_cases():
        exact = exact_regression_solve(lat, t, reset=reset, call=call)
        brute = enumerate_lattice_price(lat, t, reset=reset, call=call)
        results.append((f"lattice {name}", exact == brute, f"dp {exact:.10f} vs enum {brute:.10f}"))

    s = setup or Setup(terms=ContractTerms(), model=ModelSpec.gbm(0.30), S0=6.4)
    if s.model.kind == "gbm":
        n_train, n_test = (3000, 1000) if quick else (s.n_train, s.n_test)
        spy = 12 if quick else s.steps_per_year
        _, rep, _, _ = price_contract(s.terms, s.model, s.S0, spy, n_train, n_test,
                                      net_config=s.network, seed=s.seed, feature_name="plain")
        oracle = plain_gbm_closed_form(s.terms, s.model.sigma, s.S0, steps_per_year=spy)
        gap = abs(rep.price - oracle)
        results.append(("plain GBM vs closed form", gap <= 2 * rep.standard_error,
                        f"engine {rep.price:.3f} oracle {oracle:.3f} s.e. {rep.standard_error:.3f}"))
    return results
