"""Risk-neutral path simulation under GBM, CEV and Heston dynamics.

Every path draws its normals from its own generator seeded by
``(seed, stream, path_index)``, so any single path can be regenerated on its
own and results do not depend on how paths are batched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MODEL_KINDS = ("gbm", "cev", "heston")
CEV_FLOOR = 1e-8


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    sigma: float | None = None
    gamma: float | None = None
    v0: float | None = None
    kappa: float | None = None
    theta: float | None = None
    eta: float | None = None
    rho: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.lower())
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        required = {"gbm": ("sigma",), "cev": ("sigma", "gamma"),
                    "heston": ("v0", "kappa", "theta", "eta", "rho")}[self.kind]
        for name in required:
            if getattr(self, name) is None:
                raise ValueError(f"{self.kind} model needs {name}")
        # zero volatility is allowed (deterministic limits); negative is not
        for name in ("sigma", "v0", "kappa", "theta", "eta"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.rho is not None and not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")

    @classmethod
    def gbm(cls, sigma: float) -> "ModelSpec":
        return cls("gbm", sigma=sigma)

    @classmethod
    def cev(cls, sigma: float, gamma: float) -> "ModelSpec":
        return cls("cev", sigma=sigma, gamma=gamma)

    @classmethod
    def heston(cls, v0: float, kappa: float, theta: float, eta: float, rho: float) -> "ModelSpec":
        return cls("heston", v0=v0, kappa=kappa, theta=theta, eta=eta, rho=rho)

    @property
    def has_variance(self) -> bool:
        return self.kind == "heston"


@dataclass(frozen=True)
class GridSpec:
    steps_per_year: int
    maturity_years: float
    n_paths: int
    seed: int = 0
    stream: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.steps_per_year <= 0 or self.maturity_years <= 0 or self.n_paths <= 0:
            raise ValueError("steps_per_year, maturity_years and n_paths must be positive")
        if self.n_steps < 1:
            raise ValueError("grid has no steps")

    @property
    def n_steps(self) -> int:
        return int(round(self.steps_per_year * self.maturity_years))

    @property
    def h(self) -> float:
        return self.maturity_years / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.h


@dataclass
class PathSet:
    """Simulated trajectories, one row per path and one column per grid time.

    The contract fields (conversion price, counters, flags) are filled in by
    :func:`cbpricer.pricer.forward_pass`.
    """

    stock: np.ndarray
    h: float
    variance: np.ndarray | None = None
    conversion_price: np.ndarray | None = None
    call_count: np.ndarray | None = None
    reset_count: np.ndarray | None = None
    cumulative_resets: np.ndarray | None = None
    call_flag: np.ndarray | None = None
    reset_flag: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.stock.shape[0]

    @property
    def n_steps(self) -> int:
        return self.stock.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.h

    def to_csv(self, path: str | Path) -> None:
        """One row per (path, step): path_id, step, S, v, H."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(["path_id", "step", "S", "v", "H"])
            for p in range(self.n_paths):
                for i in range(self.n_steps + 1):
                    v = "" if self.variance is None else repr(float(self.variance[p, i]))
                    hh = "" if self.conversion_price is None else repr(float(self.conversion_price[p, i]))
                    out.writerow([p, i, repr(float(self.stock[p, i])), v, hh])


def draw_normals(grid: GridSpec, n_factors: int = 1) -> np.ndarray:
    """Standard normals of shape (n_factors, n_paths, n_steps).

    Factor ``k`` of a path is drawn after factors ``< k`` from the same
    per-path generator, so factor 0 is identical whatever ``n_factors`` is.
    With antithetic sampling odd paths reuse the negated draws of their even
    neighbour.
    """
    n, m = grid.n_paths, grid.n_steps
    out = np.empty((n_factors, n, m))
    for p in range(n):
        if grid.antithetic and p % 2 == 1:
            out[:, p, :] = -out[:, p - 1, :]
            continue
        src = p - (p % 2) if grid.antithetic else p
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([grid.seed, grid.stream, src])))
        for k in range(n_factors):
            out[k, p, :] = rng.standard_normal(m)
    return out


def simulate_gbm(S0: float, model: ModelSpec, grid: GridSpec, r: float,
                 normals: np.ndarray | None = None) -> PathSet:
    """Exact log-Euler scheme."""
    if S0 <= 0:
        raise ValueError("S0 must be positive")
    if model.kind != "gbm":
        raise ValueError("simulate_gbm needs a GBM model")
    z = draw_normals(grid)[0] if normals is None else normals
    h, sig = grid.h, model.sigma
    log_inc = (r - 0.5 * sig * sig) * h + sig * np.sqrt(h) * z
    stock = np.empty((grid.n_paths, grid.n_steps + 1))
    stock[:, 0] = S0
    stock[:, 1:] = S0 * np.exp(np.cumsum(log_inc, axis=1))
    return PathSet(stock=stock, h=h, meta={"model": "gbm"})


def simulate_cev(S0: float, model: ModelSpec, grid: GridSpec, r: float,
                 normals: np.ndarray | None = None) -> PathSet:
    """Euler-Maruyama with an absorbing floor at ``CEV_FLOOR``."""
    if S0 <= 0:
        raise ValueError("S0 must be positive")
    if model.kind != "cev":
        raise ValueError("simulate_cev needs a CEV model")
    z = draw_normals(grid)[0] if normals is None else normals
    h, sig, gam = grid.h, model.sigma, model.gamma
    sqh = np.sqrt(h)
    stock = np.empty((grid.n_paths, grid.n_steps + 1))
    stock[:, 0] = S0
    s = stock[:, 0].copy()
    for i in range(grid.n_steps):
        s = s + r * s * h + sig * s ** gam * sqh * z[:, i]
        np.maximum(s, CEV_FLOOR, out=s)
        stock[:, i + 1] = s
    return PathSet(stock=stock, h=h, meta={"model": "cev"})


def simulate_heston(S0: float, model: ModelSpec, grid: GridSpec, r: float,
                    normals: np.ndarray | None = None) -> PathSet:
    """Full-truncation Euler for the variance, log-Euler for the stock.

    The raw Euler variance may dip below zero between steps; only its positive
    part enters drift and diffusion, and the stored variance is that positive part.
    """
    if S0 <= 0:
        raise ValueError("S0 must be positive")
    if model.kind != "heston":
        raise ValueError("simulate_heston needs a Heston model")
    z = draw_normals(grid, 2) if normals is None else normals
    z_s = z[0]
    z_v = model.rho * z[0] + np.sqrt(1.0 - model.rho ** 2) * z[1]
    h = grid.h
    sqh = np.sqrt(h)
    n, m = grid.n_paths, grid.n_steps
    stock = np.empty((n, m + 1))
    var = np.empty((n, m + 1))
    stock[:, 0] = S0
    var[:, 0] = model.v0
    log_s = np.full(n, np.log(S0))
    v = np.full(n, float(model.v0))
    for i in range(m):
        vp = np.maximum(v, 0.0)
        vol = np.sqrt(vp)
        log_s = log_s + (r - 0.5 * vp) * h + vol * sqh * z_s[:, i]
        v = v + model.kappa * (model.theta - vp) * h + model.eta * vol * sqh * z_v[:, i]
        stock[:, i + 1] = np.exp(log_s)
        var[:, i + 1] = np.maximum(v, 0.0)
    return PathSet(stock=stock, h=h, variance=var, meta={"model": "heston"})


_SIMULATORS = {"gbm": simulate_gbm, "cev": simulate_cev, "heston": simulate_heston}


def simulate(S0: float, model: ModelSpec, grid: GridSpec, r: float) -> PathSet:
    return _SIMULATORS[model.kind](S0, model, grid, r)
