"""Reference values used to cross-check the regression pricer.

* a closed form for the plain (no call, no reset) bond under GBM,
* a least-squares Monte Carlo pricer with a polynomial basis,
* brute-force enumeration of every path of a small lattice.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contract import ContractTerms, terminal_payoff
from .dynamics import PathSet
from .lattice import SmallLattice
from .pricer import PriceReport, build_targets

RIDGE_LAMBDA = 1e-8


@dataclass
class OracleReport:
    oracle: str
    value: float
    error: float = 0.0
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("oracle value must be non-negative")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(["oracle", "value", "error", *self.inputs])
            out.writerow([self.oracle, repr(self.value), repr(self.error), *self.inputs.values()])


def norm_cdf(x: float) -> float:
    """Standard normal CDF through erfc; absolute error below 1e-15."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def black_scholes_call(spot: float, strike: float, r: float, sigma: float, t: float) -> float:
    if t <= 0 or sigma <= 0:
        return max(spot - strike * math.exp(-r * max(t, 0.0)), 0.0)
    vol = sigma * math.sqrt(t)
    d1 = (math.log(spot / strike) + (r + 0.5 * sigma * sigma) * t) / vol
    d2 = d1 - vol
    return spot * norm_cdf(d1) - strike * math.exp(-r * t) * norm_cdf(d2)


def coupon_annuity(terms: ContractTerms, steps_per_year: int | None = None) -> float:
    """Present value of the coupon stream.

    ``steps_per_year=None`` gives the continuous annuity B*C*(1 - e^{-rT})/r;
    otherwise the sum of e^{-r t_i} h B C over t_i = 0, h, ..., T - h, which is
    what the backward recursion accrues.
    """
    b, c, r, t = terms.face_value, terms.coupon_rate, terms.risk_free_rate, terms.maturity_years
    if steps_per_year is None:
        return b * c * t if r == 0 else b * c * (1.0 - math.exp(-r * t)) / r
    n = int(round(steps_per_year * t))
    h = t / n
    return sum(math.exp(-r * i * h) for i in range(n)) * h * b * c


def plain_gbm_closed_form(terms: ContractTerms, sigma: float, S0: float,
                          steps_per_year: int | None = None) -> float:
    """Bond floor + coupons + B/H European calls struck at H."""
    b, h0, r, t = terms.face_value, terms.initial_conversion_price, terms.risk_free_rate, terms.maturity_years
    bond = b * math.exp(-r * t)
    option = b / h0 * black_scholes_call(S0, h0, r, sigma, t)
    return bond + coupon_annuity(terms, steps_per_year) + option


def plain_gbm_report(terms: ContractTerms, sigma: float, S0: float,
                     steps_per_year: int | None = None) -> OracleReport:
    value = plain_gbm_closed_form(terms, sigma, S0, steps_per_year)
    return OracleReport("plain_gbm_closed_form", value, 1e-8,
                        {"S0": S0, "sigma": sigma, "steps_per_year": steps_per_year or "continuous"})


def poly_basis(paths: PathSet, i: int, terms: ContractTerms, degree: int) -> np.ndarray:
    """Monomials of (S/S0, H/H0) up to total ``degree`` plus trigger indicators.

    Indicators (and their products with S/S0) enter only for degree >= 1.
    """
    s = paths.stock[:, i] / paths.stock[0, 0]
    hh = paths.conversion_price[:, i] / terms.initial_conversion_price
    cols = [s ** p * hh ** (d - p) for d in range(degree + 1) for p in range(d, -1, -1)]
    if degree >= 1:
        c = paths.call_flag[:, i].astype(float)
        rf = paths.reset_flag[:, i].astype(float)
        cols += [c, rf, c * s, rf * s]
    return np.column_stack(cols)


def least_squares(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """lstsq, falling back to a ridge solve (lambda = 1e-8) when x is rank deficient."""
    beta, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        gram = x.T @ x + RIDGE_LAMBDA * np.eye(x.shape[1])
        beta = np.linalg.solve(gram, x.T @ y)
    return beta


def lsmc_poly_price(paths: PathSet, terms: ContractTerms, degree: int = 3, model: str = "gbm",
                    feature_name: str = "call_and_reset") -> PriceReport:
    """Same backward recursion as the network pricer with polynomial regressions.

    ``paths`` must already carry the forward-pass fields. The standard error is
    that of the policy cash flows on the same paths.
    """
    if not 0 <= degree <= 4:
        raise ValueError("degree must lie in [0, 4]")
    n = paths.n_steps
    b, k = terms.face_value, terms.call_redemption_price
    disc = math.exp(-terms.risk_free_rate * paths.h)
    coupon = paths.h * b * terms.coupon_rate
    values = terminal_payoff(paths.stock[:, n], paths.conversion_price[:, n], terms)
    realized = values.copy()
    losses = [0.0] * n
    for i in range(n - 1, -1, -1):
        cont_fit = disc * values + coupon
        realized = disc * realized + coupon
        conv = b / paths.conversion_price[:, i] * paths.stock[:, i]
        live = paths.call_flag[:, i]
        convert = live & (conv >= np.minimum(cont_fit, k))
        redeemed = live & ~convert & (cont_fit > k)
        realized = np.where(convert, conv, np.where(redeemed, k, realized))

        y = build_targets(i, values, paths, terms)
        x = poly_basis(paths, i, terms, degree)
        values = x @ least_squares(x, y)
        losses[i] = float(np.mean((values - y) ** 2))
    se = float(realized.std(ddof=1) / math.sqrt(realized.size))
    return PriceReport(price=max(float(values.mean()), 0.0), standard_error=se, n_train_paths=paths.n_paths,
                       n_test_paths=0, steps=n, model=model, features=feature_name,
                       test_price=float(realized.mean()), step_losses=losses)


def enumerate_lattice_price(lattice: SmallLattice, terms: ContractTerms, reset: bool = True,
                            call: bool = True, max_steps: int = 16) -> float:
    """Value by recursion over the full (non-recombining) tree of price histories.

    Every node keeps its whole price history; nothing is shared between
    branches, so this checks the state-merging of the lattice solver.
    """
    n = lattice.n_steps
    if n > max_steps:
        raise ValueError(f"{2 ** n} leaves is too many to enumerate")
    w = terms.window_length
    q = lattice.q
    disc = math.exp(-terms.risk_free_rate * lattice.h)
    coupon = lattice.h * terms.face_value * terms.coupon_rate
    floor = 0.0 if terms.reset_floor is None else terms.reset_floor

    def node(history, h_prev):
        i = len(history) - 1
        s = lattice.price(history[-1])
        recent = [lattice.price(lv) for lv in history[-w:]]
        n_reset = len([p for p in recent if p < terms.reset_ratio * h_prev])
        n_call = len([p for p in recent if p >= terms.call_ratio * h_prev])
        may_fire = i >= terms.no_trigger_before
        is_called = call and may_fire and n_call >= terms.call_required_days
        h = h_prev
        if reset and may_fire and not is_called and n_reset >= terms.reset_required_days:
            h = min(max(s, floor), h_prev)
        conv = terms.face_value / h * s
        if i == n:
            return max(terms.face_value, conv)
        v_up = node(history + [history[-1] + 1], h)
        v_dn = node(history + [history[-1] - 1], h)
        cont = disc * (q * v_up + (1.0 - q) * v_dn) + coupon
        if is_called:
            return max(conv, min(cont, terms.call_redemption_price))
        return cont

    return node([0], float(terms.initial_conversion_price))
