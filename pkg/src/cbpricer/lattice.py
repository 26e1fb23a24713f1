"""Exact backward recursion on a small recombining two-point lattice.

On a lattice the conditional expectation in the one-step operator is a
two-term average, so the discrete-time value can be computed exactly by
memoising over the augmented state (step, window of lattice levels, H).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contract import ContractTerms
from .dynamics import PathSet

MAX_STATES = 1_000_000


@dataclass(frozen=True)
class SmallLattice:
    """Cox-Ross-Rubinstein style tree: S moves by u = exp(sigma sqrt(h)) or d = 1/u."""

    S0: float
    sigma: float
    r: float
    maturity_years: float
    n_steps: int

    def __post_init__(self):
        if self.S0 <= 0 or self.sigma <= 0 or self.maturity_years <= 0 or self.n_steps < 1:
            raise ValueError("invalid lattice")
        if not 0.0 < self.q < 1.0:
            raise ValueError("lattice admits arbitrage; refine the step or raise sigma")

    @property
    def h(self) -> float:
        return self.maturity_years / self.n_steps

    @property
    def up(self) -> float:
        return math.exp(self.sigma * math.sqrt(self.h))

    @property
    def down(self) -> float:
        return 1.0 / self.up

    @property
    def q(self) -> float:
        """Risk-neutral up probability."""
        return (math.exp(self.r * self.h) - self.down) / (self.up - self.down)

    def price(self, level: int) -> float:
        return self.S0 * self.up ** level

    def sample_paths(self, n_paths: int, seed: int = 0) -> PathSet:
        rng = np.random.default_rng(seed)
        steps = np.where(rng.random((n_paths, self.n_steps)) < self.q, 1, -1)
        levels = np.concatenate([np.zeros((n_paths, 1), dtype=np.int64), np.cumsum(steps, axis=1)], axis=1)
        stock = self.S0 * self.up ** levels.astype(float)
        return PathSet(stock=stock, h=self.h, meta={"model": "lattice"})


def exact_regression_solve(lattice: SmallLattice, terms: ContractTerms, reset: bool = True,
                           call: bool = True, max_states: int = MAX_STATES) -> float:
    """Discrete-time value at t=0 with exact conditional expectations.

    Trigger handling matches :func:`cbpricer.pricer.forward_pass`. Raises
    ``RuntimeError`` once more than ``max_states`` augmented states are visited.
    """
    n = lattice.n_steps
    w = terms.window_length
    a, b_ratio = terms.reset_ratio, terms.call_ratio
    face, k_call = terms.face_value, terms.call_redemption_price
    disc = math.exp(-terms.risk_free_rate * lattice.h)
    coupon = lattice.h * face * terms.coupon_rate
    q = lattice.q
    floor = 0.0 if terms.reset_floor is None else terms.reset_floor
    prices = {}
    memo: dict = {}

    def px(level):
        if level not in prices:
            prices[level] = lattice.price(level)
        return prices[level]

    def value(i, window, h_prev):
        key = (i, window, h_prev)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if len(memo) >= max_states:
            raise RuntimeError(f"lattice state space exceeds {max_states} states")
        s = px(window[-1])
        obs = [px(lv) for lv in window]
        n_reset = sum(p < a * h_prev for p in obs)
        n_call = sum(p >= b_ratio * h_prev for p in obs)
        active = i >= terms.no_trigger_before
        called = call and active and n_call >= terms.call_required_days
        h_now = h_prev
        if reset and active and not called and n_reset >= terms.reset_required_days:
            h_now = min(max(s, floor), h_prev)
        conv = face / h_now * s
        if i == n:
            out = max(face, conv)
        else:
            lv = window[-1]
            up = value(i + 1, (window + (lv + 1,))[-w:], h_now)
            dn = value(i + 1, (window + (lv - 1,))[-w:], h_now)
            cont = disc * (q * up + (1.0 - q) * dn) + coupon
            out = max(conv, min(cont, k_call)) if called else cont
        memo[key] = out
        return out

    return value(0, (0,), float(terms.initial_conversion_price))
