"""Contract terms, rolling-window trigger counters and payoff rules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ContractTerms:
    face_value: float = 100.0
    coupon_rate: float = 0.003
    initial_conversion_price: float = 7.45
    reset_ratio: float = 0.8
    call_ratio: float = 1.3
    reset_required_days: int = 15
    call_required_days: int = 15
    window_length: int = 30
    maturity_years: float = 6.0
    call_redemption_price: float = 100.0
    risk_free_rate: float = 0.016
    # Steps before this index never fire a trigger (counters are still kept).
    no_trigger_before: int = 0
    # Optional lower bound on a reset conversion price.
    reset_floor: float | None = None

    def __post_init__(self):
        if not 0.0 < self.reset_ratio < 1.0 < self.call_ratio:
            raise ValueError("need 0 < reset_ratio < 1 < call_ratio")
        w = self.window_length
        if w <= 0:
            raise ValueError("window_length must be positive")
        if not 0 < self.reset_required_days <= w or not 0 < self.call_required_days <= w:
            raise ValueError("required trigger days must lie in [1, window_length]")
        if self.face_value <= 0 or self.initial_conversion_price <= 0 or self.maturity_years <= 0:
            raise ValueError("face_value, initial_conversion_price and maturity_years must be positive")
        if self.call_redemption_price < 0 or self.coupon_rate < 0:
            raise ValueError("call_redemption_price and coupon_rate must be non-negative")
        if self.no_trigger_before < 0:
            raise ValueError("no_trigger_before must be non-negative")

    @property
    def conversion_ratio(self) -> float:
        return self.face_value / self.initial_conversion_price


@dataclass
class TriggerState:
    """Ring buffer over the last ``window_length`` observed prices of one path."""

    window_length: int
    buffer: np.ndarray = field(init=False)
    fill_count: int = 0
    _head: int = 0

    def __post_init__(self):
        self.buffer = np.full(self.window_length, np.nan)

    def push(self, price: float) -> None:
        self.buffer[self._head] = price
        self._head = (self._head + 1) % self.window_length
        self.fill_count = min(self.fill_count + 1, self.window_length)

    @property
    def prices(self) -> np.ndarray:
        """Stored prices, oldest first."""
        ordered = np.roll(self.buffer, -self._head)
        return ordered[~np.isnan(ordered)]


def window_counts(window: np.ndarray, conversion_price, reset_ratio: float, call_ratio: float):
    """Count reset and call qualifying observations along the last axis.

    ``window`` may contain NaN for unfilled slots; NaN never qualifies.
    ``conversion_price`` broadcasts against ``window[..., 0]``.
    """
    h = np.asarray(conversion_price, dtype=float)[..., None]
    n_reset = np.count_nonzero(window < reset_ratio * h, axis=-1)
    n_call = np.count_nonzero(window >= call_ratio * h, axis=-1)
    return n_reset, n_call


def count_triggers(ts: TriggerState, conversion_price: float, terms: ContractTerms) -> tuple[int, int]:
    """(n_reset, n_call) for the stored window against the prevailing conversion price."""
    if conversion_price <= 0:
        raise ValueError("conversion_price must be positive")
    n_reset, n_call = window_counts(ts.buffer, conversion_price, terms.reset_ratio, terms.call_ratio)
    return int(n_reset), int(n_call)


def reset_mapping(current_stock, current_H, floor_H=None):
    """New conversion price after a reset: the stock price (or floor), never above current H."""
    target = np.maximum(current_stock, 0.0 if floor_H is None else floor_H)
    out = np.minimum(target, current_H)
    return float(out) if np.ndim(out) == 0 else out


def terminal_payoff(stock, conversion_price, terms: ContractTerms):
    """max(B, B/H * S)."""
    b = terms.face_value
    return np.maximum(b, b / conversion_price * stock)


def call_region_value(conversion_value, continuation_value, call_price):
    """Holder converts or the issuer redeems at the call price if that is cheaper than continuing."""
    return np.maximum(conversion_value, np.minimum(continuation_value, call_price))
