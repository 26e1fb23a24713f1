"""Backward regression pricing of convertible bonds with reset and call triggers.

The forward pass walks every simulated path once, maintaining the rolling
price window, firing call/reset triggers and writing the conversion price
trajectory. The backward pass then regresses one-step targets on normalised
state features, one network per time step, starting from the terminal payoff.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import approximator as ann
from .contract import ContractTerms, call_region_value, reset_mapping, terminal_payoff, window_counts
from .dynamics import GridSpec, ModelSpec, PathSet, simulate

FEATURE_SETS = {
    "plain": (False, False),
    "call_only": (False, True),
    "call_and_reset": (True, True),
}
_FEATURE_ALIASES = {"call": "call_only", "call+reset": "call_and_reset", "reset+call": "call_and_reset"}

# Stream ids for the independent path sets derived from one seed.
TRAIN_STREAM, TEST_STREAM, SNAPSHOT_STREAM = 0, 1, 2


def feature_tag(name: str) -> str:
    tag = _FEATURE_ALIASES.get(name, name)
    if tag not in FEATURE_SETS:
        raise ValueError(f"unknown contract features {name!r}")
    return tag


def forward_pass(paths: PathSet, terms: ContractTerms, reset: bool = True, call: bool = True) -> PathSet:
    """Fill in conversion price, trigger counters and event flags along every path.

    At each step the new price enters the window, both counters are taken
    against the conversion price carried in from the previous step, and a
    call trigger pre-empts a reset. A reset moves H to the current stock
    price (never upwards); ``cumulative_resets`` counts resets that lowered H.
    """
    n, n_cols = paths.stock.shape
    w = terms.window_length
    window = np.full((n, w), np.nan)
    h_now = np.full(n, float(terms.initial_conversion_price))
    total = np.zeros(n, dtype=np.int64)

    conv_price = np.empty((n, n_cols))
    call_count = np.empty((n, n_cols), dtype=np.int64)
    reset_count = np.empty((n, n_cols), dtype=np.int64)
    cumulative = np.empty((n, n_cols), dtype=np.int64)
    call_flag = np.zeros((n, n_cols), dtype=bool)
    reset_flag = np.zeros((n, n_cols), dtype=bool)

    for i in range(n_cols):
        s = paths.stock[:, i]
        window[:, i % w] = s
        n_reset, n_call = window_counts(window, h_now, terms.reset_ratio, terms.call_ratio)
        call_count[:, i] = n_call
        reset_count[:, i] = n_reset
        if i >= terms.no_trigger_before:
            if call:
                call_flag[:, i] = n_call >= terms.call_required_days
            if reset:
                fired = (n_reset >= terms.reset_required_days) & ~call_flag[:, i]
                reset_flag[:, i] = fired
                if fired.any():
                    new_h = np.where(fired, reset_mapping(s, h_now, terms.reset_floor), h_now)
                    total += new_h < h_now
                    h_now = new_h
        conv_price[:, i] = h_now
        cumulative[:, i] = total

    return replace(paths, conversion_price=conv_price, call_count=call_count, reset_count=reset_count,
                   cumulative_resets=cumulative, call_flag=call_flag, reset_flag=reset_flag)


def features(paths: PathSet, i: int, terms: ContractTerms, s0: float | None = None,
             v0: float | None = None) -> np.ndarray:
    """Normalised state at step ``i``: S/S0, [v/v0], H/H0, t/T, call flag, reset flag."""
    s0 = paths.stock[0, 0] if s0 is None else s0
    n = paths.n_paths
    cols = [paths.stock[:, i] / s0]
    if paths.variance is not None:
        v0 = paths.variance[0, 0] if v0 is None else v0
        cols.append(paths.variance[:, i] / v0 if v0 > 0 else paths.variance[:, i])
    cols.append(paths.conversion_price[:, i] / terms.initial_conversion_price)
    cols.append(np.full(n, i / paths.n_steps))
    cols.append(paths.call_flag[:, i].astype(float))
    cols.append(paths.reset_flag[:, i].astype(float))
    return np.column_stack(cols)


def input_dim(paths: PathSet) -> int:
    return 5 if paths.variance is None else 6


def build_targets(i: int, next_values: np.ndarray, paths: PathSet, terms: ContractTerms) -> np.ndarray:
    """One-step regression targets at step ``i`` from step-(i+1) values."""
    nv = np.asarray(next_values, dtype=float)
    if not np.all(np.isfinite(nv)):
        raise ValueError("next_values contain non-finite entries")
    b = terms.face_value
    cont = np.exp(-terms.risk_free_rate * paths.h) * nv + paths.h * b * terms.coupon_rate
    conv = b / paths.conversion_price[:, i] * paths.stock[:, i]
    called = paths.call_flag[:, i]
    return np.where(called, call_region_value(conv, cont, terms.call_redemption_price), cont)


@dataclass
class PriceReport:
    price: float
    standard_error: float
    n_train_paths: int
    n_test_paths: int
    steps: int
    model: str
    features: str
    test_price: float = float("nan")
    step_losses: list[float] = field(default_factory=list)
    wall_seconds: float = 0.0

    def __post_init__(self):
        if self.price < 0 or self.standard_error < 0:
            raise ValueError("price and standard_error must be non-negative")

    CSV_FIELDS = ("model", "features", "price", "standard_error", "test_price",
                  "n_train_paths", "n_test_paths", "steps")

    def csv_row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in self.CSV_FIELDS}

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        out.writeheader()
        out.writerow(self.csv_row())
        return buf.getvalue()

    def losses_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(["step", "train_mse"])
            for i, loss in enumerate(self.step_losses):
                out.writerow([i, repr(loss)])

    def __str__(self) -> str:
        return (f"{self.model}/{self.features}: price {self.price:.3f} "
                f"(s.e. {self.standard_error:.3f}, test {self.test_price:.3f}) "
                f"paths {self.n_train_paths}/{self.n_test_paths}, {self.steps} steps")


def policy_values(networks, paths: PathSet, terms: ContractTerms, s0: float, v0: float | None = None) -> np.ndarray:
    """Discounted time-0 cash flows of each path under the fitted exercise policy.

    Where a call trigger is live the fitted continuation decides: the holder
    converts if conversion beats min(continuation, K); otherwise the issuer
    redeems at K if continuation exceeds K; otherwise the path rolls on.
    """
    n_steps = paths.n_steps
    b, k = terms.face_value, terms.call_redemption_price
    disc = np.exp(-terms.risk_free_rate * paths.h)
    coupon = paths.h * b * terms.coupon_rate
    realized = terminal_payoff(paths.stock[:, n_steps], paths.conversion_price[:, n_steps], terms)
    fitted_next = realized
    for i in range(n_steps - 1, -1, -1):
        cont_fit = disc * fitted_next + coupon
        realized = disc * realized + coupon
        conv = b / paths.conversion_price[:, i] * paths.stock[:, i]
        live = paths.call_flag[:, i]
        convert = live & (conv >= np.minimum(cont_fit, k))
        redeemed = live & ~convert & (cont_fit > k)
        realized = np.where(convert, conv, np.where(redeemed, k, realized))
        if i > 0:
            fitted_next = networks[i](features(paths, i, terms, s0, v0))
    return realized


def backward_solve(train: PathSet, terms: ContractTerms, net_config: ann.NetworkConfig,
                   test: PathSet | None = None, model: str = "gbm", feature_name: str = "call_and_reset",
                   shuffle_seed: int = 0):
    """Fit one value network per step, last step first.

    Returns ``(networks, report)``. ``networks[i]`` maps step-i features to the
    fitted value. The price is the step-0 network at the initial state; the
    standard error comes from the spread of the policy cash flows on the test
    paths (training paths if no test set is given).
    """
    started = time.perf_counter()
    n_steps = train.n_steps
    s0 = float(train.stock[0, 0])
    v0 = None if train.variance is None else float(train.variance[0, 0])
    if net_config.input_dim != input_dim(train):
        net_config = replace(net_config, input_dim=input_dim(train))

    values = terminal_payoff(train.stock[:, n_steps], train.conversion_price[:, n_steps], terms)
    y_shift = float(values.mean())
    y_scale = float(values.std()) or 1.0

    networks: list[ann.Network | None] = [None] * n_steps
    losses = [0.0] * n_steps
    net = None
    for i in range(n_steps - 1, -1, -1):
        x = features(train, i, terms, s0, v0)
        y = build_targets(i, values, train, terms)
        if net is None or not net_config.warm_start:
            net = ann.init(replace(net_config, init_seed=net_config.init_seed + i))
            net.y_shift, net.y_scale = y_shift, y_scale
        else:
            net = net.copy()
        report = ann.fit(net, x, y, net_config, shuffle_seed=shuffle_seed + i)
        losses[i] = report.final_loss
        values = ann.forward(net, x)
        networks[i] = net

    eval_paths = train if test is None else test
    x0 = features(eval_paths, 0, terms, s0, v0)
    price = float(np.mean(networks[0](x0)))
    cash = policy_values(networks, eval_paths, terms, s0, v0)
    se = float(cash.std(ddof=1) / np.sqrt(cash.size)) if cash.size > 1 else 0.0
    rep = PriceReport(
        price=max(price, 0.0), standard_error=se, n_train_paths=train.n_paths,
        n_test_paths=0 if test is None else test.n_paths, steps=n_steps, model=model,
        features=feature_name, test_price=float(cash.mean()), step_losses=losses,
        wall_seconds=time.perf_counter() - started,
    )
    return networks, rep


def price_contract(terms: ContractTerms, model: ModelSpec, S0: float, steps_per_year: int,
                   n_train: int, n_test: int, net_config: ann.NetworkConfig | None = None,
                   seed: int = 0, feature_name: str = "call_and_reset", antithetic: bool = False):
    """Simulate, run the forward pass and solve backwards; returns (networks, report, train, test)."""
    tag = feature_tag(feature_name)
    reset, call = FEATURE_SETS[tag]
    dim = 6 if model.has_variance else 5
    net_config = net_config or ann.NetworkConfig(input_dim=dim)
    sets = []
    for stream, n in ((TRAIN_STREAM, n_train), (TEST_STREAM, n_test)):
        if n <= 0:
            sets.append(None)
            continue
        grid = GridSpec(steps_per_year, terms.maturity_years, n, seed=seed, stream=stream, antithetic=antithetic)
        paths = simulate(S0, model, grid, terms.risk_free_rate)
        sets.append(forward_pass(paths, terms, reset=reset, call=call))
    train, test = sets
    networks, report = backward_solve(train, terms, net_config, test=test, model=model.kind,
                                      feature_name=tag, shuffle_seed=seed)
    return networks, report, train, test


def conversion_decisions(networks, paths: PathSet, terms: ContractTerms, step: int, s0: float,
                         v0: float | None = None) -> np.ndarray:
    """True where the holder converts at ``step``: call trigger live and conversion >= min(cont, K)."""
    if not 0 <= step < paths.n_steps:
        raise ValueError("decisions exist only before maturity")
    b = terms.face_value
    nxt = step + 1
    if nxt == paths.n_steps:
        fitted_next = terminal_payoff(paths.stock[:, nxt], paths.conversion_price[:, nxt], terms)
    else:
        fitted_next = networks[nxt](features(paths, nxt, terms, s0, v0))
    cont = np.exp(-terms.risk_free_rate * paths.h) * fitted_next + paths.h * b * terms.coupon_rate
    conv = b / paths.conversion_price[:, step] * paths.stock[:, step]
    return paths.call_flag[:, step] & (conv >= np.minimum(cont, terms.call_redemption_price))
