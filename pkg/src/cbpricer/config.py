"""INI experiment configuration.

Sections: ``[experiment]`` (name, model, features), ``[contract]``
(ContractTerms fields), ``[market]`` (S0), ``[model.gbm]`` / ``[model.cev]`` /
``[model.heston]`` (parameters per dynamics), ``[grid]``, ``[network]``,
``[sweep]`` and ``[sweep.<model>]`` (comma-separated grids per parameter),
``[surface]`` and ``[statespace]``. See ``configs/*.ini`` for complete files.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .approximator import NetworkConfig
from .contract import ContractTerms
from .dynamics import MODEL_KINDS, ModelSpec
from .pricer import feature_tag

DEFAULT_MODEL_PARAMS = {
    "gbm": {"sigma": 0.30},
    "cev": {"sigma": 0.35, "gamma": 0.90},
    "heston": {"v0": 0.09, "kappa": 2.0, "theta": 0.09, "eta": 0.45, "rho": -0.50},
}

PARAM_ALIASES = {
    "a": "reset_ratio", "b": "call_ratio", "T": "maturity_years", "r": "risk_free_rate",
    "B": "face_value", "C": "coupon_rate", "H0": "initial_conversion_price", "K": "call_redemption_price",
}
_CONTRACT_FIELDS = {f.name: f.type for f in fields(ContractTerms)}
_INT_CONTRACT_FIELDS = {"reset_required_days", "call_required_days", "window_length", "no_trigger_before"}
_MODEL_FIELDS = {"sigma", "gamma", "v0", "kappa", "theta", "eta", "rho"}
_KIND_FIELDS = {kind: set(params) for kind, params in DEFAULT_MODEL_PARAMS.items()}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Setup:
    """Everything needed for one pricing run."""

    terms: ContractTerms
    model: ModelSpec
    S0: float
    steps_per_year: int = 52
    n_train: int = 12000
    n_test: int = 4000
    seed: int = 0
    antithetic: bool = False
    features: str = "call_and_reset"
    network: NetworkConfig = field(default_factory=lambda: NetworkConfig(input_dim=5))

    def describe(self) -> str:
        """Compact ``key=value`` echo of every input, used in CSV rows."""
        parts = [f"model={self.model.kind}", f"features={self.features}", f"S0={self.S0!r}"]
        parts += [f"{k}={getattr(self.model, k)!r}" for k in sorted(_MODEL_FIELDS)
                  if getattr(self.model, k) is not None]
        parts += [f"{f.name}={getattr(self.terms, f.name)!r}" for f in fields(ContractTerms)]
        parts += [f"steps_per_year={self.steps_per_year}", f"n_train={self.n_train}",
                  f"n_test={self.n_test}", f"seed={self.seed}", f"antithetic={self.antithetic}"]
        return ";".join(parts)


def canonical_param(name: str, model_kind: str) -> str:
    if name == "vol":
        return "v0" if model_kind == "heston" else "sigma"
    return PARAM_ALIASES.get(name, name)


def with_param(setup: Setup, name: str, value: float) -> Setup:
    """Copy of ``setup`` with one named input replaced."""
    key = canonical_param(name, setup.model.kind)
    if key == "S0":
        return replace(setup, S0=float(value))
    if key in _MODEL_FIELDS:
        if getattr(setup.model, key) is None:
            raise ConfigError(f"{key} is not a parameter of the {setup.model.kind} model")
        return replace(setup, model=replace(setup.model, **{key: float(value)}))
    if key in _CONTRACT_FIELDS:
        cast = int if key in _INT_CONTRACT_FIELDS else float
        return replace(setup, terms=replace(setup.terms, **{key: cast(value)}))
    raise ConfigError(f"unknown parameter {name!r}")


def _floats(text: str) -> list[float]:
    items = [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]
    if not items:
        raise ConfigError("empty value list")
    return [float(t) for t in items]


@dataclass
class ExperimentConfig:
    name: str
    setup: Setup
    model_params: dict
    sweeps: dict = field(default_factory=dict)
    sweep_labels: list[str] | None = None
    surface: dict = field(default_factory=dict)
    statespace: dict = field(default_factory=dict)
    source: str = ""

    def setup_for(self, model_kind: str | None = None, features: str | None = None) -> Setup:
        kind = (model_kind or self.setup.model.kind).lower()
        if kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model {kind!r}")
        model = ModelSpec(kind, **self.model_params[kind])
        dim = 6 if model.has_variance else 5
        return replace(self.setup, model=model, network=replace(self.setup.network, input_dim=dim),
                       features=feature_tag(features) if features else self.setup.features)

    def sweeps_for(self, model_kind: str) -> dict[str, list[float]]:
        out = dict(self.sweeps.get("", {}))
        out.update(self.sweeps.get(model_kind, {}))
        return out


def _parse_bool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


def load_config(path: str | Path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str  # keep S0 / H0 case
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    parser.read_string(text)
    return parse_config(parser, source=str(path))


def parse_config(parser: configparser.ConfigParser, source: str = "") -> ExperimentConfig:
    exp = parser["experiment"] if parser.has_section("experiment") else {}

    contract_kw = {}
    if parser.has_section("contract"):
        for key, raw in parser["contract"].items():
            key = PARAM_ALIASES.get(key, key)
            if key not in _CONTRACT_FIELDS:
                raise ConfigError(f"unknown contract field {key!r}")
            if key == "reset_floor":
                contract_kw[key] = float(raw) if raw.strip() else None
            else:
                contract_kw[key] = int(raw) if key in _INT_CONTRACT_FIELDS else float(raw)
    terms = ContractTerms(**contract_kw)

    model_params = {k: dict(v) for k, v in DEFAULT_MODEL_PARAMS.items()}
    for kind in MODEL_KINDS:
        sec = f"model.{kind}"
        if parser.has_section(sec):
            for key, raw in parser[sec].items():
                if key not in _KIND_FIELDS[kind]:
                    raise ConfigError(f"unknown {kind} parameter {key!r}")
                model_params[kind][key] = float(raw)
    kind = exp.get("model", "gbm").lower()
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model {kind!r}")

    S0 = float(parser.get("market", "S0", fallback="6.4"))
    grid = parser["grid"] if parser.has_section("grid") else {}
    net = parser["network"] if parser.has_section("network") else {}
    net_kw = {}
    for f in fields(NetworkConfig):
        if f.name in net and f.name != "input_dim":
            raw = net[f.name]
            if f.name in ("warm_start", "recenter_bias"):
                net_kw[f.name] = _parse_bool(raw)
            elif f.name == "dtype":
                net_kw[f.name] = raw.strip()
            elif f.name in ("learning_rate", "beta1", "beta2", "adam_eps"):
                net_kw[f.name] = float(raw)
            else:
                net_kw[f.name] = int(raw)
    unknown = set(net) - {f.name for f in fields(NetworkConfig)}
    if unknown:
        raise ConfigError(f"unknown network keys {sorted(unknown)}")

    setup = Setup(
        terms=terms,
        model=ModelSpec(kind, **model_params[kind]),
        S0=S0,
        steps_per_year=int(grid.get("steps_per_year", 52)),
        n_train=int(grid.get("n_train_paths", 12000)),
        n_test=int(grid.get("n_test_paths", 4000)),
        seed=int(grid.get("seed", 0)),
        antithetic=_parse_bool(grid.get("antithetic", "false")),
        features=feature_tag(exp.get("features", "call+reset")),
        network=NetworkConfig(input_dim=6 if kind == "heston" else 5, **net_kw),
    )

    sweeps: dict[str, dict[str, list[float]]] = {}
    labels = None
    for sec in parser.sections():
        if sec == "sweep" or sec.startswith("sweep."):
            scope = "" if sec == "sweep" else sec.split(".", 1)[1]
            grids = {}
            for key, raw in parser[sec].items():
                if key == "labels":
                    labels = [t.strip() for t in raw.split(",") if t.strip()]
                    continue
                grids[key] = _floats(raw)
            sweeps[scope] = grids
    for scope, grids in sweeps.items():
        for key in grids:
            try:
                with_param(setup if not scope else replace(setup, model=ModelSpec(scope, **model_params[scope])),
                           key, grids[key][0])
            except (ConfigError, TypeError) as exc:
                raise ConfigError(f"sweep parameter {key!r}: {exc}") from None

    surface = {}
    if parser.has_section("surface"):
        sec = parser["surface"]
        surface = {"param1": sec["param1"], "grid1": _floats(sec["grid1"]),
                   "param2": sec["param2"], "grid2": _floats(sec["grid2"])}
    statespace = {}
    if parser.has_section("statespace"):
        sec = parser["statespace"]
        statespace = {
            "snapshot_times": _floats(sec.get("snapshot_times", "1,2,3,4,5,5.5")),
            "n_paths": int(sec.get("n_paths", 5000)),
            "steps_per_year": int(sec.get("steps_per_year", 252)),
        }
    return ExperimentConfig(name=exp.get("name", "experiment"), setup=setup, model_params=model_params,
                            sweeps=sweeps, sweep_labels=labels, surface=surface, statespace=statespace,
                            source=source)
