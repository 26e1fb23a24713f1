"""Command line entry point: ``cbpricer <verb> --config FILE [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, load_config
from .dynamics import MODEL_KINDS
from .pricer import feature_tag
from .validation import run_checks

VERBS = ("price", "decompose", "sensitivity", "surface", "statespace", "validate")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cbpricer", description=__doc__)
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--config", type=Path, help="INI experiment file")
    p.add_argument("--seed", type=int, help="override [grid] seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--model", choices=[*MODEL_KINDS, "all"], help="dynamics (decompose/sensitivity accept 'all')")
    p.add_argument("--features", choices=["plain", "call", "call+reset"], help="contract provisions")
    p.add_argument("--train-paths", type=int)
    p.add_argument("--test-paths", type=int)
    p.add_argument("--steps-per-year", type=int)
    p.add_argument("--full", action="store_true", help="validate at full configured size")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _apply_overrides(cfg, args):
    s = cfg.setup
    if args.seed is not None:
        s = replace(s, seed=args.seed)
    if args.train_paths:
        s = replace(s, n_train=args.train_paths)
    if args.test_paths is not None:
        s = replace(s, n_test=args.test_paths)
    if args.steps_per_year:
        s = replace(s, steps_per_year=args.steps_per_year)
    if args.features:
        s = replace(s, features=feature_tag(args.features))
    cfg.setup = s
    return cfg


def _models(cfg, args):
    if args.model == "all":
        return list(MODEL_KINDS)
    return [args.model or cfg.setup.model.kind]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.config is None:
            if args.verb != "validate":
                raise ConfigError("--config is required")
            cfg = None
        else:
            cfg = _apply_overrides(load_config(args.config), args)

        if args.verb == "validate":
            setup = cfg.setup_for(_models(cfg, args)[0]) if cfg else None
            results = run_checks(setup, quick=not args.full)
            for name, ok, detail in results:
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            return 0 if all(ok for _, ok, _ in results) else 1

        out = args.out
        if args.verb == "price":
            models = _models(cfg, args)
            rows = []
            out.mkdir(parents=True, exist_ok=True)
            for kind in models:
                setup = cfg.setup_for(kind)
                _, rep, _, _ = ex.run_price(setup)
                print(rep)
                rows.append({**rep.csv_row(), "params": setup.describe()})
                rep.losses_csv(out / f"losses_{kind}_{setup.features}.csv")
            path = ex.write_csv(rows, out / "price.csv")
        elif args.verb == "decompose":
            rows = ex.run_decomposition(cfg, _models(cfg, args))
            path = ex.write_csv(rows, out / "decomposition.csv")
            for r in rows:
                print(f"{r['model']:7s} plain {r['plain']:.3f}  call {r['call_only']:.3f}  "
                      f"call+reset {r['call_and_reset']:.3f}  call effect {r['call_effect']:+.3f}  "
                      f"reset effect {r['reset_effect']:+.3f}")
        elif args.verb == "sensitivity":
            rows = ex.run_sensitivity(cfg, _models(cfg, args))
            path = ex.write_csv(rows, out / "sensitivity.csv")
            for r in rows:
                print(f"{r['model']:7s} {r['parameter']:12s} {r['perturbation']:>6s} {r['value']:8.4f} "
                      f"{r['price']:9.3f} {r['delta_pct']:+8.3f}%")
        elif args.verb == "surface":
            if not cfg.surface:
                raise ConfigError("config has no [surface] section")
            s = cfg.surface
            rows = ex.run_surface(cfg, s["param1"], s["grid1"], s["param2"], s["grid2"], _models(cfg, args)[0])
            path = ex.write_csv(rows, out / "surface.csv")
        else:
            rows = ex.run_statespace(cfg, model=_models(cfg, args)[0])
            path = ex.write_csv(rows, out / "statespace.csv")
        print(f"wrote {path}")
        return 0
    except (ConfigError, ValueError, FloatingPointError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
