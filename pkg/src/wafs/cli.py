"""Command-line front end: ``wafs <command> [options]``.

Commands: synth, select, train, attack, curve, compare.  Every command takes
``--config FILE.json`` (keys are option names with dashes replaced by
underscores; explicit flags win) and writes its resolved configuration to
``<out>/config.json``.  Exit codes: 0 success, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import derive_seed
from .classifier import FORMAT_VERSION, TrainConfig, grid_search, load_model, make_grid, save_model, train
from .data import (DENSE_CSV, SPARSE, Dataset, FeatureMask, apply_mask, cap_and_normalize, load_dataset,
                   save_domains, stratified_folds, synth_robust_fragile, synth_two_gaussians, write_dataset)
from .evasion import (DISTANCES, L1, AttackSpec, SolverParams, budgeted_attack, discrete_min_cost_evasion,
                      min_cost_evasion, natural_distance)
from .metrics import calibrate_threshold, metrics_report, model_inputs, write_json
from .selection import BACKWARD, FORWARD, SelectionConfig, read_mask, traditional_wrapper, wafs, write_mask
from .seceval import AttackScenario, compare_selectors, security_evaluation, write_curves_csv

TRACE_FORMAT_VERSION = 1


class UsageError(Exception):
    pass


def parse_budgets(text: str) -> list[float]:
    """``a:b:step`` (inclusive), ``a:b/n`` (n evenly spaced points) or ``v1,v2,...``."""
    text = str(text).strip()
    try:
        if ":" not in text:
            vals = [float(v) for v in text.split(",") if v.strip()]
        elif "/" in text:
            rng, n = text.split("/")
            a, b = (float(v) for v in rng.split(":"))
            n = int(n)
            if n < 1:
                raise ValueError
            vals = [a] if n == 1 else [a + (b - a) * i / (n - 1) for i in range(n)]
        else:
            a, b, step = (float(v) for v in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            count = int(math.floor((b - a) / step + 1e-9))
            vals = [round(a + i * step, 12) for i in range(count + 1)]
    except ValueError:
        raise UsageError(f"cannot parse budgets {text!r}; use start:stop:step, start:stop/n or a list") from None
    if not vals or vals[0] < 0 or any(y < x for x, y in zip(vals, vals[1:])):
        raise UsageError("budgets must be non-empty, non-negative and ascending")
    return vals


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


# ------------------------------------------------------------------ parser


def _add_common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--config", help="JSON file with option values (flags override)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", required=out_required, help="output directory")


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--format", choices=[DENSE_CSV, SPARSE], default=DENSE_CSV)
    p.add_argument("--domains", help="domain spec JSON (default: inferred)")
    p.add_argument("--n-features", type=int, help="dimension for the sparse format")
    p.add_argument("--cap", type=float, help="cap and normalize features to [0, 1]")


def _add_train(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", choices=["linear", "rbf"], default="linear")
    p.add_argument("--C", dest="C", default="1", help="comma-separated C grid")
    p.add_argument("--gamma", default="1", help="comma-separated gamma grid (rbf)")
    p.add_argument("--tolerance", type=float, default=1e-3)


def _add_attack(p: argparse.ArgumentParser, default_distance: str = L1) -> None:
    p.add_argument("--distance", choices=list(DISTANCES), default=default_distance)
    p.add_argument("--monotone", action="store_true", help="features may only increase")
    p.add_argument("--step-size", type=float, default=0.01)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--top-k", type=int, default=10)


def _add_selection(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=["wafs", "traditional"], default="wafs")
    p.add_argument("--direction", choices=[FORWARD, BACKWARD], default=FORWARD)
    p.add_argument("--m", type=int, required=True, help="target subset size")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--inner-folds", type=int, default=5)
    p.add_argument("--g-measure", choices=["accuracy", "tp_at_fp"], default="accuracy")
    p.add_argument("--attack-fp-rate", type=float, help="attack the threshold at this FP rate (default: g=0)")
    p.add_argument("--reuse-hyperparams", action="store_true")
    p.add_argument("--inequality", action="store_true", help="best prefix of size <= m (forward only)")


def _add_scenario(p: argparse.ArgumentParser) -> None:
    p.add_argument("--knowledge", nargs="+", default=["pk"], help="pk and/or lk")
    p.add_argument("--budgets", default="0:1:0.1")
    p.add_argument("--fp-rate", type=float, default=0.01)
    p.add_argument("--surrogate-size", type=int, help="surrogate samples (default: 20%% of training)")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--test-fraction", type=float, default=0.5)


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="wafs", description="Adversary-aware wrapper feature selection.")
    parser.add_argument("--version", action="version",
                        version=f"wafs {__version__} (model format {FORMAT_VERSION}, "
                                f"trace format {TRACE_FORMAT_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["synth"] = sub.add_parser("synth", help="write a synthetic dataset")
    _add_common(p)
    p.add_argument("--kind", choices=["gaussians", "robust-fragile"], default="gaussians")
    p.add_argument("--n", type=int, default=100, help="samples per class")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--sep", type=float, default=3.0, help="class separation (gaussians)")
    p.add_argument("--n-fragile", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.1)

    p = subs["select"] = sub.add_parser("select", help="run feature selection")
    _add_common(p)
    _add_data(p)
    _add_train(p)
    _add_attack(p)
    _add_selection(p)

    p = subs["train"] = sub.add_parser("train", help="train a classifier")
    _add_common(p)
    _add_data(p)
    _add_train(p)
    p.add_argument("--mask", help="mask JSON from select")
    p.add_argument("--folds", type=int, default=5, help="folds for the hyper-parameter grid search")
    p.add_argument("--fp-rate", type=float, default=0.01)

    p = subs["attack"] = sub.add_parser("attack", help="attack malicious samples")
    _add_common(p)
    _add_data(p)
    _add_attack(p)
    p.add_argument("--model", required=True, help="model JSON from train")
    p.add_argument("--budget", type=float, help="budgeted attack; omit for minimum-cost evasion")
    p.add_argument("--fp-rate", type=float, help="attack the threshold at this FP rate (default: g=0)")

    p = subs["curve"] = sub.add_parser("curve", help="security evaluation curve")
    _add_common(p)
    _add_data(p)
    _add_train(p)
    _add_attack(p)
    _add_scenario(p)
    p.add_argument("--mask", help="mask JSON (default: all features)")

    p = subs["compare"] = sub.add_parser("compare", help="paired WAFS vs traditional comparison")
    _add_common(p)
    _add_data(p)
    _add_train(p)
    _add_attack(p)
    _add_selection(p)
    _add_scenario(p)
    return parser, subs


def parse(argv) -> argparse.Namespace:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in subs), None)
    if known.config and command is not None:
        try:
            with open(known.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {known.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config file must hold a JSON object")
        sp = subs[command]
        known_dests = {a.dest for a in sp._actions} - {"help", "config"}
        unknown = sorted(set(cfg) - known_dests)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        sp.set_defaults(**cfg)
        # required flags may come from the config file
        for a in sp._actions:
            if a.dest in cfg:
                a.required = False
    return parser.parse_args(argv)


# ----------------------------------------------------------------- helpers


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "out")}


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json({"version": __version__, **_resolved(args)}, out / "config.json")
    return out


def _load(args) -> Dataset:
    ds = load_dataset(args.data, args.format, args.domains or "infer", args.n_features)
    if args.cap is not None:
        ds = cap_and_normalize(ds, args.cap)
    return ds


def _grid(args) -> list[TrainConfig]:
    gammas = _floats(args.gamma) if args.kernel == "rbf" else None
    return make_grid(_floats(args.C), gammas, tolerance=args.tolerance)


def _attack_spec(args) -> AttackSpec:
    params = SolverParams(step_size=args.step_size, epsilon=args.epsilon, max_iters=args.max_iters,
                          top_k=args.top_k)
    return AttackSpec(args.distance, params, args.monotone)


def _selection_cfg(args) -> SelectionConfig:
    return SelectionConfig(m=args.m, direction=args.direction, lam=0.0 if args.method == "traditional" else args.lam,
                           folds=args.folds, train_grid=tuple(_grid(args)), inner_folds=args.inner_folds,
                           attack=_attack_spec(args), g_measure=args.g_measure,
                           threshold_fp_rate=args.attack_fp_rate, seed=args.seed,
                           reuse_hyperparams=args.reuse_hyperparams, inequality=args.inequality, jobs=args.jobs)


def _mask(args, ds: Dataset) -> FeatureMask:
    if not getattr(args, "mask", None):
        return FeatureMask.full(ds.d)
    mask = read_mask(args.mask)
    if mask.d != ds.d:
        raise ValueError(f"mask covers {mask.d} features but the dataset has {ds.d}")
    return mask


def _scenarios(args) -> list[AttackScenario]:
    budgets = tuple(parse_budgets(args.budgets))
    spec = _attack_spec(args)
    return [AttackScenario(k, budgets, args.fp_rate, spec, args.surrogate_size, args.seed, args.repeats,
                           args.test_fraction) for k in args.knowledge]


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> None:
    if args.kind == "gaussians":
        ds = synth_two_gaussians(args.n, args.d, args.sep, args.seed)
    else:
        ds = synth_robust_fragile(args.n, args.d, args.n_fragile, args.noise, args.seed)
    out = _prepare_out(args)
    write_dataset(ds, out / "data.csv")
    save_domains(ds.domains, out / "domains.json")


def cmd_select(args) -> None:
    ds = _load(args)
    if not 1 <= args.m <= ds.d:
        raise ValueError(f"--m must lie in [1, {ds.d}], got {args.m}")
    cfg = _selection_cfg(args)
    out = _prepare_out(args)
    selector = traditional_wrapper if args.method == "traditional" else wafs
    mask, trace = selector(ds, cfg)
    write_mask(mask, out / "mask.json", ds.feature_names)
    trace.write_csv(out / "trace.csv")


def cmd_train(args) -> None:
    ds = _load(args)
    mask = _mask(args, ds)
    view = apply_mask(ds, mask)
    grid = _grid(args)
    cfg = grid[0] if len(grid) == 1 else grid_search(
        view, grid, stratified_folds(view, args.folds, derive_seed(args.seed, "folds")))
    out = _prepare_out(args)
    model = train(view, cfg, mask)
    save_model(model, out / "model.json")
    report = {"train_accuracy": float(np.mean(model.predict(view.features) == view.labels))}
    if np.sum(view.labels == -1) >= math.ceil(1 / args.fp_rate):
        report.update(metrics_report(model, view, args.fp_rate))
    write_json(report, out / "metrics.json")


def cmd_attack(args) -> None:
    ds = _load(args)
    model = load_model(args.model)
    X = model_inputs(model, ds.features)
    domains = ds.domains if ds.d == model.dim else tuple(ds.domains[i] for i in model.mask.indices)
    spec = _attack_spec(args)
    cons = spec.constraints(domains)
    tau = 0.0
    if args.fp_rate is not None:
        tau = calibrate_threshold(model, X[ds.labels == -1], args.fp_rate).threshold
    target = model.shifted(tau)
    legit = X[ds.labels == -1]
    out = _prepare_out(args)
    attacked = ds.features.copy()
    cols = model.mask.indices if ds.d != model.dim else np.arange(ds.d)
    rows = []
    for i in np.flatnonzero(ds.labels == 1):
        x = X[i]
        g0 = float(target.decision_function(x))
        if args.budget is not None:
            res = budgeted_attack(target, x, spec.kind, cons, spec.params, args.budget)
        elif g0 < 0:
            rows.append([int(i), repr(g0), repr(g0), repr(0.0), 1, "none", 0])
            continue
        elif cons.all_discrete:
            res = discrete_min_cost_evasion(target, x, spec.kind, cons, spec.params)
        else:
            res = min_cost_evasion(target, x, spec.kind, cons, spec.params, legit)
        attacked[i, cols] = res.x_star
        rows.append([int(i), repr(g0), repr(float(res.g_value)), repr(natural_distance(spec.kind, res.x_star, x)), int(res.evaded),
                     res.init_used, res.iterations])
    with open(out / "attacks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "g_before", "g_after", "cost", "evaded", "init_used", "iterations"])
        w.writerows(rows)
    write_dataset(Dataset(attacked, ds.labels, ds.domains, ds.feature_names), out / "attacked.csv")


def cmd_curve(args) -> None:
    ds = _load(args)
    mask = _mask(args, ds)
    scenarios = _scenarios(args)
    out = _prepare_out(args)
    curves = security_evaluation(ds, mask, scenarios, _grid(args), args.seed, args.repeats, args.jobs)
    write_curves_csv(curves, out / "curve.csv")
    write_json({"curves": [c.to_json() for c in curves], "scenarios": [s.to_json() for s in scenarios],
                "config": _resolved(args)}, out / "summary.json")


def cmd_compare(args) -> None:
    ds = _load(args)
    if not 1 <= args.m <= ds.d:
        raise ValueError(f"--m must lie in [1, {ds.d}], got {args.m}")
    cfg = _selection_cfg(args)
    scenarios = _scenarios(args)
    out = _prepare_out(args)
    res = compare_selectors(ds, cfg, scenarios, args.seed, args.repeats, args.jobs)
    with open(out / "curves.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arm"] + ["knowledge", "budget", "tp_mean", "tp_std", "n_repeats"])
        for arm, curves in res.curves.items():
            for c in curves.values():
                w.writerows([arm] + row for row in c.rows())
    for arm, traces in res.traces.items():
        for r, t in enumerate(traces):
            t.write_csv(out / f"trace_{arm}_{r}.csv")
    write_json({**res.report, "config": _resolved(args), "selection": cfg.to_json()}, out / "summary.json")


COMMANDS = {"synth": cmd_synth, "select": cmd_select, "train": cmd_train, "attack": cmd_attack,
            "curve": cmd_curve, "compare": cmd_compare}


def main(argv=None) -> int:
    try:
        args = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"wafs: usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"wafs: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
