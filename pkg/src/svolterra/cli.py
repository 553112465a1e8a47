"""Command-line front end.

    svolterra simulate  --model mech --n 1000 --param H=0.3
    svolterra mc        --model ou --param H=0.75 --scheme euler --n 80 --paths 10000
    svolterra mlmc      --model ou --param H=0.75 --eps 0.005
    svolterra mlmc      --model heston --levels 4 --budget 100000 --payoff asian
    svolterra rates     --model ou --param H=0.25 --n 8,16,32,64,128
    svolterra reference --model heston
    svolterra table     ou_h075

Every CSV starts with a ``#`` line holding the full configuration as JSON.
Exit codes: 0 ok, 2 invalid input, 3 diverged paths, 4 MLMC did not converge,
5 reference or covariance failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings

import numpy as np

from .errors import DivergenceError, InvalidArgument, NoConvergence, SvolterraError
from .estimators import AsianCall, Moment, TerminalCall, mc_estimate
from .euler import euler_path
from .grid import uniform_grid
from .milstein import milstein_case, milstein_path_constant_k2
from .mlmc import MlmcConfig, mlmc_adaptive, mlmc_fixed_budget
from .models import MODELS, RoughHestonParams
from .noise import NoiseConfig, sample_increments
from .rates import strong_rate_experiment
from .reference import heston_call_fourier, ou_terminal_moments, gaussian_call

COMMANDS = ("simulate", "table", "rates", "mlmc", "mc", "reference")

# -- configuration ---------------------------------------------------------

DEFAULTS = dict(
    model="ou", params={}, scheme="euler", n=None, paths=10000, eps=None, levels=None,
    budget=None, seed=0, workers=1, payoff="call", strike=1.0, component=0, M=4,
    alpha_circ=None, ref_factor=8, table=None, adams_steps=2000, literal_minus_one=False,
)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise InvalidArgument(f"parameter {item!r} is not KEY=VALUE")
        out[key] = _parse_value(val)
    return out


def _parse_int_list(text):
    if text is None or isinstance(text, list):
        return text
    try:
        return [int(v) for v in str(text).split(",") if v]
    except ValueError as exc:
        raise InvalidArgument(f"bad integer list {text!r}") from exc


def build_config(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = dict(DEFAULTS, params={})
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgument(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise InvalidArgument(f"unknown config keys {sorted(unknown)}")
        cfg.update(doc)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and key != "params":
            cfg[key] = val
    cfg["params"] = dict(cfg.get("params") or {}, **_parse_params(args.param))
    cfg["command"] = args.command
    return cfg


def make_model(cfg: dict):
    name = cfg["model"]
    if name not in MODELS:
        raise InvalidArgument(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    try:
        model = MODELS[name](**cfg["params"])
    except TypeError as exc:
        raise InvalidArgument(str(exc)) from exc
    if name == "mech" and model.params["H"] <= 0.25:
        warnings.warn("mechanics model with H <= 1/4: drift kernel exponent 2H-1 <= -1/2", stacklevel=2)
    return model


def make_payoff(cfg: dict):
    kind = str(cfg["payoff"])
    c = int(cfg["component"])
    if kind == "call":
        return TerminalCall(float(cfg["strike"]), c)
    if kind == "asian":
        return AsianCall(float(cfg["strike"]), c)
    if kind.startswith("moment"):
        _, _, k = kind.partition(":")
        return Moment(int(k or 1), c)
    raise InvalidArgument(f"unknown payoff {kind!r} (call, asian, moment:k)")


def _require(cfg, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise InvalidArgument(f"--{k.replace('_', '-')} is required for {cfg['command']}")


# -- output ----------------------------------------------------------------


def header_line(cfg: dict) -> str:
    return "# " + json.dumps(cfg, sort_keys=True, default=str) + "\n"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_rows(cfg: dict, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(header_line(cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# -- commands --------------------------------------------------------------


def cmd_simulate(cfg: dict) -> str:
    """One path: ``t``, state components, cumulative Brownian drivers."""
    model = make_model(cfg)
    n = int(cfg["n"] or 100)
    grid = uniform_grid(model.T, n)
    scheme = cfg["scheme"]
    inc = sample_increments(grid, NoiseConfig(model.m, model.correlation, cfg["seed"]), 0)
    if scheme == "euler":
        path = euler_path(model, grid, inc)
    else:
        if milstein_case(model) != "constant_k2":
            raise InvalidArgument("simulate supports euler and constant-kernel milstein only")
        path = milstein_path_constant_k2(model, grid, inc)
    if path.diverged:
        raise DivergenceError("simulated path diverged")
    W = np.vstack([np.zeros((1, model.m)), np.cumsum(inc.dW, axis=0)])
    cols = ["t"] + [f"X{i + 1}" for i in range(model.d)] + (["W"] if model.m == 1 else [f"W{j + 1}" for j in range(model.m)])
    rows = [[t, *x, *w] for t, x, w in zip(grid.points, path.values, W)]
    return write_rows(cfg, cols, rows)


MC_COLUMNS = ["method", "n", "mean", "stat_error", "N", "diverged", "wall_time", "cost_units"]


def cmd_mc(cfg: dict) -> tuple[str, int]:
    _require(cfg, "n")
    model = make_model(cfg)
    grid = uniform_grid(model.T, int(cfg["n"]))
    est = mc_estimate(model, cfg["scheme"], grid, make_payoff(cfg), int(cfg["paths"]), cfg["seed"], cfg["workers"])
    row = [cfg["scheme"], grid.n, est.mean, est.stat_error, est.N, est.diverged_count, est.wall_time, est.cost_units]
    return write_rows(cfg, MC_COLUMNS, [row]), est.diverged_count


def _mlmc_config(cfg, **over):
    kw = dict(M=int(cfg["M"]), seed=cfg["seed"], workers=cfg["workers"], alpha_circ=cfg["alpha_circ"])
    kw.update(over)
    return MlmcConfig(**kw)


def cmd_mlmc(cfg: dict) -> tuple[str, int]:
    model = make_model(cfg)
    payoff = make_payoff(cfg)
    if cfg["eps"] is not None:
        res = mlmc_adaptive(model, payoff, _mlmc_config(cfg, epsilon=float(cfg["eps"])))
    else:
        _require(cfg, "levels", "budget")
        res = mlmc_fixed_budget(model, payoff, _mlmc_config(cfg, L=int(cfg["levels"]), N_total=int(cfg["budget"])))
    out = header_line(cfg) + res.to_csv()
    out += (f"# estimate={res.estimate!r} stat_error={res.stat_error!r} L={res.L} "
            f"cost_units={res.cost_units} wall_time={res.wall_time!r} diverged={res.diverged_count}\n")
    return out, res.diverged_count


def cmd_rates(cfg: dict) -> str:
    model = make_model(cfg)
    n_list = _parse_int_list(cfg["n"]) or [8, 16, 32, 64, 128]
    rep = strong_rate_experiment(model, cfg["scheme"], n_list, int(cfg["ref_factor"]), int(cfg["paths"]),
                                 cfg["seed"], cfg["workers"])
    return header_line(cfg) + rep.to_csv()


def reference_values(cfg: dict) -> list:
    name = cfg["model"]
    p = dict(cfg["params"])
    strike = float(cfg["strike"])
    if name == "ou":
        model = make_model(cfg)
        q = model.params
        mean, var = ou_terminal_moments(q["x0"], q["b0"], q["b1"], q["sigma0"], q["H"], model.T)
        return [("mean", mean), ("variance", var), ("call", gaussian_call(mean, var, strike))]
    if name == "heston":
        T = float(p.pop("T", 1.0))
        try:
            prm = RoughHestonParams(**p)
        except TypeError as exc:
            raise InvalidArgument(str(exc)) from exc
        price = heston_call_fourier(prm, strike, T, int(cfg["adams_steps"]), bool(cfg["literal_minus_one"]))
        return [("call", price)]
    raise InvalidArgument(f"no reference value for model {name!r}")


def cmd_reference(cfg: dict) -> str:
    return write_rows(cfg, ["quantity", "value"], reference_values(cfg))


# -- tables ----------------------------------------------------------------

_OU_MLMC = {"ou_h010": (0.08, 0.05, 0.03), "ou_h025": (0.01, 0.007, 0.005), "ou_h075": (0.01, 0.007, 0.005)}
TABLES = {
    "ou_h010": dict(model="ou", params={"H": 0.1}),
    "ou_h025": dict(model="ou", params={"H": 0.25}),
    "ou_h075": dict(model="ou", params={"H": 0.75}),
    "mech_h03": dict(model="mech", params={"H": 0.3}),
    "mech_h07": dict(model="mech", params={"H": 0.7}),
    "heston": dict(model="heston", params={}),
}
TABLE_COLUMNS = ["method", "setting", "quantity", "mean", "stat_error", "wall_time", "cost_units"]


def table_rows(table_id: str, cfg: dict) -> list:
    if table_id not in TABLES:
        raise InvalidArgument(f"unknown table {table_id!r}; choose from {sorted(TABLES)}")
    preset = TABLES[table_id]
    tcfg = dict(cfg, **preset)
    model = make_model(tcfg)
    seed, workers = cfg["seed"], cfg["workers"]
    rows = []

    def mc_rows(scheme, ns, payoffs, labels, N):
        for n in ns:
            ests = mc_estimate(model, scheme, uniform_grid(model.T, n), list(payoffs), N, seed, workers)
            for lab, e in zip(labels, ests):
                if e.diverged_count:
                    raise DivergenceError(f"{e.diverged_count} diverged paths ({scheme}, n={n})")
                rows.append([scheme, f"n={n}", lab, e.mean, e.stat_error, e.wall_time, e.cost_units])

    def mlmc_row(res, setting, lab):
        rows.append(["mlmc", setting, lab, res.estimate, res.stat_error, res.wall_time, res.cost_units])

    if table_id.startswith("ou"):
        call = TerminalCall(1.0)
        N = int(cfg["paths"])
        q = model.params
        mean, var = ou_terminal_moments(q["x0"], q["b0"], q["b1"], q["sigma0"], q["H"], model.T)
        rows.append(["reference", "", "call", gaussian_call(mean, var, 1.0), "", "", ""])
        mc_rows("euler", (8, 20, 40, 80), [call], ["call"], N)
        mc_rows("milstein", (8, 20, 40), [call], ["call"], N)
        for eps in _OU_MLMC[table_id]:
            mlmc_row(mlmc_adaptive(model, call, _mlmc_config(cfg, epsilon=eps)), f"eps={eps}", "call")
    elif table_id.startswith("mech"):
        moments = [Moment(k, 0) for k in (1, 2, 3)]
        labels = [f"moment{k}" for k in (1, 2, 3)]
        mc_rows("euler", (100, 500, 1000), moments, labels, int(cfg["paths"]))
        for eps in (0.1, 0.07, 0.05):
            for lab, pf in zip(labels, moments):
                mlmc_row(mlmc_adaptive(model, pf, _mlmc_config(cfg, epsilon=eps)), f"eps={eps}", lab)
    else:
        prm = RoughHestonParams(**{k: v for k, v in model.params.items() if k != "T"})
        rows.append(["reference", "", "call", heston_call_fourier(prm, 1.0, model.T), "", "", ""])
        payoffs = [TerminalCall(1.0, 0), AsianCall(1.0, 0)]
        budget = int(cfg["budget"] or 100000)
        mc_rows("euler", (4, 10, 20, 40, 80, 160), payoffs, ["call", "asian"], int(cfg["paths"]))
        for L in (1, 2, 3, 4):
            for lab, pf in zip(["call", "asian"], payoffs):
                mlmc_row(mlmc_fixed_budget(model, pf, _mlmc_config(cfg, L=L, N_total=budget)), f"L={L}", lab)
    return rows


def cmd_table(cfg: dict) -> str:
    _require(cfg, "table")
    if cfg["model"] != DEFAULTS["model"] or cfg["params"]:
        raise InvalidArgument("table presets fix the model; drop --model/--param")
    if cfg["table"] == "heston" and cfg["paths"] == DEFAULTS["paths"]:
        cfg = dict(cfg, paths=100000)
    return write_rows(cfg, TABLE_COLUMNS, table_rows(cfg["table"], cfg))


# -- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="svolterra", description="Simulation of stochastic Volterra equations.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "table":
            p.add_argument("table", nargs="?", choices=sorted(TABLES))
        p.add_argument("--model", choices=sorted(MODELS))
        p.add_argument("--param", "-p", action="append", metavar="KEY=VALUE", help="model parameter")
        p.add_argument("--scheme", choices=["euler", "milstein"])
        p.add_argument("--n", help="number of cells (rates: comma-separated list)")
        p.add_argument("--paths", type=int)
        p.add_argument("--eps", type=float)
        p.add_argument("--levels", type=int)
        p.add_argument("--budget", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--payoff", help="call, asian or moment:k")
        p.add_argument("--strike", type=float)
        p.add_argument("--component", type=int, help="0-based state component")
        p.add_argument("--M", type=int, dest="M")
        p.add_argument("--alpha-circ", type=float, dest="alpha_circ")
        p.add_argument("--ref-factor", type=int, dest="ref_factor")
        p.add_argument("--adams-steps", type=int, dest="adams_steps")
        p.add_argument("--literal-minus-one", action="store_const", const=True, dest="literal_minus_one")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--config", help="JSON config file")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command != "rates" and cfg["n"] is not None:
            cfg["n"] = int(cfg["n"])
        diverged = 0
        if args.command == "simulate":
            text = cmd_simulate(cfg)
        elif args.command == "mc":
            text, diverged = cmd_mc(cfg)
        elif args.command == "mlmc":
            try:
                text, diverged = cmd_mlmc(cfg)
            except NoConvergence as exc:
                if exc.partial is not None:
                    sys.stdout.write(header_line(cfg) + exc.partial.to_csv())
                raise
        elif args.command == "rates":
            text = cmd_rates(cfg)
        elif args.command == "reference":
            text = cmd_reference(cfg)
        else:
            text = cmd_table(cfg)
    except (SvolterraError, ValueError) as exc:
        print(f"svolterra: error: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", InvalidArgument.exit_code)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if diverged:
        print(f"svolterra: {diverged} diverged paths", file=sys.stderr)
        return DivergenceError.exit_code
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
