"""Command-line front end.

Every subcommand reads an optional JSON config, lets flags override it,
writes ``<subcommand>.json`` (plus CSV where there is plottable data) into
``--out`` and exits 0 on pass, 1 on a property violation, 2 on usage or
config errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import discretize, kfunc, qcfn, spaces, stability
from .errors import InterpError
from .sequences import SeqVector, StepFunction, WeightedSeqCouple, exponent_str, parse_exponent

DRIFT_LIMIT = 0.10
SUM_SUP_DRIFT_LIMIT = 0.05
EMBED_TOL = 1e-9
SHAPE_TOL = 1e-8

DEFAULT_WINDOW = (4.0 ** -16, 4.0 ** 16)
DEFAULT_TRIPLE = {
    "phi": {"kind": "power_log", "theta": 0.5},
    "phi0": {"kind": "power_log", "theta": 1 / 3},
    "phi1": {"kind": "power_log", "theta": 2 / 3},
}
DEFAULT_FUNCTION = {"kind": "power_log", "theta": 0.5}


class ConfigError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


# ---------------------------------------------------------------- config

def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                                      f"{exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return data


def _parse_window(value, field: str = "window") -> tuple[float, float]:
    try:
        if isinstance(value, str):
            lo, hi = (float(s) for s in value.split(":"))
        else:
            lo, hi = (float(s) for s in value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected TMIN:TMAX or [tmin, tmax], got {value!r}") from None
    if not (0 < lo < 1 < hi) or not math.isfinite(hi):
        raise ConfigError(field, f"need 0 < t_min < 1 < t_max, got [{lo}, {hi}]")
    return lo, hi


def _exponent(value, field: str) -> float:
    try:
        return parse_exponent(value)
    except (InterpError, TypeError, ValueError) as exc:
        raise ConfigError(field, str(exc)) from None


def _positive(value, field: str, kind=float, minimum=None):
    try:
        x = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected a number, got {value!r}") from None
    if minimum is not None and not x >= minimum:
        raise ConfigError(field, f"must be >= {minimum}, got {x}")
    return x


def _function(spec, field: str) -> qcfn.QuasiConcaveFn:
    try:
        return qcfn.from_spec(spec)
    except InterpError as exc:
        raise ConfigError(field, str(exc)) from None


def _triple(cfg: dict) -> stability.Triple:
    spec = cfg.get("triple", DEFAULT_TRIPLE)
    if not isinstance(spec, dict):
        raise ConfigError("triple", "expected an object with phi, phi0, phi1")
    fns = []
    for key in ("phi", "phi0", "phi1"):
        if key not in spec:
            raise ConfigError(f"triple.{key}", "missing")
        fns.append(_function(spec[key], f"triple.{key}"))
    try:
        return stability.Triple.of(*fns)
    except InterpError as exc:
        raise ConfigError("triple", str(exc)) from None


def _resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge the config file with flag overrides and validate common fields."""
    cfg = _load_config(args.config)
    for name in ("rho", "p", "q", "samples", "seed", "orientation"):
        val = getattr(args, name)
        if val is not None:
            cfg[name] = val
    if args.window is not None:
        cfg["window"] = args.window
    cfg["window"] = list(_parse_window(cfg.get("window", DEFAULT_WINDOW)))
    cfg["rho"] = _positive(cfg.get("rho", 2.0), "rho")
    if not cfg["rho"] > 1:
        raise ConfigError("rho", f"must exceed 1, got {cfg['rho']}")
    cfg["p"] = exponent_str(_exponent(cfg.get("p", 1), "p"))
    cfg["q"] = exponent_str(_exponent(cfg.get("q", cfg["p"]), "q"))
    cfg["samples"] = _positive(cfg.get("samples", 100), "samples", int, 1)
    cfg["seed"] = _positive(cfg.get("seed", 0), "seed", int, 0)
    cfg.setdefault("orientation", "ratio10")
    if cfg["orientation"] not in stability.ORIENTATIONS:
        raise ConfigError("orientation", f"must be one of {stability.ORIENTATIONS}")
    return cfg


# ---------------------------------------------------------------- output

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return None if math.isnan(x) else x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _write_json(out: Path, name: str, report: dict) -> Path:
    path = out / f"{name}.json"
    path.write_text(json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n")
    return path


def _write_csv(out: Path, name: str, header, rows) -> Path:
    path = out / f"{name}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


# ---------------------------------------------------------------- subcommands

def cmd_verify_fn(cfg):
    spec = cfg.setdefault("function", DEFAULT_FUNCTION)
    violations, reports = [], {}
    try:
        f = qcfn.from_spec(spec)
    except qcfn.InvalidParameterError as exc:
        return {"passed": False, "violations": [{"kind": "invalid_parameter", "message": str(exc)}]}, 1
    except InterpError as exc:
        raise ConfigError("function", str(exc)) from None
    for rep in (qcfn.verify_quasi_concave(f),
                qcfn.verify_nondegenerate(f, cfg["window"], cfg.get("eps_deg", qcfn.DEFAULT_EPS_DEG))):
        reports[rep.check] = rep.to_dict()
        violations += [dict(v, check=rep.check) for v in rep.violations]
    reports["quasi_power"] = qcfn.is_quasi_power(f, cfg["window"]).to_dict()
    return {"passed": not violations, "violations": violations, "checks": reports}, int(bool(violations))


def cmd_discretize(cfg, out):
    f = _function(cfg.setdefault("function", DEFAULT_FUNCTION), "function")
    seq = discretize.build(f, cfg["window"], cfg["rho"])
    rep = discretize.verify(f, seq)
    _write_csv(out, "discretize", ("k", "t_k", "phi_t_k", "zone"), seq.csv_rows())
    report = {"k_min": seq.k_min, "k_max": seq.k_max, "points": len(seq.points),
              "verify": rep.to_dict()}
    return report, int(not rep)


def _couple_and_vector(cfg):
    c = cfg.get("couple")
    if not isinstance(c, dict) or "v" not in c or "w" not in c:
        raise ConfigError("couple", "expected an object with 'v' and 'w' weight lists")
    try:
        couple = WeightedSeqCouple(_exponent(c.get("q", cfg["q"]), "couple.q"),
                                   c["v"], c["w"], int(c.get("start", 0)))
    except (InterpError, TypeError, ValueError) as exc:
        raise ConfigError("couple", str(exc)) from None
    vec = cfg.get("vector")
    try:
        if isinstance(vec, dict):
            x = SeqVector.from_dict({int(k): float(v) for k, v in vec.items()})
        elif isinstance(vec, list):
            x = SeqVector(couple.start, vec)
        else:
            raise ConfigError("vector", "expected a list of values or an {index: value} object")
    except (InterpError, TypeError, ValueError) as exc:
        raise ConfigError("vector", str(exc)) from None
    if not couple.contains(x):
        raise ConfigError("vector", f"support {x.support} leaves the couple window")
    return couple, x


def _shape_violations(ts, ks):
    out = []
    for j in range(len(ts) - 1):
        if ks[j + 1] < ks[j] * (1 - SHAPE_TOL):
            out.append({"kind": "decreasing", "index": j})
        if ks[j + 1] / ts[j + 1] > ks[j] / ts[j] * (1 + SHAPE_TOL):
            out.append({"kind": "k_over_t_increasing", "index": j})
    return out


def cmd_kfunc(cfg, out):
    grid = cfg.setdefault("t_grid", {"min": 1e-4, "max": 1e4, "points": 32})
    try:
        ts = np.geomspace(float(grid["min"]), float(grid["max"]), int(grid["points"]))
    except (KeyError, TypeError, ValueError):
        raise ConfigError("t_grid", "expected {min, max, points}") from None
    if "step" in cfg:
        try:
            f = StepFunction.from_pieces(cfg["step"])
        except (InterpError, TypeError, ValueError) as exc:
            raise ConfigError("step", f"expected [[length, level], ...]: {exc}") from None
        engine, x, bound = kfunc.L1Linf(), f, None
    else:
        couple, x = _couple_and_vector(cfg)
        name = cfg.setdefault("engine", "exact")
        if name not in ("exact", "min_formula"):
            raise ConfigError("engine", "must be 'exact' or 'min_formula'")
        try:
            engine = kfunc.ExactOracle(couple) if name == "exact" else kfunc.MinFormula(couple)
            bound = kfunc.MinFormula(couple).profile(x, ts)
        except InterpError as exc:
            raise ConfigError("vector", str(exc)) from None
    rows = kfunc.k_profile_rows(engine, x, ts)
    ks = np.array([k for _, k in rows])
    viol = _shape_violations(ts, ks)
    if bound is not None:
        for j in range(len(ts)):
            if not bound[j] * (1 - 1e-7) <= ks[j] <= 2 * bound[j] * (1 + 1e-7):
                viol.append({"kind": "sandwich", "index": j})
    _write_csv(out, "kfunc", ("t", "K"), rows)
    return {"points": len(rows), "violations": viol}, int(bool(viol))


def cmd_norm(cfg, out):
    couple, x = _couple_and_vector(cfg)
    phi = _function(cfg.setdefault("function", DEFAULT_FUNCTION), "function")
    ratios = couple.v / couple.w
    seq = discretize.build_covering(phi, float(ratios.min()), float(ratios.max()), cfg["rho"],
                                    pad=stability.PAD)
    engine = kfunc.MinFormula(couple)
    rep = spaces.janson_norm(engine, x, seq, parse_exponent(cfg["p"]))
    try:
        gil = spaces.gilbert_rhs(couple, phi, seq, parse_exponent(cfg["p"]), x)
    except InterpError:
        gil = None
    report = {"janson": rep.to_dict(), "gilbert_rhs": gil}
    return report, int(rep.tail_flagged)


def cmd_gilbert_check(cfg, out):
    rep = stability.gilbert_experiment(_triple(cfg), cfg["window"], cfg["p"], cfg["q"],
                                       cfg["samples"], cfg["seed"],
                                       doublings=int(cfg.setdefault("doublings", 1)),
                                       rho=cfg["rho"])
    drift = rep.drift("janson_gilbert")
    return {"report": rep.to_dict(), "drift_limit": DRIFT_LIMIT}, int(not drift < DRIFT_LIMIT)


def cmd_condition_v(cfg, out):
    triple = _triple(cfg)
    prof = stability.condition_v_profile(triple, None, None, cfg["window"], cfg["rho"],
                                         cfg["orientation"])
    big = stability.condition_v_profile(triple, None, None,
                                        stability.double_window(cfg["window"]), cfg["rho"],
                                        cfg["orientation"])
    bounded = big.max_count == prof.max_count and not prof.degenerate_ratio
    report = dict(prof.to_dict(), bounded=bounded, doubled_max_cardinality=big.max_count)
    return report, int(not bounded)


def cmd_sum_sup(cfg, out):
    triple = _triple(cfg)
    variants = cfg.setdefault("variants", list(stability.VARIANTS))
    rs = cfg.setdefault("r", [1, -1, 2])
    small = stability.SequenceCoupleModel(triple, cfg["window"], cfg["rho"])
    big = stability.SequenceCoupleModel(triple, stability.double_window(cfg["window"]), cfg["rho"])
    rows, fail = [], False
    for v in variants:
        for r in rs:
            try:
                a = stability.sum_sup_ratio(v, float(r), triple, None, model=small)
                b = stability.sum_sup_ratio(v, float(r), triple, None, model=big)
            except InterpError as exc:
                raise ConfigError("variants/r", str(exc)) from None
            drift = abs(b.max_ratio / a.max_ratio - 1.0)
            fail |= not drift < SUM_SUP_DRIFT_LIMIT
            rows.append({"variant": a.variant, "r": a.r, "max_ratio": a.max_ratio,
                         "doubled_max_ratio": b.max_ratio, "drift": drift})
    _write_csv(out, "sum_sup", ("variant", "r", "max_ratio", "doubled_max_ratio"),
               [(x["variant"], x["r"], x["max_ratio"], x["doubled_max_ratio"]) for x in rows])
    return {"rows": rows, "drift_limit": SUM_SUP_DRIFT_LIMIT}, int(fail)


def cmd_stability(cfg, out):
    pair = cfg.setdefault("pair", [1, "inf"])
    if not isinstance(pair, list) or len(pair) != 2:
        raise ConfigError("pair", "expected two exponents")
    pair = [_exponent(e, "pair") for e in pair]
    vary = cfg.setdefault("vary", "couple")
    if vary not in ("couple", "inner"):
        raise ConfigError("vary", "must be 'couple' or 'inner'")
    rep = stability.equivalence_experiment(
        pair, cfg["p"], _triple(cfg), cfg["window"], cfg["samples"], cfg["seed"],
        vary=vary, base_q=cfg["q"], doublings=int(cfg.setdefault("doublings", 1)),
        rho=cfg["rho"])
    d = rep.to_dict()
    ok = all(v < DRIFT_LIMIT for v in d["drift"].values()) and rep.min_side_ratio >= 1 - EMBED_TOL
    return {"report": d, "drift_limit": DRIFT_LIMIT}, int(not ok)


def cmd_falsify(cfg, out):
    triple = _triple(cfg)
    if "windows" in cfg:
        windows = [list(_parse_window(w, "windows")) for w in cfg["windows"]]
    else:
        windows, w = [], tuple(cfg["window"])
        for _ in range(3):
            windows.append(list(w))
            w = stability.double_window(w)
        cfg["windows"] = windows
    table = stability.counterexample_search(triple, windows, cfg["p"], cfg["rho"],
                                            cfg["q"], cfg["orientation"])
    cards = [r["max_cardinality"] for r in table.rows]
    v_fails = all(b > a for a, b in zip(cards, cards[1:])) and len(cards) > 1
    diverges = table.strictly_increasing and table.growth >= 2.0
    flat = table.drift < 0.05
    consistent = diverges if v_fails else flat
    _write_csv(out, "falsify", ("window", "worst_ratio", "max_cardinality"), table.csv_rows())
    report = dict(table.to_dict(), condition_v_fails=v_fails, diverges=diverges,
                  consistent=consistent)
    return report, int(not consistent)


COMMANDS = {
    "verify-fn": (lambda cfg, out: cmd_verify_fn(cfg), "verify a parameter function"),
    "discretize": (cmd_discretize, "build and verify a discretizing sequence"),
    "kfunc": (cmd_kfunc, "K-profile of a vector or step function"),
    "norm": (cmd_norm, "Janson norm (and Gilbert block norm) of a vector"),
    "gilbert-check": (cmd_gilbert_check, "Janson vs Gilbert norms under window doubling"),
    "condition-v": (cmd_condition_v, "octave cardinality profile"),
    "sum-sup": (cmd_sum_sup, "sum versus sup block ratios"),
    "stability": (cmd_stability, "l^1-side versus l^inf-side equivalence experiment"),
    "falsify": (cmd_falsify, "divergence table on growing windows"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--window", metavar="TMIN:TMAX")
    common.add_argument("--rho", type=float)
    common.add_argument("--p")
    common.add_argument("--q")
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", metavar="DIR", default=".")
    common.add_argument("--orientation", choices=stability.ORIENTATIONS)
    parser = argparse.ArgumentParser(prog="interpstab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = _resolve(args)
        out.mkdir(parents=True, exist_ok=True)
        report, status = COMMANDS[args.command][0](cfg, out)
    except ConfigError as exc:
        print(f"interpstab {args.command}: {exc}", file=sys.stderr)
        return 2
    except InterpError as exc:
        print(f"interpstab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    report = dict(report, command=args.command, config=cfg, status=status)
    path = _write_json(out, args.command.replace("-", "_"), report)
    print(f"{args.command}: {'pass' if status == 0 else 'violation'} -> {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
