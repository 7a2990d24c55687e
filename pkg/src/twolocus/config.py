"""Scenario configuration files (TOML) with strict key checking."""

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import SimParams
from .environment import make_environment
from .errors import ConfigError, TwoLocusError
from .grid import build_grid

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SUITES = ("monomorphic-thresholds", "weak-recombination", "strong-recombination", "large-d",
          "no-recombination")

_SECTIONS = {
    "seed": None,
    "output_dir": None,
    "grid": {"L", "N"},
    "environment": {"alpha", "beta"},
    "params": {"lambda", "rho", "d", "s", "r"},
    "initial": {"type", "freqs", "index", "p", "margin"},
    "run": {"dt", "tol", "t_max", "sample_times", "representation", "sink"},
    "sweep": {"lambda", "rho", "task"},
    "eigen": {"weight", "lambda", "k"},
    "equilibrium": {"kind", "seed", "index", "gametes", "weight", "tol", "t_max"},
    "stability": {"k", "eliminate", "method"},
    "verify": {"suites", *SUITES},
}

_SUITE_KEYS = {
    "monomorphic-thresholds": {"rho", "cells", "span"},
    "weak-recombination": {"lambda", "lambda_factor", "rho", "n_starts"},
    "strong-recombination": {"lambda", "lambda_factor", "rho", "n_starts", "t_max"},
    "large-d": {"s", "r", "d", "n_starts", "n_ode_starts", "horizon", "dist_tol"},
    "no-recombination": {"n_starts"},
}

INITIAL_TYPES = ("uniform", "vertex", "product-cline", "tabulated")
SWEEP_TASKS = ("stability", "equilibrium", "simulate")
EQUILIBRIUM_KINDS = ("internal", "monomorphic", "edge", "cline")


@dataclass
class ScenarioConfig:
    raw: dict
    grid: object = None
    env: object = None
    params: Optional[SimParams] = None
    initial: dict = field(default_factory=lambda: {"type": "uniform"})
    run: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    eigen: dict = field(default_factory=dict)
    equilibrium: dict = field(default_factory=dict)
    stability: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "twolocus_out"

    def resolved_runs(self):
        """Sweep points (index, lam, rho) in lexicographic order over (lambda, rho)."""
        if self.params is None:
            raise ConfigError("[params] is required")
        lams = self.sweep.get("lambda") or [self.params.lam]
        rhos = self.sweep.get("rho") or [self.params.rho]
        points = [(lam, rho) for lam in lams for rho in rhos]
        return [(k, float(lam), float(rho)) for k, (lam, rho) in enumerate(points)]

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError([f"[{n}] is required for this command" for n in missing])


def load_toml(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} not found")
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {str(path)!r}: {exc}") from None


def parse_config(path):
    return config_from_mapping(load_toml(path))


def _number(errors, where, value, positive=False, nonneg=False, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if ok and integer:
        ok = isinstance(value, int)
    if ok:
        ok = math.isfinite(value) and (not positive or value > 0) and (not nonneg or value >= 0)
    if not ok:
        kind = "integer" if integer else "number"
        cond = " > 0" if positive else " >= 0" if nonneg else ""
        errors.append(f"{where}: expected finite {kind}{cond}, got {value!r}")
        return None
    return value


def _number_list(errors, where, value, nonneg=False):
    if not isinstance(value, list) or not value:
        errors.append(f"{where}: expected a non-empty list of numbers")
        return None
    out = [_number(errors, f"{where}[{k}]", v, nonneg=nonneg) for k, v in enumerate(value)]
    if any(v is None for v in out):
        return None
    return sorted(float(v) for v in out)


def _check_keys(errors, where, table, allowed):
    if not isinstance(table, dict):
        errors.append(f"{where}: expected a table")
        return False
    for key in table:
        if key not in allowed:
            errors.append(f"{where}: unknown key {key!r}")
    return True


def config_from_mapping(raw):
    """Validate a config mapping; raises ConfigError listing every problem found."""
    errors = []
    cfg = ScenarioConfig(raw=raw)
    for key in raw:
        if key not in _SECTIONS:
            errors.append(f"unknown top-level key {key!r}")
    for key, allowed in _SECTIONS.items():
        if allowed is not None and key in raw:
            _check_keys(errors, f"[{key}]", raw[key], allowed)

    if "seed" in raw:
        seed = _number(errors, "seed", raw["seed"], nonneg=True, integer=True)
        cfg.seed = seed if seed is not None else 0
    if "output_dir" in raw:
        if isinstance(raw["output_dir"], str) and raw["output_dir"]:
            cfg.output_dir = raw["output_dir"]
        else:
            errors.append("output_dir: expected a non-empty string")

    grid = raw.get("grid")
    if not isinstance(grid, dict):
        errors.append("[grid] with keys L and N is required")
    else:
        length = _number(errors, "grid.L", grid.get("L"), positive=True)
        n = _number(errors, "grid.N", grid.get("N"), integer=True)
        if n is not None and n < 3:
            errors.append("grid.N: need at least 3 nodes")
        elif length is not None and n is not None:
            cfg.grid = build_grid(length, n)

    env = raw.get("environment")
    if isinstance(env, dict) and cfg.grid is not None:
        missing = [k for k in ("alpha", "beta") if k not in env]
        if missing:
            errors.extend(f"environment.{k} is required" for k in missing)
        else:
            try:
                cfg.env = make_environment(env["alpha"], env["beta"], cfg.grid)
            except (TwoLocusError, ValueError, TypeError) as exc:
                errors.append(f"[environment]: {exc}")

    _parse_params(errors, cfg, raw.get("params"))
    _parse_initial(errors, cfg, raw.get("initial"))
    _parse_run(errors, cfg, raw.get("run"))
    _parse_sweep(errors, cfg, raw.get("sweep"))
    _parse_sections(errors, cfg, raw)
    _parse_verify(errors, cfg, raw.get("verify"))
    if errors:
        raise ConfigError(errors)
    return cfg


def _parse_params(errors, cfg, params):
    if not isinstance(params, dict):
        return
    scaled = [k for k in ("lambda", "rho") if k in params]
    raw = [k for k in ("d", "s", "r") if k in params]
    if scaled and raw:
        errors.append("[params]: give either (lambda, rho) or (d, s, r), not both")
        return
    if raw:
        if len(raw) != 3:
            errors.append("[params]: d, s and r must all be given")
            return
        d = _number(errors, "params.d", params["d"], positive=True)
        s = _number(errors, "params.s", params["s"], positive=True)
        r = _number(errors, "params.r", params["r"], nonneg=True)
        if None not in (d, s, r):
            cfg.params = SimParams.from_raw(float(d), float(s), float(r))
        return
    if "lambda" not in params:
        errors.append("[params]: lambda is required")
        return
    lam = _number(errors, "params.lambda", params["lambda"], nonneg=True)
    rho = _number(errors, "params.rho", params.get("rho", 0.0), nonneg=True)
    if lam is not None and rho is not None:
        cfg.params = SimParams(float(lam), float(rho))


def _parse_initial(errors, cfg, initial):
    if initial is None:
        return
    if not isinstance(initial, dict):
        return
    kind = initial.get("type", "uniform")
    if kind not in INITIAL_TYPES:
        errors.append(f"initial.type: expected one of {list(INITIAL_TYPES)}, got {kind!r}")
        return
    out = {"type": kind}
    needed = {"uniform": set(), "vertex": {"index"}, "product-cline": set(), "tabulated": {"p"}}
    optional = {"uniform": {"freqs"}, "vertex": set(), "product-cline": {"margin"},
                "tabulated": set()}
    for key in initial:
        if key != "type" and key not in needed[kind] | optional[kind]:
            errors.append(f"initial.{key}: not used by initial type {kind!r}")
    for key in needed[kind]:
        if key not in initial:
            errors.append(f"initial.{key}: required for initial type {kind!r}")
    if kind == "uniform":
        freqs = initial.get("freqs", [0.25, 0.25, 0.25, 0.25])
        vals = _number_list_raw(errors, "initial.freqs", freqs, 4)
        if vals is not None:
            if min(vals) < 0 or abs(sum(vals) - 1.0) > 1e-12:
                errors.append("initial.freqs: need nonnegative values summing to 1")
            out["freqs"] = vals
    elif kind == "vertex" and "index" in initial:
        idx = initial["index"]
        if idx not in (1, 2, 3, 4) or isinstance(idx, bool):
            errors.append(f"initial.index: expected gamete 1..4, got {idx!r}")
        out["index"] = idx
    elif kind == "product-cline":
        margin = _number(errors, "initial.margin", initial.get("margin", 0.02), nonneg=True)
        if margin is not None and margin >= 0.5:
            errors.append("initial.margin: must be below 0.5")
        out["margin"] = margin
    elif kind == "tabulated" and "p" in initial:
        try:
            p = np.asarray(initial["p"], dtype=float)
        except (TypeError, ValueError):
            errors.append("initial.p: expected four lists of numbers")
            return
        n = cfg.grid.n_nodes if cfg.grid is not None else None
        if p.ndim != 2 or p.shape[0] != 4 or (n is not None and p.shape[1] != n):
            errors.append(f"initial.p: expected shape (4, {n}), got {p.shape}")
        elif not np.all(np.isfinite(p)) or p.min() < 0 or np.abs(p.sum(axis=0) - 1).max() > 1e-9:
            errors.append("initial.p: columns must be nonnegative and sum to 1")
        out["p"] = p
    cfg.initial = out


def _number_list_raw(errors, where, value, length):
    if not isinstance(value, list) or len(value) != length:
        errors.append(f"{where}: expected a list of {length} numbers")
        return None
    out = [_number(errors, f"{where}[{k}]", v) for k, v in enumerate(value)]
    return None if None in out else [float(v) for v in out]


def _parse_run(errors, cfg, run):
    if not isinstance(run, dict):
        return
    out = {}
    if "dt" in run:
        out["dt"] = _number(errors, "run.dt", run["dt"], positive=True)
    if "tol" in run:
        out["tol"] = _number(errors, "run.tol", run["tol"], nonneg=True)
    if "t_max" in run:
        out["t_max"] = _number(errors, "run.t_max", run["t_max"], positive=True)
    if "sample_times" in run:
        out["sample_times"] = _number_list(errors, "run.sample_times", run["sample_times"],
                                           nonneg=True)
    rep = run.get("representation", "gamete")
    if rep not in ("gamete", "allele"):
        errors.append(f"run.representation: expected 'gamete' or 'allele', got {rep!r}")
    out["representation"] = rep
    sink = run.get("sink", "auto")
    if sink not in ("auto", "implicit", "explicit"):
        errors.append(f"run.sink: expected 'auto', 'implicit' or 'explicit', got {sink!r}")
    out["sink"] = sink
    cfg.run = out


def _parse_sweep(errors, cfg, sweep):
    if not isinstance(sweep, dict):
        return
    out = {}
    for key in ("lambda", "rho"):
        if key in sweep:
            out[key] = _number_list(errors, f"sweep.{key}", sweep[key], nonneg=True)
    if not out:
        errors.append("[sweep]: give lambda and/or rho lists")
    task = sweep.get("task", "stability")
    if task not in SWEEP_TASKS:
        errors.append(f"sweep.task: expected one of {list(SWEEP_TASKS)}, got {task!r}")
    out["task"] = task
    cfg.sweep = out


def _weight_ok(weight):
    if isinstance(weight, str):
        if weight in ("alpha", "beta", "alpha+beta", "alpha-beta"):
            return True
        return (len(weight) == 3 and weight[0] == "h" and weight[1] in "1234"
                and weight[2] in "1234" and weight[1] != weight[2])
    return isinstance(weight, dict)


def _parse_sections(errors, cfg, raw):
    eig = raw.get("eigen")
    if isinstance(eig, dict):
        out = {"weight": eig.get("weight", "alpha"), "k": eig.get("k", 1)}
        if not _weight_ok(out["weight"]):
            errors.append(f"eigen.weight: unknown weight {out['weight']!r}")
        if "lambda" in eig:
            out["lambda"] = _number(errors, "eigen.lambda", eig["lambda"], nonneg=True)
        k = _number(errors, "eigen.k", out["k"], integer=True)
        if k is not None and k < 1:
            errors.append("eigen.k: must be >= 1")
        cfg.eigen = out

    eq = raw.get("equilibrium")
    if isinstance(eq, dict):
        kind = eq.get("kind", "internal")
        out = {"kind": kind, "seed": eq.get("seed", "auto")}
        if kind not in EQUILIBRIUM_KINDS:
            errors.append(f"equilibrium.kind: expected one of {list(EQUILIBRIUM_KINDS)}")
        if out["seed"] not in ("auto", "product-cline", "edge14", "edge23", "initial"):
            errors.append(f"equilibrium.seed: unknown seed {out['seed']!r}")
        if kind == "monomorphic":
            idx = eq.get("index")
            if idx not in (1, 2, 3, 4) or isinstance(idx, bool):
                errors.append("equilibrium.index: expected gamete 1..4")
            out["index"] = idx
        if kind == "edge":
            pair = eq.get("gametes")
            if (not isinstance(pair, list) or len(pair) != 2 or not all(v in (1, 2, 3, 4) for v in pair)
                    or pair[0] >= pair[1]):
                errors.append("equilibrium.gametes: expected [i, j] with 1 <= i < j <= 4")
            out["gametes"] = pair
        if kind == "cline":
            out["weight"] = eq.get("weight", "alpha")
            if not _weight_ok(out["weight"]):
                errors.append(f"equilibrium.weight: unknown weight {out['weight']!r}")
        for key in ("tol", "t_max"):
            if key in eq:
                out[key] = _number(errors, f"equilibrium.{key}", eq[key], positive=True)
        cfg.equilibrium = out

    st = raw.get("stability")
    if isinstance(st, dict):
        out = {"k": st.get("k", 8), "eliminate": st.get("eliminate"),
               "method": st.get("method", "auto")}
        k = _number(errors, "stability.k", out["k"], integer=True)
        if k is not None and k < 1:
            errors.append("stability.k: must be >= 1")
        if out["eliminate"] is not None and out["eliminate"] not in (1, 2, 3, 4):
            errors.append("stability.eliminate: expected gamete 1..4")
        if out["method"] not in ("auto", "dense", "shift-invert"):
            errors.append("stability.method: expected 'auto', 'dense' or 'shift-invert'")
        cfg.stability = out


def _parse_verify(errors, cfg, ver):
    if not isinstance(ver, dict):
        return
    out = {}
    suites = ver.get("suites", [s for s in SUITES if s in ver])
    if not isinstance(suites, list) or any(s not in SUITES for s in suites):
        errors.append(f"verify.suites: expected names from {list(SUITES)}")
        suites = []
    out["suites"] = list(suites)
    for suite in SUITES:
        table = ver.get(suite)
        if table is None:
            continue
        if not _check_keys(errors, f"[verify.{suite}]", table, _SUITE_KEYS[suite]):
            continue
        opts = {}
        for key, value in table.items():
            if key in ("rho", "d"):
                opts[key] = _number_list(errors, f"verify.{suite}.{key}", value, nonneg=True)
            elif key in ("n_starts", "n_ode_starts", "cells"):
                v = _number(errors, f"verify.{suite}.{key}", value, integer=True)
                if v is not None and v < 1:
                    errors.append(f"verify.{suite}.{key}: must be >= 1")
                opts[key] = v
            else:
                opts[key] = _number(errors, f"verify.{suite}.{key}", value, positive=True)
        if "lambda" in opts and "lambda_factor" in opts:
            errors.append(f"[verify.{suite}]: give lambda or lambda_factor, not both")
        out[suite] = opts
    cfg.verify = out
