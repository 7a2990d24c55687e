"""Command-line entry point.

Usage examples::

    twolocus simulate -c scenario.toml
    twolocus equilibrium -c scenario.toml --output-dir out/
    twolocus eigen -c scenario.toml
    twolocus stability -c scenario.toml
    twolocus sweep -c scenario.toml          # WORKER_COUNT=4 to run points in parallel
    twolocus verify strong-recombination     # built-in documented scenario
    twolocus verify -c scenario.toml large-d

Exit codes: 0 success, 1 numerical failure, 2 configuration error,
3 a verification suite failed.
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import SUITES, config_from_mapping, load_toml
from .dynamics import GameteState, compute_kappa, diagnostics_row, run_to_equilibrium, \
    stationary_residual
from .environment import pair_weight, profile_from_mapping
from .equilibria import (TOL_EQ, default_seeds, edge_equilibrium, effective_tol,
                         march_gamete, monomorphic, newton_gamete, product_seed,
                         seed_state, single_locus_cline, classify_profile, EquilibriumProfile)
from .errors import ConfigError, PreconditionError, TwoLocusError
from .scenarios import scenario
from .spectral import WeightedEigenProblem, lambda_0, lambda_h, lambda_star, scalar_spectrum, \
    smallest_eigenvalue
from .stability import spectral_bound, assemble_linearization
from . import verify as V

log = logging.getLogger("twolocus")

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2, 3
PROFILE_COLUMNS = ("x", "p1", "p2", "p3", "p4", "pA", "pB", "D")
DIAGNOSTIC_COLUMNS = ("t", "residual", "kappa", "max_abs_D", "gradient_ratio")


# ---------------------------------------------------------------------------
# Formatting


def fmt(v):
    """Shortest round-trip decimal for floats; str for everything else."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set)):
        items = sorted(obj) if isinstance(obj, set) else obj
        return [jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # strict JSON has no inf/nan
        return v if math.isfinite(v) else repr(v)
    return obj


def json_bytes(obj):
    return (json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n").encode()


def csv_bytes(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue().encode()


def profile_rows(grid, state):
    p = state.p
    pa = p[0] + p[1]
    pb = p[0] + p[2]
    d = p[0] * p[3] - p[1] * p[2]
    return [(grid.x[k], p[0, k], p[1, k], p[2, k], p[3, k], pa[k], pb[k], d[k])
            for k in range(grid.n_nodes)]


# ---------------------------------------------------------------------------
# Output directory with manifest


class OutputWriter:
    """Single writer for one command: manifest first, then checksummed results."""

    def __init__(self, directory, command, config_echo):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "artifact": "twolocus",
            "version": __version__,
            "command": command,
            "config": config_echo,
            "status": "running",
            "outputs": [],
        }
        self.errors = []
        self._write_manifest()

    def _write_manifest(self):
        (self.dir / "manifest.json").write_bytes(json_bytes(self.manifest))

    def write(self, name, data):
        (self.dir / name).write_bytes(data)
        self.manifest["outputs"] = [o for o in self.manifest["outputs"] if o["name"] != name]
        self.manifest["outputs"].append(
            {"name": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})

    def json(self, name, obj):
        body = {"manifest": "manifest.json"}
        body.update(obj)
        self.write(name, json_bytes(body))

    def csv(self, name, header, rows):
        self.write(name, csv_bytes(header, rows))

    def error(self, exc, context=None):
        rec = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigError):
            rec["items"] = exc.errors
        if context:
            rec["context"] = context
        self.errors.append(rec)

    def finish(self, code):
        if self.errors:
            self.write("errors.json", json_bytes({"exit_code": code, "errors": self.errors}))
        self.manifest["status"] = "ok" if code == EXIT_OK else "failed"
        self.manifest["exit_code"] = code
        self._write_manifest()
        return code


def config_echo(cfg):
    echo = {"input": cfg.raw, "seed": cfg.seed}
    if cfg.grid is not None:
        echo["grid"] = {"L": cfg.grid.length, "N": cfg.grid.n_nodes, "dx": cfg.grid.dx}
    if cfg.env is not None:
        echo["environment"] = {"alpha_mean": cfg.env.alpha_mean, "beta_mean": cfg.env.beta_mean,
                               "sign_change": cfg.env.sign_change}
    if cfg.params is not None:
        p = cfg.params
        echo["params"] = {"lambda": p.lam, "rho": p.rho, "d": p.d, "s": p.s, "r": p.r}
    return echo


# ---------------------------------------------------------------------------
# Building blocks shared by the commands


def resolve_weight(env, spec):
    if isinstance(spec, dict):
        return profile_from_mapping(spec).sample(env.grid)
    named = {"alpha": env.alpha, "beta": env.beta, "alpha+beta": env.alpha + env.beta,
             "alpha-beta": env.alpha - env.beta}
    if spec in named:
        return np.array(named[spec])
    return pair_weight(env, int(spec[1]), int(spec[2]))


def initial_state(cfg, params):
    init = cfg.initial
    grid = cfg.grid
    kind = init["type"]
    if kind == "uniform":
        return GameteState.constant(init.get("freqs", [0.25] * 4), grid.n_nodes)
    if kind == "vertex":
        return monomorphic(init["index"], grid).state
    if kind == "product-cline":
        return product_seed(cfg.env, params.lam, init.get("margin", 0.02))
    return GameteState(init["p"])


def _search_from(start, env, params, tol, t_max):
    marched, t, march_res, _ = march_gamete(start, env, params, t_max=t_max)
    state, res, its, ok, info = newton_gamete(marched, env, params, tol)
    kind = classify_profile(state, res, ok, tol)
    meta = {"march_time": t, "march_residual": march_res, "newton_iterations": its, **info}
    return EquilibriumProfile(state, kind, (1, 2, 3, 4) if kind == "internal" else (),
                              res, ok, None, meta)


def find_equilibrium(cfg, params):
    """The equilibrium selected by [equilibrium]; None when it does not exist."""
    opts = cfg.equilibrium or {"kind": "internal", "seed": "auto"}
    env = cfg.env
    kind = opts["kind"]
    tol = opts.get("tol", TOL_EQ)
    t_max = opts.get("t_max", 2e3)
    if kind == "monomorphic":
        eq = monomorphic(opts["index"], cfg.grid)
        eq.residual = stationary_residual(eq.state, env, params)
        return eq
    if kind == "edge":
        i, j = opts["gametes"]
        eq = edge_equilibrium(i, j, env, params.lam, params.rho, tol)
        if eq is None:
            return None
        if params.rho > 0 and not eq.meta["rho_admissible"]:
            return None
        eq.residual = eq.meta["residual_at_rho"]
        return eq
    if kind == "cline":
        raise PreconditionError("a single-locus cline is not a two-locus equilibrium")
    seed = opts.get("seed", "auto")
    if seed == "initial":
        starts = [initial_state(cfg, params)]
    elif seed == "auto":
        starts = default_seeds(params.rho)
    else:
        starts = [seed]
    found = []
    for s in starts:
        try:
            start = s if isinstance(s, GameteState) else seed_state(s, env, params)
        except PreconditionError:
            continue  # an edge seed that does not exist at this lambda
        eq = _search_from(start, env, params, tol, t_max)
        eq.meta["seed"] = s if isinstance(s, str) else "initial"
        found.append(eq)
        if eq.converged and eq.kind == "internal":
            return eq
    converged = [e for e in found if e.converged]
    if converged:
        return converged[0]
    if found:
        return found[0]
    raise PreconditionError("no usable seed for the equilibrium search")


def equilibrium_header(eq, params):
    if eq is None:
        return {"class": "absent", "lambda": params.lam, "rho": params.rho}
    return {
        "class": eq.kind,
        "residual": eq.residual,
        "lambda": params.lam,
        "rho": params.rho,
        "kappa": compute_kappa(eq.allele),
        "converged": eq.converged,
        "gametes": list(eq.gametes),
        "min_component": eq.min_component,
        "meta": {k: v for k, v in eq.meta.items() if k != "newton"},
    }


def _params_at(cfg, lam=None, rho=None):
    base = cfg.params
    return base.with_(lam=base.lam if lam is None else lam, rho=base.rho if rho is None else rho)


# ---------------------------------------------------------------------------
# Commands


def cmd_simulate(cfg, out):
    cfg.require("grid", "env", "params")
    params = cfg.params
    run = cfg.run
    state = initial_state(cfg, params)
    result = run_to_equilibrium(state, cfg.env, params,
                                representation=run.get("representation", "gamete"),
                                tol=run.get("tol", 1e-8), t_max=run.get("t_max", 100.0),
                                dt=run.get("dt"), sample_times=run.get("sample_times") or (),
                                sink=run.get("sink", "auto"))
    dt = result.dt
    total = int(math.ceil(run.get("t_max", 100.0) / dt - 1e-9))
    names = {}
    for s in run.get("sample_times") or ():
        names.setdefault(min(int(round(s / dt)), total), s)
    for t, snap in result.profiles.items():
        label = names.get(int(round(t / dt)), t)
        out.csv(f"profile_{fmt(float(label))}.csv", PROFILE_COLUMNS,
                profile_rows(cfg.grid, snap))
    out.csv("profile_final.csv", PROFILE_COLUMNS, profile_rows(cfg.grid, result.state))
    rows = list(result.diagnostics)
    if not rows or rows[-1]["t"] != result.t:
        rows.append(diagnostics_row(result.t, result.state, cfg.env, params))
    out.csv("diagnostics.csv", DIAGNOSTIC_COLUMNS,
            [[r[c] for c in DIAGNOSTIC_COLUMNS] for r in rows])
    out.json("simulate.json", {
        "converged": result.converged, "t": result.t, "steps": result.steps,
        "residual": result.residual, "max_drift": result.max_drift, "dt": dt,
        "min_component": float(result.state.p.min()),
        "kappa": compute_kappa(result.allele),
    })
    log.info("simulate: t=%s steps=%d converged=%s", result.t, result.steps, result.converged)
    return EXIT_OK


def cmd_equilibrium(cfg, out):
    cfg.require("grid", "env", "params")
    params = cfg.params
    opts = cfg.equilibrium or {}
    if opts.get("kind") == "cline":
        h = resolve_weight(cfg.env, opts["weight"])
        cline = single_locus_cline(h, params.lam, cfg.grid, opts.get("tol", TOL_EQ))
        out.csv("cline.csv", ("x", "theta"), list(zip(cfg.grid.x, cline.theta)))
        out.json("cline.json", {"class": cline.kind, "residual": cline.residual,
                                "lambda": params.lam, "lambda_h": cline.lambda_h,
                                "converged": cline.converged})
        return EXIT_OK if cline.converged else _fail(out, "cline Newton did not converge")
    eq = find_equilibrium(cfg, params)
    if eq is not None:
        out.csv("equilibrium.csv", PROFILE_COLUMNS, profile_rows(cfg.grid, eq.state))
    out.json("equilibrium.json", equilibrium_header(eq, params))
    if eq is not None and not eq.converged:
        return _fail(out, f"equilibrium search did not converge (residual {eq.residual:.3e})")
    return EXIT_OK


def cmd_stability(cfg, out):
    cfg.require("grid", "env", "params")
    params = cfg.params
    opts = cfg.stability or {}
    eq = find_equilibrium(cfg, params)
    header = equilibrium_header(eq, params)
    if eq is None:
        out.json("stability.json", {"equilibrium": header})
        return _fail(out, "the requested equilibrium does not exist")
    eliminate = opts.get("eliminate")
    if eliminate is None:
        eliminate = eq.gametes[0] if eq.kind == "monomorphic" else 4
    op = assemble_linearization(eq, cfg.env, params, eliminate)
    rep = spectral_bound(op, opts.get("k", 8), opts.get("method", "auto"))
    out.json("stability.json", {"equilibrium": header, "eliminate": eliminate, **rep.as_dict()})
    log.info("stability: %s (leading bound %s)", rep.verdict, rep.leading_bound)
    return EXIT_OK


def eigen_record(cfg):
    opts = cfg.eigen or {"weight": "alpha", "k": 1}
    grid = cfg.grid
    h = resolve_weight(cfg.env, opts["weight"])
    lam = opts.get("lambda")
    if lam is None and cfg.params is not None:
        lam = cfg.params.lam
    star = lambda_star(h, grid)
    try:
        l0 = lambda_0(h, grid)
    except PreconditionError:
        l0 = None
    lh = lambda_h(h, grid) if h.min() < 0.0 < h.max() else None
    at = lam if lam is not None else star
    record = {"weight": opts["weight"], "N": grid.n_nodes, "lambda": at, "mu1": None,
              "residual": None, "lambda_star": star, "lambda_0": l0, "lambda_h": lh}
    if at is not None:
        res = smallest_eigenvalue(WeightedEigenProblem(grid, h, at))
        record["mu1"] = res.mu
        record["residual"] = res.residual
        record["eigenvalues"] = scalar_spectrum(grid, h, at, opts.get("k", 1))
    return record


def cmd_eigen(cfg, out):
    cfg.require("grid", "env")
    record = eigen_record(cfg)
    out.json("eigen.json", record)
    sys.stdout.write(json_bytes(record).decode())
    return EXIT_OK


def _fail(out, message):
    out.errors.append({"type": "NumericalFailure", "message": message})
    return EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# Sweeps


SWEEP_COLUMNS = {
    "stability": ("index", "lambda", "rho", "class", "residual", "kappa", "converged",
                  "leading_bound", "verdict", "error"),
    "equilibrium": ("index", "lambda", "rho", "class", "residual", "kappa", "converged",
                    "min_component", "error"),
    "simulate": ("index", "lambda", "rho", "converged", "t", "steps", "residual", "kappa",
                 "max_abs_D", "max_drift", "error"),
}


def sweep_point(raw, index, lam, rho):
    """Evaluate one sweep point; returns (index, row dict, profile rows or None)."""
    cfg = config_from_mapping(raw)
    params = _params_at(cfg, lam, rho)
    task = cfg.sweep["task"]
    row = {"index": index, "lambda": lam, "rho": rho}
    profile = None
    try:
        if task == "simulate":
            run = cfg.run
            res = run_to_equilibrium(initial_state(cfg, params), cfg.env, params,
                                     representation=run.get("representation", "gamete"),
                                     tol=run.get("tol", 1e-8), t_max=run.get("t_max", 100.0),
                                     dt=run.get("dt"), sink=run.get("sink", "auto"))
            a = res.allele
            row.update(converged=res.converged, t=res.t, steps=res.steps,
                       residual=res.residual, kappa=compute_kappa(a),
                       max_abs_D=float(np.abs(a.D).max()), max_drift=res.max_drift)
            profile = profile_rows(cfg.grid, res.state)
        else:
            eq = find_equilibrium(cfg, params)
            head = equilibrium_header(eq, params)
            row.update({k: head.get(k) for k in ("class", "residual", "kappa", "converged",
                                                 "min_component")})
            if eq is not None:
                profile = profile_rows(cfg.grid, eq.state)
            if task == "stability" and eq is not None:
                tol = 10.0 * effective_tol(cfg.grid)
                if eq.residual <= tol:
                    el = eq.gametes[0] if eq.kind == "monomorphic" else 4
                    rep = spectral_bound(assemble_linearization(eq, cfg.env, params, el), 1)
                    row.update(leading_bound=rep.leading_bound, verdict=rep.verdict)
                else:
                    row["error"] = "not stationary; stability skipped"
    except TwoLocusError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return index, row, profile


def worker_count():
    try:
        return max(1, int(os.environ.get("WORKER_COUNT", "1")))
    except ValueError:
        raise ConfigError(f"WORKER_COUNT must be an integer, got {os.environ['WORKER_COUNT']!r}")


def cmd_sweep(cfg, out):
    cfg.require("grid", "env", "params")
    if not cfg.sweep:
        raise ConfigError("[sweep] is required for the sweep command")
    points = cfg.resolved_runs()
    task = cfg.sweep["task"]
    workers = min(worker_count(), len(points))
    results = [None] * len(points)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(sweep_point, cfg.raw, *pt) for pt in points]
            for fut in futures:
                index, row, prof = fut.result()
                results[index] = (row, prof)
    else:
        for pt in points:
            index, row, prof = sweep_point(cfg.raw, *pt)
            results[index] = (row, prof)
    # single writer, index order
    columns = SWEEP_COLUMNS[task]
    failed = 0
    for row, prof in results:
        if prof is not None:
            out.csv(f"sweep_{row['index']:04d}_profile.csv", PROFILE_COLUMNS, prof)
        if row.get("error"):
            failed += 1
            out.errors.append({"type": "SweepPointError", "message": row["error"],
                               "context": {"index": row["index"], "lambda": row["lambda"],
                                           "rho": row["rho"]}})
    out.csv("sweep.csv", columns, [[row.get(c) for c in columns] for row, _ in results])
    log.info("sweep: %d points, %d with errors", len(points), failed)
    return EXIT_NUMERICAL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# Verification suites


def _suite_lambda(suite, opts, env, cfg):
    if "lambda" in opts:
        return opts["lambda"]
    if "lambda_factor" in opts:
        f = opts["lambda_factor"]
        if suite == "weak-recombination":
            from .equilibria import edge_threshold
            l14 = edge_threshold(1, 4, env)
            if l14 is None:
                raise PreconditionError("alpha + beta does not change sign; no 14-edge cline")
            return f * l14
        return f * max(lambda_h(env.alpha, env.grid), lambda_h(env.beta, env.grid))
    if cfg is not None and cfg.params is not None:
        return cfg.params.lam
    raise ConfigError(f"[verify.{suite}] needs lambda or lambda_factor")


def run_suite(suite, cfg):
    """Run one named suite on a parsed config; returns a list of TheoremReports."""
    cfg.require("grid")
    opts = dict(cfg.verify.get(suite, {}))
    seed = cfg.seed
    if suite == "no-recombination":
        return V.verify_no_recombination_suite(cfg.grid, seed=seed,
                                               n_starts=opts.get("n_starts", 5))
    cfg.require("env")
    env = cfg.env
    if suite == "monomorphic-thresholds":
        kw = {k: opts[k] for k in ("cells", "span") if k in opts}
        return [V.verify_monomorphic_thresholds(env, tuple(opts.get("rho", (0.0, 1.0, 2.0))),
                                                **kw)]
    if suite == "weak-recombination":
        lam = _suite_lambda(suite, opts, env, cfg)
        kw = {"rhos": tuple(opts["rho"])} if "rho" in opts else {}
        return [V.verify_weak_recombination(env, lam, n_starts=opts.get("n_starts", 8),
                                            seed=seed, **kw)]
    if suite == "strong-recombination":
        lam = _suite_lambda(suite, opts, env, cfg)
        return [V.verify_strong_recombination(env, lam, tuple(opts.get("rho", (50.0, 100.0, 200.0))),
                                              n_starts=opts.get("n_starts", 3), seed=seed,
                                              t_max=opts.get("t_max", 2e3))]
    if suite == "large-d":
        s = opts.get("s", cfg.params.s if cfg.params and cfg.params.s else None)
        r = opts.get("r", cfg.params.r if cfg.params and cfg.params.r is not None else None)
        if s is None or r is None:
            raise ConfigError("[verify.large-d] needs s and r (or [params] d, s, r)")
        kw = {k: opts[k] for k in ("n_starts", "n_ode_starts", "horizon", "dist_tol") if k in opts}
        return [V.verify_large_d_global_stability(env, s, r, d_list=opts.get("d"), seed=seed,
                                                  **kw)]
    raise ConfigError(f"unknown suite {suite!r}")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return fmt(v)


def cmd_verify(cfgs, suites, out):
    """``cfgs`` maps suite name to a list of parsed configs (one per scenario)."""
    code = EXIT_OK
    summary = []
    for suite in suites:
        reports = []
        for k, cfg in enumerate(cfgs[suite]):
            try:
                reps = run_suite(suite, cfg)
            except ConfigError:
                raise
            except TwoLocusError as exc:
                out.error(exc, {"suite": suite, "scenario_index": k})
                code = EXIT_NUMERICAL
                continue
            for rep in reps:
                reports.append(rep.as_dict())
                slope, r2, threshold = rep.headline()
                summary.append((suite, k, rep.theorem, rep.scenario, rep.verdict,
                                _cell(slope), _cell(r2), _cell(threshold)))
                log.info("%s[%d] %s: %s", suite, k, rep.scenario, rep.verdict)
        out.json(f"report_{suite}.json", {"suite": suite, "reports": reports})
    out.csv("verify_summary.csv", ("suite", "scenario_index", "theorem", "scenario", "verdict",
                                    "slope", "r2", "threshold"), summary)
    if code == EXIT_OK and any(row[4] == "fail" for row in summary):
        code = EXIT_VERIFY
    return code


# ---------------------------------------------------------------------------
# Entry point


COMMANDS = {"simulate": cmd_simulate, "equilibrium": cmd_equilibrium, "eigen": cmd_eigen,
            "stability": cmd_stability, "sweep": cmd_sweep}


def build_parser():
    parser = argparse.ArgumentParser(prog="twolocus",
                                     description="Two-locus migration-selection clines.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only warnings on stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"simulate": "time-march from the initial data",
             "equilibrium": "locate and classify one equilibrium",
             "eigen": "principal eigenvalue and thresholds of a weight",
             "stability": "linear stability of the configured equilibrium",
             "sweep": "run a task over the lambda/rho sweep axes"}
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("-c", "--config", required=True, help="scenario TOML file")
        p.add_argument("-o", "--output-dir", help="overrides output_dir from the config")
    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("suites", nargs="*", help=f"suite names ({', '.join(SUITES)}); default all")
    p.add_argument("-c", "--config", help="scenario TOML file; built-in scenarios if omitted")
    p.add_argument("-o", "--output-dir")
    return parser


def _fallback_dir(args, raw):
    if args.output_dir:
        return args.output_dir
    if isinstance(raw, dict) and isinstance(raw.get("output_dir"), str) and raw["output_dir"]:
        return raw["output_dir"]
    return "twolocus_out"


def _load(args):
    """Parse the config; returns (raw, cfg) where cfg is None when config-less verify."""
    if args.config is None:
        return None, None
    raw = load_toml(args.config)
    return raw, config_from_mapping(raw)


def _verify_configs(args, cfg):
    unknown = [s for s in args.suites if s not in SUITES]
    if unknown:
        raise ConfigError([f"unknown suite {s!r}; choose from {list(SUITES)}" for s in unknown])
    if cfg is None:
        suites = args.suites or list(SUITES)
        return suites, {s: [config_from_mapping(m) for m in scenario(s)] for s in suites}
    suites = args.suites or cfg.verify.get("suites") or [s for s in SUITES if s in cfg.verify]
    if not suites:
        raise ConfigError("no verification suites named on the command line or in [verify]")
    return suites, {s: [cfg] for s in suites}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s")
    raw = None
    try:
        raw, cfg = _load(args)
        out_dir = _fallback_dir(args, raw) if cfg is None else (args.output_dir or cfg.output_dir)
        if args.command == "verify":
            suites, cfgs = _verify_configs(args, cfg)
            echo = {"suites": suites,
                    "scenarios": {s: [config_echo(c) for c in cfgs[s]] for s in suites}}
        else:
            echo = config_echo(cfg)
    except ConfigError as exc:
        return _config_failure(args, raw, exc)

    out = OutputWriter(out_dir, args.command, echo)
    try:
        if args.command == "verify":
            code = cmd_verify(cfgs, suites, out)
        else:
            code = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        out.error(exc)
        for item in exc.errors:
            log.error("config: %s", item)
        return out.finish(EXIT_CONFIG)
    except TwoLocusError as exc:
        out.error(exc)
        log.error("%s: %s", type(exc).__name__, exc)
        return out.finish(EXIT_NUMERICAL)
    return out.finish(code)


def _config_failure(args, raw, exc):
    for item in exc.errors:
        log.error("config: %s", item)
    out = OutputWriter(_fallback_dir(args, raw), args.command, {"input": raw})
    out.error(exc)
    return out.finish(EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
