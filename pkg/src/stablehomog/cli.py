"""Command line pipeline: validate, simulate, invariant, corrector,
homogenize, solve, study, report.

Every run writes its artifacts plus a manifest recording the seed, the
config hash, library versions, and the hash of each output file, so the
`report` command can audit a whole output directory end to end.  Exit
codes: 0 ok, 1 domain failure, 2 usage error.
"""

import argparse
import dataclasses
import fnmatch
import json
import os
import platform
import sys

import numpy as np
import scipy

from . import __version__
from .config import RunConfig, load_model
from .ergodic import (EmpiricalMeasure, compare_measures,
                      estimate_invariant_measure, invariance_check)
from .fields import FourierField, GridField, grid_points
from .homogenize import HomogenizedModel, _jsonable, homogenize_model
from .model import validate_assumptions
from .nonlocal_solver import Corrector, compute_corrector
from .pde import (error_table_csv, homogenization_error, plot_script,
                  solve_limit_spectral, solve_u_eps_mc)
from .sde import simulate_oscillating
from .storage import (ArtifactCache, file_sha256, field_table_csv,
                      measure_table_csv, path_table_csv, save_paths,
                      write_json, write_text)


class UsageError(ValueError):
    """Bad invocation rather than a failed computation."""


def _versions() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "stablehomog": __version__,
    }


def _emit_text(ctx, name: str, text: str):
    path = os.path.join(ctx["out_dir"], name)
    write_text(path, text)
    ctx["artifacts"][name] = path


def _emit_json(ctx, name: str, record: dict):
    path = os.path.join(ctx["out_dir"], name)
    write_json(path, _jsonable(record))
    ctx["artifacts"][name] = path


def _model(ctx):
    if "model" not in ctx:
        try:
            ctx["model"] = load_model(ctx["config"].model)
        except (FileNotFoundError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
        ctx["inputs"]["model"] = ctx["model"].fingerprint()
    return ctx["model"]


def _x_grid(dim: int, x_n: int) -> np.ndarray:
    return grid_points(dim, x_n)


# -- cached intermediates -----------------------------------------------------

def _corrector_arrays(corr: Corrector):
    meta = {"which": corr.which, "n": corr.n, "dim": corr.dim,
            "n_components": len(corr.components),
            "n_rhs": len(corr.rhs_fields)}
    arrays = {"jacobian": corr.jacobian, "residuals": corr.residuals,
              "shifts": corr.shifts}
    for i, comp in enumerate(corr.components):
        arrays[f"component{i}"] = comp.values
    for i, f in enumerate(corr.rhs_fields):
        arrays[f"rhs{i}_modes"] = f.modes
        arrays[f"rhs{i}_coeffs"] = f.coeffs
    return meta, arrays


def _corrector_from_arrays(meta: dict, arrays: dict) -> Corrector:
    dim = int(meta["dim"])
    comps = [GridField(dim, arrays[f"component{i}"])
             for i in range(int(meta["n_components"]))]
    rhs = [FourierField(dim, arrays[f"rhs{i}_modes"], arrays[f"rhs{i}_coeffs"])
           for i in range(int(meta["n_rhs"]))]
    return Corrector(
        which=meta["which"], n=int(meta["n"]), dim=dim, components=comps,
        jacobian=arrays["jacobian"], residuals=arrays["residuals"],
        shifts=arrays["shifts"], rhs_fields=rhs,
    )


def _get_correctors(ctx):
    if "correctors" in ctx:
        return ctx["correctors"]
    cfg = ctx["config"]
    model = _model(ctx)
    cache = ctx["cache"]
    pair = []
    for which in ("b_hat", "e_hat"):
        key = None
        corr = None
        if cache is not None:
            key = cache.key("corrector", model=ctx["inputs"]["model"],
                            n=cfg.n, which=which, variant="tilde")
            hit = cache.load(key)
            if hit is not None:
                corr = _corrector_from_arrays(*hit)
        if corr is None:
            corr = compute_corrector(which, model, None, n=cfg.n)
            if key is not None:
                cache.store(key, *_corrector_arrays(corr))
        pair.append(corr)
    ctx["correctors"] = tuple(pair)
    return ctx["correctors"]


def _get_measure(ctx) -> EmpiricalMeasure:
    if "measure" in ctx:
        return ctx["measure"]
    cfg = ctx["config"]
    model = _model(ctx)
    cache = ctx["cache"]
    key = None
    if cache is not None:
        key = cache.key("invariant", model=ctx["inputs"]["model"], dt=cfg.dt,
                        n_steps=cfg.n_steps, n_chains=cfg.n_chains,
                        bins=cfg.bins, burn=cfg.burn, seed=cfg.seed)
        hit = cache.load(key)
        if hit is not None:
            meta, arrays = hit
            ctx["measure"] = EmpiricalMeasure(
                model.dim, int(meta["bins"]), arrays["probs"],
                n_samples=int(meta["n_samples"]),
                n_chains=int(meta["n_chains"]),
                between_chain_tv=float(meta["between_chain_tv"]),
                converged=bool(meta["converged"]),
            )
            return ctx["measure"]
    burn = cfg.burn
    if burn is not None:
        burn = int(burn * cfg.n_steps) if burn < 1 else int(burn)
    measure = estimate_invariant_measure(
        model, dt=cfg.dt, n_steps=cfg.n_steps, n_chains=cfg.n_chains,
        bins=cfg.bins, burn=burn, master_seed=cfg.seed,
        n_workers=cfg.n_workers,
    )
    if key is not None:
        cache.store(
            key,
            {"bins": measure.bins, "n_samples": measure.n_samples,
             "n_chains": measure.n_chains,
             "between_chain_tv": measure.between_chain_tv,
             "converged": measure.converged},
            {"probs": measure.probs},
        )
    ctx["measure"] = measure
    return measure


def _get_hom(ctx) -> HomogenizedModel:
    if "hom" in ctx:
        return ctx["hom"]
    cfg = ctx["config"]
    model = _model(ctx)
    cache = ctx["cache"]
    key = None
    if cache is not None:
        key = cache.key("homogenized", model=ctx["inputs"]["model"], n=cfg.n,
                        sphere_n=cfg.sphere_n, mc_n=cfg.mc_n, seed=cfg.seed)
        hit = cache.load(key)
        if hit is not None:
            ctx["hom"] = HomogenizedModel.from_spec(hit[0])
            return ctx["hom"]
    hom = homogenize_model(
        model, n=cfg.n, sphere_n=cfg.sphere_n, mc_n=cfg.mc_n,
        master_seed=cfg.seed, correctors=_get_correctors(ctx),
    )
    if key is not None:
        cache.store(key, hom.to_spec(), {})
    ctx["hom"] = hom
    return hom


# -- subcommands --------------------------------------------------------------

def _cmd_validate(ctx):
    cfg = ctx["config"]
    report = validate_assumptions(
        _model(ctx), grid_n=min(cfg.n, 64), n_dirs=min(cfg.sphere_n, 64),
    )
    _emit_text(ctx, "validation.txt", report.summary() + "\n")
    _emit_json(ctx, "validation.json", {
        "ok": report.ok,
        "checks": [dataclasses.asdict(c) for c in report.checks],
    })
    if not report.ok:
        failing = [c.name for c in report.checks if not (c.passed or c.deferred)]
        raise RuntimeError(f"assumption checks failed: {', '.join(failing)}")


def _cmd_simulate(ctx):
    cfg = ctx["config"]
    model = _model(ctx)
    eps = cfg.epsilon[0]
    n_steps = max(1, int(round(cfg.t / cfg.dt)))
    x0 = np.tile(((np.arange(cfg.n_paths) + 0.5) / cfg.n_paths)[:, None],
                 (1, model.dim))
    res = simulate_oscillating(
        model, eps=eps, x0=x0, t_max=cfg.t, dt=cfg.dt, master_seed=cfg.seed,
        record_stride=max(1, n_steps // 200), delta=cfg.delta,
        small_jumps=cfg.small_jumps, n_workers=cfg.n_workers,
    )
    delta = cfg.delta if cfg.delta is not None else cfg.dt ** (1.0 / model.alpha)
    bin_path = os.path.join(ctx["out_dir"], "paths.bin")
    save_paths(bin_path, res, alpha=model.alpha, delta=delta, seed=cfg.seed)
    ctx["artifacts"]["paths.bin"] = bin_path
    _emit_text(ctx, "paths.csv", path_table_csv(res))


def _cmd_invariant(ctx):
    cfg = ctx["config"]
    model = _model(ctx)
    measure = _get_measure(ctx)
    pushed = invariance_check(model, measure, dt=cfg.dt, n_steps=1,
                              master_seed=cfg.seed)
    uniform = compare_measures(measure,
                               EmpiricalMeasure.uniform(model.dim, measure.bins))
    _emit_text(ctx, "measure.csv", measure_table_csv(measure))
    _emit_json(ctx, "invariant.json", {
        "bins": measure.bins, "n_samples": measure.n_samples,
        "n_chains": measure.n_chains,
        "between_chain_tv": measure.between_chain_tv,
        "converged": measure.converged,
        "tv_uniform": uniform.tv,
        "pushforward": {"tv": pushed.tv, "w1": pushed.w1,
                        "w1_exact": pushed.w1_exact},
    })


def _cmd_corrector(ctx):
    b_hat, e_hat = _get_correctors(ctx)
    record = {"n": b_hat.n}
    for corr in (b_hat, e_hat):
        for i, comp in enumerate(corr.components):
            _emit_text(ctx, f"{corr.which}_{i}.csv",
                       field_table_csv(comp.values, corr.dim))
        record[corr.which] = {
            "residual_sup": float(np.max(np.abs(corr.residuals))),
            "sup_norm": corr.sup_norm(),
            "components": len(corr.components),
        }
    _emit_json(ctx, "corrector.json", record)


def _cmd_homogenize(ctx):
    hom = _get_hom(ctx)
    _emit_json(ctx, "homogenized.json", hom.to_spec())
    ctx["inputs"]["homogenized"] = hom.fingerprint()


def _cmd_solve(ctx):
    cfg = ctx["config"]
    model = _model(ctx)
    hom = _get_hom(ctx)
    xs = _x_grid(model.dim, cfg.x_n)
    sol = solve_u_eps_mc(
        model, cfg.epsilon[0], cfg.t, xs, n_paths=cfg.n_paths, dt=cfg.dt,
        master_seed=cfg.seed, n_workers=cfg.n_workers,
    )
    ref = solve_limit_spectral(hom, model.initial_data, cfg.t, xs)
    cols = ["x"] if model.dim == 1 else ["x0", "x1"]
    lines = [",".join(cols + ["u_eps", "stderr", "u_limit"])]
    for i in range(len(xs)):
        row = ["%.17g" % v for v in xs[i]]
        row += ["%.17g" % sol["values"][i], "%.17g" % sol["stderr"][i],
                "%.17g" % ref[i]]
        lines.append(",".join(row))
    _emit_text(ctx, "solution.csv", "\n".join(lines) + "\n")
    _emit_json(ctx, "solve.json", {
        "epsilon": cfg.epsilon[0], "t": cfg.t, "n_paths": cfg.n_paths,
        "dt": cfg.dt, "sup_abs_err": float(np.abs(sol["values"] - ref).max()),
        "stderr_max": float(sol["stderr"].max()),
        "hom_provenance": hom.provenance,
    })
    ctx["inputs"]["homogenized"] = hom.fingerprint()


def _cmd_study(ctx):
    cfg = ctx["config"]
    model = _model(ctx)
    hom = _get_hom(ctx)
    report = homogenization_error(
        model, list(cfg.epsilon), cfg.t, _x_grid(model.dim, cfg.x_n),
        budgets={"n_paths": cfg.n_paths, "dt": cfg.dt, "hom_n": cfg.n,
                 "hom_mc_n": cfg.mc_n},
        master_seed=cfg.seed, hom=hom, n_workers=cfg.n_workers,
    )
    _emit_text(ctx, "study.csv", error_table_csv(report))
    lines = ["epsilon,sup_err,stderr_max,quad_error"]
    for row in report["rows"]:
        lines.append(",".join("%.17g" % v for v in
                              (row["eps"], row["sup_err"], row["stderr_max"],
                               row["quad_error"])))
    _emit_text(ctx, "study_summary.csv", "\n".join(lines) + "\n")
    _emit_text(ctx, "study_plot.py", plot_script("study.csv"))
    _emit_json(ctx, "study.json", {
        "t": report["t"], "epsilon": report["epsilon"],
        "rows": report["rows"],
        "nonincreasing_within_envelopes":
            report["nonincreasing_within_envelopes"],
        "quad_error": report["quad_error"],
        "hom_provenance": report["hom_provenance"],
    })
    ctx["inputs"]["homogenized"] = hom.fingerprint()


def _cmd_report(ctx):
    out_dir = ctx["out_dir"]
    problems = []
    commands = {}
    names = sorted(os.listdir(out_dir))
    for name in fnmatch.filter(names, "*_manifest.json"):
        if name == "report_manifest.json":
            continue
        with open(os.path.join(out_dir, name)) as fh:
            manifest = json.load(fh)
        entry = {"config_hash": manifest.get("config_hash"),
                 "seed": manifest.get("seed"),
                 "exit_code": manifest.get("exit_code"),
                 "artifacts": {}}
        try:
            stated = RunConfig.from_spec(manifest["config"]).config_hash()
            if stated != manifest["config_hash"]:
                problems.append(f"{name}: config hash mismatch")
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"{name}: unreadable config ({exc})")
        for art, digest in manifest.get("artifacts", {}).items():
            path = os.path.join(out_dir, art)
            if not os.path.exists(path):
                problems.append(f"{name}: missing artifact {art}")
                entry["artifacts"][art] = "missing"
            elif file_sha256(path) != digest:
                problems.append(f"{name}: hash mismatch for {art}")
                entry["artifacts"][art] = "mismatch"
            else:
                entry["artifacts"][art] = digest
        commands[manifest.get("command", name)] = entry

    # provenance links: averaged coefficients must come from the model
    # the manifests claim as input
    model_ids = {m.get("inputs", {}).get("model")
                 for m in map(_read_manifest, (os.path.join(out_dir, n)
                                               for n in fnmatch.filter(
                                                   names, "*_manifest.json")))
                 if m.get("inputs", {}).get("model")}
    for rec_name in ("homogenized.json", "study.json", "solve.json"):
        path = os.path.join(out_dir, rec_name)
        if not os.path.exists(path):
            continue
        with open(path) as fh:
            record = json.load(fh)
        prov = record.get("provenance", record.get("hom_provenance", {}))
        mid = prov.get("model_id")
        if mid and model_ids and not any(full.startswith(mid)
                                         for full in model_ids):
            problems.append(f"{rec_name}: model id {mid} matches no manifest")

    lines = ["run report", "=========="]
    for cmd, entry in sorted(commands.items()):
        lines.append(f"{cmd}: config {entry['config_hash']} seed "
                     f"{entry['seed']} artifacts {len(entry['artifacts'])}")
    lines.append("")
    if problems:
        lines.append("BROKEN provenance chain:")
        lines.extend("  - " + p for p in problems)
    else:
        lines.append("provenance chain verified: "
                     f"{sum(len(e['artifacts']) for e in commands.values())} "
                     "artifacts over "
                     f"{len(commands)} runs")
    _emit_text(ctx, "report.txt", "\n".join(lines) + "\n")
    _emit_json(ctx, "report.json", {
        "ok": not problems, "problems": problems, "commands": commands,
        "versions": _versions(),
    })
    if problems:
        raise RuntimeError("provenance chain broken: " + "; ".join(problems))


def _read_manifest(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError):
        return {}


_COMMANDS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "invariant": _cmd_invariant,
    "corrector": _cmd_corrector,
    "homogenize": _cmd_homogenize,
    "solve": _cmd_solve,
    "study": _cmd_study,
    "report": _cmd_report,
}


def run(command: str, config: RunConfig) -> int:
    """Execute one subcommand; returns the process exit code."""
    if command not in _COMMANDS:
        print(json.dumps({"error": "usage", "message":
                          f"unknown command {command!r}"}), file=sys.stderr)
        return 2
    os.makedirs(config.out_dir, exist_ok=True)
    ctx = {
        "config": config,
        "out_dir": config.out_dir,
        "artifacts": {},
        "inputs": {},
        "cache": ArtifactCache(config.resolve_cache_dir()) if config.cache
                 else None,
    }
    status = 0
    try:
        _COMMANDS[command](ctx)
    except UsageError as exc:
        status, err = 2, exc
    except Exception as exc:
        status, err = 1, exc
    if status:
        record = {"command": command, "status": "error", "exit_code": status,
                  "kind": type(err).__name__, "message": str(err)}
        _emit_json(ctx, "error.json", record)
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
    manifest = {
        "command": command,
        "seed": config.seed,
        "config": config.to_spec(),
        "config_hash": config.config_hash(),
        "versions": _versions(),
        "exit_code": status,
        "inputs": ctx["inputs"],
        "artifacts": {name: file_sha256(path)
                      for name, path in sorted(ctx["artifacts"].items())},
    }
    write_json(os.path.join(config.out_dir, f"{command}_manifest.json"),
               manifest)
    return status


# -- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stablehomog",
        description="homogenization pipeline for stable-noise driven models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    c = common.add_argument
    c("--config", metavar="FILE", help="JSON run settings; flags override")
    c("--model", help="preset name or model definition file")
    c("--out-dir")
    c("--seed", type=int)
    c("--cache", action=argparse.BooleanOptionalAction)
    c("--cache-dir")
    c("--n-workers", type=int)
    c("--epsilon", type=float, nargs="+", metavar="EPS")
    c("--t", type=float)
    c("--x-n", type=int)
    c("--n-paths", type=int)
    c("--dt", type=float)
    c("--small-jumps", choices=("gaussian", "discard"))
    c("--delta", type=float)
    c("--n-chains", type=int)
    c("--n-steps", type=int)
    c("--burn", type=float)
    c("--bins", type=int)
    c("--n", type=int)
    c("--sphere-n", type=int)
    c("--mc-n", type=int)
    c("--kappa", type=float)
    c("--tol", type=float)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "validate": "check the structural assumptions of a model",
        "simulate": "dump oscillating-process paths",
        "invariant": "estimate the invariant measure of the fast process",
        "corrector": "solve both cell problems",
        "homogenize": "compute the effective model",
        "solve": "solve the oscillating equation against its limit",
        "study": "run the convergence study over a list of scales",
        "report": "audit the manifests and provenance hashes",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    spec = {}
    if args.config:
        try:
            with open(args.config) as fh:
                spec = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
    for f in dataclasses.fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            spec[f.name] = value
    try:
        return RunConfig.from_spec(spec)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        config = config_from_args(args)
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)},
                         sort_keys=True), file=sys.stderr)
        return 2
    return run(args.command, config)


if __name__ == "__main__":
    sys.exit(main())
