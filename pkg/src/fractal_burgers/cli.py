"""Command-line front end: ``fbv kernel | lemmas | solve | verify | report``.

Every invocation writes into one run directory (``--out``, or
``$FBV_OUT_DIR/<command>-<config digest>``) and leaves a ``manifest.json``
there.  Options can also come from a JSON file given with ``--config``;
explicit flags win over the file, which wins over the built-in defaults.

Exit codes: 0 pass, 2 usage, 3 I/O or numerical failure, 4 a checked
assertion failed, 5 a solver did not converge.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConvergenceError, DomainError, FractalBurgersError, QuadratureError
from .grid import Grid1D, Profile
from .kernel import KernelParams, density, envelope, gradient
from .storage import (MANIFEST_NAME, SCHEMA_VERSION, RunManifest, config_digest, load_profile, read_json,
                      save_profile, write_json)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICS, EXIT_ASSERTION, EXIT_CONVERGENCE = 0, 2, 3, 4, 5
OUT_ENV = "FBV_OUT_DIR"


class UsageError(Exception):
    """Invalid flags or configuration (exit 2)."""


class AssertionFailure(Exception):
    """A hard check failed (exit 4); reports have already been written."""


class Run:
    """Output directory, manifest and stage timer of one invocation."""

    def __init__(self, command: str, root: Path, config: dict):
        self.root = root
        self.manifest = RunManifest(command, config)

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.manifest.stage_seconds[name] = self.manifest.stage_seconds.get(name, 0.0) + \
                time.perf_counter() - start

    def path(self, name: str) -> Path:
        return self.root / name

    def emit_json(self, name: str, obj) -> Path:
        p = write_json(self.path(name), obj)
        self.manifest.add_output(p, self.root)
        return p

    def emit_profile(self, name: str, profile: Profile, extra: dict) -> Path:
        csv_path, side = save_profile(profile, self.path(name), extra)
        self.manifest.add_output(csv_path, self.root)
        self.manifest.add_output(side, self.root)
        return csv_path


# ---------------------------------------------------------------------------
# helpers


def _kernel_params(d: int, alpha: float) -> KernelParams:
    try:
        return KernelParams(int(d), float(alpha))
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _grid(args) -> Grid1D:
    try:
        return Grid1D(float(args.grid_L), int(args.grid_n))
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _solver_config(alpha: float, M: float, b: float, grid: Grid1D, **kw):
    from .solver import SolverConfig

    try:
        return SolverConfig(_kernel_params(1, alpha), M=float(M), b=float(b), grid=grid, **kw)
    except (DomainError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _solver_options(args) -> dict:
    return {"picard_tol": args.tol, "picard_max_iter": args.max_iter, "relaxation": args.relaxation,
            "evolution_t0": args.t0, "evolution_steps": args.steps, "ray_nodes": args.ray_nodes}


def _sup_rel(a: np.ndarray, b: np.ndarray, mask=None) -> float:
    mask = slice(None) if mask is None else mask
    return float(np.max(np.abs(a[mask] - b[mask])) / np.max(np.abs(b)))


# ---------------------------------------------------------------------------
# kernel


def cmd_kernel(args, run: Run) -> int:
    params = _kernel_params(args.d, args.alpha)
    if not args.t > 0:
        raise UsageError("--t must be positive")
    grid = _grid(args)
    x = grid.x
    pos = x if params.d == 1 else np.stack([x] + [np.zeros_like(x)] * (params.d - 1), axis=-1)
    with run.stage("evaluate"):
        p = density(params, args.t, pos)
        dp = gradient(params, args.t, pos)
        dp = dp if params.d == 1 else dp[:, 0]
        env = envelope(params, args.t, pos)
        ratio = p / env
    if not np.all(np.isfinite(p)):
        raise FractalBurgersError("kernel evaluation produced non-finite values")
    out = run.path("kernel.csv")
    with out.open("w", newline="") as fh:
        fh.write("x,p,dp,envelope,ratio\n")
        for row in zip(x, p, dp, env, ratio):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    run.manifest.add_output(out, run.root)
    summary = {"d": params.d, "alpha": params.alpha, "t": args.t, "grid": grid.to_dict(),
               "columns": {"x": "position along the first axis", "p": "density", "dp": "first gradient component",
                           "envelope": "t / (t^(1/alpha) + |x|)^(d+alpha)", "ratio": "p / envelope"},
               "ratio_inf": float(ratio.min()), "ratio_sup": float(ratio.max()),
               "normalization": float(grid.h * p.sum()) if params.d == 1 else None,
               "manifest": MANIFEST_NAME}
    run.emit_json("kernel.json", summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# lemmas


def _sweep_spec(raw) -> dict:
    if raw is None:
        return {}
    if isinstance(raw, dict):
        spec = raw
    else:
        import json

        text = Path(raw).read_text() if Path(raw).is_file() else raw
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--sweep-spec is neither a file nor JSON: {exc}") from None
    if not isinstance(spec, dict):
        raise UsageError("--sweep-spec must be a JSON object")
    allowed = {"x", "v", "points", "times", "radii"}
    unknown = set(spec) - allowed
    if unknown:
        raise UsageError(f"unknown sweep keys {sorted(unknown)}; allowed: {sorted(allowed)}")
    for key, val in spec.items():
        if not isinstance(val, list) or len(val) == 0:
            raise UsageError(f"empty sweep for {key!r}")
    return spec


def cmd_lemmas(args, run: Run) -> int:
    from .functionals import (FunctionalParams, ball_mass_bracket, hh_bracket, tech_bracket, verify_C2)

    alphas = list(args.alpha or [])
    if not alphas:
        raise UsageError("empty sweep: give at least one --alpha")
    if not 0.0 <= args.beta < 1.0:
        raise UsageError("--beta must lie in [0, 1)")
    spec = _sweep_spec(args.sweep_spec)
    failed = []
    for a in alphas:
        params = _kernel_params(1, a)
        fp = FunctionalParams(params, beta=args.beta if args.beta > 0 else 0.5)
        tag = f"alpha{a:g}"
        reports = []
        with run.stage("C2_identity"):
            reports.append(verify_C2(fp, xs=spec.get("x", (0.0, 2.0, 10.0))))
        with run.stage("tech_integral"):
            reports.append(tech_bracket(a, args.beta, vs=spec.get("v")))
        if args.beta > 0:
            with run.stage("HH_composition"):
                reports.append(hh_bracket(fp, points=spec.get("points", (0.0, 1.0, -1.0, 5.0, -5.0, 20.0, -20.0))))
        with run.stage("ball_mass"):
            reports.append(ball_mass_bracket(params, times=spec.get("times"), radii=spec.get("radii")))
        for rep in reports:
            run.emit_json(f"lemma_{rep.lemma_id}_{tag}.json", {**rep.to_dict(), "manifest": MANIFEST_NAME})
            if not rep.passed:
                failed.append(f"{rep.lemma_id} at alpha={a:g}")
    if failed:
        raise AssertionFailure("lemma brackets violated: " + ", ".join(failed))
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args, run: Run) -> int:
    from .solver import duhamel_residual, evolve_spectral, evolve_spectral_extrapolated, picard_solve

    if args.method not in ("picard", "spectral", "both"):
        raise UsageError("--method must be picard, spectral or both")
    cfg = _solver_config(args.alpha, args.M, args.b, _grid(args), **_solver_options(args))
    checkpoints = sorted(float(c) for c in (args.checkpoints or []))
    if any(not c > cfg.evolution_t0 for c in checkpoints):
        raise UsageError("checkpoints must exceed the evolution start time")
    base = {"config": cfg.to_dict()}
    produced: dict[str, Profile] = {}
    if args.method in ("picard", "both"):
        try:
            with run.stage("picard"):
                result = picard_solve(cfg)
        except ConvergenceError as exc:
            run.emit_json("picard_trace.json", {"config": cfg.to_dict(), "trace": getattr(exc, "trace", []),
                                                "error": str(exc), "manifest": MANIFEST_NAME})
            raise
        with run.stage("residual"):
            res = duhamel_residual(result.profile, cfg)
        run.emit_profile("profile_picard.csv", result.profile,
                         {**base, "producer": "picard", "residual": res, "trace": result.trace})
        produced["picard"] = result.profile
    if args.method in ("spectral", "both"):
        evolve = evolve_spectral_extrapolated if args.extrapolate else evolve_spectral
        with run.stage("spectral"):
            profiles = evolve(cfg, t_end=max([1.0] + checkpoints), checkpoints=[1.0] + checkpoints)
        for t, prof in sorted(profiles.items()):
            extra = {**base, "producer": prof.meta["producer"]}
            if abs(t - 1.0) < 1e-12:
                with run.stage("residual"):
                    extra["residual"] = duhamel_residual(prof, cfg)
                run.emit_profile("profile_spectral.csv", prof, extra)
                produced["spectral"] = prof
            else:
                run.emit_profile(f"profile_spectral_t{t:g}.csv", prof, extra)
    if len(produced) == 2:
        u, v = produced["picard"].values, produced["spectral"].values
        window = np.abs(cfg.grid.x) <= args.window
        run.emit_json("diff.json", {"sup_relative_difference": _sup_rel(v, u),
                                    "sup_relative_difference_window": _sup_rel(v, u, window),
                                    "window": args.window, "config": cfg.to_dict(),
                                    "manifest": MANIFEST_NAME})
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def verify_profile(profile: Profile, eta: float = 0.5, window: float = 50.0, tail_radius: float = 30.0,
                   eps_levels=None) -> dict[str, Any]:
    """All per-profile checks; ``checks`` holds the hard assertions."""
    from .verify import (decay_check, gradient_bound_check, lower_bound_replay, proof_replay, ratio_report,
                         rescale_profile)

    report: dict[str, Any] = {"meta": {k: v for k, v in profile.meta.items() if k != "seconds"},
                              "grid": profile.grid.to_dict()}
    t = float(profile.meta.get("t", 1.0))
    if t != 1.0:
        # the replayed bounds live at t = 1; self-similarity maps u(t) there exactly
        profile = rescale_profile(profile, 1.0 / t)
        report["rescaled_from_t"] = t
        report["grid_at_t1"] = profile.grid.to_dict()
    checks: dict[str, bool] = {}
    try:
        rr = ratio_report(profile, window, tail_radius)
    except DomainError as exc:
        report["error"] = str(exc)
        checks["sign"] = False
        report.update(checks=checks, passed=False)
        return report
    report["ratio"] = rr.to_dict()
    checks["ratio_bracket"] = rr.passed
    M = float(profile.meta.get("M", np.nan))
    mass = profile.mass()
    report["mass"] = {"value": mass, "relative_error": abs(mass - M) / M}
    checks["mass"] = abs(mass - M) / M < 1e-3
    levels = eps_levels or [float(profile.values.max()) * 10.0 ** (-k) for k in range(1, 5)]
    try:
        report["decay"] = {"eps": levels, "radii": decay_check(profile, levels)}
        checks["decay"] = bool(np.all(np.diff(report["decay"]["radii"]) >= 0))
    except DomainError as exc:
        report["decay"] = {"eps": levels, "error": str(exc)}
        checks["decay"] = False
    try:
        pr = proof_replay(profile, eta)
        report["proof_replay"] = pr.to_dict()
        checks["proof_replay"] = pr.passed
    except DomainError as exc:
        report["proof_replay"] = {"error": str(exc)}
        checks["proof_replay"] = False
    lb = lower_bound_replay(profile)
    report["lower_bound"] = lb.to_dict()
    checks["lower_bound"] = lb.passed
    g = gradient_bound_check(profile)
    report["gradient_bound"] = g
    checks["gradient_finite"] = bool(np.isfinite(g))
    report.update(checks=checks, passed=all(checks.values()))
    return report


def _family_checks(profiles: list[Profile]) -> list[dict]:
    """Self-similarity and L^p scaling across profiles of one (alpha, M, b) at several times."""
    from .verify import lp_scaling, self_similarity_error

    groups: dict[tuple, dict[float, Profile]] = {}
    for prof in profiles:
        m = prof.meta
        key = (m.get("alpha"), m.get("M"), m.get("b"), prof.grid.L, prof.grid.n)
        groups.setdefault(key, {})[float(m.get("t", 1.0))] = prof
    out = []
    for (a, M, b, L, n), fam in groups.items():
        if len(fam) < 2 or 1.0 not in fam:
            continue
        lp = lp_scaling(fam)
        sims = {f"{t:g}": self_similarity_error(fam[1.0], prof) for t, prof in fam.items() if t != 1.0}
        out.append({"alpha": a, "M": M, "b": b, "times": sorted(fam), "lp_scaling": lp,
                    "self_similarity": sims,
                    "passed": bool(all(v["spread"] < 0.02 for v in lp.values())
                                   and all(s < 0.01 for s in sims.values()))})
    return out


def _matrix_entries(path: Path) -> list[dict]:
    spec = read_json(path)
    if not isinstance(spec, dict) or not isinstance(spec.get("entries"), list):
        raise UsageError(f"{path}: a benchmark matrix is an object with an 'entries' list")
    if spec.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise UsageError(f"{path}: unsupported schema_version {spec['schema_version']}")
    defaults = spec.get("defaults", {})
    entries = []
    for i, e in enumerate(spec["entries"]):
        try:
            entry = {"d": int(e.get("d", 1)), "alpha": float(e["alpha"]), "M": float(e["M"]),
                     "b": float(e.get("b", 1.0)), "overrides": {**defaults, **e.get("overrides", {})}}
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"{path}: entry {i} is malformed ({exc})") from None
        if entry["d"] != 1:
            raise UsageError(f"{path}: entry {i} has d = {entry['d']}; profiles are solved in d = 1")
        entries.append(entry)
    if not entries:
        raise UsageError(f"{path}: empty benchmark matrix")
    return entries


def _entry_config(entry: dict):
    ov = dict(entry["overrides"])
    grid = Grid1D(float(ov.pop("grid_L", 256.0)), int(ov.pop("grid_n", 2 ** 15)))
    return _solver_config(entry["alpha"], entry["M"], entry["b"], grid, **ov)


def _solve_entry(entry: dict, refine: bool):
    """Worker: Picard profile for one matrix entry (and its refinement)."""
    from dataclasses import replace

    from .solver import picard_solve

    cfg = _entry_config(entry)
    out = {"profile": picard_solve(cfg).profile}
    if refine:
        out["refined"] = picard_solve(replace(cfg, grid=cfg.grid.refined())).profile
    return out


def _refinement(coarse: dict, fine: dict) -> dict:
    def rel(a, b):
        return abs(a / b - 1.0)

    r_c, r_f = coarse["ratio"], fine["ratio"]
    changes = {"ratio_inf": rel(r_f["ratio_inf"], r_c["ratio_inf"]),
               "ratio_sup": rel(r_f["ratio_sup"], r_c["ratio_sup"]),
               "gradient_bound": rel(fine["gradient_bound"], coarse["gradient_bound"])}
    return {"relative_changes": changes,
            "passed": changes["ratio_inf"] < 0.01 and changes["ratio_sup"] < 0.01
            and changes["gradient_bound"] < 0.02}


def cmd_verify(args, run: Run) -> int:
    if not args.profile and not args.matrix:
        raise UsageError("verify needs --profile or --matrix")
    opts = {"eta": args.eta, "window": args.window, "tail_radius": args.tail_radius}
    if not 0.0 < args.eta < 1.0:
        raise UsageError("--eta must lie in (0, 1)")
    failed = []
    loaded: list[Profile] = []
    for i, path in enumerate(args.profile or []):
        path = Path(path)
        profile, _ = load_profile(path)
        run.manifest.add_input(path)
        with run.stage("verify"):
            rep = verify_profile(profile, **opts)
        rep["source"] = path.name
        run.emit_json(f"report_{i:02d}_{path.stem}.json", {**rep, "manifest": MANIFEST_NAME})
        loaded.append(profile)
        if not rep["passed"]:
            failed.append(path.name)
    for fam in _family_checks(loaded):
        tag = f"alpha{fam['alpha']:g}_M{fam['M']:g}_b{fam['b']:g}"
        run.emit_json(f"scaling_{tag}.json", {**fam, "manifest": MANIFEST_NAME})
        if not fam["passed"]:
            failed.append(f"scaling {tag}")
    if args.matrix:
        path = Path(args.matrix)
        entries = _matrix_entries(path)
        run.manifest.add_input(path)
        with run.stage("solve"):
            if args.workers > 1:
                with ProcessPoolExecutor(max_workers=args.workers) as pool:
                    solved = list(pool.map(_solve_entry, entries, [args.refine] * len(entries)))
            else:
                solved = [_solve_entry(e, args.refine) for e in entries]
        for entry, res in zip(entries, solved):
            tag = f"alpha{entry['alpha']:g}_M{entry['M']:g}_b{entry['b']:g}"
            cfg = _entry_config(entry)
            run.emit_profile(f"profile_{tag}.csv", res["profile"], {"config": cfg.to_dict(), "producer": "picard"})
            with run.stage("verify"):
                rep = verify_profile(res["profile"], **opts)
                if "refined" in res:
                    fine = verify_profile(res["refined"], **opts)
                    rep["refinement"] = _refinement(rep, fine)
                    rep["checks"]["refinement"] = rep["refinement"]["passed"]
                    rep["passed"] = rep["passed"] and fine["passed"] and rep["refinement"]["passed"]
            rep["entry"] = entry
            run.emit_json(f"report_{tag}.json", {**rep, "manifest": MANIFEST_NAME})
            if not rep["passed"]:
                failed.append(tag)
    if failed:
        raise AssertionFailure("verification failed for: " + ", ".join(failed))
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


_SUMMARY_COLUMNS = ("source", "alpha", "M", "b", "ratio_inf", "ratio_sup", "tail_inf", "tail_sup", "R", "C1_hat",
                    "C0_hat", "bound_margin", "lower_margin", "lower_radius", "gradient_bound", "mass_error",
                    "passed")


def _summary_row(name: str, rep: dict) -> dict:
    meta, ratio, pr = rep.get("meta", {}), rep.get("ratio", {}), rep.get("proof_replay", {})
    tail = ratio.get("tail_band", [None, None])
    return {"source": name, "alpha": meta.get("alpha"), "M": meta.get("M"), "b": meta.get("b"),
            "ratio_inf": ratio.get("ratio_inf"), "ratio_sup": ratio.get("ratio_sup"),
            "tail_inf": tail[0], "tail_sup": tail[1], "R": pr.get("R"), "C1_hat": pr.get("C1_hat"),
            "C0_hat": pr.get("C0_hat"), "bound_margin": pr.get("bound_margin"),
            "lower_margin": rep.get("lower_bound", {}).get("lower_margin"),
            "lower_radius": rep.get("lower_bound", {}).get("radius"),
            "gradient_bound": rep.get("gradient_bound"), "mass_error": rep.get("mass", {}).get("relative_error"),
            "passed": rep.get("passed")}


def cmd_report(args, run: Run) -> int:
    src = Path(args.input)
    if not src.is_dir():
        raise UsageError(f"--in {src} is not a directory")
    files = sorted(src.rglob("report_*.json"))
    if not files:
        raise FileNotFoundError(f"no report_*.json files under {src}")
    rows = []
    for f in files:
        run.manifest.add_input(f)
        rows.append(_summary_row(str(f.relative_to(src)), read_json(f)))
    out = run.path("summary.csv")
    with out.open("w", newline="") as fh:
        fh.write(",".join(_SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join("" if row[c] is None else (f"{row[c]:.10g}" if isinstance(row[c], float)
                                                         else str(row[c])) for c in _SUMMARY_COLUMNS) + "\n")
    run.manifest.add_output(out, run.root)
    run.emit_json("summary.json", {"reports": rows, "all_passed": all(r["passed"] for r in rows),
                                   "manifest": MANIFEST_NAME})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and dispatch


def _add_grid(p: argparse.ArgumentParser, n: int = 2 ** 15) -> None:
    p.add_argument("--grid-L", dest="grid_L", type=float, default=256.0, help="grid half-width")
    p.add_argument("--grid-n", dest="grid_n", type=int, default=n, help="grid points (power of two)")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults (flags override it)")
    common.add_argument("--out", help=f"run directory (default ${OUT_ENV}/<command>-<digest>)")
    common.add_argument("--force", action="store_true", help="reuse a run directory that holds a manifest")

    parser = argparse.ArgumentParser(prog="fbv", description=__doc__.split("\n\n")[0])
    subs = parser.add_subparsers(dest="command", required=True)
    table: dict[str, argparse.ArgumentParser] = {}

    p = subs.add_parser("kernel", parents=[common], help="tabulate p(t, x), its gradient and envelope")
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--t", type=float, default=1.0)
    _add_grid(p)
    p.set_defaults(func=cmd_kernel)
    table["kernel"] = p

    p = subs.add_parser("lemmas", parents=[common], help="kernel-integral identities and brackets")
    p.add_argument("--alpha", type=float, nargs="*", default=[1.5])
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--sweep-spec", dest="sweep_spec",
                   help="JSON object (or file) with lists x, v, points, times, radii")
    p.set_defaults(func=cmd_lemmas)
    table["lemmas"] = p

    p = subs.add_parser("solve", parents=[common], help="compute the profile u_M(1, .)")
    p.add_argument("--method", default="both")
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--M", type=float, default=2.0)
    p.add_argument("--b", type=float, default=1.0)
    _add_grid(p)
    p.add_argument("--tol", type=float, default=1e-10, help="Picard stopping tolerance")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=400)
    p.add_argument("--relaxation", type=float, default=None)
    p.add_argument("--t0", type=float, default=1e-3, help="spectral start time")
    p.add_argument("--steps", type=int, default=512, help="spectral steps per [t0, 1]")
    p.add_argument("--ray-nodes", dest="ray_nodes", type=int, default=64)
    p.add_argument("--checkpoints", type=float, nargs="*", default=[], help="extra spectral output times")
    p.add_argument("--extrapolate", action="store_true", help="cancel the start-time bias (two runs)")
    p.add_argument("--window", type=float, default=50.0, help="window of the cross-solver difference")
    p.set_defaults(func=cmd_solve)
    table["solve"] = p

    p = subs.add_parser("verify", parents=[common], help="check profiles against the kernel bounds")
    p.add_argument("--profile", action="append", default=[], help="profile CSV (repeatable)")
    p.add_argument("--matrix", help="benchmark matrix JSON")
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--window", type=float, default=50.0)
    p.add_argument("--tail-radius", dest="tail_radius", type=float, default=30.0)
    p.add_argument("--refine", action="store_true", help="matrix runs: also solve on 2n points")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    table["verify"] = p

    p = subs.add_parser("report", parents=[common], help="tabulate report JSON files")
    p.add_argument("--in", dest="input", required=False, default=".")
    p.set_defaults(func=cmd_report)
    table["report"] = p
    return parser, table


_PLUMBING = {"func", "config", "out", "force", "command"}


def _apply_config(parser, table, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = read_json(Path(args.config))
    if not isinstance(cfg, dict):
        raise UsageError("--config must hold a JSON object")
    if cfg.pop("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise UsageError("unsupported config schema_version")
    sub = table[args.command]
    known = {a.dest for a in sub._actions} - _PLUMBING - {"help"}
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown keys in --config for '{args.command}': {sorted(unknown)}")
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def effective_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _PLUMBING}


def _run_dir(args, config: dict) -> Path:
    if args.out:
        root = Path(args.out)
    else:
        base = Path(os.environ.get(OUT_ENV, "fbv-out"))
        root = base / f"{args.command}-{config_digest({'command': args.command, **config})[:12]}"
    root.mkdir(parents=True, exist_ok=True)
    if (root / MANIFEST_NAME).exists() and not args.force:
        raise UsageError(f"{root} already holds a manifest; pass --force or choose another --out")
    return root


def main(argv: list[str] | None = None) -> int:
    parser, table = build_parser()
    run = None
    try:
        args = _apply_config(parser, table, argv)
        config = effective_config(args)
        run = Run(args.command, _run_dir(args, config), {"command": args.command, **config,
                                                          "config_file": args.config})
        code = args.func(args, run)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"fbv: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionFailure as exc:
        print(f"fbv: {exc}", file=sys.stderr)
        code = EXIT_ASSERTION
    except QuadratureError as exc:
        print(f"fbv: numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERICS
    except ConvergenceError as exc:
        print(f"fbv: no convergence: {exc}", file=sys.stderr)
        code = EXIT_CONVERGENCE
    except (FractalBurgersError, OSError, FloatingPointError) as exc:
        print(f"fbv: {exc}", file=sys.stderr)
        code = EXIT_NUMERICS
    if run is not None:
        run.manifest.write(run.root)
    return code


if __name__ == "__main__":
    sys.exit(main())
