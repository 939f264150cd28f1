"""Command-line front end.

Subcommands: ``qfi``, ``simulate``, ``reconstruct``, ``estimate``, ``bias-sweep``.
Exit codes: 0 success, 2 config error, 3 data error, 4 non-convergence.

Every output is a pure function of the config and the master seed; trial
``k`` draws from ``SeedSequence(seed, spawn_key=(k,))``.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .channels import Element, Scenario
from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigError, ConvergenceError, DataError, FullyBlockedError, UnsupportedScenarioError
from .estimators import SWEEP_COLUMNS, bias_sweep, estimate, trial_seed
from .io import density_to_dict, dumps, read_density, table_to_csv, write_json
from .noise import noisy_counts
from .qfi import qcrb, scenario_qfi, superposition_qwp_formula
from .qmath import check_physical, concurrence, fidelity, purity
from .states import StateKind, make_state
from .tomography import CountRecord, infer_mode, linear_inversion, mle_reconstruct, povm_set

log = logging.getLogger("qpol")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3, 4
RAD2_TO_DEG2 = math.degrees(1.0) ** 2


def versions() -> dict:
    return {"qpol": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else parse_config({})
    overrides = {}
    if getattr(args, "scenario", None):
        try:
            sc = Scenario.parse(args.scenario)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        overrides["scenario"] = {
            "element": sc.element.value,
            "configuration": sc.configuration.value,
            "probe": sc.probe.value,
            "alpha_deg": cfg.alpha_deg,
        }
    if getattr(args, "alpha_deg", None) is not None:
        overrides.setdefault("scenario", dict(cfg.to_dict()["scenario"]))["alpha_deg"] = args.alpha_deg
    if overrides:
        data = dict(cfg.raw, **overrides)
        povm = data.get("tomography", {}).get("povm")
        if "scenario" in overrides and povm is not None:
            # Drop a POVM choice that no longer fits the overridden scenario.
            local = overrides["scenario"]["configuration"] == "local"
            if (povm == "single6") != local:
                data["tomography"] = {k: v for k, v in data["tomography"].items() if k != "povm"}
        cfg = parse_config(data)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_dir(args, cfg: ExperimentConfig | None = None) -> Path | None:
    out = args.out or (cfg.out_dir if cfg else None)
    if out is None:
        return None
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {path}: {exc}") from None
    return path


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            (out / name).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot write {out / name}: {exc}") from None


# --------------------------------------------------------------------------
# qfi


def cmd_qfi(args) -> int:
    cfg = _config(args)
    sc = cfg.scenario
    m = cfg.trials * cfg.noise.n_mean
    try:
        res = scenario_qfi(sc, cfg.alpha, m=m)
        res_fd = scenario_qfi(sc, cfg.alpha, method="central_diff")
    except (UnsupportedScenarioError, FullyBlockedError) as exc:
        raise ConfigError(str(exc)) from None
    if res.no_information:
        print(f"warning: {sc.name} carries no information about alpha (F_Q = 0); no angle can be estimated", file=sys.stderr)
    bound = qcrb(res, m)
    report = {
        "scenario": sc.name,
        "alpha_deg": cfg.alpha_deg,
        "qfi": res.value,
        "qfi_central_diff": res_fd.value,
        "observations": m,
        "qcrb_rad2": bound if math.isfinite(bound) else None,
        "qcrb_deg2": bound * RAD2_TO_DEG2 if math.isfinite(bound) else None,
        "no_information": res.no_information,
    }
    sweep = cfg.alpha_sweep_deg or ((0.0, 90.0, 1.0) if args.sweep else None)
    rows = []
    if sweep:
        start, stop, step = sweep
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        for a_deg in (start + i * step for i in range(n)):
            r = scenario_qfi(sc, math.radians(a_deg), m=m)
            b = qcrb(r, m)
            row = [a_deg, r.value, b * RAD2_TO_DEG2 if math.isfinite(b) else None]
            if sc.element is Element.QWP and sc.probe is StateKind.SUPERPOSITION_HV:
                row.append(float(superposition_qwp_formula(math.radians(a_deg))))
            rows.append(row)
        report["sweep"] = rows
    out = _out_dir(args, cfg)
    if args.format == "csv":
        header = ["alpha_deg", "qfi", "qcrb_deg2"]
        if rows and len(rows[0]) == 4:
            header.append("formula_8_minus_4cos2_2alpha")
        body = rows or [[cfg.alpha_deg, res.value, report["qcrb_deg2"]]]
        _emit(table_to_csv(header, body), out, "qfi.csv")
    else:
        _emit(dumps(report), out, "qfi.json")
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def _simulate_trial(args):
    cfg, k = args
    sc = cfg.scenario
    povm = povm_set(cfg.povm)
    noise_ss, mle_ss = trial_seed(cfg.seed, k).spawn(2)
    counts = noisy_counts(sc, cfg.alpha, povm, cfg.noise, np.random.default_rng(noise_ss))
    if cfg.method == "mle":
        res = mle_reconstruct(counts, povm, options=cfg.mle, rng=np.random.default_rng(mle_ss))
        rho, converged, objective = res.rho, res.converged, res.objective
    else:
        rho, converged, objective = linear_inversion(counts, povm), True, None
    return counts, rho, converged, objective


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    if out is None:
        raise ConfigError("simulate needs an output directory (--out or output.dir)")
    tasks = [(cfg, k) for k in range(cfg.trials)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_simulate_trial, tasks))
    else:
        results = [_simulate_trial(t) for t in tasks]

    ideal = cfg.scenario.ideal_output(cfg.alpha)
    trials = []
    all_converged = True
    for k, (counts, rho, converged, objective) in enumerate(results):
        cname, rname = f"counts_{k:04d}.csv", f"rho_{k:04d}.json"
        counts.source = f"simulated(seed={cfg.seed}, trial={k})"
        (out / cname).write_text(counts.to_csv(), encoding="utf-8")
        phys = check_physical(rho)
        entry = {
            "trial": k,
            "seed": {"master": cfg.seed, "spawn_key": [k]},
            "counts_file": cname,
            "density_file": rname,
            "fidelity_to_ideal": fidelity(rho, ideal),
            "physical": phys.ok,
            "converged": converged,
            "objective": objective,
        }
        if rho.shape == (4, 4):
            entry["concurrence"] = concurrence(rho) if phys.ok else None
        write_json(out / rname, density_to_dict(rho, method=cfg.method, scenario=cfg.scenario.name, trial=k, physicality=phys.as_dict()))
        trials.append(entry)
        all_converged &= converged
    fids = [t["fidelity_to_ideal"] for t in trials]
    manifest = {
        "command": "simulate",
        "config": cfg.to_dict(),
        "seed_rule": "trial k: SeedSequence(seed, spawn_key=(k,)).spawn(2) -> (noise, mle restarts); PCG64",
        "q_convention": "q1, q2 are mixing weights of the ideal state (1 = noiseless)",
        "versions": versions(),
        "trials": trials,
        "summary": {
            "mean_fidelity_to_ideal": float(np.mean(fids)),
            "min_fidelity_to_ideal": float(np.min(fids)),
            "all_physical": all(t["physical"] for t in trials),
            "all_converged": all_converged,
        },
    }
    write_json(out / "manifest.json", manifest)
    return EXIT_OK if all_converged else EXIT_CONVERGENCE


# --------------------------------------------------------------------------
# reconstruct


def _reference_state(spec: str | None, dim: int):
    if spec is None:
        return None
    try:
        kind = StateKind.parse(spec)
        return make_state(kind, d=dim)
    except ValueError:
        return read_density(spec)


def _read_counts(path) -> CountRecord:
    try:
        return CountRecord.from_csv(path)
    except OSError as exc:
        raise DataError(f"cannot read count file {path}: {exc}") from None


def cmd_reconstruct(args) -> int:
    counts = _read_counts(args.input)
    mode = args.povm or infer_mode(counts)
    try:
        povm = povm_set(mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if povm.n_qubits != len(counts.labels[0]):
        raise DataError(f"count file does not match POVM mode {mode}")
    seed = args.seed if args.seed is not None else 0
    converged = True
    if args.method == "mle":
        res = mle_reconstruct(counts, povm, rng=np.random.default_rng(seed))
        rho, converged = res.rho, res.converged
        extra = {"objective": res.objective, "iterations": res.iterations, "converged": res.converged}
    else:
        rho = linear_inversion(counts, povm)
        extra = {}
    phys = check_physical(rho)
    if not phys.ok:
        print(
            f"warning: reconstructed matrix is not physical (min eigenvalue {phys.min_eigenvalue:.3e}); "
            "use --method mle for a valid state",
            file=sys.stderr,
        )
    metrics = {"physicality": phys.as_dict(), "purity": purity(rho), "n_total": counts.n_total, "povm": mode, **extra}
    if rho.shape == (4, 4):
        metrics["concurrence"] = concurrence(rho)
    ref = _reference_state(args.reference, rho.shape[0])
    if ref is not None:
        if ref.shape != rho.shape:
            raise DataError(f"reference state is {ref.shape}, reconstruction is {rho.shape}")
        metrics["fidelity_to_reference"] = fidelity(rho, ref)
    doc = density_to_dict(rho, method=args.method, source=str(args.input), metrics=metrics)
    out = _out_dir(args)
    _emit(dumps(doc), out, f"{Path(args.input).stem}_rho.json")
    if not converged:
        raise ConvergenceError("MLE did not converge")
    return EXIT_OK


# --------------------------------------------------------------------------
# estimate


def cmd_estimate(args) -> int:
    cfg = _config(args)
    sc = cfg.scenario
    path = Path(args.input)
    if path.suffix.lower() == ".csv":
        counts = _read_counts(path)
        povm = povm_set(args.povm or infer_mode(counts))
        seed = args.seed if args.seed is not None else 0
        rho = mle_reconstruct(counts, povm, rng=np.random.default_rng(seed)).rho
    else:
        rho = read_density(path)
    if rho.shape[0] != sc.dim:
        raise DataError(f"state of dimension {rho.shape[0]} does not fit scenario {sc.name}")
    estimators = [args.estimator] if args.estimator else list(cfg.estimators)
    results = []
    for name in estimators:
        try:
            est = estimate(rho, sc, name)
        except UnsupportedScenarioError as exc:
            raise ConfigError(f"{name} refused: {exc}") from None
        results.append({"estimator": name, "alpha_deg": est.degrees, "alpha_rad": est.alpha, "flags": est.flags()})
    out = _out_dir(args)
    if args.format == "csv":
        rows = [[r["estimator"], r["alpha_deg"], ";".join(r["flags"])] for r in results]
        _emit(table_to_csv(["estimator", "alpha_deg", "flags"], rows), out, "estimate.csv")
    else:
        _emit(dumps({"scenario": sc.name, "estimates": results}), out, "estimate.json")
    return EXIT_OK


# --------------------------------------------------------------------------
# bias sweep


def cmd_bias_sweep(args) -> int:
    cfg = _config(args)
    try:
        result = bias_sweep(
            cfg.scenario,
            cfg.estimators,
            cfg.q_grid,
            cfg.noise,
            cfg.trials,
            alpha=cfg.alpha,
            povm_mode=cfg.povm,
            mle=cfg.mle,
            jobs=args.jobs,
        )
    except UnsupportedScenarioError as exc:
        raise ConfigError(str(exc)) from None
    trends = {name: result.trend(name) for name in cfg.estimators}
    header = list(SWEEP_COLUMNS) + ["bias_deg", "median_abs_error_deg", "spearman_rho", "monotone_trend"]
    rows = []
    for r in result.rows:
        rho = trends[r.estimator]
        verdict = bool(np.isfinite(rho) and rho >= 0.9)
        rows.append([r.q, r.trial_count, r.mean_abs_bias_deg, r.var_deg2, r.estimator, r.scenario, r.bias_deg, r.median_abs_error_deg, rho, verdict])
    out = _out_dir(args, cfg)
    _emit(table_to_csv(header, rows), out, "bias_sweep.csv")
    if out is not None:
        write_json(
            out / "manifest.json",
            {
                "command": "bias-sweep",
                "config": cfg.to_dict(),
                "q_convention": "sweep q sets q1 = q2 = 1 - q (q = 0 is noiseless)",
                "seed_rule": "trial k at every q: SeedSequence(seed, spawn_key=(k,)).spawn(2) -> (noise, mle); PCG64",
                "versions": versions(),
                "spearman_rho": trends,
            },
        )
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for trial loops")
    common.add_argument("--out", help="output directory (stdout when omitted, where possible)")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qpol", description="Local and nonlocal quantum polarimetry laboratory")
    p.add_argument("--version", action="version", version=f"qpol {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("qfi", parents=[common], help="quantum Fisher information and QCRB")
    q.add_argument("--scenario", help="e.g. lp_nonlocal, qwp_local, qwp_local_superposition")
    q.add_argument("--alpha-deg", type=float)
    q.add_argument("--sweep", action="store_true", help="also tabulate alpha = 0..90 deg")
    q.set_defaults(func=cmd_qfi)

    s = sub.add_parser("simulate", parents=[common], help="noisy tomography campaigns")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", parents=[common], help="reconstruct a state from a count file")
    r.add_argument("input", help="count CSV (proj_r,proj_s,count)")
    r.add_argument("--povm", choices=("single6", "two_minimal16", "two_full36"))
    r.add_argument("--method", choices=("linear", "mle"), default="mle")
    r.add_argument("--reference", help="reference state: bell, mixed, superposition or a density JSON file")
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("estimate", parents=[common], help="estimate alpha from a density JSON or count CSV")
    e.add_argument("input")
    e.add_argument("--scenario")
    e.add_argument("--estimator", choices=("alpha1", "alpha2"))
    e.add_argument("--povm", choices=("single6", "two_minimal16", "two_full36"))
    e.set_defaults(func=cmd_estimate)

    b = sub.add_parser("bias-sweep", parents=[common], help="bias and variance versus noise strength")
    b.add_argument("--scenario")
    b.add_argument("--alpha-deg", type=float)
    b.set_defaults(func=cmd_bias_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
