"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines inline;
the terminal summary repeats them in any case.
"""

import json
import math
import time

import numpy as np
import pytest

from conftest import record_acceptance
from qpol.channels import STANDARD_SCENARIOS, Scenario, apply_channel, closed_form_output
from qpol.cli import main
from qpol.estimators import alpha_hat_1, alpha_hat_2, bias_sweep
from qpol.noise import DEFAULT_K_RANDOM, DEFAULT_N, DEFAULT_SIGMA, NoiseConfig, trial_rng
from qpol.qfi import scenario_qfi, superposition_qwp_formula
from qpol.qmath import check_physical, fidelity, random_density
from qpol.states import make_state
from qpol.tomography import CountRecord, linear_inversion, mle_reconstruct, povm_set, simulate_counts

QFI_EXPECTED = {"lp_nonlocal": 8.0, "qwp_nonlocal": 8.0, "lp_local": 4.0, "qwp_local": 0.0}
LP_NL = Scenario("lp", "nonlocal")
QWP_NL = Scenario("qwp", "nonlocal")
LP_L = Scenario("lp", "local")
A37 = math.radians(37.0)
GRID_91 = np.radians(np.arange(0.0, 91.0))


def verdict(number, title, ok, detail):
    record_acceptance(number, title, bool(ok), detail)
    assert ok, detail


def test_c01_qfi_table():
    t0 = time.perf_counter()
    err_an = err_fd = 0.0
    for sc in STANDARD_SCENARIOS:
        for deg in (0, 15, 37, 60, 89):
            a = math.radians(deg)
            err_an = max(err_an, abs(scenario_qfi(sc, a).value - QFI_EXPECTED[sc.name]))
            err_fd = max(err_fd, abs(scenario_qfi(sc, a, method="central_diff").value - QFI_EXPECTED[sc.name]))
    dt = time.perf_counter() - t0
    ok = err_an <= 1e-9 and err_fd <= 1e-5 and dt < 1.0
    verdict(1, "QFI table 4/8/0/8", ok, f"analytic err {err_an:.1e}, central-diff err {err_fd:.1e}, {dt:.3f} s")


def test_c02_superposition_formula():
    t0 = time.perf_counter()
    sc = Scenario("qwp", "local", "superposition")
    err = max(abs(scenario_qfi(sc, a).value - superposition_qwp_formula(a)) for a in GRID_91)
    dt = time.perf_counter() - t0
    verdict(2, "superposition QWP QFI = 8 - 4cos^2(2a)", err <= 1e-8 and dt < 1.0, f"max err {err:.1e} on 91 points, {dt:.3f} s")


def test_c03_nonlocal_factor_two():
    t0 = time.perf_counter()
    err = max(abs(scenario_qfi(LP_NL, a).value / scenario_qfi(LP_L, a).value - 2.0) for a in GRID_91)
    dt = time.perf_counter() - t0
    verdict(3, "nonlocal/local LP QFI ratio = 2", err <= 1e-9 and dt < 1.0, f"max |ratio - 2| {err:.1e}, {dt:.3f} s")


def test_c04_closed_form_agreement():
    t0 = time.perf_counter()
    err = 0.0
    for sc in STANDARD_SCENARIOS:
        for a in GRID_91:
            err = max(err, np.max(np.abs(closed_form_output(sc, a) - apply_channel(sc.channel(a), sc.probe_state()))))
    dt = time.perf_counter() - t0
    verdict(4, "closed forms match channel action", err <= 1e-12 and dt < 1.0, f"max entry err {err:.1e} over 4x91 cases, {dt:.3f} s")


def test_c05_tomography_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20250505)
    li_err, min_fid = 0.0, 1.0
    for mode in ("single6", "two_minimal16"):
        povm = povm_set(mode)
        for _ in range(100):
            rho = random_density(povm.dim, rng)
            rec = simulate_counts(rho, povm, DEFAULT_N, exact=True)
            li_err = max(li_err, np.max(np.abs(linear_inversion(rec, povm) - rho)))
            min_fid = min(min_fid, fidelity(mle_reconstruct(rec, povm, rng=rng).rho, rho))
    dt = time.perf_counter() - t0
    ok = li_err <= 1e-10 and min_fid >= 1 - 1e-6 and dt < 120
    verdict(5, "exact-count tomography round trip", ok, f"linear max err {li_err:.1e}, MLE min fidelity 1-{1 - min_fid:.1e}, {dt:.1f} s")


def test_c06_poisson_mle_quality():
    t0 = time.perf_counter()
    povm = povm_set("two_minimal16")
    bell = make_state("bell")
    fids = []
    for k in range(50):
        rng = trial_rng(6, k)
        rec = simulate_counts(bell, povm, DEFAULT_N, rng)
        fids.append(fidelity(mle_reconstruct(rec, povm, rng=rng).rho, bell))
    med = float(np.median(fids))
    dt = time.perf_counter() - t0
    verdict(6, "Poisson MLE on Bell, N=5000", med >= 0.99 and dt < 300, f"median fidelity {med:.5f} (min {min(fids):.5f}) over 50 trials, {dt:.1f} s")


def test_c07_noiseless_estimators():
    t0 = time.perf_counter()
    worst = 0.0
    parts = []
    for sc in (LP_NL, QWP_NL, LP_L):
        rho = sc.ideal_output(A37)
        a1, a2 = alpha_hat_1(rho, sc).degrees, alpha_hat_2(rho, sc).degrees
        worst = max(worst, abs(a1 - 37.0), abs(a2 - 37.0))
        parts.append(f"{sc.name} {a1:.4f}/{a2:.4f}")
    dt = time.perf_counter() - t0
    verdict(7, "both estimators recover 37.00 deg", worst <= 0.05 and dt < 10, f"{'; '.join(parts)} deg, {dt:.2f} s")


@pytest.mark.slow
def test_c08_bias_trend():
    t0 = time.perf_counter()
    q_grid = [0.0, 0.1, 0.2, 0.3]
    base = NoiseConfig(sigma=DEFAULT_SIGMA, n_mean=DEFAULT_N, k_random=DEFAULT_K_RANDOM, seed=8)
    trends = {}
    qwp = None
    for sc in (LP_NL, QWP_NL, LP_L):
        est = ("alpha1", "alpha2") if sc is QWP_NL else ("alpha1",)
        res = bias_sweep(sc, est, q_grid, base, trials=100, alpha=A37)
        # mean |bias| per q from the rows; Spearman against q
        trends[sc.name] = res.trend("alpha1")
        if sc is QWP_NL:
            qwp = res
    med = {r.estimator: r.median_abs_error_deg for r in qwp.rows if r.q == 0.3}
    dt = time.perf_counter() - t0
    ok = trends["lp_nonlocal"] >= 0.9 and all(v >= 0.9 for v in trends.values()) and med["alpha2"] < med["alpha1"] and dt < 1800
    detail = ", ".join(f"{k} rho={v:.2f}" for k, v in trends.items())
    detail += f"; qwp_nonlocal q=0.3 median|err| a2 {med['alpha2']:.3f} < a1 {med['alpha1']:.3f} deg; {dt:.0f} s"
    verdict(8, "alpha1 bias grows with q; alpha2 beats alpha1", ok, detail)


def _adversarial(rec: CountRecord, rng: np.random.Generator, kind: int) -> np.ndarray:
    c = rec.counts.copy()
    n = len(c)
    if kind == 0:  # heavy multiplicative noise
        c = c * rng.lognormal(0.0, 1.0, n)
    elif kind == 1:  # dropped channels
        c[rng.random(n) < 0.4] = 0.0
    elif kind == 2:  # one saturated detector
        c[rng.integers(n)] *= 100.0
    elif kind == 3:  # flat, state-independent counts
        c[:] = rng.integers(1, 5000)
    elif kind == 4:  # a single click
        c[:] = 0.0
        c[rng.integers(n)] = 1.0
    elif kind == 5:  # labels scrambled
        c = rng.permutation(c)
    elif kind == 6:  # counts unrelated to any state
        c = rng.integers(0, 10_000, n).astype(float)
    elif kind == 7:  # additive bias pushing linear inversion negative
        c = np.clip(c + rng.normal(0, 0.3 * c.max(), n), 0, None)
    elif kind == 8:  # extreme dynamic range
        c = c * 10.0 ** rng.uniform(-6, 6, n)
    else:  # one projector 10 % high
        c[rng.integers(n)] *= 1.1
    if not c.any():
        c[0] = 1.0
    return c


@pytest.mark.slow
def test_c09_physicality_guarantee():
    t0 = time.perf_counter()
    rng = np.random.default_rng(909)
    modes = ("single6", "two_minimal16", "two_full36")
    total = 10_000
    worst = {"hermiticity_defect": 0.0, "trace_defect": 0.0, "min_eigenvalue": 0.0}
    failures = 0
    for i in range(total):
        povm = povm_set(modes[i % 3])
        rec = simulate_counts(random_density(povm.dim, rng), povm, DEFAULT_N, exact=True)
        counts = _adversarial(rec, rng, i % 10)
        res = mle_reconstruct(CountRecord(rec.labels, counts, DEFAULT_N), povm, rng=rng)
        rep = check_physical(res.rho, 1e-10)
        failures += not rep.ok
        worst["hermiticity_defect"] = max(worst["hermiticity_defect"], rep.hermiticity_defect)
        worst["trace_defect"] = max(worst["trace_defect"], rep.trace_defect)
        worst["min_eigenvalue"] = min(worst["min_eigenvalue"], rep.min_eigenvalue)
    dt = time.perf_counter() - t0
    detail = (
        f"{total - failures}/{total} physical; worst herm {worst['hermiticity_defect']:.1e}, "
        f"trace {worst['trace_defect']:.1e}, min eig {worst['min_eigenvalue']:.1e}; {dt:.0f} s ({dt / total * 1e3:.1f} ms each)"
    )
    verdict(9, "MLE output always physical", failures == 0 and dt < 1800, detail)


def _tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_c10_cli_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    cfg = tmp_path / "config.json"
    cfg.write_text(
        json.dumps(
            {
                "scenario": {"element": "qwp", "configuration": "nonlocal", "alpha_deg": 37.0},
                "noise": {"q": 0.1, "sigma_deg": math.degrees(DEFAULT_SIGMA)},
                "trials": 3,
                "seed": 1010,
                "q_grid": [0.0, 0.15, 0.3],
            }
        )
    )
    runs = []
    for rep in range(2):
        root = tmp_path / f"run{rep}"
        codes = [
            main(["qfi", "--config", str(cfg), "--sweep", "--out", str(root / "qfi")]),
            main(["qfi", "--config", str(cfg), "--format", "csv", "--out", str(root / "qfi_csv")]),
            main(["simulate", "--config", str(cfg), "--out", str(root / "sim")]),
            main(["reconstruct", str(tmp_path / "run0" / "sim" / "counts_0000.csv"), "--reference", "bell", "--out", str(root / "rec")]),
            main(["reconstruct", str(tmp_path / "run0" / "sim" / "counts_0001.csv"), "--method", "linear", "--out", str(root / "rec_lin")]),
            main(["estimate", str(tmp_path / "run0" / "sim" / "rho_0000.json"), "--config", str(cfg), "--out", str(root / "est")]),
            main(["estimate", str(tmp_path / "run0" / "sim" / "counts_0002.csv"), "--config", str(cfg), "--format", "csv", "--out", str(root / "est_csv")]),
            main(["bias-sweep", "--config", str(cfg), "--out", str(root / "sweep")]),
        ]
        stdout = capsys.readouterr().out
        runs.append((codes, _tree(root), stdout))
    (codes_a, tree_a, out_a), (codes_b, tree_b, out_b) = runs
    identical = tree_a == tree_b and out_a == out_b
    dt = time.perf_counter() - t0
    ok = codes_a == codes_b == [0] * 8 and identical and dt < 60
    verdict(10, "CLI reruns are byte-identical", ok, f"{len(tree_a)} files across 5 subcommands identical={identical}, exit codes {codes_a}, {dt:.1f} s")
