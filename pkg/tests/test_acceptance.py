"""Acceptance suite: one check per primary criterion, at the stated tolerances.

Each criterion returns ``(passed, detail)``.  Under pytest the PASS/FAIL lines
are printed in an "acceptance criteria" section of the terminal summary; run
``python3 tests/test_acceptance.py`` to print them directly.
"""

from __future__ import annotations

import itertools
import math
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from mslr.corr import CorrConfig, corr_detect, corr_signed_support, corr_support
from mslr.gen import Hypothesis, derive_seed, make_rng, sample_detection, sample_instance, sample_signal_pair
from mslr.harness.cli import main as cli_main
from mslr.lowdeg import ChiSqConfig, chi2, chi2_bruteforce_oracle, chi2_sbmslrd, chi2_slrd, hermite_orthonormality_check
from mslr.model import PM1, ModelParams, SignalPair, classify_regime, corr_sample_bound
from mslr.recovery import am, recover_noiseless, rho_error
from mslr.reductions import PadConfig, detect_via_recovery, pad_embed, pad_instance, unpad_estimates, validate_reduction

EPS = 0.5
CONFIG = CorrConfig(EPS)


def _rate(flags) -> float:
    flags = list(flags)
    return sum(flags) / len(flags)


def _exact_rho(rho: float, signals: SignalPair) -> bool:
    return rho <= 1e-6 * max(1.0, 2 * signals.norm)


# CORR on SLR: signed support.

def crit_slr_signed_support():
    p, k, snr = 1000, 10, 10.0
    sigma = math.sqrt(k / snr)
    params = ModelParams(p=p, n=1, k=k, sigma=sigma)
    n = math.ceil(8 * (1 + EPS) * k * (snr + 1) / snr * math.log(2 * p))
    ref = sample_signal_pair(p, k, PM1, 1.0, 1.0, 0)
    assert corr_sample_bound(classify_regime(ref, 0.5, sigma), params, EPS) == n
    params = params.replace(n=n)
    hits = []
    for t in range(100):
        seed = derive_seed(101, t)
        sp = sample_signal_pair(p, k, PM1, 1.0, 1.0, derive_seed(seed, 0))
        inst = sample_instance(params, sp, derive_seed(seed, 1))
        hits.append(np.array_equal(corr_signed_support(inst.X, inst.y, CONFIG), np.sign(sp.beta1)))
    rate = _rate(hits)
    return rate >= 0.90, f"n={n}, signed-support rate {rate:.2f} (need >= 0.90)"


# CORR on a general mixture: joint support at n and n/4.

GENERAL = dict(p=1000, k=10, phi=0.3, xi=0.5, tau=0.0, snr=10.0)


def _general_params():
    g = GENERAL
    sigma = math.sqrt(g["k"] / g["snr"])
    params = ModelParams(p=g["p"], n=1, k=g["k"], sigma=sigma, phi=g["phi"])
    ref = sample_signal_pair(g["p"], g["k"], PM1, g["xi"], g["tau"], 0)
    n = corr_sample_bound(classify_regime(ref, g["phi"], sigma), params, EPS)
    return params.replace(n=n)


def _joint_support_rate(params, master):
    g = GENERAL
    hits = []
    for t in range(100):
        seed = derive_seed(master, t)
        sp = sample_signal_pair(g["p"], g["k"], PM1, g["xi"], g["tau"], derive_seed(seed, 0))
        inst = sample_instance(params, sp, derive_seed(seed, 1))
        hits.append(np.array_equal(corr_support(inst.X, inst.y, CONFIG).indices, sp.joint_support))
    return _rate(hits)


def crit_mslr_joint_support():
    params = _general_params()
    rate = _joint_support_rate(params, 102)
    return rate >= 0.85, f"n={params.n}, joint-support rate {rate:.2f} (need >= 0.85)"


def crit_mslr_joint_support_quarter_n():
    params = _general_params()
    params = params.replace(n=params.n // 4)
    rate = _joint_support_rate(params, 103)
    return rate <= 0.5, f"n={params.n}, joint-support rate {rate:.2f} (need <= 0.5; bound is conservative, see ledger)"


# CORR detection at the same n.

def _detection_outcomes(params, xi, tau, master, trials=200):
    """Alternate planted/null trials; return (type I rate, type II rate)."""
    p, k = params.p, params.k
    errors = {Hypothesis.PLANTED: [], Hypothesis.NULL: []}
    for t in range(trials):
        hyp = Hypothesis.PLANTED if t % 2 == 0 else Hypothesis.NULL
        seed = derive_seed(master, t)
        sp = sample_signal_pair(p, k, PM1, xi, tau, derive_seed(seed, 0))
        s = sample_detection(params, sp, hyp, derive_seed(seed, 1))
        errors[hyp].append(corr_detect(s.X, s.y, CONFIG) is not hyp)
    return _rate(errors[Hypothesis.NULL]), _rate(errors[Hypothesis.PLANTED])


def crit_corr_detection_general():
    params = _general_params()
    type1, type2 = _detection_outcomes(params, GENERAL["xi"], GENERAL["tau"], 104)
    return type1 + type2 <= 0.1, f"n={params.n}, type I {type1:.3f} + type II {type2:.3f} (need <= 0.1)"


def crit_corr_detection_sbmslr():
    params = _general_params().replace(phi=0.5)
    type1, type2 = _detection_outcomes(params, 1.0, -1.0, 105)
    accuracy = 1 - (type1 + type2) / 2
    return accuracy <= 0.65, f"n={params.n}, SBMSLR accuracy {accuracy:.3f} (need <= 0.65)"


# Noiseless recovery pipeline.

def crit_noiseless_pipeline():
    p, k, phi = 500, 5, 0.3
    params = ModelParams(p=p, n=1, k=k, sigma=0.0, phi=phi)
    ref = sample_signal_pair(p, k, PM1, 0.0, 0.0, 0)
    n = corr_sample_bound(classify_regime(ref, phi), params, EPS)
    params = params.replace(n=n)
    hits = []
    for t in range(100):
        seed = derive_seed(106, t)
        sp = sample_signal_pair(p, k, PM1, 0.0, 0.0, derive_seed(seed, 0))
        inst = sample_instance(params, sp, derive_seed(seed, 1))
        res = recover_noiseless(inst.X, inst.y, CONFIG, 10, truth=(sp.beta1, sp.beta2))
        hits.append(_exact_rho(res.rho, sp))
    rate = _rate(hits)
    return rate >= 0.85, f"n={n}, rho=0 rate {rate:.2f} (need >= 0.85)"


# Low-degree chi-square.

def crit_chi2_oracle_equivalence():
    count = mismatches = 0
    for regime, vs, p, n, D in itertools.product(
        ("slrd", "sbmslrd", "sym"), ("pm1", "p1"), range(1, 5), range(1, 4), range(0, 7)
    ):
        for k in range(1, p + 1):
            c = ChiSqConfig(p=p, n=n, k=k, sigma2=Fraction(1, 2), D=D, regime=regime, value_set=vs,
                            arithmetic="rational", phi=Fraction(1, 3))
            count += 1
            mismatches += chi2(c).value != chi2_bruteforce_oracle(c)
    return count >= 30 and mismatches == 0, f"{count} configs, {mismatches} mismatches"


def crit_chi2_worked_values():
    a = chi2_slrd(ChiSqConfig(p=4, n=1, k=2, sigma2=Fraction(2), D=2, regime="slrd", value_set="p1")).value
    b = chi2_sbmslrd(ChiSqConfig(p=4, n=2, k=2, sigma2=Fraction(2), D=4, regime="sbmslrd", value_set="pm1")).value
    return a == Fraction(1, 4) and b == Fraction(1, 8), f"slrd={a}, sbmslrd={b} (need 1/4, 1/8)"


def crit_hermite_orthonormality():
    report = hermite_orthonormality_check(4, 10**6, 107)
    return report.within(5.0), f"{len(report.indices)} multi-indices, max |z| = {report.max_abs_z:.2f} (need <= 5)"


# Conditional distributions of on-support design entries.

def crit_conditional_distributions():
    p, k, n, sigma, phi = 20, 4, 50, 1.0, 0.3
    sp = sample_signal_pair(p, k, PM1, 0.5, 0.0, 108)
    params = ModelParams(p=p, n=n, k=k, sigma=sigma, phi=phi)
    s2 = sp.norm_sq + sigma**2
    shared = np.intersect1d(sp.support1, sp.support2)
    only1 = np.setdiff1d(sp.support1, sp.support2)
    only2 = np.setdiff1d(sp.support2, sp.support1)
    Xs, ys, zs = [], [], []
    for t in range(10**4):
        inst = sample_instance(params, sp, derive_seed(108, t))
        Xs.append(inst.X[:, sp.joint_support])
        ys.append(inst.y)
        zs.append(inst.z)
    cols = {int(j): c for c, j in enumerate(sp.joint_support)}
    X = np.stack(Xs)  # (instances, n, |joint|)
    Y = np.stack(ys)
    Z = np.stack(zs)

    worst = 0.0
    failures = []

    def check(label, x, y, beta_j):
        nonlocal worst
        slope_true = beta_j / s2
        var_true = 1 - beta_j**2 / s2
        slope = float(x @ y / (y @ y))
        if slope_true != 0:
            err_slope = abs(slope / slope_true - 1)
        else:
            err_slope = abs(slope) / (1 / s2)
        var = float(np.mean((x - slope_true * y) ** 2))
        err_var = abs(var / var_true - 1)
        # Variance is constant across y buckets; check each decile.
        edges = np.quantile(y, np.linspace(0, 1, 11))
        bucket = np.clip(np.searchsorted(edges, y, side="right") - 1, 0, 9)
        for b in range(10):
            m = bucket == b
            err_var = max(err_var, abs(np.mean((x[m] - slope_true * y[m]) ** 2) / var_true - 1))
        worst = max(worst, err_slope, err_var)
        if err_slope > 0.05 or err_var > 0.05:
            failures.append(f"{label}: slope err {err_slope:.3f}, var err {err_var:.3f}")

    for j in shared:
        for zval, beta in ((1, sp.beta1), (0, sp.beta2)):
            m = Z == zval
            check(f"j={j} z={zval}", X[..., cols[int(j)]][m], Y[m], float(beta[j]))
    for j in only1:
        check(f"j={j} z=1", X[..., cols[int(j)]][Z == 1], Y[Z == 1], float(sp.beta1[j]))
        check(f"j={j} z=0", X[..., cols[int(j)]][Z == 0], Y[Z == 0], 0.0)
    for j in only2:
        check(f"j={j} z=0", X[..., cols[int(j)]][Z == 0], Y[Z == 0], float(sp.beta2[j]))
        check(f"j={j} z=1", X[..., cols[int(j)]][Z == 1], Y[Z == 1], 0.0)

    # Per-instance u_j against its conditional mean, for shared coordinates.
    norm_y = np.linalg.norm(Y, axis=1)
    y1 = np.sum((Y * (Z == 1)) ** 2, axis=1)
    y0 = np.sum((Y * (Z == 0)) ** 2, axis=1)
    for j in shared:
        u = np.einsum("ti,ti->t", X[..., cols[int(j)]], Y) / norm_y
        mean = (y1 * sp.beta1[j] + y0 * sp.beta2[j]) / (norm_y * s2)
        slope = float(u @ mean / (mean @ mean))
        resid_var = float(np.var(u - mean))
        worst = max(worst, abs(slope - 1))
        if abs(slope - 1) > 0.05 or resid_var >= 1:
            failures.append(f"u_j j={j}: slope {slope:.3f}, residual var {resid_var:.3f}")
    detail = f"10^4 instances, worst relative error {worst:.4f} (need <= 0.05)"
    if failures:
        detail += "; " + "; ".join(failures)
    return not failures, detail


# AM objective monotonicity and rho pseudometric.

def crit_am_and_rho_properties():
    violations = 0
    rng = make_rng(109)
    for case in range(10**4):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(4, 40))
        b1, b2 = rng.standard_normal(d), rng.standard_normal(d)
        X = rng.standard_normal((n, d))
        z = rng.random(n) < 0.5
        sigma = float(rng.choice([0.0, 0.5]))
        y = np.where(z, X @ b1, X @ b2) + sigma * rng.standard_normal(n)
        hist = np.array(am(X, y, (rng.standard_normal(d), rng.standard_normal(d)), 3).history)
        violations += bool(np.any(np.diff(hist) > 1e-9 * max(1.0, hist[0])))
        a, b, c = ([rng.standard_normal(d), rng.standard_normal(d)] for _ in range(3))
        violations += not math.isclose(rho_error(a, b), rho_error(b, a), rel_tol=1e-12, abs_tol=1e-12)
        violations += rho_error(a, a[::-1]) != 0.0 or rho_error(a, a) != 0.0
        violations += rho_error(a, c) > rho_error(a, b) + rho_error(b, c) + 1e-12
        violations += rho_error(a, b) < 0
    return violations == 0, f"10^4 cases, {violations} violations"


# Reductions.

def crit_pad_round_trip():
    rng = make_rng(110)
    failures = 0
    for t in range(200):
        n, p = int(rng.integers(1, 8)), int(rng.integers(1, 12))
        c = float(rng.choice([1.0, 0.75, 0.5, 0.3, 0.1]))
        X = rng.standard_normal((n, p))
        Xt, _, rec = pad_instance(X, rng.standard_normal(n), PadConfig(c, 1.0, derive_seed(110, t)))
        stacked = np.empty_like(Xt)
        stacked[:, rec.permutation] = Xt
        b1, b2 = rng.standard_normal(p), rng.standard_normal(p)
        u1, u2 = unpad_estimates(pad_embed(b1, rec), pad_embed(b2, rec), rec)
        failures += not (np.array_equal(stacked[:, rec.m :], X) and np.array_equal(u1, b1) and np.array_equal(u2, b2))
    return failures == 0, f"200 random round trips, {failures} mismatches"


def crit_validate_pad_reduction():
    p, k, n, sigma, c = 10, 2, 30, 1.0, 0.5
    sp = sample_signal_pair(p, k, PM1, 1.0, -1.0, 0)
    params = ModelParams(p=p, n=n, k=k, sigma=sigma)
    _, _, rec = pad_instance(np.zeros((n, p)), np.zeros(n), PadConfig(c, sigma))
    target_sp = SignalPair.from_vectors(pad_embed(sp.beta1, rec), pad_embed(sp.beta2, rec))
    target_params = ModelParams(p=rec.p_padded, n=n, k=k + rec.m, sigma=sigma)

    def transform(seed):
        s = sample_detection(params, sp, "planted", seed)
        Xt, yt, _ = pad_instance(s.X, s.y, PadConfig(c, sigma, derive_seed(seed, 1)))
        return Xt, yt

    def target(seed):
        s = sample_detection(target_params, target_sp, "planted", seed)
        return s.X, s.y

    report = validate_reduction(target, transform, 10**4, 111, alpha=0.01)
    pv = ", ".join(f"{name} p={v:.3g}" for name, v in report.pvalues.items())
    return report.passed, f"10^4 draws at alpha=0.01/4: {pv}"


def crit_detect_via_recovery():
    p, k, snr, n = 200, 10, 100.0, 100
    sigma = math.sqrt(k / snr)
    params = ModelParams(p=p, n=n, k=k, sigma=sigma)
    errors = {Hypothesis.PLANTED: [], Hypothesis.NULL: []}
    for hyp_index, hyp in enumerate((Hypothesis.PLANTED, Hypothesis.NULL)):
        for t in range(200):
            seed = derive_seed(112, 2 * t + hyp_index)
            sp = sample_signal_pair(p, k, PM1, 1.0, -1.0, derive_seed(seed, 0))
            s = sample_detection(params, sp, hyp, derive_seed(seed, 1))
            out = detect_via_recovery(s.X, s.y, lambda X, y: (sp.beta1, sp.beta2), sigma)
            errors[hyp].append(out is not hyp)
    type1, type2 = _rate(errors[Hypothesis.NULL]), _rate(errors[Hypothesis.PLANTED])
    return type1 + type2 <= 0.1, f"n={n}, type I {type1:.3f} + type II {type2:.3f} (need <= 0.1)"


# Determinism of every CLI subcommand.

_SPECS = {
    "phase.spec": "experiment=phase\nalgorithm=corr_signed\np=100\nk=3\nsnr=10\nxi=1\ntau=1\nn_mult=0.5,1\ntrials=5\nmaster_seed=2\n",
    "curve.spec": "experiment=recovery-curve\npipeline=am\np=40\nk=2\nphi=0.3\nn=200\ntrials=2\nmaster_seed=2\n",
    "roc.spec": "experiment=roc\np=50\nk=3\nsnr=10\nphi=0.3\nxi=0.5\nn=100\ntrials=10\nthresholds=5\n",
    "sweep.spec": "experiment=chi2sweep\nregime=sbmslrd\np=50\nk=4\nsigma2=1\nn=5,20\nD=0,4,8\n",
}


def _cli_runs(d: Path, tag: str) -> dict[str, bytes]:
    """Run every subcommand once, writing outputs with a suffix, and return their bytes."""
    for name, text in _SPECS.items():
        (d / name).write_text(text)
    rec = d / "rec.txt"
    det = d / "det.txt"
    noiseless = d / "noiseless.txt"
    cli_main(["gen", "--p", "40", "--n", "300", "--k", "2", "--phi", "0.3", "--seed", "5", "--out", str(rec)])
    cli_main(["gen", "--kind", "planted", "--p", "20", "--n", "40", "--k", "2", "--sigma", "1", "--xi", "1", "--tau", "-1", "--seed", "6", "--out", str(det)])
    cli_main(["gen", "--kind", "planted", "--noiseless", "--p", "20", "--n", "40", "--k", "2", "--sigma", "1", "--xi", "1", "--tau", "-1", "--seed", "6", "--out", str(noiseless)])
    commands = {
        "gen": ["gen", "--p", "30", "--n", "20", "--k", "3", "--snr", "5", "--seed", "9"],
        "corr": ["corr", "--in", str(rec), "--mode", "signed"],
        "recover-am": ["recover", "--in", str(rec), "--pipeline", "am"],
        "recover-convex": ["recover", "--in", str(rec), "--pipeline", "convex", "--lambda", "1"],
        "chi2": ["chi2", "--regime", "sym", "--p", "30", "--n", "10", "--k", "3", "--sigma2", "1/2", "--D", "8", "--phi", "3/10", "--exact"],
        "reduce-pad": ["reduce", "--in", str(det), "--op", "pad", "--c", "0.5", "--seed", "3"],
        "reduce-spr-abs": ["reduce", "--in", str(noiseless), "--op", "spr-abs", "--seed", "3"],
        "reduce-spr-sq": ["reduce", "--in", str(noiseless), "--op", "spr-sq", "--seed", "3"],
        "reduce-detect": ["reduce", "--in", str(det), "--op", "detect-via-recovery"],
        "phase": ["phase", "--spec", str(d / "phase.spec"), "--workers", "2"],
        "phase-curve": ["phase", "--spec", str(d / "curve.spec")],
        "roc": ["roc", "--spec", str(d / "roc.spec")],
        "sweep": ["sweep", "--spec", str(d / "sweep.spec")],
    }
    outputs = {}
    for name, argv in commands.items():
        out = d / f"{name}.{tag}.out"
        code = cli_main(argv + ["--out", str(out)])
        outputs[name] = out.read_bytes() if code in (0, 2) else b"exit " + str(code).encode()
    cli_main(["plot", "--in", str(d / f"phase.{tag}.out"), "--kind", "phase", "--out", str(d / f"plot.{tag}")])
    outputs["plot.gp"] = (d / f"plot.{tag}.gp").read_bytes().replace(f"plot.{tag}".encode(), b"plot")
    outputs["plot.svg"] = (d / f"plot.{tag}.svg").read_bytes()
    return outputs


def crit_cli_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        first = _cli_runs(Path(tmp), "a")
        second = _cli_runs(Path(tmp), "b")
    differing = [name for name in first if first[name] != second[name] or first[name].startswith(b"exit ")]
    return not differing, f"{len(first)} outputs compared, differing or failed: {differing or 'none'}"


CRITERIA = [
    ("corr_slr_signed_support", crit_slr_signed_support),
    ("corr_mslr_joint_support", crit_mslr_joint_support),
    ("corr_mslr_joint_support_quarter_n", crit_mslr_joint_support_quarter_n),
    ("corr_detection_general", crit_corr_detection_general),
    ("corr_detection_sbmslr_hardness", crit_corr_detection_sbmslr),
    ("noiseless_pipeline", crit_noiseless_pipeline),
    ("chi2_oracle_equivalence", crit_chi2_oracle_equivalence),
    ("chi2_worked_values", crit_chi2_worked_values),
    ("hermite_orthonormality", crit_hermite_orthonormality),
    ("conditional_distributions", crit_conditional_distributions),
    ("am_monotone_and_rho_pseudometric", crit_am_and_rho_properties),
    ("pad_unpad_round_trip", crit_pad_round_trip),
    ("validate_pad_reduction", crit_validate_pad_reduction),
    ("detect_via_recovery", crit_detect_via_recovery),
    ("cli_determinism", crit_cli_determinism),
]


def _run(name, fn):
    start = time.perf_counter()
    passed, detail = fn()
    line = f"{'PASS' if passed else 'FAIL'} {name}: {detail} [{time.perf_counter() - start:.1f}s]"
    return passed, line


@pytest.mark.parametrize("name,fn", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_acceptance(name, fn, acceptance_log):
    passed, line = _run(name, fn)
    print(line)
    acceptance_log(line)
    assert passed, line


if __name__ == "__main__":
    selected = set(sys.argv[1:])
    results = []
    for name, fn in CRITERIA:
        if selected and name not in selected:
            continue
        passed, line = _run(name, fn)
        print(line, flush=True)
        results.append(passed)
    sys.exit(0 if all(results) else 1)
