"""Monte-Carlo experiment engine.

Every (cell, trial) pair gets its own seed from
``SeedSequence(master_seed, spawn_key=(cell, trial))``, and per-trial outcomes
are reduced in trial order inside each cell.  Cells may run in worker
processes; output rows are always emitted in cell order, so the CSV does not
depend on the worker count.

CSV schemas (first line of each file is the header):

* phase: grid axes, ``algorithm, n_used, metric, value, se, trials, status``
* roc: grid axes, ``statistic, n_used, threshold, tpr, tpr_se, fpr, fpr_se, auc, trials, status``
* chi2sweep: grid axes, ``arithmetic, chi2, chi2_exact, status``
* recovery-curve: grid axes, ``pipeline, n_used, metric, value, se, trials, status``

``status`` is ``ok`` or ``error:<ExceptionName>``; failed cells keep their
grid coordinates and leave the metric columns empty.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..corr import CorrConfig, corr_detect, corr_signed_support, corr_statistics, corr_support, corr_threshold
from ..errors import MSLRError
from ..gen import Hypothesis, derive_seed, sample_detection, sample_instance, sample_signal_pair
from ..lowdeg import ChiSqConfig, LowDegRegime, chi2
from ..model import P1, PM1, ModelParams, SignalPair, classify_regime, corr_sample_bound, lowdeg_sample_thresholds
from ..recovery import recover_balanced, recover_noiseless
from ..reductions import recovery_residual
from .specfile import ExperimentSpec

__all__ = [
    "PHASE_ALGORITHMS",
    "ExperimentResult",
    "cell_trial_seed",
    "rate_se",
    "resolve_cell",
    "run_phase",
    "run_roc",
    "run_chi2_sweep",
    "run_recovery_curve",
    "run_experiment",
    "write_csv",
]

PHASE_ALGORITHMS = ("corr_support", "corr_signed", "corr_detect", "recover_noiseless", "recover_balanced")
RHO_TOL = 1e-6


@dataclass
class ExperimentResult:
    header: list[str]
    rows: list[list]
    failed_cells: int = 0
    timings: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def write_csv(result: ExperimentResult, path) -> None:
    Path(path).write_text(result.to_csv())


def cell_trial_seed(master_seed: int, cell: int, trial: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(cell), int(trial)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rate_se(rate: float, trials: int) -> float:
    return math.sqrt(rate * (1 - rate) / trials)


def _value_set(name: str):
    if name == "pm1":
        return PM1
    if name == "p1":
        return P1
    raise ValueError(f"values must be pm1 or p1, got {name!r}")


@dataclass(frozen=True)
class _Cell:
    params: ModelParams
    xi: float
    tau: float
    eps: float


def resolve_cell(cell: dict, options: dict, master_seed: int, index: int) -> _Cell:
    """Turn grid coordinates into concrete model parameters.

    sigma comes from ``sigma`` or from ``snr`` (sigma^2 = k b_min^2 / snr);
    n comes from ``n`` or from ``n_mult`` times the bound named by the
    ``bound`` option, evaluated on a reference signal pair seeded by the cell.
    """
    p, k = int(cell["p"]), int(cell["k"])
    vs = _value_set(cell.get("values", "pm1"))
    phi = float(cell.get("phi", 0.5))
    xi, tau, eps = float(cell.get("xi", 0.0)), float(cell.get("tau", 0.0)), float(cell.get("eps", 0.5))
    b_min = min(abs(v) for v in vs)
    if "sigma" in cell:
        sigma = float(cell["sigma"])
    elif "snr" in cell:
        sigma = math.sqrt(k * b_min**2 / float(cell["snr"]))
    else:
        sigma = 0.0
    if "n" in cell:
        n = int(cell["n"])
    elif "n_mult" in cell:
        base_params = ModelParams(p=p, n=1, k=k, sigma=sigma, phi=phi, value_set=vs)
        bound = options.get("bound", "corr")
        if bound in ("corr", "corr_positive"):
            ref = sample_signal_pair(p, k, vs, xi, tau, cell_trial_seed(master_seed, index, 2**32))
            regime = classify_regime(ref, phi, sigma)
            base = corr_sample_bound(regime, base_params, eps, use_positive_min=bound == "corr_positive")
        elif bound in ("lowdeg_slr", "lowdeg_sbmslr"):
            th = lowdeg_sample_thresholds(base_params)
            base = th.n_alg_slr if bound == "lowdeg_slr" else th.n_alg_sbmslr
        else:
            raise ValueError(f"unknown bound {bound!r}")
        n = max(1, math.ceil(float(cell["n_mult"]) * base))
    else:
        raise ValueError("cell needs n or n_mult")
    return _Cell(ModelParams(p=p, n=n, k=k, sigma=sigma, phi=phi, value_set=vs), xi, tau, eps)


def _trial_signals(c: _Cell, seed: int) -> SignalPair:
    return sample_signal_pair(c.params.p, c.params.k, c.params.value_set, c.xi, c.tau, derive_seed(seed, 0))


def _phase_trial(algorithm: str, c: _Cell, options: dict, seed: int, trial: int) -> float:
    signals = _trial_signals(c, seed)
    data_seed = derive_seed(seed, 1)
    config = CorrConfig(c.eps)
    params = c.params
    if algorithm == "corr_detect":
        hyp = Hypothesis.PLANTED if trial % 2 == 0 else Hypothesis.NULL
        sample = sample_detection(params, signals, hyp, data_seed)
        return float(corr_detect(sample.X, sample.y, config) is hyp)
    inst = sample_instance(params, signals, data_seed)
    truth = (signals.beta1, signals.beta2)
    try:
        if algorithm == "corr_support":
            est = corr_support(inst.X, inst.y, config)
            return float(np.array_equal(est.indices, signals.joint_support))
        if algorithm == "corr_signed":
            target = np.sign(params.phi * signals.beta1 + (1 - params.phi) * signals.beta2).astype(np.int8)
            return float(np.array_equal(corr_signed_support(inst.X, inst.y, config), target))
        tol = RHO_TOL * max(1.0, 2 * signals.norm)
        if algorithm == "recover_noiseless":
            res = recover_noiseless(inst.X, inst.y, config, int(options.get("t0", 10)), truth=truth)
            return float(res.rho <= tol)
        if algorithm == "recover_balanced":
            lam = float(options["lambda"]) if "lambda" in options else None
            res = recover_balanced(inst.X, inst.y, config, params.sigma, truth=truth, lam=lam)
            return float(res.rho <= tol)
    except MSLRError:
        # An algorithm that gives up on a trial counts as an unsuccessful trial.
        return 0.0
    raise ValueError(f"algorithm must be one of {PHASE_ALGORITHMS}, got {algorithm!r}")


def _metric_name(algorithm: str) -> str:
    return {
        "corr_support": "joint_support_rate",
        "corr_signed": "signed_support_rate",
        "corr_detect": "detection_accuracy",
    }.get(algorithm, "exact_recovery_rate")


def _cell_phase(args) -> tuple[list[list], bool, float]:
    spec, index, cell = args
    start = time.perf_counter()
    algorithm = spec.options.get("algorithm", "corr_support")
    coords = [cell[a] for a in spec.axes]
    metric = _metric_name(algorithm)
    try:
        c = resolve_cell(cell, spec.options, spec.master_seed, index)
        outcomes = [
            _phase_trial(algorithm, c, spec.options, cell_trial_seed(spec.master_seed, index, t), t)
            for t in range(spec.trials)
        ]
    except (MSLRError, ValueError) as exc:
        row = coords + [algorithm, None, metric, None, None, spec.trials, f"error:{type(exc).__name__}"]
        return [row], False, time.perf_counter() - start
    rate = sum(outcomes) / spec.trials
    row = coords + [algorithm, c.params.n, metric, rate, rate_se(rate, spec.trials), spec.trials, "ok"]
    return [row], True, time.perf_counter() - start


def _roc_statistic(name: str, sample, c: _Cell) -> float:
    if name == "corr_max":
        return float(np.max(np.abs(corr_statistics(sample.X, sample.y))))
    if name == "residual_oracle":
        s = sample.signals
        return -recovery_residual(sample.X, sample.y, s.beta1, s.beta2, c.params.sigma)
    raise ValueError(f"statistic must be corr_max or residual_oracle, got {name!r}")


def _auc(planted: np.ndarray, null: np.ndarray) -> float:
    """P(planted > null) + P(tie)/2 via the Mann-Whitney count."""
    greater = (planted[:, None] > null[None, :]).sum()
    ties = (planted[:, None] == null[None, :]).sum()
    return float((greater + 0.5 * ties) / (planted.size * null.size))


def _cell_roc(args):
    spec, index, cell = args
    start = time.perf_counter()
    stat_name = spec.options.get("statistic", "corr_max")
    n_thresholds = int(spec.options.get("thresholds", 21))
    coords = [cell[a] for a in spec.axes]
    try:
        c = resolve_cell(cell, spec.options, spec.master_seed, index)
        stats_by_hyp = {}
        for h_index, hyp in enumerate((Hypothesis.PLANTED, Hypothesis.NULL)):
            values = []
            for t in range(spec.trials):
                seed = cell_trial_seed(spec.master_seed, index, 2 * t + h_index)
                signals = _trial_signals(c, seed)
                sample = sample_detection(c.params, signals, hyp, derive_seed(seed, 1))
                values.append(_roc_statistic(stat_name, sample, c))
            stats_by_hyp[hyp] = np.array(values)
    except (MSLRError, ValueError) as exc:
        row = coords + [stat_name, None, None, None, None, None, None, None, spec.trials, f"error:{type(exc).__name__}"]
        return [row], False, time.perf_counter() - start
    planted, null = stats_by_hyp[Hypothesis.PLANTED], stats_by_hyp[Hypothesis.NULL]
    pooled = np.concatenate([planted, null])
    thresholds = list(np.quantile(pooled, np.linspace(0, 1, n_thresholds)))
    if stat_name == "corr_max":
        thresholds.append(corr_threshold(c.params.p, CorrConfig(c.eps)))
    auc = _auc(planted, null)
    rows = []
    for thr in sorted(set(float(t) for t in thresholds)):
        tpr = float(np.mean(planted >= thr))
        fpr = float(np.mean(null >= thr))
        rows.append(coords + [stat_name, c.params.n, thr, tpr, rate_se(tpr, spec.trials), fpr,
                              rate_se(fpr, spec.trials), auc, spec.trials, "ok"])
    return rows, True, time.perf_counter() - start


def _cell_chi2(args):
    spec, index, cell = args
    start = time.perf_counter()
    arithmetic = spec.options.get("arithmetic", "float")
    coords = [cell[a] for a in spec.axes]
    try:
        phi = cell.get("phi", 0.5)
        config = ChiSqConfig(
            p=int(cell["p"]), n=int(cell["n"]), k=int(cell["k"]),
            sigma2=Fraction(str(cell["sigma2"])) if arithmetic == "rational" else float(cell["sigma2"]),
            D=int(cell["D"]), regime=LowDegRegime(cell.get("regime", "slrd")),
            value_set=cell.get("values", "pm1"), arithmetic=arithmetic,
            phi=Fraction(str(phi)) if arithmetic == "rational" else float(phi),
        )
        value = chi2(config).value
    except (MSLRError, ValueError, KeyError) as exc:
        return [coords + [arithmetic, None, None, f"error:{type(exc).__name__}"]], False, time.perf_counter() - start
    exact = str(value) if isinstance(value, Fraction) else None
    return [coords + [arithmetic, float(value), exact, "ok"]], True, time.perf_counter() - start


def _cell_recovery_curve(args):
    spec, index, cell = args
    start = time.perf_counter()
    pipeline = spec.options.get("pipeline", "am")
    coords = [cell[a] for a in spec.axes]
    try:
        c = resolve_cell(cell, spec.options, spec.master_seed, index)
        config = CorrConfig(c.eps)
        lam = float(spec.options["lambda"]) if "lambda" in spec.options else None
        rhos, exact = [], []
        for t in range(spec.trials):
            seed = cell_trial_seed(spec.master_seed, index, t)
            signals = _trial_signals(c, seed)
            inst = sample_instance(c.params, signals, derive_seed(seed, 1))
            truth = (signals.beta1, signals.beta2)
            try:
                if pipeline == "am":
                    res = recover_noiseless(inst.X, inst.y, config, int(spec.options.get("t0", 10)), truth=truth)
                elif pipeline == "convex":
                    res = recover_balanced(inst.X, inst.y, config, c.params.sigma, truth=truth, lam=lam)
                else:
                    raise ValueError(f"pipeline must be am or convex, got {pipeline!r}")
                rho = res.rho
            except MSLRError:
                # Estimating zero for both signals is the fallback error.
                rho = 2 * signals.norm
            rhos.append(rho)
            exact.append(float(rho <= RHO_TOL * max(1.0, 2 * signals.norm)))
    except (MSLRError, ValueError) as exc:
        fail = f"error:{type(exc).__name__}"
        return [coords + [pipeline, None, m, None, None, spec.trials, fail] for m in ("rho_mean", "exact_recovery_rate")], False, time.perf_counter() - start
    rho_arr = np.array(rhos)
    rho_se = float(rho_arr.std(ddof=1) / math.sqrt(len(rho_arr))) if len(rho_arr) > 1 else 0.0
    rate = sum(exact) / spec.trials
    rows = [
        coords + [pipeline, c.params.n, "rho_mean", float(rho_arr.mean()), rho_se, spec.trials, "ok"],
        coords + [pipeline, c.params.n, "exact_recovery_rate", rate, rate_se(rate, spec.trials), spec.trials, "ok"],
    ]
    return rows, True, time.perf_counter() - start


_HEADERS = {
    "phase": ["algorithm", "n_used", "metric", "value", "se", "trials", "status"],
    "roc": ["statistic", "n_used", "threshold", "tpr", "tpr_se", "fpr", "fpr_se", "auc", "trials", "status"],
    "chi2sweep": ["arithmetic", "chi2", "chi2_exact", "status"],
    "recovery-curve": ["pipeline", "n_used", "metric", "value", "se", "trials", "status"],
}
_CELL_FNS = {
    "phase": _cell_phase,
    "roc": _cell_roc,
    "chi2sweep": _cell_chi2,
    "recovery-curve": _cell_recovery_curve,
}


def _run(spec: ExperimentSpec, kind: str, workers: int) -> ExperimentResult:
    if spec.experiment != kind:
        raise ValueError(f"spec is for {spec.experiment!r}, not {kind!r}")
    tasks = [(spec, i, cell) for i, cell in enumerate(spec.cells())]
    fn = _CELL_FNS[kind]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(fn, tasks))
    else:
        outputs = [fn(task) for task in tasks]
    result = ExperimentResult(spec.axes + _HEADERS[kind], [])
    for rows, ok, seconds in outputs:
        result.rows.extend(rows)
        result.failed_cells += 0 if ok else 1
        result.timings.append(seconds)
    return result


def run_phase(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """Success rate of the ``algorithm`` option at every grid cell."""
    return _run(spec, "phase", workers)


def run_roc(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """Planted-vs-null ROC of the ``statistic`` option (corr_max or residual_oracle)."""
    return _run(spec, "roc", workers)


def run_chi2_sweep(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """chi^2_{<=D} at every (regime, values, p, k, n, sigma2, phi, D) cell."""
    return _run(spec, "chi2sweep", workers)


def run_recovery_curve(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """Mean rho and exact-recovery rate of the ``pipeline`` option (am or convex)."""
    return _run(spec, "recovery-curve", workers)


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    return _run(spec, spec.experiment, workers)
