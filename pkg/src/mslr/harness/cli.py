"""Command-line interface.

Subcommands: gen, corr, recover, chi2, reduce, phase, roc, sweep, plot.
Exit codes: 0 on success, 2 when an experiment finished with failed cells,
1 on any fatal error.  Outputs go to ``--out`` when given, else stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..corr import CorrConfig, corr_detect, corr_signed_support, corr_support
from ..errors import MSLRError
from ..gen import derive_seed, sample_detection, sample_instance, sample_signal_pair
from ..instance_io import format_float, from_detection, from_instance, read_instance, write_instance
from ..lowdeg import ChiSqConfig, LowDegRegime, chi2
from ..model import P1, PM1, ModelParams, SignalPair
from ..recovery import recover_balanced, recover_noiseless
from ..reductions import PadConfig, detect_via_recovery, pad_embed, pad_instance, spr_transform
from .experiments import run_experiment
from .plots import PLOT_KINDS, emit_plots
from .specfile import load_spec

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _cmd_gen(args) -> int:
    vs = PM1 if args.values == "pm1" else P1
    if args.snr is not None:
        sigma = (args.k * min(abs(v) for v in vs) ** 2 / args.snr) ** 0.5
    else:
        sigma = args.sigma
    params = ModelParams(p=args.p, n=args.n, k=args.k, sigma=sigma, phi=args.phi, value_set=vs)
    signals = sample_signal_pair(args.p, args.k, vs, args.xi, args.tau, derive_seed(args.seed, 0))
    data_seed = derive_seed(args.seed, 1)
    if args.kind == "recovery":
        fields = from_instance(sample_instance(params, signals, data_seed))
    else:
        fields = from_detection(sample_detection(params, signals, args.kind, data_seed, noiseless=args.noiseless))
    buf = io.StringIO()
    write_instance(buf, *fields)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _cmd_corr(args) -> int:
    inst = read_instance(args.input)
    config = CorrConfig(args.eps)
    if args.mode == "detect":
        text = corr_detect(inst.X, inst.y, config).value + "\n"
    elif args.mode == "support":
        text = ",".join(str(int(j)) for j in corr_support(inst.X, inst.y, config).indices) + "\n"
    else:
        text = ",".join(str(int(v)) for v in corr_signed_support(inst.X, inst.y, config)) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _cmd_recover(args) -> int:
    inst = read_instance(args.input)
    signals = inst.signals
    truth = (signals.beta1, signals.beta2) if signals is not None else None
    config = CorrConfig(args.eps)
    if args.pipeline == "am":
        res = recover_noiseless(inst.X, inst.y, config, args.t0, truth=truth)
    else:
        res = recover_balanced(inst.X, inst.y, config, inst.sigma, truth=truth, lam=args.lam)
    rows = [
        ("field", "index", "value"),
        ("pipeline", "", res.pipeline.value),
        ("rho", "", format_float(res.rho)),
        ("iterations", "", res.iterations),
        ("flags", "", "|".join(sorted(res.flags))),
    ]
    for name, beta in (("beta1_hat", res.beta1_hat), ("beta2_hat", res.beta2_hat)):
        rows.extend((name, j, format_float(beta[j])) for j in range(beta.shape[0]))
    _emit(_csv_text(rows), args.out)
    return EXIT_OK


def _cmd_chi2(args) -> int:
    exact = args.exact

    def conv(text):
        value = Fraction(text)
        return value if exact else float(value)

    config = ChiSqConfig(
        p=args.p, n=args.n, k=args.k, sigma2=conv(args.sigma2), D=args.D,
        regime=LowDegRegime(args.regime), value_set=args.values,
        arithmetic="rational" if exact else "float", phi=conv(args.phi),
    )
    res = chi2(config)
    rows = [("degree", "term", "cumulative")]
    total = Fraction(0) if exact else 0.0
    for degree, term in zip(res.degrees, res.terms):
        total += term
        rows.append((degree, str(term) if exact else format_float(term), str(total) if exact else format_float(total)))
    _emit(_csv_text(rows), args.out)
    return EXIT_OK


def _cmd_reduce(args) -> int:
    inst = read_instance(args.input)
    sigma = args.sigma if args.sigma is not None else inst.sigma
    meta = dict(inst.meta)
    if args.op == "pad":
        X, y, record = pad_instance(inst.X, inst.y, PadConfig(args.c, sigma, args.seed))
        meta["k"] = str(inst.k + record.m)
        meta["realized_c"] = format_float(record.realized_c)
        signals = inst.signals
        if signals is not None:
            padded = SignalPair.from_vectors(pad_embed(signals.beta1, record), pad_embed(signals.beta2, record))
            meta["beta1"] = _sparse(padded.beta1)
            meta["beta2"] = _sparse(padded.beta2)
            meta["xi"] = format_float(padded.xi)
            meta["tau"] = format_float(padded.tau)
        buf = io.StringIO()
        write_instance(buf, X, y, inst.z, meta)
        _emit(buf.getvalue(), args.out)
        return EXIT_OK
    if args.op in ("spr-abs", "spr-sq"):
        X, y = spr_transform(inst.X, inst.y, "abs" if args.op == "spr-abs" else "square", args.seed)
        meta["spr"] = args.op
        buf = io.StringIO()
        write_instance(buf, X, y, None, meta)
        _emit(buf.getvalue(), args.out)
        return EXIT_OK
    signals = inst.signals
    if signals is None:
        raise MSLRError("detect-via-recovery needs beta1/beta2 in the instance metadata (oracle recovery)")
    decision = detect_via_recovery(inst.X, inst.y, lambda X, y: (signals.beta1, signals.beta2), sigma)
    _emit(decision.value + "\n", args.out)
    return EXIT_OK


def _sparse(beta: np.ndarray) -> str:
    return "|".join(f"{int(j)}:{format_float(beta[j])}" for j in np.flatnonzero(beta))


def _cmd_experiment(kind: str):
    def run(args) -> int:
        spec = load_spec(args.spec)
        if spec.experiment != kind and not (kind == "phase" and spec.experiment == "recovery-curve"):
            raise ValueError(f"spec experiment {spec.experiment!r} does not match subcommand")
        result = run_experiment(spec, workers=args.workers)
        out = args.out or spec.output
        _emit(result.to_csv(), out)
        if args.timing and out:
            Path(str(out) + ".timing.csv").write_text(
                _csv_text([("cell", "seconds")] + [(i, f"{t:.6f}") for i, t in enumerate(result.timings)])
            )
        return EXIT_PARTIAL if result.failed_cells else EXIT_OK

    return run


def _cmd_plot(args) -> int:
    emit_plots(args.input, args.kind, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mslr", description="Mixed sparse linear regression toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample an instance file")
    g.add_argument("--kind", choices=("recovery", "planted", "null"), default="recovery")
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    noise = g.add_mutually_exclusive_group()
    noise.add_argument("--sigma", type=float, default=0.0)
    noise.add_argument("--snr", type=float)
    g.add_argument("--phi", type=float, default=0.5)
    g.add_argument("--xi", type=float, default=0.0)
    g.add_argument("--tau", type=float, default=0.0)
    g.add_argument("--values", choices=("pm1", "p1"), default="pm1")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noiseless", action="store_true", help="noiseless detection sample")
    g.add_argument("--out")
    g.set_defaults(func=_cmd_gen)

    c = sub.add_parser("corr", help="run CORR on an instance file")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--eps", type=float, default=0.5)
    c.add_argument("--mode", choices=("detect", "support", "signed"), default="support")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_corr)

    r = sub.add_parser("recover", help="run a recovery pipeline on an instance file")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--pipeline", choices=("am", "convex"), default="am")
    r.add_argument("--t0", type=int, default=10)
    r.add_argument("--lambda", dest="lam", type=float)
    r.add_argument("--eps", type=float, default=0.5)
    r.add_argument("--out")
    r.set_defaults(func=_cmd_recover)

    x = sub.add_parser("chi2", help="evaluate the low-degree chi-square divergence")
    x.add_argument("--regime", choices=tuple(m.value for m in LowDegRegime), required=True)
    x.add_argument("--p", type=int, required=True)
    x.add_argument("--n", type=int, required=True)
    x.add_argument("--k", type=int, required=True)
    x.add_argument("--sigma2", type=str, required=True)
    x.add_argument("--D", type=int, required=True)
    x.add_argument("--phi", type=str, default="1/2")
    x.add_argument("--values", choices=("pm1", "p1"), default="pm1")
    x.add_argument("--exact", action="store_true", help="exact rational arithmetic")
    x.add_argument("--out")
    x.set_defaults(func=_cmd_chi2)

    d = sub.add_parser("reduce", help="apply a reduction to an instance file")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--op", choices=("pad", "spr-abs", "spr-sq", "detect-via-recovery"), required=True)
    d.add_argument("--c", type=float, default=0.5)
    d.add_argument("--sigma", type=float)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out")
    d.set_defaults(func=_cmd_reduce)

    for name, kind, helptext in (
        ("phase", "phase", "success-rate phase diagram (also runs recovery-curve specs)"),
        ("roc", "roc", "planted-vs-null ROC curves"),
        ("sweep", "chi2sweep", "low-degree chi-square sweep"),
    ):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--spec", required=True)
        e.add_argument("--out")
        e.add_argument("--workers", type=int, default=1)
        e.add_argument("--timing", action="store_true", help="also write <out>.timing.csv with wall times")
        e.set_defaults(func=_cmd_experiment(kind))

    pl = sub.add_parser("plot", help="render a gnuplot script and an SVG from a CSV")
    pl.add_argument("--in", dest="input", required=True)
    pl.add_argument("--kind", choices=PLOT_KINDS, required=True)
    pl.add_argument("--out", required=True, help="output prefix; writes <out>.gp and <out>.svg")
    pl.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MSLRError, ValueError, OSError, KeyError) as exc:
        print(f"mslr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
