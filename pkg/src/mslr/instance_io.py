"""The MSLR1 plain-text instance format.

Line 1 is a space-separated ``key=value`` metadata record.  Lines 2..n+1 hold
p + 2 comma-separated values: the X row, then y_i, then z_i, where z_i = -1
marks a withheld label.  Floats use 17 significant digits so a write/read
round trip is exact.

Required metadata keys are ``format n p k sigma phi seed xi tau kind`` where
``kind`` is ``planted``, ``null`` or ``recovery``.  Optional keys:
``value_set`` (comma list), ``beta1``/``beta2`` (sparse ``j:v|j:v`` lists,
empty string allowed) and ``noiseless`` (0/1).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadDimensions, SchemaMismatch
from .gen import DetectionSample, Instance
from .model import ModelParams, SignalPair

__all__ = [
    "FORMAT",
    "InstanceFile",
    "format_float",
    "write_instance",
    "read_instance",
    "from_instance",
    "from_detection",
]

FORMAT = "MSLR1"
_REQUIRED = ("format", "n", "p", "k", "sigma", "phi", "seed", "xi", "tau", "kind")
_KINDS = ("planted", "null", "recovery")


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode_sparse(beta: np.ndarray) -> str:
    idx = np.flatnonzero(beta)
    return "|".join(f"{int(j)}:{format_float(beta[j])}" for j in idx)


def _decode_sparse(text: str, p: int) -> np.ndarray:
    beta = np.zeros(p)
    if text:
        for item in text.split("|"):
            j, v = item.split(":")
            j = int(j)
            if not 0 <= j < p:
                raise SchemaMismatch(f"signal index {j} outside [0, {p})")
            beta[j] = float(v)
    return beta


@dataclass
class InstanceFile:
    """A parsed instance file.  ``z`` is None when every label is withheld."""

    X: np.ndarray
    y: np.ndarray
    z: np.ndarray | None
    meta: dict[str, str] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.meta["kind"]

    @property
    def n(self) -> int:
        return int(self.meta["n"])

    @property
    def p(self) -> int:
        return int(self.meta["p"])

    @property
    def k(self) -> int:
        return int(self.meta["k"])

    @property
    def sigma(self) -> float:
        return float(self.meta["sigma"])

    @property
    def phi(self) -> float:
        return float(self.meta["phi"])

    @property
    def params(self) -> ModelParams:
        extra = {}
        if "value_set" in self.meta:
            extra["value_set"] = tuple(float(v) for v in self.meta["value_set"].split(","))
        return ModelParams(p=self.p, n=self.n, k=self.k, sigma=self.sigma, phi=self.phi, **extra)

    @property
    def signals(self) -> SignalPair | None:
        if "beta1" not in self.meta or "beta2" not in self.meta:
            return None
        b1 = _decode_sparse(self.meta["beta1"], self.p)
        b2 = _decode_sparse(self.meta["beta2"], self.p)
        return SignalPair.from_vectors(b1, b2)


def write_instance(target, X, y, z, meta: dict) -> None:
    """Write an instance to a path or text stream.  ``z=None`` withholds labels."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise BadDimensions(f"X {X.shape} and y {y.shape} are incompatible")
    zz = np.full(n, -1, dtype=int) if z is None else np.asarray(z, dtype=int)
    if zz.shape != (n,):
        raise BadDimensions(f"z has shape {zz.shape}, expected ({n},)")
    record = {"format": FORMAT, "n": str(n), "p": str(p)}
    for key, value in meta.items():
        if key in ("format", "n", "p"):
            continue
        record[key] = format_float(value) if isinstance(value, float) else str(value)
    missing = [key for key in _REQUIRED if key not in record]
    if missing:
        raise SchemaMismatch(f"metadata is missing {missing}")
    if any(" " in v or "=" in v for v in record.values()):
        raise SchemaMismatch("metadata values may not contain spaces or '='")
    buf = io.StringIO()
    buf.write(" ".join(f"{key}={value}" for key, value in record.items()) + "\n")
    for i in range(n):
        row = [format_float(v) for v in X[i]] + [format_float(y[i]), str(int(zz[i]))]
        buf.write(",".join(row) + "\n")
    text = buf.getvalue()
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    else:
        target.write(text)


def read_instance(source) -> InstanceFile:
    """Parse an MSLR1 file from a path or text stream."""
    text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
    lines = text.splitlines()
    if not lines:
        raise SchemaMismatch("empty instance file")
    try:
        meta = dict(tok.split("=", 1) for tok in lines[0].split())
    except ValueError as exc:
        raise SchemaMismatch(f"malformed metadata line: {lines[0]!r}") from exc
    if meta.get("format") != FORMAT:
        raise SchemaMismatch(f"expected format={FORMAT}, got {meta.get('format')!r}")
    missing = [key for key in _REQUIRED if key not in meta]
    if missing:
        raise SchemaMismatch(f"metadata is missing {missing}")
    if meta["kind"] not in _KINDS:
        raise SchemaMismatch(f"unknown kind {meta['kind']!r}")
    n, p = int(meta["n"]), int(meta["p"])
    rows = lines[1:]
    if len(rows) != n:
        raise SchemaMismatch(f"expected {n} data rows, found {len(rows)}")
    data = np.array([[float(v) for v in row.split(",")] for row in rows]).reshape(n, -1)
    if data.shape[1] != p + 2:
        raise SchemaMismatch(f"expected {p + 2} columns, found {data.shape[1]}")
    z = data[:, p + 1].astype(int)
    return InstanceFile(data[:, :p], data[:, p], None if np.all(z == -1) else z, meta)


def _signal_meta(params: ModelParams, signals: SignalPair, seed: int, kind: str) -> dict:
    return {
        "k": params.k,
        "sigma": float(params.sigma),
        "phi": float(params.phi),
        "seed": int(seed),
        "xi": float(signals.xi),
        "tau": float(signals.tau),
        "kind": kind,
        "value_set": ",".join(format_float(v) for v in params.value_set),
        "beta1": _encode_sparse(signals.beta1),
        "beta2": _encode_sparse(signals.beta2),
    }


def from_instance(inst: Instance) -> tuple:
    """(X, y, z, meta) ready for :func:`write_instance`."""
    return inst.X, inst.y, inst.z, _signal_meta(inst.params, inst.signals, inst.seed, "recovery")


def from_detection(sample: DetectionSample) -> tuple:
    """(X, y, z, meta) for a detection sample; labels are withheld."""
    meta = _signal_meta(sample.params, sample.signals, sample.seed, sample.hypothesis.value)
    meta["noiseless"] = int(sample.noiseless)
    return sample.X, sample.y, None, meta
