"""Flat ``key=value`` experiment spec files.

One assignment per line; ``#`` starts a comment; list values are
comma-separated.  Keys split into grid axes (every combination becomes a
cell) and scalar options.  Example::

    experiment=phase
    algorithm=corr_signed
    p=1000
    k=10
    snr=10
    n_mult=0.25,0.5,1,2
    trials=100
    master_seed=7
    output=phase.csv
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["EXPERIMENTS", "GRID_KEYS", "ExperimentSpec", "parse_spec", "load_spec"]

EXPERIMENTS = ("phase", "roc", "chi2sweep", "recovery-curve")

# Grid axes in the fixed order used for cell enumeration and CSV columns.
GRID_KEYS = (
    "regime", "values", "p", "k", "n", "n_mult", "sigma", "sigma2", "snr",
    "phi", "xi", "tau", "eps", "D",
)
_INT_KEYS = {"p", "k", "n", "D"}
_STR_KEYS = {"regime", "values"}
_OPTION_KEYS = {
    "algorithm", "statistic", "pipeline", "arithmetic", "bound", "lambda",
    "t0", "noiseless", "thresholds",
}
_DEFAULTS = {
    "values": ["pm1"], "phi": [0.5], "xi": [0.0], "tau": [0.0], "eps": [0.5],
}


@dataclass
class ExperimentSpec:
    experiment: str
    grid: dict[str, list]
    trials: int = 1
    master_seed: int = 0
    output: str = ""
    options: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            raise ValueError("grid must be nonempty")
        for cell in self.cells():
            if "p" in cell and "k" in cell and cell["k"] > cell["p"]:
                raise ValueError(f"grid point has k={cell['k']} > p={cell['p']}")

    @property
    def axes(self) -> list[str]:
        return [key for key in GRID_KEYS if key in self.grid]

    def cells(self) -> list[dict]:
        axes = self.axes
        return [dict(zip(axes, combo)) for combo in itertools.product(*(self.grid[a] for a in axes))]


def _convert(key: str, raw: str):
    if key in _STR_KEYS:
        return raw
    if key in _INT_KEYS:
        return int(raw)
    return float(raw)


def parse_spec(text: str) -> ExperimentSpec:
    scalars: dict[str, str] = {}
    grid: dict[str, list] = {}
    options: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in GRID_KEYS:
            grid[key] = [_convert(key, v.strip()) for v in value.split(",") if v.strip()]
        elif key in _OPTION_KEYS:
            options[key] = value
        elif key in ("experiment", "trials", "master_seed", "output"):
            scalars[key] = value
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    if "experiment" not in scalars:
        raise ValueError("spec is missing experiment=")
    experiment = scalars["experiment"]
    if experiment != "chi2sweep":
        for key, default in _DEFAULTS.items():
            grid.setdefault(key, list(default))
    return ExperimentSpec(
        experiment=experiment,
        grid=grid,
        trials=int(scalars.get("trials", 1)),
        master_seed=int(scalars.get("master_seed", 0)),
        output=scalars.get("output", ""),
        options=options,
    )


def load_spec(path) -> ExperimentSpec:
    return parse_spec(Path(path).read_text())
