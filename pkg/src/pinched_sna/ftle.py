"""Finite-time Lyapunov exponents and the decay of P(lambda_N >= 0).

lambda_N(theta, x) is computed as the mean of log F' along the fibre orbit,
never as the log of a product, so N in the thousands neither overflows nor
underflows.  An exactly vanishing factor (a hit of the pinch fibre) makes the
exponent -inf, which never counts as positive.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _parallel
from .attractor import GraphMeasureSample
from .system import PinchedSystem, run_orbits
from .torus import TorusPoint

THRESHOLDS = (">=0", ">0")


class FitError(ValueError):
    """Too few usable points for a log-linear fit."""


@dataclass(frozen=True)
class FtleResult:
    value: float
    N: int
    theta: TorusPoint
    x: float


def ftle(sys: PinchedSystem, theta: TorusPoint, x: float, N: int) -> FtleResult:
    """lambda_N(theta, x) = (1/N) sum_{l<N} log F'_{theta + l v}(x_l)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0.0 <= x <= 1.0:
        raise ValueError("fibre coordinate must lie in [0, 1]")
    sums = run_orbits(sys, theta.raw, x, N, checkpoints=[N]).log_sums
    return FtleResult(float(sums[0, 0]) / N, N, theta, float(x))


def ftle_batch(sys: PinchedSystem, thetas_raw: np.ndarray, xs: np.ndarray, Ns: Sequence[int]) -> np.ndarray:
    """lambda_N for every sample and every N in ``Ns``, shape (len(Ns), M)."""
    Ns = list(Ns)
    sums = run_orbits(sys, thetas_raw, xs, max(Ns), checkpoints=Ns).log_sums
    order = sorted(set(Ns))
    rows = [order.index(N) for N in Ns]
    return sums[rows] / np.asarray(Ns, dtype=np.float64)[:, None]


def _positive(values: np.ndarray, threshold: str) -> np.ndarray:
    if threshold == ">=0":
        return values >= 0.0
    if threshold == ">0":
        return values > 0.0
    raise ValueError(f"threshold must be one of {THRESHOLDS}, got {threshold!r}")


def _count_chunk(sys, Ns, threshold, thetas, xs):
    lam = ftle_batch(sys, thetas, xs, Ns)
    return _positive(lam, threshold).sum(axis=1)


def _binomial(count: int, n: int) -> tuple[float, float]:
    p = count / n
    return p, math.sqrt(p * (1.0 - p) / n)


def positive_ftle_probability(
    sys: PinchedSystem, N: int, sample: GraphMeasureSample, threshold: str = ">=0", workers: int = 1
) -> tuple[float, float]:
    """Empirical P(lambda_N satisfies the threshold) and its binomial stderr."""
    series = decay_series(sys, sample, [N], threshold, workers=workers)
    e = series.entries[0]
    return e.p, e.stderr


@dataclass(frozen=True)
class DecayEntry:
    N: int
    p: float
    stderr: float
    n_samples: int


@dataclass(frozen=True)
class DecaySeries:
    entries: tuple[DecayEntry, ...]
    threshold: str = ">=0"

    @property
    def Ns(self) -> np.ndarray:
        return np.array([e.N for e in self.entries])

    @property
    def ps(self) -> np.ndarray:
        return np.array([e.p for e in self.entries])

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "p", "stderr", "n_samples"])
            for e in self.entries:
                w.writerow([e.N, f"{e.p:.17g}", f"{e.stderr:.17g}", e.n_samples])

    @classmethod
    def read_csv(cls, path, threshold: str = ">=0") -> "DecaySeries":
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        entries = tuple(
            DecayEntry(int(r["N"]), float(r["p"]), float(r["stderr"]), int(r["n_samples"])) for r in rows
        )
        return cls(entries, threshold)


def decay_series(
    sys: PinchedSystem,
    sample: GraphMeasureSample,
    N_list: Sequence[int],
    threshold: str = ">=0",
    workers: int = 1,
) -> DecaySeries:
    """p_N for each N, all evaluated along the same sample orbits."""
    N_list = [int(N) for N in N_list]
    if not N_list or N_list[0] < 1 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be strictly increasing and start at >= 1")
    if len(sample) == 0:
        raise ValueError("empty sample")
    _positive(np.zeros(1), threshold)
    counts = _parallel.map_chunks(
        _count_chunk, (sample.thetas, sample.xs), args=(sys, N_list, threshold), workers=workers
    )
    total = np.sum(counts, axis=0)
    n = len(sample)
    entries = tuple(DecayEntry(N, *_binomial(int(c), n), n) for N, c in zip(N_list, total))
    return DecaySeries(entries, threshold)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    fit_range: tuple[int, int]
    dropped_zero_p: tuple[int, ...] = field(default=())
    degenerate: bool = False          # zero variance in log p; r_squared set to 0

    def to_text(self) -> str:
        lines = [
            f"slope = {self.slope:.17g}",
            f"intercept = {self.intercept:.17g}",
            f"r_squared = {self.r_squared:.17g}",
            f"N_min = {self.fit_range[0]}",
            f"N_max = {self.fit_range[1]}",
            "dropped_zero_p = " + ",".join(str(N) for N in self.dropped_zero_p),
            f"degenerate = {str(self.degenerate).lower()}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DecayFit":
        kv = {}
        for line in text.splitlines():
            if "=" in line:
                k, _, v = line.partition("=")
                kv[k.strip()] = v.strip()
        dropped = tuple(int(s) for s in kv.get("dropped_zero_p", "").split(",") if s)
        return cls(
            float(kv["slope"]),
            float(kv["intercept"]),
            float(kv["r_squared"]),
            (int(kv["N_min"]), int(kv["N_max"])),
            dropped,
            kv.get("degenerate", "false") == "true",
        )


def fit_decay(series: DecaySeries, N_min: int = 10) -> DecayFit:
    """Least-squares fit of log p_N = intercept + slope * N over N >= N_min."""
    in_range = [e for e in series.entries if e.N >= N_min]
    dropped = tuple(e.N for e in in_range if e.p <= 0)
    used = [e for e in in_range if e.p > 0]
    if len(used) < 3:
        raise FitError(
            f"need at least 3 entries with N >= {N_min} and p > 0, have {len(used)}"
            + (f" (p = 0 at N = {list(dropped)}; increase the sample)" if dropped else "")
        )
    N = np.array([e.N for e in used], dtype=np.float64)
    y = np.log([e.p for e in used])
    slope, intercept = np.polyfit(N, y, 1)
    resid = y - (intercept + slope * N)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    degenerate = ss_tot == 0.0
    r2 = 0.0 if degenerate else 1.0 - float(np.sum(resid**2)) / ss_tot
    if degenerate:
        slope = 0.0
        intercept = float(y.mean())
    return DecayFit(float(slope), float(intercept), r2, (int(N[0]), int(N[-1])), dropped, degenerate)
