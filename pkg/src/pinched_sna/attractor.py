"""Iterated upper boundary lines and the physical measure on the attractor.

phi_n(theta) = F^n_{theta - n v}(1) decreases monotonically in n to the upper
boundary graph phi+ of the global attractor.  For kappa above the critical
value phi+ is a strange non-chaotic attractor: zero on the dense forward orbit
of the pinch point, positive on a set of positive measure.

Graphs passed to :func:`graph_lyapunov` are callables taking a raw (M, D)
array of base points (see :mod:`pinched_sna.torus`) and returning M fibre
values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import _parallel
from .system import PinchedSystem, run_orbits
from .torus import TorusPoint, as_offset, lebesgue_points, to_float, to_raw

Graph = Callable[[np.ndarray], np.ndarray]

DEFAULT_TOL = 1e-12
DEFAULT_N_MAX = 10_000


def boundary_line(sys: PinchedSystem, theta: TorusPoint, n: int) -> float:
    """phi_n(theta); phi_0 = 1."""
    return float(boundary_lines(sys, theta.raw[None, :], n)[0])


def boundary_lines(sys: PinchedSystem, thetas_raw: np.ndarray, n: int) -> np.ndarray:
    """phi_n at every row of a raw (M, D) array."""
    if n < 0:
        raise ValueError("depth must be non-negative")
    thetas_raw = np.atleast_2d(np.asarray(thetas_raw, dtype=np.uint64))
    anchor = thetas_raw - np.uint64(n) * sys.v.raw
    return run_orbits(sys, anchor, 1.0, n).x


def boundary_ladder(sys: PinchedSystem, thetas_raw: np.ndarray, n_max: int) -> np.ndarray:
    """All of phi_0..phi_{n_max} at each base point, shape (n_max + 1, M).

    The orbits are run in lock step backwards from theta - n_max v: at each
    time every started orbit sees the same base point, so row n equals
    :func:`boundary_lines` at depth n bit for bit.
    """
    thetas_raw = np.atleast_2d(np.asarray(thetas_raw, dtype=np.uint64))
    M = thetas_raw.shape[0]
    ladder = np.ones((n_max + 1, M))
    fam = sys.family
    for s in range(-n_max, 0):
        theta = to_float(thetas_raw + as_offset(s) * sys.v.raw)
        rows = slice(-s, n_max + 1)
        ladder[rows] = fam.fibre_map(theta[None, :, :], ladder[rows])
    return ladder


def sna_value(
    sys: PinchedSystem, theta: TorusPoint, tol: float = DEFAULT_TOL, n_max: int = DEFAULT_N_MAX
) -> tuple[float, int, bool]:
    """Approximate phi+(theta) by the first phi_n with |phi_n - phi_{n-1}| < tol.

    Returns ``(value, depth_used, converged)``; without convergence the value
    at ``n_max`` is returned with ``converged=False``.
    """
    if not tol > 0 or n_max < 1:
        raise ValueError("need tol > 0 and n_max >= 1")
    block = min(64, n_max)
    while True:
        ladder = boundary_ladder(sys, theta.raw[None, :], block)[:, 0]
        small = np.flatnonzero(np.abs(np.diff(ladder)) < tol)
        if small.size:
            n = int(small[0]) + 1
            return float(ladder[n]), n, True
        if block >= n_max:
            return float(ladder[-1]), block, False
        block = min(2 * block, n_max)


@dataclass(frozen=True)
class BoundaryApprox:
    """phi_n as an evaluable graph, with the observed last increment."""

    sys: PinchedSystem
    n: int
    last_delta: float

    @classmethod
    def build(cls, sys: PinchedSystem, n: int, probe: int = 1024, seed: int = 0) -> "BoundaryApprox":
        if n == 0:
            return cls(sys, 0, 0.0)
        pts = lebesgue_points(probe, sys.D, "pseudorandom", seed)
        ladder = boundary_ladder(sys, pts, n)
        return cls(sys, n, float(np.max(np.abs(ladder[n] - ladder[n - 1]))))

    def __call__(self, thetas_raw: np.ndarray) -> np.ndarray:
        return boundary_lines(self.sys, thetas_raw, self.n)

    def at(self, theta: TorusPoint) -> float:
        return float(self(theta.raw[None, :])[0])


def zero_graph(thetas_raw: np.ndarray) -> np.ndarray:
    return np.zeros(np.atleast_2d(thetas_raw).shape[0])


def graph_from_coords(fn: Callable[[np.ndarray], np.ndarray]) -> Graph:
    """Wrap a function of float coordinates (M, D) as a graph."""
    return lambda raw: fn(to_float(np.atleast_2d(raw)))


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float          # mean over finite samples; -inf if none are finite
    stderr: float
    n_samples: int
    n_neg_inf: int        # samples with an exactly vanishing derivative

    def __float__(self) -> float:
        return self.value


def graph_lyapunov(
    sys: PinchedSystem,
    graph: Graph,
    n_samples: int,
    sampler: str = "midpoint",
    seed: int | None = None,
) -> LyapunovEstimate:
    """Estimate the integral of log F'_theta(graph(theta)) over Lebesgue measure."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    pts = lebesgue_points(n_samples, sys.D, sampler, seed)
    x = np.asarray(graph(pts), dtype=np.float64)
    logs = sys.log_fibre_derivative_at(to_float(pts), x)
    finite = np.isfinite(logs)
    n_inf = int(np.count_nonzero(~finite))
    if not finite.any():
        return LyapunovEstimate(float("-inf"), float("nan"), n_samples, n_inf)
    vals = logs[finite]
    stderr = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return LyapunovEstimate(float(vals.mean()), stderr, n_samples, n_inf)


# ---------------------------------------------------------------------------
# physical-measure samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphMeasureSample:
    """Points (theta_i, phi_depth(theta_i)) with theta_i Lebesgue distributed."""

    thetas: np.ndarray    # raw (M, D)
    xs: np.ndarray        # (M,)
    depth: int

    def __post_init__(self):
        if self.thetas.shape[0] != self.xs.shape[0]:
            raise ValueError("thetas and xs differ in length")
        if np.any((self.xs < 0) | (self.xs > 1)):
            raise ValueError("fibre values must lie in [0, 1]")

    def __len__(self) -> int:
        return self.xs.shape[0]

    @property
    def D(self) -> int:
        return self.thetas.shape[1]

    @property
    def theta_coords(self) -> np.ndarray:
        return to_float(self.thetas)

    def write_csv(self, path) -> None:
        path = Path(path)
        header = [f"theta_{i + 1}" for i in range(self.D)] + ["x", "depth"]
        coords = self.theta_coords
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row, x in zip(coords, self.xs):
                w.writerow([f"{c:.17g}" for c in row] + [f"{x:.17g}", self.depth])

    @classmethod
    def read_csv(cls, path) -> "GraphMeasureSample":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        D = sum(1 for h in header if h.startswith("theta_"))
        data = np.array([[float(c) for c in r[: D + 1]] for r in body]).reshape(-1, D + 1)
        depths = {int(r[D + 1]) for r in body}
        if len(depths) > 1:
            raise ValueError("mixed depths in sample file")
        depth = depths.pop() if depths else 0
        return cls(to_raw(data[:, :D]), data[:, D].copy(), depth)


def _boundary_chunk(sys, depth, thetas):
    return boundary_lines(sys, thetas, depth)


def sample_physical_measure(
    sys: PinchedSystem,
    n_points: int,
    depth: int,
    sampler: str = "pseudorandom",
    seed: int | None = None,
    workers: int = 1,
) -> GraphMeasureSample:
    """Push Lebesgue samples forward onto the graph of phi_depth."""
    pts = lebesgue_points(n_points, sys.D, sampler, seed)
    parts = _parallel.map_chunks(_boundary_chunk, (pts,), args=(sys, depth), workers=workers)
    return GraphMeasureSample(pts, np.concatenate(parts), depth)
