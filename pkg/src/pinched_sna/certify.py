"""Grid-based certification of the quantitative conditions F1-F11.

Every inequality is evaluated on a finite grid and the worst margin is
reported with the point where it occurs.  This is falsification, not proof:
a pass means no violation was found at the stated resolution.  The grid is
refined logarithmically towards the pinch point and towards x = 0, where
the lower-bound conditions are tight.

Arithmetic conditions (parameter ranges, F5-F7) are checked first; if any
fails no grid work is done.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .bounds import ConditionConstants
from .system import PinchedSystem, TanhFamily
from .torus import (
    DiophantineEstimate,
    ResonanceError,
    RotationVector,
    as_offset,
    distance_raw,
    estimate_diophantine,
    lebesgue_points,
    to_float,
    to_raw,
)

PASS, FAIL, UNCHECKED = "pass", "fail", "unchecked"

# relative safety applied to constants derived from tight sup/inf values
_SAFETY = 1e-9


@dataclass(frozen=True)
class GridSpec:
    n_theta: int = 257          # uniform points per axis
    n_theta_log: int = 60       # log-spaced offsets from the pinch point per direction
    theta_log_min: float = 1e-12
    n_x: int = 257
    n_x_log: int = 60
    x_log_min: float = 1e-12
    n_pairs: int = 4000         # random base-point pairs for the theta-Lipschitz check
    dioph_horizon: int = 100_000
    seed: int = 0

    def describe(self) -> str:
        return (
            f"theta: {self.n_theta}/axis + {self.n_theta_log} log-spaced to {self.theta_log_min:g}; "
            f"x: {self.n_x} + {self.n_x_log} log-spaced to {self.x_log_min:g}; "
            f"pairs: {self.n_pairs}; Diophantine horizon: {self.dioph_horizon}"
        )


@dataclass(frozen=True)
class ConditionVerdict:
    name: str
    status: str
    margin: float = math.nan
    witness: tuple = ()
    detail: str = ""

    def line(self) -> str:
        w = "(" + ", ".join(f"{x:.17g}" if isinstance(x, float) else str(x) for x in self.witness) + ")"
        return f"{self.name}\t{self.status}\tmargin={self.margin:.6e}\twitness={w}\t{self.detail}".rstrip()


@dataclass
class CertificationReport:
    verdicts: list[ConditionVerdict]
    grid: GridSpec
    system_tag: str = ""
    caveat: str = "grid-based falsification at the stated resolution; not a proof"

    @property
    def passed(self) -> bool:
        return all(v.status == PASS for v in self.verdicts)

    def first_failure(self) -> ConditionVerdict | None:
        for v in self.verdicts:
            if v.status == FAIL:
                return v
        return None

    def __getitem__(self, name: str) -> ConditionVerdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_text(self) -> str:
        head = [
            f"# system: {self.system_tag}",
            f"# grid: {self.grid.describe()}",
            f"# caveat: {self.caveat}",
            f"# verdict: {'PASS' if self.passed else 'FAIL'}",
        ]
        return "\n".join(head + [v.line() for v in self.verdicts]) + "\n"


class ConstantSearchError(RuntimeError):
    def __init__(self, blocking: str, message: str):
        super().__init__(message)
        self.blocking = blocking


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def theta_grid(sys: PinchedSystem, grid: GridSpec) -> np.ndarray:
    """Uniform product grid plus log-spaced approaches to theta* (raw)."""
    D = sys.D
    parts = [lebesgue_points(grid.n_theta**D, D, "grid")]
    if grid.n_theta_log:
        dirs = [np.eye(D)[i] * s for i in range(D) for s in (1.0, -1.0)]
        if D > 1:
            diag = np.ones(D) / math.sqrt(D)
            dirs += [diag, -diag]
        ts = np.logspace(math.log10(grid.theta_log_min), math.log10(0.49), grid.n_theta_log)
        star = sys.theta_star.coords
        for u in dirs:
            parts.append(to_raw(star[None, :] + ts[:, None] * u[None, :]))
    return np.unique(np.concatenate(parts), axis=0)


def x_grid(grid: GridSpec, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    xs = [np.linspace(lo, hi, grid.n_x)]
    if grid.n_x_log and hi > 0:
        start = max(grid.x_log_min, lo) if lo > 0 else grid.x_log_min
        if start < hi:
            xs.append(np.logspace(math.log10(start), math.log10(hi), grid.n_x_log))
    return np.unique(np.concatenate(xs))


# ---------------------------------------------------------------------------
# individual conditions
# ---------------------------------------------------------------------------

def _verdict(name, margins, strict, witness_fn, detail=""):
    i = int(np.argmin(margins))
    m = float(margins.flat[i])
    ok = m > 0 if strict else m >= 0
    return ConditionVerdict(name, PASS if ok else FAIL, m, witness_fn(i), detail)


def _arithmetic(c: ConditionConstants) -> list[ConditionVerdict]:
    out = []
    ranges = {
        "alpha > 2": c.alpha - 2,
        "beta > 0": c.beta,
        "gamma > 0": c.gamma,
        "0 < L0": c.L0,
        "L0 < 1": 1 - c.L0,
        "m >= 1": c.m - 0.5,
        "a > 1": c.a - 1,
        "0 < b": c.b,
        "b < 1": 1 - c.b,
        "c > 0": c.c,
        "d > 1": c.d - 1,
        "0 < delta": c.delta,
        "delta < 1": 1 - c.delta,
        "x_delta > 0": c.x_delta,
    }
    bad = {k: v for k, v in ranges.items() if not v > 0}
    worst = min(ranges, key=lambda k: ranges[k])
    out.append(ConditionVerdict(
        "ranges", FAIL if bad else PASS, float(ranges[worst]), (worst,),
        "violated: " + "; ".join(bad) if bad else "",
    ))
    gamma_ok = c.gamma > 0
    thr5 = 22.0 * (1.0 + 1.0 / c.gamma) if gamma_ok else math.inf
    out.append(ConditionVerdict("F5", PASS if c.m > thr5 else FAIL, c.m - thr5, (c.m,), "m > 22(1 + 1/gamma)"))
    thr6 = (c.m + 1) ** c.d
    out.append(ConditionVerdict("F6", PASS if c.a >= thr6 else FAIL, c.a - thr6, (c.a,), "a >= (m+1)^d"))
    out.append(ConditionVerdict("F7", PASS if c.b <= c.c else FAIL, c.c - c.b, (c.b,), "b <= c"))
    if c.a > 1 and 0 < c.delta < 1:
        m_delta = math.log(1 - c.delta) + math.log(c.a) / 4
        out.append(ConditionVerdict(
            "delta-vs-a", PASS if m_delta > 0 else FAIL, m_delta, (c.delta,), "log(1 - delta) > -(log a)/4",
        ))
    else:
        out.append(ConditionVerdict("delta-vs-a", FAIL, math.nan, (), "needs a > 1 and delta in (0, 1)"))
    cap = c.beta * c.b / 2
    out.append(ConditionVerdict(
        "x_delta-cap", PASS if c.x_delta <= cap else FAIL, cap - c.x_delta, (c.x_delta,), "x_delta <= beta b / 2",
    ))
    return out


def _dioph(sys: PinchedSystem, c: ConditionConstants, horizon: int) -> ConditionVerdict:
    try:
        est = estimate_diophantine(sys.v, sys.theta_star, c.d, horizon)
    except ResonanceError as exc:
        return ConditionVerdict("F4", FAIL, -c.c, (), str(exc))
    return ConditionVerdict(
        "F4", PASS if est.min_product >= c.c else FAIL, est.min_product - c.c, (est.argmin_n,),
        f"d(tau_n, theta*) n^d >= c witnessed for n <= {horizon}",
    )


def _f8(sys: PinchedSystem, c: ConditionConstants) -> ConditionVerdict:
    if c.m <= 1:
        return ConditionVerdict("F8", PASS, math.inf, (), "empty range")
    n = np.arange(1, c.m)
    tau = sys.theta_star.raw[None, :] + as_offset(n)[:, None] * sys.v.raw
    margins = distance_raw(tau, sys.theta_star.raw) - c.b
    return _verdict("F8", margins, True, lambda i: (int(n[i]),), "d(tau_n, theta*) > b for n < m")


def _grid_conditions(sys: PinchedSystem, c: ConditionConstants, grid: GridSpec) -> list[ConditionVerdict]:
    fam = sys.family
    th_raw = theta_grid(sys, grid)
    th = to_float(th_raw)
    xs = x_grid(grid)
    T = th[:, None, :]
    dist = distance_raw(th_raw, sys.theta_star.raw)
    near = np.minimum(1.0, 2.0 / c.b * dist)

    def wit(shape, xs_used):
        def f(i):
            ti, xi = np.unravel_index(i, shape)
            return tuple(float(t) for t in th[ti]) + (float(xs_used[xi]),)
        return f

    out = []
    der = fam.fibre_derivative(T, xs[None, :])
    out.append(_verdict("F1", c.alpha - der, False, wit(der.shape, xs), "F' <= alpha"))

    xs2 = x_grid(grid, c.L0, 1.0)
    xs2 = np.unique(np.concatenate([[c.L0], xs2[xs2 >= c.L0]]))
    # compared in logs: both sides underflow for steep fibre maps
    logder2 = sys.log_fibre_derivative_at(T, xs2[None, :])
    out.append(_verdict(
        "F2", -c.gamma * math.log(c.alpha) - logder2, False, wit(logder2.shape, xs2),
        "log F' <= -gamma log alpha on [L0, 1] (log margin)",
    ))

    out.append(_f3(sys, c, grid, th_raw, xs))

    Fv = fam.fibre_map(T, xs[None, :])
    rhs = np.minimum(2 * c.L0, c.a * xs)[None, :] * near[:, None]
    out.append(_verdict("F9", Fv - rhs, False, wit(Fv.shape, xs), "F >= min(2 L0, a x) min(1, 2 d / b)"))

    d0 = fam.fibre_derivative(th, np.zeros(th.shape[0]))
    out.append(_verdict(
        "F10", d0 - c.a * near, False, lambda i: tuple(float(t) for t in th[i]), "F'(0) >= a min(1, 2 d / b)",
    ))

    xs11 = x_grid(grid, 0.0, c.x_delta)
    der11 = fam.fibre_derivative(T, xs11[None, :])
    out.append(_verdict(
        "F11", der11 - (1 - c.delta) * d0[:, None], False, wit(der11.shape, xs11),
        "F'(x) >= (1 - delta) F'(0) on [0, x_delta]",
    ))
    return out


def _f3(sys, c, grid, th_raw, xs) -> ConditionVerdict:
    fam = sys.family
    D = sys.D
    rng = np.random.default_rng(grid.seed)
    # neighbouring uniform grid points along each axis
    base = lebesgue_points(grid.n_theta**D, D, "grid")
    step = np.uint64((1 << 64) // grid.n_theta)
    pairs_a = [base] * D
    pairs_b = [base + step * np.eye(D, dtype=np.uint64)[i] for i in range(D)]
    # random pairs and close pairs near the pinch point
    ra = rng.integers(0, 2**63, size=(grid.n_pairs, D), dtype=np.uint64) * np.uint64(2)
    rb = rng.integers(0, 2**63, size=(grid.n_pairs, D), dtype=np.uint64) * np.uint64(2)
    pairs_a += [ra, th_raw[:-1]]
    pairs_b += [rb, th_raw[1:]]
    A = np.concatenate(pairs_a)
    B = np.concatenate(pairs_b)
    dist = distance_raw(A, B)
    keep = dist > 0
    A, B, dist = A[keep], B[keep], dist[keep]
    fa = fam.fibre_map(to_float(A)[:, None, :], xs[None, :])
    fb = fam.fibre_map(to_float(B)[:, None, :], xs[None, :])
    ratio = np.max(np.abs(fa - fb), axis=1) / dist
    i = int(np.argmax(ratio))
    margin = c.beta - float(ratio[i])
    wit = tuple(float(t) for t in to_float(A[i])) + tuple(float(t) for t in to_float(B[i]))
    return ConditionVerdict("F3", PASS if margin >= 0 else FAIL, margin, wit, "|F_theta - F_theta'| <= beta d")


def certify(sys: PinchedSystem, candidate: ConditionConstants, grid: GridSpec = GridSpec()) -> CertificationReport:
    """Check every condition for ``candidate`` on ``grid``."""
    verdicts = _arithmetic(candidate)
    grid_names = ["F1", "F2", "F3", "F4", "F8", "F9", "F10", "F11"]
    if any(v.status == FAIL for v in verdicts):
        verdicts += [ConditionVerdict(n, UNCHECKED, detail="skipped: arithmetic failure") for n in grid_names]
    else:
        verdicts.append(_dioph(sys, candidate, grid.dioph_horizon))
        verdicts.append(_f8(sys, candidate))
        verdicts += _grid_conditions(sys, candidate, grid)
    order = ["ranges"] + [f"F{i}" for i in range(1, 12)] + ["delta-vs-a", "x_delta-cap"]
    verdicts.sort(key=lambda v: order.index(v.name))
    return CertificationReport(verdicts, grid, sys.tag)


# ---------------------------------------------------------------------------
# constant search
# ---------------------------------------------------------------------------

def _sup_derivative(sys: PinchedSystem, grid: GridSpec) -> float:
    fam = sys.family
    if hasattr(fam, "derivative_bound"):
        return fam.derivative_bound()
    th = to_float(theta_grid(sys, grid))
    return float(np.max(fam.fibre_derivative(th[:, None, :], x_grid(grid)[None, :])))


def _log_sup_derivative(sys: PinchedSystem, grid: GridSpec, lo: float) -> float:
    """log of sup F' over x in [lo, 1]."""
    fam = sys.family
    if hasattr(fam, "log_contraction_bound"):
        return fam.log_contraction_bound(lo)
    th = to_float(theta_grid(sys, grid))
    xs = x_grid(grid, lo, 1.0)
    return float(np.max(sys.log_fibre_derivative_at(th[:, None, :], xs[None, :])))


def _theta_lipschitz(sys: PinchedSystem, grid: GridSpec) -> float:
    fam = sys.family
    if hasattr(fam, "theta_lipschitz"):
        # the bound is attained; leave room for rounding in difference quotients
        return fam.theta_lipschitz() * (1 + 1e-6)
    probe = ConditionConstants(3, 0, 1, 0.5, 1, 2, 0.5, 1, 2, 0.5, 0.1)
    v = _f3(sys, probe, grid, theta_grid(sys, grid), x_grid(grid))
    return -v.margin * (1 + 1e-6)


def _x_delta(sys: PinchedSystem, delta: float, grid: GridSpec) -> float:
    fam = sys.family
    if hasattr(fam, "x_delta"):
        return fam.x_delta(delta)
    th = to_float(theta_grid(sys, grid))
    xs = x_grid(grid)
    d0 = fam.fibre_derivative(th, np.zeros(th.shape[0]))
    ok = np.all(fam.fibre_derivative(th[:, None, :], xs[None, :]) >= (1 - delta) * d0[:, None], axis=0)
    bad = np.flatnonzero(~ok)
    return float(xs[bad[0] - 1]) if bad.size else 1.0


def candidate_constants(
    sys: PinchedSystem, dioph: DiophantineEstimate, L0: float, grid: GridSpec, b_margin: float = 0.01
) -> ConditionConstants | str:
    """Constants for one L0 following the dependency chain gamma -> m -> a -> b.

    Returns the name of the blocking condition if the chain breaks.
    """
    alpha = max(_sup_derivative(sys, grid), 2.0 * (1 + _SAFETY))
    log_contraction = _log_sup_derivative(sys, grid, L0)
    if not log_contraction < 0.0:
        return "F2"
    gamma = -log_contraction / math.log(alpha) * (1 - _SAFETY)
    m = int(math.floor(22.0 * (1.0 + 1.0 / gamma))) + 1
    a = (m + 1) ** dioph.d * (1 + _SAFETY)
    n = np.arange(1, m)
    tau = sys.theta_star.raw[None, :] + as_offset(n)[:, None] * sys.v.raw
    closest = float(np.min(distance_raw(tau, sys.theta_star.raw))) if m > 1 else 1.0
    b = min(dioph.c, closest, 1.0) * (1 - b_margin)
    beta = _theta_lipschitz(sys, grid)
    delta = 1.0 - a ** (-1.0 / 8.0)
    x_delta = min(_x_delta(sys, delta, grid) * (1 - _SAFETY), beta * b / 2)
    kappa = getattr(sys.family, "kappa", None)
    return ConditionConstants(
        alpha=alpha, beta=beta, gamma=gamma, L0=L0, m=m, a=a, b=b, c=dioph.c, d=dioph.d,
        delta=delta, x_delta=x_delta, kappa0=kappa,
    )


def default_L0_schedule(n: int = 48) -> np.ndarray:
    return np.logspace(-4, math.log10(0.5), n)


def suggest_constants(
    sys: PinchedSystem,
    dioph: DiophantineEstimate,
    grid: GridSpec = GridSpec(),
    L0_values: Iterable[float] | None = None,
) -> tuple[ConditionConstants, CertificationReport]:
    """First certified constant set along the L0 schedule.

    Raises :class:`ConstantSearchError` naming the condition that most often
    blocked the candidates, preferring those that completed the constant
    chain and reached the grid checks.
    """
    chain_blockers: Counter = Counter()     # the gamma -> m -> a -> b chain broke
    grid_blockers: Counter = Counter()      # a complete candidate failed certification
    for L0 in default_L0_schedule() if L0_values is None else L0_values:
        cand = candidate_constants(sys, dioph, float(L0), grid)
        if isinstance(cand, str):
            chain_blockers[cand] += 1
            continue
        report = certify(sys, cand, grid)
        if report.passed:
            return cand, report
        grid_blockers[report.first_failure().name] += 1
    # report the obstacle met by the candidates that got furthest
    blockers = grid_blockers or chain_blockers
    blocking = blockers.most_common(1)[0][0] if blockers else "none"
    counts = dict(chain_blockers + grid_blockers)
    raise ConstantSearchError(blocking, f"no certified constants for {sys.tag}; blocking condition {blocking} ({counts})")


def search_constants(
    sys: PinchedSystem, d: float = 1.01, grid: GridSpec = GridSpec(), L0_values: Iterable[float] | None = None
) -> tuple[ConditionConstants, CertificationReport]:
    """:func:`suggest_constants` after estimating the Diophantine constant."""
    try:
        dioph = estimate_diophantine(sys.v, sys.theta_star, d, grid.dioph_horizon)
    except ResonanceError as exc:
        raise ConstantSearchError("F4", str(exc)) from exc
    return suggest_constants(sys, dioph, grid, L0_values)


@dataclass
class SweepResult:
    kappa: float | None
    constants: ConditionConstants | None
    report: CertificationReport | None
    tried: list[tuple[float, str]] = field(default_factory=list)   # (kappa, blocking condition)


def sweep_kappa(
    kappas: Iterable[float],
    D: int = 1,
    v: RotationVector | None = None,
    d: float = 1.01,
    grid: GridSpec = GridSpec(),
) -> SweepResult:
    """First kappa on the sweep at which the tanh family certifies."""
    v = v if v is not None else RotationVector.golden(D)
    result = SweepResult(None, None, None)
    for kappa in kappas:
        sys = PinchedSystem(TanhFamily(float(kappa), D), v)
        try:
            constants, report = search_constants(sys, d, grid)
        except ConstantSearchError as exc:
            result.tried.append((float(kappa), exc.blocking))
            continue
        result.kappa, result.constants, result.report = float(kappa), constants, report
        return result
    return result
