"""Property suite run against a certified constant set.

Each check samples base points, evaluates one estimate of the upper- and
lower-bound arguments, and records the worst margin (bound minus observed;
negative means a violation) with the point where it occurs.

Balls around the pinch orbit whose radius is below the fixed-point lattice
spacing contain only their centre; samples then collapse onto it and the
check says so in its detail field.  Checks whose range of rotation steps
exceeds the Diophantine horizon used for certification are reported as
``unchecked-beyond-horizon`` instead of pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attractor import boundary_ladder, boundary_lines
from .bounds import (
    LATTICE_RESOLUTION,
    BadSetSpec,
    ConditionConstants,
    admissible_mask,
    bad_set_measure_bound,
    bad_set_members,
    check_disjointness,
    radii,
    s_counts,
    zero_line_ftle,
)
from .ftle import ftle_batch
from .system import PinchedSystem
from .torus import distance_raw, lebesgue_points, to_float

PASS, FAIL, UNCHECKED = "pass", "fail", "unchecked-beyond-horizon"


@dataclass(frozen=True)
class VerifySettings:
    n_samples: int = 1000
    zero_line_Ns: tuple[int, ...] = (10, 50, 100)
    near_pinch_Ns: tuple[int, ...] = (1, 2, 3, 5)
    n_max: int = 200
    q: int = 1
    disjoint_js: tuple[int, ...] = (1, 2, 3, 4)
    bad_set_specs: tuple[tuple[int, int, int], ...] = ((40, 90, 99), (60, 0, 19), (30, 50, 100))
    bad_set_samples: int = 100_000
    graph_depth: int = 1000
    horizon: int = 100_000          # Diophantine horizon the constants were certified to
    seed: int = 0


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    margin: float
    witness: str = ""
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def line(self) -> str:
        return f"{self.name}\t{self.status}\tmargin={self.margin:.6e}\twitness=({self.witness})\t{self.detail}"


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...]
    system_tag: str
    constants: ConditionConstants
    settings: VerifySettings = field(default_factory=VerifySettings)

    @property
    def failed(self) -> tuple[CheckResult, ...]:
        return tuple(c for c in self.checks if c.status == FAIL)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        verdict = "PASS" if self.passed else ("FAIL" if self.failed else "INCOMPLETE")
        head = [
            f"# system: {self.system_tag}",
            f"# samples: {self.settings.n_samples}; n_max: {self.settings.n_max}; q: {self.settings.q}; "
            f"seed: {self.settings.seed}; horizon: {self.settings.horizon}",
            f"# verdict: {verdict}",
        ]
        return "\n".join(head + [c.line() for c in self.checks]) + "\n"


def _status(margin: float, beyond_horizon: bool = False) -> str:
    if margin < 0:
        return FAIL
    return UNCHECKED if beyond_horizon else PASS


def ball_samples(sys: PinchedSystem, radius: float, n: int, rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    """n raw points in the open ball B_radius(theta*) on the fixed-point lattice.

    Returns ``(points, collapsed)``; ``collapsed`` is true when the ball holds
    no lattice point but its centre.
    """
    center = sys.theta_star.raw
    D = sys.D
    half = math.ceil(radius / LATTICE_RESOLUTION) - 1     # |offset| <= half  <=>  offset < radius
    if half < 1:
        return np.repeat(center[None, :], n, axis=0), True
    half = min(half, 2**62)
    out = np.empty((0, D), dtype=np.uint64)
    while out.shape[0] < n:
        off = rng.integers(-half, half, size=(2 * n, D), endpoint=True, dtype=np.int64)
        pts = center[None, :] + off.astype(np.uint64)
        pts = pts[distance_raw(pts, center) < radius]
        out = np.concatenate([out, pts])
    return out[:n], False


def _admissible_sample(sys, constants, n, q, n_top, rng):
    """n Lebesgue samples outside every B_{R_j}(tau_j), q <= j <= n_top."""
    out = np.empty((0, sys.D), dtype=np.uint64)
    while out.shape[0] < n:
        pts = lebesgue_points(2 * n, sys.D, "pseudorandom", int(rng.integers(2**31)))
        keep = admissible_mask(constants, sys, pts, q, [n_top])[0]
        out = np.concatenate([out, pts[keep]])
    return out[:n]


def _fmt(raw_row) -> str:
    return ", ".join(f"{c:.17g}" for c in to_float(raw_row))


# ---------------------------------------------------------------------------
# individual checks
# ---------------------------------------------------------------------------

def check_ball_disjointness(constants, sys, js, horizon) -> list[CheckResult]:
    out = []
    for j in js:
        rep = check_disjointness(constants, sys.v, sys.theta_star, j, n_limit=horizon)
        status = {"pass": PASS, "fail": FAIL}.get(rep.status, UNCHECKED)
        out.append(
            CheckResult(
                f"disjointness j={j}", status, rep.min_margin, f"n={rep.witness_n}",
                f"d(tau_n, theta*) >= 2 r_j for n <= {rep.claimed_range} (checked {rep.n_checked})",
            )
        )
    return out


def check_zero_line_ftle(constants, sys, Ns, n_samples, horizon, rng) -> list[CheckResult]:
    """lambda_N(theta + v, 0) >= (1/2) log a for theta in B_{r_N}(theta*)."""
    out = []
    bound = 0.5 * math.log(constants.a)
    for N in Ns:
        r_N = radii(constants, N)[0]
        pts, collapsed = ball_samples(sys, r_N, n_samples, rng)
        lam = zero_line_ftle(sys, pts + sys.v.raw, N)
        margins = lam - bound
        i = int(np.argmin(margins))
        detail = f"lambda_N(theta+v, 0) >= (1/2) log a, r_N = {r_N:.3e}"
        if collapsed:
            detail += " (ball below lattice spacing: centre only)"
        out.append(CheckResult(f"zero-line ftle N={N}", _status(margins[i], N > horizon), float(margins[i]), _fmt(pts[i]), detail))
    return out


def check_near_pinch_ftle(constants, sys, Ns, n_samples, depth, horizon, rng) -> list[CheckResult]:
    """lambda_N(theta + v, phi(theta + v)) >= (log a)/4 for theta in B_{r~_N}(theta*).

    phi is the depth-``depth`` boundary line; any phi_n with n >= 1 obeys
    the same bound phi_n(theta + v) <= beta d(theta, theta*) that the
    argument uses for the limit graph.
    """
    out = []
    bound = 0.25 * math.log(constants.a)
    for N in Ns:
        r_tilde = constants.x_delta / constants.beta * constants.alpha ** (-(N - 1))
        pts, collapsed = ball_samples(sys, r_tilde, n_samples, rng)
        start = pts + sys.v.raw
        xs = boundary_lines(sys, start, depth)
        lam = ftle_batch(sys, start, xs, [N])[0]
        margins = lam - bound
        i = int(np.argmin(margins))
        detail = f"lambda_N >= (log a)/4 on the graph, r~_N = {r_tilde:.3e}"
        if collapsed:
            detail += " (ball below lattice spacing: centre only)"
        out.append(CheckResult(f"near-pinch ftle N={N}", _status(margins[i], N > horizon), float(margins[i]), _fmt(pts[i]), detail))
    return out


def check_s_counts(constants, sys, thetas, q, n_max, horizon) -> CheckResult:
    """s^n_{n-t} <= 11 t / m for n >= mq + 1, t >= mq."""
    m = constants.m
    n_lo = m * q + 1
    worst, wit = math.inf, ""
    for n in sorted({n_lo, (n_lo + n_max) // 2, n_max}):
        if n < n_lo:
            continue
        counts = s_counts(sys, constants, thetas, n)
        t = np.arange(m * q, n + 1)
        margins = 11.0 * t[:, None] / m - counts[n - t]
        k = np.unravel_index(np.argmin(margins), margins.shape)
        if margins[k] < worst:
            worst, wit = float(margins[k]), f"{_fmt(thetas[k[1]])}; n={n}, t={t[k[0]]}"
    if worst == math.inf:
        return CheckResult("s-count", PASS, worst, "", f"no n in [{n_lo}, {n_max}]")
    return CheckResult("s-count", _status(worst, n_max > horizon), worst, wit, "s^n_{n-t} <= 11 t / m")


def check_boundary_increments(constants, sys, thetas, q, n_max, horizon) -> list[CheckResult]:
    """|phi_n - phi_{n-1}| <= alpha^{-eta(n-1)} and the telescoped tail bound.

    Compared in log space: the bounds underflow long before n_max.
    """
    eta, log_alpha = constants.eta, math.log(constants.alpha)
    ladder = boundary_ladder(sys, thetas, n_max)
    n_lo = constants.m * q + 1
    beyond = n_max > horizon
    with np.errstate(divide="ignore"):
        # increments
        n = np.arange(n_lo, n_max + 1)
        log_inc = np.log(np.abs(ladder[n] - ladder[n - 1]))
        inc_margin = -eta * (n[:, None] - 1) * log_alpha - log_inc
        ii = np.unravel_index(np.argmin(inc_margin), inc_margin.shape)
        inc = CheckResult(
            "boundary increment", _status(inc_margin[ii], beyond), float(inc_margin[ii]),
            f"{_fmt(thetas[ii[1]])}; n={n[ii[0]]}", "log|phi_n - phi_{n-1}| <= -eta (n-1) log alpha",
        )
        # telescoping, mq <= k < n <= n_max; the bound only depends on k
        log_tail = lambda k: -eta * k * log_alpha - math.log1p(-math.exp(-eta * log_alpha))
        worst, wit = math.inf, ""
        for k in range(constants.m * q, n_max):
            spread = np.max(np.abs(ladder[k + 1:] - ladder[k]), axis=0)
            margins = log_tail(k) - np.log(spread)
            i = int(np.argmin(margins))
            if margins[i] < worst or not wit:
                worst, wit = float(margins[i]), f"{_fmt(thetas[i])}; k={k}"
    tele = CheckResult(
        "telescoping tail", _status(worst, beyond), worst, wit,
        "log|phi_n - phi_k| <= log(alpha^{-eta k} / (1 - alpha^{-eta}))",
    )
    return [inc, tele]


def check_bad_set(constants, sys, specs, n_samples, seed) -> list[CheckResult]:
    """Empirical frequency of B_{q,k0,N} <= closed-form bound + 3 stderr."""
    pts = lebesgue_points(n_samples, sys.D, "pseudorandom", seed)
    out = []
    for q, k0, N in specs:
        spec = BadSetSpec.build(constants, sys, q, k0, N)
        p = float(bad_set_members(spec, sys.v, pts).mean())
        se = math.sqrt(p * (1 - p) / n_samples)
        bound = bad_set_measure_bound(spec, constants, sys.D)
        margin = bound + 3 * se - p
        out.append(
            CheckResult(
                f"bad set q={q} k0={k0} N={N}", _status(margin), margin, f"frequency={p:.6g}",
                f"bound={bound:.6g}, stderr={se:.3g}, samples={n_samples}",
            )
        )
    return out


def verify(sys: PinchedSystem, constants: ConditionConstants, settings: VerifySettings = VerifySettings()) -> VerificationReport:
    """Run every check; the order of random draws is fixed by ``settings.seed``."""
    s = settings
    rng = np.random.default_rng(s.seed)
    checks: list[CheckResult] = []
    checks += check_ball_disjointness(constants, sys, s.disjoint_js, s.horizon)
    checks += check_zero_line_ftle(constants, sys, s.zero_line_Ns, s.n_samples, s.horizon, rng)
    checks += check_near_pinch_ftle(constants, sys, s.near_pinch_Ns, s.n_samples, s.graph_depth, s.horizon, rng)
    thetas = _admissible_sample(sys, constants, s.n_samples, s.q, s.n_max, rng)
    checks.append(check_s_counts(constants, sys, thetas, s.q, s.n_max, s.horizon))
    checks += check_boundary_increments(constants, sys, thetas, s.q, s.n_max, s.horizon)
    checks += check_bad_set(constants, sys, s.bad_set_specs, s.bad_set_samples, s.seed + 1)
    return VerificationReport(tuple(checks), sys.tag, constants, s)
