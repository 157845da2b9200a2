"""Quantitative constants for pinched systems and the estimates built on them.

Covers the critical parameter kappa_0, the ball radii r_j / R_j around the
pinch orbit, disjointness of returns to the small balls, the count of visits
below 2 L0, the bad set B_{q,k0,N} with its Lebesgue bound, and the decay
rate gamma_- implied by the upper-bound argument.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .system import PinchedSystem, run_orbits
from .torus import RAW_BITS, TorusPoint, as_offset, distance_raw, lebesgue_points, to_float

# balls smaller than the fixed-point lattice spacing contain only their centre
LATTICE_RESOLUTION = 2.0**-RAW_BITS


@dataclass(frozen=True)
class ConditionConstants:
    """Constant set (alpha, beta, gamma, L0, m, a, b, c, d, delta, x_delta).

    ``kappa0`` optionally records the family parameter the set was found for.
    Construction does not enforce the inequalities between constants; that is
    the job of :func:`pinched_sna.certify.certify`.
    """

    alpha: float
    beta: float
    gamma: float
    L0: float
    m: int
    a: float
    b: float
    c: float
    d: float
    delta: float
    x_delta: float
    kappa0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "m", int(self.m))

    @property
    def eta(self) -> float:
        return self.gamma - 11.0 / self.m * (1.0 + self.gamma)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ConditionConstants":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names - {"eta"}
        if unknown:
            raise ValueError(f"unknown constant(s): {sorted(unknown)}")
        kw = {k: data[k] for k in names if k in data and data[k] is not None}
        return cls(**kw)

    def to_json(self) -> str:
        d = self.to_dict()
        d["eta"] = self.eta
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ConditionConstants":
        return cls.from_dict(json.loads(text))

    def replace(self, **changes) -> "ConditionConstants":
        d = self.to_dict()
        d.update(changes)
        return ConditionConstants(**d)


# ---------------------------------------------------------------------------
# kappa_0
# ---------------------------------------------------------------------------

def log_forcing_integral(D: int, n_samples: int = 10**6, seed: int = 0) -> tuple[float, float]:
    """Integral of log g over T^D, with its Monte Carlo stderr (0 for D = 1).

    D = 1 uses adaptive quadrature on the symmetric half interval, which
    handles the logarithmic endpoint singularity.
    """
    if D < 1:
        raise ValueError("D must be >= 1")
    if D == 1:
        val, _ = integrate.quad(lambda t: math.log(math.sin(math.pi * t)), 0.0, 0.5, epsabs=1e-14, epsrel=1e-13, limit=200)
        return 2.0 * val, 0.0
    pts = to_float(lebesgue_points(n_samples, D, "pseudorandom", seed))
    t = np.minimum(pts, 1.0 - pts)
    logs = np.log(np.mean(np.sin(np.pi * t), axis=-1))
    return float(logs.mean()), float(logs.std(ddof=1) / math.sqrt(n_samples))


def kappa_zero(D: int, n_samples: int = 10**6, seed: int = 0) -> float:
    """kappa_0 = exp(-integral of log g); the zero line repels iff kappa > kappa_0."""
    return math.exp(-log_forcing_integral(D, n_samples, seed)[0])


def kappa_zero_estimate(D: int, n_samples: int = 10**6, seed: int = 0) -> tuple[float, float]:
    """kappa_0 and a delta-method stderr."""
    mean, se = log_forcing_integral(D, n_samples, seed)
    k0 = math.exp(-mean)
    return k0, k0 * se


# ---------------------------------------------------------------------------
# radii and ball disjointness
# ---------------------------------------------------------------------------

def radii(constants: ConditionConstants, j: int) -> tuple[float, float]:
    """(r_j, R_j) = (b/2) a^{-(j-1)}, (b/2) a^{-(j-1)/m}."""
    if j < 1:
        raise ValueError("j must be >= 1")
    half_b = constants.b / 2.0
    return half_b * constants.a ** (-(j - 1)), half_b * constants.a ** (-(j - 1) / constants.m)


def return_range(constants: ConditionConstants, j: int) -> int:
    """Number of rotation steps over which returns to B_{r_j}(theta*) are excluded."""
    return constants.m - 1 if j == 1 else (constants.m + 1) ** (j - 1)


@dataclass(frozen=True)
class DisjointnessReport:
    j: int
    claimed_range: int
    n_checked: int
    min_margin: float       # min over n of d(theta*, tau_n) - 2 r_j
    witness_n: int          # n attaining the minimum (a violation when status is "fail")
    status: str             # "pass" | "fail" | "unchecked-beyond-horizon"

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def check_disjointness(
    constants: ConditionConstants, v: TorusPoint, theta_star: TorusPoint, j: int, n_limit: int | None = None
) -> DisjointnessReport:
    """Brute-force d(theta*, tau_n) >= 2 r_j over the claimed range of n.

    A distance of at least 2 r_j is exactly disjointness of the two open balls
    B_{r_j}(theta*) and B_{r_j}(theta*) + n v.  The range is capped at
    ``n_limit``; when the cap cuts it short and no violation was found the
    status is ``unchecked-beyond-horizon``.
    """
    claimed = return_range(constants, j)
    n_max = claimed if n_limit is None else min(claimed, n_limit)
    if n_max < 1:
        return DisjointnessReport(j, claimed, 0, math.inf, 0, "pass")
    r_j = radii(constants, j)[0]
    n = np.arange(1, n_max + 1)
    tau = theta_star.raw[None, :] + as_offset(n)[:, None] * v.raw
    margins = distance_raw(tau, theta_star.raw) - 2.0 * r_j
    i = int(np.argmin(margins))
    if margins[i] < 0:
        status = "fail"
    elif n_max < claimed:
        status = "unchecked-beyond-horizon"
    else:
        status = "pass"
    return DisjointnessReport(j, claimed, n_max, float(margins[i]), i + 1, status)


# ---------------------------------------------------------------------------
# visits below 2 L0
# ---------------------------------------------------------------------------

def top_orbit(sys: PinchedSystem, thetas_raw: np.ndarray, n: int) -> np.ndarray:
    """x_j = F^j_{theta_0}(1) with theta_0 = theta - n v, for j = 0..n; shape (n+1, M)."""
    thetas_raw = np.atleast_2d(np.asarray(thetas_raw, dtype=np.uint64))
    M = thetas_raw.shape[0]
    out = np.empty((n + 1, M))
    x = np.ones(M)
    out[0] = x
    fam = sys.family
    for j in range(n):
        theta_j = to_float(thetas_raw + as_offset(j - n) * sys.v.raw)
        x = fam.fibre_map(theta_j, x)
        out[j + 1] = x
    return out


def s_counts(sys: PinchedSystem, constants: ConditionConstants, thetas_raw: np.ndarray, n: int) -> np.ndarray:
    """s^n_k for all k = 0..n at each base point, shape (n+1, M)."""
    below = top_orbit(sys, thetas_raw, n)[:n] < 2.0 * constants.L0
    # s^n_k = number of j in [k, n) below threshold: reverse cumulative sum
    counts = np.zeros((n + 1, below.shape[1]), dtype=np.int64)
    counts[:n] = np.cumsum(below[::-1], axis=0)[::-1]
    return counts


def s_count(sys: PinchedSystem, constants: ConditionConstants, theta: TorusPoint, k: int, n: int) -> int:
    """s^n_k(theta) = #{k <= j < n : x_j < 2 L0}."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    return int(s_counts(sys, constants, theta.raw[None, :], n)[k, 0])


# ---------------------------------------------------------------------------
# bad set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BadSetSpec:
    """B_{q,k0,N}: theta whose orbit theta_k = theta + (k - N) v, k0 <= k <= N,
    enters some ball B_{R_j}(tau_j) with j >= q.

    The infinite union over j is truncated at the last j whose radius exceeds
    the fixed-point lattice spacing: smaller balls contain only their centre.
    """

    q: int
    k0: int
    N: int
    radii: np.ndarray       # R_q, R_{q+1}, ..., strictly decreasing
    centers: np.ndarray     # raw tau_q, tau_{q+1}, ...

    @classmethod
    def build(cls, constants: ConditionConstants, sys: PinchedSystem, q: int, k0: int, N: int) -> "BadSetSpec":
        if q < 1 or k0 < 0 or N < k0:
            raise ValueError("need q >= 1 and 0 <= k0 <= N")
        # last j with R_j > resolution
        log_ratio = math.log(constants.b / 2.0 / LATTICE_RESOLUTION)
        j_last = max(q, int(math.floor(1 + constants.m * log_ratio / math.log(constants.a))))
        js = np.arange(q, j_last + 1)
        R = constants.b / 2.0 * constants.a ** (-(js - 1) / constants.m)
        keep = R > LATTICE_RESOLUTION
        js, R = js[keep], R[keep]
        centers = sys.theta_star.raw[None, :] + as_offset(js)[:, None] * sys.v.raw
        return cls(q, k0, N, R, centers)


def bad_set_members(spec: BadSetSpec, v: TorusPoint, thetas_raw: np.ndarray) -> np.ndarray:
    """Membership of each row of a raw (M, D) array in B_{q,k0,N}.

    theta_k in B_{R_j}(tau_j) iff theta in B_{R_j}(tau_{j+N-k}), since the
    torus metric is translation invariant and shifts are exact.  Balls sharing
    a centre tau_s nest, so only the largest, j = max(q, s - (N - k0)), is
    tested.
    """
    thetas_raw = np.atleast_2d(np.asarray(thetas_raw, dtype=np.uint64))
    hit = np.zeros(thetas_raw.shape[0], dtype=bool)
    if spec.radii.size == 0:
        return hit
    span = spec.N - spec.k0
    j_last = spec.q + spec.radii.size - 1
    base = spec.centers[0] - as_offset(spec.q) * v.raw      # theta*
    for s in range(spec.q, j_last + span + 1):
        j = max(spec.q, s - span)
        if j > j_last:
            break
        center = base + as_offset(s) * v.raw
        hit |= distance_raw(thetas_raw, center) < spec.radii[j - spec.q]
    return hit


def bad_set_membership(spec: BadSetSpec, v: TorusPoint, theta: TorusPoint) -> bool:
    return bool(bad_set_members(spec, v, theta.raw[None, :])[0])


def unit_ball_volume(D: int) -> float:
    return math.pi ** (D / 2.0) / special.gamma(D / 2.0 + 1.0)


def bad_set_constant(constants: ConditionConstants, D: int) -> float:
    """c(D) = zeta_D (b/2)^D / (1 - a^{-D/m})."""
    return unit_ball_volume(D) * (constants.b / 2.0) ** D / (1.0 - constants.a ** (-D / constants.m))


def bad_set_measure_bound(spec: BadSetSpec, constants: ConditionConstants, D: int) -> float:
    """(N - k0 + 1) a^{-(q-1)D/m} c(D)."""
    return (spec.N - spec.k0 + 1) * constants.a ** (-(spec.q - 1) * D / constants.m) * bad_set_constant(constants, D)


# ---------------------------------------------------------------------------
# decay rate
# ---------------------------------------------------------------------------

def gamma_minus(constants: ConditionConstants, epsilon: float, D: int) -> float:
    """(log a) epsilon D / (2 m)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return math.log(constants.a) * epsilon * D / (2.0 * constants.m)


def admissible_mask(
    constants: ConditionConstants, sys: PinchedSystem, thetas_raw: np.ndarray, q: int, n_values: Sequence[int]
) -> np.ndarray:
    """For each n, whether theta avoids every B_{R_j}(tau_j), q <= j <= n.

    Returns a boolean array (len(n_values), M).
    """
    thetas_raw = np.atleast_2d(np.asarray(thetas_raw, dtype=np.uint64))
    n_values = list(n_values)
    n_top = max(n_values)
    M = thetas_raw.shape[0]
    first_hit = np.full(M, np.iinfo(np.int64).max)
    for j in range(n_top, q - 1, -1):
        R = radii(constants, j)[1]
        center = sys.theta_star.raw + as_offset(j) * sys.v.raw
        inside = distance_raw(thetas_raw, center) < R
        first_hit[inside] = j
    return np.array([first_hit > n for n in n_values])


def zero_line_ftle(sys: PinchedSystem, thetas_raw: np.ndarray, N: int) -> np.ndarray:
    """lambda_N(theta, 0) for each row."""
    return run_orbits(sys, thetas_raw, 0.0, N, checkpoints=[N]).log_sums[0] / N
