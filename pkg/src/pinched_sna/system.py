"""Pinched skew products (theta, x) -> (theta + v, F_theta(x)).

A :class:`PinchedSystem` couples a fibre family with a rotation vector and a
pinch point.  Fibre families receive base points as float arrays of shape
``(..., D)`` with coordinates in [0, 1) and fibre coordinates as arrays of
shape ``(...)``; they must be vectorised.

The orbit kernels (:func:`run_orbits`) advance many fibre orbits at once and
keep the base orbit in exact fixed point, so two orbits that visit the same
base point see bit-identical fibre maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .torus import RotationVector, TorusPoint, as_offset, to_float

LOG2 = math.log(2.0)

# elements per block in the zero-line fast path
_BLOCK_ELEMENTS = 1 << 20


class FibreFamily(Protocol):
    D: int

    def fibre_map(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray: ...

    def fibre_derivative(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray: ...

    def log_fibre_derivative(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray: ...

    @property
    def tag(self) -> str: ...


@dataclass(frozen=True)
class TanhFamily:
    """F_theta(x) = tanh(kappa x) * g(theta), g(theta) = mean_i sin(pi theta_i).

    With coordinates taken in [0, 1) every sin(pi theta_i) is non-negative, so
    g >= 0; the family relies on that representative range.  g vanishes only
    at theta = 0.
    """

    kappa: float
    D: int = 1

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.D < 1:
            raise ValueError("D must be >= 1")

    @property
    def tag(self) -> str:
        return f"tanh(kappa={self.kappa!r}, D={self.D})"

    def forcing(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        # sin(pi t) = sin(pi (1 - t)); the smaller representative is more accurate
        t = np.minimum(theta, 1.0 - theta)
        return np.mean(np.sin(np.pi * t), axis=-1)

    def fibre_map(self, theta, x):
        return np.tanh(self.kappa * np.asarray(x, dtype=np.float64)) * self.forcing(theta)

    def fibre_derivative(self, theta, x):
        y = self.kappa * np.asarray(x, dtype=np.float64)
        with np.errstate(over="ignore"):
            sech2 = 1.0 / np.cosh(y) ** 2
        return self.kappa * self.forcing(theta) * sech2

    def log_fibre_derivative(self, theta, x):
        y = np.abs(self.kappa * np.asarray(x, dtype=np.float64))
        log_sech2 = 2.0 * (LOG2 - y - np.log1p(np.exp(-2.0 * y)))
        with np.errstate(divide="ignore"):
            return math.log(self.kappa) + np.log(self.forcing(theta)) + log_sech2

    # analytic bounds used by the constant search

    def derivative_bound(self) -> float:
        """sup F'_theta(x) = kappa (attained at theta = 1/2, x = 0)."""
        return float(self.kappa)

    def log_contraction_bound(self, L0: float) -> float:
        """log of sup over theta and x >= L0 of F'_theta(x)."""
        return float(self.log_fibre_derivative(np.full(self.D, 0.5), L0))

    def theta_lipschitz(self) -> float:
        """Lipschitz constant of theta -> F_theta(x) in the Euclidean torus metric."""
        return float(np.tanh(self.kappa) * np.pi / np.sqrt(self.D))

    def x_delta(self, delta: float) -> float:
        """Largest x with sech^2(kappa x) >= 1 - delta."""
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        return float(np.arccosh(1.0 / np.sqrt(1.0 - delta)) / self.kappa)


@dataclass(frozen=True)
class PinchedSystem:
    """Skew product over the rotation by ``v`` with a pinch at ``theta_star``."""

    family: FibreFamily
    v: RotationVector
    theta_star: TorusPoint = field(default=None)

    def __post_init__(self):
        if self.theta_star is None:
            object.__setattr__(self, "theta_star", TorusPoint.zero(self.family.D))
        if self.v.D != self.family.D or self.theta_star.D != self.family.D:
            raise ValueError("rotation vector, pinch point and family must share D")
        xs = np.linspace(0.0, 1.0, 17)
        star = np.broadcast_to(self.theta_star.coords, (xs.size, self.D))
        if np.any(self.family.fibre_map(star, xs) != 0.0):
            raise ValueError("fibre map does not vanish identically over the pinch point")

    @property
    def D(self) -> int:
        return self.family.D

    @property
    def tag(self) -> str:
        return self.family.tag

    def fibre_map(self, theta: TorusPoint, x: float) -> float:
        return float(self.family.fibre_map(theta.coords, x))

    def fibre_derivative(self, theta: TorusPoint, x: float) -> float:
        return float(self.family.fibre_derivative(theta.coords, x))

    def log_fibre_derivative_at(self, theta_f: np.ndarray, x: np.ndarray) -> np.ndarray:
        fam = self.family
        if hasattr(fam, "log_fibre_derivative"):
            return fam.log_fibre_derivative(theta_f, x)
        with np.errstate(divide="ignore"):
            return np.log(fam.fibre_derivative(theta_f, x))


def tanh_system(kappa: float, D: int = 1, v: RotationVector | None = None) -> PinchedSystem:
    """The tanh family with the (generalised) golden-mean rotation by default."""
    return PinchedSystem(TanhFamily(kappa, D), v if v is not None else RotationVector.golden(D))


def _check_fibre(x) -> None:
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x >= 0.0) | ~(x <= 1.0)):
        raise ValueError("fibre coordinate must lie in [0, 1]")


# ---------------------------------------------------------------------------
# vectorised orbit kernel
# ---------------------------------------------------------------------------

@dataclass
class OrbitResult:
    x: np.ndarray                     # fibre coordinates after the last step
    log_sums: np.ndarray | None       # (len(checkpoints), M) cumulative log-derivative sums


def run_orbits(
    sys: PinchedSystem,
    anchor_raw: np.ndarray,
    x0,
    n_steps: int,
    checkpoints: Sequence[int] | None = None,
) -> OrbitResult:
    """Advance M fibre orbits from base points ``anchor_raw`` (M, D).

    Step l uses base point anchor + l v.  When ``checkpoints`` is given, the
    cumulative sums of log F' along each orbit are recorded after each listed
    number of steps; exact zero derivatives contribute -inf.  Once every orbit
    sits exactly on the invariant zero line the remaining steps are evaluated
    in blocks without further iteration.
    """
    base = np.array(anchor_raw, dtype=np.uint64, copy=True)
    if base.ndim == 1:
        base = base[None, :]
    M = base.shape[0]
    x = np.broadcast_to(np.asarray(x0, dtype=np.float64), (M,)).copy()
    v = sys.v.raw
    fam = sys.family
    track = checkpoints is not None
    cps = sorted(set(int(c) for c in checkpoints)) if track else []
    if cps and (cps[0] < 0 or cps[-1] > n_steps):
        raise ValueError("checkpoints must lie within [0, n_steps]")
    log_sums = np.zeros((len(cps), M)) if track else None
    acc = np.zeros(M)
    ci = 0
    while ci < len(cps) and cps[ci] == 0:
        ci += 1

    step = 0
    while step < n_steps:
        if not x.any():
            # zero line is invariant: only derivatives remain to be summed
            if track:
                _zero_line_tail(sys, base, step, n_steps, cps, ci, acc, log_sums)
            return OrbitResult(x, log_sums)
        theta = to_float(base)
        if track:
            acc = acc + sys.log_fibre_derivative_at(theta, x)
        x = fam.fibre_map(theta, x)
        base += v
        step += 1
        while ci < len(cps) and cps[ci] == step:
            log_sums[ci] = acc
            ci += 1
    return OrbitResult(x, log_sums)


def _zero_line_tail(sys, base, step, n_steps, cps, ci, acc, log_sums):
    M, D = base.shape
    v = sys.v.raw
    block = max(1, _BLOCK_ELEMENTS // max(1, M * D))
    zero = np.zeros(1)
    while step < n_steps:
        stop = n_steps if ci >= len(cps) else cps[ci]
        width = min(block, stop - step)
        offs = as_offset(np.arange(width))
        pts = base[None, :, :] + offs[:, None, None] * v
        logs = sys.log_fibre_derivative_at(to_float(pts), zero)
        acc += logs.sum(axis=0)
        base += np.uint64(width) * v
        step += width
        while ci < len(cps) and cps[ci] == step:
            log_sums[ci] = acc
            ci += 1


# ---------------------------------------------------------------------------
# scalar operations
# ---------------------------------------------------------------------------

def step(sys: PinchedSystem, theta: TorusPoint, x: float) -> tuple[TorusPoint, float]:
    """One application of the skew product."""
    _check_fibre(x)
    return TorusPoint(theta.raw + sys.v.raw), sys.fibre_map(theta, x)


def fibre_compose(sys: PinchedSystem, theta: TorusPoint, x: float, n: int) -> float:
    """F^n_theta(x) = F_{theta+(n-1)v} o ... o F_theta(x); n = 0 returns x."""
    _check_fibre(x)
    if n < 0:
        raise ValueError("n must be non-negative")
    return float(run_orbits(sys, theta.raw, x, n).x[0])


def fibre_orbit(sys: PinchedSystem, theta: TorusPoint, x: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Fibre orbit x_0..x_{n-1} and the derivatives F'_{theta+l v}(x_l) along it."""
    _check_fibre(x)
    xs = np.empty(n)
    ders = np.empty(n)
    base = theta.raw.copy()
    cur = float(x)
    for l in range(n):
        th = to_float(base)
        xs[l] = cur
        ders[l] = sys.family.fibre_derivative(th, cur)
        cur = float(sys.family.fibre_map(th, cur))
        base = base + sys.v.raw
    return xs, ders


def fibre_derivative_product(sys: PinchedSystem, theta: TorusPoint, x: float, n: int) -> list[float]:
    """Per-step factors of the chain rule for d/dx F^n_theta(x)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return fibre_orbit(sys, theta, x, n)[1].tolist()


def orbit_points(sys: PinchedSystem, theta: TorusPoint, ks) -> np.ndarray:
    """Raw base points theta + k v for an array of integers k, shape (len(ks), D)."""
    return theta.raw[None, :] + as_offset(np.asarray(ks))[:, None] * sys.v.raw
