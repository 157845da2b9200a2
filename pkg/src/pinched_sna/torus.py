"""Arithmetic on the D-torus T^D = R^D / Z^D.

Points are stored as unsigned 64-bit fixed-point fractions: a coordinate
``u`` represents ``u / 2**64``.  Addition and integer multiples then wrap
modulo 1 exactly, so rotation orbits are bijective and reproducible to the
bit: ``rotate(rotate(p, v, a), v, b) == rotate(p, v, a + b)`` holds exactly,
and an orbit that returns to the pinch point hits it exactly.

Floating point only enters when a coordinate is handed to a fibre map or
when distances are measured.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from math import isqrt

import numpy as np

RAW_BITS = 64
_TWO64 = 2**RAW_BITS
_INV_TWO64 = 2.0**-RAW_BITS
_ONE_MINUS_ULP = float(np.nextafter(1.0, 0.0))

# enumeration cap for the rationality screen
_SCREEN_MAX_COMBINATIONS = 2_500_000

SAMPLERS = ("grid", "midpoint", "pseudorandom")


class ResonanceError(ValueError):
    """The rotation orbit of the pinch point returns to it (numerically)."""


# ---------------------------------------------------------------------------
# raw (fixed-point) helpers, vectorised over leading axes
# ---------------------------------------------------------------------------

def to_raw(coords) -> np.ndarray:
    """Quantise real coordinates to the fixed-point grid, reducing mod 1."""
    x = np.asarray(coords, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("torus coordinates must be finite")
    x = x - np.floor(x)
    # -1e-20 - floor(-1e-20) rounds to 1.0
    x = np.where(x >= 1.0, 0.0, x)
    return (x * float(_TWO64)).astype(np.uint64)


def to_float(raw) -> np.ndarray:
    """Fixed-point coordinates as floats in [0, 1)."""
    x = np.asarray(raw, dtype=np.uint64).astype(np.float64) * _INV_TWO64
    # values within 2**-54 of 1 round up to 1.0; keep them off the pinch at 0
    return np.minimum(x, _ONE_MINUS_ULP)


def as_offset(k) -> np.ndarray:
    """Signed integer multiples as their uint64 residues mod 2**64."""
    return np.asarray(k, dtype=np.int64).astype(np.uint64)


def shift_raw(raw, v_raw, k) -> np.ndarray:
    """``raw + k * v`` on the torus; ``k`` broadcasts against the point axis."""
    k = as_offset(k)
    return np.asarray(raw, dtype=np.uint64) + k[..., None] * np.asarray(v_raw, dtype=np.uint64)


def axis_distances(a, b) -> np.ndarray:
    """Per-coordinate wrap-around distances min(|a-b|, 1-|a-b|) as floats."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    fwd = a - b
    back = b - a
    return np.minimum(fwd, back).astype(np.float64) * _INV_TWO64


def distance_raw(a, b) -> np.ndarray:
    """Flat-torus Euclidean distance between fixed-point points (last axis = D)."""
    return np.sqrt(np.sum(axis_distances(a, b) ** 2, axis=-1))


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TorusPoint:
    """A point of T^D.  Construct with :meth:`from_coords` or :meth:`zero`."""

    raw: np.ndarray

    def __post_init__(self):
        raw = np.array(self.raw, dtype=np.uint64).reshape(-1)
        if raw.size == 0:
            raise ValueError("a torus point needs at least one coordinate")
        raw.setflags(write=False)
        object.__setattr__(self, "raw", raw)

    @classmethod
    def from_coords(cls, coords) -> "TorusPoint":
        return cls(to_raw(np.atleast_1d(np.asarray(coords, dtype=np.float64))))

    @classmethod
    def zero(cls, D: int) -> "TorusPoint":
        return cls(np.zeros(D, dtype=np.uint64))

    @property
    def D(self) -> int:
        return self.raw.size

    @property
    def coords(self) -> np.ndarray:
        return to_float(self.raw)

    def __add__(self, other: "TorusPoint") -> "TorusPoint":
        _check_dims(self, other)
        return TorusPoint(self.raw + other.raw)

    def __sub__(self, other: "TorusPoint") -> "TorusPoint":
        _check_dims(self, other)
        return TorusPoint(self.raw - other.raw)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TorusPoint):
            return NotImplemented
        return self.D == other.D and bool(np.all(self.raw == other.raw))

    def __hash__(self) -> int:
        return hash(self.raw.tobytes())

    def __repr__(self) -> str:
        inner = ", ".join(repr(float(c)) for c in self.coords)
        return f"{type(self).__name__}({inner})"


@dataclass(frozen=True, eq=False, repr=False)
class RotationVector(TorusPoint):
    """Rotation vector of the base dynamics.

    ``totally_irrational_checked`` records whether the brute-force
    rationality screen passed.  The screen is a heuristic: any vector stored
    with 64 fractional bits is rational in the strict sense.
    """

    totally_irrational_checked: bool = field(default=False)

    @classmethod
    def from_coords(cls, coords, screen: bool = True) -> "RotationVector":
        raw = to_raw(np.atleast_1d(np.asarray(coords, dtype=np.float64)))
        return cls.from_raw(raw, screen=screen)

    @classmethod
    def from_raw(cls, raw, screen: bool = True) -> "RotationVector":
        raw = np.asarray(raw, dtype=np.uint64).reshape(-1)
        passed = screen_totally_irrational(raw) if screen else False
        return cls(raw, totally_irrational_checked=passed)

    @classmethod
    def golden(cls, D: int = 1) -> "RotationVector":
        """Golden-mean rotation (D=1) or its generalisation for D >= 2.

        For D >= 2 the coordinates are ``phi_D**-i`` (i = 1..D) with
        ``phi_D`` the positive root of ``x**(D+1) = x + 1``; for D = 1 this is
        the golden mean (sqrt(5)-1)/2 itself.
        """
        if D < 1:
            raise ValueError("dimension must be >= 1")
        return cls.from_raw(_golden_raw(D), screen=True)


def _golden_raw(D: int) -> np.ndarray:
    if D == 1:
        # floor(((sqrt 5 - 1)/2) * 2**64) with exact integer square root
        return np.array([(isqrt(5 * _TWO64 * _TWO64) - _TWO64) // 2], dtype=np.uint64)
    out = []
    with localcontext() as ctx:
        ctx.prec = 60
        x = Decimal(1.5)
        for _ in range(200):
            step = (x ** (D + 1) - x - 1) / ((D + 1) * x**D - 1)
            x -= step
            if abs(step) < Decimal(10) ** -50:
                break
        for i in range(1, D + 1):
            frac = (1 / x**i) % 1
            out.append(int(frac * _TWO64) % _TWO64)
    return np.array(out, dtype=np.uint64)


@dataclass(frozen=True)
class DiophantineEstimate:
    """Best constant c with d(tau_n, theta*) >= c * n**-d witnessed for n <= n_max.

    Non-rigorous beyond the horizon ``n_max``.
    """

    c: float
    d: float
    n_max: int
    min_product: float
    argmin_n: int

    def __post_init__(self):
        if not self.d > 1:
            raise ValueError("Diophantine exponent d must exceed 1")
        if not (self.c > 0 and self.c <= self.min_product):
            raise ValueError("c must be a positive lower bound of the witnessed products")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _check_dims(p: TorusPoint, q: TorusPoint) -> None:
    if p.D != q.D:
        raise ValueError(f"dimension mismatch: {p.D} vs {q.D}")


def torus_distance(p: TorusPoint, q: TorusPoint) -> float:
    """Euclidean distance on the flat torus."""
    _check_dims(p, q)
    return float(distance_raw(p.raw, q.raw))


def rotate(p: TorusPoint, v: TorusPoint, n: int = 1) -> TorusPoint:
    """``p + n v`` mod 1, exact in the fixed-point representation."""
    _check_dims(p, v)
    return TorusPoint(shift_raw(p.raw, v.raw, n))


def ball_contains(center: TorusPoint, radius: float, p: TorusPoint) -> bool:
    """Membership in the open ball of the given radius."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    return torus_distance(center, p) < radius


def screen_totally_irrational(v_raw, depth: int = 64, tol: float = 1e-12) -> bool:
    """Reject vectors with a small integer relation <v, n> ~ 0 mod 1.

    All nonzero ``n`` with ``|n_i| <= depth`` are enumerated; the depth is
    reduced in high dimension to keep at most a few million combinations.
    Passing the screen is evidence, not proof, of total irrationality.
    """
    v_raw = np.asarray(v_raw, dtype=np.uint64).reshape(-1)
    D = v_raw.size
    depth = min(depth, max(1, int((_SCREEN_MAX_COMBINATIONS ** (1.0 / D) - 1) // 2)))
    ks = np.arange(-depth, depth + 1)
    acc = np.zeros(1, dtype=np.uint64)
    for i in range(D):
        acc = (acc[:, None] + as_offset(ks)[None, :] * v_raw[i]).reshape(-1)
    # the all-zero combination sits in the middle of the lexicographic grid
    zero_index = (acc.size - 1) // 2
    acc = np.delete(acc, zero_index)
    dist = np.minimum(acc, np.uint64(0) - acc).astype(np.float64) * _INV_TWO64
    return bool(np.all(dist >= tol))


def estimate_diophantine(
    v: TorusPoint, theta_star: TorusPoint, d_candidate: float, n_max: int
) -> DiophantineEstimate:
    """Witness ``c = min_{1<=n<=n_max} d(tau_n, theta*) * n**d``."""
    _check_dims(v, theta_star)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if not d_candidate > 1:
        raise ValueError("d_candidate must exceed 1")
    n = np.arange(1, n_max + 1)
    tau = shift_raw(theta_star.raw, v.raw, n)
    dist = distance_raw(tau, theta_star.raw)
    products = dist * n.astype(np.float64) ** d_candidate
    i = int(np.argmin(products))
    c = float(products[i])
    if not c > 0:
        raise ResonanceError(
            f"orbit of the pinch point returns to it at n={i + 1}; rotation is resonant"
        )
    return DiophantineEstimate(c=c, d=float(d_candidate), n_max=int(n_max), min_product=c, argmin_n=i + 1)


def lebesgue_points(n: int, D: int, sampler: str = "grid", seed: int | None = None) -> np.ndarray:
    """Lebesgue-distributed base points as a raw (n, D) array.

    ``grid``: the regular grid i/n in D=1, or the product grid with
    n**(1/D) points per axis (n must be a perfect D-th power).
    ``midpoint``: the same grid shifted by half a cell, avoiding 0.
    ``pseudorandom``: seeded uniform draws.

    Points lie on the 2**-53 lattice so their float coordinates are exact.
    """
    if n < 1:
        raise ValueError("need at least one point")
    if sampler in ("grid", "midpoint"):
        k = round(n ** (1.0 / D))
        if k**D != n:
            raise ValueError(f"{sampler} sampling in D={D} needs a perfect {D}-th power, got {n}")
        i = np.arange(k, dtype=np.uint64)
        # floor(i / k * 2**53), or floor((2i + 1) / (2k) * 2**53) for midpoints
        axis = _lattice_fractions(i, k) if sampler == "grid" else _lattice_fractions(2 * i + 1, 2 * k)
        mesh = np.stack(np.meshgrid(*([axis] * D), indexing="ij"), axis=-1).reshape(-1, D)
        return mesh << np.uint64(11)
    if sampler == "pseudorandom":
        if seed is None:
            raise ValueError("pseudorandom sampling needs a seed")
        rng = np.random.default_rng(seed)
        return rng.integers(0, 2**53, size=(n, D), dtype=np.uint64) << np.uint64(11)
    raise ValueError(f"unknown sampler {sampler!r}")


def _lattice_fractions(num: np.ndarray, den: int) -> np.ndarray:
    """floor(num * 2**53 / den) exactly in uint64, for 0 <= num < den < 2**32."""
    if den >= 2**32:
        raise ValueError("too many grid points per axis")
    q, r = divmod(2**53, den)
    num = np.asarray(num, dtype=np.uint64)
    return num * np.uint64(q) + (num * np.uint64(r)) // np.uint64(den)


def product_grid(points_per_axis: int, D: int) -> np.ndarray:
    """Uniform product grid (raw) with the given resolution per axis."""
    return lebesgue_points(points_per_axis**D, D, "grid")


__all__ = [
    "SAMPLERS",
    "DiophantineEstimate",
    "ResonanceError",
    "RotationVector",
    "TorusPoint",
    "axis_distances",
    "ball_contains",
    "distance_raw",
    "estimate_diophantine",
    "lebesgue_points",
    "product_grid",
    "rotate",
    "screen_totally_irrational",
    "shift_raw",
    "to_float",
    "to_raw",
]
