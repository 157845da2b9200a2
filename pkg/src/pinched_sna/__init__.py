"""Simulation and checking toolkit for pinched quasiperiodically forced interval maps.

The base is a rotation of the D-torus, the fibre maps are monotone on [0, 1]
and vanish identically over a pinch point.  The package approximates the
strange non-chaotic attractor, estimates the probability of non-negative
finite-time Lyapunov exponents and its exponential decay, and checks the
quantitative conditions and estimates behind that decay on concrete systems.
"""

__version__ = "0.1.0"

from .attractor import (
    BoundaryApprox,
    GraphMeasureSample,
    LyapunovEstimate,
    boundary_ladder,
    boundary_line,
    boundary_lines,
    graph_lyapunov,
    sample_physical_measure,
    sna_value,
    zero_graph,
)
from .bounds import (
    BadSetSpec,
    ConditionConstants,
    bad_set_measure_bound,
    bad_set_membership,
    check_disjointness,
    gamma_minus,
    kappa_zero,
    radii,
    s_count,
)
from .certify import CertificationReport, GridSpec, certify, search_constants, suggest_constants, sweep_kappa
from .config import ExperimentConfig, RunManifest
from .ftle import DecayFit, DecaySeries, decay_series, fit_decay, ftle, positive_ftle_probability
from .system import PinchedSystem, TanhFamily, fibre_compose, step, tanh_system
from .torus import (
    DiophantineEstimate,
    RotationVector,
    TorusPoint,
    estimate_diophantine,
    lebesgue_points,
    rotate,
    torus_distance,
)
from .verify import VerificationReport, VerifySettings, verify
